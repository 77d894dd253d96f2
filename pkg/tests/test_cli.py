import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracorn import cli
from fracorn.config import ConfigError, ExperimentConfig, from_dict, parse, serialize


def _write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _body(csv_text):
    # drop the runtime column
    rows = [line.split(",") for line in csv_text.strip().splitlines()]
    k = rows[0].index("runtime_s")
    return [r[:k] + r[k + 1:] for r in rows]


field_specs = st.sampled_from([{"name": "identity", "params": {}}, {"name": "shear", "params": {"amplitude": 2.0}},
                               {"name": "random_trig", "params": {"seed": 3}}])


@given(st.sampled_from(["seminorm", "hardy", "convergence"]), st.lists(field_specs, max_size=3),
       st.floats(0.05, 0.95), st.floats(1.1, 4.0), st.lists(st.sampled_from([0.25, 0.125, 0.0625]), min_size=1),
       st.integers(0, 99), st.integers(1, 8))
def test_config_round_trip(sub, fields, s, p, hs, seed, threads):
    cfg = from_dict({"subcommand": sub, "fields": fields, "params": {"s": s, "p": p}, "h": hs,
                     "seed": seed, "threads": threads, "domain": {"type": "unit_square"}})
    assert parse(serialize(cfg)) == cfg


@pytest.mark.parametrize("text, where", [
    ("subcommand: seminorm\ndomain: {type: blob}\n", "domain.type"),
    ("subcommand: seminorm\nfields: [{name: nope}]\n", "fields[0].name"),
    ("subcommand: seminorm\nparams: {s: 1.5, p: 2}\n", "params.s"),
    ("subcommand: seminorm\nh: [-1]\n", "h[0]"),
    ("subcommand: seminorm\nbogus: 1\n", "bogus"),
    ("subcommand: seminorm\nfields: [\n", "line"),
])
def test_config_errors_name_the_field(text, where):
    with pytest.raises(ConfigError) as exc:
        parse(text)
    assert exc.value.where.startswith(where)


def test_seminorm_constant_field_is_zero(tmp_path, capsys):
    path = _write(tmp_path, "fields: [{name: constant}]\nh: [0.125]\noptions: {kinds: [gagliardo, projected]}\n")
    assert cli.main(["seminorm", "--config", path]) == 0
    rows = _body(capsys.readouterr().out)
    k = rows[0].index("value")
    assert [r[k] for r in rows[1:]] == ["0", "0"]


def test_runs_are_deterministic(tmp_path, capsys):
    path = _write(tmp_path, "fields: [{name: shear}, {name: random_trig, params: {seed: 2}}]\nh: [0.125]\n")
    cli.main(["seminorm", "--config", path])
    a = capsys.readouterr().out
    cli.main(["seminorm", "--config", path, "--threads", "3"])
    b = capsys.readouterr().out
    assert _body(a) == _body(b)


def test_convergence_rows(tmp_path, capsys):
    path = _write(tmp_path, "fields: [{name: shear}]\nh: [0.25, 0.125, 0.0625]\n")
    assert cli.main(["convergence", "--config", path]) == 0
    rows = _body(capsys.readouterr().out)
    k = rows[0].index("row")
    assert [r[k] for r in rows[1:]] == ["h", "h", "h", "extrapolate"]


def test_json_mirrors_csv(tmp_path, capsys):
    path = _write(tmp_path, "fields: [{name: identity}]\nh: [0.125]\n")
    out = tmp_path / "rep"
    assert cli.main(["seminorm", "--config", path, "--out", str(out)]) == 0
    data = json.loads((tmp_path / "rep.json").read_text())
    csv_rows = (tmp_path / "rep.csv").read_text().strip().splitlines()
    assert data["columns"] == csv_rows[0].split(",")
    assert len(data["rows"]) == len(csv_rows) - 1
    assert "%.17g" % data["rows"][0]["value"] == csv_rows[1].split(",")[data["columns"].index("value")]


def test_exit_codes(tmp_path):
    assert cli.main(["seminorm", "--config", _write(tmp_path, "domain: {type: blob}\n")]) == 2
    assert cli.main(["seminorm", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert cli.main(["seminorm"]) == 2
    assert cli.main(["not-a-command"]) == 2
    assert cli.main(["seminorm", "--config", _write(tmp_path, "h: [0.5]\n")]) == 3


def test_thread_resolution(monkeypatch):
    cfg = ExperimentConfig("seminorm", threads=2)
    assert cli.resolve_threads(None, cfg) == 2
    monkeypatch.setenv("FRACORN_THREADS", "5")
    assert cli.resolve_threads(None, cfg) == 5
    assert cli.resolve_threads(3, cfg) == 3
    monkeypatch.setenv("FRACORN_THREADS", "zero")
    with pytest.raises(ConfigError):
        cli.resolve_threads(None, cfg)


@pytest.mark.parametrize("sub, text", [
    ("cover", "domain: {type: angular, alpha: 1.0}\n"),
    ("hardy", "domain: {type: half_space}\nfields: [{name: identity}]\nh: [0.125]\n"),
    ("extend", "domain: {type: half_space}\nfields: [{name: shear}]\nh: [0.125]\n"),
    ("korn-constant", "h: [0.125]\noptions: {degrees: [1]}\n"),
    ("perisolve", "h: [0.125]\noptions: {degree: 1}\n"),
    ("probe-ps-lt-1", "params: {s: 0.2, p: 2}\nh: [0.125]\noptions: {scales: [0.2, 0.1]}\n"),
])
def test_subcommands_run(tmp_path, capsys, sub, text):
    assert cli.main([sub, "--config", _write(tmp_path, text)]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) >= 2


def test_acceptance_subcommand_reports_failure(tmp_path, monkeypatch, capsys):
    from fracorn import acceptance
    real = acceptance.SuiteContext

    def broken(threads=1):
        return real(threads=threads, coeff_override={"k": 3.0})
    monkeypatch.setattr(acceptance, "SuiteContext", broken)
    path = _write(tmp_path, "options: {criteria: [4]}\n")
    assert cli.main(["acceptance", "--config", path]) == 4
    assert "[FAIL]  4" in capsys.readouterr().out
