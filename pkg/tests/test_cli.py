import json

import pytest

from spectralstab.cli import EXIT_CHECK, EXIT_OK, EXIT_USAGE, UsageError, coerce, config_hash, main, parse_config_text


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("value,default,expected", [
    ("3", 1, 3), ("0.5", 1.0, 0.5), ("1e-3,1e-4", (0.1,), (1e-3, 1e-4)), ("none", 6, None),
    ("true", False, True), ("abc", "x", "abc"), ("1,2", None, (1, 2)),
])
def test_coerce(value, default, expected):
    assert coerce(value, default) == expected


@pytest.mark.parametrize("value,default", [("x", 1), ("1.5", 2), ("maybe", True), ("abc", 1.0)])
def test_coerce_rejects(value, default):
    with pytest.raises(UsageError):
        coerce(value, default)


def test_config_parsing():
    cfg = parse_config_text("# comment\nlevel = 4\nout-dir = res  # trailing\n\nlevel=5\n")
    assert cfg == {"level": "5", "out_dir": "res"}
    with pytest.raises(UsageError):
        parse_config_text("just words")


def test_config_hash_ignores_output_location():
    assert config_hash({"a": "1", "out_dir": "x"}) == config_hash({"a": "1", "out_dir": "y"})
    assert config_hash({"a": "1"}) != config_hash({"a": "2"})


def test_eig_round_sphere(tmp_path, capsys):
    out = tmp_path / "eig.json"
    code, text, _ = run(capsys, "eig", "--mesh", "icosphere:4", "--k", "3", "--out", str(out))
    assert code == EXIT_OK
    assert "lambdabar_1 = 25.1" in text
    manifest = json.loads(out.with_suffix(".manifest.json").read_text())
    assert set(manifest) >= {"config_hash", "versions", "seed", "outputs"}
    assert "eig.json" in manifest["outputs"]


def test_mesh_and_measure_files(tmp_path, capsys):
    mesh = tmp_path / "m.json"
    mu = tmp_path / "mu.json"
    assert run(capsys, "mesh-gen", "--mesh", "icosphere:3", "--out", str(mesh))[0] == EXIT_OK
    assert run(capsys, "measure-gen", "--mesh", str(mesh), "--kind", "family:bump", "--out", str(mu))[0] == EXIT_OK
    code, text, _ = run(capsys, "balance", "--measure", str(mu), "--mesh", str(mesh), "--out",
                        str(tmp_path / "b.json"))
    assert code == EXIT_OK and "residual" in text
    code, text, _ = run(capsys, "audit", "hersch", "--measure", str(mu), "--set", "levels=3",
                        "--out-dir", str(tmp_path / "res"))
    assert code == EXIT_OK, text
    assert (tmp_path / "res" / "hersch.csv").read_text().startswith("param,lhs,rhs,margin,pass")


def test_usage_errors(tmp_path, capsys):
    code, _, err = run(capsys, "eig", "--mesh", str(tmp_path / "missing.json"))
    assert code == EXIT_USAGE and "missing.json" in err
    code, _, err = run(capsys, "audit", "nope")
    assert code == EXIT_USAGE and "hersch" in err
    code, _, err = run(capsys, "audit", "robin", "--set", "bogus=1", "--out-dir", str(tmp_path))
    assert code == EXIT_USAGE and "bogus" in err
    assert run(capsys, "measure-gen", "--mesh", "icosphere:1", "--kind", "weird")[0] == EXIT_USAGE
    assert run(capsys, "eig", "--mesh", "icosphere:1", "--tol", "-1")[0] == EXIT_USAGE
    assert run(capsys, "plotdata")[0] == EXIT_USAGE
    assert run(capsys, "eig")[0] == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text('{"rows": 3}')
    assert run(capsys, "plotdata", str(bad))[0] == EXIT_USAGE


def test_failing_audit_exits_one(tmp_path, capsys, monkeypatch):
    from spectralstab import experiments
    from spectralstab.reports import StabilityReport

    def always_fails(level: int = 1):
        rep = StabilityReport("always_fails", {"level": level})
        rep.add(f"level={level}:check", 0.0, 1.0)
        return rep
    monkeypatch.setitem(experiments.EXPERIMENTS, "always_fails", always_fails)
    code, text, _ = run(capsys, "audit", "always_fails", "--set", "level=2", "--out-dir", str(tmp_path))
    assert code == EXIT_CHECK and "FAIL level=2:check" in text
    assert (tmp_path / "always_fails.csv").read_text().splitlines()[1].endswith("false")


def test_audit_is_byte_identical(tmp_path, capsys):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        code, _, _ = run(capsys, "--deterministic", "audit", "robin", "--eps", "1e-3,1e-4",
                         "--set", "sphere_level=none", "--seed", "0", "--out-dir", str(d))
        assert code == EXIT_OK
    for name in ("robin.json", "robin.csv", "robin.rows.csv"):
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()
    # manifests differ only in the recorded output directory
    m = [json.loads((d / "robin.manifest.json").read_text()) for d in dirs]
    for x in m:
        x["config"].pop("out_dir")
    assert m[0] == m[1]


def test_plotdata(tmp_path, capsys):
    run(capsys, "audit", "robin", "--eps", "1e-3", "--set", "sphere_level=none", "--out-dir", str(tmp_path))
    code, _, _ = run(capsys, "plotdata", str(tmp_path / "robin.json"), "--out-dir", str(tmp_path / "p"))
    assert code == EXIT_OK
    lines = (tmp_path / "p" / "robin.plot.csv").read_text().splitlines()
    assert lines[0] == "param,lhs,rhs,margin,pass" and len(lines) == 2
