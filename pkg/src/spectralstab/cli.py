"""Command-line front end: ``spectralstab <command> ...``.

Commands: ``eig``, ``balance``, ``audit``, ``plotdata``, ``mesh-gen`` and
``measure-gen``.  Options may come from a flat ``key = value`` config file
(``--config``) and be overridden by flags and ``--set key=value``.  Every
run that writes files also writes a manifest with the config hash, library
versions and seed.

Exit codes: 0 success, 1 a check failed, 2 usage or input error, 3 numeric
failure.  ``SPECTRALSTAB_THREADS`` sets the BLAS/OpenMP thread count;
``--deterministic`` forces one thread.
"""
from __future__ import annotations

import argparse
import hashlib
import inspect
import json
import os
import platform
import sys
from pathlib import Path

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
THREAD_ENV = "SPECTRALSTAB_THREADS"
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")
# flags that map onto differently named experiment parameters
ALIASES = {"robin": {"eps": "eps_grid"}, "concentration": {"eps": "eps_grid", "M": "couplings"}}
MEASURE_AWARE = ("hersch", "bubbling", "lemma21")


class UsageError(Exception):
    pass


def _set_threads(deterministic: bool):
    n = "1" if deterministic else os.environ.get(THREAD_ENV)
    if n:
        for var in _THREAD_VARS:
            os.environ[var] = n


# ------------------------------------------------------------------ config
def parse_config_text(text: str, source: str = "config") -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; later keys win."""
    out = {}
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{i}: expected key = value, got {raw.strip()!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise UsageError(f"{source}:{i}: empty key")
        out[k.replace("-", "_")] = v
    return out


def load_config(path) -> dict:
    p = Path(path)
    if not p.is_file():
        from .io import MissingFileError
        raise MissingFileError(p)
    return parse_config_text(p.read_text(encoding="utf-8"), str(p))


def _scalar(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("none", "null"):
        return None
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    return t


def coerce(value, default):
    """Convert a config string to the type suggested by a parameter default."""
    if not isinstance(value, str):
        return value
    if isinstance(default, (tuple, list)):
        return tuple(_scalar(x) for x in value.split(",") if x.strip())
    if isinstance(default, bool):
        v = _scalar(value)
        if not isinstance(v, bool):
            raise UsageError(f"expected a boolean, got {value!r}")
        return v
    if isinstance(default, float):
        v = _scalar(value)
        if v is None:
            return None
        try:
            return float(v)
        except (TypeError, ValueError):
            raise UsageError(f"expected a number, got {value!r}") from None
    if isinstance(default, int):
        v = _scalar(value)
        if v is None or isinstance(v, int):
            return v
        raise UsageError(f"expected an integer, got {value!r}")
    if isinstance(default, str):
        return value
    if "," in value:
        return tuple(_scalar(x) for x in value.split(",") if x.strip())
    return _scalar(value)


# output locations do not change results and are left out of the hash
_LOCATION_KEYS = ("out", "out_dir")


def config_hash(config: dict) -> str:
    blob = json.dumps({k: v for k, v in config.items() if k not in _LOCATION_KEYS},
                      sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _versions() -> dict:
    import numpy
    import scipy

    from . import __version__
    return {"spectralstab": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_manifest(path, command: str, config: dict, seed, deterministic: bool, outputs) -> Path:
    from .io import write_json
    files = {}
    for f in outputs:
        files[Path(f).name] = hashlib.sha256(Path(f).read_bytes()).hexdigest()
    return write_json(path, {"command": command, "config": {k: str(v) for k, v in sorted(config.items())},
                             "config_hash": config_hash(config), "versions": _versions(), "seed": seed,
                             "deterministic": deterministic, "outputs": files})


def _print(line: str):
    sys.stdout.write(line + "\n")
    sys.stdout.flush()


def _collect(args, keys) -> dict:
    """Config file first, then explicit flags, then ``--set`` overrides."""
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v if isinstance(v, str) else str(v)
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        cfg[k.strip().replace("-", "_")] = v.strip()
    return cfg


def _measure_from(cfg: dict, mesh):
    from .io import load_measure
    from .measure import uniform_measure
    ref = cfg.get("measure", "uniform")
    if ref in (None, "", "uniform"):
        return uniform_measure(mesh)
    mu, _ = load_measure(ref, mesh)
    return mu


def _mesh_from(cfg: dict, required=True):
    from .io import resolve_mesh
    if "mesh" not in cfg:
        if required:
            raise UsageError("a mesh is required (--mesh SPEC or mesh file)")
        return None
    return resolve_mesh(cfg["mesh"])


def _outdir(cfg: dict) -> Path:
    p = Path(cfg.get("out_dir") or "results")
    p.mkdir(parents=True, exist_ok=True)
    return p


# ----------------------------------------------------------------- commands
def cmd_mesh_gen(args) -> int:
    from .io import save_mesh
    cfg = _collect(args, ["mesh", "out"])
    mesh = _mesh_from(cfg)
    out = Path(cfg.get("out") or "mesh.json")
    save_mesh(mesh, out)
    _print(f"mesh {mesh.topology}: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles -> {out}")
    return EXIT_OK


def cmd_measure_gen(args) -> int:
    import numpy as np

    from .experiments import HERSCH_FAMILY
    from .io import save_measure
    from .measure import MeasureOnMesh, cap_concentration_measure, density_from_function, nearest_vertex
    cfg = _collect(args, ["mesh", "kind", "out"])
    mesh = _mesh_from(cfg)
    kind = cfg.get("kind", "uniform")
    if kind == "uniform":
        mu = MeasureOnMesh(np.ones(mesh.n_vertices), label="uniform")
    elif kind == "caps":
        mu = cap_concentration_measure(mesh, float(cfg.get("eps", 0.05)), float(cfg.get("coupling", 1.0)))
    elif kind == "atom":
        point = coerce(cfg.get("point", "0,0,1"), ())
        v = nearest_vertex(mesh, np.asarray(point, dtype=float))
        mu = MeasureOnMesh(np.full(mesh.n_vertices, float(cfg.get("base", 1.0))),
                           ((v, float(cfg.get("weight", 4 * np.pi))),), label="atom")
    elif kind.startswith("family:") and kind.split(":", 1)[1] in HERSCH_FAMILY:
        name = kind.split(":", 1)[1]
        mu = density_from_function(mesh, HERSCH_FAMILY[name], label=name)
    else:
        raise UsageError(f"unknown measure kind {kind!r}; use uniform, caps, atom or "
                         f"family:<{'|'.join(HERSCH_FAMILY)}>")
    out = Path(cfg.get("out") or "measure.json")
    save_measure(mu, cfg["mesh"], out)
    _print(f"measure {mu.label or kind}: {len(mu.atoms)} atoms -> {out}")
    return EXIT_OK


def cmd_eig(args) -> int:
    from .eigen import eigen_of_measure
    from .io import write_json
    from .reports import fmt
    cfg = _collect(args, ["mesh", "measure", "k", "tol", "seed", "out"])
    mesh = _mesh_from(cfg)
    mu = _measure_from(cfg, mesh)
    k = int(cfg.get("k", 1))
    tol = float(cfg.get("tol", 1e-8))
    if not tol > 0:
        raise UsageError("tolerances must be positive")
    seed = int(cfg.get("seed", 0))
    res = eigen_of_measure(mesh, mu, k=k, tol=tol, seed=seed)
    for i in range(1, res.k + 1):
        _print(f"lambda_{i} = {fmt(res.eigenvalues[i])}  lambdabar_{i} = {fmt(res.normalized[i])}")
    out = Path(cfg.get("out") or Path(cfg.get("out_dir") or ".") / "eig.json")
    write_json(out, res.to_dict())
    write_manifest(out.with_suffix(".manifest.json"), "eig", cfg, seed, args.deterministic, [out])
    return EXIT_OK


def cmd_balance(args) -> int:
    from .io import write_json
    from .moebius import hersch_balance
    from .reports import fmt
    cfg = _collect(args, ["mesh", "measure", "method", "out"])
    mesh = _mesh_from(cfg)
    mu = _measure_from(cfg, mesh)
    b = hersch_balance(mesh, mu, method=cfg.get("method", "quadrature"))
    _print("a = (" + ", ".join(fmt(x) for x in b.a.a) + f")  residual = {fmt(b.residual)}")
    out = Path(cfg.get("out") or "balance.json")
    write_json(out, b.to_dict())
    write_manifest(out.with_suffix(".manifest.json"), "balance", cfg, None, args.deterministic, [out])
    return EXIT_OK


def _experiment_kwargs(name: str, fn, cfg: dict) -> dict:
    sig = inspect.signature(fn)
    alias = ALIASES.get(name, {})
    skip = {"out_dir", "measure", "deterministic", "mesh"}
    kw = {}
    for key, val in cfg.items():
        if key in skip:
            continue
        target = alias.get(key, key)
        if target == "seed" and "seed" not in sig.parameters:
            continue  # deterministic experiment: the seed is only recorded in the manifest
        if target not in sig.parameters:
            allowed = sorted(set(sig.parameters) | set(alias))
            raise UsageError(f"experiment {name!r} has no parameter {key!r}; allowed: {', '.join(allowed)}")
        kw[target] = coerce(val, sig.parameters[target].default)
    return kw


def _run_audit(name: str, cfg: dict):
    from .experiments import EXPERIMENTS, hersch_stability_audit, lambda2_bubbling_audit, lemma21_audit
    if "measure" in cfg and cfg["measure"] not in ("", "uniform"):
        if name not in MEASURE_AWARE:
            raise UsageError(f"experiment {name!r} does not take a measure file")
        from .io import load_measure
        mu, mesh = load_measure(cfg["measure"])
        rest = {k: v for k, v in cfg.items() if k not in ("measure", "out_dir", "mesh")}
        if name == "hersch":
            kw = _experiment_kwargs(name, hersch_stability_audit, rest)
            return hersch_stability_audit(mu, mesh, **kw)
        if name == "bubbling":
            kw = _experiment_kwargs(name, lambda2_bubbling_audit, rest)
            return lambda2_bubbling_audit([mu], mesh, **kw)
        from .experiments import _balanced_identity
        if mesh.is_torus:
            raise UsageError("lemma21 with a measure file needs a sphere mesh")
        u, _ = _balanced_identity(mesh, mu)
        return lemma21_audit(u, mu, int(rest.get("k", 1)))
    fn = EXPERIMENTS[name]
    return fn(**_experiment_kwargs(name, fn, cfg))


def cmd_audit(args) -> int:
    from .experiments import EXPERIMENTS
    from .reports import plot_rows
    name = args.experiment
    if name not in EXPERIMENTS:
        sys.stderr.write(f"error: unknown experiment {name!r}; registered: {', '.join(EXPERIMENTS)}\n")
        return EXIT_USAGE
    cfg = _collect(args, ["measure", "kind", "eps", "seed", "out_dir"])
    rep = _run_audit(name, cfg)
    rep.provenance["config_hash"] = config_hash(cfg)
    out = _outdir(cfg)
    jpath, cpath, rpath = out / f"{name}.json", out / f"{name}.csv", out / f"{name}.rows.csv"
    jpath.write_text(rep.to_json(), encoding="utf-8")
    cpath.write_text(plot_rows(rep), encoding="utf-8", newline="")
    rpath.write_text(rep.to_csv(), encoding="utf-8", newline="")
    seed = cfg.get("seed")
    write_manifest(out / f"{name}.manifest.json", f"audit {name}", cfg, seed, args.deterministic,
                   [jpath, cpath, rpath])
    _print(rep.summary_line())
    for r in rep.failures():
        _print(f"  FAIL {r.param}: lhs={r.lhs:.12g} rhs={r.rhs:.12g} margin={r.margin:.12g} tol={r.tolerance:.12g}")
    return EXIT_OK if rep.passed else EXIT_CHECK


def cmd_plotdata(args) -> int:
    from .io import read_json
    from .reports import StabilityReport, plot_rows
    if not args.reports:
        sys.stderr.write("error: no report files given\n")
        return EXIT_USAGE
    out = Path(args.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    for path in args.reports:
        rep = StabilityReport.from_dict(read_json(path))
        target = out / (Path(path).stem + ".plot.csv")
        target.write_text(plot_rows(rep), encoding="utf-8", newline="")
        _print(f"{path} -> {target}")
    return EXIT_OK


# -------------------------------------------------------------------- main
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spectralstab", description="Laplace eigenvalues of measures and stability audits.")
    p.add_argument("--deterministic", action="store_true", help="single-threaded BLAS, fixed seeds")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *flags):
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        sp.add_argument("--deterministic", action="store_true", default=argparse.SUPPRESS)
        for f in flags:
            sp.add_argument(f"--{f.replace('_', '-')}", dest=f)

    common(sub.add_parser("mesh-gen", help="write a mesh file"), "mesh", "out")
    common(sub.add_parser("measure-gen", help="write a measure file"), "mesh", "kind", "out")
    common(sub.add_parser("eig", help="eigenvalues of a measure"), "mesh", "measure", "k", "tol", "seed", "out",
           "out_dir")
    common(sub.add_parser("balance", help="Hersch balancing point"), "mesh", "measure", "method", "out")
    a = sub.add_parser("audit", help="run a registered stability audit")
    a.add_argument("experiment")
    common(a, "measure", "kind", "eps", "seed", "out_dir")
    pd = sub.add_parser("plotdata", help="tidy CSV from report files")
    pd.add_argument("reports", nargs="*")
    pd.add_argument("--out-dir", dest="out_dir")
    pd.add_argument("--deterministic", action="store_true", default=argparse.SUPPRESS)
    return p


COMMANDS = {"mesh-gen": cmd_mesh_gen, "measure-gen": cmd_measure_gen, "eig": cmd_eig,
            "balance": cmd_balance, "audit": cmd_audit, "plotdata": cmd_plotdata}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.deterministic = bool(getattr(args, "deterministic", False))
    _set_threads(args.deterministic)
    from .errors import InvalidInputError, SpectralStabError
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except InvalidInputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except SpectralStabError as exc:
        sys.stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
