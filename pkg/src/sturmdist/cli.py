"""Batch front-end: ``sturmdist run problem.toml --out results/``.

Each task of the configuration writes ``NN_<kind>.csv`` into the output directory (plus
``NN_eig_fnJ.csv`` eigenfunction dumps when requested), and ``manifest.json`` records the
normalized config, library versions, tolerances, per-task status and wall time.

Exit codes: 0 success, 1 config error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import sys
import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .boundary import CanonicalBC, boundary_form, classify, is_separated, triplet_form
from .coeffs import adjoint_coefficients, shin_zettl
from .config import CHECK_SUITES, ConfigError, TaskSpec, _complex, load_config
from .convergence import make_mollified_delta_family, make_rotated_boundary_family, resolvent_distances
from .exceptions import ContourError, NotInResolventSetError
from .green import greens_formula_residual, in_resolvent_set, resolvent_kernel
from .propagator import Mesh, propagate, solve_inhomogeneous
from .spectral import eigenfunctions, eigenvalues_complex, eigenvalues_real_scan

__all__ = ["main", "run", "Settings", "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERICAL", "EXIT_IO"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

CHECK_TOLS = {"liouville": 1e-10, "lagrange": 1e-7, "triplet": 1e-12, "symmetry": 1e-8}


class TaskFailure(Exception):
    """A task ran but its result is a failure (e.g. an invariant check did not pass)."""


@dataclass(frozen=True)
class Settings:
    tol: float = 1e-10
    threads: int = 1


def _fmt(x):
    return f"{x:.17g}"


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cplx_cols(prefix, n):
    return [f"{prefix}{i}_{part}" for i in range(n) for part in ("re", "im")]


def _cplx_vals(row):
    return [_fmt(v) for z in row for v in (z.real, z.imag)]


# -- tasks ----------------------------------------------------------------------------


def task_eig(cfg, p, st):
    c, bc = cfg.coefficients, cfg.linear_bc
    if "window" in p:
        evs = eigenvalues_real_scan(c, bc, p["window"], int(p.get("scan_points", 400)), cfg.max_step, st.threads)
    else:
        evs = eigenvalues_complex(c, bc, tuple(p["rectangle"]), int(p.get("max_depth", 40)), cfg.max_step)
    evs = sorted(evs, key=lambda e: (e.lam.real, e.lam.imag))
    rows = [[i, _fmt(e.lam.real), _fmt(e.lam.imag), e.multiplicity, _fmt(e.residual)] for i, e in enumerate(evs)]
    files = {"": _csv_text(["index", "re", "im", "multiplicity", "residual"], rows)}
    if p.get("eigenfunctions", False):
        j = 0
        for e in evs:
            for fn in eigenfunctions(c, bc, e, cfg.max_step):
                header = ["t"] + _cplx_cols("w", fn.w.shape[1])
                body = [[_fmt(t)] + _cplx_vals(w) for t, w in zip(fn.nodes, fn.w)]
                files[f"_fn{j}"] = _csv_text(header, body)
                j += 1
    return files, f"{len(evs)} eigenvalue(s)"


def task_green(cfg, p, st):
    mu = _complex(p.get("mu", 0.0), "mu")
    n = int(p.get("grid_n", cfg.grid_n))
    grid = np.linspace(*cfg.interval, n)
    k = resolvent_kernel(shin_zettl(cfg.coefficients, mu), cfg.linear_bc, grid, cfg.max_step)
    s = cfg.dim
    header = ["t", "tau"] + [f"g{i}{j}_{part}" for i in range(s) for j in range(s) for part in ("re", "im")]
    rows = [
        [_fmt(grid[i]), _fmt(grid[j])] + _cplx_vals(k.values[i, j].ravel())
        for i in range(n)
        for j in range(n)
    ]
    return {"": _csv_text(header, rows)}, f"{n}x{n} kernel at mu={mu}"


def task_classify(cfg, p, st):
    if not isinstance(cfg.boundary, CanonicalBC):
        raise ConfigError("classify: needs a canonical or separated boundary spec (K, variant)")
    tol = float(p.get("tol", st.tol))
    ec = classify(cfg.boundary, tol)
    sep, res = is_separated(cfg.boundary.K)
    row = [ec.kind.value, _fmt(ec.norm_K), _fmt(ec.unitary_defect), cfg.boundary.variant.value, str(sep).lower(), _fmt(res)]
    text = _csv_text(["kind", "norm_K", "unitary_defect", "variant", "separated", "offdiag_residual"], [row])
    return {"": text}, str(ec)


def task_converge(cfg, p, st):
    mu = _complex(p.get("mu", -1.0), "mu")
    grid_n = int(p.get("grid_n", cfg.grid_n))
    if p.get("family", "mollified_delta") == "mollified_delta":
        t0 = float(p.get("t0", 0.5 * sum(cfg.interval)))
        strength = p.get("c", 1.0)
        strength = _complex(strength, "c") if cfg.dim == 1 else np.asarray(strength, dtype=complex)
        fam = make_mollified_delta_family(t0, strength, p["widths"], cfg.boundary, mu, cfg.interval)
    else:
        fam = make_rotated_boundary_family(cfg.coefficients, cfg.boundary, p["epsilons"], float(p.get("angle", np.pi / 4)), mu)
    rep = resolvent_distances(fam, grid_n, cfg.max_step, st.threads)
    f = rep.flags
    summary = (
        f"hypotheses_hold={f['hypotheses_hold']} hs_strictly_decreasing={f['hs_strictly_decreasing']} "
        f"mm_decreasing={f['mm_decreasing']}"
    )
    return {"": rep.to_csv()}, summary


def _check_liouville(cfg):
    worst = 0.0
    for lam in (0.0, 1.0 + 0.5j):
        A = shin_zettl(cfg.coefficients, lam)
        Z = propagate(A, Mesh.for_generator(A, cfg.max_step))
        worst = max(worst, float(np.max(np.abs(np.linalg.det(Z.samples) - 1))))
    return worst


def _check_lagrange(cfg):
    # initial-value conditions: D = alpha = I is always invertible, so no eigenvalue can spoil the test
    from .boundary import LinearBC

    n = 2 * cfg.dim
    ivp = LinearBC(np.eye(n), np.zeros((n, n)))
    c = cfg.coefficients
    ca = adjoint_coefficients(c)
    mu = 0.3 + 0.2j
    A = shin_zettl(c, mu)
    Aa = shin_zettl(ca, np.conj(mu))
    mesh = Mesh.build(cfg.interval, np.union1d(A.breakpoints, Aa.breakpoints), cfg.max_step)
    s = cfg.dim
    k = np.arange(1, s + 1)
    y = solve_inhomogeneous(A, lambda t: np.cos(np.outer(t, k)) + 1j * np.sin(np.outer(t, k) / 2), ivp, mesh)
    z = solve_inhomogeneous(Aa, lambda t: np.exp(-np.outer(t, k)) + 1j * np.outer(t, k), ivp, mesh)
    return abs(greens_formula_residual(c, y, z))


def _check_triplet(cfg):
    rng = np.random.default_rng(0)
    n = 2 * cfg.dim
    worst = 0.0
    for _ in range(100):
        w_a, w_b, z_a, z_b = rng.standard_normal((4, n)) + 1j * rng.standard_normal((4, n))
        worst = max(worst, abs(triplet_form(w_a, w_b, z_a, z_b) - boundary_form(w_a, w_b, z_a, z_b)))
    return worst


def _check_symmetry(cfg, mu):
    if not cfg.hermitian or not isinstance(cfg.boundary, CanonicalBC):
        return None
    if classify(cfg.boundary).kind.value != "SelfAdjoint":
        return None
    A = shin_zettl(cfg.coefficients, mu)
    ok, cond = in_resolvent_set(A, cfg.linear_bc, cfg.max_step)
    if not ok:
        raise NotInResolventSetError(f"symmetry check: μ={mu} is not in the resolvent set (cond {cond:.3g})", cond)
    grid = np.linspace(*cfg.interval, min(cfg.grid_n, 200))
    g = resolvent_kernel(A, cfg.linear_bc, grid, cfg.max_step).values
    return float(np.max(np.abs(g - np.conj(np.swapaxes(np.swapaxes(g, 0, 1), -1, -2)))))


def task_check(cfg, p, st):
    mu = float(np.real(_complex(p.get("mu", -1.0), "mu")))
    rows, failed = [], []
    for suite in p.get("suites", CHECK_SUITES):
        tol = CHECK_TOLS[suite]
        if suite == "liouville":
            val = _check_liouville(cfg)
        elif suite == "lagrange":
            val = _check_lagrange(cfg)
        elif suite == "triplet":
            val = _check_triplet(cfg)
        else:
            val = _check_symmetry(cfg, mu)
        if val is None:
            rows.append([suite, "nan", _fmt(tol), "skipped"])
            continue
        ok = val <= tol
        if not ok:
            failed.append(suite)
        rows.append([suite, _fmt(val), _fmt(tol), "pass" if ok else "fail"])
    text = _csv_text(["suite", "value", "tolerance", "status"], rows)
    if failed:
        raise TaskFailure(f"invariant check failed: {', '.join(failed)}", {"": text})
    return {"": text}, "all checks passed"


TASKS = {"eig": task_eig, "green": task_green, "classify": task_classify, "converge": task_converge, "check": task_check}


# -- driver ---------------------------------------------------------------------------


def _tolerances(st):
    from .propagator import COND_LIMIT
    from .spectral import ACCEPT_RTOL

    return {
        "classify_unitary": st.tol,
        "resolvent_cond_limit": COND_LIMIT,
        "eigen_accept_rtol": ACCEPT_RTOL,
        "checks": CHECK_TOLS,
    }


def run(cfg, out_dir, settings=None, log=None):
    """Execute every task of ``cfg`` in order; returns the exit code.

    Results of tasks that succeeded are kept when a later task fails.
    """
    settings = settings or Settings()
    log = log or (lambda msg: print(msg, file=sys.stderr))
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log(f"error: cannot create output directory {out}: {exc}")
        return EXIT_IO
    start = time.perf_counter()
    code = EXIT_OK
    records = []
    for i, task in enumerate(cfg.tasks):
        t0 = time.perf_counter()
        rec = {"index": i, "kind": task.kind, "files": []}
        files = {}
        try:
            files, message = TASKS[task.kind](cfg, task.params, settings)
            rec["status"] = "ok"
        except ConfigError as exc:
            message, rec["status"], code = str(exc), "config_error", max(code, EXIT_CONFIG)
        except TaskFailure as exc:
            message, files = exc.args
            rec["status"], code = "failed", max(code, EXIT_NUMERICAL)
        except (NotInResolventSetError, ContourError, np.linalg.LinAlgError, ValueError) as exc:
            message, rec["status"], code = str(exc), "numerical_error", max(code, EXIT_NUMERICAL)
        rec["message"] = message
        try:
            for suffix, text in files.items():
                name = f"{i:02d}_{task.kind}{suffix}.csv"
                atomic_write(out / name, text)
                rec["files"].append(name)
        except OSError as exc:
            rec["status"], rec["message"] = "io_error", str(exc)
            code = EXIT_IO
        rec["wall_time_s"] = time.perf_counter() - t0
        log(f"[{i:02d}] {task.kind}: {rec['status']}: {message}")
        records.append(rec)
    manifest = {
        "config": cfg.to_dict(),
        "versions": {
            "sturmdist": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "settings": {"tol": settings.tol, "threads": settings.threads},
        "tolerances": _tolerances(settings),
        "tasks": records,
        "exit_code": code,
        "wall_time_s": time.perf_counter() - start,
    }
    try:
        atomic_write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    except OSError as exc:
        log(f"error: cannot write manifest: {exc}")
        return EXIT_IO
    return code


def _apply_overrides(cfg, args, only=None):
    changes = {}
    if args.mesh_max_step is not None:
        changes["max_step"] = args.mesh_max_step
    if args.grid_n is not None:
        changes["grid_n"] = args.grid_n
    tasks = cfg.tasks
    if only is not None:
        tasks = tuple(t for t in tasks if t.kind == only)
        extra = {}
        if only == "eig" and args.window:
            extra["window"] = args.window
        if only in ("green", "converge", "check") and args.mu is not None:
            extra["mu"] = args.mu
        if extra:
            tasks = tuple(TaskSpec(t.kind, {**t.params, **extra}) for t in tasks) or (TaskSpec(only, extra),)
        if not tasks:
            if only == "eig":
                raise ConfigError("eig: the config has no eig task; pass --window LO HI")
            if only == "converge":
                raise ConfigError("converge: the config has no converge task to take the family from")
            tasks = (TaskSpec(only, {}),)
    return replace(cfg, tasks=tasks, **changes)


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="problem configuration (.toml or manifest .json)")
    common.add_argument("--out", default="results", help="output directory (default: results)")
    common.add_argument("--mesh-max-step", type=float, default=None, help="override mesh.max_step")
    common.add_argument("--grid-n", type=int, default=None, help="override mesh.grid_n")
    common.add_argument("--tol", type=float, default=1e-10, help="classification tolerance on ||K*K - I||")
    common.add_argument("--threads", type=int, default=1, help="worker threads for scans and ladders")

    p = argparse.ArgumentParser(prog="sturmdist", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"sturmdist {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run every task of the config")
    e = sub.add_parser("eig", parents=[common], help="eigenvalues (eig tasks of the config)")
    e.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    for kind in ("green", "converge", "check"):
        s = sub.add_parser(kind, parents=[common], help=f"{kind} tasks of the config")
        s.add_argument("--mu", type=float, default=None)
    sub.add_parser("classify", parents=[common], help="classify the boundary condition")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = _apply_overrides(cfg, args, None if args.command == "run" else args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.threads < 1 or (args.mesh_max_step is not None and args.mesh_max_step <= 0):
        print("config error: --threads must be >= 1 and --mesh-max-step positive", file=sys.stderr)
        return EXIT_CONFIG
    code = run(cfg, args.out, Settings(args.tol, args.threads))
    if args.command == "classify" and code == EXIT_OK:
        manifest = json.loads((Path(args.out) / "manifest.json").read_text())
        for rec in manifest["tasks"]:
            print(rec["message"])
    return code


if __name__ == "__main__":
    sys.exit(main())
