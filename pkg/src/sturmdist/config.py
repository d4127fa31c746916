"""Problem configuration files (TOML, or the JSON echo written into run manifests).

Grammar
-------
Top level::

    interval = [a, b]
    dim = s
    hermitian = true            # optional, default false

    [coefficients]
    p_inv = "identity"          # "identity" | "zero" | number | matrix | piecewise table
    Q = { breakpoints = [0.0, 0.5, 1.0], pieces = [
            { degree = 0, coeffs = [[[0.0, 0.0]]] },
            { degree = 0, coeffs = [[[10.0, 0.0]]] } ] }

    [boundary]                  # exactly one of: preset, canonical, linear, separated
    preset = "dirichlet"        # "dirichlet" | "neumann" | "periodic"
    # canonical = { K = "identity", variant = "LK" }
    # linear = { alpha = ..., beta = ... }
    # separated = { K_a = ..., K_b = ..., variant = "LUpperK" }

    [mesh]
    max_step = 0.01
    grid_n = 200

    [[tasks]]
    kind = "eig"                # eig | green | classify | converge | check
    window = [0.5, 20.0]

Complex numbers are ``[re, im]`` pairs; a bare real number is accepted as shorthand.
A matrix is a list of rows, or a flat row-major list of ``n*n`` entries, or one of the
words ``identity``, ``minus_identity``, ``zero``. Piecewise coefficient tables list the
breakpoints and, per piece, a degree and ``degree + 1`` flat row-major matrices in the
local variable ``t - left_endpoint``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from .boundary import CanonicalBC, LinearBC, Variant, canonical_to_linear, periodic, separated_conditions
from .coeffs import PiecewiseMatrixPoly, make_coefficients

__all__ = ["ConfigError", "ProblemConfig", "TaskSpec", "parse_config", "load_config", "TASK_KINDS"]

TASK_KINDS = ("eig", "green", "classify", "converge", "check")
CHECK_SUITES = ("liouville", "lagrange", "triplet", "symmetry")
BOUNDARY_KINDS = ("preset", "canonical", "linear", "separated")


class ConfigError(ValueError):
    pass


def _complex(v, where):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    raise ConfigError(f"{where}: expected a number or an [re, im] pair, got {v!r}")


def _is_entry(v):
    return isinstance(v, (int, float)) or (
        isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v)
    )


def _matrix(v, n, where):
    words = {"identity": np.eye(n), "minus_identity": -np.eye(n), "zero": np.zeros((n, n))}
    if isinstance(v, str):
        if v not in words:
            raise ConfigError(f"{where}: unknown matrix keyword {v!r}")
        return words[v].astype(complex)
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v) * np.eye(n)
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"{where}: expected a matrix, got {v!r}")
    if n == 1 and _is_entry(v):
        return np.array([[_complex(v, where)]])
    if n > 1 and len(v) == n * n and all(_is_entry(e) for e in v):
        flat = [_complex(e, where) for e in v]
        return np.array(flat).reshape(n, n)
    rows = [_row(row, n, where) for row in v]
    if any(r is None for r in rows) or len(rows) != n or any(len(r) != n for r in rows):
        shape = f"{len(v)}x{len(v[0]) if v and isinstance(v[0], (list, tuple)) else '?'}"
        raise ConfigError(f"{where}: expected {n}x{n} matrix, got {shape}")
    return np.array(rows)


def _row(row, n, where):
    if not isinstance(row, (list, tuple)):
        return None
    if n == 1 and len(row) == 2 and _is_entry(row):
        return [_complex(row, where)]
    return [_complex(e, where) for e in row]


def _matrix_out(M):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(M)]


def _coefficient(v, interval, s, where):
    if isinstance(v, dict):
        try:
            f = PiecewiseMatrixPoly.from_dict(v, s)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"{where}: {exc}") from None
        if not np.allclose(f.interval, interval):
            raise ConfigError(f"{where}: breakpoints must run from {interval[0]} to {interval[1]}")
        return f
    return PiecewiseMatrixPoly.constant(interval, _matrix(v, s, where))


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ProblemConfig:
    interval: tuple
    dim: int
    p_inv: PiecewiseMatrixPoly
    Q: PiecewiseMatrixPoly
    hermitian: bool
    boundary_kind: str
    boundary: object
    max_step: float
    grid_n: int
    tasks: tuple
    boundary_raw: dict = field(repr=False, default_factory=dict)

    @property
    def coefficients(self):
        return make_coefficients(self.p_inv, self.Q, self.hermitian)

    @property
    def linear_bc(self):
        if isinstance(self.boundary, CanonicalBC):
            return canonical_to_linear(self.boundary)
        return self.boundary

    def to_dict(self):
        """Normalized echo; ``parse_config`` of the result reproduces this config."""
        return {
            "interval": list(self.interval),
            "dim": self.dim,
            "hermitian": self.hermitian,
            "coefficients": {"p_inv": self.p_inv.to_dict(), "Q": self.Q.to_dict()},
            "boundary": self.boundary_raw,
            "mesh": {"max_step": self.max_step, "grid_n": self.grid_n},
            "tasks": [{"kind": t.kind, **t.params} for t in self.tasks],
        }


def _boundary(raw, s):
    if not isinstance(raw, dict):
        raise ConfigError("boundary: expected a table")
    present = [k for k in BOUNDARY_KINDS if k in raw]
    unknown = set(raw) - set(BOUNDARY_KINDS)
    if unknown:
        raise ConfigError(f"boundary: unknown keys {sorted(unknown)}")
    if len(present) != 1:
        raise ConfigError(f"boundary: exactly one boundary spec is required, found {present or 'none'}")
    kind = present[0]
    spec = raw[kind]
    n = 2 * s
    if kind == "preset":
        if spec == "dirichlet":
            bc, echo = CanonicalBC(np.eye(n), Variant.LK), {"canonical": {"K": _matrix_out(np.eye(n)), "variant": "LK"}}
        elif spec == "neumann":
            bc, echo = CanonicalBC(-np.eye(n), Variant.LK), {"canonical": {"K": _matrix_out(-np.eye(n)), "variant": "LK"}}
        elif spec == "periodic":
            bc = periodic(s)
            echo = {"linear": {"alpha": _matrix_out(bc.alpha), "beta": _matrix_out(bc.beta)}}
        else:
            raise ConfigError(f"boundary.preset: unknown preset {spec!r}")
        kind = next(iter(echo))
        return kind, bc, echo
    if not isinstance(spec, dict):
        raise ConfigError(f"boundary.{kind}: expected a table")
    variant = spec.get("variant", "LK")
    if variant not in ("LK", "LUpperK"):
        raise ConfigError(f"boundary.{kind}.variant: must be 'LK' or 'LUpperK', got {variant!r}")
    if kind == "canonical":
        K = _matrix(spec.get("K", None) if "K" in spec else _missing(f"boundary.{kind}.K"), n, "boundary.canonical.K")
        return kind, CanonicalBC(K, variant), {"canonical": {"K": _matrix_out(K), "variant": variant}}
    if kind == "linear":
        alpha = _matrix(spec["alpha"] if "alpha" in spec else _missing("boundary.linear.alpha"), n, "boundary.linear.alpha")
        beta = _matrix(spec["beta"] if "beta" in spec else _missing("boundary.linear.beta"), n, "boundary.linear.beta")
        return kind, LinearBC(alpha, beta), {"linear": {"alpha": _matrix_out(alpha), "beta": _matrix_out(beta)}}
    K_a = _matrix(spec["K_a"] if "K_a" in spec else _missing("boundary.separated.K_a"), s, "boundary.separated.K_a")
    K_b = _matrix(spec["K_b"] if "K_b" in spec else _missing("boundary.separated.K_b"), s, "boundary.separated.K_b")
    K = np.block([[K_a, np.zeros((s, s))], [np.zeros((s, s)), K_b]])
    echo = {"separated": {"K_a": _matrix_out(K_a), "K_b": _matrix_out(K_b), "variant": variant}}
    return kind, CanonicalBC(K, variant), echo


def _missing(where):
    raise ConfigError(f"{where}: required field missing")


def _task(raw, i):
    where = f"tasks[{i}]"
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError(f"{where}: each task needs a 'kind'")
    kind = raw["kind"]
    if kind not in TASK_KINDS:
        raise ConfigError(f"{where}.kind: unknown task {kind!r}; expected one of {TASK_KINDS}")
    p = {k: v for k, v in raw.items() if k != "kind"}
    if kind == "eig":
        if ("window" in p) == ("rectangle" in p):
            raise ConfigError(f"{where}: eig needs exactly one of 'window' or 'rectangle'")
        if "window" in p and (len(p["window"]) != 2 or not p["window"][0] < p["window"][1]):
            raise ConfigError(f"{where}.window: expected [lo, hi] with lo < hi")
        if "rectangle" in p and len(p["rectangle"]) != 4:
            raise ConfigError(f"{where}.rectangle: expected [re_lo, re_hi, im_lo, im_hi]")
    elif kind in ("green", "converge") and "mu" in p:
        _complex(p["mu"], f"{where}.mu")
    if kind == "converge":
        fam = p.get("family", "mollified_delta")
        if fam not in ("mollified_delta", "rotated_boundary"):
            raise ConfigError(f"{where}.family: unknown family {fam!r}")
        key = "widths" if fam == "mollified_delta" else "epsilons"
        if key not in p:
            raise ConfigError(f"{where}.{key}: required for family {fam!r}")
    if kind == "check":
        bad = [x for x in p.get("suites", CHECK_SUITES) if x not in CHECK_SUITES]
        if bad:
            raise ConfigError(f"{where}.suites: unknown suites {bad}; expected a subset of {CHECK_SUITES}")
    return TaskSpec(kind, p)


def parse_config(data):
    """Validate a configuration mapping and build the :class:`ProblemConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a table")
    for key in ("interval", "dim", "coefficients", "boundary"):
        if key not in data:
            raise ConfigError(f"{key}: required field missing")
    try:
        a, b = (float(x) for x in data["interval"])
    except (TypeError, ValueError):
        raise ConfigError("interval: expected [a, b]") from None
    if not a < b:
        raise ConfigError("interval: need a < b")
    s = data["dim"]
    if not isinstance(s, int) or isinstance(s, bool) or s < 1:
        raise ConfigError("dim: must be a positive integer")
    coeffs = data["coefficients"]
    if not isinstance(coeffs, dict) or "p_inv" not in coeffs or "Q" not in coeffs:
        raise ConfigError("coefficients: need both 'p_inv' and 'Q'")
    p_inv = _coefficient(coeffs["p_inv"], (a, b), s, "coefficients.p_inv")
    Q = _coefficient(coeffs["Q"], (a, b), s, "coefficients.Q")
    hermitian = bool(data.get("hermitian", False))
    if hermitian:
        try:
            make_coefficients(p_inv, Q, True)
        except ValueError as exc:
            raise ConfigError(f"hermitian: {exc}") from None
    kind, bc, echo = _boundary(data["boundary"], s)
    mesh = data.get("mesh", {})
    max_step = float(mesh.get("max_step", (b - a) / 200))
    grid_n = int(mesh.get("grid_n", 200))
    if max_step <= 0 or grid_n < 3:
        raise ConfigError("mesh: max_step must be positive and grid_n at least 3")
    tasks = tuple(_task(t, i) for i, t in enumerate(data.get("tasks", [])))
    return ProblemConfig((a, b), s, p_inv, Q, hermitian, kind, bc, max_step, grid_n, tasks, echo)


def load_config(path):
    """Read a ``.toml`` (or ``.json``) configuration file."""
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text) if path.suffix == ".json" else tomli.loads(text)
    except (tomli.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if path.suffix == ".json" and "config" in data and "interval" not in data:
        data = data["config"]
    return parse_config(data)
