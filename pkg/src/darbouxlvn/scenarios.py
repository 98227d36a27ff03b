"""Scenario registry, scenario files and the run pipeline.

Scenario files are JSON documents. Complex numbers are ``[re, im]`` pairs
(a bare number is accepted as a real value), matrices are row-major nested
lists and the time grid is ``{"start", "end", "steps"}`` with ``steps`` the
number of intervals.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import re
import tempfile
from dataclasses import dataclass, field, replace
from json.decoder import scanstring
from typing import Optional

import numpy as np

from .errors import (
    DarbouxError,
    ScenarioParseError,
    ScenarioValidationError,
)
from .evolution import (
    EvolutionContext,
    TimeSeries,
    Variant,
    add_iteration,
    build_context,
    evaluate,
    evolve_series,
)
from .matrix_core import is_hermitian
from .oracle import (
    DEFAULT_FD_STEP,
    DEFAULT_RK4_STEP,
    ResidualReport,
    RhsKind,
    SubsystemReport,
    pointwise_residual,
    rk4_integrate,
    subsystem_monitor,
)
from .seed import SeedSelection, build_shift, equally_spaced_c, make_seed, validate_equally_spaced_scenario

FORMAT_VERSION = 1
ODE_TOLERANCE = 1e-5
RK4_TOLERANCE = 1e-6
MODES = ("evolve", "verify", "subsystem")


@dataclass(frozen=True)
class TimeGrid:
    start: float
    end: float
    steps: int

    def times(self) -> np.ndarray:
        return np.linspace(self.start, self.end, self.steps + 1)

    @property
    def step(self) -> float:
        return (self.end - self.start) / self.steps


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """Everything needed to reproduce one run.

    ``A`` multiplies the first vector of the canonical eigenspace basis and
    ``B`` the second. ``family`` records the parameters ``k, m, a, b, c`` of
    the equally spaced three-level construction when it applies.
    """

    name: str
    H: np.ndarray
    U0: np.ndarray
    mu: complex
    a: float
    selection: SeedSelection = SeedSelection()
    A: complex = 2 ** -0.5
    B: complex = 2 ** -0.5
    variant: str = "plain"
    epsilon: Optional[float] = None
    gauge_lambda: float = 0.0
    omega: Optional[float] = None
    normalize: bool = False
    dims: Optional[tuple] = None
    H1: Optional[np.ndarray] = None
    H2: Optional[np.ndarray] = None
    family: Optional[dict] = None
    grid: TimeGrid = TimeGrid(-5.0, 5.0, 1000)
    iterations: int = 0
    iteration_mu: tuple = ()

    def __eq__(self, other):
        if not isinstance(other, ScenarioSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(self.digest())

    @property
    def rhs_kind(self) -> RhsKind:
        return {
            "plain": RhsKind.QUADRATIC,
            "epsilon": RhsKind.LINEAR_PLUS_QUADRATIC,
            "homogeneous": RhsKind.HOMOGENEOUS,
        }[self.variant]

    @property
    def is_tensor(self) -> bool:
        return self.dims is not None

    def iteration_mus(self) -> tuple:
        """Spectral parameters of the extra levels (default ``2 mu, 3 mu, ...``)."""
        if self.iteration_mu:
            return tuple(complex(m) for m in self.iteration_mu[: self.iterations])
        return tuple((j + 2) * complex(self.mu) for j in range(self.iterations))

    def with_overrides(self, **kw) -> "ScenarioSpec":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self) -> dict:
        d = {
            "format": FORMAT_VERSION,
            "name": self.name,
            "H": _dump_matrix(self.H),
            "U0": _dump_matrix(self.U0),
            "mu": _dump_complex(self.mu),
            "a": float(self.a),
            "seed": {
                "rule": self.selection.rule,
                "value": None if self.selection.value is None else _dump_complex(self.selection.value),
                "index": self.selection.index,
                "A": _dump_complex(self.A),
                "B": _dump_complex(self.B),
            },
            "variant": {
                "kind": self.variant,
                "epsilon": self.epsilon,
                "gauge_lambda": float(self.gauge_lambda),
                "omega": self.omega,
                "normalize": bool(self.normalize),
                "dims": None if self.dims is None else [int(x) for x in self.dims],
                "H1": None if self.H1 is None else _dump_matrix(self.H1),
                "H2": None if self.H2 is None else _dump_matrix(self.H2),
            },
            "family": None if self.family is None else {k: float(v) for k, v in self.family.items()},
            "grid": {"start": float(self.grid.start), "end": float(self.grid.end), "steps": int(self.grid.steps)},
            "iterations": int(self.iterations),
            "iteration_mu": [_dump_complex(m) for m in self.iteration_mu],
        }
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def validate(self) -> None:
        """Raise :class:`ScenarioValidationError` listing every failed rule."""
        fails: list[str] = []
        if self.family is not None:
            try:
                validate_equally_spaced_scenario(
                    self.family["a"], self.family["b"], self.family["c"], self.family["m"], self.family.get("k", 0.0)
                )
            except ScenarioValidationError as exc:
                fails.extend(exc.failures)
            if abs(self.family["a"] - self.a) > 0:
                fails.append("family a equals scenario a")
        H, U0 = np.asarray(self.H), np.asarray(self.U0)
        if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape != U0.shape:
            fails.append("H and U0 are square of equal size")
            raise ScenarioValidationError(fails)
        if not is_hermitian(H):
            fails.append("H is Hermitian")
        if not is_hermitian(U0):
            fails.append("U0 is Hermitian")
        if abs(complex(self.mu).imag) < 1e-14:
            fails.append("Im(mu) != 0")
        if abs(abs(complex(self.A)) ** 2 + abs(complex(self.B)) ** 2 - 1) > 1e-12:
            fails.append("|A|^2 + |B|^2 = 1")
        if self.variant not in ("plain", "epsilon", "homogeneous"):
            fails.append("variant is plain, epsilon or homogeneous")
        if self.variant == "epsilon" and not self.epsilon:
            fails.append("epsilon variant has nonzero epsilon")
        if self.variant == "homogeneous" and self.gauge_lambda:
            fails.append("no gauge shift for the homogeneous variant")
        if self.dims is not None:
            d1, d2 = self.dims
            if d1 * d2 != H.shape[0]:
                fails.append("d1 * d2 = dim H")
            elif self.H1 is None or self.H2 is None:
                fails.append("tensor scenario defines H1 and H2")
            else:
                K = np.kron(self.H1, np.eye(d2)) + np.kron(np.eye(d1), self.H2)
                if np.abs(K - H).max() > 1e-12 * max(1.0, np.abs(H).max()):
                    fails.append("H = H1 x 1 + 1 x H2")
        if not (self.grid.steps >= 2 and self.grid.end > self.grid.start):
            fails.append("grid has end > start and steps >= 2")
        if self.iterations < 0:
            fails.append("iterations >= 0")
        if self.iteration_mu and len(self.iteration_mu) < self.iterations:
            fails.append("one iteration_mu per iteration")
        if not fails and is_hermitian(H) and is_hermitian(U0):
            shift = build_shift(U0, H, self.a)
            if not shift.valid:
                fails.append(f"[U0^2 - a U0, H] = 0 (defect {shift.commutation_defect:.3e})")
            else:
                try:
                    make_seed(U0, self._variant().coupling * H, self.mu, self.selection, self.A, self.B)
                except (DarbouxError, ValueError) as exc:
                    fails.append(f"seed: {exc}")
        if fails:
            raise ScenarioValidationError(fails)

    def _variant(self) -> Variant:
        return Variant(self.variant, self.epsilon, self.gauge_lambda, self.normalize)

    def context(self) -> EvolutionContext:
        self.validate()
        ctx = build_context(self.H, self.U0, self.a, self.mu, self.selection, self.A, self.B, self._variant())
        for mu in self.iteration_mus():
            ctx = add_iteration(ctx, mu)
        return ctx


# ---------------------------------------------------------------- builtins

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def ex51() -> ScenarioSpec:
    r2 = math.sqrt(2)
    H = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1 / r2]], dtype=complex)
    U0 = np.diag([0.5 + r2 / 2, 0.5 - r2 / 2, 0.5]).astype(complex)
    return ScenarioSpec("ex51", H, U0, 1j, 1.0, grid=TimeGrid(-5.0, 5.0, 1000))


def family_matrices(k, m, a, b, c):
    """``H`` (non-diagonal form) and diagonal ``rho(0)`` of the equally spaced family."""
    s = math.sqrt(max(4 * b + a * a, 0.0))
    H = np.array([[k + m, -m, 0], [-m, k + m, 0], [0, 0, k + m]], dtype=complex)
    U0 = np.diag([(a + s) / 2, (a - s) / 2, c]).astype(complex)
    return H, U0


def equally_spaced_scenario(k=0.5, m=1.0, a=5.0, b=-4.0, sign=1, A=2 ** -0.5, B=2 ** -0.5, name="ex52") -> ScenarioSpec:
    """Three-level family with spectrum ``k, k+m, k+2m`` and diagonal ``rho(0)``."""
    c = equally_spaced_c(a, b, m, sign)
    validate_equally_spaced_scenario(a, b, c, m, k)
    H, U0 = family_matrices(k, m, a, b, c)
    fam = {"k": k, "m": m, "a": a, "b": b, "c": c}
    return ScenarioSpec(name, H, U0, 1j, a, A=A, B=B, family=fam, grid=TimeGrid(-5.0, 5.0, 1000))


def oscillator_scenario(levels=6, omega=1.0, l=0, m=1, a=5.0, b=-4.0, sign=1, A=2 ** -0.5, B=2 ** -0.5, epsilon=None, homogeneous=False, name="ex53") -> ScenarioSpec:
    """Truncated oscillator with ``rho(0)`` on the levels ``l, l+m, l+2m``."""
    if l + 2 * m >= levels:
        raise ValueError("active levels exceed the truncation")
    k = 0.5 + l
    c = equally_spaced_c(a, b, m, sign)
    validate_equally_spaced_scenario(a, b, c, m, k)
    s = math.sqrt(4 * b + a * a)
    H = omega * np.diag(0.5 + np.arange(levels)).astype(complex)
    U0 = np.zeros((levels, levels), dtype=complex)
    U0[l, l] = U0[l + 2 * m, l + 2 * m] = a / 2
    U0[l + m, l + m] = c
    U0[l, l + 2 * m] = U0[l + 2 * m, l] = -s / 2
    fam = {"k": k, "m": float(m), "a": a, "b": b, "c": c}
    if epsilon:
        return ScenarioSpec(name, H, U0, 1j / (epsilon * omega), a, A=A, B=B, variant="epsilon", epsilon=epsilon,
                            omega=omega, family=fam, grid=TimeGrid(-10.0, 10.0, 2000))
    variant = "homogeneous" if homogeneous else "plain"
    return ScenarioSpec(name, H, U0, 1j / omega, a, A=A, B=B, variant=variant, omega=omega, family=fam,
                        grid=TimeGrid(-5.0, 5.0, 1000))


def two_spin_scenario() -> ScenarioSpec:
    s7, s15 = math.sqrt(7), math.sqrt(15)
    H1, H2 = _SZ, 2 * _SX
    H = np.kron(H1, np.eye(2)) + np.kron(np.eye(2), H2)
    U0 = np.diag([5 + s7, 5 - s7, 5 + s15, 5 - s15]).astype(complex) / 2
    return ScenarioSpec("ex56", H, U0, 1j, 5.0, dims=(2, 2), H1=H1, H2=H2, grid=TimeGrid(-2.0, 2.0, 400))


def builtin_scenarios() -> list[ScenarioSpec]:
    return [
        ex51(),
        equally_spaced_scenario(),
        oscillator_scenario(),
        oscillator_scenario(epsilon=0.1, name="ex54"),
        oscillator_scenario(homogeneous=True, name="ex55"),
        two_spin_scenario(),
    ]


def get_builtin(name: str) -> ScenarioSpec:
    for spec in builtin_scenarios():
        if spec.name == name:
            return spec
    raise KeyError(f"no builtin scenario {name!r}")


# ------------------------------------------------------------- file format

def _dump_complex(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _dump_matrix(M) -> list:
    return [[_dump_complex(x) for x in row] for row in np.asarray(M)]


_WS = re.compile(r"[ \t\n\r]*")


def _locate(text: str, path: tuple) -> int:
    """Character offset of the JSON value at ``path`` (keys and list indices)."""
    dec = json.JSONDecoder()
    pos = _WS.match(text, 0).end()
    for key in path:
        ch = text[pos]
        if ch == "{":
            pos = _WS.match(text, pos + 1).end()
            while text[pos] != "}":
                k, pos = scanstring(text, pos + 1)
                pos = _WS.match(text, pos).end() + 1  # skip ':'
                pos = _WS.match(text, pos).end()
                if k == key:
                    break
                _, pos = dec.raw_decode(text, pos)
                pos = _WS.match(text, pos).end()
                if text[pos] == ",":
                    pos = _WS.match(text, pos + 1).end()
            else:
                return pos
        elif ch == "[":
            pos = _WS.match(text, pos + 1).end()
            for _ in range(int(key)):
                _, pos = dec.raw_decode(text, pos)
                pos = _WS.match(text, pos).end()
                if text[pos] == ",":
                    pos = _WS.match(text, pos + 1).end()
        else:
            return pos
    return pos


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


class _Reader:
    def __init__(self, text: str):
        self.text = text

    def fail(self, path, msg):
        try:
            pos = _locate(self.text, tuple(path))
        except (ValueError, IndexError):
            pos = 0
        line, col = _line_col(self.text, pos)
        where = ".".join(str(p) for p in path) or "<root>"
        raise ScenarioParseError(f"{where}: {msg}", line, col)

    def get(self, obj, key, path, required=True, default=None):
        if not isinstance(obj, dict):
            self.fail(path, "expected an object")
        if key not in obj:
            if required:
                self.fail(path, f"missing field {key!r}")
            return default
        return obj[key]

    def real(self, x, path):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            self.fail(path, f"expected a real number, got {x!r}")
        return float(x)

    def complex(self, x, path):
        if isinstance(x, (int, float)) and not isinstance(x, bool):
            return complex(float(x))
        if not (isinstance(x, list) and len(x) == 2):
            self.fail(path, f"expected a complex number [re, im], got {x!r}")
        return complex(self.real(x[0], path + [0]), self.real(x[1], path + [1]))

    def matrix(self, x, path):
        if not (isinstance(x, list) and x and all(isinstance(r, list) for r in x)):
            self.fail(path, "expected a non-empty list of rows")
        n = len(x)
        for i, row in enumerate(x):
            if len(row) != n:
                self.fail(path + [i], f"row has {len(row)} entries, expected {n}")
        return np.array([[self.complex(v, path + [i, j]) for j, v in enumerate(row)] for i, row in enumerate(x)])


def loads(text: str) -> ScenarioSpec:
    """Parse and validate a scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(exc.msg, exc.lineno, exc.colno) from None
    r = _Reader(text)
    name = r.get(doc, "name", [])
    if not isinstance(name, str):
        r.fail(["name"], "expected a string")

    fam = r.get(doc, "family", [], required=False)
    family = None
    if fam is not None:
        family = {}
        for key in ("k", "m", "a", "b", "c"):
            family[key] = r.real(r.get(fam, key, ["family"], required=(key != "k"), default=0.0), ["family", key])

    a = r.real(r.get(doc, "a", []), ["a"])
    mu = r.complex(r.get(doc, "mu", []), ["mu"])
    if "H" not in doc and "U0" not in doc and family is not None:
        # matrices implied by the equally spaced family; bad parameters are reported by validate()
        H, U0 = family_matrices(**family)
    else:
        H = r.matrix(r.get(doc, "H", []), ["H"])
        U0 = r.matrix(r.get(doc, "U0", []), ["U0"])

    seed = r.get(doc, "seed", [], required=False, default={}) or {}
    rule = r.get(seed, "rule", ["seed"], required=False, default="most-degenerate")
    value = r.get(seed, "value", ["seed"], required=False)
    index = r.get(seed, "index", ["seed"], required=False)
    if index is not None and (isinstance(index, bool) or not isinstance(index, int)):
        r.fail(["seed", "index"], "expected an integer")
    try:
        selection = SeedSelection(rule, None if value is None else r.complex(value, ["seed", "value"]), index)
    except ValueError as exc:
        r.fail(["seed", "rule"], str(exc))
    A = r.complex(r.get(seed, "A", ["seed"], required=False, default=2 ** -0.5), ["seed", "A"])
    B = r.complex(r.get(seed, "B", ["seed"], required=False, default=2 ** -0.5), ["seed", "B"])

    var = r.get(doc, "variant", [], required=False, default={}) or {}
    kind = r.get(var, "kind", ["variant"], required=False, default="plain")
    if kind not in ("plain", "epsilon", "homogeneous"):
        r.fail(["variant", "kind"], f"unknown variant {kind!r}")
    opt = lambda key: (None if var.get(key) is None else r.real(var[key], ["variant", key]))  # noqa: E731
    dims = var.get("dims")
    if dims is not None:
        if not (isinstance(dims, list) and len(dims) == 2 and all(isinstance(d, int) and d > 0 for d in dims)):
            r.fail(["variant", "dims"], "expected two positive integers")
        dims = tuple(dims)
    H1 = None if var.get("H1") is None else r.matrix(var["H1"], ["variant", "H1"])
    H2 = None if var.get("H2") is None else r.matrix(var["H2"], ["variant", "H2"])

    g = r.get(doc, "grid", [], required=False)
    grid = TimeGrid(-5.0, 5.0, 1000)
    if g is not None:
        steps = r.get(g, "steps", ["grid"])
        if isinstance(steps, bool) or not isinstance(steps, int):
            r.fail(["grid", "steps"], "expected an integer")
        grid = TimeGrid(r.real(r.get(g, "start", ["grid"]), ["grid", "start"]), r.real(r.get(g, "end", ["grid"]), ["grid", "end"]), steps)
    iters = r.get(doc, "iterations", [], required=False, default=0)
    if isinstance(iters, bool) or not isinstance(iters, int):
        r.fail(["iterations"], "expected an integer")
    imu = r.get(doc, "iteration_mu", [], required=False, default=[]) or []
    iteration_mu = tuple(r.complex(z, ["iteration_mu", i]) for i, z in enumerate(imu))

    spec = ScenarioSpec(
        name=name, H=H, U0=U0, mu=mu, a=a, selection=selection, A=A, B=B,
        variant=kind, epsilon=opt("epsilon"), gauge_lambda=opt("gauge_lambda") or 0.0,
        omega=opt("omega"), normalize=bool(var.get("normalize", False)), dims=dims, H1=H1, H2=H2,
        family=family, grid=grid, iterations=iters, iteration_mu=iteration_mu,
    )
    spec.validate()
    return spec


def load_scenario(path) -> ScenarioSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


def resolve_scenario(name_or_path: str) -> ScenarioSpec:
    """Builtin name or path to a scenario file."""
    try:
        return get_builtin(name_or_path)
    except KeyError:
        pass
    if not os.path.exists(name_or_path):
        raise FileNotFoundError(f"{name_or_path!r} is neither a builtin scenario nor a file")
    return load_scenario(name_or_path)


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_scenario(spec: ScenarioSpec, path) -> None:
    atomic_write(path, spec.dumps() + "\n")


# -------------------------------------------------------------------- runs

@dataclass(frozen=True, eq=False)
class RunOutput:
    spec: ScenarioSpec
    mode: str
    series: TimeSeries
    residuals: Optional[ResidualReport] = None
    rk4_deviation: Optional[np.ndarray] = None
    subsystem: Optional[SubsystemReport] = None
    provenance: dict = field(default_factory=dict)

    @property
    def max_rk4_deviation(self) -> Optional[float]:
        return None if self.rk4_deviation is None else float(np.max(self.rk4_deviation))

    @property
    def passed(self) -> Optional[bool]:
        """Verify-mode verdict; ``None`` for other modes."""
        if self.residuals is None:
            return None
        return bool(self.residuals.max_ode_residual < ODE_TOLERANCE and self.max_rk4_deviation < RK4_TOLERANCE)


def run(spec: ScenarioSpec, mode: str = "evolve", fd_step: float = DEFAULT_FD_STEP, rk4_step: float = DEFAULT_RK4_STEP) -> RunOutput:
    """Closed-form series, optionally checked against residuals and RK4."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "subsystem" and not spec.is_tensor:
        raise ScenarioValidationError(["subsystem mode needs a tensor-product scenario"])
    ctx = spec.context()
    times = spec.grid.times()
    series = evolve_series(ctx, times, labels={"scenario": spec.name})
    prov = {
        "scenario": spec.name,
        "scenario_sha256": spec.digest(),
        "mode": mode,
        "fd_step": fd_step,
        "rk4_step": rk4_step,
    }
    prov["run_sha256"] = hashlib.sha256(json.dumps(prov, sort_keys=True).encode()).hexdigest()
    residuals = deviation = sub = None
    if mode == "verify":
        eps = spec.epsilon if spec.variant == "epsilon" else None
        residuals = pointwise_residual(lambda t: evaluate(ctx, t), spec.rhs_kind, spec.H, times, h=fd_step, eps=eps)
        rk = rk4_integrate(spec.rhs_kind, spec.H, series.matrices[0], times, eps=eps, max_step=rk4_step)
        deviation = np.linalg.norm(rk.matrices - series.matrices, axis=(-2, -1))
    if mode == "subsystem":
        sub = subsystem_monitor(series, spec.dims, spec.H1, spec.H2)
    return RunOutput(spec, mode, series, residuals, deviation, sub, prov)


# ----------------------------------------------------------------- writers

def _fmt(x: float) -> str:
    return repr(float(x))


def output_table(out: RunOutput) -> tuple[list[str], list[list[str]]]:
    n = out.series.dim
    header = ["t"]
    for i in range(n):
        for j in range(n):
            header += [f"re_{i}_{j}", f"im_{i}_{j}"]
    header += [f"eig_{k}" for k in range(n)]
    if out.residuals is not None:
        header += ["ode_residual", "hermiticity_defect", "spectrum_drift", "trace_drift", "rk4_deviation"]
    if out.subsystem is not None:
        header += ["p1_minus", "p1_plus", "p2_minus", "p2_plus", "energy_1", "energy_2",
                   "im_bb_lhs_1", "im_bb_rhs_1", "im_bb_lhs_2", "im_bb_rhs_2"]
    eigs = np.linalg.eigvalsh(0.5 * (out.series.matrices + np.swapaxes(out.series.matrices.conj(), -1, -2)))
    rows = []
    for i, t in enumerate(out.series.times):
        M = out.series.matrices[i]
        row = [_fmt(t)]
        for x in M.ravel():
            row += [_fmt(x.real), _fmt(x.imag)]
        row += [_fmt(e) for e in eigs[i]]
        if out.residuals is not None:
            r = out.residuals
            row += [_fmt(r.ode_residual[i]), _fmt(r.hermiticity_defect[i]), _fmt(r.spectrum_drift[i]),
                    _fmt(r.trace_drift[i]), _fmt(out.rk4_deviation[i])]
        if out.subsystem is not None:
            s = out.subsystem
            row += [_fmt(x) for x in (*s.normalized_spectra[1][i][:2], *s.normalized_spectra[2][i][:2])]
            row += [_fmt(s.energies[1][i]), _fmt(s.energies[2][i])]
            row += [_fmt(s.bb_lhs[1][i].imag), _fmt(s.bb_rhs[1][i].imag), _fmt(s.bb_lhs[2][i].imag), _fmt(s.bb_rhs[2][i].imag)]
        rows.append(row)
    return header, rows


def to_csv(out: RunOutput) -> str:
    header, rows = output_table(out)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def to_json(out: RunOutput) -> str:
    header, rows = output_table(out)
    summary = {"points": len(out.series)}
    if out.residuals is not None:
        summary.update(
            max_ode_residual=out.residuals.max_ode_residual,
            max_rk4_deviation=out.max_rk4_deviation,
            max_spectrum_drift=float(np.max(out.residuals.spectrum_drift)),
            max_trace_drift=float(np.max(out.residuals.trace_drift)),
            passed=out.passed,
        )
    if out.subsystem is not None:
        s = out.subsystem
        summary.update(
            max_abs_energy=float(max(np.abs(s.energies[1]).max(), np.abs(s.energies[2]).max())),
            max_bb_balance=float(np.nanmax([s.bb_balance(1).max(), s.bb_balance(2).max()])),
        )
    doc = {
        "provenance": out.provenance,
        "scenario": out.spec.to_dict(),
        "summary": summary,
        "columns": header,
        "rows": [[float(x) for x in row] for row in rows],
    }
    return json.dumps(doc, indent=1)


def write_output(out: RunOutput, path, fmt: str = "csv") -> None:
    if fmt not in ("csv", "json"):
        raise ValueError("format must be csv or json")
    atomic_write(path, to_csv(out) if fmt == "csv" else to_json(out) + "\n")
