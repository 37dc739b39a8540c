"""
Inequality probes, the Riccati oracle, power-law fits and the blow-up verdict.

The probes evaluate both sides of an interpolation inequality with every
implicit constant set to 1 and report the ratio. Because the constants are
unknown the meaningful checks are homogeneity (the ratio is invariant under
``u -> λu``) and boundedness over a corpus, with one exception: the
Gagliardo-Nirenberg ratio ``‖∇u‖ / (‖Δu‖^{1/2} ‖u‖^{1/2})`` is at most 1 on
the lattice by Cauchy-Schwarz in frequency, comfortably inside ``√2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import gamma

from .cutoff import CutoffSpec, Phi2, phi2_power_derivatives
from .errors import CaseDimensionMismatch, InsufficientData, NonPositiveInput, ZeroField
from .fields import ModelParams, grad_norm_sq, l2_norm_sq, lap_norm_sq, restricted_norms
from .grid import ComplexField

# ---------------------------------------------------------------------------
# Gagliardo-Nirenberg
# ---------------------------------------------------------------------------

GN_BOUND = math.sqrt(2.0)


def gn_ratio(u: ComplexField) -> float:
    """``‖∇u‖ / (‖Δu‖^{1/2} ‖u‖^{1/2})`` on the whole box."""
    m, g2, l2 = l2_norm_sq(u), grad_norm_sq(u), lap_norm_sq(u)
    if m == 0 or l2 == 0:
        raise ZeroField("gn_ratio needs a field with nonzero mass and nonzero Laplacian")
    return math.sqrt(g2) / (l2 * m) ** 0.25


def gn_exterior_ratio(u: ComplexField, R: float) -> float:
    """The same ratio with every norm restricted to ``{|x| > R}``."""
    if R <= 0:
        return gn_ratio(u)
    m, g2, l2 = restricted_norms(u, R)
    if m == 0 or l2 == 0:
        raise ZeroField(f"u vanishes on the exterior region |x| > {R}")
    return math.sqrt(g2) / (l2 * m) ** 0.25


# ---------------------------------------------------------------------------
# Interpolation lemma
# ---------------------------------------------------------------------------

CASES = ("n=1", "n=2", "n=3", "n=4", "n=5")
GN_CASES = ("GNI-RN", "GNI-R")


@dataclass(frozen=True)
class InequalityProbe:
    case: str
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.lhs == 0:
            return 0.0
        return self.lhs / self.rhs if self.rhs > 0 else math.inf

    def __post_init__(self):
        for name in ("lhs", "rhs"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and nonnegative (got {v})")


def case_for_dimension(N: int) -> str:
    return f"n={min(int(N), 5)}"


def _check_case(case: str, N: int):
    if case not in CASES:
        raise CaseDimensionMismatch(f"unknown case {case!r}")
    need = int(case[2:])
    ok = N >= 5 if need == 5 else N == need
    if not ok:
        raise CaseDimensionMismatch(f"case {case} does not apply in dimension N={N}")


@dataclass(frozen=True)
class RadialProfile:
    """A radial function sampled on ``r_j = (j + 1/2) dr``, integrated with weight ``ω_N r^{N-1}``."""

    N: int
    dr: float
    values: np.ndarray

    @classmethod
    def sample(cls, N: int, r_max: float, points: int, fn: Callable[[np.ndarray], np.ndarray]):
        dr = r_max / points
        return cls(N, dr, np.asarray(fn(radial_nodes(r_max, points)), dtype=complex))

    @property
    def r(self) -> np.ndarray:
        return (np.arange(self.values.size) + 0.5) * self.dr

    def with_values(self, values) -> "RadialProfile":
        return RadialProfile(self.N, self.dr, np.asarray(values, dtype=complex))


def radial_nodes(r_max: float, points: int) -> np.ndarray:
    return (np.arange(points) + 0.5) * (r_max / points)


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere in ``R^N``."""
    return 2.0 * math.pi ** (N / 2.0) / gamma(N / 2.0)


def _radial_integrate(p: RadialProfile, values) -> float:
    return float(sphere_area(p.N) * np.sum(values * p.r ** (p.N - 1)) * p.dr)


def _pad(f: np.ndarray) -> np.ndarray:
    # even reflection at r = 0 (f(-r_j) = f(r_j), i.e. f_{-1-j} = f_j), zero past the end
    return np.concatenate([f[1::-1], f, np.zeros(2, dtype=f.dtype)])


def _radial_d1(f: np.ndarray, dr: float) -> np.ndarray:
    p = _pad(f)
    return (-p[4:] + 8.0 * p[3:-1] - 8.0 * p[1:-3] + p[:-4]) / (12.0 * dr)


def _radial_d2(f: np.ndarray, dr: float) -> np.ndarray:
    p = _pad(f)
    return (-p[4:] + 16.0 * p[3:-1] - 30.0 * p[2:-2] + 16.0 * p[1:-3] - p[:-4]) / (12.0 * dr * dr)


def radial_laplacian(p: RadialProfile) -> np.ndarray:
    """Fourth-order ``f'' + (N-1) f'/r`` on the half-offset grid."""
    f = p.values
    return _radial_d2(f, p.dr) + (p.N - 1) / p.r * _radial_d1(f, p.dr)


def _radial_norms(p: RadialProfile):
    f = p.values
    return (
        _radial_integrate(p, np.abs(f) ** 2),
        _radial_integrate(p, np.abs(_radial_d1(f, p.dr)) ** 2),
        _radial_integrate(p, np.abs(radial_laplacian(p)) ** 2),
    )


def _grid_norms(u: ComplexField):
    return l2_norm_sq(u), grad_norm_sq(u), lap_norm_sq(u)


def _h2_sq(m, g, lap):
    # ∫ (1 + |ξ|^2)^2 |û|^2 = ‖u‖² + 2‖∇u‖² + ‖Δu‖²
    return m + 2.0 * g + lap


def interpolation_probe(u, psi, params: ModelParams, case: Optional[str] = None) -> InequalityProbe:
    """Both sides of one case of the interpolation lemma, constants set to 1.

    ``u`` is a :class:`ComplexField` (``N <= 3``) or a :class:`RadialProfile`
    (``N = 4, 5``); ``psi`` is a nonnegative array sampled at the same points.
    ``params`` supplies ``b`` (and ``N``, which must match the data).
    """
    radial = isinstance(u, RadialProfile)
    N = u.N if radial else u.grid.N
    if N != params.N:
        raise CaseDimensionMismatch(f"data has N={N} but params.N={params.N}")
    case = case_for_dimension(N) if case is None else case
    _check_case(case, N)
    b = params.b
    psi = np.asarray(psi, dtype=float)
    if np.any(psi < 0):
        raise ValueError("psi must be nonnegative")

    if radial:
        vals = u.values
        integrate = lambda f: _radial_integrate(u, f)  # noqa: E731
        norms = _radial_norms
        weighted = lambda a: u.with_values(psi ** a * vals)  # noqa: E731
    else:
        vals = u.physical().values
        integrate = u.grid.integrate
        norms = _grid_norms
        weighted = lambda a: u.grid.field(psi ** a * vals)  # noqa: E731
    amp = np.abs(vals)
    m, g, lap = norms(u)
    mass = math.sqrt(m)
    psi_sup = float(psi.max()) if psi.size else 0.0

    if case == "n=5":
        q = (8.0 - 2.0 * b) / N
        lhs = integrate(psi * amp ** (q + 2.0))
        _, _, lap_w = norms(weighted(2.0 / (4.0 - b)))
        rhs = lap_w ** ((4.0 - b) / 4.0) * mass ** (q + b / 2.0)
    elif case == "n=4":
        lhs = integrate(psi * amp ** ((8.0 - 2.0 * b) / 4.0 + 2.0))
        h2w = _h2_sq(*norms(weighted(2.0 / (4.0 - b / 2.0))))
        rhs = h2w ** ((2.0 - b / 4.0) / 2.0) * mass ** (2.0 - b / 4.0)
    elif case == "n=3":
        lhs = integrate(psi * amp ** ((8.0 - 2.0 * b) / 3.0 + 2.0))
        h2w = _h2_sq(*norms(weighted(2.0 / (4.0 - b))))
        rhs = _h2_sq(m, g, lap) ** ((4.0 - b) / 12.0) * h2w ** ((4.0 - b) / 4.0) * m
    elif case == "n=2":
        lhs = integrate(psi * amp ** (6.0 - b))
        rhs = psi_sup * m * g ** ((4.0 - b) / 2.0)
    else:  # n=1
        lhs = integrate(psi * amp ** (10.0 - 2.0 * b))
        rhs = psi_sup * mass ** (6.0 - b) * g ** ((4.0 - b) / 2.0)
    return InequalityProbe(case, float(lhs), float(rhs))


def radial_probe_oracle(N: int, b: float, cutoff: CutoffSpec, amplitude: float, width: float,
                        r_max: float, points: int) -> InequalityProbe:
    """Reference value of the ``n=4``/``n=5`` probe for ``u = A exp(-r²/(2 w²))``, ``psi = Phi2``.

    Uses exact derivatives of the Gaussian and the exact chain rule for
    ``Phi2^α``, so the only error is the midpoint quadrature.
    """
    case = case_for_dimension(N)
    alpha = 2.0 / (4.0 - b) if case == "n=5" else 2.0 / (4.0 - b / 2.0)
    r = radial_nodes(r_max, points)
    dr = r_max / points
    w2 = width * width
    u = amplitude * np.exp(-r * r / (2.0 * w2))
    du = -r / w2 * u
    ddu = (r * r / w2 - 1.0) / w2 * u
    G, dG, ddG = phi2_power_derivatives(cutoff, r, alpha)
    psi = Phi2(cutoff, r)
    f = G * u
    df = dG * u + G * du
    lap_f = ddG * u + 2.0 * dG * du + G * ddu + (N - 1) / r * df
    area = sphere_area(N)
    integ = lambda v: float(area * np.sum(v * r ** (N - 1)) * dr)  # noqa: E731
    m = integ(u * u)
    q = (8.0 - 2.0 * b) / N
    lhs = integ(psi * np.abs(u) ** (q + 2.0))
    if case == "n=5":
        rhs = integ(lap_f ** 2) ** ((4.0 - b) / 4.0) * math.sqrt(m) ** (q + b / 2.0)
    else:
        h2w = _h2_sq(integ(f * f), integ(df * df), integ(lap_f ** 2))
        rhs = h2w ** ((2.0 - b / 4.0) / 2.0) * math.sqrt(m) ** (2.0 - b / 4.0)
    return InequalityProbe(case, lhs, rhs)


# ---------------------------------------------------------------------------
# corpus audits
# ---------------------------------------------------------------------------


@dataclass
class CorpusSummary:
    case: str
    ratios: np.ndarray
    passed: bool
    note: str = ""

    @property
    def min(self) -> float:
        return float(np.min(self.ratios))

    @property
    def median(self) -> float:
        return float(np.median(self.ratios))

    @property
    def max(self) -> float:
        return float(np.max(self.ratios))

    def row(self) -> dict:
        return {"case": self.case, "min": self.min, "median": self.median, "max": self.max,
                "PASS": "PASS" if self.passed else "FAIL"}


def write_corpus_csv(path, summaries: Sequence[CorpusSummary]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["case", "min", "median", "max", "PASS"])
        w.writeheader()
        for s in summaries:
            w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in s.row().items()})


def bounded_spread(ratios, limit: float = 10.0) -> bool:
    """``max / median < limit`` with every ratio finite and positive."""
    r = np.asarray(ratios, dtype=float)
    return bool(np.all(np.isfinite(r)) and np.all(r > 0) and r.max() / np.median(r) < limit)


# ---------------------------------------------------------------------------
# Riccati oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RiccatiResult:
    closed_form: float
    numeric: float
    threshold: float

    @property
    def relative_error(self) -> float:
        return abs(self.numeric - self.closed_form) / self.closed_form


def riccati_blowup_time(c: float, y0: float, threshold: float = 1e12, rtol: float = 1e-10) -> RiccatiResult:
    """Escape time of ``y' = c y²`` from ``y0``: ``1/(c y0)`` and an adaptive-integration check.

    The numeric value is the time at which ``y`` first exceeds ``threshold``;
    it undershoots the true escape time by ``1/(c·threshold)``.
    """
    if not (c > 0 and y0 > 0):
        raise NonPositiveInput(f"need c > 0 and y0 > 0 (got c={c}, y0={y0})")
    T = 1.0 / (c * y0)
    # integrate z = y/y0 in tau = c y0 t, so the escape sits at tau = 1 and
    # the last steps stay representable whatever the size of T
    z_max = threshold / y0

    def escape(tau, z):
        return z[0] - z_max

    escape.terminal = True
    escape.direction = 1
    sol = solve_ivp(lambda tau, z: z * z, (0.0, 2.0), [1.0], method="RK45",
                    rtol=rtol, atol=0.0, events=escape)
    if sol.t_events[0].size:
        tau = float(sol.t_events[0][0])
    elif sol.status == -1:
        tau = float(sol.t[-1])  # step size underflow right at the singularity
    else:
        tau = math.inf
    t_num = tau * T
    return RiccatiResult(T, t_num, threshold)


# ---------------------------------------------------------------------------
# power-law fit and verdicts
# ---------------------------------------------------------------------------

MIN_FIT_SAMPLES = 10


def fit_power_law(times, values, offset: float = 1.0) -> tuple[float, float]:
    """Slope ``β`` of ``log v`` against ``log(offset + t)`` over the final decade of time.

    Returns ``(β, residual)`` with the residual the RMS deviation in ``log v``.
    The offset keeps ``t = 0`` usable and makes ``(1 + t)^β`` data exact.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.size != v.size:
        raise ValueError("times and values differ in length")
    if t.size < MIN_FIT_SAMPLES:
        raise InsufficientData(f"need at least {MIN_FIT_SAMPLES} samples (got {t.size})")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise NonPositiveInput("values must be finite and positive")
    sel = t >= t.max() / 10.0
    if sel.sum() < MIN_FIT_SAMPLES:
        sel = np.zeros_like(sel)
        sel[-MIN_FIT_SAMPLES:] = True
    x = np.log(offset + t[sel])
    y = np.log(v[sel])
    if np.ptp(x) == 0:
        raise InsufficientData("final decade spans a single time")
    beta, icpt = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (beta * x + icpt)) ** 2)))
    return float(beta), resid


FINITE_TIME = "FiniteTime"
INFINITE_TIME_GROWTH = "InfiniteTimeGrowth"
NO_BLOWUP = "NoBlowupDetected"
INCONCLUSIVE = "Inconclusive"
VERDICTS = (FINITE_TIME, INFINITE_TIME_GROWTH, NO_BLOWUP, INCONCLUSIVE)


@dataclass(frozen=True)
class BlowupThresholds:
    growth: float = 10.0
    dt_floor: float = 1e-10
    delta_fit: float = 0.3
    fit_residual: float = 0.1


@dataclass
class BlowupVerdict:
    kind: str
    growth: float
    final_dt: float
    beta: Optional[float]
    fit_residual: Optional[float]
    halt_reason: Optional[str] = None
    notes: list = field(default_factory=list)

    def to_text(self) -> str:
        beta = "n/a" if self.beta is None else f"{self.beta:.4f}"
        res = "n/a" if self.fit_residual is None else f"{self.fit_residual:.3e}"
        return (f"verdict = {self.kind}\ngrowth(‖Δu‖) = {self.growth:.6g}\nfinal_dt = {self.final_dt:.3e}\n"
                f"beta = {beta}\nfit_residual = {res}\nhalt_reason = {self.halt_reason}")


def _series_arrays(series):
    if hasattr(series, "arrays"):
        a = series.arrays()
        halt = getattr(series, "halt_reason", None)
    else:
        a = {k: np.asarray(v) for k, v in series.items() if k != "halt_reason"}
        halt = series.get("halt_reason")
    return np.asarray(a["t"], float), np.asarray(a["dt"], float), np.asarray(a["lap_norm"], float), halt


def classify_blowup(series, thresholds: BlowupThresholds = BlowupThresholds()) -> BlowupVerdict:
    """Classify a run from its ``t``, ``dt`` and ``‖Δu‖`` samples.

    ``series`` is a :class:`~ibnls.dynamics.SimSeries` or a mapping with keys
    ``t``, ``dt``, ``lap_norm`` and optionally ``halt_reason``.
    """
    from .dynamics import DT_FLOOR, NON_FINITE, RESOLUTION

    t, dt, lap, halt = _series_arrays(series)
    if t.size == 0:
        raise InsufficientData("empty series")
    finite = lap[np.isfinite(lap)]
    growth = float(finite.max() / finite[0]) if finite.size and finite[0] > 0 else math.inf
    final_dt = float(dt[-1])
    floor_hit = halt == DT_FLOOR or bool(np.any(dt <= thresholds.dt_floor))
    beta = resid = None
    try:
        beta, resid = fit_power_law(t, lap)
    except (InsufficientData, NonPositiveInput):
        pass
    v = BlowupVerdict(INCONCLUSIVE, growth, final_dt, beta, resid, halt)
    if floor_hit and growth >= thresholds.growth:
        v.kind = FINITE_TIME
    elif (not floor_hit and beta is not None and beta >= 2.0 - thresholds.delta_fit
          and resid <= thresholds.fit_residual):
        v.kind = INFINITE_TIME_GROWTH
    elif floor_hit or halt in (NON_FINITE, RESOLUTION):
        v.kind = INCONCLUSIVE
        v.notes.append("halted before a clear signal (dt floor with small growth, or resolution loss)")
    elif growth < thresholds.growth:
        v.kind = NO_BLOWUP
    else:
        v.notes.append("norm grew without a dt collapse and without a clean power law")
    return v


__all__ = [
    "GN_BOUND", "gn_ratio", "gn_exterior_ratio", "CASES", "InequalityProbe", "RadialProfile",
    "radial_nodes", "sphere_area", "radial_laplacian", "interpolation_probe", "radial_probe_oracle",
    "case_for_dimension", "CorpusSummary", "write_corpus_csv", "bounded_spread", "RiccatiResult",
    "riccati_blowup_time", "fit_power_law", "BlowupThresholds", "BlowupVerdict", "classify_blowup",
    "FINITE_TIME", "INFINITE_TIME_GROWTH", "NO_BLOWUP", "INCONCLUSIVE", "VERDICTS",
]
