"""
Radial cut-off family for localized virial estimates.

The profile ``chi`` on ``[0, inf)`` is

    2s                         on [0, 1]
    2s - 2(s-1)^k              on (1, s1],   s1 = 1 + k^{1/(1-k)}
    degree-7 Hermite bridge    on (s1, 2)    (C^3 at both ends, strictly decreasing)
    0                          on [2, inf)

and ``phi(s) = ∫_0^s chi``, ``phi_R(r) = R^2 phi(r/R)``. Everything below is
evaluated from exact piecewise Laurent polynomials (see ``_piecewise``), so
derivatives up to order 6 never involve differencing. The defect functions

    Phi1 = 8 (2 - phi_R'/r)
    Phi2 = 2/(N+4-b) [ (4-b)(2 - phi_R'') + (4N-4+b)(2 - phi_R'/r) ]

are assembled from ``2s - chi`` and ``2 - chi'`` with the cancellation done on
coefficients, which keeps their ``(s-1)^k`` vanishing at ``s = 1+`` accurate.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from math import comb

import numpy as np
from numpy.polynomial import Polynomial

from ._piecewise import LaurentPiece, RadialFunction
from .errors import BridgeMonotonicityFailed, DominanceFailed, KTooSmall, PropertyViolated

BRIDGE_SAMPLES = 10_000


def bridge_start(k: int) -> float:
    """Left end ``1 + k^{1/(1-k)}`` of the bridge, where ``chi'`` first vanishes."""
    return 1.0 + k ** (1.0 / (1.0 - k))


def default_alpha(b: float) -> float:
    return 2.0 / (4.0 - b)


def _hermite_bridge(k: int) -> tuple[float, np.ndarray]:
    """Coefficients, in powers of ``w = s - 2``, of the degree-7 bridge.

    With ``u = (s - s1)/ell`` the bridge is ``(1-u)^4 Q(u)``: the factor forces
    the four conditions at ``s = 2`` exactly, and the cubic ``Q`` is the Taylor
    truncation of ``H/(1-u)^4`` matching the four conditions at ``s1``.
    Expanding about ``s = 2`` keeps those zeros exact in floating point.
    """
    s1 = bridge_start(k)
    ell = 2.0 - s1
    t1 = s1 - 1.0
    # Taylor data of 2s - 2(s-1)^k at s1, as a_j = chi^{(j)}(s1) ell^j / j!
    a = np.zeros(4)
    a[0] = 2.0 * s1 - 2.0 * t1 ** k
    a[1] = (2.0 - 2.0 * k * t1 ** (k - 1)) * ell
    a[2] = -k * (k - 1) * t1 ** (k - 2) * ell ** 2
    a[3] = -comb(k, 3) * 2.0 * t1 ** (k - 3) * ell ** 3
    q = Polynomial([sum(a[i] * comb(n - i + 3, 3) for i in range(n + 1)) for n in range(4)])
    # u = 1 + w/ell and (1 - u)^4 = (w/ell)^4
    h = q(Polynomial([1.0, 1.0 / ell])) * Polynomial([0.0, 0.0, 0.0, 0.0, ell ** -4])
    return s1, h.coef


@dataclass(frozen=True)
class CutoffSpec:
    """Parameters of one member of the cut-off family.

    ``N`` and ``b`` only enter ``Phi2`` and the Laplacians; ``alpha`` is the
    power used by the ``Phi2^alpha`` scaling audit.
    """

    R: float
    k: int
    b: float
    N: int
    alpha: float
    s1: float
    bridge: tuple = field(repr=False)

    def at(self, R: float) -> "CutoffSpec":
        return replace(self, R=float(R))

    @property
    def unit(self) -> "UnitCutoff":
        return _unit_cutoff(self.k, self.N, float(self.b))


def build_chi(k: int = 8, b: float = 0.3, N: int = 1, R: float = 1.0, alpha: float | None = None) -> CutoffSpec:
    if int(k) != k:
        raise KTooSmall(f"k must be an integer (got {k})")
    k = int(k)
    if not 0 < b < 4:
        raise ValueError(f"b must lie in (0, 4) (got {b})")
    if R <= 0:
        raise ValueError(f"R must be positive (got {R})")
    alpha = default_alpha(b) if alpha is None else float(alpha)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if k < 4 or not k > 2.0 + 1.0 / alpha:
        raise KTooSmall(f"need k >= 4 and k > 2 + 1/alpha = {2 + 1 / alpha:.4g} (got k={k})")
    s1, coeffs = _hermite_bridge(k)
    spec = CutoffSpec(R=float(R), k=k, b=float(b), N=int(N), alpha=alpha, s1=s1, bridge=tuple(coeffs))
    _check_bridge(spec)
    return spec


def _check_bridge(spec: CutoffSpec):
    u = spec.unit
    s = np.linspace(spec.s1, 2.0, BRIDGE_SAMPLES + 2)[1:-1]
    d = u.dphi[2](s)
    if np.any(d >= 0):
        bad = s[np.argmax(d >= 0)]
        raise BridgeMonotonicityFailed(f"chi'(s) >= 0 at s={bad:.6f} on the bridge for k={spec.k}")
    if np.any(u.dphi[1](np.linspace(0.0, 2.0, BRIDGE_SAMPLES)) < 0):
        raise BridgeMonotonicityFailed("chi takes negative values on [0, 2]")


class UnitCutoff:
    """All radial functions of the ``R = 1`` profile, in the variable ``s``."""

    def __init__(self, k: int, N: int, b: float):
        s1, bridge = _hermite_bridge(k)
        self.k, self.N, self.b, self.s1 = k, N, b, s1
        breaks = [0.0, 1.0, s1, 2.0, np.inf]
        chi_pieces = [
            LaurentPiece.poly(0.0, [0.0, 2.0]),
            LaurentPiece.poly(1.0, [2.0, 2.0] + [0.0] * (k - 2) + [-2.0]),
            LaurentPiece.poly(2.0, bridge),
            LaurentPiece.poly(2.0, [0.0]),
        ]
        # phi = ∫_0^s chi, continuity carried across breakpoints
        phi_pieces, value = [], 0.0
        for lo, hi, cp in zip(breaks[:-1], breaks[1:], chi_pieces):
            pp = cp.integral(0.0)
            pp = pp + LaurentPiece.poly(pp.anchor, [value - float(pp(np.array([lo]))[0])])
            phi_pieces.append(pp)
            if np.isfinite(hi):
                value = float(pp(np.array([hi]))[0])
        phi = RadialFunction(breaks, phi_pieces)
        chi = RadialFunction(breaks, chi_pieces)
        self.phi = phi
        self.dphi = [phi] + [chi.deriv(j) for j in range(6)]
        self.dphi.append(chi.deriv(6))
        # defects: (2s - chi)/s and 2 - chi'
        self.defect1 = (chi.identity_like(2.0) - chi).div_s()
        self.defect2 = chi.constant_like(2.0) - chi.deriv()
        self.phi1 = self.defect1.scale(8.0)
        c = 2.0 / (N + 4.0 - b)
        self.phi2 = self.defect2.scale(c * (4.0 - b)) + self.defect1.scale(c * (4.0 * N - 4.0 + b))
        # quantities for the cut-off inequalities
        self.chi_minus_s_dchi = _chi_minus_s_dchi(chi)
        self.two_s_minus_chi = chi.identity_like(2.0) - chi
        # cartesian pieces for the virial identity
        self.hess_a, self.hess_b = phi.hessian_parts()
        self.lap = phi.laplacian(N)
        self.lap2 = self.lap.laplacian(N)
        self.lap3 = self.lap2.laplacian(N)
        self.lap_hess_a, self.lap_hess_b = self.lap.hessian_parts()
        self.dphi2 = self.phi2.deriv()
        self.ddphi2 = self.dphi2.deriv()


def _chi_minus_s_dchi(chi: RadialFunction) -> RadialFunction:
    """``chi - s chi'`` with the product formed in the local variable."""
    dchi = chi.deriv()
    pieces = []
    for c, d in zip(chi.pieces, dchi.pieces):
        terms = {}
        for m, coef in d.terms.items():
            # s * P(t) s^-m: shift m down, or multiply by (anchor + t) when m == 0
            prod = np.convolve(coef, [c.anchor, 1.0]) if m == 0 else coef
            key = max(m - 1, 0)
            terms[key] = prod if key not in terms else np.polynomial.polynomial.polyadd(terms[key], prod)
        pieces.append(c - LaurentPiece(c.anchor, terms))
    return RadialFunction(chi.breaks, pieces)


@lru_cache(maxsize=64)
def _unit_cutoff(k: int, N: int, b: float) -> UnitCutoff:
    return UnitCutoff(k, N, b)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass
class CutoffEvaluation:
    radii: np.ndarray
    dphi: np.ndarray  # shape (7, n): ∂_r^j phi_R for j = 0..6
    Phi1: np.ndarray
    Phi2: np.ndarray


def radial_derivative(spec: CutoffSpec, j: int, r) -> np.ndarray:
    """``∂_r^j phi_R(r) = R^{2-j} phi^{(j)}(r/R)``."""
    R = spec.R
    return R ** (2 - j) * spec.unit.dphi[j](np.asarray(r, dtype=float) / R)


def Phi1(spec: CutoffSpec, r) -> np.ndarray:
    return spec.unit.phi1(np.asarray(r, dtype=float) / spec.R)


def Phi2(spec: CutoffSpec, r) -> np.ndarray:
    return spec.unit.phi2(np.asarray(r, dtype=float) / spec.R)


def eval_phi_family(spec: CutoffSpec, radii) -> CutoffEvaluation:
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < 0):
        raise ValueError("radii must be nonnegative")
    d = np.stack([radial_derivative(spec, j, radii) for j in range(7)])
    return CutoffEvaluation(radii, d, Phi1(spec, radii), Phi2(spec, radii))


def phi2_power_derivatives(spec: CutoffSpec, r, alpha: float | None = None):
    """``(G, ∂_r G, ∂_r^2 G)`` for ``G = Phi2_R^alpha``, by exact chain rule.

    Where ``Phi2 = 0`` the derivatives are set to 0, which is the limit when
    ``alpha (k-1) > 2``.
    """
    alpha = spec.alpha if alpha is None else alpha
    R = spec.R
    s = np.asarray(r, dtype=float) / R
    u = spec.unit
    p, dp, ddp = u.phi2(s), u.dphi2(s) / R, u.ddphi2(s) / R ** 2
    pos = p > 0
    g = np.zeros_like(p)
    g1 = np.zeros_like(p)
    g2 = np.zeros_like(p)
    pp = p[pos]
    g[pos] = pp ** alpha
    g1[pos] = alpha * pp ** (alpha - 1.0) * dp[pos]
    g2[pos] = alpha * (alpha - 1.0) * pp ** (alpha - 2.0) * dp[pos] ** 2 + alpha * pp ** (alpha - 1.0) * ddp[pos]
    return g, g1, g2


@dataclass(frozen=True)
class CartesianCutoff:
    """Grid samples of every Cartesian derivative of ``phi_R`` the virial identity needs.

    ``∂_jk phi_R = δ_jk hess_a + x_j x_k hess_b`` and likewise for ``Δphi_R``.
    """

    grad_factor: np.ndarray  # ∇phi_R = x * grad_factor  (= phi_R'/r)
    hess_a: np.ndarray
    hess_b: np.ndarray
    lap: np.ndarray
    lap2: np.ndarray
    lap3: np.ndarray
    lap_hess_a: np.ndarray
    lap_hess_b: np.ndarray
    Phi1: np.ndarray
    Phi2: np.ndarray
    defect1: np.ndarray  # 2 - phi_R'/r
    spec: CutoffSpec = field(repr=False)


def cartesian_cutoff(spec: CutoffSpec, r: np.ndarray) -> CartesianCutoff:
    """Evaluate the Cartesian cut-off data on an array of radii (any shape).

    ``spec.N`` must equal the spatial dimension of ``r``'s grid because the
    Laplacians depend on it.
    """
    R = spec.R
    u = spec.unit
    s = np.asarray(r, dtype=float) / R
    return CartesianCutoff(
        grad_factor=u.hess_a(s),
        hess_a=u.hess_a(s),
        hess_b=u.hess_b(s) / R ** 2,
        lap=u.lap(s),
        lap2=u.lap2(s) / R ** 2,
        lap3=u.lap3(s) / R ** 4,
        lap_hess_a=u.lap_hess_a(s) / R ** 2,
        lap_hess_b=u.lap_hess_b(s) / R ** 4,
        Phi1=u.phi1(s),
        Phi2=u.phi2(s),
        defect1=u.defect1(s),
        spec=spec,
    )


# ---------------------------------------------------------------------------
# Audits
# ---------------------------------------------------------------------------


@dataclass
class AuditReport:
    """Ordered ``property id -> value`` map with an overall verdict."""

    name: str
    entries: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def record(self, key, value):
        self.entries[key] = value

    def check(self, key, ok: bool, value, error=None):
        self.entries[key] = value
        self.entries[key + ".status"] = "PASS" if ok else "FAIL"
        if not ok:
            self.failures.append((key, error))
        return ok

    def raise_if_failed(self):
        for _, err in self.failures:
            if err is not None:
                raise err
        if self.failures:
            raise AssertionError(f"{self.name}: failed {[k for k, _ in self.failures]}")

    def to_text(self) -> str:
        lines = [f"# {self.name}"]
        for key, v in self.entries.items():
            lines.append(f"{key} = {_fmt(v)}")
        lines.append(f"{self.name}.status = {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _support(r, values):
    nz = np.nonzero(values != 0)[0]
    if nz.size == 0:
        return (np.nan, np.nan)
    return (float(r[nz[0]]), float(r[nz[-1]]))


def verify_cutoff_properties(spec: CutoffSpec, R_list, samples: int = 20_001, tol: float = 1e-12,
                             ratio_spread: float = 0.05, strict: bool = False) -> AuditReport:
    """Sample ``[0, 3R]`` and check the pointwise and support properties of ``phi_R``.

    Per ``R``: exactness of ``phi_R' = 2r``, ``phi_R'' = 2`` on ``r <= R``;
    the three one-sided inequalities; ``sup |∂^j phi_R|`` and ``sup * R^{j-2}``
    for ``j = 0..6``; and where each derivative is nonzero. Across ``R`` the
    normalized sups must agree within ``ratio_spread``.
    """
    if samples < 10_000:
        raise ValueError("need at least 10^4 radial samples per R")
    rep = AuditReport("cutoff_properties")
    u = spec.unit
    ratios = {j: [] for j in range(7)}
    for R in R_list:
        sp = spec.at(R)
        r = np.linspace(0.0, 3.0 * R, samples)
        s = r / R
        d = np.stack([radial_derivative(sp, j, r) for j in range(7)])
        inner = r <= R
        exact = max(np.max(np.abs(d[1][inner] - 2 * r[inner])), np.max(np.abs(d[2][inner] - 2.0)))
        rep.check(f"R={R:g}.inner_exact", exact == 0.0, exact)
        # one-sided inequalities, each from its own exact combination
        v1 = -R * u.chi_minus_s_dchi(s)  # -(phi' - r phi'')
        v2 = -R * u.two_s_minus_chi(s)  # phi' - 2r
        v3 = -u.defect2(s)  # phi'' - 2
        for name, v in (("monotone_quotient", v1), ("slope_below_2r", v2), ("curvature_below_2", v3)):
            worst = float(max(np.max(v), 0.0))
            i = int(np.argmax(v))
            rep.check(f"R={R:g}.{name}.max_violation", worst <= tol, worst,
                      PropertyViolated(name, float(r[i]), worst))
        sups = np.max(np.abs(d), axis=1)
        rep.record(f"R={R:g}.sup", sups)
        norm = sups * R ** (np.arange(7) - 2.0)
        rep.record(f"R={R:g}.normalized_sup", norm)
        for j in range(7):
            ratios[j].append(norm[j])
        for j in range(1, 7):
            lo, hi = _support(r, d[j])
            rep.record(f"R={R:g}.support.j={j}", (lo, hi))
            if j <= 2:
                outside = r > 2.0 * R
            else:
                outside = (r < R) | (r > 2.0 * R)
            leak = float(np.max(np.abs(d[j][outside]))) if outside.any() else 0.0
            i = int(np.argmax(np.abs(d[j]) * outside))
            rep.check(f"R={R:g}.support.j={j}.leak", leak == 0.0, leak,
                      PropertyViolated(f"support of d^{j} phi_R", float(r[i]), leak))
    for j in range(7):
        vals = np.asarray(ratios[j])
        med = float(np.median(vals))
        spread = float(np.max(np.abs(vals / med - 1.0))) if med != 0 else 0.0
        rep.check(f"normalized_sup.j={j}.spread", spread <= ratio_spread, spread)
    if strict:
        rep.raise_if_failed()
    return rep


def verify_Phi2_scaling(spec: CutoffSpec, alpha: float | None, R_list, samples: int = 40_001,
                        spread: float = 0.5, strict: bool = False) -> AuditReport:
    """``R sup|∂_r Phi2^alpha|`` and ``R^2 sup|Δ Phi2^alpha|`` along ``R_list``.

    PASS iff each normalized sequence stays within ``spread`` of its median.
    """
    alpha = spec.alpha if alpha is None else float(alpha)
    margin = alpha * (spec.k - 1) - 2.0
    if margin < 0:
        raise KTooSmall(f"alpha(k-1) - 2 = {margin:.4g} < 0: derivatives of Phi2^alpha blow up at r = R+")
    rep = AuditReport("phi2_scaling")
    rep.record("alpha", alpha)
    rep.record("vanishing_margin", margin)
    N = spec.N
    s1_seq, s2_seq = [], []
    for R in R_list:
        sp = spec.at(R)
        r = np.linspace(0.0, 3.0 * R, samples)[1:]
        _, g1, g2 = phi2_power_derivatives(sp, r, alpha)
        lap = g2 + (N - 1) / r * g1
        inner = r <= R
        outer = r >= 2 * R
        rep.record(f"R={R:g}.inner_contribution", float(max(np.max(np.abs(g1[inner])), np.max(np.abs(lap[inner])))))
        rep.record(f"R={R:g}.outer_contribution", float(max(np.max(np.abs(g1[outer])), np.max(np.abs(lap[outer])))))
        s1_seq.append(R * float(np.max(np.abs(g1))))
        s2_seq.append(R * R * float(np.max(np.abs(lap))))
    for key, seq in (("R_sup_grad", s1_seq), ("R2_sup_lap", s2_seq)):
        seq = np.asarray(seq)
        med = float(np.median(seq))
        var = float(np.max(np.abs(seq / med - 1.0))) if med > 0 else np.inf
        rep.record(key, seq)
        rep.check(key + ".variation", bool(np.all(np.isfinite(seq))) and var < spread, var)
    if strict:
        rep.raise_if_failed()
    return rep


def bridge_phi1_lower_bound(k: int) -> float:
    """``16 k^{k/(1-k)} / (1 + k^{1/(1-k)})``, the value of ``Phi1`` at ``r = R s1``."""
    return 16.0 * k ** (k / (1.0 - k)) / (1.0 + k ** (1.0 / (1.0 - k)))


def phi_comparison_audit(spec: CutoffSpec, R_list, samples: int = 40_001, strict: bool = False) -> AuditReport:
    """Check that ``Phi1`` dominates ``Phi2^{4/(4-b)}`` up to the factor ``R^{2b/(4-b)}``.

    ``rho(R) = sup_{r > R, Phi1 > 0} Phi2^{4/(4-b)} / Phi1`` is computed on
    ``(R, 4R]`` with extra geometric sampling towards ``R+``. PASS iff rho is
    finite and ``R^{-2b/(4-b)} rho(R)`` is non-increasing along ``R_list``.
    """
    b, k, N = spec.b, spec.k, spec.N
    p = 4.0 / (4.0 - b)
    rep = AuditReport("phi_comparison")
    margin = p * (k - 1) - k
    rep.record("vanishing_order_margin", margin)
    rep.record("k_ge_4_over_b", k >= 4.0 / b)
    rep.record("outer_ratio_exact", (16.0 * N / (N + 4.0 - b)) ** p / 16.0)
    u = spec.unit
    normalized = []
    for R in R_list:
        r = np.concatenate([R * (1.0 + np.geomspace(1e-8, 1e-2, 400)), np.linspace(R, 4.0 * R, samples)[1:]])
        r.sort()
        s = r / R
        f1, f2 = u.phi1(s), u.phi2(s)
        ok = f1 > 0
        q = np.full_like(r, -np.inf)
        with np.errstate(over="ignore", divide="ignore"):
            q[ok] = f2[ok] ** p / f1[ok]
        i = int(np.argmax(q))
        rho = float(q[i])
        if margin < 0:
            rho = np.inf
        rep.record(f"R={R:g}.rho", rho)
        rep.record(f"R={R:g}.rho_argmax_r", float(r[i]))
        normalized.append(R ** (-2.0 * b / (4.0 - b)) * rho)
        outer = r >= 2 * R
        rep.record(f"R={R:g}.outer_ratio", float(np.max(q[outer])))
        bridge = (s > spec.s1) & (s <= 2.0)
        rep.check(f"R={R:g}.bridge_Phi2_min", float(np.min(f2[bridge])) > 0, float(np.min(f2[bridge])))
        lb = bridge_phi1_lower_bound(k)
        worst = float(np.min(f1[bridge] - lb))
        j = int(np.argmin(np.where(bridge, f1 - lb, np.inf)))
        rep.check(f"R={R:g}.bridge_Phi1_bound", worst >= -1e-12, worst, DominanceFailed(float(r[j]), "Phi1 bound"))
    normalized = np.asarray(normalized)
    rep.record("normalized_rho", normalized)
    finite = bool(np.all(np.isfinite(normalized)))
    rep.check("rho_finite", finite, finite, DominanceFailed(float(R_list[0]) * (1 + 1e-8), "rho infinite"))
    mono = finite and bool(np.all(np.diff(normalized) <= 0))
    rep.check("normalized_rho_nonincreasing", mono, mono,
              None if mono else DominanceFailed(float(R_list[int(np.argmax(np.diff(normalized) > 0)) + 1])))
    if strict:
        rep.raise_if_failed()
    return rep
