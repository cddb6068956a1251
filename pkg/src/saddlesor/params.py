"""Closed-form optimal parameters and sufficient convergence regions.

All optima reduce to the same tangency condition, so every family attains
``rho = |sqrt|mu_max| - sqrt|mu_min|| / (sqrt|mu_max| + sqrt|mu_min|)`` with
``tau1 = 1 - rho^2``. Regions are coded only where a closed-form sufficient
condition exists; other combinations raise ``RegionNotCoded``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import DegenerateA, DegenerateOmega2, Infeasible, RegionNotCoded
from .spectral import Family, MethodId, MethodParams, QSign, SpectralBounds, gmpsd_denominator

DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class OptimalResult:
    params: MethodParams
    rho_opt: float
    notes: tuple = ()
    alternatives: tuple = ()  # other parameter sets attaining the same formula value


class Verdict(enum.Enum):
    GuaranteedConvergent = "guaranteed_convergent"
    NotGuaranteed = "not_guaranteed"


@dataclass(frozen=True)
class RegionVerdict:
    verdict: Verdict
    violations: tuple = ()
    case: Optional[str] = None

    @property
    def convergent(self):
        return self.verdict is Verdict.GuaranteedConvergent

    def __bool__(self):
        return self.convergent


def _sqrt_abs(bounds):
    return math.sqrt(abs(bounds.mu_min)), math.sqrt(abs(bounds.mu_max))


def tau_opt(bounds: SpectralBounds):
    """4 sqrt(mu_min mu_max) / (sqrt|mu_min| + sqrt|mu_max|)^2."""
    r0, r1 = _sqrt_abs(bounds)
    return 4.0 * r0 * r1 / (r0 + r1) ** 2


def rho_opt(bounds: SpectralBounds):
    r0, r1 = _sqrt_abs(bounds)
    return abs(r1 - r0) / (r1 + r0)


def _signed_s(bounds):
    """+sqrt(mu_min mu_max) for positive definite Q, minus that for negative definite Q."""
    return bounds.q_sign.sign * bounds.geometric_mean


def _check_a(denominator, what):
    if abs(denominator) <= DEGENERATE_TOL:
        raise DegenerateA(f"{what}: the parameter a hits its excluded value")


def optimal_gsor_family(bounds: SpectralBounds, a: float = 0.0, backward: bool = False) -> OptimalResult:
    """GSOR(a) (or GBSOR(a) when ``backward``): omega1 = tau_opt, omega2 = 1/(a' + s)."""
    s = _signed_s(bounds)
    shift = (1.0 - a) if backward else a
    _check_a(shift + s, "GBSOR" if backward else "GSOR")
    w1 = tau_opt(bounds)
    w2 = 1.0 / (shift + s)
    method = MethodId.GBSOR if backward else MethodId.GSOR
    return OptimalResult(MethodParams.make(method, omega1=w1, omega2=w2, a=a), rho_opt(bounds))


def optimal_gmesor_family(bounds: SpectralBounds, a: Optional[float] = 0.0, variant=MethodId.GMESOR,
                          omega2: Optional[float] = None) -> OptimalResult:
    """Optima of GMESOR, GESOR, GMEBSOR (free omega2) and GEBSOR.

    GESOR's optimum fixes ``a`` itself; pass ``a=None`` to obtain it. A pinned
    ``a`` other than the optimal one has no closed-form optimum and raises
    ``Infeasible``.
    """
    variant = MethodId.parse(variant)
    s = _signed_s(bounds)
    t = tau_opt(bounds)
    rho = rho_opt(bounds)
    notes = []
    if variant is MethodId.GMESOR:
        a = 0.0 if a is None else a
        _check_a(a + s, "GMESOR")
        t2 = 1.0 / (a + s)
        notes.append("omega1 does not enter the forward recurrence; reported as tau1")
        p = MethodParams.make(variant, tau1=t, tau2=t2, omega2=t2, a=a)
    elif variant is MethodId.GESOR:
        a_opt = 1.0 / t - s
        if a is not None and abs(a - a_opt) > DEGENERATE_TOL * max(1.0, abs(a_opt)):
            raise Infeasible(f"GESOR attains its optimum only at a = 1/tau - s = {a_opt:.17g}; "
                             f"no optimum is known for pinned a = {a:g}")
        notes.append(f"a is derived: a_opt = {a_opt:.17g}")
        p = MethodParams.make(variant, tau1=t, omega2=t, a=a_opt)
    elif variant is MethodId.GMEBSOR:
        a = 0.0 if a is None else a
        if omega2 is None:
            raise ValueError("GMEBSOR needs a user-supplied omega2")
        d = 1.0 - (1.0 - a) * omega2
        if abs(d) <= DEGENERATE_TOL:
            raise DegenerateOmega2("GMEBSOR requires (1-a)*omega2 != 1")
        p = MethodParams.make(variant, tau1=t, tau2=d / s, omega1=t, omega2=omega2, a=a)
    elif variant is MethodId.GEBSOR:
        a = 0.0 if a is None else a
        _check_a(1.0 - a, "GEBSOR")
        w2 = (1.0 - t * s) / (1.0 - a)
        p = MethodParams.make(variant, tau1=t, omega1=t, omega2=w2, a=a)
        if abs(1.0 - (1.0 - a) * w2) <= DEGENERATE_TOL:
            raise DegenerateOmega2("GEBSOR optimum gives a singular preconditioner")
    elif variant in (MethodId.GSOR, MethodId.GBSOR):
        return optimal_gsor_family(bounds, 0.0 if a is None else a, variant is MethodId.GBSOR)
    else:
        raise ValueError(f"{variant.value} is not a GMESOR-family variant")
    return OptimalResult(p, rho, tuple(notes))


def gpsd_sigma(bounds: SpectralBounds):
    """(M, sigma) of the equal-tau optimum; M = tau_opt * sqrt(mu_min mu_max)."""
    M = tau_opt(bounds) * bounds.geometric_mean
    if bounds.q_sign is QSign.PositiveDefinite:
        return M, 4.0 * (1.0 - M)
    return M, 4.0 * (1.0 + M)


def gpsd_a_interval(sigma):
    """Roots a1 <= a2 of sigma a^2 - sigma a + 1 = 0, or None if there are none."""
    disc = sigma * (sigma - 4.0)
    if sigma == 0 or disc < 0:
        return None
    r = math.sqrt(disc)
    lo, hi = 2.0 / (sigma - r), 2.0 / (sigma + r)
    return (min(lo, hi), max(lo, hi))


def mu_star(mu_max):
    """Threshold on mu_min beyond which a becomes restricted (mu_max > 1/4)."""
    return mu_max / (1.0 - 2.0 * math.sqrt(mu_max)) ** 2


def _equal_tau_omega2(bounds, a):
    """Both roots of a(1-a) w^2 - w + 1 -/+ M = 0, '+' branch first."""
    M, sigma = gpsd_sigma(bounds)
    disc = 1.0 - a * (1.0 - a) * sigma
    if disc < -DEGENERATE_TOL:
        interval = gpsd_a_interval(sigma)
        cond = (f"mu_max >= 1/4 and mu_min >= mu* = {mu_star(bounds.mu_max):.6g}"
                if bounds.q_sign is QSign.PositiveDefinite and bounds.mu_max > 0.25 else "sigma a(1-a) > 1")
        where = f" a must lie in [{interval[0]:.6g}, {interval[1]:.6g}]" if interval and sigma < 0 else ""
        raise Infeasible(f"no real optimum: {cond} and a = {a:g} violates 1 - a(1-a)sigma >= 0;{where}")
    root = math.sqrt(max(disc, 0.0))
    plus = sigma / (2.0 * (1.0 + root))
    minus = sigma / (2.0 * (1.0 - root)) if abs(1.0 - root) > DEGENERATE_TOL else math.inf
    return M, sigma, plus, minus


def optimal_gmpsd_family(bounds: SpectralBounds, a: float = 0.0, variant=MethodId.GMPSD,
                         omega2: Optional[float] = None) -> OptimalResult:
    """Optima of GMPSD (free omega2), SimplifiedGMPSD, GMPSD3, GMSSOR and GPSD."""
    variant = MethodId.parse(variant)
    s = _signed_s(bounds)
    t = tau_opt(bounds)
    rho = rho_opt(bounds)
    if variant is MethodId.GMPSD:
        if omega2 is None:
            raise ValueError("GMPSD needs a user-supplied omega2")
        D = gmpsd_denominator(a, omega2)
        if abs(D) <= DEGENERATE_TOL:
            raise DegenerateOmega2("(1 - a*omega2)(1 - (1-a)*omega2) = 0")
        t2 = D / s
        den = t2 - t * omega2
        if abs(den) <= DEGENERATE_TOL * max(1.0, abs(t2)):
            raise DegenerateOmega2("omega2 equals tau2_opt/tau1_opt; omega1 is undefined")
        w1 = t * (t2 - omega2) / den
        return OptimalResult(MethodParams.make(variant, tau1=t, tau2=t2, omega1=w1, omega2=omega2, a=a), rho)
    if variant is MethodId.SimplifiedGMPSD:
        return OptimalResult(MethodParams.make(variant, tau1=t, tau2=1.0 / s, a=a), rho,
                             ("omega2 = 0 and omega1 = tau1 are built into the recurrence",))
    if variant not in (MethodId.GMPSD3, MethodId.GMSSOR, MethodId.GPSD):
        raise ValueError(f"{variant.value} is not a GMPSD-family variant with a closed-form optimum")

    M, sigma, w_plus, w_minus = _equal_tau_omega2(bounds, a)
    notes = [f"M = {M:.17g}, sigma = {sigma:.17g}; '+' branch is canonical"]

    def build(w2):
        if not math.isfinite(w2):
            return None
        if variant is MethodId.GPSD:
            return MethodParams.make(variant, tau1=t, omega1=w2, a=a)
        if abs(1.0 - w2) <= DEGENERATE_TOL:
            raise DegenerateOmega2("omega2 = 1 leaves omega1 undefined")
        w1 = (t - w2) / (1.0 - w2)
        if variant is MethodId.GMSSOR:
            return MethodParams.make(variant, omega1=w1, omega2=w2, a=a)
        return MethodParams.make(variant, tau1=t, omega1=w1, omega2=w2, a=a)

    canonical = build(w_plus)
    alt = build(w_minus)
    if variant is MethodId.GPSD:
        notes.append("the closed form ties omega1 = omega2 and is attained only when tau = omega(2 - omega); "
                     "check the reported rho against the iteration-matrix oracle")
    return OptimalResult(canonical, rho, tuple(notes), (alt,) if alt is not None else ())


def optimal(method, bounds: SpectralBounds, a: Optional[float] = 0.0, omega2: Optional[float] = None):
    """Dispatch to the closed-form optimum for ``method``."""
    method = MethodId.parse(method)
    if method in (MethodId.GSOR, MethodId.GBSOR):
        return optimal_gsor_family(bounds, 0.0 if a is None else a, method is MethodId.GBSOR)
    if method in (MethodId.GMESOR, MethodId.GESOR, MethodId.GMEBSOR, MethodId.GEBSOR):
        return optimal_gmesor_family(bounds, a, method, omega2=omega2)
    if method in (MethodId.GMPSD, MethodId.SimplifiedGMPSD, MethodId.GMPSD3, MethodId.GMSSOR, MethodId.GPSD):
        return optimal_gmpsd_family(bounds, 0.0 if a is None else a, method, omega2=omega2)
    raise ValueError(f"no closed-form optimum is known for {method.value}")


# -- convergence regions ----------------------------------------------------


class _Region:
    """Collects strict inequalities lo < value < hi for one case."""

    def __init__(self, name, margin):
        self.name = name
        self.margin = margin
        self.failed = []

    def lt(self, lhs, rhs, label):
        if not (lhs + self.margin < rhs):
            self.failed.append(f"{self.name}: {label} ({lhs:.6g} < {rhs:.6g} fails)")
        return self

    def between(self, lo, value, hi, label):
        if lo is not None:
            self.lt(lo, value, label)
        if hi is not None:
            self.lt(value, hi, label)
        return self

    @property
    def ok(self):
        return not self.failed


def _combine(cases):
    for c in cases:
        if c.ok:
            return RegionVerdict(Verdict.GuaranteedConvergent, (), c.name)
    return RegionVerdict(Verdict.NotGuaranteed, tuple(v for c in cases for v in c.failed))


def _safe_div(num, den):
    return num / den if den != 0 else math.copysign(math.inf, num) if num else math.nan


def _gsor_table(w1, w2, shift, mu_lo, mu_hi, negative, margin, label):
    """GSOR/GBSOR tables with a' = a (forward) or 1 - a (backward); shift = a'."""

    def ub(mu):
        return _safe_div(2.0 * (2.0 - w1), w1 * mu + 2.0 * shift * (2.0 - w1))

    if shift == 0:
        c = _Region(f"{label} a'=0", margin).between(0.0, w1, 2.0, "0 < omega1 < 2")
        if negative:
            c.between(_safe_div(2.0 * (2.0 - w1), w1 * mu_lo), w2, 0.0, "2(2-omega1)/(omega1 mu_min) < omega2 < 0")
        else:
            c.between(0.0, w2, _safe_div(2.0 * (2.0 - w1), w1 * mu_hi), "0 < omega2 < 2(2-omega1)/(omega1 mu_max)")
        return [c]
    if not negative:
        if shift > 0:
            c1 = _Region(f"{label} case 1", margin).between(0.0, w1, 2.0, "0 < omega1 < 2")
            c1.between(0.0, w2, ub(mu_hi), "0 < omega2 < bound(mu_max)")
            return [c1]
        w1_cap = 4.0 * shift / (2.0 * shift - mu_hi)
        c2 = _Region(f"{label} case 2", margin).between(0.0, w1, w1_cap, "0 < omega1 < 4a'/(2a'-mu_max)")
        c2.lt(w2, ub(mu_hi), "omega2 < bound(mu_max)").lt(ub(mu_hi), 0.0, "bound(mu_max) < 0")
        c3 = _Region(f"{label} case 3", margin).between(0.0, w1, w1_cap, "0 < omega1 < 4a'/(2a'-mu_max)")
        c3.lt(0.0, w2, "0 < omega2")
        c4 = _Region(f"{label} case 4", margin).between(4.0 * shift / (2.0 * shift - mu_lo), w1, 2.0,
                                                       "4a'/(2a'-mu_min) < omega1 < 2")
        c4.between(0.0, w2, ub(mu_hi), "0 < omega2 < bound(mu_max)")
        return [c2, c3, c4]
    if shift < 0:
        c1 = _Region(f"{label} case 1", margin).between(0.0, w1, 2.0, "0 < omega1 < 2")
        c1.between(ub(mu_lo), w2, 0.0, "bound(mu_min) < omega2 < 0")
        return [c1]
    w1_cap = 4.0 * shift / (2.0 * shift - mu_lo)
    c2 = _Region(f"{label} case 2", margin).between(0.0, w1, w1_cap, "0 < omega1 < 4a'/(2a'-mu_min)")
    c2.lt(0.0, ub(mu_lo), "0 < bound(mu_min)").lt(ub(mu_lo), w2, "bound(mu_min) < omega2")
    c3 = _Region(f"{label} case 3", margin).between(0.0, w1, w1_cap, "0 < omega1 < 4a'/(2a'-mu_min)")
    c3.lt(w2, 0.0, "omega2 < 0")
    c4 = _Region(f"{label} case 4", margin).between(4.0 * shift / (2.0 * shift - mu_hi), w1, 2.0,
                                                   "4a'/(2a'-mu_max) < omega1 < 2")
    c4.between(ub(mu_lo), w2, 0.0, "bound(mu_min) < omega2 < 0")
    return [c2, c3, c4]


def _gmesor_region(p, b, margin):
    t1, t2, w2 = p.tau1, p.tau2, p.omega2
    c = _Region("GMESOR a=0", margin).between(0.0, t1, 2.0, "0 < tau1 < 2")
    if b.q_sign is QSign.PositiveDefinite:
        mu = b.mu_max
        c.between(0.0, t2, 4.0 / (t1 * mu), "0 < tau2 < 4/(tau1 mu_max)")
        c.between(t2 - 1.0 / mu, w2, (2.0 - t1) / (t1 * mu) + t2 / 2.0,
                  "tau2 - 1/mu_max < omega2 < (2-tau1)/(tau1 mu_max) + tau2/2")
    else:
        mu = b.mu_min
        c.between(4.0 / (t1 * mu), t2, 0.0, "4/(tau1 mu_min) < tau2 < 0")
        c.between((2.0 - t1) / (t1 * mu) + t2 / 2.0, w2, t2 - 1.0 / mu,
                  "(2-tau1)/(tau1 mu_min) + tau2/2 < omega2 < tau2 - 1/mu_min")
    return [c]


def _gesor_region(p, b, margin):
    t, w2, mu = p.tau1, p.omega2, b.mu_max
    t_bar = 2.0 if mu <= 1.0 else 2.0 / math.sqrt(mu)
    c = _Region("GESOR a=0", margin).between(0.0, t, t_bar, "0 < tau < tau_bar(mu_max)")
    c.between(t - 1.0 / mu, w2, (2.0 - t) / (t * mu) + t / 2.0,
              "tau - 1/mu_max < omega2 < (2-tau)/(tau mu_max) + tau/2")
    return [c]


def gmpsd_region_bounds(tau1, tau2, omega2, mu):
    """(omega11*(mu), omega12*(mu), omega21*, omega22*(mu)) at a = 0."""
    den = tau1 * omega2 - tau2
    w11 = _safe_div(tau1 * (2.0 * omega2 - tau2), 2.0 * den) + _safe_div((tau1 - 2.0) * (1.0 - omega2), den) / mu
    w12 = _safe_div(tau1 * (omega2 - tau2), den) + _safe_div(tau1 * (1.0 - omega2), den) / mu
    return w11, w12, tau2 / tau1, 1.0 - tau1 * tau2 * mu / 4.0


def _gmpsd_region(p, b, margin, printed=False):
    """GMPSD region (a = 0, positive definite Q).

    The printed table evaluates the omega1 bounds at a single endpoint each
    and states case 4's omega2 bound in the wrong direction; sampled points
    satisfying it can diverge. By default every bound is instead required at
    both mu_min and mu_max, which is exact because the underlying inequalities
    are affine in mu. ``printed=True`` reproduces the table verbatim.
    """
    t1, t2, w1, w2 = p.tau1, p.tau2, p.omega1, p.omega2
    lo, hi = b.mu_min, b.mu_max
    w11_lo, w12_lo, w21, w22_lo = gmpsd_region_bounds(t1, t2, w2, lo)
    w11_hi, w12_hi, _, w22_hi = gmpsd_region_bounds(t1, t2, w2, hi)
    t2_cap_hi = 4.0 * t1 / (4.0 + t1 * t1 * hi)
    t2_cap_lo = 4.0 * t1 / (4.0 + t1 * t1 * lo)
    if printed:
        inc_lo, inc_hi = w11_hi, w12_lo  # omega1 interval of case 1
        dec_lo, dec_hi = w12_lo, w11_hi  # omega1 interval of cases 2-4
    else:
        inc_lo, inc_hi = max(w11_lo, w11_hi), min(w12_lo, w12_hi)
        dec_lo, dec_hi = max(w12_lo, w12_hi), min(w11_lo, w11_hi)
    tag = "GMPSD table" if printed else "GMPSD table, both endpoints"
    cases = []
    c1 = _Region(f"{tag} case 1", margin).between(0.0, t1, 2.0, "0 < tau1 < 2")
    c1.between(w21, w2, w22_hi, "omega21* < omega2 < omega22*(mu_max)")
    c1.between(inc_lo, w1, inc_hi, "omega11* < omega1 < omega12*")
    c1.between(0.0, t2, t2_cap_hi, "0 < tau2 < 4 tau1/(4 + tau1^2 mu_max)")
    cases.append(c1)
    c2 = _Region(f"{tag} case 2", margin).between(0.0, t1, 2.0, "0 < tau1 < 2")
    c2.lt(w2, w21, "omega2 < omega21*")
    c2.between(dec_lo, w1, dec_hi, "omega12* < omega1 < omega11*")
    c2.between(0.0, t2, t2_cap_hi, "0 < tau2 < 4 tau1/(4 + tau1^2 mu_max)")
    cases.append(c2)
    c3 = _Region(f"{tag} case 3", margin).between(0.0, t1, 2.0, "0 < tau1 < 2")
    c3.lt(w2, w22_hi, "omega2 < omega22*(mu_max)")
    c3.between(dec_lo, w1, dec_hi, "omega12* < omega1 < omega11*")
    c3.lt(t2_cap_lo, t2, "4 tau1/(4 + tau1^2 mu_min) < tau2")
    cases.append(c3)
    c4 = _Region(f"{tag} case 4", margin).between(0.0, t1, 2.0, "0 < tau1 < 2")
    if printed:
        c4.between(1.0, w2, w22_lo, "1 < omega2 < omega22*(mu_min)")
    else:
        c4.lt(max(1.0, w22_hi), w2, "max(1, omega22*(mu_max)) < omega2")
    c4.between(dec_lo, w1, dec_hi, "omega12* < omega1 < omega11*")
    c4.lt(t2, 0.0, "tau2 < 0")
    cases.append(c4)
    return cases


def _gmpsd3_region(p, b, margin):
    t, w1, w2, mu = p.tau1, p.omega1, p.omega2, b.mu_max
    c = _Region("GMPSD3 a=0", margin).between(0.0, t, 2.0, "0 < tau < 2")
    c.lt(w2, 1.0 - t * t * mu / 4.0, "omega2 < 1 - tau^2 mu_max/4")
    w13 = _safe_div(t - w2, 1.0 - w2) - 1.0 / mu
    w14 = (2.0 - t) / (t * mu) + _safe_div(t - 2.0 * w2, 2.0 * (1.0 - w2))
    c.between(w13, w1, w14, "omega13*(mu_max) < omega1 < omega14*(mu_max)")
    return [c]


_GSOR_LIKE = (MethodId.GSOR, MethodId.SORLike, MethodId.Uzawa)
_TABLE10 = (MethodId.GMPSD, MethodId.GMSSOR, MethodId.GPSD, MethodId.GSSOR, MethodId.SimplifiedGMPSD)


def coded_region(method, q_sign, a):
    """True when convergence_check has a region for this combination."""
    method = MethodId.parse(method)
    neg = QSign.parse(q_sign) is QSign.NegativeDefinite
    if method in _GSOR_LIKE or method is MethodId.GBSOR:
        return True
    if method is MethodId.GMESOR:
        return a == 0
    if method is MethodId.GESOR:
        return a == 0 and not neg
    if method is MethodId.GMPSD3 or method in _TABLE10:
        return a == 0 and not neg
    return False


def convergence_check(params: MethodParams, bounds: SpectralBounds, margin: float = 0.0,
                      uncorrected_gmpsd: bool = False) -> RegionVerdict:
    """Membership in the method's sufficient convergence region.

    ``GuaranteedConvergent`` means the parameters satisfy every inequality of
    some coded case strictly (by at least ``margin``). ``NotGuaranteed`` makes
    no claim of divergence. ``uncorrected_gmpsd`` selects the verbatim GMPSD
    table instead of the endpoint-exact one (see ``_gmpsd_region``).
    """
    m = params.method
    neg = bounds.q_sign is QSign.NegativeDefinite
    if not coded_region(m, bounds.q_sign, params.a):
        raise RegionNotCoded(f"no convergence region is coded for {m.value} with a = {params.a:g} "
                             f"and {'negative' if neg else 'positive'} definite Q")
    tie_problems = [v for v in params.violations() if "requires" in v]
    if tie_problems:
        return RegionVerdict(Verdict.NotGuaranteed, tuple(tie_problems))
    lo, hi = bounds.mu_min, bounds.mu_max
    if m in _GSOR_LIKE:
        cases = _gsor_table(params.omega1, params.omega2, params.a, lo, hi, neg, margin, "GSOR")
    elif m is MethodId.GBSOR:
        cases = _gsor_table(params.omega1, params.omega2, 1.0 - params.a, lo, hi, neg, margin, "GBSOR")
    elif m is MethodId.GMESOR:
        cases = _gmesor_region(params, bounds, margin)
    elif m is MethodId.GESOR:
        cases = _gesor_region(params, bounds, margin)
    elif m is MethodId.GMPSD3:
        cases = _gmpsd3_region(params, bounds, margin)
    else:
        cases = _gmpsd_region(params, bounds, margin, uncorrected_gmpsd)
    return _combine(cases)


def validate_params(params: MethodParams):
    """Every violated nonsingularity or tie constraint; empty means valid."""
    return params.violations()
