"""Equilibrium solvers for the discrete insider trading game.

The monopolist's signal loading solves a quartic with a unique admissible
root at or below the volatility ratio sigma_K/sigma_S. With k traders the
aggregate loading solves a one-dimensional fixed point: each trader's best
response at a conjectured aggregate is the smaller root of a quadratic, and
the aggregate must equal the sum of the responses. A proportional
transaction tax deforms the quadratic but keeps the same structure; the
taxed solve continues in the tax rate from the untaxed solution so the
branch is never guessed.

All root finding is bracketed bisection to width 1e-14 times the problem
scale, followed by at most three Newton polish steps that fall back to the
bisection value if they leave the bracket.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .model import ValidatedParams

__all__ = [
    "Equilibrium",
    "SolveDiagnostics",
    "RejectedRoot",
    "QuarticRoots",
    "SolverError",
    "NoRootInBracket",
    "ConstraintViolated",
    "ContinuationFailed",
    "NegativeDiscriminant",
    "RootsNotSeparated",
    "solve_monopoly_beta",
    "monopoly_quartic_roots",
    "nash_best_response_beta",
    "solve_nash",
    "solve_taxed",
    "solve_equilibrium",
    "pricing_from_beta",
    "system_residual",
    "validate_equilibrium",
]

BRACKET_WIDTH_REL = 1e-14
NEWTON_STEPS = 3
QUARTIC_RESIDUAL_TOL = 1e-12
SYSTEM_RESIDUAL_TOL = 1e-10
_MAX_BRACKET_EXPANSIONS = 60
_CONTINUATION_STEPS = 16


class SolverError(RuntimeError):
    """Base class for structured solver failures."""


class NoRootInBracket(SolverError):
    pass


class ConstraintViolated(SolverError):
    def __init__(self, which: str, detail: str = ""):
        self.which = which
        super().__init__(f"equilibrium constraint violated: {which}" + (f" ({detail})" if detail else ""))


class ContinuationFailed(SolverError):
    pass


class NegativeDiscriminant(SolverError):
    """The best-response discriminant is provably positive; hitting this is a bug."""


class RootsNotSeparated(SolverError):
    pass


@dataclass(frozen=True)
class Equilibrium:
    """Linear equilibrium coefficients: signal loadings, price impact, decay."""

    betas: tuple[float, ...]
    beta_sigma: float
    lam: float
    phis: tuple[float, ...]
    mus: tuple[float, ...]
    tax: float = 0.0

    @property
    def k(self) -> int:
        return len(self.betas)

    @property
    def eta(self) -> float:
        """Residual signal share 1 - lambda * beta_sigma, always in (0, 1]."""
        return 1.0 - self.lam * self.beta_sigma

    def to_dict(self) -> dict:
        return {
            "betas": list(self.betas),
            "beta_sigma": self.beta_sigma,
            "lambda": self.lam,
            "phis": list(self.phis),
            "mus": list(self.mus),
            "tax": self.tax,
        }


@dataclass(frozen=True)
class RejectedRoot:
    value: float
    reason: str


@dataclass(frozen=True)
class SolveDiagnostics:
    iterations: int
    bracket: tuple[float, float]
    residuals: tuple[float, ...]
    aggregate_residual: float
    rejected_roots: tuple[RejectedRoot, ...] = ()
    h_samples: tuple[tuple[float, float], ...] = ()
    continuation_steps: int = 0


@dataclass(frozen=True)
class QuarticRoots:
    admissible: float
    inadmissible: float
    inadmissible_phi: float
    reason: str = "phi < 0"


def _bisect(f, lo: float, hi: float, scale: float):
    """Bracketed bisection; returns (root, iterations, (lo, hi))."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo, 0, (lo, lo)
    if fhi == 0.0:
        return hi, 0, (hi, hi)
    if flo * fhi > 0:
        raise NoRootInBracket(f"no sign change on [{lo!r}, {hi!r}]")
    width = BRACKET_WIDTH_REL * scale
    iterations = 0
    while hi - lo > width and iterations < 200:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        iterations += 1
        if fm == 0.0:
            return mid, iterations, (mid, mid)
        if flo * fm < 0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi), iterations, (lo, hi)


def _newton_polish(f, fprime, x: float, lo: float, hi: float) -> float:
    """Up to NEWTON_STEPS Newton iterations, discarded if they exit [lo, hi]."""
    best = x
    fbest = abs(f(best))
    for _ in range(NEWTON_STEPS):
        d = fprime(x)
        if d == 0.0 or not math.isfinite(d):
            break
        step = f(x) / d
        x_new = x - step
        if not (lo - (hi - lo) <= x_new <= hi + (hi - lo)) or not math.isfinite(x_new):
            break
        x = x_new
        fx = abs(f(x))
        if fx < fbest:
            best, fbest = x, fx
        if step == 0.0:
            break
    return best


def _quartic(beta: float, r: float, g: float, rho: float, dt: float) -> float:
    return (
        beta**4 * (1.0 - rho * dt)
        - (2.0 - rho * dt + beta * g * dt) * r * beta * beta
        + r * r * (1.0 - beta * g * dt)
    )


def _quartic_prime(beta: float, r: float, g: float, rho: float, dt: float) -> float:
    return (
        4.0 * (1.0 - rho * dt) * beta**3
        - 3.0 * g * dt * r * beta * beta
        - 2.0 * (2.0 - rho * dt) * r * beta
        - r * r * g * dt
    )


def _quartic_scale(beta: float, r: float, g: float, rho: float, dt: float) -> float:
    """Magnitude of the quartic's monomials at beta, for relative residuals."""
    return max(
        abs(beta**4 * (1.0 - rho * dt)),
        abs((2.0 - rho * dt + beta * g * dt) * r * beta * beta),
        abs(r * r * (1.0 + beta * g * dt)),
    )


def _require_untaxed_monopoly(params: ValidatedParams, op: str) -> None:
    if params.k != 1:
        raise ValueError(f"{op} requires exactly one trader, got k={params.k}")
    if params.tax != 0.0:
        raise ValueError(f"{op} requires tax == 0, got {params.tax!r}")


def solve_monopoly_beta(params: ValidatedParams) -> float:
    """Admissible root of the monopolist's quartic, in (0, sigma_K/sigma_S].

    At dt == 0 the quartic degenerates to a double root at the volatility
    ratio, which is returned directly.
    """
    _require_untaxed_monopoly(params, "solve_monopoly_beta")
    m = params.sigma_K / params.sigma_S
    if params.dt == 0.0:
        return m
    r = params.vol_ratio_sq
    g = params.traders[0].gamma
    rho = params.traders[0].rho
    dt = params.dt

    def f(b):
        return _quartic(b, r, g, rho, dt)

    def fp(b):
        return _quartic_prime(b, r, g, rho, dt)

    # f(0+) = r^2 > 0 and f(m) = -2 m g dt r^2 < 0, so the bracket always holds.
    root, _, (lo, hi) = _bisect(f, 1e-12 * m, m, scale=m)
    root = _newton_polish(f, fp, root, lo, hi)
    scale = _quartic_scale(root, r, g, rho, dt)
    if abs(f(root)) > QUARTIC_RESIDUAL_TOL * scale:
        raise ConstraintViolated("quartic_residual", f"|residual| = {abs(f(root))!r} at beta = {root!r}")
    return root


def monopoly_quartic_roots(params: ValidatedParams) -> QuarticRoots:
    """Both real roots of the monopolist's quartic with admissibility classification.

    The second root exceeds the volatility ratio and implies phi < 0, i.e. an
    inventory prediction that expands instead of decaying.
    """
    _require_untaxed_monopoly(params, "monopoly_quartic_roots")
    if params.dt == 0.0:
        raise RootsNotSeparated("the two roots coalesce at the volatility ratio when dt == 0")
    m = params.sigma_K / params.sigma_S
    r = params.vol_ratio_sq
    g = params.traders[0].gamma
    rho = params.traders[0].rho
    dt = params.dt
    first = solve_monopoly_beta(params)

    def f(b):
        return _quartic(b, r, g, rho, dt)

    def fp(b):
        return _quartic_prime(b, r, g, rho, dt)

    hi = 2.0 * m
    expansions = 0
    while f(hi) < 0:
        hi *= 2.0
        expansions += 1
        if expansions > _MAX_BRACKET_EXPANSIONS:
            raise NoRootInBracket("second quartic root not bracketed")
    second, _, (lo2, hi2) = _bisect(f, m, hi, scale=m)
    second = _newton_polish(f, fp, second, lo2, hi2)
    if not (second > first) or (second - first) <= BRACKET_WIDTH_REL * m * 4:
        raise RootsNotSeparated(f"roots {first!r} and {second!r} are not numerically distinct")
    lam2, phis2, _ = pricing_from_beta(second, (second,), params)
    return QuarticRoots(admissible=first, inadmissible=second, inadmissible_phi=phis2[0])


def pricing_from_beta(beta_sigma: float, betas: tuple[float, ...], params: ValidatedParams):
    """Price impact, decay rates, and inventory price weights from loadings.

    lambda = beta_sigma sigma_S^2 / (sigma_K^2 + beta_sigma^2 sigma_S^2);
    phi_i = 1 - (lambda + 2c) beta_i / (1 - lambda beta_sigma); mu_i = lambda phi_i.
    """
    sS2 = params.sigma_S**2
    sK2 = params.sigma_K**2
    lam = beta_sigma * sS2 / (sK2 + beta_sigma**2 * sS2)
    denom = 1.0 - lam * beta_sigma
    c = params.tax
    phis = tuple(1.0 - (lam + 2.0 * c) * b / denom for b in betas)
    mus = tuple(lam * p for p in phis)
    return lam, phis, mus


def _response_coeffs(beta_sigma: float, g_i: float, rho_i: float, r: float, dt: float, c: float):
    """Quadratic a x^2 + b x + c0 = 0 for trader i's response at a fixed aggregate."""
    P = beta_sigma + 2.0 * c * (r + beta_sigma**2)
    a = (1.0 - rho_i * dt) * P * P
    b = -((P * (2.0 - rho_i * dt) + beta_sigma**2 * g_i * dt) * r + r * r * g_i * dt)
    c0 = r * r
    return a, b, c0, P


def _smaller_quadratic_root(a: float, b: float, c0: float) -> float:
    disc = b * b - 4.0 * a * c0
    if disc < 0.0:
        raise NegativeDiscriminant(f"discriminant {disc!r} < 0 for a={a!r} b={b!r} c0={c0!r}")
    sq = math.sqrt(disc)
    # b < 0 throughout this model; q = (|b| + sq)/2 avoids cancellation.
    q = 0.5 * (-b + sq) if b < 0 else 0.5 * (-b - sq)
    r1 = q / a
    r2 = c0 / q
    return min(r1, r2)


def _best_response(beta_sigma: float, g_i: float, rho_i: float, r: float, dt: float, c: float) -> float:
    if dt == 0.0:
        P = beta_sigma + 2.0 * c * (r + beta_sigma**2)
        return r / P
    a, b, c0, _ = _response_coeffs(beta_sigma, g_i, rho_i, r, dt, c)
    return _smaller_quadratic_root(a, b, c0)


def _best_response_slope(beta_sigma: float, u: float, g_i: float, rho_i: float, r: float, dt: float, c: float) -> float:
    """du/d(beta_sigma) by implicit differentiation of the response quadratic."""
    P = beta_sigma + 2.0 * c * (r + beta_sigma**2)
    Pp = 1.0 + 4.0 * c * beta_sigma
    da = 2.0 * (1.0 - rho_i * dt) * P * Pp
    db = -r * (Pp * (2.0 - rho_i * dt) + 2.0 * beta_sigma * g_i * dt)
    a, b, _, _ = _response_coeffs(beta_sigma, g_i, rho_i, r, dt, c)
    g_u = 2.0 * a * u + b
    if g_u == 0.0:
        return 0.0
    return -(da * u * u + db * u) / g_u


def nash_best_response_beta(beta_sigma: float, trader_index: int, params: ValidatedParams) -> float:
    """Trader ``trader_index``'s loading when the aggregate is conjectured fixed.

    Returns the smaller root of the response quadratic; the larger root
    violates the loading bound and corresponds to a negative decay rate.
    Reads the tax rate from ``params``.
    """
    if beta_sigma <= 0:
        raise ValueError(f"beta_sigma must be positive, got {beta_sigma!r}")
    t = params.traders[trader_index]
    r = params.vol_ratio_sq
    u = _best_response(beta_sigma, t.gamma, t.rho, r, params.dt, params.tax)
    P = beta_sigma + 2.0 * params.tax * (r + beta_sigma**2)
    bound = r / P
    if params.dt == 0.0:
        return u
    if not (0.0 < u < bound * (1.0 + 1e-12)):
        raise ConstraintViolated("beta_bound", f"response {u!r} outside (0, {bound!r}]")
    return u


def system_residual(eq: Equilibrium, params: ValidatedParams) -> tuple[float, ...]:
    """Per-trader residual of the equilibrium system, scaled by r^2."""
    r = params.vol_ratio_sq
    dt = params.dt
    out = []
    for i, t in enumerate(params.traders):
        a, b, c0, _ = _response_coeffs(eq.beta_sigma, t.gamma, t.rho, r, dt, params.tax)
        bi = eq.betas[i]
        out.append(abs(a * bi * bi + b * bi + c0) / (r * r))
    return tuple(out)


def validate_equilibrium(eq: Equilibrium, params: ValidatedParams) -> None:
    """Raise ConstraintViolated unless all structural invariants hold."""
    r = params.vol_ratio_sq
    if abs(sum(eq.betas) - eq.beta_sigma) > 1e-12 * max(1.0, abs(eq.beta_sigma)):
        raise ConstraintViolated("aggregate_identity", f"sum(betas)={sum(eq.betas)!r} vs {eq.beta_sigma!r}")
    if not eq.beta_sigma > 0:
        raise ConstraintViolated("beta_sigma_positive")
    lam, phis, mus = pricing_from_beta(eq.beta_sigma, eq.betas, params)
    if abs(lam - eq.lam) > 1e-12 * max(1.0, abs(lam)):
        raise ConstraintViolated("lambda_formula")
    if not eq.lam * eq.beta_sigma < 1.0:
        raise ConstraintViolated("price_impact_share")
    for i, (b, p, m_) in enumerate(zip(eq.betas, eq.phis, eq.mus)):
        if params.dt == 0.0:
            if p != 0.0:
                raise ConstraintViolated("phi_limit", f"trader {i}: phi={p!r} at dt=0")
            continue
        if not (0.0 < b * eq.beta_sigma <= r * (1.0 + 1e-12)):
            raise ConstraintViolated("beta_bound", f"trader {i}")
        lo_ok = p > 0.0 if params.tax == 0.0 else p >= 0.0
        if not (lo_ok and p <= 1.0):
            raise ConstraintViolated("phi_range", f"trader {i}: phi={p!r}")
        if abs(m_ - eq.lam * p) > 1e-12 * max(1.0, abs(m_)):
            raise ConstraintViolated("mu_formula", f"trader {i}")


def _aggregate_closed_form(params: ValidatedParams, c: float) -> float:
    """dt == 0 aggregate loading; with tax it solves t (t + 2c (r + t^2)) = k r."""
    r = params.vol_ratio_sq
    k = params.k
    target = k * r
    if c == 0.0:
        return math.sqrt(k) * (params.sigma_K / params.sigma_S)

    def f(t):
        return t * (t + 2.0 * c * (r + t * t)) - target

    hi = math.sqrt(target) + 1.0
    while f(hi) < 0:
        hi *= 2.0
    root, _, (lo, hi2) = _bisect(f, 1e-300, hi, scale=max(1.0, hi))
    return _newton_polish(
        f, lambda t: 2.0 * t + 2.0 * c * (r + 3.0 * t * t), root, lo, hi2
    )


def _assemble(beta_sigma: float, params: ValidatedParams, diag: SolveDiagnostics) -> tuple[Equilibrium, SolveDiagnostics]:
    r = params.vol_ratio_sq
    dt = params.dt
    c = params.tax
    if dt == 0.0:
        betas = tuple(_best_response(beta_sigma, t.gamma, t.rho, r, 0.0, c) for t in params.traders)
        lam, _, _ = pricing_from_beta(beta_sigma, betas, params)
        # phi = 0 holds identically in the limit; avoid rounding residue.
        phis = tuple(0.0 for _ in betas)
        mus = tuple(0.0 for _ in betas)
        eq = Equilibrium(betas, beta_sigma, lam, phis, mus, tax=c)
    else:
        betas = tuple(
            nash_best_response_beta(beta_sigma, i, params) for i in range(params.k)
        )
        lam, phis, mus = pricing_from_beta(beta_sigma, betas, params)
        eq = Equilibrium(betas, beta_sigma, lam, phis, mus, tax=c)
    validate_equilibrium(eq, params)
    residuals = system_residual(eq, params)
    worst = max(residuals)
    if worst > SYSTEM_RESIDUAL_TOL:
        raise ConstraintViolated("system_residual", f"max residual {worst!r}")
    diag = SolveDiagnostics(
        iterations=diag.iterations,
        bracket=diag.bracket,
        residuals=residuals,
        aggregate_residual=abs(sum(betas) - beta_sigma),
        rejected_roots=diag.rejected_roots,
        h_samples=diag.h_samples,
        continuation_steps=diag.continuation_steps,
    )
    return eq, diag


def _solve_fixed_point(params: ValidatedParams, c: float, bracket=None, for_tax=False):
    """Solve sum_i u_i(beta_sigma) = beta_sigma for the aggregate loading."""
    r = params.vol_ratio_sq
    dt = params.dt
    m = params.sigma_K / params.sigma_S
    k = params.k

    if dt == 0.0:
        bs = _aggregate_closed_form(params, c)
        diag = SolveDiagnostics(0, (bs, bs), (), 0.0)
        return bs, diag

    def h(bs):
        return sum(_best_response(bs, t.gamma, t.rho, r, dt, c) for t in params.traders) - bs

    def h_prime(bs):
        total = -1.0
        for t in params.traders:
            u = _best_response(bs, t.gamma, t.rho, r, dt, c)
            total += _best_response_slope(bs, u, t.gamma, t.rho, r, dt, c)
        return total

    if bracket is None:
        lo, hi = 1e-12 * m, math.sqrt(k) * m + m
    else:
        lo, hi = bracket
    expansions = 0
    while h(hi) > 0:
        hi *= 2.0
        expansions += 1
        if expansions > _MAX_BRACKET_EXPANSIONS:
            raise NoRootInBracket("aggregate fixed point not bracketed above")
    while h(lo) < 0:
        lo *= 0.5
        expansions += 1
        if expansions > _MAX_BRACKET_EXPANSIONS:
            raise NoRootInBracket("aggregate fixed point not bracketed below")

    root, iterations, (blo, bhi) = _bisect(h, lo, hi, scale=m)
    root = _newton_polish(h, h_prime, root, blo, bhi)

    # Monotone-excess witness: sample a decade around the solution. A strictly
    # decreasing excess is what guarantees the fixed point is unique.
    samples = []
    s_lo = max(lo, root / 8.0)
    s_hi = min(hi, root * 8.0)
    for j in range(10):
        x = s_lo + (s_hi - s_lo) * j / 9.0
        samples.append((x, h(x)))
    for (x0, h0), (x1, h1) in zip(samples, samples[1:]):
        if not h0 > h1:
            which = "h_monotonicity"
            msg = f"excess not strictly decreasing between {x0!r} and {x1!r}"
            if for_tax:
                raise ContinuationFailed(msg)
            raise ConstraintViolated(which, msg)

    diag = SolveDiagnostics(
        iterations=iterations,
        bracket=(blo, bhi),
        residuals=(),
        aggregate_residual=abs(h(root)),
        h_samples=tuple(samples),
    )
    return root, diag


def solve_nash(params: ValidatedParams) -> tuple[Equilibrium, SolveDiagnostics]:
    """Untaxed k-trader equilibrium. Requires params.tax == 0."""
    if params.tax != 0.0:
        raise ValueError(f"solve_nash requires tax == 0, got {params.tax!r}; use solve_taxed")
    bs, diag = _solve_fixed_point(params, 0.0)
    return _assemble(bs, params, diag)


def solve_taxed(params: ValidatedParams) -> tuple[Equilibrium, SolveDiagnostics]:
    """Equilibrium under a proportional transaction tax c = params.tax.

    Continues in the tax rate from the untaxed solution over geometric steps,
    re-bracketing around the previous aggregate each time; a lost sign
    pattern raises ContinuationFailed instead of guessing a branch.
    """
    c_target = params.tax
    untaxed = params.with_tax(0.0)
    bs, diag = _solve_fixed_point(untaxed, 0.0)
    if c_target == 0.0:
        return _assemble(bs, untaxed, diag)
    if params.dt == 0.0:
        bs = _aggregate_closed_form(params, c_target)
        return _assemble(bs, params, SolveDiagnostics(0, (bs, bs), (), 0.0))

    steps = [c_target * 2.0 ** (j - (_CONTINUATION_STEPS - 1)) for j in range(_CONTINUATION_STEPS)]
    total_iter = diag.iterations
    last_diag = diag
    for c_j in steps:
        step_params = params.with_tax(c_j)
        lo, hi = bs / 4.0, bs * 4.0
        try:
            bs, last_diag = _solve_fixed_point(step_params, c_j, bracket=(lo, hi), for_tax=True)
        except NoRootInBracket as exc:
            raise ContinuationFailed(f"tax continuation lost its bracket at c={c_j!r}: {exc}") from exc
        total_iter += last_diag.iterations
    eq, final = _assemble(bs, params, last_diag)
    final = SolveDiagnostics(
        iterations=total_iter,
        bracket=final.bracket,
        residuals=final.residuals,
        aggregate_residual=final.aggregate_residual,
        rejected_roots=final.rejected_roots,
        h_samples=final.h_samples,
        continuation_steps=len(steps),
    )
    return eq, final


def solve_equilibrium(params: ValidatedParams) -> tuple[Equilibrium, SolveDiagnostics]:
    """Dispatch on the tax rate: taxed continuation when tax > 0, else the plain solve."""
    if params.tax > 0.0:
        return solve_taxed(params)
    return solve_nash(params)
