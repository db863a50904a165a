"""Distribution primitives and the dual multiplier solver.

The chi-square and normal distribution functions are self-contained
(regularized incomplete gamma via a power series and a Lentz continued
fraction, error function from the standard library) so that p-values never
depend on the presence or version of an external statistics stack.

``solve_lagrange`` computes the multiplier vector behind profiled empirical
likelihood weights.  It maximizes the concave dual objective

    Q(lam) = sum_i log(1 + lam'g_i)

by damped Newton with backtracking.  The logarithm is replaced below 1/n by
its second-order Taylor extension, which keeps Q concave and finite for every
candidate step while agreeing with the exact objective on the region where
valid weight vectors live.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import NoConvergenceError

_GAMMA_TOL = 1e-14
_GAMMA_MAX_TERMS = 10_000
_ARMIJO = 1e-4


def _lower_gamma_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by series, for x < a + 1."""
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(_GAMMA_MAX_TERMS):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _GAMMA_TOL:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_gamma_cf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by Lentz continued fraction."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0.0 else 1.0 / tiny
    h = d
    for i in range(1, _GAMMA_MAX_TERMS + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_TOL:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi2_cdf(x: float, df: int) -> float:
    """Chi-square cumulative distribution function with ``df`` degrees of freedom."""
    if df < 1 or df != int(df):
        raise ValueError(f"df must be a positive integer, got {df!r}")
    if math.isnan(x):
        raise ValueError("x must not be NaN")
    if x <= 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    a = df / 2.0
    half = x / 2.0
    if half < a + 1.0:
        return min(_lower_gamma_series(a, half), 1.0)
    return max(1.0 - _upper_gamma_cf(a, half), 0.0)


def chi2_quantile(p: float, df: int) -> float:
    """Inverse of ``chi2_cdf`` in its first argument.

    Bisection with a doubling upper bracket; 200 halvings take the bracket
    far below double-precision spacing, so the result is exact to roundoff.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly between 0 and 1, got {p!r}")
    hi = max(float(2 * df), 1.0)
    for _ in range(400):
        if chi2_cdf(hi, df) >= p:
            break
        hi *= 2.0
    else:  # pragma: no cover
        raise NoConvergenceError("chi2_quantile failed to bracket the target")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def half_mixture_sf(t: float) -> float:
    """Survival function of the half-half mixture of a point mass at 0 and chi-square(1).

    Reference distribution of one-sided and interval statistics: returns 1 at
    t = 0 (the statistic vanishes with limiting probability one half) and
    (1 - F_1(t)) / 2 for t > 0.
    """
    if math.isnan(t) or t < 0.0:
        raise ValueError(f"t must be nonnegative, got {t!r}")
    if t == 0.0:
        return 1.0
    return 0.5 * (1.0 - chi2_cdf(t, 1))


def normal_cdf(z: float) -> float:
    """Standard normal cumulative distribution function."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


@dataclass(frozen=True)
class DistributionRef:
    """Reference distribution attached to a test statistic.

    kind is one of ``chi_square`` (with ``df``), ``half_mixture_chi2_1`` or
    ``standard_normal``.
    """

    kind: str
    df: int | None = None

    _KINDS = ("chi_square", "half_mixture_chi2_1", "standard_normal")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "chi_square":
            if self.df is None or self.df < 1:
                raise ValueError("chi_square reference needs df >= 1")
        elif self.df is not None:
            raise ValueError(f"{self.kind} takes no df")

    def sf(self, t: float) -> float:
        """Upper tail probability at ``t``."""
        if self.kind == "chi_square":
            if math.isinf(t):
                return 0.0
            return 1.0 - chi2_cdf(t, self.df)
        if self.kind == "half_mixture_chi2_1":
            if math.isinf(t):
                return 0.0
            return half_mixture_sf(t)
        return 1.0 - normal_cdf(t)


@dataclass(frozen=True)
class MultiplierSolution:
    """Outcome of the dual multiplier solve.

    ``feasible`` is False when the zero vector is not interior to the convex
    hull of the estimating-function rows, in which case the log ratio that
    consumes this solution is +inf.  Infeasibility is an ordinary outcome,
    not an exception.
    """

    lam: np.ndarray
    residual_norm: float
    iterations: int
    feasible: bool


def _dual_terms(z: np.ndarray, n: int):
    """Value, slope and curvature of the extended log at each entry of z."""
    thresh = 1.0 / n
    below = z < thresh
    val = np.empty_like(z)
    d1 = np.empty_like(z)
    d2 = np.empty_like(z)
    if below.any():
        zb = z[below]
        nz = n * zb
        val[below] = math.log(thresh) - 1.5 + 2.0 * nz - 0.5 * nz * nz
        d1[below] = n * (2.0 - nz)
        d2[below] = -float(n) * float(n)
        ok = ~below
        zk = z[ok]
        val[ok] = np.log(zk)
        d1[ok] = 1.0 / zk
        d2[ok] = -d1[ok] * d1[ok]
    else:
        np.log(z, out=val)
        np.divide(1.0, z, out=d1)
        np.multiply(d1, -d1, out=d2)
    return val, d1, d2


def _dual_value(z: np.ndarray, n: int) -> float:
    thresh = 1.0 / n
    below = z < thresh
    if not below.any():
        return float(np.log(z).sum())
    zb = z[below]
    nz = n * zb
    head = (math.log(thresh) - 1.5) * zb.size + float((2.0 * nz - 0.5 * nz * nz).sum())
    return head + float(np.log(z[~below]).sum())


def solve_lagrange(g: np.ndarray, tol: float = 1e-10, max_iter: int = 200) -> MultiplierSolution:
    """Solve (1/n) sum_i g_i / (1 + lam'g_i) = 0 for the multiplier ``lam``.

    ``g`` is the n-by-m estimating matrix.  Columns that are identically zero
    impose no constraint and get multiplier 0.  A column whose entries do not
    change sign puts zero outside the interior of the hull, so the solution is
    reported infeasible immediately; for m = 1 this check is exact.

    Raises NoConvergenceError only when the Newton iteration stalls without
    either meeting the residual tolerance or demonstrating infeasibility.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 2:
        raise ValueError("g must be a 2-d array")
    n, m = g.shape
    if n < 1 or m < 1:
        raise ValueError("g must have at least one row and one column")
    if not np.isfinite(g).all():
        raise ValueError("g must be finite")

    lam_full = np.zeros(m)
    active = np.flatnonzero(np.any(g != 0.0, axis=0))
    if active.size == 0:
        return MultiplierSolution(lam=lam_full, residual_norm=0.0, iterations=0, feasible=True)
    ga = np.ascontiguousarray(g[:, active])

    mins = ga.min(axis=0)
    maxs = ga.max(axis=0)
    if (mins >= 0.0).any() or (maxs <= 0.0).any():
        resid = float(np.linalg.norm(ga.mean(axis=0)))
        return MultiplierSolution(lam=lam_full, residual_norm=resid, iterations=0, feasible=False)

    lam = np.zeros(active.size)
    z = np.ones(n)
    _, d1, d2 = _dual_terms(z, n)
    obj = 0.0
    iterations = 0
    converged = False
    stalled = False
    # Polishing floor: once the residual meets ``tol`` the solve counts as
    # converged, but extra full Newton steps are nearly free (quadratic
    # convergence) and pin the multiplier itself to close to machine
    # precision rather than leaving it tol/|curvature| away from the root.
    polish = max(tol * 1e-5, 1e-16)
    for _ in range(max_iter):
        grad = ga.T @ d1
        gnorm = float(np.linalg.norm(grad)) / n
        if gnorm <= tol:
            converged = True
            if gnorm <= polish:
                break
        hess = (ga * d2[:, None]).T @ ga
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
        slope = float(grad @ step)
        if slope <= 0.0:
            step = grad / n
            slope = float(grad @ step)
        size = 1.0
        # the absolute slack keeps the test passable once improvements fall
        # below float resolution of the objective, so the final Newton steps
        # are not rejected for flatness
        flat = 1e-14 * (1.0 + abs(obj))
        for _ in range(60):
            cand = lam + size * step
            zc = 1.0 + ga @ cand
            vc = _dual_value(zc, n)
            if vc >= obj + _ARMIJO * size * slope - flat:
                break
            size *= 0.5
        else:
            stalled = True
            break
        iterations += 1
        lam = cand
        z = zc
        obj = vc
        _, d1, d2 = _dual_terms(z, n)
    else:
        stalled = True

    grad = ga.T @ d1
    if not converged:
        converged = float(np.linalg.norm(grad)) / n <= tol

    if z.min() > 0.0:
        residual = float(np.linalg.norm(ga.T @ (1.0 / z))) / n
    else:
        residual = float(np.linalg.norm(grad)) / n

    lam_full[active] = lam
    if converged:
        # A genuine solution has every weight in (0, 1], i.e. every z >= 1/n,
        # and the weights sum to one.  A vanishing gradient at huge lam with
        # missing weight mass means the iterates escaped toward a hull face;
        # any escape leaves a mass deficit of order 1/n or more, while near-
        # boundary solutions only miss by ~|lam|*residual.  With one active
        # column the sign precheck above already decided feasibility exactly.
        domain_ok = z.min() >= 1.0 / n - 1e-9
        if active.size == 1:
            feasible = bool(z.min() > 0.0)
        else:
            deficit = abs(float((1.0 / (n * z)).sum()) - 1.0)
            mass_ok = domain_ok and deficit <= max(1e-8, 0.1 / n)
            feasible = bool(domain_ok and mass_ok and residual <= 10.0 * tol)
        return MultiplierSolution(
            lam=lam_full,
            residual_norm=residual,
            iterations=iterations,
            feasible=feasible,
        )

    if stalled and float(np.linalg.norm(lam)) > 1e8:
        return MultiplierSolution(
            lam=lam_full, residual_norm=residual, iterations=iterations, feasible=False
        )
    raise NoConvergenceError(
        f"multiplier solve stalled after {iterations} iterations, residual {residual:.3e}"
    )
