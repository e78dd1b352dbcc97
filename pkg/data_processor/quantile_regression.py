"""
Quantile regression by a primal-dual interior-point method.

The check-loss problem min_b sum rho_q(y - Xb) is solved through its bounded dual
linear program

    max  y'a   s.t.  X'a = (1 - q) X'1,  0 <= a <= 1

with Mehrotra predictor-corrector steps. The regression coefficients are the
multipliers of the equality constraints. The final iterate is polished to an exact
basic solution whenever that solution is at least as good.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
from scipy import stats

from .design_matrix import DesignMatrix
from .errors import ConvergenceError, InsufficientDataError, ParameterError, UnderdeterminedError
from .regression import FitKind, FitResult, check_finite, expand, independent_columns, split_aliased, t_ratios

logger = logging.getLogger(__name__)

GAP_TOLERANCE = 1e-8
MAX_ITERATIONS = 200
STEP_FRACTION = 0.99995
DEFAULT_BOOTSTRAP = 200


def _check_quantile(q: float) -> float:
    q = float(q)
    if not (0.0 < q < 1.0):
        raise ParameterError(f"Quantile must lie strictly inside (0, 1), got {q}")
    return q


def check_loss(q: float, residuals) -> float:
    """Asymmetric absolute loss: q * e for e >= 0, (1 - q) * (-e) otherwise."""
    q = _check_quantile(q)
    e = np.asarray(residuals, dtype=float)
    if not np.all(np.isfinite(e)):
        raise ParameterError("Residuals must be finite")
    return float(np.sum(np.where(e >= 0, q * e, (q - 1.0) * e)))


def empirical_quantile(y, q: float) -> float:
    """Lower end of the interval minimizing the intercept-only check loss (inverse-CDF quantile)."""
    q = _check_quantile(q)
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise InsufficientDataError("Cannot take the quantile of an empty sample")
    return float(np.quantile(y, q, method="inverted_cdf"))


def raw_deviation(y, q: float) -> float:
    """Check loss of the best intercept-only model at q."""
    return check_loss(q, np.asarray(y, dtype=float) - empirical_quantile(y, q))


def pseudo_r2(min_deviation: float, raw_deviation: float) -> float:
    """One minus the ratio of minimized to intercept-only check loss."""
    if min_deviation < 0 or raw_deviation < 0:
        raise ParameterError("Deviation sums must be non-negative")
    if raw_deviation == 0:
        raise ParameterError("Raw sum of deviations is zero; every response value is identical")
    return 1.0 - min_deviation / raw_deviation


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    shrinking = dv < 0
    if not np.any(shrinking):
        return math.inf
    return float(np.min(-v[shrinking] / dv[shrinking]))


class _NormalEquations:
    """Factorization of X' diag(1/D) X reused by the predictor and corrector steps."""

    def __init__(self, X: np.ndarray, D: np.ndarray):
        self.X = X
        self.D = D
        M = X.T @ (X / D[:, None])
        try:
            self.factor = scipy.linalg.cho_factor(M)
            self.M = None
        except np.linalg.LinAlgError:
            self.factor = None
            self.M = M

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.factor is not None:
            return scipy.linalg.cho_solve(self.factor, rhs)
        return np.linalg.lstsq(self.M, rhs, rcond=None)[0]


def _direction(system: _NormalEquations, r_p, r_u, r_d, a, s, z, w, c1, c2):
    rho = r_d - (c2 - w * r_u) / s + c1 / a
    d_beta = system.solve(system.X.T @ (rho / system.D) - r_p)
    d_a = (rho - system.X @ d_beta) / system.D
    d_s = r_u - d_a
    d_z = (c1 - z * d_a) / a
    d_w = (c2 - w * d_s) / s
    return d_beta, d_a, d_s, d_z, d_w


def solve_interior_point(X: np.ndarray, y: np.ndarray, q: float, tol: float = GAP_TOLERANCE,
                         max_iter: int = MAX_ITERATIONS) -> Tuple[np.ndarray, int]:
    """
    Minimize the check loss over full-column-rank X.

    Returns:
        (coefficients, iterations used)

    Raises:
        ConvergenceError: duality gap still above tolerance after max_iter iterations
    """
    n, _ = X.shape
    b = (1.0 - q) * X.sum(axis=0)
    a = np.full(n, 1.0 - q)
    s = np.full(n, q)
    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    r = y - X @ beta
    delta = 0.1 * max(float(np.mean(np.abs(r))), 1e-3 * max(1.0, float(np.mean(np.abs(y)))))
    w = np.maximum(r, 0.0) + delta
    z = np.maximum(-r, 0.0) + delta

    gap = float(a @ z + s @ w)
    for iteration in range(1, max_iter + 1):
        r_p = b - X.T @ a
        r_u = 1.0 - a - s
        r_d = y - X @ beta - w + z
        mu = gap / (2 * n)

        system = _NormalEquations(X, w / s + z / a)
        d_beta, d_a, d_s, d_z, d_w = _direction(system, r_p, r_u, r_d, a, s, z, w, -a * z, -s * w)
        alpha_p = min(1.0, STEP_FRACTION * min(_max_step(a, d_a), _max_step(s, d_s)))
        alpha_d = min(1.0, STEP_FRACTION * min(_max_step(z, d_z), _max_step(w, d_w)))
        mu_affine = float((a + alpha_p * d_a) @ (z + alpha_d * d_z)
                          + (s + alpha_p * d_s) @ (w + alpha_d * d_w)) / (2 * n)
        sigma = min(1.0, (mu_affine / mu) ** 3)

        c1 = sigma * mu - a * z - d_a * d_z
        c2 = sigma * mu - s * w - d_s * d_w
        d_beta, d_a, d_s, d_z, d_w = _direction(system, r_p, r_u, r_d, a, s, z, w, c1, c2)
        alpha_p = min(1.0, STEP_FRACTION * min(_max_step(a, d_a), _max_step(s, d_s)))
        alpha_d = min(1.0, STEP_FRACTION * min(_max_step(z, d_z), _max_step(w, d_w)))

        a = a + alpha_p * d_a
        s = s + alpha_p * d_s
        beta = beta + alpha_d * d_beta
        z = z + alpha_d * d_z
        w = w + alpha_d * d_w

        gap = float(a @ z + s @ w)
        objective = check_loss(q, y - X @ beta)
        if gap < tol * (1.0 + abs(objective)):
            return beta, iteration

    raise ConvergenceError(f"Interior-point solver did not converge at q={q} after {max_iter} "
                           f"iterations (duality gap {gap:.3g})", gap, q)


def _basic_rows(X: np.ndarray, order: np.ndarray) -> Optional[np.ndarray]:
    """First rows of `order` forming a nonsingular square subsystem, or None."""
    n, k = X.shape
    basis = np.zeros((k, k))
    chosen = []
    for i in order:
        v = X[i]
        norm = np.linalg.norm(v)
        if norm == 0:
            continue
        residual = v - basis[:len(chosen)].T @ (basis[:len(chosen)] @ v)
        length = np.linalg.norm(residual)
        if length > 1e-8 * norm:
            basis[len(chosen)] = residual / length
            chosen.append(i)
            if len(chosen) == k:
                return np.asarray(chosen)
    return None


def polish_to_vertex(X: np.ndarray, y: np.ndarray, q: float, beta: np.ndarray) -> np.ndarray:
    """Interpolate the rows closest to the fit when that does not increase the check loss."""
    residuals = y - X @ beta
    rows = _basic_rows(X, np.argsort(np.abs(residuals), kind="stable"))
    if rows is None:
        return beta
    try:
        vertex = np.linalg.solve(X[rows], y[rows])
    except np.linalg.LinAlgError:
        return beta
    current = check_loss(q, residuals)
    if check_loss(q, y - X @ vertex) <= current + 1e-10 * (1.0 + current):
        return vertex
    return beta


def solve_quantile(X: np.ndarray, y: np.ndarray, q: float, tol: float = GAP_TOLERANCE,
                   max_iter: int = MAX_ITERATIONS) -> Tuple[np.ndarray, int]:
    beta, iterations = solve_interior_point(X, y, q, tol, max_iter)
    return polish_to_vertex(X, y, q, beta), iterations


def _resample_rng(seed: int, replicate: int, attempt: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, replicate, attempt])))


def bootstrap_se(design: DesignMatrix, q: float, B: int = DEFAULT_BOOTSTRAP, seed: int = 0,
                 threads: int = 1, tol: float = GAP_TOLERANCE,
                 max_iter: int = MAX_ITERATIONS) -> np.ndarray:
    """
    Pairs-bootstrap standard errors of the quantile coefficients.

    Replicate b draws its rows from a PCG64 stream keyed by (seed, b, attempt), so
    the result does not depend on how replicates are scheduled across threads.
    Resamples that lose a column to aliasing are redrawn.

    Args:
        design: design matrix (aliased columns are dropped and reported as NaN)
        q: quantile in (0, 1)
        B: number of resamples (>= 1)
        seed: non-negative integer seed
        threads: worker threads for the refits

    Returns:
        Standard error per design column (0 for every column when B = 1)

    Raises:
        ParameterError: B < 1 or a negative seed
        UnderdeterminedError: more than 10 * B redraws were needed
    """
    q = _check_quantile(q)
    if B < 1:
        raise ParameterError(f"Bootstrap needs at least one resample, got B={B}")
    if seed < 0:
        raise ParameterError(f"Bootstrap seed must be non-negative, got {seed}")
    check_finite(design)
    keep = independent_columns(design.X)
    X = design.X[:, keep]
    y = design.y
    n, k = X.shape
    if n <= k:
        raise UnderdeterminedError(f"Quantile fit needs more rows than columns: n={n}, p={k}")
    redraw_cap = 10 * B

    def replicate(b: int) -> Tuple[Optional[np.ndarray], int]:
        for attempt in range(redraw_cap + 1):
            rows = _resample_rng(seed, b, attempt).integers(0, n, size=n)
            Xb = X[rows]
            if independent_columns(Xb).size == k:
                return solve_quantile(Xb, y[rows], q, tol, max_iter)[0], attempt
        return None, redraw_cap + 1

    if threads > 1 and B > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(replicate, range(B)))
    else:
        outcomes = [replicate(b) for b in range(B)]

    redraws = sum(attempts for _, attempts in outcomes)
    if redraws > redraw_cap or any(beta is None for beta, _ in outcomes):
        raise UnderdeterminedError(f"Bootstrap at q={q} needed {redraws} redraws (limit {redraw_cap})")
    if redraws:
        logger.warning(f"Bootstrap at q={q} redrew {redraws} rank-deficient resamples")

    draws = np.vstack([beta for beta, _ in outcomes])
    se = draws.std(axis=0, ddof=1) if B > 1 else np.zeros(k)
    return expand(se, keep, design.p)


def fit_quantile(design: DesignMatrix, q: float, n_boot: int = DEFAULT_BOOTSTRAP, seed: int = 0,
                 threads: int = 1, tol: float = GAP_TOLERANCE,
                 max_iter: int = MAX_ITERATIONS) -> FitResult:
    """
    Fit the conditional q-quantile of the response.

    Args:
        design: design matrix with intercept
        q: quantile in (0, 1)
        n_boot: bootstrap resamples for the standard errors; 0 skips inference
        seed: bootstrap seed
        threads: worker threads for the bootstrap

    Returns:
        FitResult with check loss as objective and pseudo-R² as fit measure

    Raises:
        UnderdeterminedError: no more rows than independent columns
        ConvergenceError: the solver hit its iteration cap
    """
    q = _check_quantile(q)
    check_finite(design)
    keep, aliased = split_aliased(design)
    X = design.X[:, keep]
    y = design.y
    n, k = X.shape
    if n <= k:
        raise UnderdeterminedError(f"Quantile fit needs more rows than columns: n={n}, p={k}")

    beta, iterations = solve_quantile(X, y, q, tol, max_iter)
    objective = check_loss(q, y - X @ beta)
    raw = raw_deviation(y, q)
    if raw == 0:
        logger.warning(f"Response is constant; reporting pseudo-R² = 0 at q={q}")
        fit_measure = 0.0
    else:
        fit_measure = min(1.0, max(0.0, pseudo_r2(objective, raw)))
    logger.info(f"Quantile fit q={q}: {iterations} iterations, check loss {objective:.6g}")

    p = design.p
    coefficients = expand(beta, keep, p)
    if n_boot > 0:
        std_errors = bootstrap_se(design, q, n_boot, seed, threads, tol, max_iter)
    else:
        std_errors = np.full(p, np.nan)
    t_values = t_ratios(coefficients, std_errors)
    p_values = 2.0 * stats.norm.sf(np.abs(t_values))
    return FitResult(
        kind=FitKind.QUANTILE,
        column_names=design.column_names,
        coefficients=coefficients,
        std_errors=std_errors,
        t_values=t_values,
        p_values=p_values,
        objective=objective,
        fit_measure=fit_measure,
        n_obs=n,
        df_resid=n - k,
        q=q,
        raw_deviation=raw,
        aliased=aliased,
        iterations=iterations,
    )
