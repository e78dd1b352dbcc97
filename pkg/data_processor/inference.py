import logging
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .design_matrix import DesignMatrix, validate_quantiles
from .errors import ParameterError, VolatilityToolError
from .quantile_regression import DEFAULT_BOOTSTRAP, bootstrap_se, fit_quantile
from .regression import FitResult, fit_ols

logger = logging.getLogger(__name__)

__all__ = ["ProfilePoint", "QuantileProfile", "bootstrap_se", "quantile_profile"]

Z_95 = 1.96


@dataclass(frozen=True)
class ProfilePoint:
    variable: str
    q: float
    coef: float
    lo: float
    hi: float
    ols_ref: float


@dataclass(eq=False)
class QuantileProfile:
    """Coefficient trajectories across a quantile grid with bootstrap bounds and the OLS reference."""
    quantiles: Tuple[float, ...]
    column_names: Tuple[str, ...]
    coefficients: np.ndarray  # (len(quantiles), p)
    lower: np.ndarray
    upper: np.ndarray
    ols_reference: np.ndarray
    fits: List[FitResult] = field(default_factory=list)
    ols_fit: Optional[FitResult] = None

    def points(self) -> Iterator[ProfilePoint]:
        """One point per (column, quantile); aliased columns have none."""
        for j, name in enumerate(self.column_names):
            for i, q in enumerate(self.quantiles):
                if np.isnan(self.coefficients[i, j]):
                    continue
                yield ProfilePoint(name, q, float(self.coefficients[i, j]), float(self.lower[i, j]),
                                   float(self.upper[i, j]), float(self.ols_reference[j]))

    def trajectory(self, name: str) -> np.ndarray:
        return self.coefficients[:, self.column_names.index(name)]


def quantile_profile(design: DesignMatrix, quantiles: Sequence[float], B: int = DEFAULT_BOOTSTRAP,
                     seed: int = 0, threads: int = 1) -> QuantileProfile:
    """
    Fit every quantile of the grid plus an OLS reference.

    Bounds are coefficient +/- 1.96 bootstrap standard errors. Every quantile uses
    the same bootstrap seed.

    Raises:
        ParameterError: B < 1, since the bounds need at least one resample
        VolatilityToolError: the failing fit's error, with its `quantile` attribute set
    """
    if B < 1:
        raise ParameterError(f"B must be at least 1 for profile bounds, got {B}")
    grid = validate_quantiles(quantiles)
    ols_fit = fit_ols(design)
    fits = []
    for q in grid:
        try:
            fits.append(fit_quantile(design, q, n_boot=B, seed=seed, threads=threads))
        except VolatilityToolError as e:
            e.quantile = q
            logger.error(f"Quantile fit failed at q={q}: {e}")
            raise
        logger.info(f"Profile point q={q} done ({len(fits)}/{len(grid)})")

    coefficients = np.vstack([fit.coefficients for fit in fits])
    half_width = Z_95 * np.vstack([fit.std_errors for fit in fits])
    return QuantileProfile(
        quantiles=grid,
        column_names=design.column_names,
        coefficients=coefficients,
        lower=coefficients - half_width,
        upper=coefficients + half_width,
        ols_reference=ols_fit.coefficients,
        fits=fits,
        ols_fit=ols_fit,
    )
