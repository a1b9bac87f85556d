import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass
class MetricSummary:
    mean: float
    stderr: float
    n: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n}


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    ci_low: float
    ci_high: float

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "ci": [self.ci_low, self.ci_high],
        }


def summarize(values) -> MetricSummary:
    """Monte Carlo mean and standard error (ddof=1) of per-path values, in order."""
    arr = np.asarray(values, dtype=float)
    n = int(arr.size)
    if n < 2:
        raise ValueError(f"need at least two samples, got {n}")
    mean = float(np.mean(arr))
    stderr = float(np.std(arr, ddof=1) / math.sqrt(n))
    return MetricSummary(mean=mean, stderr=stderr, n=n)


def summarize_matrix(values) -> tuple[np.ndarray, np.ndarray]:
    """Entrywise mean and standard error of a stack of matrices (n, d, d)."""
    arr = np.asarray(values, dtype=float)
    n = arr.shape[0]
    if n < 2:
        raise ValueError(f"need at least two samples, got {n}")
    return arr.mean(axis=0), arr.std(axis=0, ddof=1) / math.sqrt(n)


def fit_slope(x, y, confidence: float = 0.95) -> SlopeFit:
    """Least-squares slope of y on x with a Student-t confidence interval."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fit = stats.linregress(x, y)
    dof = len(x) - 2
    half = float(stats.t.ppf(0.5 + confidence / 2, dof) * fit.stderr) if dof > 0 else 0.0
    return SlopeFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        stderr=float(fit.stderr),
        ci_low=float(fit.slope) - half,
        ci_high=float(fit.slope) + half,
    )


def fitted_rate(epsilons, means) -> float | None:
    """Log-log slope of means against epsilon; None when it cannot be fitted."""
    eps = np.asarray(epsilons, dtype=float)
    vals = np.asarray(means, dtype=float)
    if len(eps) < 2 or np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        return None
    return fit_slope(np.log(eps), np.log(vals)).slope


def is_decreasing(means) -> bool:
    """Strictly decreasing along the (descending) epsilon ladder."""
    vals = list(means)
    return all(b < a for a, b in zip(vals, vals[1:]))
