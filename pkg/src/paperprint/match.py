"""Correlation scoring and equal-error-rate models.

Scores are Pearson correlations between flattened feature grids.  Because
well-separated score distributions leave no empirical overlap, the EER is
extrapolated from per-hypothesis summary statistics under a light-tailed
(Gaussian) and a heavy-tailed (Laplace) assumption; both are evaluated in
the log domain so extreme separations stay finite.  An empirical threshold
sweep serves as the small-scale oracle for the closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log, sqrt

import numpy as np
from scipy.special import log_ndtr

_LN10 = log(10.0)
_SQRT2 = sqrt(2.0)


def correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Sample Pearson correlation of two grids, flattened."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError("grids must share one shape")
    da = a - a.mean()
    db = b - b.mean()
    denom = np.linalg.norm(da) * np.linalg.norm(db)
    if denom == 0.0:
        raise ValueError("correlation undefined for constant input")
    return float(np.clip((da @ db) / denom, -1.0, 1.0))


@dataclass(frozen=True)
class MatchStats:
    """Per-hypothesis score statistics; index 0 is unmatched, 1 is matched."""

    mu_unmatched: float
    sigma_unmatched: float
    mu_matched: float
    sigma_matched: float
    n_unmatched: int
    n_matched: int

    def __post_init__(self):
        if self.sigma_unmatched <= 0 or self.sigma_matched <= 0:
            raise ValueError("score spreads must be positive")
        if self.n_unmatched < 2 or self.n_matched < 2:
            raise ValueError("need at least two scores per hypothesis")

    @property
    def laplace_rate_unmatched(self) -> float:
        return _SQRT2 / self.sigma_unmatched

    @property
    def laplace_rate_matched(self) -> float:
        return _SQRT2 / self.sigma_matched


def hypothesis_stats(matched_scores, unmatched_scores) -> MatchStats:
    """Maximum-likelihood mean and (1/n) standard deviation per hypothesis."""
    matched = np.asarray(matched_scores, dtype=np.float64)
    unmatched = np.asarray(unmatched_scores, dtype=np.float64)
    for name, arr in (("matched", matched), ("unmatched", unmatched)):
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError(f"{name} scores must be a list of at least 2 values")
        if np.std(arr) == 0.0:
            raise ValueError(f"{name} scores have zero variance")
    return MatchStats(
        mu_unmatched=float(unmatched.mean()),
        sigma_unmatched=float(unmatched.std()),
        mu_matched=float(matched.mean()),
        sigma_matched=float(matched.std()),
        n_unmatched=int(unmatched.size),
        n_matched=int(matched.size),
    )


def _check_ordering(stats: MatchStats) -> None:
    if stats.mu_unmatched > stats.mu_matched:
        raise ValueError(
            "unmatched mean exceeds matched mean; hypothesis labels look inverted"
        )


def log10_eer_gaussian(stats: MatchStats) -> float:
    """log10 equal error rate under Gaussian score tails.

    The EER of a thresholding rule between two Gaussians is the standard
    normal CDF of the signed separation -(mu1 - mu0)/(sigma0 + sigma1),
    evaluated through the log CDF for numerical range.
    """
    _check_ordering(stats)
    x = (stats.mu_unmatched - stats.mu_matched) / (
        stats.sigma_unmatched + stats.sigma_matched
    )
    return float(log_ndtr(x)) / _LN10


def eer_gaussian(stats: MatchStats) -> float:
    """Gaussian-tail EER as a probability (may underflow to 0 when extreme)."""
    return 10.0 ** log10_eer_gaussian(stats)


def log10_eer_laplace(stats: MatchStats) -> float:
    """log10 equal error rate under Laplace score tails.

    Equals log10( exp(-(mu1 - mu0) * r0 * r1 / (r0 + r1)) / 2 ) with the
    per-hypothesis Laplace rates r = sqrt(2)/sigma, which reduces to a
    signed separation scaled by sqrt(2)/(sigma0 + sigma1).
    """
    _check_ordering(stats)
    ln_eer = -log(2.0) + _SQRT2 * (stats.mu_unmatched - stats.mu_matched) / (
        stats.sigma_unmatched + stats.sigma_matched
    )
    return ln_eer / _LN10


def eer_laplace(stats: MatchStats) -> float:
    """Laplace-tail EER as a probability (may underflow to 0 when extreme)."""
    return 10.0 ** log10_eer_laplace(stats)


def empirical_eer(matched_scores, unmatched_scores) -> float:
    """Threshold-sweep EER with linear interpolation at the crossing."""
    matched = np.sort(np.asarray(matched_scores, dtype=np.float64))
    unmatched = np.sort(np.asarray(unmatched_scores, dtype=np.float64))
    if matched.size == 0 or unmatched.size == 0:
        raise ValueError("both score lists must be nonempty")

    pooled = np.unique(np.concatenate([matched, unmatched]))
    # Thresholds straddling every score, so FAR spans [0, 1] and FRR [0, 1].
    thresholds = np.concatenate([[pooled[0] - 1.0], pooled, [pooled[-1] + 1.0]])
    far = 1.0 - np.searchsorted(unmatched, thresholds, side="left") / unmatched.size
    frr = np.searchsorted(matched, thresholds, side="left") / matched.size

    diff = far - frr  # nonincreasing in the threshold
    idx = int(np.searchsorted(-diff, 0.0, side="right")) - 1
    idx = min(max(idx, 0), diff.size - 2)
    d0, d1 = diff[idx], diff[idx + 1]
    if d0 <= 0.0:
        return float((far[idx] + frr[idx]) / 2.0)
    if d0 == d1:
        w = 0.0
    else:
        w = d0 / (d0 - d1)
    return float(far[idx] + w * (far[idx + 1] - far[idx]))


@dataclass(frozen=True)
class EERReport:
    """Closed-form and (optional) empirical EERs for one feature choice."""

    feature_kind: str
    log10_gaussian: float
    log10_laplace: float
    eer_empirical: float | None = None
    subband_index: int | None = None

    def __post_init__(self):
        limit = np.log10(0.5) + 1e-12
        if self.log10_gaussian > limit or self.log10_laplace > limit:
            raise ValueError("EER cannot exceed 0.5")
        if self.eer_empirical is not None and not 0.0 <= self.eer_empirical <= 0.5:
            raise ValueError("empirical EER must lie in [0, 0.5]")

    @property
    def eer_gaussian(self) -> float:
        return 10.0**self.log10_gaussian

    @property
    def eer_laplace(self) -> float:
        return 10.0**self.log10_laplace


def eer_report(
    feature_kind: str,
    matched_scores,
    unmatched_scores,
    subband_index: int | None = None,
    include_empirical: bool = False,
) -> EERReport:
    """Bundle the closed-form EERs (and optionally the sweep) for a score set."""
    stats = hypothesis_stats(matched_scores, unmatched_scores)
    empirical = (
        empirical_eer(matched_scores, unmatched_scores) if include_empirical else None
    )
    return EERReport(
        feature_kind=feature_kind,
        log10_gaussian=log10_eer_gaussian(stats),
        log10_laplace=log10_eer_laplace(stats),
        eer_empirical=empirical,
        subband_index=subband_index,
    )
