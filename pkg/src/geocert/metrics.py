"""Result aggregation: certified-accuracy curves and improvement statistics."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .search import METHODS, CertificationReport

IMPROVEMENT_WINDOW = 0.075


def _eligible(rows: Sequence[CertificationReport]) -> list[CertificationReport]:
    return [r for r in rows if r.correct]


def certified_accuracy_curve(rows: Sequence[CertificationReport], R_grid, field: str = "r_best"):
    """Fraction of all rows that are correct with ``field`` radius strictly above each R."""
    if not rows:
        raise ValueError("no rows")
    radii = np.array([getattr(r, field) if r.correct else -np.inf for r in rows])
    grid = np.asarray(R_grid, dtype=float)
    frac = (radii[None, :] > grid[:, None]).mean(axis=1)
    return list(zip(grid.tolist(), frac.tolist()))


def percentage_improvements(rows: Sequence[CertificationReport]) -> tuple[np.ndarray, np.ndarray]:
    """(r_cohen, 100 * (r_best - r_cohen) / r_cohen) for correct, certified rows."""
    good = [r for r in _eligible(rows) if r.r_cohen > 0]
    base = np.array([r.r_cohen for r in good])
    gain = np.array([100.0 * (r.r_best - r.r_cohen) / r.r_cohen for r in good])
    return base, gain


def improvement_metrics(rows: Sequence[CertificationReport], window: float = IMPROVEMENT_WINDOW,
                        centres=None) -> dict:
    """Median percentage improvement binned by baseline radius, plus best-method shares.

    Each bin centre r collects the rows with r_cohen in [r - window, r + window].
    Shares are over correctly predicted, non-abstained rows; they are all zero
    when there are none.
    """
    if not rows:
        raise ValueError("no rows")
    base, gain = percentage_improvements(rows)
    if centres is None:
        top = float(base.max()) if base.size else 0.0
        centres = np.round(np.arange(0.0, top + window, window), 10)
    binned = []
    for c in np.asarray(centres, dtype=float):
        sel = (base >= c - window) & (base <= c + window)
        if sel.any():
            binned.append((float(c), float(np.median(gain[sel])), int(sel.sum())))
    eligible = _eligible(rows)
    shares = {m: 0.0 for m in METHODS}
    for r in eligible:
        shares[r.best_method] += 1.0
    if eligible:
        shares = {m: v / len(eligible) for m, v in shares.items()}
    return {
        "binned_median": binned,
        "median_improvement": float(np.median(gain)) if gain.size else 0.0,
        "mean_improvement": float(np.mean(gain)) if gain.size else 0.0,
        "method_shares": shares,
    }
