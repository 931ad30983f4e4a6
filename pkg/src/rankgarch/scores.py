"""Score functions on (0,1) and rank computation for residual vectors."""

from __future__ import annotations

from enum import Enum

import numpy as np
from scipy.special import ndtri

from .errors import DomainError, NonFiniteInput


class Score(Enum):
    """The three supported rank scores."""

    SIGN = "sign"
    WILCOXON = "wilcoxon"
    VDW = "vdw"

    @classmethod
    def from_name(cls, name: str) -> "Score":
        try:
            return cls(name.lower())
        except ValueError:
            raise DomainError(f"unknown score {name!r}; choose from sign, wilcoxon, vdw") from None


def score_eval(score: Score, u):
    """Evaluate a score function at u in (0,1); scalar or vectorized.

    Sign is -1/0/+1 around u = 1/2, Wilcoxon is u - 1/2, and the normal
    (van der Waerden) score is the standard normal quantile of u.  The normal
    quantile comes from scipy's ndtri, whose absolute error is below 1e-14
    on the arguments r/(n+1) used here, far inside the 1e-9 contract.
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
        raise DomainError("score argument must lie strictly inside (0, 1)")
    if score is Score.SIGN:
        out = np.sign(u_arr - 0.5)
    elif score is Score.WILCOXON:
        out = u_arr - 0.5
    else:
        out = ndtri(u_arr)
    return float(out) if np.isscalar(u) else out


def compute_ranks(values) -> np.ndarray:
    """Ranks 1..n of a residual vector, ties broken by original position."""
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size < 1 or not np.all(np.isfinite(arr)):
        raise NonFiniteInput("ranks need a nonempty, finite vector")
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.size, dtype=np.int64)
    ranks[order] = np.arange(1, arr.size + 1)
    return ranks
