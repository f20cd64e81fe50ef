"""Search-utility metrics: temporal coverage of ground-truth timestamps,
single-scale SSIM, and similarity-weighted set precision/recall with a
pluggable frame-similarity function.
"""

from __future__ import annotations

from typing import Callable, Collection, Sequence, TypeVar

import numpy as np
from scipy.signal import convolve2d

from .errors import InputError

__all__ = [
    "EmptyGroundTruth",
    "EmptySet",
    "DimensionMismatch",
    "TooSmall",
    "temporal_coverage",
    "ssim",
    "set_precision",
    "set_recall",
    "label_jaccard_similarity",
    "metrics_report",
]

T = TypeVar("T")

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
_LUMA = np.array([0.299, 0.587, 0.114])


class EmptyGroundTruth(InputError):
    pass


class EmptySet(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class TooSmall(InputError):
    pass


def temporal_coverage(
    predicted: Sequence[float], truth: Sequence[float], delta: float
) -> float:
    """Fraction of ground-truth timestamps having a prediction within delta
    (inclusive). Monotone in delta and in the prediction set."""
    if len(truth) == 0:
        raise EmptyGroundTruth("temporal coverage needs at least one gt timestamp")
    if delta < 0:
        raise InputError(f"delta must be >= 0, got {delta}")
    if len(predicted) == 0:
        return 0.0
    gt = np.asarray(truth, dtype=np.float64)
    pt = np.asarray(predicted, dtype=np.float64)
    nearest = np.abs(gt[:, None] - pt[None, :]).min(axis=1)
    return float(np.mean(nearest <= delta))


def _as_gray(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr.astype(np.float64) @ _LUMA
    if arr.ndim == 2:
        return arr.astype(np.float64)
    raise DimensionMismatch(f"expected HxW or HxWx3 image, got shape {arr.shape}")


def _default_data_range(img: np.ndarray) -> float:
    if img.dtype == np.uint8:
        return 255.0
    if img.dtype == np.uint16:
        return 65535.0
    return 1.0


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(a: np.ndarray, b: np.ndarray, data_range: float | None = None) -> float:
    """Mean structural similarity over valid 11x11 Gaussian windows
    (sigma 1.5, stabilizers K1=0.01, K2=0.03). RGB inputs are reduced to
    luma first; the dynamic range defaults from the integer bit depth
    (1.0 for float images)."""
    arr_a, arr_b = np.asarray(a), np.asarray(b)
    if arr_a.shape != arr_b.shape:
        raise DimensionMismatch(f"image shapes differ: {arr_a.shape} vs {arr_b.shape}")
    if data_range is None:
        data_range = _default_data_range(arr_a)
    x = _as_gray(arr_a)
    y = _as_gray(arr_b)
    if min(x.shape) < SSIM_WINDOW:
        raise TooSmall(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}")

    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    mu_x = convolve2d(x, win, mode="valid")
    mu_y = convolve2d(y, win, mode="valid")
    sigma_x = convolve2d(x * x, win, mode="valid") - mu_x * mu_x
    sigma_y = convolve2d(y * y, win, mode="valid") - mu_y * mu_y
    sigma_xy = convolve2d(x * y, win, mode="valid") - mu_x * mu_y

    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * sigma_xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sigma_x + sigma_y + c2)
    return float(np.mean(num / den))


def set_precision(
    predicted: Sequence[T], truth: Sequence[T], phi: Callable[[T, T], float]
) -> float:
    """Mean over predictions of the best similarity to any gt frame."""
    if len(predicted) == 0 or len(truth) == 0:
        raise EmptySet("set precision needs non-empty prediction and gt sets")
    return float(
        np.mean([max(phi(p, g) for g in truth) for p in predicted])
    )


def set_recall(
    predicted: Sequence[T], truth: Sequence[T], phi: Callable[[T, T], float]
) -> float:
    """Mean over gt frames of the best similarity to any prediction."""
    if len(predicted) == 0 or len(truth) == 0:
        raise EmptySet("set recall needs non-empty prediction and gt sets")
    return float(
        np.mean([max(phi(g, p) for p in predicted) for g in truth])
    )


def label_jaccard_similarity(a: Collection, b: Collection) -> float:
    """Jaccard overlap of two frames' object-label sets; two empty frames
    count as identical. An image-free similarity for synthetic runs."""
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / len(sa | sb)


def metrics_report(
    *,
    tc: float,
    delta: float,
    precision: float,
    recall: float,
    phi_name: str,
    n_pred: int,
    n_gt: int,
) -> dict:
    """Evaluation report in the stable JSON layout consumers rely on."""
    return {
        "temporal_coverage": tc,
        "delta_seconds": delta,
        "precision": precision,
        "recall": recall,
        "phi": phi_name,
        "n_pred": n_pred,
        "n_gt": n_gt,
    }
