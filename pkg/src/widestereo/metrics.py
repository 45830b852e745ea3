"""Evaluation metrics and dataset statistics.

All comparisons are restricted to the intersection of the prediction and
ground-truth validity masks and are permutation-invariant over pixels.
Every kernel is a plain single-pass numpy reduction over a fixed-order
flattened array, so repeated runs are bit-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Sequence

import numpy as np

from .errors import DataError
from .spherical_stereo import DepthMap, DisparityMap

__all__ = [
    "MetricValue",
    "EvalReport",
    "disparity_metrics",
    "depth_metrics",
    "rel_epe",
    "EntropyStats",
    "local_entropy_stats",
    "depth_histogram",
    "DELTA_THRESHOLDS",
]

DELTA_THRESHOLDS = (1.25, 1.25 ** 2, 1.25 ** 3)
REL_EPE_FLOOR_PX = 0.5


@dataclass(frozen=True)
class MetricValue:
    value: float
    unit: str
    valid_pixel_count: int

    def __post_init__(self):
        if self.valid_pixel_count <= 0:
            raise DataError("a metric must be computed over at least one pixel")


@dataclass
class EvalReport:
    """Named metric values plus the comparison domain they describe."""

    metrics: Dict[str, MetricValue]
    domain: Dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.metrics[name].value

    def to_dict(self) -> dict:
        return {
            "domain": dict(self.domain),
            "metrics": {
                name: {"value": m.value, "unit": m.unit,
                       "valid_pixel_count": m.valid_pixel_count}
                for name, m in self.metrics.items()
            },
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EvalReport":
        try:
            metrics = {
                name: MetricValue(float(m["value"]), str(m["unit"]),
                                  int(m["valid_pixel_count"]))
                for name, m in d["metrics"].items()
            }
        except KeyError as exc:
            raise DataError(f"evaluation report missing field {exc}") from exc
        return cls(metrics=metrics, domain=dict(d.get("domain", {})))

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))


def _joint_errors(pred, gt) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if pred.values.shape != gt.values.shape:
        raise DataError("prediction and ground truth shapes differ")
    mask = pred.valid & gt.valid
    if not mask.any():
        raise DataError("prediction and ground truth share no valid pixels")
    return pred.values[mask], gt.values[mask], mask


def disparity_metrics(pred: DisparityMap, gt: DisparityMap,
                      taus: Sequence[float] = (1.0, 2.0, 3.0),
                      domain: Optional[Mapping[str, Any]] = None) -> EvalReport:
    """EPE, error quantiles, bad-tau rates, and RelEPE for disparity maps.

    EPE is the mean absolute error in pixels; Q50/Q95 are percentiles with
    linear interpolation between order statistics; bad-tau is the percentage
    of pixels whose error exceeds tau pixels.
    """
    p, g, mask = _joint_errors(pred, gt)
    err = np.abs(p - g)
    count = int(mask.sum())
    q50, q95 = np.percentile(err, [50.0, 95.0])
    metrics = {
        "EPE": MetricValue(float(err.mean()), "px", count),
        "Q50_EPE": MetricValue(float(q50), "px", count),
        "Q95_EPE": MetricValue(float(q95), "px", count),
    }
    for tau in taus:
        metrics[f"bad-{tau:g}"] = MetricValue(
            float(100.0 * np.mean(err > tau)), "%", count)
    metrics["RelEPE"] = MetricValue(
        float(np.mean(err / np.maximum(g, REL_EPE_FLOOR_PX))), "", count)
    return EvalReport(metrics, dict(domain or {}))


def depth_metrics(pred: DepthMap, gt: DepthMap,
                  domain: Optional[Mapping[str, Any]] = None) -> EvalReport:
    """AbsRel, MAE, RMSE, and the delta_t accuracies (strict inequality)."""
    p, g, mask = _joint_errors(pred, gt)
    err = np.abs(p - g)
    count = int(mask.sum())
    ratio = np.maximum(p / g, g / p)
    metrics = {
        "AbsRel": MetricValue(float(np.mean(err / g)), "", count),
        "MAE": MetricValue(float(err.mean()), "m", count),
        "RMSE": MetricValue(float(np.sqrt(np.mean((p - g) ** 2))), "m", count),
    }
    for i, t in enumerate(DELTA_THRESHOLDS, start=1):
        metrics[f"delta_1.25^{i}" if i > 1 else "delta_1.25"] = MetricValue(
            float(100.0 * np.mean(ratio < t)), "%", count)
    return EvalReport(metrics, dict(domain or {}))


def rel_epe(pred: DisparityMap, gt: DisparityMap,
            floor_px: float = REL_EPE_FLOOR_PX) -> float:
    """Mean |pred - gt| / max(gt, floor_px) over the joint valid mask.

    The floor keeps near-zero ground-truth disparities (near-infinite range)
    from dominating the average.
    """
    p, g, _ = _joint_errors(pred, gt)
    return float(np.mean(np.abs(p - g) / np.maximum(g, floor_px)))


@dataclass
class EntropyStats:
    entropy: np.ndarray
    mean: float


def _to_gray_u8(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim == 3:
        if image.dtype != np.uint8:
            raise DataError("color images must be uint8 for entropy statistics")
        lum = (0.299 * image[..., 0] + 0.587 * image[..., 1]
               + 0.114 * image[..., 2])
        return np.rint(lum).astype(np.uint8)
    if image.dtype == np.uint8:
        return image
    if np.issubdtype(image.dtype, np.floating):
        if image.min() < 0.0 or image.max() > 1.0:
            raise DataError("float grayscale must lie in [0, 1] for entropy")
        return np.rint(image * 255.0).astype(np.uint8)
    raise DataError(f"unsupported image dtype {image.dtype} for entropy")


def local_entropy_stats(image: np.ndarray, window: int = 11) -> EntropyStats:
    """Shannon entropy (bits) of the grayscale histogram in a window per pixel.

    Windows are clipped at the image border (entropy there uses the smaller
    overlap). The per-bin counts come from 2D prefix sums, accumulated in
    ascending bin order, so the result matches a naive per-pixel histogram
    loop exactly.
    """
    if window < 1 or window % 2 == 0:
        raise DataError("entropy window must be a positive odd size")
    gray = _to_gray_u8(image)
    H, W = gray.shape
    r = window // 2

    def window_sums(binary: np.ndarray) -> np.ndarray:
        s = np.zeros((H + 1, W + 1), dtype=np.int64)
        np.cumsum(np.cumsum(binary, axis=0), axis=1, out=s[1:, 1:])
        top = np.clip(np.arange(H) - r, 0, H)
        bot = np.clip(np.arange(H) + r + 1, 0, H)
        left = np.clip(np.arange(W) - r, 0, W)
        right = np.clip(np.arange(W) + r + 1, 0, W)
        return (s[bot[:, None], right[None, :]] - s[top[:, None], right[None, :]]
                - s[bot[:, None], left[None, :]] + s[top[:, None], left[None, :]])

    totals = window_sums(np.ones((H, W), dtype=np.int64)).astype(np.float64)
    entropy = np.zeros((H, W), dtype=np.float64)
    for value in np.unique(gray):
        counts = window_sums((gray == value).astype(np.int64))
        p = counts / totals
        nz = counts > 0
        entropy[nz] -= p[nz] * np.log2(p[nz])
    return EntropyStats(entropy, float(entropy.mean()))


def depth_histogram(depth: DepthMap, bin_edges: Sequence[float]) -> np.ndarray:
    """Fraction of valid pixels whose range falls in each bin."""
    edges = np.asarray(bin_edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise DataError("bin edges must be a strictly increasing 1D sequence")
    values = depth.values[depth.valid]
    if values.size == 0:
        raise DataError("depth map has no valid pixels to histogram")
    counts, _ = np.histogram(values, bins=edges)
    return counts / values.size
