"""Pure numpy implementations of the overlap kernels.

Same contracts as the compiled module; used when the extension is not
built or when it is disabled via ``DETLENS_KERNELS=reference``.
"""

import numpy as np

name = "reference"


def box_iou_matrix(dets: np.ndarray, gts: np.ndarray, crowd: np.ndarray) -> np.ndarray:
    """Pairwise overlap of ``dets`` (N,4) against ``gts`` (M,4), xywh layout.

    Crowd columns use intersection over detection area instead of union.
    Degenerate pairs (empty union or empty detection) score 0.
    """
    n, m = dets.shape[0], gts.shape[0]
    if n == 0 or m == 0:
        return np.zeros((n, m), dtype=np.float64)
    ix = (np.minimum(dets[:, None, 0] + dets[:, None, 2], gts[None, :, 0] + gts[None, :, 2])
          - np.maximum(dets[:, None, 0], gts[None, :, 0]))
    iy = (np.minimum(dets[:, None, 1] + dets[:, None, 3], gts[None, :, 1] + gts[None, :, 3])
          - np.maximum(dets[:, None, 1], gts[None, :, 1]))
    inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
    det_area = (dets[:, 2] * dets[:, 3])[:, None]
    gt_area = (gts[:, 2] * gts[:, 3])[None, :]
    denom = np.where(crowd[None, :] != 0, det_area + np.zeros_like(gt_area),
                     det_area + gt_area - inter)
    out = np.zeros((n, m), dtype=np.float64)
    np.divide(inter, denom, out=out, where=denom > 0)
    return out


def _one_runs(counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # counts alternate zero-run / one-run; one-run k covers [ends[2k+1]-counts[2k+1], ends[2k+1])
    ends = np.cumsum(counts)
    one_ends = ends[1::2]
    return one_ends - counts[1::2], one_ends


def rle_area(counts: np.ndarray) -> int:
    return int(counts[1::2].sum()) if counts.size else 0


def rle_intersection(a: np.ndarray, b: np.ndarray) -> int:
    """Number of pixels set in both run streams, without decompressing."""
    a_starts, a_ends = _one_runs(a)
    b_starts, b_ends = _one_runs(b)
    if a_starts.size == 0 or b_starts.size == 0:
        return 0
    b_lens = b_ends - b_starts
    prefix = np.concatenate(([0], np.cumsum(b_lens)))

    def coverage(points: np.ndarray) -> np.ndarray:
        # measure of b's one-runs inside [0, x) for each x
        j = np.searchsorted(b_starts, points, side="right")
        k = np.maximum(j - 1, 0)
        partial = np.clip(points - b_starts[k], 0, b_lens[k])
        return np.where(j > 0, prefix[k] + partial, 0)

    return int(np.sum(coverage(a_ends) - coverage(a_starts)))
