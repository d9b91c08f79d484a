"""Boxes, run-length masks, and overlap math.

Boxes are (x, y, w, h) in continuous pixel coordinates. Masks are
column-major run-length streams over an image canvas: counts alternate
zero-run / one-run starting with the zero-run (possibly of length 0),
and sum to height * width.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class Box:
    x: float
    y: float
    w: float
    h: float

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def aspect(self) -> float:
        """Width over height; inf for degenerate height."""
        return self.w / self.h if self.h > 0 else float("inf")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=np.float64)


class RleMask:
    """Run-length mask bound to an image canvas.

    ``string_form`` records whether the source document used the compact
    string codec, so serialization can mirror the input byte for byte.
    """

    __slots__ = ("height", "width", "counts", "string_form")

    def __init__(self, height: int, width: int, counts, string_form: bool = False):
        if height < 0 or width < 0:
            raise ValueError("mask canvas must be non-negative")
        arr = np.asarray(counts, dtype=np.int64)
        if arr.ndim != 1:
            raise ValueError("counts must be a flat sequence")
        if arr.size and arr.min() < 0:
            raise ValueError("run lengths must be non-negative")
        if int(arr.sum()) != height * width:
            raise ValueError(
                f"run lengths sum to {int(arr.sum())}, canvas is {height}x{width}")
        arr.setflags(write=False)
        object.__setattr__(self, "height", height)
        object.__setattr__(self, "width", width)
        object.__setattr__(self, "counts", arr)
        object.__setattr__(self, "string_form", bool(string_form))

    def __setattr__(self, key, value):
        raise AttributeError("RleMask is immutable")

    def __eq__(self, other) -> bool:
        if not isinstance(other, RleMask):
            return NotImplemented
        return (self.height == other.height and self.width == other.width
                and np.array_equal(self.counts, other.counts))

    def __hash__(self) -> int:
        return hash((self.height, self.width, self.counts.tobytes()))

    def __repr__(self) -> str:
        return f"RleMask({self.height}x{self.width}, {self.counts.size} runs)"

    @property
    def area(self) -> int:
        return _kernels.rle_area(self.counts)

    def to_dense(self) -> np.ndarray:
        """Decode to a (height, width) bool array. Test/debug helper."""
        flat = np.zeros(self.height * self.width, dtype=bool)
        pos = 0
        value = False
        for run in self.counts.tolist():
            if value:
                flat[pos:pos + run] = True
            pos += run
            value = not value
        return flat.reshape((self.width, self.height)).T

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "RleMask":
        dense = np.asarray(dense, dtype=bool)
        h, w = dense.shape
        flat = dense.T.reshape(-1)
        if flat.size == 0:
            return cls(h, w, [])
        change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        bounds = np.concatenate(([0], change, [flat.size]))
        runs = np.diff(bounds).tolist()
        if flat[0]:
            runs = [0] + runs
        return cls(h, w, runs)


def box_iou(a: Box, b: Box) -> float:
    m = _kernels.box_iou_matrix(a.as_array()[None, :], b.as_array()[None, :],
                                np.zeros(1, dtype=np.uint8))
    return float(m[0, 0])


def box_iou_crowd(det: Box, crowd: Box) -> float:
    """Intersection over detection area; the crowd region is not consumed."""
    m = _kernels.box_iou_matrix(det.as_array()[None, :], crowd.as_array()[None, :],
                                np.ones(1, dtype=np.uint8))
    return float(m[0, 0])


def _check_canvas(a: RleMask, b: RleMask) -> None:
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError(
            f"mask canvases differ: {a.height}x{a.width} vs {b.height}x{b.width}")


def mask_iou(a: RleMask, b: RleMask) -> float:
    _check_canvas(a, b)
    inter = _kernels.rle_intersection(a.counts, b.counts)
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def mask_iou_crowd(det: RleMask, crowd: RleMask) -> float:
    _check_canvas(det, crowd)
    area = det.area
    if area == 0:
        return 0.0
    return _kernels.rle_intersection(det.counts, crowd.counts) / area


def rle_area(mask: RleMask) -> int:
    return mask.area


def box_to_mask(box: Box, height: int, width: int) -> RleMask:
    """Rasterize a box onto a canvas, covering the pixel rectangle spanned
    by the box after rounding outward and clipping to the canvas.

    Integer-aligned boxes inside the canvas rasterize losslessly, so mask
    IoU equals box IoU for them.
    """
    x0 = max(int(np.floor(box.x)), 0)
    y0 = max(int(np.floor(box.y)), 0)
    x1 = min(int(np.ceil(box.x + box.w)), width)
    y1 = min(int(np.ceil(box.y + box.h)), height)
    if x1 <= x0 or y1 <= y0:
        return RleMask(height, width, [height * width] if height * width else [])
    runs = [y0 + x0 * height]
    span = y1 - y0
    gap = height - span
    for col in range(x0, x1):
        runs.append(span)
        if col < x1 - 1:
            runs.append(gap)
    runs.append(height * width - (x1 - 1) * height - y1)
    return RleMask(height, width, runs)


def iou_matrix(det_geoms, gt_geoms, crowd, mode: str) -> np.ndarray:
    """Pairwise IoU of detection geometries against GT geometries.

    ``crowd`` flags GT columns that use intersection-over-detection-area.
    ``mode`` picks the geometry kind: 'box' expects Box, 'mask' RleMask.
    """
    n, m = len(det_geoms), len(gt_geoms)
    crowd = np.asarray(crowd, dtype=np.uint8).reshape(-1)
    if mode == "box":
        if n == 0 or m == 0:
            return np.zeros((n, m), dtype=np.float64)
        d = np.stack([g.as_array() for g in det_geoms])
        g = np.stack([g.as_array() for g in gt_geoms])
        return _kernels.box_iou_matrix(d, g, crowd)
    out = np.zeros((n, m), dtype=np.float64)
    det_areas = [g.area for g in det_geoms]
    gt_areas = [g.area for g in gt_geoms]
    for i, dg in enumerate(det_geoms):
        for j, gg in enumerate(gt_geoms):
            _check_canvas(dg, gg)
            inter = _kernels.rle_intersection(dg.counts, gg.counts)
            denom = det_areas[i] if crowd[j] else det_areas[i] + gt_areas[j] - inter
            if denom > 0:
                out[i, j] = inter / denom
    return out


# --- compact string codec -------------------------------------------------
# Variable-length signed integers, 5 bits per character offset from '0',
# bit 0x20 continues, delta-coded from the third run onward.

def rle_encode_counts(counts) -> str:
    counts = np.asarray(counts, dtype=np.int64)
    out = []
    for i, run in enumerate(counts.tolist()):
        value = run if i < 2 else run - int(counts[i - 2])
        more = True
        while more:
            chunk = value & 0x1F
            value >>= 5
            # sign-extended: done when the remaining bits match the sign bit
            more = not (value == 0 and not chunk & 0x10
                        or value == -1 and chunk & 0x10)
            if more:
                chunk |= 0x20
            out.append(chr(chunk + 48))
    return "".join(out)


def rle_decode_counts(data: str) -> np.ndarray:
    counts = []
    pos = 0
    while pos < len(data):
        value = 0
        shift = 0
        while True:
            chunk = ord(data[pos]) - 48
            pos += 1
            value |= (chunk & 0x1F) << shift
            shift += 5
            if not chunk & 0x20:
                if chunk & 0x10:
                    value -= 1 << shift
                break
        if len(counts) >= 2:
            value += counts[-2]
        counts.append(value)
    return np.asarray(counts, dtype=np.int64)
