"""Overlap kernels with a compiled fast path.

The compiled module is picked at import time when available; the numpy
reference is used otherwise. ``DETLENS_KERNELS=reference`` forces the
fallback, and tests can flip backends with ``use_backend``.
"""

import os

import numpy as np

from . import reference

try:
    from . import _native
except ImportError:
    _native = None

_impl = reference
if _native is not None and os.environ.get("DETLENS_KERNELS", "").lower() != "reference":
    _impl = _native


def available_backends() -> tuple[str, ...]:
    return ("native", "reference") if _native is not None else ("reference",)


def backend_name() -> str:
    return _impl.name


def use_backend(name: str) -> None:
    """Switch the active backend; 'native' errors if the extension is absent."""
    global _impl
    if name == "reference":
        _impl = reference
    elif name == "native":
        if _native is None:
            raise RuntimeError("compiled kernels are not built")
        _impl = _native
    else:
        raise ValueError(f"unknown backend {name!r}")


def box_iou_matrix(dets, gts, crowd) -> np.ndarray:
    dets = np.ascontiguousarray(dets, dtype=np.float64).reshape(-1, 4)
    gts = np.ascontiguousarray(gts, dtype=np.float64).reshape(-1, 4)
    crowd = np.ascontiguousarray(crowd, dtype=np.uint8).reshape(-1)
    return _impl.box_iou_matrix(dets, gts, crowd)


def rle_area(counts) -> int:
    return int(_impl.rle_area(np.ascontiguousarray(counts, dtype=np.int64)))


def rle_intersection(a, b) -> int:
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    return int(_impl.rle_intersection(a, b))
