"""detlens: detection evaluation with AP-weighted error decomposition.

Evaluates object detection and instance segmentation runs (COCO-style
annotation and result files), assigns every false positive and missed
ground truth to one of six error kinds, and weighs each kind by the AP
recovered when an oracle fixes it in isolation. Fixing everything lands
at exactly 100 AP, so the decomposition accounts for the whole gap.
"""

__version__ = "0.1.0"

from . import _kernels
from .analysis import (SCALE_EDGES, SCALE_ORDER, ScaleTable, SweepRow,
                       attribute_delta_ap, scale_of, scale_predicate, scale_report,
                       subset_ap, threshold_sweep)
from .apcore import (EvalResult, Matcher, MatchTable, PRCurve, average_precision,
                     evaluate, map_at_threshold, pr_curve)
from .dataset import (Category, Dataset, Detection, DetectionSet, EvalConfig,
                      GroundTruth, ImageMeta, ValidationError, load_detections,
                      load_ground_truth, save_detections, save_ground_truth)
from .errors import (ErrorKind, ErrorLedger, ErrorRecord, MAIN_KINDS,
                     classify_errors, split_special, top_errors)
from .geometry import (Box, RleMask, box_iou, box_iou_crowd, box_to_mask, iou_matrix,
                       mask_iou, mask_iou_crowd, rle_area, rle_decode_counts,
                       rle_encode_counts)
from .oracles import (MAIN_ORACLES, SPECIAL_ORACLES, DeltaReport, IdentityReport,
                      Oracle, OracleOutcome, apply_oracle, apply_oracles,
                      check_identities, delta_ap, delta_ap_joint,
                      delta_ap_progressive, delta_report)
from .report import (ErrorReport, dumps_structured, export_report, import_report,
                     render_svg, render_text, summarize)
from .synth import ErrorBudget, generate, random_budget

kernel_backend = _kernels.backend_name
