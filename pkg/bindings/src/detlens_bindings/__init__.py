"""Notebook-friendly wrapper around the detlens command line tool.

Every number crosses the process boundary as the versioned structured
export, so this package holds no evaluation logic and never imports the
core: it runs ``python -m detlens`` in a subprocess and parses what the
tool prints. The core package must be installed in the same interpreter.
"""

import json
import subprocess
import sys

__version__ = "0.1.0"

__all__ = ["CoreError", "Session", "evaluate_files", "scale_report", "sweep"]

# config mapping keys -> CLI flags; use_ignored is handled separately
# because it is a bare switch
_FLAGS = {
    "mode": "--mode",
    "tf": "--tf",
    "tb": "--tb",
    "max_dets": "--max-dets",
    "missed_oracle": "--missed-oracle",
    "seed": "--seed",
    "threads": "--threads",
    "model": "--model",
    "dataset_name": "--dataset-name",
}


class CoreError(ValueError):
    """Input rejected by the core; carries the core's message text."""


def _argv(command, gt_path, det_path, config, extra=()):
    argv = [sys.executable, "-m", "detlens", command,
            "--gt", str(gt_path), "--dets", str(det_path),
            "--format", "structured"]
    config = dict(config or {})
    if config.pop("use_ignored", False):
        argv.append("--use-ignored")
    for key, value in config.items():
        if key not in _FLAGS:
            raise CoreError(f"unknown config key {key!r}")
        argv += [_FLAGS[key], str(value)]
    argv += list(extra)
    return argv


def _run(argv) -> bytes:
    proc = subprocess.run(argv, capture_output=True)
    if proc.returncode == 2:
        message = proc.stderr.decode("utf-8").strip()
        if message.startswith("error: "):
            message = message[len("error: "):]
        raise CoreError(message)
    if proc.returncode != 0:
        raise RuntimeError(proc.stderr.decode("utf-8").strip())
    return proc.stdout


def evaluate_files(gt_path, det_path, config=None, progressive=None, top=None):
    """Evaluate one detection file; returns the structured report mapping."""
    extra = []
    if progressive:
        extra += ["--progressive", ",".join(progressive)]
    if top:
        extra += ["--top", str(top)]
    return json.loads(_run(_argv("eval", gt_path, det_path, config, extra)))


def sweep(gt_path, det_path, thresholds, config=None):
    """Rows of the decomposition at each foreground threshold."""
    extra = ["--tf-list", ",".join(str(t) for t in thresholds)]
    doc = json.loads(_run(_argv("sweep", gt_path, det_path, config, extra)))
    return doc["sweep"]


def scale_report(gt_path, det_path, config=None):
    """Per-scale-bin error contributions: bin name -> kind -> delta AP."""
    doc = json.loads(_run(_argv("scale", gt_path, det_path, config)))
    return doc["scale"]


class Session:
    """One loaded (ground truth, detections, config) triple.

    The base report is produced at construction, so invalid inputs fail
    immediately; later queries rerun the tool on the same files. Not
    shareable across threads; independent Sessions are.
    """

    def __init__(self, gt_path, det_path, config=None):
        self._gt = str(gt_path)
        self._det = str(det_path)
        self._config = dict(config or {})
        self._raw = _run(_argv("eval", self._gt, self._det, self._config))
        self._report = json.loads(self._raw)

    def _require_open(self):
        if self._report is None:
            raise RuntimeError("session is closed")

    @property
    def closed(self) -> bool:
        return self._report is None

    @property
    def ap(self) -> float:
        """Mean AP over the evaluation thresholds."""
        self._require_open()
        return self._report["ap"]["mean"]

    @property
    def ap_operating(self) -> float:
        self._require_open()
        return self._report["ap"]["operating"]

    def report(self) -> dict:
        self._require_open()
        return self._report

    def export_bytes(self) -> bytes:
        """The structured export exactly as the tool emitted it."""
        self._require_open()
        return self._raw

    def sweep(self, thresholds) -> list:
        self._require_open()
        return sweep(self._gt, self._det, thresholds, self._config)

    def scale_report(self) -> dict:
        self._require_open()
        return scale_report(self._gt, self._det, self._config)

    def close(self) -> None:
        self._report = None
        self._raw = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    def __repr__(self):
        state = "closed" if self.closed else f"ap={self.ap:.2f}"
        return f"Session({self._gt!r}, {self._det!r}, {state})"
