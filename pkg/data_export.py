import logging
from pathlib import Path

import pandas as pd

from errors import LrlError

logger = logging.getLogger(__name__)

KERNEL_COLUMNS = [
    "t", "x", "distance", "h_minus1", "h_0", "h_plus1",
    "margin_minus1", "margin_0", "margin_plus1",
]
SWEEP_COLUMNS = ["t", "d_XY", "measure_kind", "measured", "envelope", "margin", "passed", "status"]
BOUNDS_COLUMNS = ["quantity", "value", "formula"]
CHECK_COLUMNS = ["check", "passed", "detail"]


class ResultExporter:
    """Writes result tables as CSV and text reports as plain files"""

    def __init__(self, path):
        self.path = Path(path)

    def _target(self, path):
        target = Path(path) if path is not None else self.path
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise LrlError(f"cannot create directory for {target}: {exc}") from exc
        return target

    @staticmethod
    def to_csv_text(frame, columns=None):
        """CSV text with '\\n' endings; floats keep their shortest round-trip repr"""
        if columns is not None:
            frame = pd.DataFrame(frame, columns=columns)
        return frame.to_csv(index=False, lineterminator="\n", na_rep="nan")

    def export_to_csv(self, frame, columns=None, path=None):
        """Export a result table to CSV"""
        target = self._target(path)
        try:
            with open(target, "w", encoding="utf-8", newline="") as handle:
                handle.write(self.to_csv_text(frame, columns))
        except OSError as exc:
            raise LrlError(f"cannot write {target}: {exc}") from exc
        logger.info("wrote %d rows to %s", len(frame), target)
        return target

    def export_report(self, lines, path=None):
        """Export a text report, one entry per line"""
        target = self._target(path)
        try:
            with open(target, "w", encoding="utf-8", newline="") as handle:
                handle.write("\n".join(lines) + "\n")
        except OSError as exc:
            raise LrlError(f"cannot write {target}: {exc}") from exc
        logger.info("wrote report to %s", target)
        return target


def format_table(frame):
    """Fixed-width text rendering of a table for reports"""
    with pd.option_context("display.max_colwidth", None, "display.width", 200):
        return frame.to_string(index=False).splitlines()
