from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path
from typing import List, Union

COLUMNS = ["step", "loss_d", "loss_g", "l_div", "r1", "grad_norm_g", "grad_norm_d"]


@dataclass
class MetricsRow:
    step: int
    loss_d: float
    loss_g: float
    l_div: float
    r1: float
    grad_norm_g: float
    grad_norm_d: float

    def as_cells(self) -> List[str]:
        return [str(self.step)] + [repr(float(getattr(self, f.name))) for f in fields(self)[1:]]


class MetricsLog:
    """Append-only metrics.csv; the header is written once, when the file is created."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists() or self.path.stat().st_size == 0:
            with self.path.open("w", newline="") as fh:
                csv.writer(fh).writerow(COLUMNS)

    def append(self, row: MetricsRow) -> None:
        with self.path.open("a", newline="") as fh:
            csv.writer(fh).writerow(row.as_cells())

    def truncate_after(self, step: int) -> None:
        """Drop rows past `step`, so a resumed run does not duplicate them."""
        rows = read_metrics(self.path)
        with self.path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(COLUMNS)
            for row in rows:
                if row.step <= step:
                    writer.writerow(row.as_cells())


def read_metrics(path: Union[str, Path]) -> List[MetricsRow]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            MetricsRow(step=int(r["step"]), **{c: float(r[c]) for c in COLUMNS[1:]})
            for r in reader
        ]


__all__ = ["COLUMNS", "MetricsLog", "MetricsRow", "read_metrics"]
