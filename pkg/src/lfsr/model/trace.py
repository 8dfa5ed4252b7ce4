from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path


TRACE_HEADER = ("iter", "cost", "data_l1", "data_l2", "reg", "cu", "psnr", "ms")


@dataclass(frozen=True)
class TraceRow:
    n: int
    cost: float
    data_l1: float
    data_l2: float
    reg: float
    cu: int
    psnr: float | None
    ms: float

    def as_csv(self) -> list[str]:
        psnr = "" if self.psnr is None else ("inf" if math.isinf(self.psnr) else f"{self.psnr:.6f}")
        return [
            str(self.n),
            f"{self.cost:.10e}",
            f"{self.data_l1:.10e}",
            f"{self.data_l2:.10e}",
            f"{self.reg:.10e}",
            str(self.cu),
            psnr,
            f"{self.ms:.3f}",
        ]


@dataclass
class ConvergenceTrace:
    solver: str
    rows: list[TraceRow] = field(default_factory=list)
    primal_residuals: list[float] = field(default_factory=list)
    cg_iterations: list[int] = field(default_factory=list)
    cg_breakdowns: int = 0

    def append(self, row: TraceRow):
        if self.rows:
            last = self.rows[-1]
            assert row.n > last.n, f"trace rows out of order: {row.n} after {last.n}"
            assert row.cu > last.cu, f"CU must increase: {row.cu} after {last.cu}"
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    @property
    def final_cost(self) -> float:
        return self.rows[-1].cost

    @property
    def initial_cost(self) -> float:
        return self.rows[0].cost

    @property
    def final_cu(self) -> int:
        return self.rows[-1].cu

    def cost_at_cu(self, cu: int) -> float:
        """Cost of the latest row reached within ``cu`` computation units."""
        reached = [r.cost for r in self.rows if r.cu <= cu]
        return reached[-1]

    def write_csv(self, path: str | Path):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TRACE_HEADER)
            for row in self.rows:
                writer.writerow(row.as_csv())
