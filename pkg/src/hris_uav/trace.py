"""Per-block optimization records and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

COLUMNS = ("iteration", "tau_nats", "block", "status", "residual", "wall_ms")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    tau: float
    block: str
    status: str
    residual: float
    wall_ms: float


@dataclass
class IterationTrace:
    rows: list[TraceRow] = field(default_factory=list)
    stop_reason: str = ""
    metrics: dict[str, float] = field(default_factory=dict)

    def add(self, iteration: int, tau: float, block: str, status: str,
            residual: float = 0.0, wall_ms: float = 0.0) -> None:
        self.rows.append(TraceRow(iteration, float(tau), block, status, float(residual), float(wall_ms)))

    def taus(self) -> list[float]:
        """Objective at the end of each outer iteration (index 0 = initial point)."""
        out: dict[int, float] = {}
        for r in self.rows:
            out[r.iteration] = r.tau
        return [out[i] for i in sorted(out)]

    @property
    def iterations(self) -> int:
        return max((r.iteration for r in self.rows), default=0)

    def max_residual(self) -> float:
        return max((r.residual for r in self.rows), default=0.0)

    def is_monotone(self, tol: float = 1e-6) -> bool:
        t = self.taus()
        return all(b >= a - tol for a, b in zip(t, t[1:]))

    def to_csv(self, timing: bool = False) -> str:
        """CSV text; wall time is written as 0 unless ``timing`` so reruns are byte-identical."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([r.iteration, f"{r.tau:.12e}", r.block, r.status, f"{r.residual:.3e}",
                        f"{r.wall_ms:.3f}" if timing else "0"])
        return buf.getvalue()
