"""Per-method convergence records and their CSV serialization."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

__all__ = ["TraceRecord", "ConvergenceTrace", "write_traces_csv", "read_traces_csv", "CSV_HEADER"]

CSV_HEADER = ("method", "oracle_calls", "f_gap", "dist", "wall_ns")


@dataclass(frozen=True)
class TraceRecord:
    oracle_calls: int
    f_gap: float
    dist: float
    wall_ns: int
    kind: str = "step"


@dataclass
class ConvergenceTrace:
    """Records of one method, in the order they were produced.

    ``kind`` is ``"start"``, ``"step"`` (after a base-method call) or
    ``"extrapolation"`` (after an oracle-free extrapolation, so it shares
    its oracle count with the preceding step).
    """

    method: str
    records: list = field(default_factory=list)
    diverged: bool = False
    note: str = ""

    def add(self, oracle_calls, f_gap, dist, wall_ns, kind="step"):
        self.records.append(TraceRecord(int(oracle_calls), float(f_gap), float(dist), int(wall_ns), kind))

    def __len__(self):
        return len(self.records)

    @property
    def oracle_calls(self) -> np.ndarray:
        return np.array([r.oracle_calls for r in self.records], dtype=int)

    @property
    def f_gap(self) -> np.ndarray:
        return np.array([r.f_gap for r in self.records])

    @property
    def dist(self) -> np.ndarray:
        return np.array([r.dist for r in self.records])

    @property
    def final_gap(self) -> float:
        return self.records[-1].f_gap

    def of_kind(self, kind):
        return [r for r in self.records if r.kind == kind]

    def per_oracle_call(self):
        """Last record for each oracle count; counts are strictly increasing."""
        out = {}
        for r in self.records:
            out[r.oracle_calls] = r
        return [out[c] for c in sorted(out)]


def write_traces_csv(traces, path=None, *, metadata=None, timing=True) -> str:
    """Serialize traces to ``method,oracle_calls,f_gap,dist,wall_ns``.

    ``metadata`` lines are written first as ``# key: value`` comments.  With
    ``timing=False`` the wall clock column is zeroed so that repeated runs
    produce identical files.
    """
    buf = io.StringIO()
    for key, value in (metadata or {}).items():
        buf.write(f"# {key}: {value}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for trace in traces:
        for r in trace.per_oracle_call():
            w.writerow([trace.method, r.oracle_calls, repr(r.f_gap), repr(r.dist), r.wall_ns if timing else 0])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def read_traces_csv(path):
    """Inverse of :func:`write_traces_csv`; returns ``{method: ConvergenceTrace}``."""
    traces = {}
    with open(path) as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        for row in rows:
            t = traces.setdefault(row["method"], ConvergenceTrace(row["method"]))
            t.add(row["oracle_calls"], float(row["f_gap"]), float(row["dist"]), row["wall_ns"])
    return traces
