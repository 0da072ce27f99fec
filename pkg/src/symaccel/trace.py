"""Run traces and their on-disk delimited-text form."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

TRACE_HEADER = ("iter", "t", "f", "grad_norm", "grad_evals", "elapsed_ns", "tau")
# file column names that differ from the record attribute
_ALIASES = {"grad_evals": "grad_evals_cum", "tau": "accepted_tau"}


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    t: float
    f: float
    grad_norm: float
    grad_evals_cum: int
    elapsed_ns: int
    accepted_tau: float

    def row(self) -> list[str]:
        return [
            str(self.iter),
            repr(float(self.t)),
            repr(float(self.f)),
            repr(float(self.grad_norm)),
            str(self.grad_evals_cum),
            str(self.elapsed_ns),
            repr(float(self.accepted_tau)),
        ]


@dataclass
class Trace:
    """Records of one run. Record 0 is the initial point (tau = 0, no
    gradient evaluations charged); record k follows the k-th accepted step."""

    scheme: str
    records: list[TraceRecord] = field(default_factory=list)
    states: list = field(default_factory=list)
    stop_reason: str | None = None
    final_state: object = None

    @property
    def iterations(self) -> int:
        return self.records[-1].iter if self.records else 0

    @property
    def grad_evals(self) -> int:
        return self.records[-1].grad_evals_cum if self.records else 0

    @property
    def final_f(self) -> float:
        return self.records[-1].f if self.records else float("nan")

    @property
    def wall_ns(self) -> int:
        return self.records[-1].elapsed_ns if self.records else 0

    def column(self, name: str) -> list:
        """Values of one field; accepts attribute or file-header names."""
        name = _ALIASES.get(name, name)
        return [getattr(r, name) for r in self.records]


def write_trace_csv(trace: Trace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for rec in trace.records:
            writer.writerow(rec.row())


def read_trace_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
