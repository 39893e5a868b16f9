"""Correlation-vs-time series produced by scans and spin-lock runs."""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class CorrelationTrace:
    state: str
    sequence: str
    times: list[float] = field(default_factory=list)
    correlations: list[float] = field(default_factory=list)
    std_errors: list[float] = field(default_factory=list)
    status: str = "ok"  # "ok" or an error description for sequences that could not run

    def __post_init__(self):
        if not (len(self.times) == len(self.correlations) == len(self.std_errors)):
            raise ValueError("times, correlations and std_errors differ in length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("trace times must be increasing")
        if any(abs(c) > 1 for c in self.correlations):
            raise ValueError("correlations must lie in [-1, 1]")

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.times, self.correlations, self.std_errors))

    def __len__(self) -> int:
        return len(self.times)
