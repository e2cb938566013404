"""Work/depth accounting for a solver run.

Counters are plain monotone tallies; `rounds` counts sequential batch phases
(each internally parallelizable phase contributes one round) and serves as
the depth proxy.  Wall times are recorded per labelled section.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field


class LedgerError(ValueError):
    pass


@dataclass
class WorkLedger:
    counters: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def add(self, name: str, amount: int = 1) -> None:
        if amount < 0:
            raise LedgerError("counters are monotone; negative add rejected")
        self.counters[name] = self.counters.get(name, 0) + int(amount)

    def set_floor(self, name: str, value: int) -> None:
        """Raise a counter to `value` (used to absorb externally kept tallies)."""
        cur = self.counters.get(name, 0)
        if value < cur:
            raise LedgerError(f"counter {name} would decrease ({cur} -> {value})")
        self.counters[name] = int(value)

    def timed(self, label: str):
        return _Section(self, label)

    def as_dict(self) -> dict:
        return {"counters": dict(self.counters),
                "timings": {k: round(v, 6) for k, v in self.timings.items()}}


class _Section:
    def __init__(self, ledger: WorkLedger, label: str):
        self.ledger = ledger
        self.label = label

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        dt = time.perf_counter() - self.t0
        self.ledger.timings[self.label] = self.ledger.timings.get(self.label, 0.0) + dt
        return False
