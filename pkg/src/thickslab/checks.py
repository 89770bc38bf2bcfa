"""Pass/fail records shared by the verification suite and the Monte Carlo comparison."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    expected: float
    tolerance: float
    passed: bool
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name}: measured {self.measured:.10g}, expected "
                f"{self.expected:.10g}, tolerance {self.tolerance:.3g}"
                + (f" ({self.note})" if self.note else ""))


def within(name, measured, expected, tolerance, note="") -> Check:
    measured = float(measured)
    return Check(name, measured, float(expected), float(tolerance),
                 bool(abs(measured - expected) <= tolerance), note)
