r"""Advisory existence-condition checks.

The sufficient conditions for the solver's variational grounding involve the
threshold 2/(pi/2 + 2/pi) ~ 0.9062; in atomic units the working reading is
Z < 0.9062 c (giving Z <= 124, N <= 41 at the physical c), while the
literal quadratic form 2 c^2/(pi/2 + 2/pi) is recorded alongside for
transparency.  All flags are informational; only N < Z + 1 is enforced.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import floor, pi

__all__ = ["HypothesisReport", "validate_conditions", "THRESHOLD_COEFF"]

THRESHOLD_COEFF = 2.0 / (pi / 2.0 + 2.0 / pi)


class NeutralityError(ValueError):
    """N >= Z + 1: more electrons than the standing assumption admits."""


@dataclass(frozen=True)
class HypothesisReport:
    Z: float
    N: float
    c: float
    threshold: float
    threshold_quadratic: float
    combined_ok: bool
    charge_ok: bool
    count_ok: bool
    neutrality_ok: bool
    physical_charge_limit: int
    physical_count_limit: int
    details: dict = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return self.combined_ok and self.charge_ok and self.count_ok and self.neutrality_ok

    def as_dict(self) -> dict:
        return {
            "Z": self.Z,
            "N": self.N,
            "c": self.c,
            "threshold": self.threshold,
            "threshold_quadratic": self.threshold_quadratic,
            "combined_ok": self.combined_ok,
            "charge_ok": self.charge_ok,
            "count_ok": self.count_ok,
            "neutrality_ok": self.neutrality_ok,
            "physical_charge_limit": self.physical_charge_limit,
            "physical_count_limit": self.physical_count_limit,
            "details": self.details,
        }


def validate_conditions(Z: float, N: float, c: float) -> HypothesisReport:
    """Evaluate the sufficient-condition flags at (Z, N, c).

    Raises NeutralityError for N >= Z + 1; everything else is advisory.
    """
    if Z <= 0 or N <= 0:
        raise ValueError(f"need positive Z and N, got Z={Z}, N={N}")
    if c <= 0:
        raise ValueError(f"need positive c, got c={c}")
    if N >= Z + 1:
        raise NeutralityError(f"need N < Z + 1, got N={N}, Z={Z}")
    thr = THRESHOLD_COEFF * c
    thr2 = THRESHOLD_COEFF * c * c
    combined = max(Z, 3 * N - 1) < thr
    charge = Z < thr
    count = N < thr
    z_lim = int(floor(thr)) if thr != floor(thr) else int(thr) - 1
    n_lim = int(floor((thr + 1) / 3.0 - 1e-12))
    details = {
        "combined_value": max(Z, 3 * N - 1),
        "combined_bound": thr,
        "literal_quadratic_bound": thr2,
    }
    return HypothesisReport(
        Z=float(Z),
        N=float(N),
        c=float(c),
        threshold=thr,
        threshold_quadratic=thr2,
        combined_ok=bool(combined),
        charge_ok=bool(charge),
        count_ok=bool(count),
        neutrality_ok=True,
        physical_charge_limit=z_lim,
        physical_count_limit=n_lim,
        details=details,
    )
