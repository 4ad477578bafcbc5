"""Annualized investment, total annual cost and levelized cost of energy."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .dispatch import Design


class LCOEUndefined(ValueError):
    pass


@dataclass(frozen=True)
class CostModel:
    pv_capex: float = 900.0  # $/kW
    batt_capex: float = 300.0  # $/kWh
    discount_rate: float = 0.05
    pv_lifetime_yr: int = 25
    batt_lifetime_yr: int = 10

    def __post_init__(self):
        if self.pv_capex < 0 or self.batt_capex < 0:
            raise ValueError("capex must be nonnegative")
        if not 0 < self.discount_rate < 1:
            raise ValueError("discount_rate must lie in (0, 1)")
        if self.pv_lifetime_yr < 1 or self.batt_lifetime_yr < 1:
            raise ValueError("lifetimes must be at least one year")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CostBreakdown:
    op_cost: float  # $/yr
    inv_pv: float  # $/yr
    inv_batt: float  # $/yr
    total: float  # $/yr
    lcoe: float  # cents/kWh
    energy_served: float  # kWh/yr


def capital_recovery_factor(rate: float, years: int) -> float:
    if years < 1:
        raise ValueError("years must be >= 1")
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    if rate == 0:
        return 1.0 / years
    growth = (1.0 + rate) ** years
    return rate * growth / (growth - 1.0)


def annuity(capex_total: float, rate: float, years: int) -> float:
    """Equal yearly payment that repays ``capex_total`` over ``years`` at ``rate``."""
    return capex_total * capital_recovery_factor(rate, years)


def total_cost(design: Design, annual_op_cost: float, cm: CostModel,
               energy_served: float) -> CostBreakdown:
    """Operating cost plus annualized PV and battery investment, and the LCOE.

    ``energy_served`` is the annual load energy in kWh; all load is always
    served because grid import is unbounded.
    """
    if not (math.isfinite(annual_op_cost) and math.isfinite(energy_served)):
        raise ValueError("costs and energy must be finite")
    if annual_op_cost < 0:
        raise ValueError("operating cost must be nonnegative")
    if energy_served <= 0:
        raise LCOEUndefined("LCOE is undefined when no energy is served")
    inv_pv = annuity(cm.pv_capex * design.PV_size, cm.discount_rate, cm.pv_lifetime_yr)
    inv_batt = annuity(cm.batt_capex * design.E_B, cm.discount_rate, cm.batt_lifetime_yr)
    total = annual_op_cost + inv_pv + inv_batt
    return CostBreakdown(op_cost=annual_op_cost, inv_pv=inv_pv, inv_batt=inv_batt, total=total,
                         lcoe=100.0 * total / energy_served, energy_served=energy_served)
