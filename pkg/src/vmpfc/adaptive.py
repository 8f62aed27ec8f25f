"""Adaptive time stepping driven by monitored-energy variation.

Two controllers are provided.  The moving-average controller keeps a short
window of |E_new - E_old| values and proposes

    dt = max(dt_min, dt_max / sqrt(1 + alpha1 * mean(window))),

then limits the change per step to a factor ratio_max relative to the step
just taken.  The legacy controller reacts to the instantaneous derivative
E' = (E_new - E_old) / dt_old with no window and no ratio limit, which makes
it prone to dt oscillation during fast decay.

Both run on top of the same loop: a first-order bootstrap step of size
dt_min with no stabilization, then increment-form CN steps whose
stabilization switches to s_cr whenever the step about to be taken exceeds
dt_cr.  The final step is truncated to land exactly on the horizon.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractViolation
from .model import ModelParams, SchemeParams
from .records import TimeSeriesRecord, make_record
from .schemes import (
    Forcing,
    SchemeState,
    bootstrap_step,
    cn_step,
    init_state,
    monitored_energy,
)
from .spectral import Grid

CONTROLLER_KINDS = ("evma", "legacy")


@dataclass(frozen=True)
class AdaptiveParams:
    """Controller settings.  Defaults are the reference benchmark values."""

    dt_min: float = 1e-4
    dt_max: float = 2.0
    dt_cr: float = 0.014
    s_cr: float = 100.0
    alpha1: float = 1e4
    w_size: int = 7
    ratio_max: float = 1.5
    monitored: str = "auto"

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt_max and math.isfinite(self.dt_max)):
            raise ContractViolation(
                f"need 0 < dt_min <= dt_max, got [{self.dt_min}, {self.dt_max}]"
            )
        if not (self.dt_cr > 0 and math.isfinite(self.dt_cr)):
            raise ContractViolation(f"dt_cr must be positive, got {self.dt_cr}")
        if not (self.s_cr >= 0 and math.isfinite(self.s_cr)):
            raise ContractViolation(f"s_cr must be nonnegative, got {self.s_cr}")
        if not (self.alpha1 >= 0 and math.isfinite(self.alpha1)):
            raise ContractViolation(f"alpha1 must be nonnegative, got {self.alpha1}")
        if int(self.w_size) != self.w_size or self.w_size < 1:
            raise ContractViolation(f"w_size must be a positive integer, got {self.w_size}")
        if not self.ratio_max > 1:  # inf allowed: clamp becomes pass-through
            raise ContractViolation(f"ratio_max must exceed 1, got {self.ratio_max}")
        if self.monitored not in ("auto", "pseudo"):
            raise ContractViolation(f"monitored must be 'auto' or 'pseudo', got {self.monitored!r}")


@dataclass(frozen=True)
class EnergyHistory:
    """Window of recent |energy increments|, newest last, at most w_size long."""

    w_size: int
    values: tuple[float, ...] = ()


def history_push(h: EnergyHistory, e_new: float, e_old: float) -> EnergyHistory:
    vals = h.values + (abs(e_new - e_old),)
    if len(vals) > h.w_size:
        vals = vals[-h.w_size:]
    return EnergyHistory(h.w_size, vals)


def history_mean(h: EnergyHistory) -> float:
    if not h.values:
        return 0.0
    return math.fsum(h.values) / len(h.values)


def evma_propose(h: EnergyHistory, ap: AdaptiveParams) -> float:
    ebar = history_mean(h)
    return max(ap.dt_min, ap.dt_max / math.sqrt(1.0 + ap.alpha1 * ebar))


def ratio_clamp(dt_proposed: float, dt_old: float, ap: AdaptiveParams) -> float:
    lo = dt_old / ap.ratio_max
    hi = dt_old * ap.ratio_max
    return min(max(dt_proposed, lo), hi)


def legacy_propose(e_new: float, e_old: float, dt_old: float, ap: AdaptiveParams) -> float:
    eprime = (e_new - e_old) / dt_old
    return max(ap.dt_min, ap.dt_max / math.sqrt(1.0 + ap.alpha1 * eprime * eprime))


def stabilization_select(dt: float, ap: AdaptiveParams) -> float:
    return ap.s_cr if dt > ap.dt_cr else 0.0


@dataclass(frozen=True)
class AdaptiveResult:
    state: SchemeState
    records: list[TimeSeriesRecord]
    step_count: int
    wall_time: float
    controller: str


def run_adaptive(
    kind: str,
    grid: Grid,
    phi0: np.ndarray,
    psi0: np.ndarray,
    p: ModelParams,
    sp: SchemeParams,
    ap: AdaptiveParams,
    horizon: float,
    forcing: Forcing | None = None,
    controller: str = "evma",
) -> AdaptiveResult:
    """Integrate to ``horizon`` with adaptive steps; records every step."""
    if controller not in CONTROLLER_KINDS:
        raise ContractViolation(f"unknown controller {controller!r}; expected {CONTROLLER_KINDS}")
    if not (horizon > 0 and math.isfinite(horizon)):
        raise ContractViolation(f"horizon must be positive, got {horizon}")
    t0 = time.perf_counter()
    tol_t = 1e-12 * max(1.0, horizon)

    state = init_state(kind, grid, phi0, psi0, p, sp)
    records = [make_record(state, p, sp, 0.0)]
    e_init = monitored_energy(state, p, replace(sp, stab_s=0.0), which=ap.monitored)

    dt_boot = min(ap.dt_min, horizon)
    sp_boot = replace(sp, stab_s=0.0, dt=dt_boot)
    rep = bootstrap_step(state, p, sp_boot, forcing=forcing)
    state = rep.state
    records.append(make_record(state, p, sp_boot, dt_boot))
    e_old = monitored_energy(state, p, sp_boot, which=ap.monitored)

    # the starting step's energy change seeds the window before any proposal
    hist = history_push(EnergyHistory(ap.w_size), e_old, e_init)
    dt_new = ap.dt_min
    while state.t < horizon - tol_t:
        dt_step = min(dt_new, horizon - state.t)
        sp_step = replace(sp, stab_s=stabilization_select(dt_step, ap))
        rep = cn_step(state, p, sp_step, dt_step, forcing=forcing)
        state = rep.state
        records.append(make_record(state, p, sp_step, dt_step))
        e_new = monitored_energy(state, p, sp_step, which=ap.monitored)
        dt_old = dt_step
        if controller == "evma":
            hist = history_push(hist, e_new, e_old)
            dt_new = ratio_clamp(evma_propose(hist, ap), dt_old, ap)
        else:
            dt_new = legacy_propose(e_new, e_old, dt_old, ap)
        e_old = e_new

    return AdaptiveResult(
        state=state,
        records=records,
        step_count=state.step_index,
        wall_time=time.perf_counter() - t0,
        controller=controller,
    )
