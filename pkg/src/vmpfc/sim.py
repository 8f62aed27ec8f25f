"""Experiment drivers: initial conditions, fixed-step runs, convergence studies.

Initial data is described by small frozen dataclasses so runs are fully
reproducible from a config file.  Random perturbations use a counter-based
splitmix64 stream, which gives the same field for the same seed on any
platform and any thread count.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .adaptive import AdaptiveParams, AdaptiveResult, run_adaptive
from .errors import ConfigError, ContractViolation, VmpfcError
from .model import ModelParams, SchemeParams
from .records import TimeSeriesRecord, make_record, read_field_snapshot
from .schemes import (
    Forcing,
    SchemeState,
    bootstrap_step,
    cn_step,
    init_state,
    manufactured_exact,
    manufactured_forcing,
)
from .spectral import Grid, l2_norm


# --- initial conditions ----------------------------------------------------

_SPLITMIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)


def uniform_noise(seed: int, count: int) -> np.ndarray:
    """`count` doubles in [-1, 1) from a splitmix64 counter stream.

    Entry i hashes seed + (i+1) * gamma, so the stream is pure function of
    (seed, i) and identical across platforms.
    """
    if count < 0:
        raise ContractViolation(f"count must be nonnegative, got {count}")
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _SPLITMIX_GAMMA
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    u = (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
    return 2.0 * u - 1.0


@dataclass(frozen=True)
class RandomPerturbation:
    """phi = mean + amplitude * uniform[-1, 1) noise, psi = 0."""

    mean: float = 0.0
    amplitude: float = 0.01
    seed: int = 0


@dataclass(frozen=True)
class CrystallitePatch:
    center: tuple[float, float]
    half_width: float
    angle: float


@dataclass(frozen=True)
class Crystallites:
    """Constant background with rotated one-mode lattice seeds in square patches.

    Inside a patch with orientation theta the field is
    mean + amplitude * (cos(q yl / sqrt(3)) cos(q xl) - 0.5 cos(2 q yl / sqrt(3)))
    with xl = x sin(theta) + y cos(theta), yl = -x cos(theta) + y sin(theta).
    """

    mean: float = 0.285
    amplitude: float = 0.446
    wavenumber: float = 0.66
    patches: tuple[CrystallitePatch, ...] = ()


@dataclass(frozen=True)
class Manufactured:
    """The closed-form field used by convergence studies, at t = 0."""


@dataclass(frozen=True)
class FromFile:
    """Resume phi from a snapshot pair (<path>.f64 + <path>.json); psi = 0."""

    path: str


InitialCondition = Union[RandomPerturbation, Crystallites, Manufactured, FromFile]


def build_initial(ic: InitialCondition, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    psi0 = np.zeros(grid.shape)
    if isinstance(ic, RandomPerturbation):
        noise = uniform_noise(ic.seed, grid.num_points).reshape(grid.shape)
        return ic.mean + ic.amplitude * noise, psi0
    if isinstance(ic, Crystallites):
        if grid.dim != 2:
            raise ContractViolation("crystallite seeding is two-dimensional")
        x, y = grid.coords()
        phi = np.full(grid.shape, float(ic.mean))
        q = ic.wavenumber
        for patch in ic.patches:
            cx, cy = patch.center
            mask = (np.abs(x - cx) <= patch.half_width) & (np.abs(y - cy) <= patch.half_width)
            xl = x * math.sin(patch.angle) + y * math.cos(patch.angle)
            yl = -x * math.cos(patch.angle) + y * math.sin(patch.angle)
            seed = np.cos(q * yl / math.sqrt(3.0)) * np.cos(q * xl)
            seed = seed - 0.5 * np.cos(2.0 * q * yl / math.sqrt(3.0))
            phi = np.where(mask, ic.mean + ic.amplitude * seed, phi)
        return phi, psi0
    if isinstance(ic, Manufactured):
        phi, _ = manufactured_exact(grid, 0.0)
        return phi, psi0
    if isinstance(ic, FromFile):
        file_grid, phi, _ = read_field_snapshot(ic.path)
        if file_grid.n != grid.n or file_grid.lengths != grid.lengths:
            raise ConfigError(
                f"initial.path: snapshot geometry {file_grid.n} x {file_grid.lengths} "
                f"does not match the configured grid {grid.n} x {grid.lengths}"
            )
        return phi, psi0
    raise ContractViolation(f"unknown initial condition {type(ic).__name__}")


# --- fixed-step driver -----------------------------------------------------


def plan_fixed_steps(horizon: float, dt: float) -> int:
    """Steps a fixed-dt run takes: ceil(horizon/dt), last step truncated."""
    if not (horizon > 0 and dt > 0):
        raise ContractViolation(f"need horizon, dt > 0; got {horizon}, {dt}")
    return int(math.ceil(horizon / dt - 1e-9))


@dataclass(frozen=True)
class RunResult:
    state: SchemeState
    records: list[TimeSeriesRecord]
    snapshots: dict[float, tuple[float, np.ndarray]]
    step_count: int
    wall_time: float


def run_fixed(
    kind: str,
    grid: Grid,
    phi0: np.ndarray,
    psi0: np.ndarray,
    p: ModelParams,
    sp: SchemeParams,
    horizon: float,
    forcing: Optional[Forcing] = None,
    record_every: int = 1,
    snapshot_times: tuple[float, ...] = (),
) -> RunResult:
    """Integrate to ``horizon`` at dt = sp.dt (first step first-order).

    Step i targets t = i dt exactly, so roundoff does not drift and the
    final step is truncated to land on the horizon.  Snapshots capture phi
    at the first state reaching each requested time.
    """
    if record_every < 1:
        raise ContractViolation(f"record_every must be >= 1, got {record_every}")
    t0 = time.perf_counter()
    n_steps = plan_fixed_steps(horizon, sp.dt)
    tol_t = 1e-9 * max(1.0, horizon)
    pending = sorted(set(float(ts) for ts in snapshot_times))

    state = init_state(kind, grid, phi0, psi0, p, sp)
    records = [make_record(state, p, sp, 0.0)]
    snapshots: dict[float, tuple[float, np.ndarray]] = {}

    def capture(st: SchemeState):
        while pending and st.t >= pending[0] - tol_t:
            snapshots[pending.pop(0)] = (st.t, st.phi.copy())

    capture(state)
    for i in range(1, n_steps + 1):
        target = horizon if i == n_steps else i * sp.dt
        dt_i = target - state.t
        if i == 1:
            rep = bootstrap_step(state, p, replace(sp, dt=dt_i), forcing=forcing)
        else:
            rep = cn_step(state, p, sp, dt_i, forcing=forcing)
        state = rep.state
        if i % record_every == 0 or i == n_steps:
            records.append(make_record(state, p, sp, dt_i))
        capture(state)

    return RunResult(
        state=state,
        records=records,
        snapshots=snapshots,
        step_count=state.step_index,
        wall_time=time.perf_counter() - t0,
    )


# --- convergence study -----------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    dt: float
    error: float
    rate: float


@dataclass(frozen=True)
class ConvergenceResult:
    rows: list[ConvergenceRow]
    fitted_rate: float


def fit_rate(dts: list[float], errors: list[float]) -> float:
    """Least-squares slope of log(error) vs log(dt).

    Rows with error > 1 are dropped from the large-dt end first; they are
    outside the asymptotic range and would corrupt the fit.  Returns nan
    when fewer than two rows survive.
    """
    keep = sorted(zip(dts, errors), reverse=True)
    while keep and keep[0][1] > 1.0:
        keep.pop(0)
    if len(keep) < 2:
        return math.nan
    logd = np.log([d for d, _ in keep])
    loge = np.log([e for _, e in keep])
    return float(np.polyfit(logd, loge, 1)[0])


def convergence_study(
    kind: str,
    grid: Grid,
    p: ModelParams,
    sp_base: SchemeParams,
    dt_values: tuple[float, ...],
    horizon: float,
    bootstrap_only: bool = False,
) -> ConvergenceResult:
    """L2 error against the forced manufactured solution over a dt ladder.

    ``bootstrap_only`` integrates with repeated first-order starting steps
    to measure their own order.  A rung whose run trips a solver guard is
    recorded with error = inf instead of aborting the study.  Rows whose
    error exceeds 1 (outside the asymptotic range) are dropped from the
    large-dt end before the least-squares rate fit.
    """
    dts = sorted((float(d) for d in dt_values), reverse=True)
    if len(dts) < 2:
        raise ContractViolation("need at least two dt values")
    forcing = manufactured_forcing(p)
    phi0, psi0 = manufactured_exact(grid, 0.0)

    errors = []
    for dt in dts:
        sp = replace(sp_base, dt=dt)
        try:
            if bootstrap_only:
                state = init_state(kind, grid, phi0, np.zeros(grid.shape), p, sp)
                n = plan_fixed_steps(horizon, dt)
                for i in range(1, n + 1):
                    target = horizon if i == n else i * dt
                    rep = bootstrap_step(state, p, replace(sp, dt=target - state.t), forcing=forcing)
                    state = rep.state
            else:
                state = run_fixed(kind, grid, phi0, psi0, p, sp, horizon, forcing=forcing).state
        except VmpfcError:
            errors.append(math.inf)
            continue
        phi_exact, _ = manufactured_exact(grid, state.t)
        errors.append(l2_norm(grid, state.phi - phi_exact))

    rows = []
    for i, (dt, err) in enumerate(zip(dts, errors)):
        rate = math.nan
        if i > 0 and math.isfinite(err) and math.isfinite(errors[i - 1]):
            rate = math.log(errors[i - 1] / err) / math.log(dts[i - 1] / dt)
        rows.append(ConvergenceRow(dt=dt, error=err, rate=rate))

    return ConvergenceResult(rows=rows, fitted_rate=fit_rate(dts, errors))


# --- controller comparison -------------------------------------------------


@dataclass(frozen=True)
class AdaptCompareResult:
    evma: AdaptiveResult
    legacy: AdaptiveResult
    fixed: Optional[RunResult]


def adapt_compare(
    kind: str,
    grid: Grid,
    phi0: np.ndarray,
    psi0: np.ndarray,
    p: ModelParams,
    sp: SchemeParams,
    ap_evma: AdaptiveParams,
    ap_legacy: AdaptiveParams,
    horizon: float,
    dt_fixed: Optional[float] = None,
    forcing: Optional[Forcing] = None,
) -> AdaptCompareResult:
    """Run both controllers (and optionally a fixed-dt reference) on one setup."""
    evma = run_adaptive(kind, grid, phi0, psi0, p, sp, ap_evma, horizon,
                        forcing=forcing, controller="evma")
    legacy = run_adaptive(kind, grid, phi0, psi0, p, sp, ap_legacy, horizon,
                          forcing=forcing, controller="legacy")
    fixed = None
    if dt_fixed is not None:
        fixed = run_fixed(kind, grid, phi0, psi0, p, replace(sp, dt=dt_fixed),
                          horizon, forcing=forcing, record_every=1)
    return AdaptCompareResult(evma=evma, legacy=legacy, fixed=fixed)
