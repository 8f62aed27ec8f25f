"""Stabilized linear energy-stable time integrators.

Three second-order Crank-Nicolson schemes for

    alpha psi_t + beta psi = M Lap mu + g,   psi = phi_t,
    mu = (Lap + 1)^2 phi + f(phi) + f_vac(phi) + S (phi^{n+1} - phi_star)

that differ only in how the nonlinear force is represented:

* ``ssav``  - square-root auxiliary u = sqrt(int(F + F_vac) + b); the force
  enters as H(phi_dagger) * u_bar and u is advanced by a projected ODE.
  Costs one extra diagonal solve (rank-one correction).
* ``sgpav`` - global auxiliary R = sqrt(pseudo energy + c0 |Omega|); the
  force is scaled by xi = R_dagger / sqrt(E1(dagger state)) and R is
  relaxed analytically after the solve.
* ``sesav`` - exponential auxiliary B = exp(pseudo energy / C), used the
  same way through xi = B_dagger / exp(E(dagger)/C).

Every step solves for the increment chi = phi^{n+1} - phi^n, whose Fourier
symbol is strictly positive, so uniform states are exact fixed points and
the mean of phi is conserved to round-off.  First steps use a first-order
bootstrap with the same structure.  All schemes damp their auxiliary by a
factor 1/(1+q), q >= 0, which makes R and B nonincreasing by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ContractViolation, ScalingError, ShiftTooSmall, SingularOperator, SolvabilityError
from .model import (
    ModelParams,
    SchemeParams,
    bulk_force,
    esav_B_init,
    gpav_R_init,
    original_energy,
    pseudo_energy,
    sav_H,
    sav_u_init,
)
from .spectral import (
    Grid,
    hm1_norm,
    l2_inner,
    l2_norm,
    laplacian,
    spectral_sumsq,
    to_physical,
    to_spectral,
)

SCHEME_KINDS = ("ssav", "sgpav", "sesav")

# forcing term g(x, t), sampled on the grid at a given time
Forcing = Callable[[Grid, float], np.ndarray]


@dataclass(frozen=True)
class SchemeState:
    """Solution state after ``step_index`` completed steps."""

    kind: str
    grid: Grid
    phi: np.ndarray
    phi_nm1: np.ndarray
    psi: np.ndarray
    psi_nm1: np.ndarray
    aux: float
    aux_nm1: float
    t: float
    step_index: int
    dt_nm1: float
    current_s: float


@dataclass(frozen=True)
class EnergyReport:
    original: float
    pseudo: float
    modified: float
    discrete: Optional[float]


@dataclass(frozen=True)
class StepReport:
    state: SchemeState
    dt: float
    xi: Optional[float] = None
    residual: Optional[float] = None
    energies: Optional[EnergyReport] = None


def init_state(
    kind: str,
    grid: Grid,
    phi0: np.ndarray,
    psi0: np.ndarray,
    p: ModelParams,
    sp: SchemeParams,
) -> SchemeState:
    """Build the t = 0 state, including the scheme's auxiliary scalar."""
    if kind not in SCHEME_KINDS:
        raise ContractViolation(f"unknown scheme kind {kind!r}; expected one of {SCHEME_KINDS}")
    phi0 = np.asarray(phi0, dtype=np.float64)
    psi0 = np.asarray(psi0, dtype=np.float64)
    if phi0.shape != grid.shape or psi0.shape != grid.shape:
        raise ContractViolation("initial fields must match the grid shape")
    if not (np.all(np.isfinite(phi0)) and np.all(np.isfinite(psi0))):
        raise ContractViolation("initial fields must be finite")
    if kind == "ssav":
        aux = sav_u_init(grid, phi0, p, sp)
    elif kind == "sgpav":
        aux = gpav_R_init(grid, phi0, psi0, p, sp)
    else:
        aux = esav_B_init(grid, phi0, psi0, p, sp)
    return SchemeState(
        kind=kind,
        grid=grid,
        phi=phi0,
        phi_nm1=phi0.copy(),
        psi=psi0,
        psi_nm1=psi0.copy(),
        aux=aux,
        aux_nm1=aux,
        t=0.0,
        step_index=0,
        dt_nm1=sp.dt,
        current_s=sp.stab_s,
    )


def extrap_half(f_n, f_nm1, dt_n: float, dt_nm1: float):
    """Second-order extrapolation to t^n + dt_n/2 from levels n and n-1."""
    r = dt_n / dt_nm1
    return (1.0 + 0.5 * r) * f_n - 0.5 * r * f_nm1


def extrap_full(f_n, f_nm1, dt_n: float, dt_nm1: float):
    """Second-order extrapolation to t^n + dt_n."""
    r = dt_n / dt_nm1
    return (1.0 + r) * f_n - r * f_nm1


def _check_dt(dt: float) -> float:
    dt = float(dt)
    if not np.isfinite(dt) or dt <= 0.0:
        raise ContractViolation(f"dt must be positive, got {dt}")
    return dt


def _symbol_values(grid: Grid, a0: float, cn_half: float, s: float) -> np.ndarray:
    """Denominator a0 + cn_half k^2 (1-k^2)^2 + s k^2; must stay positive."""
    k2 = grid.k2
    vals = a0 + cn_half * k2 * (1.0 - k2) ** 2 + s * k2
    if np.min(vals) <= 0.0:
        mode = tuple(int(i) for i in np.argwhere(vals <= 0.0)[0])
        raise SingularOperator(f"time-step symbol nonpositive at mode {mode}")
    return vals


def _assemble_rhs(
    grid: Grid,
    p: ModelParams,
    coef_psi: float,
    phi: np.ndarray,
    psi: np.ndarray,
    hterm: np.ndarray,
    forcing: Optional[Forcing],
    t_force: float,
) -> np.ndarray:
    """Spectral right-hand side coef*psi + Lap[(Lap+1)^2 phi + hterm] + g/M."""
    k2 = grid.k2
    gh = coef_psi * to_spectral(grid, psi)
    gh -= k2 * ((1.0 - k2) ** 2 * to_spectral(grid, phi) + to_spectral(grid, hterm))
    if forcing is not None:
        gh += to_spectral(grid, forcing(grid, t_force)) / p.mobility
    return gh


def _sav_rank_one(
    grid: Grid,
    pvals: np.ndarray,
    gh: np.ndarray,
    h_field: np.ndarray,
    factor: float,
) -> tuple[np.ndarray, float]:
    """Solve (P + factor * (-Lap) h (h, .)) chi = G by a rank-one update.

    Returns chi and the inner product (h, chi).
    """
    psi1 = to_physical(grid, gh / pvals)
    hh = to_spectral(grid, h_field)
    psi2 = to_physical(grid, -grid.k2 * hh / pvals)
    b1 = l2_inner(grid, h_field, psi1)
    b2 = l2_inner(grid, h_field, psi2)
    denom = 1.0 - factor * b2
    if denom <= 0.0 or not np.isfinite(denom):
        raise SolvabilityError(f"rank-one denominator {denom:.6e} is not positive")
    inner = b1 / denom
    return psi1 + factor * inner * psi2, inner


def _gpav_xi(state: SchemeState, p: ModelParams, sp: SchemeParams, dt: float) -> float:
    """xi = R_dagger / sqrt(E1 at the extrapolated half-time state)."""
    grid = state.grid
    phi_d = extrap_half(state.phi, state.phi_nm1, dt, state.dt_nm1)
    psi_d = extrap_half(state.psi, state.psi_nm1, dt, state.dt_nm1)
    r_d = extrap_half(state.aux, state.aux_nm1, dt, state.dt_nm1)
    e1 = pseudo_energy(grid, phi_d, psi_d, p) + sp.gpav_c0 * grid.volume
    if e1 <= 0.0 or not np.isfinite(e1):
        raise ShiftTooSmall(f"E1 at the extrapolated state is {e1:.6e}; increase gpav_c0")
    xi = r_d / math.sqrt(e1)
    if not np.isfinite(xi) or xi <= 0.0:
        raise ScalingError(f"auxiliary ratio xi = {xi} is not positive")
    return xi


def _esav_exp(value: float, sp: SchemeParams) -> float:
    arg = value / sp.esav_c
    if abs(arg) > 700.0:
        raise ShiftTooSmall(f"energy / esav_c = {arg:.3e} overflows exp; increase esav_c")
    return math.exp(arg)


def _esav_xi(state: SchemeState, p: ModelParams, sp: SchemeParams, dt: float) -> float:
    """xi = B_dagger / exp(pseudo energy at the extrapolated state / C)."""
    grid = state.grid
    phi_d = extrap_half(state.phi, state.phi_nm1, dt, state.dt_nm1)
    psi_d = extrap_half(state.psi, state.psi_nm1, dt, state.dt_nm1)
    b_d = extrap_half(state.aux, state.aux_nm1, dt, state.dt_nm1)
    xi = b_d / _esav_exp(pseudo_energy(grid, phi_d, psi_d, p), sp)
    if not np.isfinite(xi) or xi <= 0.0:
        raise ScalingError(f"auxiliary ratio xi = {xi} is not positive")
    return xi


def _check_aux(value: float, name: str, positive: bool = True) -> float:
    # u may change sign on violent transients (it enters the energy squared);
    # R and B are damped multiplicatively and must stay positive
    if not np.isfinite(value) or (positive and value <= 0.0):
        raise ScalingError(f"auxiliary {name} = {value} left its admissible range")
    return float(value)


def bootstrap_step(
    state: SchemeState,
    p: ModelParams,
    sp: SchemeParams,
    forcing: Optional[Forcing] = None,
    compute_residual: bool = False,
    with_energies: bool = False,
) -> StepReport:
    """One first-order step of size sp.dt (used to start the two-level schemes).

    Fully implicit in the linear part and in the auxiliary; the nonlinear
    force is frozen at the current state, so no extrapolation history is
    needed.  Applying it repeatedly gives a first-order integrator.
    """
    dt = _check_dt(sp.dt)
    grid = state.grid
    s = sp.stab_s
    mdt = p.mobility * dt
    a0 = p.alpha / (mdt * dt) + p.beta / mdt
    pvals = _symbol_values(grid, a0, 1.0, s)
    coef_psi = p.alpha / mdt
    t_new = state.t + dt
    xi: Optional[float] = None

    if state.kind == "ssav":
        h0 = sav_H(grid, state.phi, p, sp)
        gh = _assemble_rhs(grid, p, coef_psi, state.phi, state.psi, h0 * state.aux, forcing, t_new)
        chi, inner = _sav_rank_one(grid, pvals, gh, h0, 0.5)
        aux_new = _check_aux(state.aux + 0.5 * inner, "u", positive=False)
    else:
        xi = 1.0  # aux is exact at t = 0 level by construction
        nrep = bulk_force(state.phi, p)
        gh = _assemble_rhs(grid, p, coef_psi, state.phi, state.psi, nrep, forcing, t_new)
        chi = to_physical(grid, gh / pvals)

    phi_new = state.phi + chi
    psi_new = chi / dt

    if state.kind == "sgpav":
        e1_new = pseudo_energy(grid, phi_new, psi_new, p) + sp.gpav_c0 * grid.volume
        if e1_new <= 0.0:
            raise ShiftTooSmall(f"E1 = {e1_new:.6e} at the new state; increase gpav_c0")
        q = p.beta * dt / (2.0 * p.mobility) * hm1_norm(grid, psi_new) ** 2 / e1_new
        aux_new = _check_aux(state.aux / (1.0 + q), "R")
    elif state.kind == "sesav":
        q = p.beta * dt / (sp.esav_c * p.mobility) * hm1_norm(grid, psi_new) ** 2
        aux_new = _check_aux(state.aux / (1.0 + q), "B")

    new = SchemeState(
        kind=state.kind,
        grid=grid,
        phi=phi_new,
        phi_nm1=state.phi,
        psi=psi_new,
        psi_nm1=state.psi,
        aux=aux_new,
        aux_nm1=state.aux,
        t=t_new,
        step_index=state.step_index + 1,
        dt_nm1=dt,
        current_s=s,
    )
    res = momentum_residual(state, new, p, sp, dt, first_order=True, forcing=forcing) if compute_residual else None
    en = energy_report(new, p, sp) if with_energies else None
    return StepReport(state=new, dt=dt, xi=xi, residual=res, energies=en)


def cn_step(
    state: SchemeState,
    p: ModelParams,
    sp: SchemeParams,
    dt: float,
    forcing: Optional[Forcing] = None,
    compute_residual: bool = False,
    with_energies: bool = False,
) -> StepReport:
    """One Crank-Nicolson step of size dt from levels (n, n-1)."""
    dt = _check_dt(dt)
    grid = state.grid
    s = sp.stab_s
    mdt = p.mobility * dt
    a0 = 2.0 * p.alpha / (mdt * dt) + p.beta / mdt
    pvals = _symbol_values(grid, a0, 0.5, s)
    coef_psi = 2.0 * p.alpha / mdt
    t_half = state.t + 0.5 * dt
    phi_star = extrap_full(state.phi, state.phi_nm1, dt, state.dt_nm1)
    stab = s * (state.phi - phi_star)
    xi: Optional[float] = None

    if state.kind == "ssav":
        phi_d = extrap_half(state.phi, state.phi_nm1, dt, state.dt_nm1)
        h_d = sav_H(grid, phi_d, p, sp)
        gh = _assemble_rhs(grid, p, coef_psi, state.phi, state.psi, stab + h_d * state.aux, forcing, t_half)
        chi, inner = _sav_rank_one(grid, pvals, gh, h_d, 0.25)
        aux_new = _check_aux(state.aux + 0.5 * inner, "u", positive=False)
    else:
        if state.kind == "sgpav":
            xi = _gpav_xi(state, p, sp, dt)
        else:
            xi = _esav_xi(state, p, sp, dt)
        phi_d = extrap_half(state.phi, state.phi_nm1, dt, state.dt_nm1)
        nrep = xi * bulk_force(phi_d, p)
        gh = _assemble_rhs(grid, p, coef_psi, state.phi, state.psi, stab + nrep, forcing, t_half)
        chi = to_physical(grid, gh / pvals)

    phi_new = state.phi + chi
    psi_new = 2.0 * chi / dt - state.psi
    psi_mid = chi / dt

    if state.kind == "sgpav":
        phi_mid = state.phi + 0.5 * chi
        hm1_mid_sq = hm1_norm(grid, psi_mid) ** 2
        kin = 0.5 * p.alpha / p.mobility
        c0v = sp.gpav_c0 * grid.volume
        e1_mid = original_energy(grid, phi_mid, p) + kin * hm1_mid_sq + c0v
        e1_new = pseudo_energy(grid, phi_new, psi_new, p) + c0v
        if e1_mid <= 0.0 or e1_new <= 0.0:
            raise ShiftTooSmall(
                f"E1 = ({e1_mid:.6e}, {e1_new:.6e}) at the half/new state; increase gpav_c0"
            )
        q = p.beta * dt / (2.0 * p.mobility) * hm1_mid_sq / math.sqrt(e1_mid * e1_new)
        aux_new = _check_aux(state.aux / (1.0 + q), "R")
    elif state.kind == "sesav":
        q = p.beta * dt / (sp.esav_c * p.mobility) * hm1_norm(grid, psi_mid) ** 2
        aux_new = _check_aux(state.aux / (1.0 + q), "B")

    new = SchemeState(
        kind=state.kind,
        grid=grid,
        phi=phi_new,
        phi_nm1=state.phi,
        psi=psi_new,
        psi_nm1=state.psi,
        aux=aux_new,
        aux_nm1=state.aux,
        t=state.t + dt,
        step_index=state.step_index + 1,
        dt_nm1=dt,
        current_s=s,
    )
    res = momentum_residual(state, new, p, sp, dt, first_order=False, forcing=forcing) if compute_residual else None
    en = energy_report(new, p, sp) if with_energies else None
    return StepReport(state=new, dt=dt, xi=xi, residual=res, energies=en)


def momentum_residual(
    prev: SchemeState,
    new: SchemeState,
    p: ModelParams,
    sp: SchemeParams,
    dt: float,
    first_order: bool,
    forcing: Optional[Forcing] = None,
) -> float:
    """Relative L2 residual of the discrete momentum equation.

    Reassembles alpha dpsi/dt + beta psi_bar - M Lap(mu_bar) - g from the
    two states and the scheme's definition of mu_bar; a correct solve
    leaves only round-off.
    """
    grid = prev.grid
    s = sp.stab_s
    if first_order:
        dpsi = (new.psi - prev.psi) / dt
        psi_bar = new.psi
        lin = new.phi
        stab = s * (new.phi - prev.phi)
        t_force = prev.t + dt
        if prev.kind == "ssav":
            h0 = sav_H(grid, prev.phi, p, sp)
            nrep = h0 * new.aux
        else:
            nrep = bulk_force(prev.phi, p)
    else:
        dpsi = (new.psi - prev.psi) / dt
        psi_bar = 0.5 * (new.psi + prev.psi)
        lin = 0.5 * (new.phi + prev.phi)
        phi_star = extrap_full(prev.phi, prev.phi_nm1, dt, prev.dt_nm1)
        stab = s * (new.phi - phi_star)
        t_force = prev.t + 0.5 * dt
        phi_d = extrap_half(prev.phi, prev.phi_nm1, dt, prev.dt_nm1)
        if prev.kind == "ssav":
            h_d = sav_H(grid, phi_d, p, sp)
            nrep = h_d * 0.5 * (new.aux + prev.aux)
        elif prev.kind == "sgpav":
            nrep = _gpav_xi(prev, p, sp, dt) * bulk_force(phi_d, p)
        else:
            nrep = _esav_xi(prev, p, sp, dt) * bulk_force(phi_d, p)
    k2 = grid.k2
    mu = to_physical(grid, (1.0 - k2) ** 2 * to_spectral(grid, lin)) + stab + nrep
    lap_mu = laplacian(grid, mu)
    g = forcing(grid, t_force) if forcing is not None else np.zeros(grid.shape)
    res = p.alpha * dpsi + p.beta * psi_bar - p.mobility * lap_mu - g
    scale = max(
        l2_norm(grid, p.alpha * dpsi),
        l2_norm(grid, p.beta * psi_bar),
        l2_norm(grid, p.mobility * lap_mu),
        l2_norm(grid, g),
        1e-30,
    )
    return l2_norm(grid, res) / scale


def discrete_energy_cn(state: SchemeState, p: ModelParams, sp: SchemeParams) -> float:
    """E_CN = 1/2 |(Lap+1) phi|^2 + S/2 |phi - phi_prev|^2 + u^2 + (a/2M)|psi|_{-1}^2.

    The quantity the square-root scheme provably dissipates.  The S term
    uses the stabilization that was active when the state was produced.
    """
    if state.kind != "ssav":
        raise ContractViolation(f"discrete energy is defined for ssav, not {state.kind!r}")
    grid = state.grid
    c = to_spectral(grid, state.phi)
    quad = 0.5 * grid.cell_volume / grid.num_points * spectral_sumsq(grid, c, weight=(1.0 - grid.k2) ** 2)
    diff = state.phi - state.phi_nm1
    s_term = 0.5 * state.current_s * l2_inner(grid, diff, diff)
    kinetic = 0.5 * p.alpha / p.mobility * hm1_norm(grid, state.psi) ** 2
    return quad + s_term + state.aux**2 + kinetic


def modified_energy(state: SchemeState, p: ModelParams, sp: SchemeParams) -> float:
    """The auxiliary-variable representation of the pseudo energy."""
    grid = state.grid
    if state.kind == "ssav":
        quad = 0.5 * grid.cell_volume / grid.num_points
        c = to_spectral(grid, state.phi)
        e = quad * spectral_sumsq(grid, c, weight=(1.0 - grid.k2) ** 2)
        e += 0.5 * p.alpha / p.mobility * hm1_norm(grid, state.psi) ** 2
        return e + state.aux**2 - sp.sav_b
    if state.kind == "sgpav":
        return state.aux**2 - sp.gpav_c0 * grid.volume
    return sp.esav_c * math.log(state.aux)


def energy_report(state: SchemeState, p: ModelParams, sp: SchemeParams) -> EnergyReport:
    grid = state.grid
    orig = original_energy(grid, state.phi, p)
    pse = orig + 0.5 * p.alpha / p.mobility * hm1_norm(grid, state.psi) ** 2
    mod = modified_energy(state, p, sp)
    disc = discrete_energy_cn(state, p, sp) if state.kind == "ssav" else None
    return EnergyReport(original=orig, pseudo=pse, modified=mod, discrete=disc)


def monitored_energy(state: SchemeState, p: ModelParams, sp: SchemeParams, which: str = "auto") -> float:
    """The scalar the adaptive controller watches.

    ``auto`` picks the quantity each scheme provably dissipates: the
    discrete E_CN for ssav, R^2 - c0 |Omega| for sgpav, C log B for sesav.
    ``pseudo`` monitors the pseudo energy instead.
    """
    if which == "pseudo":
        return pseudo_energy(state.grid, state.phi, state.psi, p)
    if which != "auto":
        raise ContractViolation(f"unknown monitored energy {which!r}")
    if state.kind == "ssav":
        return discrete_energy_cn(state, p, sp)
    return modified_energy(state, p, sp)


def manufactured_exact(grid: Grid, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form (phi, psi) used for convergence studies on 2-d boxes.

    phi = sin(8 pi x / Lx) cos(8 pi y / Ly) cos(t); on [0, 128]^2 the
    spatial factors are sin(pi x / 16) cos(pi y / 16).
    """
    if grid.dim != 2:
        raise ContractViolation("the manufactured solution is two-dimensional")
    x, y = grid.coords()
    shape = np.sin(8.0 * np.pi * x / grid.lengths[0]) * np.cos(8.0 * np.pi * y / grid.lengths[1])
    return shape * math.cos(t), -shape * math.sin(t)


def manufactured_forcing(p: ModelParams) -> Forcing:
    """Forcing g that makes the manufactured pair an exact solution.

    Evaluated semi-discretely: phi is sampled on the grid and the spatial
    operator is applied with the same spectral rules the schemes use, so
    time discretization is the only error source in convergence studies.
    """

    def g(grid: Grid, t: float) -> np.ndarray:
        phi, psi = manufactured_exact(grid, t)
        k2 = grid.k2
        inner = (1.0 - k2) ** 2 * to_spectral(grid, phi) + to_spectral(grid, bulk_force(phi, p))
        lap_mu = to_physical(grid, -k2 * inner)
        # psi_t = -shape cos t = -phi
        return p.alpha * (-phi) + p.beta * psi - p.mobility * lap_mu

    return g
