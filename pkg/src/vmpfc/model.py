"""Model definition: parameters, nonlinear potentials, and energies.

The free energy is

    E(phi) = int  1/2 |(Lap + 1) phi|^2 + F(phi) + F_vac(phi) dx

with the double well F(phi) = phi^4/4 - eps phi^2/2 and the vacancy
penalty F_vac(phi) = (h_vac/3) (|phi|^3 - phi^3), which vanishes for
phi >= 0 and grows cubically for phi < 0.  The pseudo energy adds the
kinetic-like term (alpha / 2 M) |psi|_{-1}^2 for the damped dynamics
alpha phi_tt + beta phi_t = M Lap mu.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, ShiftTooSmall
from .spectral import Grid, hm1_norm, spectral_sumsq, to_spectral

# exp argument beyond this overflows a double
_EXP_ARG_MAX = 700.0


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters.

    alpha, beta : inertial and damping coefficients (alpha > 0, beta >= 0)
    mobility    : M > 0
    epsilon     : undercooling, expected in (0, 1); >= 1 is admitted with a
                  warning since some stiff benchmarks sit on the boundary
    h_vac       : vacancy penalty strength, >= 0
    """

    alpha: float = 1.0
    beta: float = 1.0
    mobility: float = 1.0
    epsilon: float = 0.025
    h_vac: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "mobility"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0.0:
                raise ContractViolation(f"{name} must be positive, got {v}")
        if not np.isfinite(self.beta) or self.beta < 0.0:
            raise ContractViolation(f"beta must be >= 0, got {self.beta}")
        if not np.isfinite(self.epsilon) or self.epsilon <= 0.0:
            raise ContractViolation(f"epsilon must be positive, got {self.epsilon}")
        if self.epsilon >= 1.0:
            warnings.warn(
                f"epsilon = {self.epsilon} is outside the expected range (0, 1)",
                stacklevel=2,
            )
        if not np.isfinite(self.h_vac) or self.h_vac < 0.0:
            raise ContractViolation(f"h_vac must be >= 0, got {self.h_vac}")


@dataclass(frozen=True)
class SchemeParams:
    """Discretization parameters shared by the three schemes.

    stab_s : linear stabilization strength S >= 0
    sav_b  : shift inside the square-root auxiliary, > 0
    gpav_c0: shift added to the pseudo energy so R^2 stays positive
    esav_c : scale inside the exponential auxiliary, > 0
    dt     : nominal time step, > 0 (bootstrap steps use this value)
    """

    stab_s: float = 0.0
    sav_b: float = 1.0e4
    gpav_c0: float = 1.0e3
    esav_c: float = 1.0e8
    dt: float = 1.0e-2

    def __post_init__(self):
        if not np.isfinite(self.stab_s) or self.stab_s < 0.0:
            raise ContractViolation(f"stab_s must be >= 0, got {self.stab_s}")
        for name in ("sav_b", "esav_c", "dt"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0.0:
                raise ContractViolation(f"{name} must be positive, got {v}")
        if not np.isfinite(self.gpav_c0):
            raise ContractViolation(f"gpav_c0 must be finite, got {self.gpav_c0}")


def double_well(phi: np.ndarray, p: ModelParams) -> np.ndarray:
    """F(phi) = phi^4/4 - eps phi^2/2, pointwise."""
    return 0.25 * phi**4 - 0.5 * p.epsilon * phi**2


def double_well_deriv(phi: np.ndarray, p: ModelParams) -> np.ndarray:
    """f(phi) = phi^3 - eps phi."""
    return phi**3 - p.epsilon * phi


def vacancy(phi: np.ndarray, p: ModelParams) -> np.ndarray:
    """F_vac(phi) = (h_vac/3) (|phi|^3 - phi^3); zero for phi >= 0."""
    return (p.h_vac / 3.0) * (np.abs(phi) ** 3 - phi**3)


def vacancy_deriv(phi: np.ndarray, p: ModelParams) -> np.ndarray:
    """f_vac(phi) = h_vac (|phi| - phi) phi."""
    return p.h_vac * (np.abs(phi) - phi) * phi


def bulk_potential(phi: np.ndarray, p: ModelParams) -> np.ndarray:
    """F + F_vac, pointwise."""
    return double_well(phi, p) + vacancy(phi, p)


def bulk_force(phi: np.ndarray, p: ModelParams) -> np.ndarray:
    """f + f_vac = d(F + F_vac)/dphi, pointwise."""
    return double_well_deriv(phi, p) + vacancy_deriv(phi, p)


def bulk_integral(grid: Grid, phi: np.ndarray, p: ModelParams) -> float:
    """int (F + F_vac) dx on the collocation grid."""
    return grid.cell_volume * float(np.sum(bulk_potential(phi, p)))


def _swift_hohenberg_quadratic(grid: Grid, phi: np.ndarray) -> float:
    """1/2 |(Lap + 1) phi|^2 via the spectral sum of (1 - |k|^2)^2."""
    c = to_spectral(grid, phi)
    w = (1.0 - grid.k2) ** 2
    return 0.5 * grid.cell_volume / grid.num_points * spectral_sumsq(grid, c, weight=w)


def original_energy(grid: Grid, phi: np.ndarray, p: ModelParams) -> float:
    """E(phi) = 1/2 |(Lap+1) phi|^2 + int (F + F_vac)."""
    return _swift_hohenberg_quadratic(grid, phi) + bulk_integral(grid, phi, p)


def original_energy_gradient_form(grid: Grid, phi: np.ndarray, p: ModelParams) -> float:
    """Same energy written as 1/2|Lap phi|^2 - |grad phi|^2 + 1/2|phi|^2 + int(F+F_vac).

    Kept as an independent cross-check of the squared-operator form.
    """
    c = to_spectral(grid, phi)
    scale = grid.cell_volume / grid.num_points
    lap_sq = scale * spectral_sumsq(grid, c, weight=grid.k2**2)
    grad_sq = scale * spectral_sumsq(grid, c, weight=grid.k2)
    l2_sq = scale * spectral_sumsq(grid, c)
    return 0.5 * lap_sq - grad_sq + 0.5 * l2_sq + bulk_integral(grid, phi, p)


def pseudo_energy(grid: Grid, phi: np.ndarray, psi: np.ndarray, p: ModelParams) -> float:
    """E(phi) + (alpha / 2 M) |psi|_{-1}^2, the quantity the dynamics dissipate."""
    kinetic = 0.5 * p.alpha / p.mobility * hm1_norm(grid, psi) ** 2
    return original_energy(grid, phi, p) + kinetic


def sav_u_init(grid: Grid, phi: np.ndarray, p: ModelParams, sp: SchemeParams) -> float:
    """u(0) = sqrt(int (F + F_vac) + b).  Raises if the radicand is not positive."""
    radicand = bulk_integral(grid, phi, p) + sp.sav_b
    if radicand <= 0.0:
        raise ShiftTooSmall(
            f"int(F + F_vac) + b = {radicand:.6e} <= 0; increase sav_b"
        )
    return math.sqrt(radicand)


def sav_H(grid: Grid, phi: np.ndarray, p: ModelParams, sp: SchemeParams) -> np.ndarray:
    """H(phi) = (f + f_vac)(phi) / sqrt(int (F + F_vac) + b)."""
    return bulk_force(phi, p) / sav_u_init(grid, phi, p, sp)


def gpav_E1(
    grid: Grid, phi: np.ndarray, psi: np.ndarray, p: ModelParams, sp: SchemeParams
) -> float:
    """Shifted pseudo energy E1 = E(phi) + (alpha/2M)|psi|_{-1}^2 + c0 |Omega|."""
    e1 = pseudo_energy(grid, phi, psi, p) + sp.gpav_c0 * grid.volume
    if e1 <= 0.0:
        raise ShiftTooSmall(f"pseudo energy + c0*|Omega| = {e1:.6e} <= 0; increase gpav_c0")
    return e1


def gpav_R_init(
    grid: Grid, phi: np.ndarray, psi: np.ndarray, p: ModelParams, sp: SchemeParams
) -> float:
    """R(0) = sqrt(E1(phi, psi))."""
    return math.sqrt(gpav_E1(grid, phi, psi, p, sp))


def esav_B_init(
    grid: Grid, phi: np.ndarray, psi: np.ndarray, p: ModelParams, sp: SchemeParams
) -> float:
    """B(0) = exp(pseudo_energy / esav_c).  Guards the exponential range."""
    arg = pseudo_energy(grid, phi, psi, p) / sp.esav_c
    if abs(arg) > _EXP_ARG_MAX:
        raise ShiftTooSmall(
            f"pseudo energy / esav_c = {arg:.3e} overflows exp; increase esav_c"
        )
    return math.exp(arg)
