"""Fourier pseudospectral building blocks on uniform periodic grids.

Fields are real numpy arrays sampled on a uniform tensor grid over
[0, L_1) x ... x [0, L_d), d <= 3.  Spectral coefficients use the real-FFT
layout: full spectrum along the leading axes, n_d // 2 + 1 modes along the
last axis.  The forward transform is unnormalized and the inverse carries
the 1/N factor (numpy/scipy convention).  Wavenumbers are
k_j = 2 pi m_j / L_j with integer m_j in [-n_j/2, n_j/2).

No dealiasing is applied anywhere; nonlinear terms are evaluated pointwise
on the collocation grid.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.fft

from .errors import ContractViolation, MeanViolation, SingularOperator

_fft_workers = 1


def set_fft_workers(n: int) -> None:
    """Set the worker count passed to scipy.fft transforms."""
    global _fft_workers
    n = int(n)
    if n < 1:
        raise ContractViolation(f"fft workers must be >= 1, got {n}")
    _fft_workers = n


def fft_workers() -> int:
    return _fft_workers


@dataclass(frozen=True)
class Grid:
    """Uniform periodic tensor grid.

    Parameters
    ----------
    n : tuple of int
        Points per axis, each even and >= 4.
    lengths : tuple of float
        Edge lengths L_j > 0 of the periodic box.
    """

    n: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        lengths = tuple(float(v) for v in self.lengths)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "lengths", lengths)
        if not 1 <= len(n) <= 3:
            raise ContractViolation(f"grid dimension must be 1, 2 or 3, got {len(n)}")
        if len(lengths) != len(n):
            raise ContractViolation("n and lengths must have the same dimension")
        for nj in n:
            if nj < 4 or nj % 2 != 0:
                raise ContractViolation(f"points per axis must be even and >= 4, got {nj}")
        for lj in lengths:
            if not np.isfinite(lj) or lj <= 0.0:
                raise ContractViolation(f"edge length must be positive, got {lj}")

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return self.n[:-1] + (self.n[-1] // 2 + 1,)

    @property
    def num_points(self) -> int:
        return int(np.prod(self.n))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def cell_volume(self) -> float:
        return self.volume / self.num_points

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / nj for L, nj in zip(self.lengths, self.n))

    @functools.cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Per-axis angular wavenumbers, broadcastable to spectral_shape."""
        axes = []
        for j, (nj, L) in enumerate(zip(self.n, self.lengths)):
            h = L / nj
            if j == self.dim - 1:
                k = 2.0 * np.pi * scipy.fft.rfftfreq(nj, d=h)
            else:
                k = 2.0 * np.pi * scipy.fft.fftfreq(nj, d=h)
            shape = [1] * self.dim
            shape[j] = k.size
            axes.append(k.reshape(shape))
        return tuple(axes)

    @functools.cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 on the spectral layout."""
        out = np.zeros(self.spectral_shape)
        for k in self.wavenumbers:
            out = out + k * k
        return out

    @functools.cached_property
    def _parseval_weights(self) -> np.ndarray:
        # Multiplicity of each retained mode in the full spectrum: the last
        # axis keeps n//2+1 of n columns; interior columns stand for a
        # conjugate pair.
        w = np.full(self.n[-1] // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0  # Nyquist column is self-conjugate for even n
        shape = [1] * self.dim
        shape[-1] = w.size
        return w.reshape(shape)

    def coords(self) -> tuple[np.ndarray, ...]:
        """Sparse (broadcastable) coordinate arrays x_j in [0, L_j)."""
        axes = [np.arange(nj) * (L / nj) for nj, L in zip(self.n, self.lengths)]
        return tuple(np.meshgrid(*axes, indexing="ij", sparse=True))


def _check_field(grid: Grid, f: np.ndarray, name: str = "field") -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.shape != grid.shape:
        raise ContractViolation(f"{name} shape {f.shape} does not match grid shape {grid.shape}")
    if not np.all(np.isfinite(f)):
        raise ContractViolation(f"{name} contains non-finite values")
    return f


def _check_coeffs(grid: Grid, c: np.ndarray, name: str = "coefficients") -> np.ndarray:
    c = np.asarray(c, dtype=np.complex128)
    if c.shape != grid.spectral_shape:
        raise ContractViolation(
            f"{name} shape {c.shape} does not match spectral shape {grid.spectral_shape}"
        )
    return c


def to_spectral(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Forward (unnormalized) real FFT of a sampled field."""
    f = _check_field(grid, f)
    return scipy.fft.rfftn(f, workers=_fft_workers)


def to_physical(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Inverse real FFT back to the collocation grid."""
    c = _check_coeffs(grid, coeffs)
    return scipy.fft.irfftn(c, s=grid.n, workers=_fft_workers)


@dataclass(frozen=True)
class FourierSymbol:
    """A real multiplier acting diagonally in Fourier space, s = s(|k|^2)."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    name: str = "symbol"

    def values(self, grid: Grid) -> np.ndarray:
        v = np.asarray(self.evaluator(grid.k2), dtype=np.float64)
        v = np.broadcast_to(v, grid.spectral_shape)
        if not np.all(np.isfinite(v)):
            raise ContractViolation(f"{self.name} evaluates to non-finite values")
        return v


def apply_symbol(grid: Grid, f: np.ndarray, symbol: FourierSymbol) -> np.ndarray:
    """Apply a diagonal Fourier multiplier to a real field."""
    return to_physical(grid, symbol.values(grid) * to_spectral(grid, f))


def solve_symbol(
    grid: Grid,
    rhs: np.ndarray,
    symbol: FourierSymbol,
    allow_zero_mode: bool = False,
    tol_scale: float = 1e-10,
) -> np.ndarray:
    """Solve  s(|k|^2) u = rhs  mode by mode.

    With ``allow_zero_mode`` the symbol may vanish at k = 0 only; the rhs
    must then be mean-free (within ``tol_scale * max(1, |rhs|_inf)``) and
    the zero mode of the solution is set to zero.
    """
    rhs = _check_field(grid, rhs, "rhs")
    vals = symbol.values(grid)
    zero = (0,) * grid.dim
    mask = vals == 0.0
    if allow_zero_mode:
        mask = mask.copy()
        mask[zero] = False
    if np.any(mask):
        mode = tuple(int(i) for i in np.argwhere(mask)[0])
        raise SingularOperator(f"{symbol.name} vanishes at mode {mode}")
    c = to_spectral(grid, rhs)
    if allow_zero_mode and vals[zero] == 0.0:
        m = float(np.mean(rhs))
        tol = tol_scale * max(1.0, float(np.max(np.abs(rhs))) if rhs.size else 0.0)
        if abs(m) > tol:
            raise MeanViolation(f"rhs mean {m:.3e} exceeds {tol:.3e}", m)
        out = np.zeros_like(c)
        np.divide(c, vals, out=out, where=~(vals == 0.0))
        return to_physical(grid, out)
    return to_physical(grid, c / vals)


def laplacian_symbol() -> FourierSymbol:
    return FourierSymbol(lambda k2: -k2, name="laplacian")


def laplacian(grid: Grid, f: np.ndarray) -> np.ndarray:
    return to_physical(grid, -grid.k2 * to_spectral(grid, f))


def inv_laplacian(grid: Grid, f: np.ndarray, tol_scale: float = 1e-10) -> np.ndarray:
    """Zero-mean inverse Laplacian.

    Requires |mean(f)| <= tol_scale * max(1, |f|_inf); the k = 0 mode of
    the result is zero, so laplacian(inv_laplacian(f)) == f for mean-free f.
    """
    f = _check_field(grid, f)
    m = float(np.mean(f))
    tol = tol_scale * max(1.0, float(np.max(np.abs(f))))
    if abs(m) > tol:
        raise MeanViolation(f"inv_laplacian needs a mean-free field, got mean {m:.3e}", m)
    c = to_spectral(grid, f)
    k2 = grid.k2
    out = np.zeros_like(c)
    np.divide(c, -k2, out=out, where=k2 > 0.0)
    return to_physical(grid, out)


def field_mean(f: np.ndarray) -> float:
    """Domain average of a sampled field (uniform grid, so a plain mean)."""
    return float(np.mean(f))


def l2_inner(grid: Grid, f: np.ndarray, g: np.ndarray) -> float:
    """Collocation L2 inner product (f, g) = cellvol * sum f g."""
    f = _check_field(grid, f, "f")
    g = _check_field(grid, g, "g")
    return grid.cell_volume * float(np.vdot(f, g).real)


def l2_norm(grid: Grid, f: np.ndarray) -> float:
    return float(np.sqrt(max(l2_inner(grid, f, f), 0.0)))


def spectral_sumsq(grid: Grid, coeffs: np.ndarray, weight: np.ndarray | None = None) -> float:
    """Full-spectrum sum of weight*|coeffs|^2 from the real-FFT layout."""
    c = _check_coeffs(grid, coeffs)
    a = (c.real * c.real + c.imag * c.imag) * grid._parseval_weights
    if weight is not None:
        a = a * weight
    return float(np.sum(a))


def grad_norm(grid: Grid, f: np.ndarray) -> float:
    """L2 norm of the gradient, via sum |k|^2 |f_hat|^2."""
    c = to_spectral(grid, f)
    s = spectral_sumsq(grid, c, weight=grid.k2)
    return float(np.sqrt(grid.cell_volume / grid.num_points * s))


def hm1_inner(grid: Grid, f: np.ndarray, g: np.ndarray, tol_scale: float = 1e-10) -> float:
    """H^{-1} inner product (f, g)_{-1} = (-Lap^{-1} f, g) for mean-free f, g."""
    cf = to_spectral(grid, _check_mean_free(grid, f, tol_scale, "f"))
    cg = to_spectral(grid, _check_mean_free(grid, g, tol_scale, "g"))
    k2 = grid.k2
    prod = (cf.real * cg.real + cf.imag * cg.imag) * grid._parseval_weights
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(k2 > 0.0, prod / np.where(k2 > 0.0, k2, 1.0), 0.0)
    return grid.cell_volume / grid.num_points * float(np.sum(terms))


def hm1_norm(grid: Grid, f: np.ndarray, tol_scale: float = 1e-10) -> float:
    """H^{-1} norm of a mean-free field: sqrt(sum_{k != 0} |f_hat|^2 / |k|^2)."""
    f = _check_mean_free(grid, f, tol_scale, "field")
    c = to_spectral(grid, f)
    k2 = grid.k2
    sq = (c.real * c.real + c.imag * c.imag) * grid._parseval_weights
    terms = np.where(k2 > 0.0, sq / np.where(k2 > 0.0, k2, 1.0), 0.0)
    return float(np.sqrt(grid.cell_volume / grid.num_points * float(np.sum(terms))))


def _check_mean_free(grid: Grid, f: np.ndarray, tol_scale: float, name: str) -> np.ndarray:
    f = _check_field(grid, f, name)
    m = float(np.mean(f))
    tol = tol_scale * max(1.0, float(np.max(np.abs(f))))
    if abs(m) > tol:
        raise MeanViolation(f"{name} must be mean-free, got mean {m:.3e}", m)
    return f


def make_grid(n: Sequence[int] | int, lengths: Sequence[float] | float, dim: int | None = None) -> Grid:
    """Convenience constructor; scalars are repeated along ``dim`` axes."""
    if np.isscalar(n):
        if dim is None:
            raise ContractViolation("dim is required when n is a scalar")
        n = (int(n),) * dim
    if np.isscalar(lengths):
        lengths = (float(lengths),) * len(tuple(n))
    return Grid(tuple(int(v) for v in n), tuple(float(v) for v in lengths))
