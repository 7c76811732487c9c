"""Laplacian eigenbasis on [0,1]^d and the spectral transform machinery.

The basis diagonalizes -Laplace on the unit box with either periodic or
Neumann boundary conditions.  In one dimension the periodic modes are

    psi_0 = 1,   psi = sqrt(2) sin(2 pi k x),  sqrt(2) cos(2 pi k x)

with eigenvalue 4 pi^2 k^2 for frequency k, and the Neumann modes are
sqrt(2) cos(pi k x) with eigenvalue pi^2 k^2.  Higher dimensions are tensor
products of the 1-d modes; the eigenvalue of a multi-index is the sum of the
per-axis eigenvalues.  Modes are sorted by eigenvalue with lexicographic
tie-breaking on the multi-index so that the ordering (and hence every noise
realization built on top of it) is reproducible.

Grids are uniform with spacing h = 1/N per axis.  Periodic bases sample at
x_i = i/N, Neumann bases at the cell midpoints x_i = (i + 1/2)/N; on those
grids the rectangle rule integrates products of retained modes exactly, so
discrete orthonormality holds to rounding.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

PERIODIC = "periodic"
NEUMANN = "neumann"

_TWO_PI = 2.0 * np.pi


def _axis_grid(n: int, boundary: str) -> np.ndarray:
    if boundary == PERIODIC:
        return np.arange(n) / n
    return (np.arange(n) + 0.5) / n


def _axis_mode(index: int, x: np.ndarray, boundary: str) -> np.ndarray:
    """Sample one 1-d mode on the axis grid.

    For the periodic basis the signed index follows the sin/cos convention:
    positive -> sin, negative -> cos, zero -> constant.  The argument is
    reduced modulo one period before evaluating so that grid symmetries
    (e.g. the exact maximum of sin at a grid point) survive in floating
    point.
    """
    if boundary == PERIODIC:
        if index == 0:
            return np.ones_like(x)
        k = abs(index)
        frac = np.mod(k * x, 1.0)
        if index > 0:
            return math.sqrt(2.0) * np.sin(_TWO_PI * frac)
        return math.sqrt(2.0) * np.cos(_TWO_PI * frac)
    if index == 0:
        return np.ones_like(x)
    frac = np.mod(0.5 * index * x, 1.0)
    return math.sqrt(2.0) * np.cos(_TWO_PI * frac)


def _axis_eigenvalue(index: int, boundary: str) -> float:
    if boundary == PERIODIC:
        return 4.0 * np.pi**2 * index * index
    return np.pi**2 * index * index


def _axis_indices(n: int, boundary: str) -> list[int]:
    # Periodic: drop the Nyquist frequency n/2 (its sine vanishes on the
    # grid), keeping 1 + 2*(n/2 - 1) = n - 1 orthonormal modes per axis.
    if boundary == PERIODIC:
        out = [0]
        for k in range(1, n // 2):
            out.extend([-k, k])
        return out
    return list(range(n))


@dataclass(frozen=True)
class SpectralBasis:
    """Retained eigenpairs of -Laplace on [0,1]^d plus transform tables.

    Immutable after construction; safe to share across workers.
    """

    dimension: int
    boundary: str
    grid_points: int
    n_modes: int
    eigenvalues: np.ndarray          # (n_modes,), nondecreasing
    mode_indices: tuple[tuple[int, ...], ...]
    table: np.ndarray                # (n_modes, N^d) grid samples
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return (self.grid_points,) * self.dimension

    @property
    def grid_size(self) -> int:
        return self.grid_points**self.dimension

    @property
    def cell_volume(self) -> float:
        return 1.0 / self.grid_size

    def axis_coordinates(self) -> np.ndarray:
        return _axis_grid(self.grid_points, self.boundary)

    def mode_field(self, k: int) -> np.ndarray:
        """Grid samples of psi_k, shaped (N,)*d."""
        return self.table[k].reshape(self.grid_shape).copy()

    def laplacian_matrix(self) -> np.ndarray:
        """Dense grid-space matrix of the band-limited Laplacian.

        L[i, j] = -sum_k nu_k psi_k(x_i) psi_k(x_j) h^d.  Cached; used by the
        implicit porous-medium solver when the grid is small enough for
        direct linear algebra.
        """
        lap = self._cache.get("laplacian_matrix")
        if lap is None:
            weighted = (-self.eigenvalues[:, None]) * self.table
            lap = self.table.T @ weighted * self.cell_volume
            self._cache["laplacian_matrix"] = lap
        return lap


def build_basis(d: int, boundary: str, n: int, n_modes: int) -> SpectralBasis:
    """Construct the first `n_modes` eigenpairs on an N-per-axis grid.

    Eigenvalues are derived from the sampled eigenfunctions (4 pi^2 |k|^2
    periodic, pi^2 |k|^2 Neumann, |k|^2 the squared Euclidean norm of the
    multi-index); ordering is by eigenvalue, ties broken lexicographically.
    """
    if d not in (1, 2, 3):
        raise ValueError(f"unsupported dimension {d}; expected 1, 2 or 3")
    if boundary not in (PERIODIC, NEUMANN):
        raise ValueError(f"unknown boundary {boundary!r}")
    if n < 8:
        raise ValueError(f"grid too coarse: N={n} < 8")
    if n & (n - 1):
        raise ValueError(f"N={n} is not a power of two")

    axis = _axis_indices(n, boundary)
    multi = list(itertools.product(axis, repeat=d))
    multi.sort(key=lambda idx: (sum(_axis_eigenvalue(i, boundary) for i in idx), idx))
    if n_modes < 1 or n_modes > len(multi):
        raise ValueError(
            f"requested {n_modes} modes; resolvable range is 1..{len(multi)} "
            f"for N={n}, d={d}, {boundary}"
        )
    multi = multi[:n_modes]

    x = _axis_grid(n, boundary)
    axis_tables = {
        i: _axis_mode(i, x, boundary) for i in {i for idx in multi for i in idx}
    }
    table = np.empty((n_modes, n**d))
    eigenvalues = np.empty(n_modes)
    for row, idx in enumerate(multi):
        mode = axis_tables[idx[0]]
        for i in idx[1:]:
            mode = np.multiply.outer(mode, axis_tables[i])
        table[row] = mode.ravel()
        eigenvalues[row] = sum(_axis_eigenvalue(i, boundary) for i in idx)

    return SpectralBasis(
        dimension=d,
        boundary=boundary,
        grid_points=n,
        n_modes=n_modes,
        eigenvalues=eigenvalues,
        mode_indices=tuple(multi),
        table=table,
    )


def analyze(basis: SpectralBasis, values: np.ndarray) -> np.ndarray:
    """Coefficients <f, psi_k> for k < n_modes (rectangle-rule inner product)."""
    flat = np.asarray(values).reshape(-1)
    if flat.size != basis.grid_size:
        raise ValueError(
            f"field has {flat.size} entries, basis grid has {basis.grid_size}"
        )
    return basis.table @ flat * basis.cell_volume


def synthesize(basis: SpectralBasis, coefficients: np.ndarray) -> np.ndarray:
    """Grid samples of sum_k c_k psi_k, shaped (N,)*d."""
    coeffs = np.asarray(coefficients, dtype=float)
    if coeffs.ndim != 1 or coeffs.size > basis.n_modes:
        raise ValueError(
            f"coefficient vector of length {coeffs.size} exceeds the "
            f"{basis.n_modes} retained modes"
        )
    out = coeffs @ basis.table[: coeffs.size]
    return out.reshape(basis.grid_shape)


def apply_laplacian(basis: SpectralBasis, values: np.ndarray) -> np.ndarray:
    """Band-limited Laplacian: mode k is scaled by -nu_k."""
    values = np.asarray(values)
    lap = basis._cache.get("laplacian_matrix")
    if lap is not None:
        return (lap @ values.reshape(-1)).reshape(basis.grid_shape)
    coeffs = analyze(basis, values)
    return synthesize(basis, -basis.eigenvalues * coeffs)


def weyl_count(basis: SpectralBasis, lam: float) -> int:
    """#{j < n_modes : nu_j <= lam}."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return int(np.searchsorted(basis.eigenvalues, lam, side="right"))


def weyl_bound_constant(basis: SpectralBasis) -> float:
    """Fitted C with #{nu_j <= lam} <= C lam^{d/2} over the retained range.

    Reported, never asserted against a literature constant.
    """
    lams = basis.eigenvalues[basis.eigenvalues > 0]
    if lams.size == 0:
        return float("nan")
    counts = np.array([weyl_count(basis, lam) for lam in lams], dtype=float)
    return float(np.max(counts / lams ** (basis.dimension / 2.0)))
