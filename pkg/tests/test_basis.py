"""Eigenbasis construction, transforms, and the Weyl-count bookkeeping."""

import numpy as np
import pytest

from klausim.basis import (
    analyze,
    apply_laplacian,
    build_basis,
    synthesize,
    weyl_bound_constant,
    weyl_count,
)

PI2 = np.pi**2


@pytest.fixture(scope="module")
def per1d():
    return build_basis(1, "periodic", 64, 9)


@pytest.fixture(scope="module")
def neu1d():
    return build_basis(1, "neumann", 64, 8)


def second_difference_laplacian(f, boundary):
    """Independent O(h^2) stencil oracle for the Laplacian."""
    n = f.shape[0]
    h = 1.0 / n
    if boundary == "periodic":
        return (np.roll(f, -1) - 2.0 * f + np.roll(f, 1)) / h**2
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h**2
    # midpoint grid + zero-flux ghost cells: mirror the boundary values
    out[0] = (f[1] - f[0]) / h**2
    out[-1] = (f[-2] - f[-1]) / h**2
    return out


def test_periodic_eigenvalues_match_analytic_derivatives():
    basis = build_basis(1, "periodic", 64, 5)
    expected = np.array([0.0, 4 * PI2, 4 * PI2, 16 * PI2, 16 * PI2])
    assert np.allclose(basis.eigenvalues, expected, rtol=0, atol=1e-12)


def test_constant_mode_is_first(per1d, neu1d):
    for basis in (per1d, neu1d):
        assert basis.eigenvalues[0] == 0.0
        assert np.all(basis.mode_field(0) == 1.0)


def test_neumann_first_eigenvalue():
    basis = build_basis(1, "neumann", 64, 2)
    # -(cos pi x)'' = pi^2 cos pi x
    assert np.isclose(basis.eigenvalues[1], PI2, rtol=0, atol=1e-12)


def test_discrete_orthonormality(per1d, neu1d):
    for basis in (per1d, neu1d):
        gram = basis.table @ basis.table.T * basis.cell_volume
        assert np.max(np.abs(gram - np.eye(basis.n_modes))) <= 1e-10


def test_periodic_supnorm_is_sqrt2_exactly():
    basis = build_basis(1, "periodic", 64, 63)
    for k in range(1, basis.n_modes):
        assert np.max(np.abs(basis.table[k])) == np.sqrt(2.0)


def test_analyze_unit_vectors(per1d):
    for k in (0, 3, 7):
        coeffs = analyze(per1d, per1d.mode_field(k))
        expected = np.zeros(per1d.n_modes)
        expected[k] = 1.0
        assert np.max(np.abs(coeffs - expected)) <= 1e-10


def test_analyze_zero_and_linearity(per1d):
    zero = np.zeros(per1d.grid_shape)
    assert np.all(analyze(per1d, zero) == 0.0)
    f = 2.0 * per1d.mode_field(1) + 3.0 * per1d.mode_field(2)
    coeffs = analyze(per1d, f)
    expected = np.zeros(per1d.n_modes)
    expected[1], expected[2] = 2.0, 3.0
    assert np.max(np.abs(coeffs - expected)) <= 1e-10


def test_synthesize_basics(per1d):
    const = synthesize(per1d, np.array([1.0]))
    assert np.allclose(const, 1.0, atol=1e-14)
    zero = synthesize(per1d, np.zeros(4))
    assert np.all(zero == 0.0)


def test_round_trip_band_limited(per1d):
    rng = np.random.default_rng(7)
    coeffs = rng.normal(size=per1d.n_modes)
    f = synthesize(per1d, coeffs)
    assert np.max(np.abs(analyze(per1d, f) - coeffs)) <= 1e-10
    g = synthesize(per1d, analyze(per1d, f))
    assert np.max(np.abs(g - f)) <= 1e-10


def test_laplacian_eigenrelation(per1d, neu1d):
    for basis in (per1d, neu1d):
        for k in range(basis.n_modes):
            psi = basis.mode_field(k)
            err = apply_laplacian(basis, psi) + basis.eigenvalues[k] * psi
            assert np.max(np.abs(err)) <= 1e-9


def test_laplacian_of_constant_vanishes(per1d):
    out = apply_laplacian(per1d, np.ones(per1d.grid_shape))
    assert np.max(np.abs(out)) <= 1e-12


def test_laplacian_matches_analytic_second_derivative(per1d):
    x = per1d.axis_coordinates()
    f = np.sin(2 * np.pi * x)
    out = apply_laplacian(per1d, f)
    assert np.max(np.abs(out + 4 * PI2 * f)) <= 1e-10


def test_laplacian_close_to_stencil_on_smooth_field():
    basis = build_basis(1, "periodic", 128, 9)
    x = basis.axis_coordinates()
    f = np.exp(np.sin(2 * np.pi * x))
    f_band = synthesize(basis, analyze(basis, f))
    spectral = apply_laplacian(basis, f_band)
    stencil = second_difference_laplacian(f_band, "periodic")
    h = 1.0 / basis.grid_points
    scale = np.max(np.abs(spectral))
    assert np.max(np.abs(spectral - stencil)) <= 20.0 * h**2 * scale


def test_weyl_count_examples():
    basis = build_basis(1, "periodic", 64, 5)
    assert weyl_count(basis, 0.0) == 1
    assert weyl_count(basis, 4 * PI2) == 3
    assert weyl_count(basis, 1e12) == basis.n_modes


def test_weyl_ratio_bounded(per1d):
    c = weyl_bound_constant(per1d)
    assert np.isfinite(c) and c > 0
    lams = per1d.eigenvalues[1:]
    counts = np.array([weyl_count(per1d, lam) for lam in lams])
    assert np.all(counts <= c * lams**0.5 + 1e-12)


def test_supnorm_growth_bound_2d():
    basis = build_basis(2, "periodic", 16, 40)
    sups = np.max(np.abs(basis.table), axis=1)
    nu = basis.eigenvalues
    # sup |psi_k| <= C nu_k^((d-1)/2) with a fitted C, reported not pinned
    ratios = sups[1:] / nu[1:] ** 0.5
    assert np.all(ratios <= ratios.max())
    assert ratios.max() <= 2.1  # d=2 tensor modes peak at 2


def test_mode_ordering_deterministic():
    a = build_basis(2, "periodic", 16, 30)
    b = build_basis(2, "periodic", 16, 30)
    assert a.mode_indices == b.mode_indices
    assert np.all(np.diff(a.eigenvalues) >= -1e-12)


def test_three_dimensional_tensor_basis():
    basis = build_basis(3, "periodic", 8, 20)
    assert basis.grid_shape == (8, 8, 8)
    gram = basis.table @ basis.table.T * basis.cell_volume
    assert np.max(np.abs(gram - np.eye(20))) <= 1e-10
    # first excited shell: one frequency-1 factor on some axis
    assert np.isclose(basis.eigenvalues[1], 4 * PI2)
    for k in range(basis.n_modes):
        psi = basis.mode_field(k)
        err = apply_laplacian(basis, psi) + basis.eigenvalues[k] * psi
        assert np.max(np.abs(err)) <= 1e-9


def test_build_errors():
    with pytest.raises(ValueError):
        build_basis(4, "periodic", 64, 5)
    with pytest.raises(ValueError):
        build_basis(1, "periodic", 4, 2)
    with pytest.raises(ValueError):
        build_basis(1, "periodic", 48, 2)  # not a power of two
    with pytest.raises(ValueError):
        build_basis(1, "periodic", 64, 64)  # only 63 resolvable
    with pytest.raises(ValueError):
        build_basis(1, "dirichlet", 64, 4)


def test_shape_mismatch_errors(per1d):
    with pytest.raises(ValueError):
        analyze(per1d, np.zeros(33))
    with pytest.raises(ValueError):
        synthesize(per1d, np.zeros(per1d.n_modes + 1))
