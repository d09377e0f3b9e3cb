import math
import warnings

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from spintransistor.atommap import (
    GeometricFactors,
    TrapSpec,
    coupling_ratio_sweep,
    effective_chain,
    geometric_factors,
    ordered_field_average,
    read_trap_config,
    slater_determinant,
    solve_potential,
    solve_schrodinger_1d,
    top_hat_field,
)
from spintransistor.errors import (
    AccuracyError,
    ConfigurationWarning,
    ConvergenceError,
    ParameterError,
)

FIG2 = TrapSpec()


@pytest.fixture(scope="module")
def fig2_spectrum():
    return solve_schrodinger_1d(FIG2, 4)


@pytest.fixture(scope="module")
def box_spectrum():
    return solve_potential(lambda x: np.zeros_like(x), 0.5, 1000, 4)


def box_alpha_oracle():
    """Closed-form N=2 contact integral for the unit box, done symbolically."""
    x = sp.symbols("x")
    phi = [sp.sqrt(2) * sp.sin(n * sp.pi * (x + sp.Rational(1, 2))) for n in (1, 2)]
    d = sp.diff(phi[0], x) * phi[1] - sp.diff(phi[1], x) * phi[0]
    # |Psi_0|^2 carries 1/2! and the ordered norm is 1/2!, so alpha = int d^2
    return float(sp.integrate(sp.expand(d**2), (x, -sp.Rational(1, 2), sp.Rational(1, 2))))


# --- trap spec ------------------------------------------------------------------


def test_trap_defaults_and_potential():
    assert FIG2.b == pytest.approx(12.8)
    assert FIG2.x0 == pytest.approx(0.4375)
    v = FIG2.potential(np.array([-FIG2.x0, 0.0, FIG2.x0]))
    assert v[0] == pytest.approx(v[2])
    assert v[1] == pytest.approx(-FIG2.u)


@pytest.mark.parametrize("kwargs", [
    dict(a=0.0), dict(b=-1.0), dict(n_grid=100), dict(x0=0.6), dict(half_width=0.0), dict(v0=math.inf),
])
def test_trap_validation(kwargs):
    with pytest.raises(ParameterError):
        TrapSpec(**kwargs)


def test_trap_config_roundtrip(tmp_path):
    cfg = tmp_path / "trap.cfg"
    cfg.write_text("# comment\nv0 = 400\nu = 150  # inline\nb = 64/5\nn_grid = 800\nextra = 1\n")
    trap = read_trap_config(cfg)
    assert (trap.v0, trap.u, trap.b, trap.n_grid) == (400.0, 150.0, 12.8, 800)
    cfg.write_text("[broken\n")
    with pytest.raises(ParameterError):
        read_trap_config(cfg)


# --- single-particle solver ------------------------------------------------------------


def test_box_energies(box_spectrum):
    expected = np.arange(1, 5) ** 2 * math.pi**2 / 2
    np.testing.assert_allclose(box_spectrum.energies, expected, rtol=1e-3)
    assert box_spectrum.energies[0] == pytest.approx(4.9348, abs=1e-3)


def test_harmonic_oscillator():
    omega = 400.0
    spec = solve_potential(lambda x: 0.5 * omega**2 * x**2, 0.5, 2000, 4)
    np.testing.assert_allclose(spec.energies, (np.arange(4) + 0.5) * omega, rtol=1e-3)


def test_orthonormal_and_ascending(fig2_spectrum):
    np.testing.assert_allclose(fig2_spectrum.overlap_matrix(), np.eye(4), atol=1e-8)
    assert np.all(np.diff(fig2_spectrum.energies) > 0)


def test_fig2_level_structure():
    spec = solve_schrodinger_1d(FIG2, 4)
    e = spec.energies
    assert e[1] - e[0] < 1e-3 * (e[2] - e[1])
    central = np.abs(spec.x) < 0.25
    weight = (spec.orbitals[:, central] ** 2).sum(axis=1) * spec.spacing
    assert np.all(weight[:2] < 0.01)
    assert np.all(weight[2:] > 0.9)


def test_orbital_signs_deterministic(fig2_spectrum):
    for phi in fig2_spectrum.orbitals:
        first = np.flatnonzero(np.abs(phi) > 1e-3 * np.abs(phi).max())[0]
        assert phi[first] > 0


def test_convergence_failure_reported():
    # a well narrower than the grid spacing cannot converge on a 200-point grid
    with pytest.raises(ConvergenceError, match="grid doubling"):
        solve_potential(lambda x: -5e5 * np.exp(-1e6 * x**2), 0.5, 200, 2)


def test_solver_rejects_bad_requests():
    with pytest.raises(ParameterError):
        solve_schrodinger_1d(FIG2, 13)
    with pytest.raises(ParameterError):
        solve_potential(lambda x: 0 * x, 0.5, 100, 2)


def test_orbital_csv(tmp_path, fig2_spectrum):
    path = tmp_path / "orb.csv"
    fig2_spectrum.write_csv(path, ["trap = fig2"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# trap = fig2"
    assert lines[2].split(",") == ["x", "phi_1", "phi_2", "phi_3", "phi_4"]
    assert len(lines) == 3 + len(fig2_spectrum.x)


# --- Slater determinant ---------------------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 4), st.lists(st.floats(-0.49, 0.49), min_size=4, max_size=4), st.data())
def test_slater_antisymmetry(fig2_spectrum, n, xs, data):
    pos = np.array(xs[:n])
    i, j = data.draw(st.permutations(range(n)))[:2]
    swapped = pos.copy()
    swapped[[i, j]] = swapped[[j, i]]
    a = slater_determinant(fig2_spectrum, n, pos)
    b = slater_determinant(fig2_spectrum, n, swapped)
    assert b == pytest.approx(-a, abs=1e-12)
    pos[j] = pos[i]
    assert slater_determinant(fig2_spectrum, n, pos) == 0.0


def test_slater_box_normalization(box_spectrum):
    x = np.linspace(-0.5, 0.5, 801)
    X, Y = np.meshgrid(x, x, indexing="ij")
    psi = slater_determinant(box_spectrum, 2, np.stack([X, Y], axis=-1))
    h = x[1] - x[0]
    assert np.sum(psi**2) * h * h == pytest.approx(1.0, abs=1e-6)


def test_slater_validation(box_spectrum):
    with pytest.raises(ParameterError):
        slater_determinant(box_spectrum, 5, np.zeros(5))
    with pytest.raises(ParameterError):
        slater_determinant(box_spectrum, 2, [0.1, 0.9])
    with pytest.raises(ParameterError):
        slater_determinant(box_spectrum, 2, [0.1])


# --- geometric factors ------------------------------------------------------------------------


def test_box_alpha_matches_symbolic_oracle(box_spectrum):
    oracle = box_alpha_oracle()
    assert oracle == pytest.approx(5 * math.pi**2, rel=1e-12)
    f = geometric_factors(box_spectrum, 2)
    assert f.alphas[0] == pytest.approx(oracle, rel=5e-3)
    assert f.ordered_norm == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_ordered_norm_quadrature(fig2_spectrum, n):
    f = geometric_factors(fig2_spectrum, n)
    assert f.ordered_norm == pytest.approx(1.0, abs=1e-3)


def test_fig2_ratio_and_symmetry(fig2_spectrum):
    f = geometric_factors(fig2_spectrum, 4)
    assert f.alphas[0] == pytest.approx(f.alphas[2], rel=1e-3)
    assert all(a > 0 for a in f.alphas)
    ratio, err = f.ratio(2, 1)
    assert ratio == pytest.approx(17.484, rel=0.05)
    assert err < 0.01 * ratio


def test_mirror_trap_gives_mirrored_alphas():
    """Reflecting an asymmetric trap reverses the geometric factors."""
    base = lambda x: -500 * np.exp(-384 * (x - 0.4) ** 2) - 450 * np.exp(-384 * (x + 0.4) ** 2) \
        - 200 * np.exp(-12.8 * x**2)
    left = geometric_factors(solve_potential(base, 0.5, 1000, 4), 4)
    right = geometric_factors(solve_potential(lambda x: base(-x), 0.5, 1000, 4), 4)
    np.testing.assert_allclose(left.alphas, right.alphas[::-1], rtol=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("n", [2, 3, 4])
def test_monte_carlo_agrees_with_quadrature(fig2_spectrum, n):
    q = geometric_factors(fig2_spectrum, n)
    m = geometric_factors(fig2_spectrum, n, method="monte_carlo", seed=11)
    for a, b, e in zip(q.alphas, m.alphas, m.errors):
        assert abs(a - b) < 3 * math.hypot(e, 0.0) + 3 * 1e-12
    assert abs(m.ordered_norm - 1) < 3 * m.details["norm_error"]
    assert m.details["proposal"] == "density"


def test_monte_carlo_box_and_uniform_proposal(box_spectrum):
    oracle = box_alpha_oracle()
    for proposal in ("density", "uniform"):
        m = geometric_factors(box_spectrum, 2, method="monte_carlo", seed=2, proposal=proposal)
        assert abs(m.alphas[0] - oracle) < 3 * m.errors[0]


def test_monte_carlo_reproducible(box_spectrum):
    with pytest.warns(ConfigurationWarning):
        a = geometric_factors(box_spectrum, 2, method="monte_carlo", samples=20_000, seed=5,
                              rel_tol=1.0)
    with pytest.warns(ConfigurationWarning):
        b = geometric_factors(box_spectrum, 2, method="monte_carlo", samples=20_000, seed=5,
                              rel_tol=1.0)
    assert a == b
    assert a.details["seed"] == 5


def test_accuracy_error_on_coarse_quadrature(fig2_spectrum):
    with pytest.raises(AccuracyError):
        geometric_factors(fig2_spectrum, 4, quad_points=20, norm_points=20)


def test_geometric_factor_validation(fig2_spectrum):
    with pytest.raises(ParameterError):
        geometric_factors(fig2_spectrum, 5)
    with pytest.raises(ParameterError):
        geometric_factors(fig2_spectrum, 3, method="simpson")


def test_grid_convergence_fig2():
    coarse = geometric_factors(solve_schrodinger_1d(FIG2, 4), 4).ratio(2, 1)[0]
    fine = geometric_factors(
        solve_schrodinger_1d(FIG2.with_(n_grid=2000), 4), 4, quad_points=400
    ).ratio(2, 1)[0]
    assert abs(fine - coarse) / coarse < 0.01


# --- effective chain ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def fig2_factors(fig2_spectrum):
    return geometric_factors(fig2_spectrum, 4)


@pytest.mark.parametrize("kappa, delta", [(2.0, 0.0), (1.0, -1.0), (math.inf, 1.0), (4.0, 0.5)])
def test_delta_from_kappa(fig2_factors, kappa, delta):
    assert effective_chain(fig2_factors, 50.0, kappa).delta == pytest.approx(delta)


def test_effective_chain_signs_and_scale(fig2_factors):
    chain = effective_chain(fig2_factors, 50.0, 1.0)
    np.testing.assert_allclose(chain.couplings, [-a / 50 for a in fig2_factors.alphas])
    pos = effective_chain(fig2_factors, 50.0, 1.0, positive_couplings=True, symmetrize=True)
    assert pos.symmetric and pos.couplings[0] == pos.couplings[2] > 0
    assert pos.couplings[1] / pos.couplings[0] == pytest.approx(17.484, rel=0.05)
    assert chain.fields == (0.0, 0.0, 0.0, 0.0)


def test_effective_chain_gate_fields(fig2_factors):
    assert effective_chain(fig2_factors, 50.0, 1.0, gate_fields=2.0).fields == (0, 2, 2, 0)
    assert effective_chain(fig2_factors, 50.0, 1.0, gate_fields=[1, 3]).fields == (0, 1, 3, 0)
    with pytest.raises(ParameterError):
        effective_chain(fig2_factors, 50.0, 1.0, gate_fields=[1, 2, 3])


def test_effective_chain_field_profile(fig2_factors):
    B = top_hat_field(100.0, 0.25)
    chain = effective_chain(fig2_factors, 50.0, 1.0, B=B)
    h = np.array(chain.fields)
    # ports sit in the side wells, the two gate atoms in the central well
    assert abs(h[0]) < 0.05 and abs(h[3]) < 0.05
    # a few percent of the gate atoms' weight leaks past the top-hat edges
    assert np.all((h[1:3] > 1.85) & (h[1:3] <= 2.0))
    assert h[1] == pytest.approx(h[2], rel=0.01)
    uniform = ordered_field_average(fig2_factors.spectrum, 4, lambda x: np.full_like(x, 3.0))
    np.testing.assert_allclose(uniform, 3.0, rtol=1e-12)


def test_effective_chain_validation(fig2_factors):
    for kappa in (0.0, -1.0):
        with pytest.raises(ParameterError):
            effective_chain(fig2_factors, 50.0, kappa)
    with pytest.raises(ParameterError):
        effective_chain(fig2_factors, 0.0, 1.0)
    with pytest.warns(ConfigurationWarning):
        effective_chain(fig2_factors, 2.0, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        effective_chain(fig2_factors, 5.0, 1.0)
    bare = GeometricFactors((1.0, 2.0, 1.0), (0, 0, 0), 4, "quadrature", 1.0)
    with pytest.raises(ParameterError):
        effective_chain(bare, 50.0, 1.0, B=top_hat_field(1.0, 0.1))


# --- sweeps ---------------------------------------------------------------------------------------


def test_sweep_continues_past_errors():
    points = coupling_ratio_sweep(FIG2, "U", [0.0, 200.0], quad_points=20, norm_points=20)
    assert all(math.isnan(p.ratio) and p.message for p in points)
    points = coupling_ratio_sweep(FIG2, "u", [0.0, 200.0])
    assert points[0].ratio == pytest.approx(0.4825, abs=1e-3)
    assert points[1].ratio == pytest.approx(17.485, abs=1e-2)
    with pytest.raises(ParameterError):
        coupling_ratio_sweep(FIG2, "a", [1.0])


def test_v0_robustness_u_sensitivity():
    v = coupling_ratio_sweep(FIG2, "V0", [495.0, 505.0])
    u = coupling_ratio_sweep(FIG2, "U", [198.0, 202.0])
    dv = abs(v[1].ratio - v[0].ratio) / 17.485
    du = abs(u[1].ratio - u[0].ratio) / 17.485
    assert dv < 0.02 < du
