import math

import numpy as np
import pytest

from mcflow.grid import (
    FluxField,
    RadialGrid,
    ScalarField,
    TensorGrid2D,
    divergence,
    divergence_radial,
    gradient,
    integrate,
    integrate_ball,
    unit_ball_volume,
)


@pytest.fixture
def ball3():
    return RadialGrid.ball(3, 1.0, 2049)


def test_radial_grid_nodes_and_spacing():
    g = RadialGrid.annulus(3, 0.1, 1.0, 10)
    assert g.nodes[0] == 0.1 and g.nodes[-1] == 1.0
    assert np.all(np.diff(g.nodes) > 0)
    assert g.spacing == pytest.approx(0.1)
    assert list(g.boundary_nodes) == [0, 9]
    assert list(g.boundary_normals) == [-1.0, 1.0]


@pytest.mark.parametrize("args", [(1, 0, 1, 5), (3, 0.5, 0.5, 5), (3, 0, 1, 2), (2.5, 0, 1, 5), (3, -1, 1, 5)])
def test_radial_grid_rejects_bad_parameters(args):
    with pytest.raises(ValueError):
        RadialGrid(*args)


def test_dual_cell_weights_are_exact_volumes():
    for N in (2, 3, 4):
        g = RadialGrid.ball(N, 2.0, 33)
        assert g.weights.sum() == pytest.approx(unit_ball_volume(N) * 2.0**N, rel=1e-13)
        a = RadialGrid.annulus(N, 0.5, 2.0, 33)
        assert a.weights.sum() == pytest.approx(unit_ball_volume(N) * (2.0**N - 0.5**N), rel=1e-13)


def test_gradient_of_affine_and_constant(ball3):
    r = ball3.nodes
    g = gradient(ScalarField(ball3, r)).components
    assert np.allclose(g[1:], 1.0, atol=1e-12)
    assert np.allclose(gradient(ScalarField(ball3, 5.0)).components, 0.0)


def test_gradient_of_quadratic_is_exact():
    g = RadialGrid.ball(3, 1.0, 1025)
    d = gradient(ScalarField(g, g.nodes**2)).components
    i = np.searchsorted(g.nodes, 0.5)
    assert g.nodes[i] == 0.5
    assert d[i] == pytest.approx(1.0, abs=1e-10)


def test_divergence_of_position_field(ball3):
    div = divergence_radial(FluxField(ball3, ball3.nodes), 3).values
    assert np.allclose(div, 3.0, atol=1e-8)


def test_divergence_of_rational_flux_matches_closed_form():
    # F = -r^2 / sqrt(r^4 + 1): -div F = (4r + 2r^5) (1 + r^4)^(-3/2)
    g = RadialGrid.ball(3, 1.0, 2049)
    r = g.nodes
    F = FluxField(g, -r**2 / np.sqrt(r**4 + 1))
    i = np.searchsorted(r, 0.5)
    assert -divergence_radial(F).values[i] == pytest.approx(1.883218, abs=1e-3)


def test_divergence_of_power_family_flux():
    # z = -(1 + r^4)^(-1/2) is the flux of 1/r - 1; -div z = 2 / (r (1 + r^4)^(3/2))
    g = RadialGrid.annulus(3, 0.1, 1.0, 3601)
    r = g.nodes
    div = divergence_radial(FluxField(g, -1 / np.sqrt(1 + r**4))).values
    i = np.searchsorted(r, 0.5)
    assert r[i] == pytest.approx(0.5)
    assert -div[i] == pytest.approx(3.652301, abs=1e-3)
    assert np.abs(-div - 2 / (r * (1 + r**4) ** 1.5)).max() < 1e-3


def test_divergence_of_constant_field_on_annulus():
    g = RadialGrid.annulus(2, 0.5, 1.5, 101)
    div = divergence_radial(FluxField(g, np.full(101, 2.0))).values
    assert np.allclose(div, 2.0 / g.nodes, atol=1e-12)


def test_divergence_rejects_field_singular_at_origin(ball3):
    with pytest.raises(ValueError):
        divergence_radial(FluxField(ball3, np.ones(ball3.node_count)))


def test_integrate_ball_examples():
    assert integrate_ball(ScalarField(RadialGrid.ball(3, 1, 65), 1.0)) == pytest.approx(4 * math.pi / 3, abs=1e-12)
    assert integrate_ball(ScalarField(RadialGrid.ball(2, 1, 65), 1.0)) == pytest.approx(math.pi, abs=1e-12)
    g = RadialGrid.ball(3, 1, 8193)
    assert integrate_ball(g.sample(lambda r: r)) == pytest.approx(math.pi, abs=1e-6)


def test_integration_error_is_second_order():
    errs = []
    for n in (257, 513, 1025):
        g = RadialGrid.ball(3, 1, n)
        errs.append(abs(integrate_ball(g.sample(lambda r: r)) - math.pi))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


def test_radial_laplacian_converges_at_second_order():
    # u = r^4: Laplacian in R^3 is 4*5 r^2 = 20 r^2
    errs = []
    for n in (129, 257, 513):
        g = RadialGrid.annulus(3, 0.2, 1.0, n)
        lap = divergence_radial(gradient(g.sample(lambda r: r**4))).values
        errs.append(np.abs(lap - 20 * g.nodes**2)[3:-3].max())
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.1)


def test_operations_do_not_modify_inputs(ball3):
    u = ball3.sample(lambda r: r**2)
    before = u.values.copy()
    divergence(gradient(u))
    integrate(u)
    assert np.array_equal(u.values, before)
    with pytest.raises(ValueError):
        u.values[0] = 1.0


def test_scalar_field_validation(ball3):
    with pytest.raises(ValueError):
        ScalarField(ball3, np.zeros(3))
    with pytest.raises(ValueError):
        ScalarField(ball3, np.full(ball3.node_count, np.nan))


def test_tensor_grid_rectangle_normals():
    g = TensorGrid2D.rectangle(6, 5, 0.1)
    assert g.shape == (5, 6)
    assert np.allclose(np.linalg.norm(g.boundary_normals, axis=1), 1.0, atol=1e-12)
    # the node left of the mask points in -x
    k = [tuple(i) for i in g.boundary_index].index((2, 0))
    assert np.allclose(g.boundary_normals[k], [-1.0, 0.0])
    assert g.volume == pytest.approx(4 * 3 * 0.01)


def test_tensor_grid_disk_has_unit_normals_and_area():
    g = TensorGrid2D.disk(81, 1.0)
    assert np.allclose(np.linalg.norm(g.boundary_normals, axis=1), 1.0, atol=1e-12)
    assert g.volume == pytest.approx(math.pi, rel=2e-2)


def test_tensor_grid_rejects_disconnected_mask():
    mask = np.zeros((7, 7), bool)
    mask[1:3, 1:3] = True
    mask[4:6, 4:6] = True
    with pytest.raises(ValueError, match="connected"):
        TensorGrid2D(mask, 0.1)


def test_tensor_grid_rejects_mask_on_outer_ring():
    mask = np.ones((5, 5), bool)
    with pytest.raises(ValueError):
        TensorGrid2D(mask, 0.1)


def test_planar_divergence_of_position_field():
    g = TensorGrid2D.rectangle(9, 9, 0.25)
    X, Y = g.coordinates
    F = FluxField(g, np.stack([X, Y], axis=-1))
    assert np.allclose(divergence(F).values, 2.0)
