import numpy as np
import pytest

from conftest import rng_for
from stitchkit import models
from stitchkit.errors import SingularPoint
from stitchkit.flows import (LoopSpec, ScalarField, circle_action, cohomology_jump, discrepancy, fd_dbar,
                             ham_field, integrate, invariance_check, is_unipotent_conjugate, monodromy,
                             symplectic_pairing, transvection_form)


def mu_field():
    return models.make("focus_focus").mu


def test_mu_flow_rotates_first_coordinate_forward():
    z0 = np.array([1.0 + 0j, 0.5 + 0j])
    traj = integrate(mu_field(), z0, 0.3)
    assert np.allclose(traj.end, circle_action(z0, 0.3), atol=1e-9)
    full = integrate(mu_field(), z0, 2 * np.pi)
    assert np.allclose(full.end, z0, atol=1e-8)


def test_constant_and_linear_fields():
    const = ScalarField(lambda z: np.zeros(z.shape[:-1]) + 2.0)
    z = np.array([0.3 + 0.1j, -0.2j])
    assert np.allclose(ham_field(const, z), 0.0)
    assert np.allclose(integrate(const, z, 1.0).end, z)
    x1 = ScalarField(lambda z: z[..., 0].real)
    v = ham_field(x1, z)
    # unit speed along the y_1 axis (up to the global sign convention)
    assert np.allclose(np.abs(v), [1.0, 0.0], atol=1e-8) and abs(v[0].real) < 1e-8
    end = integrate(x1, z, 0.5).end
    assert np.allclose(end - z, 0.5 * v, atol=1e-12)


def test_analytic_derivatives_match_finite_differences():
    rng = rng_for(0)
    for name in ("focus_focus", "leg", "amoeba"):
        ex = models.make(name)
        z = models.random_seam_points(ex, 3, rng) * 1.05
        for f in ex.plus:
            assert np.max(np.abs(f.dbar(z) - fd_dbar(f.value, z))) <= 1e-6


@pytest.mark.parametrize("name", ["focus_focus", "leg", "amoeba"])
def test_discrepancy_matches_closed_form(name):
    ex = models.make(name)
    z = models.random_seam_points(ex, 20, rng_for(4))
    d = discrepancy(ex, z)
    assert np.max(d.residual) <= 1e-7
    assert np.max(np.abs(d.a - models.closed_form_a(ex, z))) <= 1e-6
    rotated = discrepancy(ex, circle_action(z, 0.9))
    assert np.max(np.abs(rotated.a - d.a)) <= 1e-8


def test_printed_focus_focus_formula_disagrees():
    ex = models.make("focus_focus")
    z = models.random_seam_points(ex, 20, rng_for(4))
    assert np.max(np.abs(discrepancy(ex, z).a - models.closed_form_a(ex, z, "printed"))) > 1e-2


def test_discrepancy_singular_point():
    with pytest.raises(SingularPoint):
        discrepancy(models.make("focus_focus"), np.array([[0j, 0j]]))


def test_invariance_check():
    ex = models.make("leg")
    z = models.random_seam_points(ex, 1, rng_for(5))[0]
    assert invariance_check(ex, z, 0.0) and invariance_check(ex, z, 2.1)


def test_fields_commute_off_the_seam():
    rng = rng_for(6)
    for name in ("focus_focus", "amoeba"):
        ex = models.make(name)
        z = models.random_seam_points(ex, 5, rng)
        for side, scale in (("plus", 1.1), ("minus", 0.9)):
            w = z.copy()
            w[:, 0] *= scale
            v = ex.fields(side).fields_at(w)
            for i in range(ex.n):
                for j in range(ex.n):
                    assert np.max(np.abs(symplectic_pairing(v[:, i], v[:, j]))) <= 1e-8


def test_energy_conservation_along_flow():
    ex = models.make("focus_focus")
    z0 = ex.point_on_fibre(np.array([0.4, 0.5]), np.array([0.3, 0.3]))
    traj = integrate(ex.plus[1], z0, 0.5, steps=200)
    assert np.max(np.abs(ex.mu(traj.points) - ex.mu(z0))) <= 1e-7


def test_unipotent_helpers():
    assert is_unipotent_conjugate([[1, 1], [0, 1]]) and is_unipotent_conjugate([[1, -1], [0, 1]])
    assert not is_unipotent_conjugate(np.eye(2, dtype=int))
    assert list(transvection_form(np.array([[1, 0, -1], [0, 1, 0], [0, 0, 1]]))) == [0, 0, -1]
    assert transvection_form(np.array([[1, 0], [1, 1]])) is None


def test_contractible_loop_gives_identity():
    ex = models.make("focus_focus")
    loop = LoopSpec((0.0, 1.0), (1.0, 0.0), (0.0, 1.0), 0.4, samples=32)
    res = monodromy(ex, loop, steps=48)
    assert np.array_equal(res.matrix, np.eye(2, dtype=int)) and res.snap_error <= 1e-3


def test_focus_focus_monodromy():
    ex = models.make("focus_focus")
    res = monodromy(ex, LoopSpec((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), 0.5))
    assert is_unipotent_conjugate(res.matrix) and res.snap_error <= 1e-3


def test_focus_focus_cohomology_jump():
    ex = models.make("focus_focus")
    same = cohomology_jump(ex, (0.0, 1.0), (0.0, 1.0))
    assert list(same.integers) == [0] and same.snap_error <= 1e-3
    across = cohomology_jump(ex, (0.0, 1.0), (0.0, -1.0))
    assert [abs(v) for v in across.integers] == [1] and across.snap_error <= 1e-3
