import math

import numpy as np
import pytest

from conftest import grid_hat, random_lattice_mesh
from hstv.errors import ExtremalError
from hstv.extremal import (
    constrained_space,
    decompose,
    find_extremal_in_support,
    is_extremal,
    normalize_mod_affine,
    perturbation_identity_check,
    rigidity_check,
    support_reduce,
)
from hstv.htv import htv_cpwl, htv_support, support_edges_by_jump
from hstv.mesh import CpwlFunction, uniform_diagonal_mesh


def two_hats(scale_a=1.0, scale_b=1.0):
    """Two unit hats with disjoint supports on a 6x6 grid; both extremal."""
    mesh = uniform_diagonal_mesh(6)
    va = np.zeros(mesh.n_vertices)
    vb = np.zeros(mesh.n_vertices)
    va[2 * 7 + 2] = 1.0
    vb[4 * 7 + 2] = 1.0
    return (CpwlFunction(mesh, va * scale_a),
            CpwlFunction(mesh, vb * scale_b),
            CpwlFunction(mesh, va * scale_a + vb * scale_b))


class TestQuotient:
    def test_affine_input_maps_to_zero(self):
        mesh = uniform_diagonal_mesh(3)
        fv = mesh.float_vertices
        g = CpwlFunction(mesh, 1.0 + 2.0 * fv[:, 0] - 0.7 * fv[:, 1])
        rep = normalize_mod_affine(g)
        assert np.max(np.abs(rep.values)) <= 1e-12
        assert rep.affine == pytest.approx((1.0, 2.0, -0.7))

    def test_affine_shift_invariance_and_energy(self):
        g = grid_hat(4, 2, 2)
        fv = g.mesh.float_vertices
        shifted = g.with_values(g.values + 3.0 - fv[:, 0] + 5.0 * fv[:, 1])
        r1 = normalize_mod_affine(g)
        r2 = normalize_mod_affine(shifted)
        assert np.max(np.abs(r1.values - r2.values)) <= 1e-12
        assert htv_cpwl(r1.cpwl).total == pytest.approx(htv_cpwl(g).total, abs=1e-10)

    def test_projection_is_zero(self):
        rng = np.random.default_rng(19)
        mesh = random_lattice_mesh(rng)
        g = CpwlFunction(mesh, rng.standard_normal(mesh.n_vertices))
        rep = normalize_mod_affine(g)
        fv = mesh.float_vertices
        a = np.stack([np.ones(len(fv)), fv[:, 0], fv[:, 1]], axis=1)
        coef, *_ = np.linalg.lstsq(a, rep.values, rcond=None)
        assert np.max(np.abs(coef)) <= 1e-12


class TestConstrainedSpace:
    def test_full_support_dimension(self, pyramid):
        space = constrained_space(pyramid.mesh, set(pyramid.mesh.interior_edges))
        assert space.dim == pyramid.mesh.n_vertices - 3

    def test_empty_support_dimension(self):
        mesh = uniform_diagonal_mesh(3)
        space = constrained_space(mesh, set())
        assert space.dim == 0

    def test_hat_support_dimension_is_one(self):
        g = grid_hat(4, 2, 2)
        space = constrained_space(g.mesh, support_edges_by_jump(g))
        assert space.dim == 1
        # the line is spanned by the hat itself
        rep = normalize_mod_affine(g)
        gn = rep.values / np.linalg.norm(rep.values)
        assert abs(abs(gn @ space.basis[:, 0]) - 1.0) <= 1e-9

    def test_rejects_non_interior_edges(self):
        mesh = uniform_diagonal_mesh(2)
        with pytest.raises(ExtremalError):
            constrained_space(mesh, {(0, 1), (999, 1000)})


class TestIsExtremal:
    def test_hat_is_extremal(self):
        verdict, cert = is_extremal(grid_hat(4, 2, 2))
        assert verdict
        assert cert.space.dim == 1
        assert cert.witness is None

    def test_negation_is_extremal_too(self):
        g = grid_hat(4, 2, 2)
        assert is_extremal(g.with_values(-g.values))[0]

    def test_two_hats_not_extremal_with_witness(self):
        a, b, two = two_hats()
        verdict, cert = is_extremal(two)
        assert not verdict
        assert cert.space.dim == 2
        w = cert.witness
        assert w is not None
        sw = support_edges_by_jump(two.with_values(w))
        assert sw <= (support_edges_by_jump(a) | support_edges_by_jump(b))
        rep = normalize_mod_affine(two)
        gn = rep.values / np.linalg.norm(rep.values)
        assert abs(w @ gn) < 0.99

    def test_affine_rejected(self):
        mesh = uniform_diagonal_mesh(2)
        fv = mesh.float_vertices
        with pytest.raises(ExtremalError):
            is_extremal(CpwlFunction(mesh, 2.0 * fv[:, 0] + 1.0))


class TestPerturbationIdentity:
    def test_collinear_direction(self):
        g = grid_hat(4, 2, 2)
        assert perturbation_identity_check(g, g) <= 1e-12

    def test_hat_with_its_line(self):
        g = grid_hat(4, 2, 2)
        _, cert = is_extremal(g)
        h = g.with_values(cert.space.basis[:, 0])
        assert perturbation_identity_check(g, h) <= 1e-10

    def test_two_hat_additivity(self):
        a, b, two = two_hats()
        assert perturbation_identity_check(two, a) <= 1e-10
        assert perturbation_identity_check(two, b) <= 1e-10

    def test_zero_perturbation(self):
        g = grid_hat(4, 2, 2)
        assert perturbation_identity_check(g, g.with_values(np.zeros_like(g.values))) == 0.0


class TestSupportReduce:
    def test_two_hat_single_step(self):
        a, b, two = two_hats()
        h, lam, nxt = support_reduce(two)
        sn = support_edges_by_jump(nxt.cpwl)
        assert sn in (support_edges_by_jump(a), support_edges_by_jump(b))

    def test_extremal_input_rejected(self):
        with pytest.raises(ExtremalError):
            support_reduce(grid_hat(4, 2, 2))

    def test_strictly_decreasing_support_length(self):
        rng = np.random.default_rng(20)
        mesh = random_lattice_mesh(rng, n_interior=8)
        g = CpwlFunction(mesh, rng.standard_normal(mesh.n_vertices))
        rep = normalize_mod_affine(g)
        lengths = [htv_support(rep.cpwl, 1e-10).total_length]
        for _ in range(len(mesh.interior_edges) + 2):
            verdict, _ = is_extremal(rep.cpwl)
            if verdict:
                break
            _, _, rep = support_reduce(rep)
            lengths.append(htv_support(rep.cpwl, 1e-10).total_length)
        else:
            pytest.fail("reduction did not reach an extremal function")
        assert all(b < a for a, b in zip(lengths, lengths[1:]))


class TestFindExtremal:
    def test_hat_returns_itself_normalized(self):
        g = grid_hat(4, 2, 2)
        t = find_extremal_in_support(g)
        total = htv_cpwl(t.cpwl).total
        assert abs(total - 1.0) <= 1e-12
        rep = normalize_mod_affine(g)
        expected = rep.values / htv_cpwl(g).total
        sign = math.copysign(1.0, t.values @ expected)
        assert np.max(np.abs(sign * t.values - expected)) <= 1e-10

    def test_two_hat_returns_one_hat(self):
        a, b, two = two_hats()
        t = find_extremal_in_support(two)
        st = support_edges_by_jump(t.cpwl)
        assert st in (support_edges_by_jump(a), support_edges_by_jump(b))

    def test_random_result_is_extremal(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            mesh = random_lattice_mesh(rng)
            g = CpwlFunction(mesh, rng.standard_normal(mesh.n_vertices))
            t = find_extremal_in_support(g)
            assert is_extremal(t.cpwl)[0]
            assert support_edges_by_jump(t.cpwl) <= support_edges_by_jump(g)


class TestDecompose:
    def test_scaled_hat_single_term(self):
        g = grid_hat(4, 2, 2)
        total = htv_cpwl(g).total
        g3 = g.with_values(3.0 * g.values / total)  # energy exactly 3
        dec = decompose(g3)
        assert len(dec.terms) == 1
        assert dec.coefficients[0] == pytest.approx(3.0, abs=1e-10)

    def test_two_hat_coefficients(self):
        a, b, two = two_hats(2.0, 5.0)
        dec = decompose(two)
        assert len(dec.terms) == 2
        ha = htv_cpwl(a).total  # energy of the 2x hat
        hb = htv_cpwl(b).total  # energy of the 5x hat
        assert sorted(dec.coefficients) == pytest.approx(sorted((ha, hb)), abs=1e-9)
        assert dec.coefficient_sum == pytest.approx(ha + hb, abs=1e-9)

    def test_random_decompositions(self):
        rng = np.random.default_rng(22)
        for _ in range(20):
            mesh = random_lattice_mesh(rng)
            g = CpwlFunction(mesh, rng.standard_normal(mesh.n_vertices))
            total = htv_cpwl(g).total
            dec = decompose(g, 1e-8)
            assert dec.residual <= 1e-8
            assert dec.value_residual <= 1e-8
            assert abs(dec.coefficient_sum - total) <= 1e-8
            recon = sum(c * t.values for c, t in zip(dec.coefficients, dec.terms))
            rep = normalize_mod_affine(g)
            assert np.max(np.abs(recon - rep.values)) <= 1e-8
            for t in dec.terms:
                assert is_extremal(t.cpwl)[0]

    def test_affine_rejected(self):
        mesh = uniform_diagonal_mesh(2)
        fv = mesh.float_vertices
        with pytest.raises(ExtremalError):
            decompose(CpwlFunction(mesh, fv[:, 0]))


class TestRigidity:
    def test_collinear(self):
        g = grid_hat(4, 2, 2)
        assert rigidity_check(g, g.with_values(2.0 * g.values))

    def test_disjoint_supports(self):
        a, b, _ = two_hats(2.0, 5.0)
        assert rigidity_check(a, b)

    def test_cancellation_violates_precondition(self):
        g = grid_hat(4, 2, 2)
        with pytest.raises(ExtremalError):
            rigidity_check(g, g.with_values(-g.values))

    def test_meshes_must_match(self):
        g = grid_hat(4, 2, 2)
        h = grid_hat(2, 1, 1)
        with pytest.raises(ExtremalError):
            rigidity_check(g, h)
