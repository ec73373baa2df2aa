
import numpy as np
import pytest

import flockstab as fs
from flockstab.errors import ConfigError, DomainError
from flockstab.jacobians import (h_block, kernel_vectors_z, load_stationary,
                                 rotate_positions, save_stationary)

from conftest import well_separated_positions
from test_linalg import match_complex_sets


def member_at(xhat, spec, params, angle=0.3):
    residual = float(np.abs(fs.aggregation_rhs(spec, xhat)).max())
    config = fs.StationaryConfig(xhat, residual, spec)
    return fs.flock_member(config, params, angle)


def fd_jacobian(fn, y0, h=1e-5):
    y0 = np.asarray(y0, dtype=float)
    n = y0.size
    f0 = fn(y0)
    J = np.empty((f0.size, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (fn(y0 + e) - fn(y0 - e)) / (2 * h)
    return J


class TestAssembleG:
    def test_matches_finite_difference_jacobian(self):
        spec = fs.morse()
        xhat = well_separated_positions(10, 42)
        config = fs.StationaryConfig(xhat, 0.0, spec)
        G = fs.assemble_G(config)
        Gfd = fd_jacobian(lambda x: fs.aggregation_rhs(spec, x), xhat)
        assert np.abs(G - Gfd).max() / np.abs(G).max() < 1e-6

    def test_two_particle_block_form(self):
        spec = fs.morse()
        x2 = np.array([[0.0, 0.0], [1.3, 0.0]])
        config = fs.StationaryConfig(x2.ravel(), 0.0, spec)
        G = fs.assemble_G(config)
        H = fs.hess_W(spec, x2[0] - x2[1])
        np.testing.assert_array_equal(G[:2, 2:], H)
        np.testing.assert_array_equal(G[2:, :2], H)
        np.testing.assert_array_equal(G[:2, :2], -H)
        np.testing.assert_array_equal(G[2:, 2:], -H)

    def test_symmetric_and_column_zero_sum(self):
        config = fs.StationaryConfig(well_separated_positions(12, 3), 0.0,
                                     fs.generalized_morse())
        G = fs.assemble_G(config)
        assert np.array_equal(G, G.T)
        # per-coordinate column sums over particles cancel
        cols = G.reshape(12, 2, 12, 2).sum(axis=0)
        assert np.abs(cols).max() < 1e-12 * max(1.0, np.abs(G).max())

    def test_translations_always_in_kernel(self):
        config = fs.StationaryConfig(well_separated_positions(9, 5), 0.0,
                                     fs.morse())
        G = fs.assemble_G(config)
        w1, w2, _ = fs.kernel_vectors_w(config.xhat)
        norm = np.linalg.norm(G)
        assert np.linalg.norm(G @ w1) < 1e-12 * norm
        assert np.linalg.norm(G @ w2) < 1e-12 * norm

    def test_kernel_at_stationary_state(self, morse_n10):
        G = fs.assemble_G(morse_n10)
        w1, w2, w3 = fs.kernel_vectors_w(morse_n10.xhat)
        norm = np.linalg.norm(G)
        for w in (w1, w2, w3):
            assert np.linalg.norm(G @ w) < 1e-6 * norm


class TestKernelVectors:
    def test_single_particle_rotation(self):
        _, _, w3 = fs.kernel_vectors_w(np.array([2.0, 3.0]))
        np.testing.assert_array_equal(w3, [-3.0, 2.0])

    def test_translations_orthogonal(self):
        w1, w2, _ = fs.kernel_vectors_w(np.arange(10.0))
        assert w1 @ w2 == 0.0

    def test_rotation_orthogonal_to_positions(self):
        xhat = np.random.default_rng(0).normal(size=14)
        _, _, w3 = fs.kernel_vectors_w(xhat)
        assert abs(w3 @ xhat) < 1e-12


class TestAssembleF:
    def test_matches_finite_difference_jacobian(self, params):
        spec = fs.morse()
        n = 5
        xhat = well_separated_positions(n, 8)
        member = member_at(xhat, spec, params)
        F = fs.assemble_F(member, params)

        def packed_rhs(y):
            q = fs.MeanVelState(y[:2 * n], y[2 * n:4 * n], y[4 * n:])
            dq = fs.meanvel_rhs(spec, params, q)
            return np.concatenate([dq.xt, dq.vt, dq.m])

        q0 = np.concatenate([xhat, np.zeros(2 * n), member.m0])
        Ffd = fd_jacobian(packed_rhs, q0)
        assert np.abs(F - Ffd).max() / np.abs(F).max() < 1e-6

    def test_bottom_right_block_eigenvalues(self, params):
        member = member_at(well_separated_positions(4, 2), fs.morse(), params)
        F = fs.assemble_F(member, params)
        block = F[-2:, -2:]
        eig = np.sort(np.linalg.eigvalsh(block))
        np.testing.assert_allclose(eig, [-2.0 * params.alpha, 0.0], atol=1e-12)

    def test_velocity_coupling_axis_aligned(self, params):
        s = params.speed
        m0 = np.array([s, 0.0])
        coupling = 2.0 * params.beta * np.outer(m0, m0)
        np.testing.assert_allclose(coupling,
                                   [[2.0 * params.alpha, 0.0], [0.0, 0.0]],
                                   atol=1e-14)

    def test_speed_constraint_enforced(self, params):
        config = fs.StationaryConfig(well_separated_positions(3, 1), 0.0,
                                     fs.morse())
        bad = fs.FlockFamilyMember(config, np.array([1.0, 1.0]))
        with pytest.raises(DomainError):
            fs.assemble_F(bad, params)
        with pytest.raises(DomainError):
            fs.assemble_FBB(bad, params)


class TestBasisAndProjection:
    def test_constant_velocity_projects_to_mean(self):
        dv = np.tile([0.7, -0.2], 6)
        coords = fs.project_P(np.zeros(12), dv)
        np.testing.assert_allclose(coords[12:22], np.zeros(10), atol=1e-15)
        np.testing.assert_allclose(coords[22:], [0.7, -0.2])

    def test_consistent_velocity_passes_through(self):
        rng = np.random.default_rng(4)
        dv = rng.normal(size=(5, 2))
        dv -= dv.mean(axis=0)
        coords = fs.project_P(np.zeros(10), dv.ravel())
        np.testing.assert_allclose(coords[10:18], dv[:4].ravel(), atol=1e-14)
        np.testing.assert_allclose(coords[18:], np.zeros(2), atol=1e-14)

    @pytest.mark.parametrize("n", [2, 3, 6])
    def test_recombination_reproduces_projection(self, n):
        rng = np.random.default_rng(n)
        dx = rng.normal(size=2 * n)
        dv = rng.normal(size=2 * n)
        B = fs.basis_B(n)
        coords = fs.project_P(dx, dv)
        recombined = B @ coords
        dv2 = dv.reshape(n, 2)
        mean = dv2.mean(axis=0)
        expected = np.concatenate([dx, (dv2 - mean).ravel(), mean])
        assert np.abs(recombined - expected).max() < 1e-14

    def test_basis_requires_two_particles(self):
        with pytest.raises(DomainError):
            fs.basis_B(1)


class TestAssembleFBB:
    def test_change_of_basis_oracle(self, params):
        """F restricted to span(B) in coordinates, built by solving F b_i = B c."""
        n = 3
        member = member_at(well_separated_positions(n, 9), fs.morse(), params)
        F = fs.assemble_F(member, params)
        B = fs.basis_B(n)
        FBB = fs.assemble_FBB(member, params)
        oracle = np.empty((4 * n, 4 * n))
        for i in range(4 * n):
            image = F @ B[:, i]
            coeffs, residual, _, _ = np.linalg.lstsq(B, image, rcond=None)
            # span(B) invariance: the image must lie in the span
            assert np.linalg.norm(B @ coeffs - image) < 1e-10 * max(
                1.0, np.linalg.norm(F))
            oracle[:, i] = coeffs
        assert np.abs(FBB - oracle).max() < 1e-10

    def test_span_invariance_of_F(self, params):
        n = 4
        member = member_at(well_separated_positions(n, 14), fs.quasi_morse(),
                           params, angle=1.1)
        F = fs.assemble_F(member, params)
        B = fs.basis_B(n)
        Q, _ = np.linalg.qr(B)
        normF = np.linalg.norm(F)
        for i in range(B.shape[1]):
            image = F @ B[:, i]
            outside = image - Q @ (Q.T @ image)
            assert np.linalg.norm(outside) < 1e-10 * normF

    def test_kernel_vectors(self, morse_n10, params):
        member = fs.flock_member(morse_n10, params, 0.3)
        FBB = fs.assemble_FBB(member, params)
        z1, z2, z3, z4 = kernel_vectors_z(morse_n10.xhat, member.m0)
        norm = np.linalg.norm(FBB)
        for z in (z1, z2):
            assert np.linalg.norm(FBB @ z) < 1e-12 * norm
        assert np.linalg.norm(FBB @ z3) < 1e-6 * norm
        # zero in exact arithmetic; one rounding of the -2*beta factor remains
        assert np.abs(FBB @ z4).max() < 1e-15 * norm

    def test_block_separation(self, params):
        n = 4
        member = member_at(well_separated_positions(n, 6), fs.morse(), params)
        FBB = fs.assemble_FBB(member, params)
        m = 4 * n
        np.testing.assert_array_equal(FBB[: m - 2, m - 2:], np.zeros((m - 2, 2)))
        np.testing.assert_array_equal(FBB[m - 2:, : m - 2], np.zeros((2, m - 2)))
        expected = -2.0 * params.beta * np.outer(member.m0, member.m0)
        np.testing.assert_array_equal(FBB[m - 2:, m - 2:], expected)
        H = h_block(FBB)
        assert H.shape == (m - 2, m - 2)
        np.testing.assert_array_equal(H, FBB[: m - 2, : m - 2])

    def test_rotation_conjugates_spectrum(self, morse_n10, params):
        phi = 0.7
        member = fs.flock_member(morse_n10, params, 0.3)
        FBB = fs.assemble_FBB(member, params)
        rotated = fs.StationaryConfig(rotate_positions(morse_n10.xhat, phi),
                                      morse_n10.residual, morse_n10.spec)
        member_rot = fs.flock_member(rotated, params, 0.3 + phi)
        FBB_rot = fs.assemble_FBB(member_rot, params)
        ev = fs.general_eigenvalues(FBB).eigenvalues
        ev_rot = fs.general_eigenvalues(FBB_rot).eigenvalues
        assert match_complex_sets(ev, ev_rot) < 1e-8

    def test_relabeling_invariance(self, morse_n10, params):
        rng = np.random.default_rng(23)
        perm = rng.permutation(morse_n10.N)
        x2 = morse_n10.xhat.reshape(-1, 2)[perm]
        shuffled = fs.StationaryConfig(x2.ravel(), morse_n10.residual,
                                       morse_n10.spec)
        ev = fs.general_eigenvalues(
            fs.assemble_FBB(fs.flock_member(morse_n10, params), params)).eigenvalues
        ev_perm = fs.general_eigenvalues(
            fs.assemble_FBB(fs.flock_member(shuffled, params), params)).eigenvalues
        assert match_complex_sets(ev, ev_perm) < 1e-8


class TestStationaryFiles:
    def test_round_trip(self, tmp_path, morse_n10):
        path = tmp_path / "steady.json"
        save_stationary(path, morse_n10)
        loaded = load_stationary(path)
        np.testing.assert_array_equal(loaded.xhat, morse_n10.xhat)
        assert loaded.spec == morse_n10.spec
        assert loaded.residual == morse_n10.residual

    def test_checksum_detects_corruption(self, tmp_path, morse_n10):
        path = tmp_path / "steady.json"
        save_stationary(path, morse_n10)
        text = path.read_text()
        broken = text.replace(repr(float(morse_n10.xhat[0])),
                              repr(float(morse_n10.xhat[0]) + 1.0), 1)
        assert broken != text
        path.write_text(broken)
        with pytest.raises(ConfigError):
            load_stationary(path)

    def test_parse_error(self, tmp_path):
        path = tmp_path / "steady.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_stationary(path)
