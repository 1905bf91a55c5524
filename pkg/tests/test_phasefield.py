import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from porofrac.constitutive import MaterialParams
from porofrac.errors import InvalidArgumentError, InvalidStateError
from porofrac.mesh import build_structured_grid
from porofrac.phasefield import (PhaseBC, assemble_phase_system, crack_energy, pins_along_segment,
                                 seed_crack_history, seed_value, solve_dirichlet, solve_phase,
                                 update_history)

MAT = MaterialParams(E=1.0e9, nu=0.3, Gc=1.0, l0=0.01)


def pinned_strip(h_over_l0=0.25):
    """Strip with phi pinned to 1 on the line x = 0, zero history elsewhere."""
    l0 = MAT.l0
    h = h_over_l0 * l0
    W, Ly = 20 * l0, 10 * l0
    m = build_structured_grid(W, Ly, int(round(W / h)), int(round(Ly / h)), origin=(-W / 2, 0.0))
    pins = pins_along_segment(m, ((0.0, 0.0), (0.0, Ly)), 1.0, tol=1e-9)
    phi = solve_phase(assemble_phase_system(m, np.zeros(m.wdetJ.shape), MAT, pins))
    return m, phi, Ly


class TestSeeding:
    def test_seed_on_segment(self):
        assert seed_value(0.0, MAT) == pytest.approx(1e3 * 1.0 / (2 * 0.01))

    def test_seed_vanishes_at_half_width(self):
        assert seed_value(0.5 * MAT.l0, MAT) == pytest.approx(0.0, abs=1e-9)
        assert seed_value(0.6 * MAT.l0, MAT) == 0.0

    def test_table_value(self):
        mat = MaterialParams(E=210e9, nu=0.3, Gc=1e-2, l0=4e-3)
        assert seed_value(0.0, mat, B=1e3) == pytest.approx(1250.0)

    def test_seeds_compose_by_max(self):
        qp = np.array([[0.0, 0.0], [0.5, 0.0], [1.0, 0.002]])
        H = seed_crack_history(np.zeros(3), qp, ((0.0, 0.0), (0.1, 0.0)), MAT)
        H2 = seed_crack_history(H, qp, ((0.9, 0.0), (1.1, 0.0)), MAT)
        np.testing.assert_allclose(H2, np.maximum(H, seed_value([1.0, 0.5, 0.002], MAT)))
        assert H2[1] == 0.0

    def test_rejects_nonpositive_B(self):
        with pytest.raises(InvalidArgumentError):
            seed_crack_history(np.zeros(1), np.zeros((1, 2)), ((0, 0), (1, 0)), MAT, B=0.0)


class TestHistory:
    @pytest.mark.parametrize("H,psi,expected", [(5.0, 3.0, 5.0), (5.0, 7.0, 7.0), (0.0, 0.0, 0.0)])
    def test_update(self, H, psi, expected):
        assert update_history(np.array([H]), np.array([psi]))[0] == expected

    def test_negative_energy_rejected(self):
        with pytest.raises(InvalidStateError):
            update_history(np.zeros(1), np.array([-1e-9]))

    @given(hnp.arrays(float, 8, elements=st.floats(0, 1e6)),
           st.lists(hnp.arrays(float, 8, elements=st.floats(0, 1e6)), min_size=1, max_size=5))
    @settings(max_examples=100, deadline=None)
    def test_non_decreasing(self, H0, loads):
        H = H0
        for psi in loads:
            H_new = update_history(H, psi)
            assert np.all(H_new >= H)
            H = H_new


class TestPhaseBC:
    def test_values_must_be_binary(self):
        with pytest.raises(InvalidArgumentError):
            PhaseBC([0, 1], [0.0, 0.5])

    def test_later_pins_override(self):
        bc = PhaseBC.merge(PhaseBC([0, 1, 2], 0.0), PhaseBC([2, 3], 1.0))
        got = dict(zip(bc.nodes.tolist(), bc.values.tolist()))
        assert got == {0: 0.0, 1: 0.0, 2: 1.0, 3: 1.0}


class TestPhaseSolve:
    def test_zero_history_gives_zero_field(self):
        m = build_structured_grid(0.1, 0.1, 5, 5)
        phi = solve_phase(assemble_phase_system(m, np.zeros(m.wdetJ.shape), MAT))
        np.testing.assert_array_equal(phi, 0.0)

    def test_system_is_symmetric_positive_definite(self):
        m = build_structured_grid(0.05, 0.05, 6, 6)
        H = np.random.default_rng(1).uniform(0, 100, m.wdetJ.shape)
        K = assemble_phase_system(m, H, MAT).matrix.toarray()
        np.testing.assert_allclose(K, K.T, atol=1e-14 * np.abs(K).max())
        assert np.linalg.eigvalsh(K).min() > 0

    def test_pins_hold_exactly(self):
        m, phi, _ = pinned_strip()
        pinned = np.abs(m.nodes[:, 0]) < 1e-12
        np.testing.assert_array_equal(phi[pinned], 1.0)
        assert phi.min() >= 0.0 and phi.max() <= 1.0

    def test_large_history_breaks_line(self):
        m = build_structured_grid(0.1, 0.1, 40, 40)
        H = seed_crack_history(np.zeros(m.wdetJ.shape), m.qp_xy, ((0.0, 0.05), (0.1, 0.05)), MAT)
        phi = solve_phase(assemble_phase_system(m, H, MAT))
        on_line = np.abs(m.nodes[:, 1] - 0.05) < 1e-12
        assert phi[on_line].min() > 0.99

    def test_exponential_profile(self):
        """Relative deviation from exp(-|x|/l0) below 5% for l0 <= |x| <= 5 l0."""
        m, phi, _ = pinned_strip(0.25)
        x = np.abs(m.nodes[:, 0])
        sel = (x >= MAT.l0 - 1e-12) & (x <= 5 * MAT.l0 + 1e-12)
        rel = np.abs(phi[sel] / np.exp(-x[sel] / MAT.l0) - 1.0)
        assert rel.max() < 0.05

    def test_crack_energy_matches_griffith(self):
        m, phi, length = pinned_strip(0.25)
        assert crack_energy(m, phi, MAT) == pytest.approx(MAT.Gc * length, rel=0.10)

    def test_solution_residual(self):
        m = build_structured_grid(0.1, 0.1, 20, 20)
        H = seed_crack_history(np.zeros(m.wdetJ.shape), m.qp_xy, ((0.02, 0.05), (0.08, 0.05)), MAT)
        sys_ = assemble_phase_system(m, H, MAT)
        phi = solve_dirichlet(sys_)
        r = sys_.matrix @ phi - sys_.rhs
        assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(sys_.rhs)

    def test_pins_along_segment(self):
        m = build_structured_grid(1.0, 1.0, 4, 4)
        bc = pins_along_segment(m, ((0.0, 0.5), (1.0, 0.5)))
        assert len(bc.nodes) == 5
        np.testing.assert_allclose(m.nodes[bc.nodes, 1], 0.5)
