import numpy as np
import pytest

from porofrac import cracks
from porofrac.errors import InvalidArgumentError
from porofrac.mesh import build_structured_grid, distance_to_segment


def painted(mesh, segments, width):
    """Nodal field equal to 1 within ``width`` of any segment, else 0."""
    phi = np.zeros(mesh.n_nodes)
    for seg in segments:
        phi[distance_to_segment(mesh.nodes, seg) <= width] = 1.0
    return phi


FULL = build_structured_grid(1.0, 1.0, 100, 100, origin=(-0.5, -0.5))
H = 0.01


class TestArcs:
    @pytest.mark.parametrize("flags,expected", [([], 0), ([0, 0, 0], 0), ([1, 1, 1], 1),
                                                ([1, 0, 1], 1), ([0, 1, 0, 1, 1, 0], 2)])
    def test_count_arcs(self, flags, expected):
        assert cracks.count_arcs(flags) == expected

    def test_straight_crack_has_two_tips(self):
        phi = painted(FULL, [((-0.3, 0.0), (0.3, 0.0))], 0.6 * H)
        f = cracks.grid_field(FULL, phi)
        assert cracks.branch_tip_count(f, (0.0, 0.0), 0.05) == 2

    def test_forked_crack_has_four_tips(self):
        segs = [((-0.1, 0.0), (0.1, 0.0))]
        for s in (-1, 1):
            segs += [((s * 0.1, 0.0), (s * 0.35, 0.2)), ((s * 0.1, 0.0), (s * 0.35, -0.2))]
        f = cracks.grid_field(FULL, painted(FULL, segs, 0.6 * H))
        assert cracks.branch_tip_count(f, (0.0, 0.0), 0.15) == 4

    def test_empty_field(self):
        f = cracks.grid_field(FULL, np.zeros(FULL.n_nodes))
        assert cracks.branch_tip_count(f, (0.0, 0.0), 0.1) == 0

    def test_bad_radii(self):
        f = cracks.grid_field(FULL, np.zeros(FULL.n_nodes))
        with pytest.raises(InvalidArgumentError):
            cracks.branch_tip_count(f, (0.0, 0.0), 0.5, 0.2)


class TestMirroring:
    def test_quarter_model_matches_full_field(self):
        quarter = build_structured_grid(0.5, 0.5, 50, 50)
        segs = [((0.0, 0.0), (0.1, 0.0)), ((0.1, 0.0), (0.35, 0.2))]
        fq = cracks.grid_field(quarter, painted(quarter, segs, 0.6 * H), True, True)
        assert fq.values.shape == (101, 101)
        np.testing.assert_allclose(fq.xs, np.linspace(-0.5, 0.5, 101), atol=1e-12)
        np.testing.assert_array_equal(fq.values, fq.values[::-1])
        np.testing.assert_array_equal(fq.values, fq.values[:, ::-1])
        assert cracks.branch_tip_count(fq, (0.0, 0.0), 0.15) == 4

    def test_shape_check(self):
        with pytest.raises(InvalidArgumentError):
            cracks.grid_field(FULL, np.zeros(3))


class TestConnectivity:
    def test_joined_and_separate(self):
        joined = painted(FULL, [((-0.1, 0.0), (0.2, 0.0)), ((0.2, -0.1), (0.2, 0.1))], 0.6 * H)
        apart = painted(FULL, [((-0.1, 0.0), (0.1, 0.0)), ((0.2, -0.1), (0.2, 0.1))], 0.6 * H)
        assert cracks.connected(cracks.grid_field(FULL, joined), (0.0, 0.0), (0.2, 0.05))
        assert not cracks.connected(cracks.grid_field(FULL, apart), (0.0, 0.0), (0.2, 0.05))

    def test_extent_and_farthest_point(self):
        seg = ((-0.05, 0.0), (0.05, 0.0))
        phi = painted(FULL, [((-0.05, 0.0), (0.25, 0.0)), ((0.4, 0.4), (0.45, 0.4))], 0.6 * H)
        f = cracks.grid_field(FULL, phi)
        assert cracks.extent_from_segment(f, seg) == pytest.approx(0.2, abs=H)
        np.testing.assert_allclose(cracks.farthest_point(f, seg), [0.25, 0.0], atol=H)

    def test_empty_component(self):
        f = cracks.grid_field(FULL, np.zeros(FULL.n_nodes))
        assert cracks.extent_from_segment(f, ((0, 0), (0.1, 0))) == 0.0
        assert cracks.farthest_point(f, ((0, 0), (0.1, 0))) is None


class TestTimeSeries:
    def test_initiation_time(self):
        t = np.arange(6.0)
        assert cracks.initiation_time(t, [0.1, 0.1, 0.12, 0.3, 0.5, 0.6], 0.05) == 3.0
        assert cracks.initiation_time(t, np.full(6, 0.1), 0.05) is None
        assert cracks.initiation_time([], [], 0.05) is None

    def test_pressure_drop(self):
        t = np.arange(10.0)
        p = np.array([1, 2, 3, 4, 5, 2, 2, 1, 1, 1], dtype=float)
        drop, when = cracks.pressure_drops(t, p, window=1.0)
        assert drop == pytest.approx(0.6) and when == 4.0
        drop, _ = cracks.pressure_drops(t, p, window=3.0)
        assert drop == pytest.approx(0.8)

    def test_monotone_rise_has_no_drop(self):
        t = np.linspace(0, 1, 50)
        assert cracks.pressure_drops(t, t + 1.0, 0.1) == (0.0, None)
