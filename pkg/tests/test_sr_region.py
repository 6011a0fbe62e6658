import numpy as np
import pytest

from core_model import hamming
from empirical import dms_block_distribution
from errors import CapExceeded, NonStochasticRow
from sr_region import (
    SrPoint, SrRegion, TwoSidedChannel, brute_force_sr_region, conditional_second_stage, join_two_sided,
    region_points, single_stage_distortion, y_joint,
)
from wz_solver import make_code

RHO = hamming(2)


def duplicated(crossover):
    """Z equals Y, Y is a BSC output."""
    table = np.zeros((2, 2, 2))
    for x in range(2):
        for y in range(2):
            table[x, y, y] = crossover if x != y else 1.0 - crossover
    return TwoSidedChannel.of(table)


def independent(p_y, p_z):
    """Y and Z are independent BSC outputs of X."""
    def row(x, p):
        return np.array([1.0 - p, p]) if x == 0 else np.array([p, 1.0 - p])
    return TwoSidedChannel.of([np.outer(row(x, p_y), row(x, p_z)) for x in range(2)])


def test_join_two_sided_rows_are_stochastic():
    joint3 = join_two_sided(dms_block_distribution([0.5, 0.5], 2), independent(0.2, 0.1))
    assert joint3.conditional.shape == (4, 4, 4)
    assert joint3.conditional.sum(axis=(1, 2)) == pytest.approx([1.0] * 4)
    # block (0,1) to side blocks y=(0,1), z=(1,1)
    assert joint3.conditional[1, 1, 3] == pytest.approx(0.8 * 0.8 * 0.1 * 0.9)


def test_two_sided_channel_validation():
    with pytest.raises(NonStochasticRow):
        TwoSidedChannel.of([[[0.5, 0.2], [0.1, 0.1]], [[0.25, 0.25], [0.25, 0.25]]])


def test_no_refinement_rate_keeps_second_stage_on_u():
    joint3 = join_two_sided(dms_block_distribution([0.5, 0.5], 2), independent(0.2, 0.1))
    region = brute_force_sr_region(joint3, 0.5, 0.0, RHO, RHO)
    assert region.frontier
    for p in region.frontier:
        assert p.delta_rate <= 1e-9
        first = make_code(y_joint(joint3), RHO, p.u_map).code
        alone = conditional_second_stage(joint3, first, 1e6, RHO, RHO)
        assert p.d2 == pytest.approx(alone.d2, abs=1e-12)


def test_duplicated_side_information_refines_at_least_as_well():
    joint3 = join_two_sided(dms_block_distribution([0.5, 0.5], 2), duplicated(0.2))
    region = brute_force_sr_region(joint3, 0.5, 0.25, RHO, RHO)
    assert min(p.d2 for p in region.frontier) <= min(p.d1 for p in region.frontier) + 1e-12


def test_frontier_is_pareto_and_hull_is_convex():
    joint3 = join_two_sided(dms_block_distribution([0.6, 0.4], 2), independent(0.25, 0.05))
    region = brute_force_sr_region(joint3, 0.75, 0.5, RHO, RHO)
    d1 = [p.d1 for p in region.frontier]
    d2 = [p.d2 for p in region.frontier]
    assert d1 == sorted(d1)
    assert all(a > b for a, b in zip(d2, d2[1:]))
    for p in region.points:
        assert region.dominated(p.d1, p.d2)
    rows = region_points(region)
    assert set(rows[0]) == {"D1", "D2", "HU", "HVgU"}
    assert len(region.hull_frontier) <= len(region.frontier)


def test_first_stage_distortion_matches_single_stage():
    joint3 = join_two_sided(dms_block_distribution([0.5, 0.5], 1), independent(0.2, 0.1))
    assert single_stage_distortion(joint3, [0, 0], RHO) == pytest.approx(0.2)


def test_second_stage_extremes():
    joint3 = join_two_sided(dms_block_distribution([0.5, 0.5], 2), independent(0.3, 0.2))
    first = make_code(y_joint(joint3), RHO, [0, 0, 1, 1]).code
    coarse = conditional_second_stage(joint3, first, 1e6, RHO, RHO)
    assert coarse.delta_rate == 0.0
    assert set(coarse.v_map) == {0}
    fine = conditional_second_stage(joint3, first, 0.0, RHO, RHO, v_size=4)
    assert fine.d2 == pytest.approx(0.0, abs=1e-12)


def test_region_caps():
    joint3 = join_two_sided(dms_block_distribution([0.5, 0.5], 3), independent(0.2, 0.1))
    with pytest.raises(CapExceeded):
        brute_force_sr_region(joint3, 1.0, 1.0, RHO, RHO)
    small = join_two_sided(dms_block_distribution([0.5, 0.5], 1), independent(0.2, 0.1))
    with pytest.raises(CapExceeded):
        brute_force_sr_region(small, 1.0, 1.0, RHO, RHO, u_cap=9)


def test_dominance_query():
    region = SrRegion([SrPoint(0.1, 0.3, 0.5, 0.0, (0, 1), (0, 0)), SrPoint(0.2, 0.1, 0.5, 0.5, (0, 1), (0, 1))])
    assert len(region.frontier) == 2
    assert region.dominated(0.2, 0.3)
    assert not region.dominated(0.05, 0.05)
