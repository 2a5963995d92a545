import numpy as np
import pytest

from sonclust.clusterpath import (
    AgglomerationError,
    ClusterPath,
    check_agglomeration,
    compute_path,
    fusion_scale,
    lambda_grid,
    merge_tree,
)
from sonclust.core import InputError, Partition
from sonclust.solver import SolverConfig, solve


def P(*clusters):
    return Partition.from_clusters(clusters)


def test_two_point_path():
    path = compute_path([0.0, 4.0], [0.5, 1.0, 2.0, 3.0])
    assert path.partitions == [P([0], [1]), P([0], [1]), P([0, 1]), P([0, 1])]
    assert len(path.merge_events) == 1
    event = path.merge_events[0]
    assert event.lambda_index == 2 and event.parent == (0, 1)
    assert check_agglomeration(path) == []
    tree = merge_tree(path)
    assert tree.leaves == ((0,), (1,))
    assert len(tree.nodes) == 1 and tree.nodes[0].lam == 2.0
    assert tree.nodes[0].children == ((0,), (1,))


def test_zero_lambda_grid():
    a = np.random.default_rng(0).normal(size=(6, 2))
    path = compute_path(a, [0.0])
    assert path.partitions == [Partition.singletons(6)]
    assert merge_tree(path).nodes == ()


def test_grid_ending_at_fusion_scale_is_one_cluster():
    a = np.random.default_rng(1).normal(size=(15, 2))
    scale = fusion_scale(a)
    path = compute_path(a, lambda_grid(1e-2 * scale, scale, 8))
    assert path.partitions[-1].n_clusters == 1


def test_artificial_violation():
    path = ClusterPath([1.0, 2.0], [P([0, 1]), P([0], [1])])
    assert check_agglomeration(path) == [0]
    with pytest.raises(AgglomerationError) as exc:
        merge_tree(path)
    assert "(0, 1)" in str(exc.value)


def test_single_entry_path():
    assert check_agglomeration(ClusterPath([1.0], [P([0, 1])])) == []


def test_three_points_tree():
    path = compute_path([0.0, 2.0, 4.0], [0.5, 1.0])
    assert path.partitions[0] == Partition.singletons(3)
    tree = merge_tree(path)
    assert [node.parent for node in tree.nodes] == [(0, 1, 2)]
    assert tree.nodes[0].lam == 1.0
    assert solve([0.0, 2.0, 4.0], SolverConfig(lam=0.5)).partition == Partition.singletons(3)


def test_no_merges_gives_forest():
    a = np.array([[0.0], [10.0], [20.0]])
    tree = merge_tree(compute_path(a, [0.01, 0.02]))
    assert tree.nodes == () and len(tree.leaves) == 3


@pytest.mark.parametrize("grid", [[], [1.0, 0.5], [1.0, 1.0], [-1.0, 1.0]])
def test_grid_validation(grid):
    with pytest.raises(InputError):
        compute_path([0.0, 4.0], grid)


def test_warm_matches_cold():
    a = np.random.default_rng(2).normal(size=(20, 2))
    grid = lambda_grid(1e-3 * fusion_scale(a), fusion_scale(a), 10)
    path = compute_path(a, grid)
    for k, lam in enumerate(grid):
        cold = solve(a, SolverConfig(lam=lam))
        assert cold.partition == path.partitions[k]
        assert path.solutions_meta[k].converged


def test_warm_x_matches_cold_x():
    # x is not stored in the path, so replay the warm-start chain directly
    from sonclust.solver import SplittingState
    a = np.random.default_rng(3).normal(size=(12, 3))
    grid = lambda_grid(1e-2 * fusion_scale(a), fusion_scale(a), 6)
    state, prev = None, None
    for lam in grid:
        warm = None if state is None else SplittingState(state.x, state.u, state.y * prev / lam)
        sol = solve(a, SolverConfig(lam=lam), warm_start=warm)
        np.testing.assert_allclose(sol.x_star, solve(a, SolverConfig(lam=lam)).x_star, atol=1e-6)
        state, prev = sol.state, lam


def test_refined_merge_lambda():
    # two points 4 apart merge at exactly lambda = 2
    path = compute_path([0.0, 4.0], [0.5, 1.0, 3.0], refine_merges=True)
    event = path.merge_events[0]
    assert 1.0 < event.lambda_refined <= 3.0
    # points closer than the merge threshold (1e-5 * 4) already count as fused
    tol = 0.5 * 1e-5 * 4.0 + 1e-6 * fusion_scale([0.0, 4.0])
    assert event.lambda_refined == pytest.approx(2.0, abs=tol)


def test_agglomeration_random_small():
    rng = np.random.default_rng(4)
    for _ in range(3):
        a = rng.normal(size=(25, 2))
        scale = fusion_scale(a)
        path = compute_path(a, lambda_grid(1e-3 * scale, scale, 15))
        assert check_agglomeration(path) == []
        counts = path.cluster_counts
        assert all(b <= c for c, b in zip(counts, counts[1:]))
        assert counts[-1] == 1


def test_lambda_grid():
    assert lambda_grid(1, 100, 3) == pytest.approx([1, 10, 100])
    assert lambda_grid(0, 1, 3, "linear") == pytest.approx([0, 0.5, 1])
    with pytest.raises(InputError):
        lambda_grid(0, 1, 3, "geometric")
    with pytest.raises(InputError):
        lambda_grid(1, 2, 3, "cubic")
