# test_itinerancy.py
import numpy as np
import pytest

from itinerancy import (EMPTY, HoppingConfig, HoppingError, HoppingState, MotionMode, hop_step,
                        oat_replacement, refresh_couplings, smooth_profile)
from lattice import (CouplingMatrix, FillingProfile, GeometryError, LatticeGeometry, couplings_from_positions,
                     harmonic_disorder)

PEAKED = np.array([[0.2, 0.5, 0.2],
                   [0.5, 1.0, 0.5],
                   [0.2, 0.5, 0.2]])


def occupancy_histogram(target, steps, t_hop, dt, seed, start=(0, 0)):
    hop = HoppingConfig(t_hop, dt, FillingProfile(target))
    state = HoppingState([start], target.shape)
    rng = np.random.default_rng(seed)
    counts = np.zeros(target.shape)
    for _ in range(steps):
        hop_step(state, hop, rng)
        x, y = state.positions[0]
        counts[y, x] += 1
    return counts / steps


def test_smooth_profile_keeps_uniform_grids():
    flat = smooth_profile(np.full((5, 7), 0.4), sigma=1.0)
    np.testing.assert_allclose(flat.p, 0.4)
    assert smooth_profile(PEAKED, sigma=0.0).p.tolist() == PEAKED.tolist()
    with pytest.raises(HoppingError):
        smooth_profile(np.full((3, 3), 1.5))


def test_hopping_parameters_are_checked():
    target = FillingProfile(np.ones((3, 3)))
    assert HoppingConfig(10.0, 0.001, target).move_probability == pytest.approx(0.04)
    with pytest.raises(HoppingError):
        HoppingConfig(200.0, 0.001, target)
    with pytest.raises(HoppingError):
        HoppingConfig(-1.0, 0.001, target)
    with pytest.raises(HoppingError):
        MotionMode('stochastic')
    with pytest.raises(HoppingError):
        MotionMode('wander')
    assert not MotionMode.static().moves
    assert not MotionMode.stochastic(HoppingConfig(0.0, 0.001, target)).moves


def test_state_rejects_double_occupancy():
    with pytest.raises(HoppingError):
        HoppingState([(1, 1), (1, 1)], (3, 3))
    with pytest.raises(HoppingError):
        HoppingState([(3, 0)], (3, 3))


def test_hopping_conserves_atoms_and_hard_core(rng):
    shape = (8, 8)
    target = FillingProfile(np.clip(rng.random(shape), 0.05, 1.0))
    hop = HoppingConfig(50.0, 0.002, target)
    sites = rng.choice(64, size=30, replace=False)
    state = HoppingState(np.column_stack([sites % 8, sites // 8]), shape)
    for _ in range(500):
        before = state.positions.copy()
        moved = hop_step(state, hop, rng)
        step = np.abs(state.positions - before).sum(axis=1)
        assert set(np.flatnonzero(step).tolist()) <= set(moved.tolist())
        assert np.all(step[moved] <= 2)
        assert state.occupation().sum() == 30
        for atom, (x, y) in enumerate(state.positions):
            assert state.grid[y, x] == atom
    assert len({tuple(p) for p in state.positions}) == 30


def test_zero_filling_sites_are_left_and_never_entered(rng):
    target = np.ones((3, 5))
    target[:, 0] = 0.0
    hop = HoppingConfig(50.0, 0.002, FillingProfile(target))
    state = HoppingState([(0, 1)], target.shape)
    left = False
    for _ in range(2000):
        hop_step(state, hop, rng)
        x = state.positions[0, 0]
        if left:
            assert x != 0
        left = left or x != 0
    assert left


def test_no_tunneling_means_no_moves(rng):
    hop = HoppingConfig(0.0, 0.001, FillingProfile(np.ones((3, 3))))
    state = HoppingState([(1, 1)], (3, 3))
    assert hop_step(state, hop, rng).size == 0
    assert state.grid[1, 1] == 0 and np.sum(state.grid != EMPTY) == 1


def test_single_atom_occupancy_matches_target():
    hist = occupancy_histogram(PEAKED, 100_000, 50.0, 0.002, seed=11)
    assert np.abs(hist - PEAKED / PEAKED.sum()).sum() < 0.1


@pytest.mark.slow
def test_single_atom_occupancy_converges_on_larger_grid():
    y, x = np.mgrid[0:5, 0:5]
    target = smooth_profile(np.where((x - 2) ** 2 + (y - 2) ** 2 <= 2, 1.0, 0.1), sigma=1.0).p
    hist = occupancy_histogram(target, 1_000_000, 50.0, 0.002, seed=5)
    assert np.abs(hist - target / target.sum()).sum() < 0.05


def test_dilute_mean_squared_displacement(rng):
    coords = np.arange(10, 400, 20)
    xs, ys = np.meshgrid(coords, coords)
    start = np.column_stack([xs.ravel(), ys.ravel()])
    hop = HoppingConfig(10.0, 0.001, FillingProfile(np.full((400, 400), 0.5)))
    state = HoppingState(start, (400, 400))
    steps = 200
    for _ in range(steps):
        hop_step(state, hop, rng)
    msd = np.mean(np.sum((state.positions - start) ** 2, axis=1))
    # 2 axes x 2 directions x 4 t dt = 0.16 sites^2 per step
    assert msd == pytest.approx(0.16 * steps, rel=0.15)


def test_incremental_refresh_equals_rebuild(rng):
    geom = LatticeGeometry(266e-9, 6, 6)
    grid = harmonic_disorder(geom, coeff=0.01)
    positions = np.array([[0, 0], [2, 1], [4, 4], [5, 0]])
    start = couplings_from_positions(positions, 1.09, 0.86, grid[positions[:, 1], positions[:, 0]])
    moved_positions = positions.copy()
    moved_positions[1] = (3, 1)
    moved_positions[3] = (5, 1)
    refreshed = refresh_couplings(start, moved_positions, [1, 3], 1.09, 0.86, grid)
    rebuilt = couplings_from_positions(moved_positions, 1.09, 0.86,
                                       grid[moved_positions[:, 1], moved_positions[:, 0]])
    np.testing.assert_allclose(refreshed.J, rebuilt.J, rtol=1e-15)
    np.testing.assert_allclose(refreshed.h, rebuilt.h)


def test_oat_replacement_uses_mean_coupling():
    J = np.array([[0.0, 1.0, 0.2], [1.0, 0.0, 0.6], [0.2, 0.6, 0.0]])
    out = oat_replacement(CouplingMatrix(J, [0.1, 0.2, 0.3]))
    assert out.J[0, 1] == pytest.approx(0.6)
    assert np.all(np.diag(out.J) == 0)
    assert out.h.tolist() == [0.1, 0.2, 0.3]
    with pytest.raises(GeometryError):
        oat_replacement(CouplingMatrix(np.zeros((1, 1))))


def test_oat_replacement_is_permutation_symmetric():
    positions = np.array([[0, 0], [1, 0], [3, 0], [0, 2], [4, 3], [2, 1]])
    out = oat_replacement(couplings_from_positions(positions, 1.09, 0.86))
    assert np.unique(out.J[~np.eye(6, dtype=bool)]).size == 1
    perm = np.random.default_rng(2).permutation(6)
    assert np.array_equal(out.J[np.ix_(perm, perm)], out.J)
    shuffled = oat_replacement(couplings_from_positions(positions[perm], 1.09, 0.86))
    np.testing.assert_allclose(shuffled.J, out.J, rtol=1e-12)
