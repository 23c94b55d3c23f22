# test_dtwa_core.py
import math

import numpy as np
import pytest

from dtwa_core import (TRAJECTORY_STREAM, Z_AXIS, EngineJob, IntegrationError, IntegratorConfig, OatModel,
                       OracleSizeError, SpinMoments, TrajectoryEnsemble, classical_energy, evolve,
                       exact_ed_oracle, moments_from_samples, oat_dicke_oracle, oat_scan, resolve_workers,
                       rk4_step, run_ensemble, sample_initial, simulate_cloud, squeezing_from_moments, stream,
                       uniform_couplings, xy_hamiltonian)
from itinerancy import HoppingConfig, MotionMode, oat_replacement
from lattice import Cloud, CouplingMatrix, FillingProfile, LatticeGeometry, couplings_from_positions
from pulses import PulseSchedule, ramsey_schedule, wahuha_echo_schedule
from utils import to_db

MINUS_Y = (0.0, -1.0, 0.0)


def row_cloud(n):
    return Cloud(np.ones((1, n), dtype=bool))


def ensemble_of(spins):
    spins = np.asarray(spins, dtype=float)
    b, n = spins.shape[:2]
    return TrajectoryEnsemble(spins[:, None], [0.0], [(0, k) for k in range(b)],
                              np.zeros((b, 1, n, 2), dtype=int))


def sampled(cloud, n_traj, axis=Z_AXIS, seed=1):
    return np.stack([sample_initial(cloud, axis, stream(seed, TRAJECTORY_STREAM, 0, k)).s
                     for k in range(n_traj)])


def test_streams_depend_only_on_key():
    assert stream(7, 1, 0, 3).random() == stream(7, 1, 0, 3).random()
    assert stream(7, 1, 0, 3).random() != stream(7, 1, 0, 4).random()
    assert stream(7, 1, 0, 3).random() != stream(8, 1, 0, 3).random()


def test_worker_count():
    assert resolve_workers(3, 2) == 2
    assert resolve_workers(1, 10) == 1
    assert resolve_workers(0) >= 1
    with pytest.raises(ValueError):
        resolve_workers(-1)


def test_initial_samples_are_discrete(rng):
    cloud = row_cloud(50)
    s = sample_initial(cloud, Z_AXIS, rng).s
    assert np.all(s[:, 2] == 0.5)
    assert set(np.round(s[:, :2], 12).ravel().tolist()) == {-0.5, 0.5}
    s = sample_initial(cloud, MINUS_Y, rng).s
    assert np.allclose(s[:, 1], -0.5)
    with pytest.raises(IntegrationError):
        sample_initial(cloud, (0.0, 0.0, 2.0), rng)


def test_sampled_coherent_state_has_projection_noise():
    n = 40
    spins = sampled(row_cloud(n), 4000)
    moments = moments_from_samples(spins.sum(axis=1), n)
    assert moments.mean[2] == pytest.approx(n / 2)
    assert moments.cov[0, 0] == pytest.approx(n / 4, rel=0.1)
    assert moments.cov[1, 1] == pytest.approx(n / 4, rel=0.1)


def test_integrator_steps():
    integ = IntegratorConfig(0.001)
    assert integ.steps_between(0.0, 0.09) == 90
    with pytest.raises(IntegrationError):
        integ.steps_between(0.0, 0.0015)
    with pytest.raises(IntegrationError):
        IntegratorConfig(0.0)
    with pytest.raises(IntegrationError):
        IntegratorConfig(0.001, 'euler')


def test_classical_energy_of_known_configuration():
    c = CouplingMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]), [0.2, 0.0])
    spins = np.array([[0.5, 0.0, 0.5], [0.5, 0.0, 0.0]])
    assert classical_energy(spins, c) == pytest.approx(0.5 + 0.1)


def test_interaction_only_evolution_conserves_invariants():
    geom_positions = np.array([[x, y] for y in range(2) for x in range(4)])
    c = couplings_from_positions(geom_positions, 0.5, 0.86)
    spins0 = sampled(row_cloud(8), 16, MINUS_Y)
    spins = spins0.copy()
    for _ in range(1000):
        spins = rk4_step(spins, c.J, c.h, 0.001)
    np.testing.assert_allclose(spins[..., 2].sum(axis=1), spins0[..., 2].sum(axis=1), atol=1e-8 * 4)
    e0, e1 = classical_energy(spins0, c), classical_energy(spins, c)
    assert np.all(np.abs(e1 - e0) <= 1e-6 * np.abs(e0))
    drift = np.abs(np.linalg.norm(spins, axis=-1) - np.linalg.norm(spins0, axis=-1))
    assert drift.max() < 1e-8


def test_rk4_converges_at_fourth_order():
    c = couplings_from_positions(np.array([[x, 0] for x in range(4)]), 1.0, 1.0)
    spins0 = sampled(row_cloud(4), 1, MINUS_Y, seed=4)[0]
    schedule = PulseSchedule((), 0.5)

    def run(dt):
        out = evolve(ensemble_of(spins0[None]), c, schedule, IntegratorConfig(dt))
        return out.spins[0, -1]

    reference = run(0.000625)
    coarse = np.abs(run(0.01) - reference).max()
    fine = np.abs(run(0.005) - reference).max()
    assert coarse / fine == pytest.approx(16, rel=0.3)


def test_spin_echo_removes_static_fields():
    c = CouplingMatrix(np.zeros((3, 3)), [0.3, -1.1, 2.0])
    spins = sampled(row_cloud(3), 5)
    out = evolve(ensemble_of(spins), c, ramsey_schedule(0.132, 0.066, 0.0, 0.0), IntegratorConfig(0.001))
    # prep then an X echo: net rotation by 3pi/2 about x
    expected = np.stack([spins[..., 0], spins[..., 2], -spins[..., 1]], axis=-1)
    np.testing.assert_allclose(out.spins[:, -1], expected, atol=1e-8)


def test_wahuha_blocks_cancel_a_field():
    c = CouplingMatrix(np.zeros((1, 1)), [0.05])
    up = ensemble_of([[[0.0, 0.0, 0.5]]])
    integ = IntegratorConfig(0.0005)
    tau = 4 * 0.066
    decoupled = evolve(up, c, wahuha_echo_schedule(tau, 0.066), integ).spins[0, -1, 0]
    free = evolve(up, c, ramsey_schedule(tau, None, 0.0, 0.0), integ).spins[0, -1, 0]
    prepared = np.array([0.0, -0.5, 0.0])
    assert np.abs(free - prepared).max() > 0.01
    assert np.abs(decoupled - prepared).max() < 1e-3


def test_spin_moments_of_coherent_state():
    n = 10
    m = SpinMoments(n, np.array([n / 2, 0.0, 0.0]), np.diag([0.0, n / 4, n / 4]))
    assert m.contrast == pytest.approx(1.0)
    e1, e2, axis = m.frame()
    np.testing.assert_allclose(e1, [0, 0, 1])
    np.testing.assert_allclose(e2, [0, 1, 0])
    assert m.xi2(0.3) == pytest.approx(1.0)
    assert m.squeezing()[0] == pytest.approx(1.0)


def test_squeezing_from_moments_picks_the_minor_axis():
    xi2, theta = squeezing_from_moments(1.0, 3.0, 0.0, 4)
    assert (xi2, theta) == (pytest.approx(1.0), pytest.approx(0.0))
    xi2, theta = squeezing_from_moments(3.0, 1.0, 0.0, 4)
    assert theta == pytest.approx(math.pi / 2)
    xi2, theta = squeezing_from_moments(2.0, 2.0, 1.0, 4)
    assert xi2 == pytest.approx(1.0)
    assert theta == pytest.approx(-math.pi / 4)


def test_dicke_oracle_at_zero_time_and_single_atom():
    o = oat_dicke_oracle(OatModel(50, 0.3), 0.0)
    assert o.contrast == pytest.approx(1.0)
    assert o.xi2_min == pytest.approx(1.0)
    assert o.sz == pytest.approx(0.0, abs=1e-12)
    single = oat_dicke_oracle(OatModel(1, 0.3), 2.0)
    assert single.contrast == pytest.approx(1.0)
    assert [r.time for r in oat_scan(OatModel(4, 0.1), [0.0, 0.5])] == [0.0, 0.5]
    with pytest.raises(OracleSizeError):
        OatModel(200000, 0.1)


def test_dicke_readout_angle_sets_the_measured_variance():
    model = OatModel.from_uniform_coupling(20, 0.05)
    assert oat_dicke_oracle(model, 0.0, 0.7).var_rotated == pytest.approx(5.0)
    best = oat_dicke_oracle(model, 0.4)
    assert best.xi2_min < 1.0
    at_optimum = oat_dicke_oracle(model, 0.4, best.theta_opt)
    assert at_optimum.xi2 == pytest.approx(best.xi2_min, rel=1e-10)
    assert at_optimum.sy == pytest.approx(0.0, abs=1e-10)
    assert oat_dicke_oracle(model, 0.4, best.theta_opt + 0.3).xi2 > at_optimum.xi2


def test_dicke_contrast_follows_closed_form():
    model = OatModel.from_uniform_coupling(30, 0.05)
    assert model.chi == -0.05
    for tau in (0.2, 0.7):
        expected = math.cos(2 * math.pi * model.chi * tau) ** 29
        assert oat_dicke_oracle(model, tau).contrast == pytest.approx(abs(expected), rel=1e-10)


def test_dicke_and_exact_oracles_agree():
    n, j = 8, 0.2
    couplings = uniform_couplings(n, j)
    taus = [0.1, 0.3, 0.5]
    ed = exact_ed_oracle(couplings, ramsey_schedule(taus[-1], None, 0.0, 0.0), taus)
    model = OatModel.from_uniform_coupling(n, j)
    for k, tau in enumerate(taus):
        exact = ed.oracle_moments(k)
        dicke = oat_dicke_oracle(model, tau)
        assert exact.contrast == pytest.approx(dicke.contrast, abs=1e-10)
        assert exact.xi2_min == pytest.approx(dicke.xi2_min, abs=1e-10)
        assert exact.theta_opt == pytest.approx(dicke.theta_opt, abs=1e-8)
        assert exact.sz == pytest.approx(0.0, abs=1e-12)


def test_exact_oracle_size_guard_and_hamiltonian():
    with pytest.raises(OracleSizeError):
        exact_ed_oracle(uniform_couplings(13, 1.0), PulseSchedule((), 0.1))
    H = xy_hamiltonian(CouplingMatrix(np.array([[0.0, 0.7], [0.7, 0.0]]), [0.3, 0.0])).toarray()
    np.testing.assert_allclose(H, H.conj().T)
    assert H[1, 2] == pytest.approx(0.7)
    assert H[0, 0] == pytest.approx(0.15)
    assert H[3, 3] == pytest.approx(-0.15)


def test_uncoupled_spins_agree_across_engines():
    c = CouplingMatrix(np.zeros((3, 3)), [0.3, -0.4, 0.9])
    schedule = ramsey_schedule(0.2, None, 0.0, 0.0)
    times = [0.0, 0.1, 0.2]
    ed = exact_ed_oracle(c, schedule, times)
    up = ensemble_of(np.tile([0.0, 0.0, 0.5], (2, 3, 1)))
    dtwa = evolve(up, c, schedule, IntegratorConfig(0.001), sample_times=times)
    for k, t in enumerate(times):
        expected = sum(0.5 * np.array([math.sin(2 * math.pi * h * t), -math.cos(2 * math.pi * h * t), 0.0])
                       for h in c.h)
        np.testing.assert_allclose(ed.moments(k).mean, expected, atol=1e-9)
        np.testing.assert_allclose(dtwa.moments(k).mean[:2], expected[:2], atol=1e-9)
        assert ed.expectation(k, [(0, 'z')]).real == pytest.approx(0.0, abs=1e-12)


def test_dtwa_reproduces_one_axis_twisting():
    n, j = 100, 0.01
    taus = [0.1, 0.2, 0.3]
    spins = sampled(row_cloud(n), 1000, seed=9)
    out = evolve(ensemble_of(spins), uniform_couplings(n, j), ramsey_schedule(taus[-1], None, 0.0, 0.0),
                 IntegratorConfig(0.001), sample_times=taus)
    model = OatModel.from_uniform_coupling(n, j)
    for k, tau in enumerate(taus):
        xi2, theta = out.moments(k).squeezing()
        exact = oat_dicke_oracle(model, tau)
        assert abs(to_db(xi2) - to_db(exact.xi2_min)) < 1.0
        assert theta == pytest.approx(exact.theta_opt, rel=0.2)
    assert to_db(oat_dicke_oracle(model, taus[-1]).xi2_min) < -5.0


def test_dtwa_contrast_tracks_dicke_contrast():
    n, j = 20, 0.01
    taus = [0.4, 0.8, 1.2]
    out = evolve(ensemble_of(sampled(row_cloud(n), 2000, seed=2)), uniform_couplings(n, j),
                 ramsey_schedule(taus[-1], None, 0.0, 0.0), IntegratorConfig(0.001), sample_times=taus)
    model = OatModel.from_uniform_coupling(n, j)
    for k, tau in enumerate(taus):
        assert out.moments(k).contrast == pytest.approx(oat_dicke_oracle(model, tau).contrast, abs=0.02)


def test_oat_limit_mode_equals_mean_couplings():
    c = couplings_from_positions(np.array([[0, 0], [1, 0], [3, 1], [0, 2]]), 1.0, 0.86)
    spins = ensemble_of(sampled(row_cloud(4), 3))
    schedule = ramsey_schedule(0.05, None, 0.0, 0.0)
    a = evolve(spins, c, schedule, IntegratorConfig(0.001), MotionMode.oat_limit())
    b = evolve(spins, oat_replacement(c), schedule, IntegratorConfig(0.001))
    np.testing.assert_array_equal(a.spins, b.spins)


def test_trajectory_ensemble_validation_and_rows():
    spins = np.zeros((2, 1, 3, 3))
    pos = np.zeros((2, 1, 3, 2), dtype=int)
    with pytest.raises(IntegrationError):
        TrajectoryEnsemble(spins, [0.0], [(0, 0), (0, 0)], pos)
    ens = TrajectoryEnsemble(spins, [0.0], [(0, 0), (0, 1)], pos)
    rows = list(ens.to_rows())
    assert len(rows) == 6
    assert rows[3][0] == '0-1'
    with pytest.raises(IntegrationError):
        ens.time_index(0.5)


def small_job(motion, schedule, n_traj=4, seed=3):
    geom = LatticeGeometry(266e-9, 5, 4)
    return EngineJob(geom, 1.09, 0.86, 0.001, schedule, IntegratorConfig(0.001), motion,
                     (0.0, 0.05, 0.1), n_traj, seed)


def small_clouds():
    a = np.zeros((4, 5), dtype=bool)
    a[1:3, 1:4] = True
    b = np.zeros((4, 5), dtype=bool)
    b[0, :] = True
    b[3, 2] = True
    return [Cloud(a), Cloud(b)]


def test_simulation_is_deterministic_across_workers():
    job = small_job(MotionMode.static(), ramsey_schedule(0.1, 0.066, 0.0, 0.0))
    clouds = small_clouds()
    serial = run_ensemble(job, clouds, threads=1)
    parallel = run_ensemble(job, clouds, threads=2)
    for s, p in zip(serial, parallel):
        np.testing.assert_array_equal(s.spins, p.spins)
        assert s.seeds == p.seeds
    assert serial[1].seeds[0] == (1, 0)


def test_stochastic_motion_moves_atoms_and_keeps_hard_core():
    clouds = small_clouds()
    target = FillingProfile(np.full((4, 5), 0.5))
    motion = MotionMode.stochastic(HoppingConfig(50.0, 0.001, target))
    out = simulate_cloud(small_job(motion, ramsey_schedule(0.1, None, 0.0, 0.0), n_traj=6), 0, clouds[0])
    assert np.any(out.positions[:, -1] != out.positions[:, 0])
    for b in range(out.n_trajectories):
        for k in range(len(out.sample_times)):
            sites = {tuple(p) for p in out.positions[b, k]}
            assert len(sites) == clouds[0].n_atoms
    np.testing.assert_allclose(np.linalg.norm(out.spins, axis=-1), math.sqrt(3) / 2, atol=1e-6)
    again = simulate_cloud(small_job(motion, ramsey_schedule(0.1, None, 0.0, 0.0), n_traj=6), 0, clouds[0])
    np.testing.assert_array_equal(out.positions, again.positions)
    with pytest.raises(IntegrationError):
        evolve(ensemble_of(sampled(row_cloud(2), 2)), uniform_couplings(2, 1.0),
               PulseSchedule((), 0.01), IntegratorConfig(0.001), motion)
