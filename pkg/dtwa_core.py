# dtwa_core.py
"""Discrete truncated Wigner (DTWA) dynamics of XY-coupled spin-1/2 atoms.

Hamiltonian (all couplings in Hz, time evolution exp(-2 pi i H t)):

    H = 2 sum_{i<j} J_ij (Sx_i Sx_j + Sy_i Sy_j) + sum_i h_i Sz_i

Each trajectory starts from a discretely sampled coherent state and follows
ds_i/dt = 2 pi B_i x s_i with B_i = (2 sum_j J_ij s_j^x, 2 sum_j J_ij s_j^y, h_i).
The module also carries two exact references: the Dicke-basis one-axis
twisting solution and dense state-vector evolution for up to 12 atoms.
"""
import math
from dataclasses import dataclass

import numpy as np
import psutil
from joblib import Parallel, delayed
from scipy import sparse
from scipy.sparse.linalg import expm_multiply
from scipy.special import gammaln

from itinerancy import HoppingState, MotionMode, hop_step, oat_replacement, refresh_rows
from lattice import CouplingMatrix, build_couplings, field_at, harmonic_disorder
from logger import Logger
from pulses import apply_rotation, spin_half_unitary
from utils import NumericalError

logger = Logger()

TWO_PI = 2.0 * math.pi
Z_AXIS = (0.0, 0.0, 1.0)
ED_MAX_ATOMS = 12
STEP_TOL = 1e-6

# Seed-sequence stream tags
CLOUD_STREAM = 0
TRAJECTORY_STREAM = 1
SHOT_STREAM = 2
BOOTSTRAP_STREAM = 3


class IntegrationError(ValueError):
    """Inconsistent integration request"""


class OracleSizeError(ValueError):
    """System too large for the exact oracle"""


def stream(seed, *key):
    """Counter-based generator for the stream identified by ``key``.

    Streams depend only on (seed, key), never on which worker draws them.
    """
    seq = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def resolve_workers(threads, n_units=None):
    """Worker count for ``threads`` (0 = physical cores), capped by the number of work units"""
    if threads < 0:
        raise ValueError(f"threads must be >= 0, got {threads}")
    workers = threads or psutil.cpu_count(logical=False) or 1
    if n_units is not None:
        workers = max(1, min(workers, n_units))
    return workers


@dataclass
class SpinConfiguration:
    """Classical spins s (N, 3) and the (x, y) site of each atom"""
    s: np.ndarray
    atom_site: np.ndarray

    @property
    def n_atoms(self):
        return self.s.shape[0]

    def collective(self):
        return self.s.sum(axis=0)


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step fourth-order Runge-Kutta"""
    dt: float = 0.001
    method: str = 'rk4'

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise IntegrationError(f"dt must be positive, got {self.dt}")
        if self.method != 'rk4':
            raise IntegrationError(f"unsupported integrator {self.method!r}")

    def steps_between(self, t0, t1):
        n = (t1 - t0) / self.dt
        k = int(round(n))
        if abs(n - k) > STEP_TOL:
            raise IntegrationError(f"dt={self.dt} does not divide the interval [{t0}, {t1}]")
        return k


@dataclass(frozen=True)
class CouplingModel:
    """What the engine needs to rebuild couplings when atoms move"""
    j_perp: float
    rescale: float
    field_grid: np.ndarray = None

    @property
    def scale(self):
        return self.rescale * self.j_perp


def _transverse_frame(axis):
    helper = np.array([1.0, 0.0, 0.0]) if abs(axis[2]) > 0.9 else np.array([0.0, 0.0, 1.0])
    e1 = np.cross(helper, axis)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(axis, e1)


def sample_initial(cloud, polarization_axis, rng):
    """Discrete Wigner sample of a coherent state along ``polarization_axis``.

    Along the axis every spin has +1/2; the two transverse components are
    independently +1/2 or -1/2.
    """
    axis = np.asarray(polarization_axis, dtype=float)
    if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > 1e-9:
        raise IntegrationError(f"polarization axis must be a unit 3-vector, got {polarization_axis}")
    e1, e2 = _transverse_frame(axis)
    n = cloud.n_atoms
    signs = 2.0 * rng.integers(0, 2, size=(n, 2)) - 1.0
    s = 0.5 * (axis[None, :] + signs[:, :1] * e1[None, :] + signs[:, 1:] * e2[None, :])
    return SpinConfiguration(s, cloud.positions)


def _derivative(spins, J, h):
    n = spins.shape[-2]
    if J.shape[-2:] != (n, n) or np.shape(h)[-1] != n:
        raise IntegrationError(f"couplings for {J.shape[-1]} atoms, spins for {n}")
    if J.ndim == 2:
        bx = 2.0 * (spins[..., 0] @ J)
        by = 2.0 * (spins[..., 1] @ J)
    else:
        bx = 2.0 * np.matmul(J, spins[..., 0, None])[..., 0]
        by = 2.0 * np.matmul(J, spins[..., 1, None])[..., 0]
    field = np.stack([bx, by, np.broadcast_to(h, bx.shape)], axis=-1)
    return TWO_PI * np.cross(field, spins)


def eom_derivative(config, couplings):
    """ds/dt for a SpinConfiguration (or an (..., N, 3) array) under ``couplings``"""
    spins = config.s if isinstance(config, SpinConfiguration) else np.asarray(config, dtype=float)
    return _derivative(spins, couplings.J, couplings.h)


def rk4_step(spins, J, h, dt):
    k1 = _derivative(spins, J, h)
    k2 = _derivative(spins + 0.5 * dt * k1, J, h)
    k3 = _derivative(spins + 0.5 * dt * k2, J, h)
    k4 = _derivative(spins + dt * k3, J, h)
    return spins + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def classical_energy(spins, couplings):
    """sum_{i != j} J_ij (sx_i sx_j + sy_i sy_j) + sum_i h_i sz_i, per leading index"""
    spins = np.asarray(spins, dtype=float)
    J = couplings.J
    sx, sy = spins[..., 0], spins[..., 1]
    return (np.einsum('...i,ij,...j->...', sx, J, sx)
            + np.einsum('...i,ij,...j->...', sy, J, sy)
            + spins[..., 2] @ couplings.h)


@dataclass(frozen=True)
class SpinMoments:
    """Mean (3,) and symmetrized covariance (3, 3) of the collective spin of N atoms"""
    n_atoms: int
    mean: np.ndarray
    cov: np.ndarray

    @property
    def contrast(self):
        return float(np.linalg.norm(self.mean) / (self.n_atoms / 2.0))

    def frame(self):
        """(e1, e2, n): n along the mean spin, e1 the z axis projected off n, e2 = e1 x n.

        Rotating by theta about n and reading Sz measures cos(theta) e1.S + sin(theta) e2.S.
        """
        norm = np.linalg.norm(self.mean)
        if not norm > 0:
            raise NumericalError("mean spin vanishes; squeezing frame undefined")
        n = self.mean / norm
        e1 = np.array([0.0, 0.0, 1.0]) - n[2] * n
        if np.linalg.norm(e1) < 1e-12:
            raise NumericalError("mean spin is along z; no transverse readout plane")
        e1 /= np.linalg.norm(e1)
        return e1, np.cross(e1, n), n

    def transverse_cov(self):
        e1, e2, _ = self.frame()
        return (float(e1 @ self.cov @ e1), float(e2 @ self.cov @ e2), float(e1 @ self.cov @ e2))

    def variance(self, theta):
        v11, v22, v12 = self.transverse_cov()
        c, s = np.cos(theta), np.sin(theta)
        return c * c * v11 + s * s * v22 + 2.0 * s * c * v12

    def xi2(self, theta):
        return self.variance(theta) / (self.n_atoms / 4.0)

    def squeezing(self):
        """(minimum xi^2 over readout angle, optimal angle in (-pi/2, pi/2])"""
        return squeezing_from_moments(*self.transverse_cov(), self.n_atoms)


def squeezing_from_moments(v11, v22, v12, n_atoms):
    """Minimum of (cos t)^2 v11 + (sin t)^2 v22 + 2 sin t cos t v12 over t, normalized by N/4"""
    a = 0.5 * (v11 + v22)
    b = 0.5 * (v11 - v22)
    radius = math.hypot(b, v12)
    theta = 0.5 * (math.atan2(v12, b) + math.pi)
    if theta > math.pi / 2:
        theta -= math.pi
    return (a - radius) / (n_atoms / 4.0), theta


def moments_from_samples(collective, n_atoms):
    """SpinMoments from per-trajectory collective spins (B, 3); Bessel-corrected covariance"""
    collective = np.asarray(collective, dtype=float)
    if collective.shape[0] < 2:
        raise NumericalError("need at least two trajectories for a covariance")
    return SpinMoments(n_atoms, collective.mean(axis=0), np.cov(collective.T, ddof=1))


@dataclass
class TrajectoryEnsemble:
    """Trajectories of one cloud sampled at shared times.

    spins (B, T, N, 3), positions (B, T, N, 2) as (x, y), seeds one (cloud, trajectory)
    pair per trajectory, site_labels the (ny, nx) label grid of the cloud.
    """
    spins: np.ndarray
    sample_times: np.ndarray
    seeds: tuple
    positions: np.ndarray
    site_labels: np.ndarray = None

    def __post_init__(self):
        self.sample_times = np.asarray(self.sample_times, dtype=float)
        self.seeds = tuple(tuple(s) for s in self.seeds)
        b, t = self.spins.shape[:2]
        if t != len(self.sample_times) or len(self.seeds) != b:
            raise IntegrationError("ensemble arrays disagree on trajectory or time counts")
        if len(set(self.seeds)) != len(self.seeds):
            raise IntegrationError("trajectory seeds must be unique")
        if self.positions.shape[:3] != self.spins.shape[:3]:
            raise IntegrationError("positions must match spins")

    @property
    def n_trajectories(self):
        return self.spins.shape[0]

    @property
    def n_atoms(self):
        return self.spins.shape[2]

    def time_index(self, t):
        hits = np.flatnonzero(np.isclose(self.sample_times, t, rtol=0, atol=1e-9))
        if not hits.size:
            raise IntegrationError(f"time {t} was not sampled")
        return int(hits[0])

    def at(self, time_index):
        return self.spins[:, time_index]

    def read_out(self, time_index, phase, angle):
        """Spins at ``time_index`` after a readout rotation"""
        return apply_rotation(self.spins[:, time_index], phase, angle)

    def collective(self, time_index):
        return self.spins[:, time_index].sum(axis=1)

    def moments(self, time_index):
        return moments_from_samples(self.collective(time_index), self.n_atoms)

    def to_rows(self):
        """Rows of traj_id, time_s, atom_id, site_x, site_y, sx, sy, sz"""
        for b, (cloud, traj) in enumerate(self.seeds):
            for k, t in enumerate(self.sample_times):
                for atom in range(self.n_atoms):
                    x, y = self.positions[b, k, atom]
                    sx, sy, sz = self.spins[b, k, atom]
                    yield (f"{cloud}-{traj}", float(t), atom, int(x), int(y), float(sx), float(sy), float(sz))


def evolve(ensemble, couplings, schedule, integ, motion=None, sample_times=None,
           rngs=None, coupling_model=None):
    """Integrate every trajectory through ``schedule``.

    The last frame of ``ensemble`` is the initial state. Pulses are applied at
    their times; readout events are left to the caller. With stochastic motion
    each trajectory takes one hop step per dt after the RK4 step, using its own
    generator from ``rngs``, and the couplings of moved atoms are refreshed.
    """
    motion = motion or MotionMode.static()
    sample_times = [schedule.duration] if sample_times is None else list(sample_times)
    spins = np.array(ensemble.spins[:, -1], dtype=float)
    positions = np.array(ensemble.positions[:, -1])
    n_traj, n_atoms = spins.shape[:2]
    if couplings.n_atoms != n_atoms:
        raise IntegrationError(f"couplings for {couplings.n_atoms} atoms, ensemble has {n_atoms}")
    if motion.kind == 'oat_limit':
        couplings = oat_replacement(couplings)

    moving = motion.moves
    if moving:
        if rngs is None or len(rngs) != n_traj or coupling_model is None:
            raise IntegrationError("stochastic motion needs one generator per trajectory and a coupling model")
        hop = motion.hopping
        if not math.isclose(hop.dt, integ.dt, rel_tol=1e-12):
            raise IntegrationError(f"hop dt {hop.dt} differs from integrator dt {integ.dt}")
        J = np.repeat(couplings.J[None], n_traj, axis=0)
        h = np.repeat(couplings.h[None], n_traj, axis=0)
        states = [HoppingState(positions[b], hop.target.p.shape) for b in range(n_traj)]
    else:
        J, h = couplings.J, couplings.h

    out_spins = np.empty((n_traj, len(sample_times), n_atoms, 3))
    out_pos = np.empty((n_traj, len(sample_times), n_atoms, 2), dtype=positions.dtype)
    n_hops = 0
    for step in schedule.plan(sample_times):
        if step[0] == 'evolve':
            for _ in range(integ.steps_between(step[1], step[2])):
                spins = rk4_step(spins, J, h, integ.dt)
                if moving:
                    for b, state in enumerate(states):
                        moved = hop_step(state, hop, rngs[b])
                        if moved.size:
                            n_hops += moved.size
                            refresh_rows(J[b], h[b], state.positions, moved,
                                         coupling_model.scale, coupling_model.field_grid)
        elif step[0] == 'pulse':
            spins = step[1].apply(spins)
        else:
            out_spins[:, step[1]] = spins
            out_pos[:, step[1]] = np.stack([s.positions for s in states]) if moving else positions
    if moving:
        logger.debug(f"Hopping: {n_hops} moves over {n_traj} trajectories")
    return TrajectoryEnsemble(out_spins, sample_times, ensemble.seeds, out_pos, ensemble.site_labels)


@dataclass(frozen=True)
class EngineJob:
    """Everything a worker needs to simulate the trajectories of one cloud"""
    geom: object
    j_perp: float
    rescale: float
    disorder_coeff: float
    schedule: object
    integ: IntegratorConfig
    motion: MotionMode
    sample_times: tuple
    n_trajectories: int
    seed: int
    site_labels: np.ndarray = None


def simulate_cloud(job, cloud_index, cloud):
    """Sample and evolve ``job.n_trajectories`` trajectories of one cloud"""
    field_grid = harmonic_disorder(job.geom, None, job.disorder_coeff)
    couplings = build_couplings(job.geom, cloud, job.j_perp, job.rescale)
    couplings = couplings.with_field(field_at(cloud.positions, field_grid))
    rngs = [stream(job.seed, TRAJECTORY_STREAM, cloud_index, b) for b in range(job.n_trajectories)]
    spins0 = np.stack([sample_initial(cloud, Z_AXIS, rng).s for rng in rngs])
    pos0 = np.broadcast_to(cloud.positions, (job.n_trajectories,) + cloud.positions.shape)
    initial = TrajectoryEnsemble(
        spins0[:, None], [0.0], [(cloud_index, b) for b in range(job.n_trajectories)],
        np.array(pos0)[:, None], cloud.labels if job.site_labels is None else job.site_labels)
    model = CouplingModel(job.j_perp, job.rescale, field_grid)
    return evolve(initial, couplings, job.schedule, job.integ, job.motion,
                  job.sample_times, rngs, model)


def run_ensemble(job, clouds, threads=1):
    """Simulate every cloud; one worker task per cloud, results in cloud order"""
    workers = resolve_workers(threads, len(clouds))
    logger.info(f"Running {job.n_trajectories} trajectories x {len(clouds)} clouds "
                f"({job.motion.kind}) on {workers} workers")
    if workers == 1:
        return [simulate_cloud(job, c, cloud) for c, cloud in enumerate(clouds)]
    return Parallel(n_jobs=workers)(
        delayed(simulate_cloud)(job, c, cloud) for c, cloud in enumerate(clouds))


@dataclass(frozen=True)
class OatModel:
    """chi Sz^2 on N atoms, chi in Hz"""
    n_atoms: int
    chi: float

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise IntegrationError(f"OAT model needs N >= 1, got {self.n_atoms}")
        if self.n_atoms > 100000:
            raise OracleSizeError(f"Dicke oracle limited to N <= 1e5, got {self.n_atoms}")

    @classmethod
    def from_uniform_coupling(cls, n_atoms, j):
        """All-to-all XY coupling j equals twisting with chi = -j"""
        return cls(n_atoms, -j)


@dataclass(frozen=True)
class OracleMoments:
    """Exact collective moments at one time and readout angle"""
    time: float
    moments: SpinMoments
    readout_angle: float

    @property
    def sz(self):
        return float(self.moments.mean[2])

    @property
    def sy(self):
        return float(self.moments.mean[1])

    @property
    def var_rotated(self):
        return float(self.moments.variance(self.readout_angle))

    @property
    def contrast(self):
        return self.moments.contrast

    @property
    def xi2(self):
        return self.var_rotated / (self.moments.n_atoms / 4.0)

    @property
    def xi2_min(self):
        return self.moments.squeezing()[0]

    @property
    def theta_opt(self):
        return self.moments.squeezing()[1]


def oat_dicke_oracle(model, tau, readout_angle=0.0):
    """Exact OAT moments for an initially +x polarized state after time ``tau``.

    The Dicke amplitudes acquire exp(-2 pi i chi tau m^2); binomial weights are
    formed in log space. Only phase differences between neighbouring m enter.
    """
    n = model.n_atoms
    s = n / 2.0
    k = np.arange(n + 1)
    m = k - s
    c = np.exp(0.5 * (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) - n * math.log(2.0)))
    phi = TWO_PI * model.chi * tau

    w = c * c
    sz = float(w @ m)
    sz2 = float(w @ (m * m))
    lo = m[:-1]
    a = np.sqrt((s - lo) * (s + lo + 1.0))
    pair = c[1:] * c[:-1] * a * np.exp(1j * phi * (2.0 * lo + 1.0))
    s_plus = pair.sum()
    anti_z_plus = (pair * (2.0 * lo + 1.0)).sum()
    if n >= 2:
        lo2 = m[:-2]
        s_plus2 = (c[2:] * c[:-2] * a[:-1] * a[1:] * np.exp(1j * phi * (4.0 * lo2 + 4.0))).sum()
    else:
        s_plus2 = 0.0 + 0.0j

    casimir = s * (s + 1.0)
    sxx = 0.5 * (casimir - sz2 + s_plus2.real)
    syy = 0.5 * (casimir - sz2 - s_plus2.real)
    mean = np.array([s_plus.real, s_plus.imag, sz])
    second = np.array([
        [sxx, 0.5 * s_plus2.imag, 0.5 * anti_z_plus.real],
        [0.5 * s_plus2.imag, syy, 0.5 * anti_z_plus.imag],
        [0.5 * anti_z_plus.real, 0.5 * anti_z_plus.imag, sz2],
    ])
    cov = second - np.outer(mean, mean)
    return OracleMoments(float(tau), SpinMoments(n, mean, cov), readout_angle)


def oat_scan(model, times, readout_angle=0.0):
    return [oat_dicke_oracle(model, t, readout_angle) for t in times]


PAULI = {
    'x': np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    'y': np.array([[0.0, -1j], [1j, 0.0]], dtype=complex),
    'z': np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


def _apply_site(psi, op, site, n_atoms):
    t = psi.reshape((2,) * n_atoms)
    t = np.moveaxis(np.tensordot(op, t, axes=([1], [site])), 0, site)
    return t.reshape(-1)


def _rotate_all(psi, phase, angle, n_atoms):
    u = spin_half_unitary(phase, angle)
    for site in range(n_atoms):
        psi = _apply_site(psi, u, site, n_atoms)
    return psi


def _spin_basis(n_atoms):
    """Sz of every site in every basis state; site 0 is the most significant bit, bit 0 = up"""
    states = np.arange(1 << n_atoms)
    bits = (states[:, None] >> (n_atoms - 1 - np.arange(n_atoms))[None, :]) & 1
    return states, bits, 0.5 - bits


def xy_hamiltonian(couplings):
    """Sparse H in Hz on the 2^N product basis"""
    n = couplings.n_atoms
    states, bits, sz = _spin_basis(n)
    rows, cols, vals = [states], [states], [sz @ couplings.h]
    for i in range(n):
        for j in range(i + 1, n):
            if couplings.J[i, j] == 0:
                continue
            src = states[bits[:, i] != bits[:, j]]
            rows.append(src ^ ((1 << (n - 1 - i)) | (1 << (n - 1 - j))))
            cols.append(src)
            vals.append(np.full(src.size, couplings.J[i, j]))
    dim = 1 << n
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))


class EdResult:
    """State vectors at the sample times of an exact evolution"""
    def __init__(self, n_atoms, sample_times, states):
        self.n_atoms = n_atoms
        self.sample_times = np.asarray(sample_times, dtype=float)
        self.states = np.asarray(states)
        self._sz = _spin_basis(n_atoms)[2].sum(axis=1)

    def state(self, index, readout=None):
        psi = self.states[index]
        if readout is not None:
            psi = _rotate_all(psi, readout[0], readout[1], self.n_atoms)
        return psi

    def moments(self, index, readout=None):
        psi = self.state(index, readout)
        vecs = [sum(_apply_site(psi, 0.5 * PAULI[a], site, self.n_atoms) for site in range(self.n_atoms))
                for a in ('x', 'y')]
        vecs.append(self._sz * psi)
        mean = np.array([np.vdot(psi, v).real for v in vecs])
        second = np.array([[np.vdot(va, vb).real for vb in vecs] for va in vecs])
        return SpinMoments(self.n_atoms, mean, second - np.outer(mean, mean))

    def expectation(self, index, ops, readout=None):
        """<prod S^a_site> for ops [(site, 'x'|'y'|'z'), ...]"""
        psi = self.state(index, readout)
        phi = psi
        for site, axis in reversed(list(ops)):
            phi = _apply_site(phi, 0.5 * PAULI[axis], site, self.n_atoms)
        return complex(np.vdot(psi, phi))

    def oracle_moments(self, index, readout_angle=0.0):
        return OracleMoments(float(self.sample_times[index]), self.moments(index), readout_angle)


def exact_ed_oracle(couplings, schedule, sample_times=None):
    """Dense evolution from all spins up through ``schedule`` (readout events skipped)"""
    n = couplings.n_atoms
    if n > ED_MAX_ATOMS:
        raise OracleSizeError(f"exact oracle limited to {ED_MAX_ATOMS} atoms, got {n}")
    dim = 1 << n
    needed = 16 * dim * (n * (n - 1) // 2 + 8)
    available = psutil.virtual_memory().available
    if needed > available:
        raise OracleSizeError(f"exact oracle needs ~{needed >> 20} MB, {available >> 20} MB available")

    sample_times = [schedule.duration] if sample_times is None else list(sample_times)
    H = xy_hamiltonian(couplings).astype(complex)
    psi = np.zeros(dim, dtype=complex)
    psi[0] = 1.0
    states = [None] * len(sample_times)
    for step in schedule.plan(sample_times):
        if step[0] == 'evolve':
            psi = expm_multiply(-1j * TWO_PI * (step[2] - step[1]) * H, psi)
        elif step[0] == 'pulse':
            psi = _rotate_all(psi, step[1].phase, step[1].angle, n)
        else:
            states[step[1]] = psi.copy()
    logger.debug(f"Exact evolution of {n} atoms over {len(sample_times)} sample times")
    return EdResult(n, sample_times, states)


def uniform_couplings(n_atoms, j, h=None):
    """All-to-all coupling matrix with every pair at ``j`` Hz"""
    J = np.full((n_atoms, n_atoms), float(j))
    np.fill_diagonal(J, 0.0)
    return CouplingMatrix(J, h)
