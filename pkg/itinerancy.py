# itinerancy.py
"""Atomic motion models: Metropolis-Hastings lattice hopping and the all-to-all limit."""
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from lattice import CouplingMatrix, FillingProfile, GeometryError, pair_couplings
from logger import Logger

logger = Logger()

EMPTY = -1


class HoppingError(ValueError):
    """Invalid hopping parameters or occupancy"""


def smooth_profile(mean_filling, sigma=1.0):
    """Gaussian-smoothed filling profile (reflective edges, clipped to [0, 1])"""
    grid = np.asarray(mean_filling, dtype=float)
    if grid.ndim != 2:
        raise HoppingError("mean filling must be a 2D grid")
    if np.any(grid < 0) or np.any(grid > 1):
        raise HoppingError("mean filling must lie in [0, 1]")
    if sigma < 0:
        raise HoppingError(f"smoothing sigma must be >= 0, got {sigma}")
    smoothed = gaussian_filter(grid, sigma=sigma, mode='reflect') if sigma > 0 else grid.copy()
    return FillingProfile(np.clip(smoothed, 0.0, 1.0))


@dataclass(frozen=True)
class HoppingConfig:
    """Tunneling rate t_hop (Hz), step dt (s) and the target filling P"""
    t_hop: float
    dt: float
    target: FillingProfile
    smoothing_sigma: float = 1.0

    def __post_init__(self):
        if not self.t_hop >= 0:
            raise HoppingError(f"t_hop must be >= 0, got {self.t_hop}")
        if not self.dt > 0:
            raise HoppingError(f"dt must be positive, got {self.dt}")
        if 8.0 * self.t_hop * self.dt > 1.0:
            raise HoppingError(
                f"hop probability 8*t*dt = {8.0 * self.t_hop * self.dt:.3f} exceeds 1; reduce dt")

    @property
    def move_probability(self):
        """4 t dt, the proposal probability per empty neighbour"""
        return 4.0 * self.t_hop * self.dt


@dataclass(frozen=True)
class MotionMode:
    kind: str
    hopping: HoppingConfig = None

    def __post_init__(self):
        if self.kind not in ('static', 'stochastic', 'oat_limit'):
            raise HoppingError(f"unknown motion mode {self.kind!r}")
        if (self.kind == 'stochastic') != (self.hopping is not None):
            raise HoppingError("stochastic mode needs a HoppingConfig and the others none")

    @classmethod
    def static(cls):
        return cls('static')

    @classmethod
    def stochastic(cls, hopping):
        return cls('stochastic', hopping)

    @classmethod
    def oat_limit(cls):
        return cls('oat_limit')

    @property
    def moves(self):
        return self.kind == 'stochastic' and self.hopping.t_hop > 0


class HoppingState:
    """Atom positions (N, 2) as (x, y) plus a grid of atom ids (EMPTY where vacant)"""
    def __init__(self, positions, shape):
        self.positions = np.array(positions, dtype=np.int64).reshape(-1, 2)
        self.grid = np.full(shape, EMPTY, dtype=np.int64)
        ny, nx = shape
        for atom, (x, y) in enumerate(self.positions):
            if not (0 <= x < nx and 0 <= y < ny):
                raise HoppingError(f"atom {atom} at ({x}, {y}) is off the lattice")
            if self.grid[y, x] != EMPTY:
                raise HoppingError(f"site ({x}, {y}) doubly occupied")
            self.grid[y, x] = atom

    @property
    def n_atoms(self):
        return len(self.positions)

    def occupation(self):
        return self.grid != EMPTY


def _empty_neighbors(state, x, y, axis):
    ny, nx = state.grid.shape
    out = []
    for step in (-1, 1):
        if axis == 0:
            cx, cy = x + step, y
        else:
            cx, cy = x, y + step
        if 0 <= cx < nx and 0 <= cy < ny and state.grid[cy, cx] == EMPTY:
            out.append((cx, cy))
    return out


def hop_step(state, hop, rng):
    """One timestep of hopping: an x sweep then a y sweep, atoms in random order.

    An atom with m empty neighbours along the axis proposes a move with
    probability 4 m t dt to one of them chosen uniformly; the move is accepted
    with min(1, P(j)/P(i)). Moves into P = 0 sites are rejected and atoms on
    P = 0 sites always leave. Atoms keep their ids so spins travel with them.

    Returns
    -------
    np.ndarray
        Sorted ids of atoms that moved.
    """
    if hop.t_hop == 0 or state.n_atoms == 0:
        return np.empty(0, dtype=np.int64)
    P = hop.target.p
    if P.shape != state.grid.shape:
        raise HoppingError(f"target profile {P.shape} does not match lattice {state.grid.shape}")
    p_move = hop.move_probability
    moved = set()
    n = state.n_atoms
    for axis in (0, 1):
        order = rng.permutation(n)
        u = rng.random(n)
        for atom in order[u[order] < 2.0 * p_move]:
            x, y = state.positions[atom]
            candidates = _empty_neighbors(state, x, y, axis)
            m = len(candidates)
            if m == 0 or u[atom] >= m * p_move:
                continue
            jx, jy = candidates[rng.integers(m)] if m > 1 else candidates[0]
            p_i, p_j = P[y, x], P[jy, jx]
            if p_j == 0:
                continue
            if p_i > 0 and p_j < p_i and rng.random() >= p_j / p_i:
                continue
            state.grid[y, x] = EMPTY
            state.grid[jy, jx] = atom
            state.positions[atom] = (jx, jy)
            moved.add(int(atom))
    return np.array(sorted(moved), dtype=np.int64)


def refresh_rows(J, h, positions, moved, scale, field_grid=None):
    """Recompute rows and columns of ``moved`` atoms of J (and h) in place"""
    pos = np.asarray(positions, dtype=float)
    for k in moved:
        dx = pos[k, 0] - pos[:, 0]
        dy = pos[k, 1] - pos[:, 1]
        row = pair_couplings(dx, dy, scale)
        J[k, :] = row
        J[:, k] = row
    if field_grid is not None and len(moved):
        idx = np.asarray(positions, dtype=int)[moved]
        h[moved] = field_grid[idx[:, 1], idx[:, 0]]


def refresh_couplings(previous, positions, moved, j_perp, rescale, field_grid=None):
    """Coupling matrix after atoms ``moved`` changed position.

    Only rows and columns of moved atoms are recomputed; the result equals
    a full rebuild from ``positions``.
    """
    J = np.array(previous.J, copy=True)
    h = np.array(previous.h, copy=True)
    refresh_rows(J, h, positions, np.asarray(moved, dtype=np.int64), rescale * j_perp, field_grid)
    return CouplingMatrix(J, h)


def oat_replacement(couplings):
    """Replace every off-diagonal coupling by the off-diagonal mean; h is kept"""
    n = couplings.n_atoms
    if n < 2:
        raise GeometryError("all-to-all replacement needs at least 2 atoms")
    mean = couplings.J.sum() / (n * (n - 1))
    J = np.full((n, n), mean)
    np.fill_diagonal(J, 0.0)
    logger.debug(f"All-to-all couplings: N={n}, mean J={mean:.6g} Hz")
    return CouplingMatrix(J, couplings.h)
