# lattice.py
"""Lattice geometry, atomic clouds, coupling matrices and the harmonic spin field.

Coordinates are integer site indices (x, y) with x the column and y the row of
an (ny, nx) grid. Atoms are ordered row-major everywhere.
"""
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from logger import Logger

logger = Logger()

SNAPSHOT_CHARS = {'.': 0, '1': 0, 'u': 1, 'd': -1}
SNAPSHOT_HEADER = "#snapshot"


class GeometryError(ValueError):
    """Invalid lattice, cloud or layout"""


class SnapshotFormatError(ValueError):
    """Malformed snapshot file; ``line`` and ``column`` are 1-based"""
    def __init__(self, message, line, column):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def _frozen(array, dtype):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class LatticeGeometry:
    """Square lattice of ``nx`` by ``ny`` sites with spacing in meters"""
    spacing: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (math.isfinite(self.spacing) and self.spacing > 0):
            raise GeometryError(f"spacing must be positive, got {self.spacing}")
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 1 or self.ny < 1:
            raise GeometryError(f"extent must be positive integers, got ({self.nx}, {self.ny})")
        object.__setattr__(self, 'nx', int(self.nx))
        object.__setattr__(self, 'ny', int(self.ny))

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def center(self):
        return ((self.nx - 1) / 2.0, (self.ny - 1) / 2.0)


@dataclass(frozen=True)
class Cloud:
    """Hard-core occupation of a lattice region with optional per-site labels.

    ``spin`` holds +1/-1 for spin-resolved snapshot sites and 0 elsewhere.
    ``header`` keeps the snapshot header tokens (key, text) in file order.
    """
    occupation: np.ndarray
    labels: np.ndarray = None
    spin: np.ndarray = None
    snapshot_id: str = ""
    header: tuple = ()

    def __post_init__(self):
        occ = np.asarray(self.occupation)
        if occ.ndim != 2:
            raise GeometryError("occupation must be a 2D grid")
        occ = _frozen(occ, bool)
        labels = self.labels
        if labels is None:
            labels = np.where(occ, 'A', '')
        labels = np.asarray(labels, dtype='<U8')
        if labels.shape != occ.shape:
            raise GeometryError("labels must match the occupation grid")
        labels = _frozen(np.where(occ, labels, ''), '<U8')
        if np.any(occ & (labels == '')):
            raise GeometryError("every occupied site needs a label")
        spin = np.zeros(occ.shape, dtype=np.int8) if self.spin is None else np.asarray(self.spin)
        if spin.shape != occ.shape:
            raise GeometryError("spin grid must match the occupation grid")
        object.__setattr__(self, 'occupation', occ)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'spin', _frozen(np.where(occ, spin, 0), np.int8))
        object.__setattr__(self, 'header', tuple(self.header))

    @property
    def shape(self):
        return self.occupation.shape

    @property
    def n_atoms(self):
        return int(self.occupation.sum())

    @property
    def positions(self):
        """(N, 2) integer (x, y) site coordinates in row-major order"""
        yx = np.argwhere(self.occupation)
        return yx[:, ::-1].copy()

    @property
    def atom_labels(self):
        return self.labels[self.occupation]

    def label_set(self):
        return sorted(set(self.atom_labels.tolist()))

    def with_labels_split(self, split_column):
        """Label atoms left of ``split_column`` as A and the rest as B"""
        ny, nx = self.shape
        if not 0 <= split_column <= nx:
            raise GeometryError(f"split column {split_column} outside 0..{nx}")
        cols = np.broadcast_to(np.arange(nx), self.shape)
        labels = np.where(cols < split_column, 'A', 'B')
        return Cloud(self.occupation, labels, self.spin, self.snapshot_id, self.header)

    def header_value(self, key, default=None):
        for k, v in self.header:
            if k == key:
                return v
        return default

    def geometry(self, spacing=None):
        """Geometry of this cloud's grid; spacing defaults to the snapshot header"""
        if spacing is None:
            text = self.header_value('spacing_nm')
            if text is None:
                raise GeometryError("cloud carries no spacing_nm")
            spacing = float(text) * 1e-9
        ny, nx = self.shape
        return LatticeGeometry(spacing, nx, ny)


@dataclass(frozen=True)
class FillingProfile:
    """Per-site mean occupation in [0, 1], with optional region labels"""
    p: np.ndarray
    labels: np.ndarray = None

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 2:
            raise GeometryError("filling profile must be a 2D grid")
        if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise GeometryError("filling must lie in [0, 1]")
        labels = self.labels
        if labels is None:
            labels = np.where(p > 0, 'A', '')
        labels = np.asarray(labels, dtype='<U8')
        if labels.shape != p.shape:
            raise GeometryError("labels must match the filling grid")
        object.__setattr__(self, 'p', _frozen(p, float))
        object.__setattr__(self, 'labels', _frozen(labels, '<U8'))

    @property
    def expected_atoms(self):
        return float(self.p.sum())


@dataclass(frozen=True)
class CouplingMatrix:
    """Pairwise XY exchange J (Hz) and longitudinal field h (Hz) over N atoms"""
    J: np.ndarray
    h: np.ndarray = field(default=None)

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise GeometryError(f"J must be square, got shape {J.shape}")
        if not np.array_equal(J, J.T):
            raise GeometryError("J must be symmetric")
        if np.any(np.diag(J) != 0):
            raise GeometryError("J must have a zero diagonal")
        h = np.zeros(J.shape[0]) if self.h is None else np.asarray(self.h, dtype=float)
        if h.shape != (J.shape[0],):
            raise GeometryError(f"h must have length {J.shape[0]}")
        object.__setattr__(self, 'J', _frozen(J, float))
        object.__setattr__(self, 'h', _frozen(h, float))

    @property
    def n_atoms(self):
        return self.J.shape[0]

    def with_field(self, h):
        return CouplingMatrix(self.J, h)

    def total(self):
        """Sum of J_ij over pairs i < j"""
        return float(np.triu(self.J, 1).sum())


def pair_couplings(dx, dy, scale):
    """scale / r^3 for site displacements (dx, dy); zero where r = 0"""
    r = np.sqrt(dx * dx + dy * dy)
    with np.errstate(divide='ignore'):
        out = scale / (r * r * r)
    return np.where(r > 0, out, 0.0)


def couplings_from_positions(positions, j_perp, rescale, h=None):
    """Dense coupling matrix J_ij = rescale * j_perp / r_ij^3 with r in sites"""
    pos = np.asarray(positions, dtype=float)
    dx = pos[:, None, 0] - pos[None, :, 0]
    dy = pos[:, None, 1] - pos[None, :, 1]
    return CouplingMatrix(pair_couplings(dx, dy, rescale * j_perp), h)


def build_couplings(geom, cloud, j_perp, rescale=0.86):
    """Coupling matrix over the occupied sites of ``cloud``.

    Parameters
    ----------
    geom : LatticeGeometry
    cloud : Cloud
    j_perp : float
        Nearest-neighbour exchange in Hz.
    rescale : float
        Uniform Wannier correction, 0 < rescale <= 1.
    """
    if not j_perp > 0:
        raise GeometryError(f"J_perp must be positive, got {j_perp}")
    if not 0 < rescale <= 1:
        raise GeometryError(f"rescale must lie in (0, 1], got {rescale}")
    if cloud.shape != geom.shape:
        raise GeometryError(f"cloud grid {cloud.shape} does not match lattice {geom.shape}")
    if cloud.n_atoms < 2:
        raise GeometryError(f"need at least 2 atoms, cloud has {cloud.n_atoms}")
    return couplings_from_positions(cloud.positions, j_perp, rescale)


def harmonic_disorder(geom, center=None, coeff=0.001):
    """Per-site field coeff * r^2 (Hz) with r in sites from ``center`` (x, y)"""
    if coeff < 0:
        raise GeometryError(f"disorder coefficient must be non-negative, got {coeff}")
    cx, cy = geom.center if center is None else center
    y, x = np.mgrid[0:geom.ny, 0:geom.nx]
    return coeff * ((x - cx) ** 2 + (y - cy) ** 2)


def field_at(positions, grid):
    """Gather a per-site grid onto atoms at (x, y) positions"""
    pos = np.asarray(positions, dtype=int)
    return np.asarray(grid, dtype=float)[pos[:, 1], pos[:, 0]]


def sample_cloud(geom, profile, rng):
    """Independent Bernoulli(p_i) occupation of every site"""
    if profile.p.shape != geom.shape:
        raise GeometryError(f"profile grid {profile.p.shape} does not match lattice {geom.shape}")
    occ = rng.random(geom.shape) < profile.p
    labels = np.where(occ, profile.labels, '')
    if np.any(occ & (labels == '')):
        labels = np.where(occ & (labels == ''), 'A', labels)
    return Cloud(occ, labels)


def mean_occupation(clouds):
    """Average occupation grid of a list of clouds"""
    if not clouds:
        raise GeometryError("no clouds to average")
    return np.mean([c.occupation for c in clouds], axis=0)


@dataclass(frozen=True)
class CloudShape:
    """Region of one cloud: a rectangle (width x height) or a disk of ``radius`` sites"""
    kind: str = 'rectangle'
    width: int = 18
    height: int = 18
    radius: float = 10.0
    fill: float = 0.8

    def __post_init__(self):
        if self.kind not in ('rectangle', 'disk'):
            raise GeometryError(f"unknown cloud shape {self.kind!r}")
        if self.kind == 'rectangle' and (self.width < 1 or self.height < 1):
            raise GeometryError("rectangle needs positive width and height")
        if self.kind == 'disk' and not self.radius > 0:
            raise GeometryError("disk needs a positive radius")
        if not 0 <= self.fill <= 1:
            raise GeometryError(f"fill must lie in [0, 1], got {self.fill}")

    @property
    def extent(self):
        """(width, height) of the bounding box in sites"""
        if self.kind == 'rectangle':
            return int(self.width), int(self.height)
        d = 2 * int(math.floor(self.radius)) + 1
        return d, d

    def mask(self, geom, x0, y0):
        """Boolean grid of this shape with its bounding box at (x0, y0)"""
        w, h = self.extent
        if x0 < 0 or y0 < 0 or x0 + w > geom.nx or y0 + h > geom.ny:
            raise GeometryError(f"{self.kind} of extent {w}x{h} at ({x0}, {y0}) does not fit the lattice")
        y, x = np.mgrid[0:geom.ny, 0:geom.nx]
        inside = (x >= x0) & (x < x0 + w) & (y >= y0) & (y < y0 + h)
        if self.kind == 'disk':
            cx, cy = x0 + (w - 1) / 2.0, y0 + (h - 1) / 2.0
            inside &= (x - cx) ** 2 + (y - cy) ** 2 <= self.radius ** 2
        return inside


def layout_profile(geom, regions):
    """Filling profile from explicit regions [(label, shape, (x0, y0)), ...]"""
    p = np.zeros(geom.shape)
    labels = np.full(geom.shape, '', dtype='<U8')
    taken = np.zeros(geom.shape, dtype=bool)
    for label, shape, (x0, y0) in regions:
        m = shape.mask(geom, x0, y0)
        if np.any(m & taken):
            raise GeometryError(f"region {label} overlaps another region")
        taken |= m
        p[m] = shape.fill
        labels[m] = label
    return FillingProfile(p, labels)


def single_cloud_layout(geom, shape):
    """One centered cloud labeled A"""
    w, h = shape.extent
    return layout_profile(geom, [('A', shape, ((geom.nx - w) // 2, (geom.ny - h) // 2))])


def two_cloud_layout(geom, shape, gap):
    """Two clouds side by side along x, separated by ``gap`` empty columns.

    ``shape`` is one CloudShape for both clouds or a pair (left, right). The
    left cloud is labeled A and the right one B. The pair is centered.
    """
    left, right = (shape, shape) if isinstance(shape, CloudShape) else tuple(shape)
    (wl, hl), (wr, hr) = left.extent, right.extent
    total = wl + gap + wr
    if gap < 0:
        raise GeometryError(f"gap {gap} makes the clouds overlap")
    if total > geom.nx or max(hl, hr) > geom.ny:
        raise GeometryError(f"two clouds of total width {total} do not fit a {geom.nx}x{geom.ny} lattice")
    x0 = (geom.nx - total) // 2
    profile = layout_profile(geom, [
        ('A', left, (x0, (geom.ny - hl) // 2)),
        ('B', right, (x0 + wl + gap, (geom.ny - hr) // 2)),
    ])
    logger.debug(f"Two-cloud layout: expected atoms {profile.expected_atoms:.1f}, gap {gap}")
    return profile


def parse_snapshots(text, split_column=None):
    """Parse snapshot text into clouds; see format_snapshots for the layout.

    Lines may end in CRLF.
    """
    clouds = []
    lines = [line[:-1] if line.endswith('\r') else line for line in text.split('\n')]
    if lines and lines[-1] == '':
        lines.pop()
    i = 0
    while i < len(lines):
        while i < len(lines) and lines[i] == '':
            i += 1
        if i >= len(lines):
            break
        header_no = i + 1
        snap_id, header = _parse_header(lines[i], header_no)
        i += 1
        rows = []
        width = None
        while i < len(lines) and lines[i] != '':
            line = lines[i]
            for col, ch in enumerate(line, start=1):
                if ch not in SNAPSHOT_CHARS:
                    raise SnapshotFormatError(f"unexpected character {ch!r}", i + 1, col)
            if width is None:
                width = len(line)
            elif len(line) != width:
                raise SnapshotFormatError(
                    f"ragged row of length {len(line)}, expected {width}", i + 1, min(len(line), width) + 1)
            rows.append(line)
            i += 1
        if not rows:
            raise SnapshotFormatError("snapshot block has no grid rows", header_no, 1)
        grid = np.array([list(r) for r in rows])
        occ = grid != '.'
        spin = np.where(grid == 'u', 1, np.where(grid == 'd', -1, 0)).astype(np.int8)
        cloud = Cloud(occ, None, spin, snap_id, header)
        if split_column is not None:
            cloud = cloud.with_labels_split(split_column)
        clouds.append(cloud)
    return clouds


def _parse_header(line, line_no):
    tokens = line.split(' ')
    if tokens[0] != SNAPSHOT_HEADER:
        raise SnapshotFormatError(f"expected '{SNAPSHOT_HEADER} <id> spacing_nm=<a>'", line_no, 1)
    if len(tokens) < 3 or not tokens[1]:
        raise SnapshotFormatError("header needs an id and spacing_nm", line_no, len(SNAPSHOT_HEADER) + 2)
    header = []
    col = len(tokens[0]) + len(tokens[1]) + 3
    for token in tokens[2:]:
        key, sep, value = token.partition('=')
        if not sep or not key or not value:
            raise SnapshotFormatError(f"malformed header token {token!r}", line_no, col)
        try:
            float(value)
        except ValueError:
            raise SnapshotFormatError(f"header value {value!r} is not a number", line_no, col + len(key) + 1) from None
        header.append((key, value))
        col += len(token) + 1
    if header[0][0] != 'spacing_nm':
        raise SnapshotFormatError("first header field must be spacing_nm", line_no, len(tokens[0]) + len(tokens[1]) + 3)
    return tokens[1], tuple(header)


def ingest_snapshots(path, split_column=None):
    """Read a snapshot file into a list of Cloud (the file is never modified)"""
    text = Path(path).read_text(encoding='utf-8')
    clouds = parse_snapshots(text, split_column)
    logger.info(f"Ingested {len(clouds)} snapshots from {path}")
    return clouds


def format_snapshots(clouds):
    """Canonical snapshot text.

    One block per cloud: a header line ``#snapshot <id> spacing_nm=<a> [key=value ...]``
    followed by ny rows of nx characters ('.' empty, '1' atom, 'u'/'d' spin-resolved).
    Blocks are separated by one blank line; the text ends with a newline.
    """
    blocks = []
    for k, cloud in enumerate(clouds):
        header = cloud.header or (('spacing_nm', '266'),)
        tokens = [SNAPSHOT_HEADER, cloud.snapshot_id or str(k)]
        tokens += [f"{key}={value}" for key, value in header]
        chars = np.where(cloud.occupation,
                         np.where(cloud.spin > 0, 'u', np.where(cloud.spin < 0, 'd', '1')), '.')
        rows = [''.join(row) for row in chars]
        blocks.append('\n'.join([' '.join(tokens)] + rows))
    return '\n\n'.join(blocks) + '\n'


def write_snapshots(path, clouds):
    Path(path).write_text(format_snapshots(clouds), encoding='utf-8')
