# observables.py
"""Shot-level estimators: contrast, noise squeezing, Wineland parameter and spin correlations.

A shot records one outcome per lattice site: sigma = +1 (up) or -1 (down) on
occupied sites and 0 on empty ones, whether the shot comes from a spin-resolved
image or from a DTWA trajectory.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from logger import Logger
from utils import NumericalError, db_error, to_db

logger = Logger()

LOW_PERCENTILE = 16.0
HIGH_PERCENTILE = 84.0
SEM_FLOOR = 0.01
SHOT_MODES = ('trajectory-direct', 'binomial-resample')


class EstimatorError(NumericalError):
    """Estimator undefined for the given shots"""


class FitError(NumericalError):
    """Curve fit failed or was under-determined"""


@dataclass
class ShotRecord:
    """One shot: per-site outcome and the site labels"""
    sigma: np.ndarray
    occupied: np.ndarray
    labels: np.ndarray

    @property
    def n_up(self):
        return int(np.sum(self.occupied & (self.sigma > 0)))

    @property
    def n_down(self):
        return int(np.sum(self.occupied & (self.sigma < 0)))


@dataclass
class ShotSet:
    """Shots sharing one lattice: sigma and occupied (m, ny, nx), labels and mask (ny, nx)"""
    sigma: np.ndarray
    occupied: np.ndarray
    labels: np.ndarray
    mask: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.occupied = np.asarray(self.occupied, dtype=bool)
        if self.sigma.ndim != 3 or self.sigma.shape != self.occupied.shape:
            raise EstimatorError("sigma and occupied must both be (shots, ny, nx)")
        self.labels = np.asarray(self.labels, dtype='<U8')
        if self.labels.shape != self.sigma.shape[1:]:
            raise EstimatorError("labels must match the lattice of the shots")
        self.mask = np.ones(self.labels.shape, dtype=bool) if self.mask is None else np.asarray(self.mask, dtype=bool)
        self.sigma = np.where(self.occupied, self.sigma, 0.0)

    @property
    def n_shots(self):
        return self.sigma.shape[0]

    @property
    def shape(self):
        return self.labels.shape

    def __len__(self):
        return self.n_shots

    def __getitem__(self, index):
        return ShotRecord(self.sigma[index], self.occupied[index], self.labels)

    def subset(self, indices):
        indices = np.asarray(indices)
        return ShotSet(self.sigma[indices], self.occupied[indices], self.labels, self.mask, dict(self.metadata))

    def with_mask(self, mask):
        return ShotSet(self.sigma, self.occupied, self.labels, np.asarray(mask, dtype=bool), dict(self.metadata))

    def _sites(self, label=None):
        sites = self.mask
        if label is not None:
            sites = sites & (self.labels == label)
        return sites

    def magnetization(self, label=None):
        """N_up - N_down per shot over active sites (with ``label`` if given)"""
        return (self.sigma * self._sites(label)).sum(axis=(1, 2))

    def atom_number(self, label=None):
        return (self.occupied & self._sites(label)).sum(axis=(1, 2))

    def has_label(self, label):
        return bool(np.any(self._sites(label)))

    @classmethod
    def from_snapshots(cls, clouds, metadata=None, labels=None):
        """Spin-resolved snapshot clouds as shots; unresolved atoms are rejected.

        Without ``labels`` each site takes the label it carries in any snapshot.
        """
        if not clouds:
            raise EstimatorError("no snapshots")
        shape = clouds[0].shape
        for cloud in clouds:
            if cloud.shape != shape:
                raise EstimatorError("snapshots differ in lattice shape")
            if np.any(cloud.occupation & (cloud.spin == 0)):
                raise EstimatorError(f"snapshot {cloud.snapshot_id} has atoms without spin resolution")
        sigma = np.stack([c.spin.astype(float) for c in clouds])
        occupied = np.stack([c.occupation for c in clouds])
        if labels is None:
            labels = np.full(shape, '', dtype='<U8')
            for cloud in clouds:
                labels = np.where(cloud.occupation, cloud.labels, labels)
        return cls(sigma, occupied, labels, None, dict(metadata or {}))

    @classmethod
    def concatenate(cls, sets):
        sets = list(sets)
        if not sets:
            raise EstimatorError("nothing to concatenate")
        first = sets[0]
        for s in sets[1:]:
            if s.shape != first.shape or not np.array_equal(s.labels, first.labels):
                raise EstimatorError("shot sets differ in geometry")
        common = {k: v for k, v in first.metadata.items() if all(s.metadata.get(k) == v for s in sets)}
        mask = np.logical_and.reduce([s.mask for s in sets])
        return cls(np.concatenate([s.sigma for s in sets]), np.concatenate([s.occupied for s in sets]),
                   first.labels, mask, common)


def synthetic_shots(ensembles, time_index, mode='trajectory-direct', rng=None,
                    readout=None, metadata=None):
    """One shot per trajectory from DTWA ensembles.

    trajectory-direct: up iff s^z > 0 after the readout rotation.
    binomial-resample: up with probability 1/2 + s^z clipped to [0, 1].

    Parameters
    ----------
    ensembles : TrajectoryEnsemble or list of them
    time_index : int
    readout : (phase, angle) or None
    """
    if mode not in SHOT_MODES:
        raise EstimatorError(f"unknown shot mode {mode!r}")
    if mode == 'binomial-resample' and rng is None:
        raise EstimatorError("binomial resampling needs a generator")
    if not isinstance(ensembles, (list, tuple)):
        ensembles = [ensembles]
    sets = []
    for ens in ensembles:
        spins = ens.read_out(time_index, *readout) if readout is not None else ens.at(time_index)
        sz = spins[..., 2]
        if mode == 'trajectory-direct':
            values = np.where(sz > 0, 1.0, -1.0)
        else:
            p_up = np.clip(0.5 + sz, 0.0, 1.0)
            values = np.where(rng.random(p_up.shape) < p_up, 1.0, -1.0)
        labels = ens.site_labels
        ny, nx = labels.shape
        b = ens.n_trajectories
        sigma = np.zeros((b, ny, nx))
        occupied = np.zeros((b, ny, nx), dtype=bool)
        pos = ens.positions[:, time_index]
        rows = np.repeat(np.arange(b), ens.n_atoms)
        xs, ys = pos[..., 0].ravel(), pos[..., 1].ravel()
        sigma[rows, ys, xs] = values.ravel()
        occupied[rows, ys, xs] = True
        sets.append(ShotSet(sigma, occupied, labels, None, dict(metadata or {})))
    return ShotSet.concatenate(sets)


@dataclass
class ContrastEstimate:
    value: float
    lo: float
    hi: float
    samples: np.ndarray = None


@dataclass
class SqueezingEstimate:
    """Noise squeezing with percentile interval; contrast and Wineland parts when known"""
    xi2: float
    xi2_lo: float
    xi2_hi: float
    samples: np.ndarray = None
    contrast: float = math.nan
    contrast_lo: float = math.nan
    contrast_hi: float = math.nan
    xi2_r: float = math.nan
    xi2_r_lo: float = math.nan
    xi2_r_hi: float = math.nan

    def __post_init__(self):
        if self.xi2_lo > self.xi2_hi:
            raise EstimatorError("interval bounds out of order")

    @property
    def xi2_db(self):
        return to_db(self.xi2)

    @property
    def xi2_r_db(self):
        return to_db(self.xi2_r)

    @property
    def half_spread(self):
        return 0.5 * (self.xi2_hi - self.xi2_lo)


def _percentiles(samples):
    samples = np.asarray(samples, dtype=float)
    samples = samples[np.isfinite(samples)]
    if not samples.size:
        return math.nan, math.nan
    lo, hi = np.percentile(samples, [LOW_PERCENTILE, HIGH_PERCENTILE])
    return float(lo), float(hi)


def contrast_direct(ensembles, time_index):
    """Mean over trajectories of |sum_i s_i| / (N/2), clipped to [0, 1]"""
    values = per_trajectory_contrast(ensembles, time_index)
    if not values.size:
        raise EstimatorError("empty ensemble")
    return float(np.clip(values.mean(), 0.0, 1.0))


def per_trajectory_contrast(ensembles, time_index):
    if not isinstance(ensembles, (list, tuple)):
        ensembles = [ensembles]
    parts = [np.linalg.norm(e.collective(time_index), axis=1) / (e.n_atoms / 2.0) for e in ensembles]
    return np.concatenate(parts) if parts else np.empty(0)


def contrast_bootstrap(ensembles, time_index, rng, n_resamples=500):
    """contrast_direct with a percentile interval over resampled trajectories"""
    values = per_trajectory_contrast(ensembles, time_index)
    if not values.size:
        raise EstimatorError("empty ensemble")
    idx = rng.integers(0, values.size, size=(n_resamples, values.size))
    samples = np.clip(values[idx].mean(axis=1), 0.0, 1.0)
    lo, hi = _percentiles(samples)
    return ContrastEstimate(float(np.clip(values.mean(), 0.0, 1.0)), lo, hi, samples)


def _sine(phi, a, b, d):
    return a * np.sin(phi) + b * np.cos(phi) + d


def _fit_sine(phases, means, sems, retries=3):
    design = np.column_stack([np.sin(phases), np.cos(phases), np.ones_like(phases)])
    p0, *_ = np.linalg.lstsq(design / sems[:, None], means / sems, rcond=None)
    maxfev = 2000
    for _ in range(retries):
        try:
            popt, _ = curve_fit(_sine, phases, means, p0=p0, sigma=sems, absolute_sigma=True, maxfev=maxfev)
            return popt
        except RuntimeError:
            maxfev *= 4
    raise FitError(f"Ramsey sinusoid fit did not converge after {retries} attempts")


def _phase_groups(phases, ratios):
    phases = np.asarray(phases, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    keys = np.unique(phases)
    return keys, [ratios[phases == k] for k in keys]


def _group_stats(groups):
    means = np.array([g.mean() for g in groups])
    sems = np.array([g.std(ddof=1) / math.sqrt(g.size) if g.size > 1 else 0.0 for g in groups])
    return means, np.where(sems > 0, sems, SEM_FLOOR)


def contrast_ramsey_fit(phases, ratios, rng, n_resamples=500):
    """Ramsey contrast from per-shot S_z/S ratios taken at several readout phases.

    A sin(phi + phi0) + d is fit to the per-phase means weighted by their
    standard errors (0.01 where the error vanishes). Shots are resampled within
    each phase; each resample is refit and its amplitude clipped to [0, 1].
    Returns the median with the 16/84 percentiles.
    """
    keys, groups = _phase_groups(phases, ratios)
    if keys.size < 4:
        raise FitError(f"need at least 4 distinct readout phases, got {keys.size}")
    amplitudes = np.empty(n_resamples)
    for r in range(n_resamples):
        resampled = [g[rng.integers(0, g.size, size=g.size)] for g in groups]
        means, sems = _group_stats(resampled)
        a, b, _ = _fit_sine(keys, means, sems)
        amplitudes[r] = min(max(math.hypot(a, b), 0.0), 1.0)
    lo, hi = _percentiles(amplitudes)
    return ContrastEstimate(float(np.median(amplitudes)), lo, hi, amplitudes)


def ramsey_ratios(shot_sets):
    """Concatenated (phase in rad, S_z/S) per shot from shot sets tagged with phase_deg"""
    phases, ratios = [], []
    for shots in shot_sets:
        if 'phase_deg' not in shots.metadata:
            raise EstimatorError("shot set carries no phase_deg")
        n = shots.atom_number()
        keep = n > 0
        ratios.append(shots.magnetization()[keep] / n[keep])
        phases.append(np.full(int(keep.sum()), math.radians(float(shots.metadata['phase_deg']))))
    return np.concatenate(phases), np.concatenate(ratios)


def _sql(m, n):
    """4 p (1 - p) <N> with p = (1 + <M/N>) / 2, along the last axis"""
    ratio = np.where(n > 0, m / np.where(n > 0, n, 1), np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        x = np.nanmean(ratio, axis=-1)
    return (1.0 - x * x) * n.mean(axis=-1)


def _bootstrap_index(rng, m, n_resamples):
    return rng.integers(0, m, size=(n_resamples, m))


def xi2_from_counts(m, n, rng, n_resamples=1000):
    """Noise squeezing Var[M] / sigma_SQL^2 from per-shot magnetization M and atom number N"""
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    if m.size < 2:
        raise EstimatorError(f"need at least 2 shots, got {m.size}")
    if not np.any(n > 0):
        raise EstimatorError("no atoms in any shot")
    sql = float(_sql(m, n))
    if not sql > 1e-12 * max(1.0, float(n.mean())):
        raise EstimatorError("degenerate SQL: all shots fully polarized")
    value = float(np.var(m, ddof=1) / sql)

    idx = _bootstrap_index(rng, m.size, n_resamples)
    mb, nb = m[idx], n[idx]
    sqlb = _sql(mb, nb)
    with np.errstate(invalid='ignore', divide='ignore'):
        samples = np.where(sqlb > 0, np.var(mb, axis=1, ddof=1) / sqlb, np.nan)
    lo, hi = _percentiles(samples)
    return SqueezingEstimate(value, min(lo, hi), max(lo, hi), samples)


def xi2(shots, rng, label=None, n_resamples=1000):
    """Single-cloud noise squeezing of a ShotSet"""
    return xi2_from_counts(shots.magnetization(label), shots.atom_number(label), rng, n_resamples)


def differential_xi2_from_counts(m_a, n_a, m_b, n_b, rng, n_resamples=1000):
    """Var[M_A - M_B] / (sigma_SQL,A^2 + sigma_SQL,B^2)"""
    m_a, n_a = np.asarray(m_a, dtype=float), np.asarray(n_a, dtype=float)
    m_b, n_b = np.asarray(m_b, dtype=float), np.asarray(n_b, dtype=float)
    if m_a.size < 2 or m_a.size != m_b.size:
        raise EstimatorError("need at least 2 shots with both clouds")
    if not np.any(n_b > 0) or not np.any(n_a > 0):
        raise EstimatorError("one cloud is empty in every shot; use the single-cloud estimator")
    sql = float(_sql(m_a, n_a) + _sql(m_b, n_b))
    if not sql > 0:
        raise EstimatorError("degenerate SQL: both clouds fully polarized")
    d = m_a - m_b
    value = float(np.var(d, ddof=1) / sql)

    idx = _bootstrap_index(rng, d.size, n_resamples)
    sqlb = _sql(m_a[idx], n_a[idx]) + _sql(m_b[idx], n_b[idx])
    with np.errstate(invalid='ignore', divide='ignore'):
        samples = np.where(sqlb > 0, np.var(d[idx], axis=1, ddof=1) / sqlb, np.nan)
    lo, hi = _percentiles(samples)
    return SqueezingEstimate(value, min(lo, hi), max(lo, hi), samples)


def xi2_differential(shots, rng, labels=('A', 'B'), n_resamples=1000):
    """Differential noise squeezing between two labeled clouds"""
    for label in labels:
        if not shots.has_label(label):
            raise EstimatorError(f"label {label!r} missing from the shots")
    a, b = labels
    return differential_xi2_from_counts(
        shots.magnetization(a), shots.atom_number(a),
        shots.magnetization(b), shots.atom_number(b), rng, n_resamples)


def wineland(estimate, contrast, rng, n_resamples=500):
    """Attach contrast and xi2_R = xi2 / C^2 to ``estimate``.

    The interval combines resampled xi2 and contrast bootstrap distributions.
    """
    xi2_r = estimate.xi2 / contrast.value ** 2 if contrast.value > 0 else math.inf
    lo = hi = math.nan
    if estimate.samples is not None and contrast.samples is not None:
        xs = estimate.samples[np.isfinite(estimate.samples)]
        cs = contrast.samples[np.isfinite(contrast.samples)]
        if xs.size and cs.size:
            with np.errstate(divide='ignore'):
                combined = xs[rng.integers(0, xs.size, n_resamples)] / cs[rng.integers(0, cs.size, n_resamples)] ** 2
            lo, hi = _percentiles(combined)
    return SqueezingEstimate(
        estimate.xi2, estimate.xi2_lo, estimate.xi2_hi, estimate.samples,
        contrast.value, contrast.lo, contrast.hi, xi2_r, lo, hi)


@dataclass
class MinimumFit:
    """Fitted minimum of xi2 over readout angle"""
    model: str
    minimum: float
    error: float
    theta_min: float
    params: np.ndarray
    cov: np.ndarray
    band_theta: np.ndarray
    band_lo: np.ndarray
    band_hi: np.ndarray

    @property
    def minimum_db(self):
        return to_db(self.minimum)

    @property
    def error_db(self):
        return db_error(self.minimum, self.error)


def _sinusoid(theta, c, p, q):
    return c + p * np.sin(2.0 * theta) + q * np.cos(2.0 * theta)


def _quadratic(theta, a, b, c):
    return a * theta * theta + b * theta + c


def _model_minimum(model, params):
    if model == 'sinusoid':
        c, p, q = params[..., 0], params[..., 1], params[..., 2]
        theta = 0.5 * (np.arctan2(p, q) + np.pi)
        return c - np.hypot(p, q), np.where(theta > np.pi / 2, theta - np.pi, theta)
    a, b, c = params[..., 0], params[..., 1], params[..., 2]
    with np.errstate(divide='ignore', invalid='ignore'):
        vertex = -b / (2.0 * a)
        return np.where(a > 0, c - b * b / (4.0 * a), np.nan), vertex


FIT_MODELS = {'sinusoid': (_sinusoid, 5), 'quadratic': (_quadratic, 4)}


def min_squeezing_fit(thetas, values, errors, rng, model='sinusoid', n_draws=1000, band_points=101):
    """Weighted fit of xi2 against readout angle (radians) and its minimum.

    ``errors`` are per-point uncertainties (half the 84-16 percentile spread);
    None fits unweighted. The uncertainty of the minimum and the curve band
    come from parameter draws out of the fit covariance.
    """
    if model not in FIT_MODELS:
        raise FitError(f"unknown fit model {model!r}")
    func, min_points = FIT_MODELS[model]
    thetas = np.asarray(thetas, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = np.isfinite(values)
    sigma = None
    if errors is not None:
        errors = np.asarray(errors, dtype=float)
        ok &= np.isfinite(errors) & (errors > 0)
        sigma = errors[ok]
    thetas, values = thetas[ok], values[ok]
    if np.unique(thetas).size < min_points:
        raise FitError(f"{model} fit needs at least {min_points} angles, got {np.unique(thetas).size}")

    if model == 'sinusoid':
        design = np.column_stack([np.ones_like(thetas), np.sin(2 * thetas), np.cos(2 * thetas)])
    else:
        design = np.column_stack([thetas * thetas, thetas, np.ones_like(thetas)])
    w = np.ones_like(values) if sigma is None else 1.0 / sigma
    p0, *_ = np.linalg.lstsq(design * w[:, None], values * w, rcond=None)
    try:
        popt, pcov = curve_fit(func, thetas, values, p0=p0, sigma=sigma,
                               absolute_sigma=sigma is not None, maxfev=10000)
    except (RuntimeError, ValueError) as e:
        raise FitError(f"{model} fit failed: {e}") from e
    if not np.all(np.isfinite(pcov)):
        raise FitError(f"{model} fit covariance is undefined")

    minimum, theta_min = _model_minimum(model, popt)
    minimum, theta_min = float(minimum), float(theta_min)
    if not math.isfinite(minimum):
        raise FitError("fitted curve has no minimum")
    draws = rng.multivariate_normal(popt, pcov, size=n_draws, check_valid='ignore')
    draw_min, _ = _model_minimum(model, draws)
    lo, hi = _percentiles(draw_min)
    grid = np.linspace(thetas.min(), thetas.max(), band_points)
    curves = func(grid[None, :], draws[:, 0:1], draws[:, 1:2], draws[:, 2:3])
    band_lo, band_hi = np.percentile(curves, [LOW_PERCENTILE, HIGH_PERCENTILE], axis=0)
    error = 0.5 * (hi - lo) if math.isfinite(lo) else math.nan
    return MinimumFit(model, minimum, error, theta_min, popt, pcov, grid, band_lo, band_hi)


@dataclass
class CorrelationMap:
    """Connected correlator per displacement; NaN where no site pair contributed"""
    offsets: np.ndarray
    g2: np.ndarray
    n_pairs: np.ndarray

    def rows(self):
        """(dx, dy, g2, n_pairs) in row-major displacement order"""
        for iy, dy in enumerate(self.offsets):
            for ix, dx in enumerate(self.offsets):
                yield int(dx), int(dy), float(self.g2[iy, ix]), int(self.n_pairs[iy, ix])


def _raw_correlations(shots, offsets):
    sig = shots.sigma
    valid = shots.occupied & shots.mask[None]
    _, ny, nx = sig.shape
    size = len(offsets)
    g2 = np.full((size, size), np.nan)
    n_pairs = np.zeros((size, size), dtype=int)
    for iy, dy in enumerate(offsets):
        for ix, dx in enumerate(offsets):
            if dx == 0 and dy == 0:
                continue
            y0, y1 = max(0, -dy), ny - max(0, dy)
            x0, x1 = max(0, -dx), nx - max(0, dx)
            if y1 <= y0 or x1 <= x0:
                continue
            a = sig[:, y0:y1, x0:x1]
            b = sig[:, y0 + dy:y1 + dy, x0 + dx:x1 + dx]
            both = valid[:, y0:y1, x0:x1] & valid[:, y0 + dy:y1 + dy, x0 + dx:x1 + dx]
            n = both.sum(axis=0)
            use = n >= 2
            if not np.any(use):
                continue
            nn = np.where(use, n, 1)
            sab = (a * b * both).sum(axis=0) / nn
            sa = (a * both).sum(axis=0) / nn
            sb = (b * both).sum(axis=0) / nn
            g = (sab - sa * sb)[use]
            g2[iy, ix] = g.mean()
            n_pairs[iy, ix] = int(use.sum())
    return g2, n_pairs


def symmetrize_d4(grid):
    """Average a square displacement map over the eight rotations and reflections.

    Orbit values are sorted before averaging so every member of an orbit gets
    the identical number.
    """
    grid = np.asarray(grid, dtype=float)
    images = []
    for k in range(4):
        rotated = np.rot90(grid, k)
        images.append(rotated)
        images.append(rotated.T)
    stack = np.sort(np.stack(images), axis=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return np.nanmean(stack, axis=0)


def g2_correlations(shots, window=9):
    """Windowed connected correlations <s_i s_j> - <s_i><s_j> with s = sign-valued sigma.

    For each displacement inside the window every site pair is averaged over the
    shots where both sites are occupied and active; pair values are averaged
    over centers; the map is then D4-symmetrized. The zero displacement is
    excluded.
    """
    if shots.n_shots < 2:
        raise EstimatorError("need at least 2 shots for correlations")
    if window < 1 or window % 2 == 0:
        raise EstimatorError(f"window must be a positive odd size, got {window}")
    half = window // 2
    offsets = np.arange(-half, half + 1)
    g2, n_pairs = _raw_correlations(shots, offsets)
    counts = np.sum([np.rot90(n_pairs, k) for k in range(4)] + [np.rot90(n_pairs, k).T for k in range(4)], axis=0) // 8
    return CorrelationMap(offsets, symmetrize_d4(g2), counts)


def radial_average(corr):
    """(r, mean g2, bins) over displacements at equal distance, skipping missing values"""
    dx, dy = np.meshgrid(corr.offsets, corr.offsets)
    r = np.round(np.hypot(dx, dy), 9)
    out = []
    for radius in np.unique(r):
        if radius == 0:
            continue
        vals = corr.g2[(r == radius) & np.isfinite(corr.g2)]
        out.append((float(radius), float(vals.mean()) if vals.size else math.nan, int(vals.size)))
    return out


def shot_filter(shots, low=12.5, high=87.5, site_fraction=0.1):
    """Mask dim sites, then keep shots whose atom number lies in the percentile band.

    Sites whose mean occupation is below ``site_fraction`` of the maximum mean
    occupation are masked before atoms are counted. The band is inclusive.
    """
    if shots.n_shots == 0:
        raise EstimatorError("no shots to filter")
    mean_occ = shots.occupied.mean(axis=0)
    peak = mean_occ.max()
    if not peak > 0:
        raise EstimatorError("all shots are empty")
    mask = shots.mask & (mean_occ >= site_fraction * peak)
    masked = shots.with_mask(mask)
    counts = masked.atom_number()
    lo, hi = np.percentile(counts, [low, high])
    keep = np.flatnonzero((counts >= lo) & (counts <= hi))
    if keep.size == 0:
        raise EstimatorError("every shot was filtered out")
    dropped = shots.n_shots - keep.size
    if dropped:
        logger.debug(f"Shot filter dropped {dropped} of {shots.n_shots} shots (band {lo:.1f}..{hi:.1f} atoms)")
    return masked.subset(keep)
