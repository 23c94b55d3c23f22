# harness.py
"""Scenario runners: a ScenarioConfig in, a RunResult of tables out.

Every runner is deterministic in ``run.seed``; the worker count only changes
how clouds are spread over processes.
"""
import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from config import CHOICES, ConfigError
from dtwa_core import (BOOTSTRAP_STREAM, CLOUD_STREAM, SHOT_STREAM, EngineJob, IntegratorConfig,
                       OatModel, exact_ed_oracle, oat_dicke_oracle, run_ensemble, stream)
from itinerancy import HoppingConfig, MotionMode, oat_replacement, smooth_profile
from lattice import (CloudShape, GeometryError, LatticeGeometry, build_couplings, field_at,
                     harmonic_disorder, ingest_snapshots, mean_occupation, sample_cloud,
                     single_cloud_layout, two_cloud_layout)
from logger import Logger
from observables import (ContrastEstimate, EstimatorError, FitError, ShotSet, contrast_bootstrap,
                         contrast_ramsey_fit, g2_correlations, min_squeezing_fit, radial_average, ramsey_ratios,
                         shot_filter, synthetic_shots, wineland, xi2, xi2_differential)
from pulses import ramsey_schedule, wahuha_echo_schedule
from spin_couplings import (CouplingRow, HyperfineQubit, coupling_scan, dipolar_prefactor,
                            jz_coupling_factor_exact)
from utils import Timer, stable_hash, to_db
from version import get_version_string

logger = Logger()

RESULT_COLUMNS = ('mode', 'tau_s', 'theta_deg', 'xi2', 'xi2_lo', 'xi2_hi', 'xi2_db',
                  'contrast', 'contrast_lo', 'contrast_hi', 'xi2R', 'xi2R_lo', 'xi2R_hi', 'xi2R_db', 'n_shots')
FIT_COLUMNS = ('mode', 'tau_s', 'model', 'min_xi2', 'min_xi2_err', 'min_xi2_db', 'min_xi2_err_db',
               'min_xi2R_db', 'theta_min_deg')
CORRELATION_COLUMNS = ('mode', 'tau_s', 'dx', 'dy', 'g2', 'n_pairs')
RADIAL_COLUMNS = ('mode', 'tau_s', 'r', 'g2', 'n_bins')
SHEARING_COLUMNS = ('mode', 'theta0_deg', 'tau_s', 'sy_norm', 'sy_norm_err')
CONTRAST_COLUMNS = ('mode', 'tau_s', 'contrast', 'contrast_lo', 'contrast_hi', 'mean_atoms')
ORACLE_COLUMNS = ('tau_s', 'quantity', 'dtwa', 'ed', 'dicke', 'dtwa_minus_ed', 'ed_minus_dicke')
ORACLE_QUANTITIES = ('sx', 'sy', 'sz', 'contrast', 'xi2_min', 'theta_opt')

# Second spawn-key slot separating the draws made at one (mode, tau) grid point
SQUEEZING_SLOT = 0
RAMSEY_SLOT = 1
FIT_SLOT = 2


@dataclass
class ResultTable:
    columns: tuple
    rows: list = field(default_factory=list)

    def append(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row of {len(values)} values for {len(self.columns)} columns")
        self.rows.append(tuple(values))

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        k = self.columns.index(name)
        return [row[k] for row in self.rows]

    def where(self, **match):
        """Rows whose named columns equal the given values"""
        idx = [(self.columns.index(k), v) for k, v in match.items()]
        return [row for row in self.rows if all(row[k] == v for k, v in idx)]


@dataclass
class RunResult:
    """Scenario echo, result tables keyed by file stem, provenance and optional trajectory dumps"""
    scenario: dict
    scenario_hash: str
    tables: dict
    provenance: dict
    trajectories: dict = field(default_factory=dict)


# Scenario building blocks

def build_geometry(config):
    return LatticeGeometry(config['lattice.spacing_nm'] * 1e-9, config['lattice.nx'], config['lattice.ny'])


def build_profile(config, geom):
    shape = CloudShape(config['cloud.shape'], config['cloud.width'], config['cloud.height'],
                       config['cloud.radius'], config['cloud.fill'])
    count = config['cloud.count']
    if count == 1:
        return single_cloud_layout(geom, shape)
    if count == 2:
        return two_cloud_layout(geom, shape, config['cloud.gap'])
    raise ConfigError(f"cloud.count must be 1 or 2, got {count}")


def region_labels(labels):
    """Extend region labels to every site: A left of the gap midpoint, B right of it"""
    labels = np.asarray(labels)
    ny, nx = labels.shape
    cols = np.broadcast_to(np.arange(nx), labels.shape)
    if not np.any(labels == 'B'):
        return np.full(labels.shape, 'A', dtype='<U8')
    a_cols = cols[labels == 'A']
    b_cols = cols[labels == 'B']
    if not a_cols.size:
        return np.full(labels.shape, 'B', dtype='<U8')
    split = (int(a_cols.max()) + 1 + int(b_cols.min())) // 2
    return np.where(cols < split, 'A', 'B').astype('<U8')


def build_clouds(config):
    """(geometry, clouds, site label grid) for the scenario's cloud source"""
    seed = config['run.seed']
    if config['cloud.source'] == 'snapshots':
        split = config['cloud.split_column']
        clouds = ingest_snapshots(config.snapshot_path(), split if split >= 0 else None)
        if not clouds:
            raise ConfigError(f"no snapshots in {config.snapshot_path()}")
        geom = clouds[0].geometry()
        for cloud in clouds:
            if cloud.shape != geom.shape:
                raise GeometryError(f"snapshot {cloud.snapshot_id} differs in lattice shape")
        labels = np.full(geom.shape, 'A', dtype='<U8')
        if split >= 0:
            labels[:, split:] = 'B'
        return geom, clouds, labels

    geom = build_geometry(config)
    profile = build_profile(config, geom)
    clouds = [sample_cloud(geom, profile, stream(seed, CLOUD_STREAM, k))
              for k in range(config['cloud.samples'])]
    sizes = [c.n_atoms for c in clouds]
    logger.info(f"Sampled {len(clouds)} clouds, atoms {min(sizes)}..{max(sizes)} "
                f"(expected {profile.expected_atoms:.1f})")
    return geom, clouds, region_labels(profile.labels)


def build_schedule(config, tau):
    """Pulse schedule up to ``tau``; the readout event only records the readout axis"""
    readout_phase = math.radians(config['schedule.readout_phase_deg'])
    period = config['schedule.echo_period_s']
    if config['schedule.sequence'] == 'wahuha_echo':
        return wahuha_echo_schedule(tau, period, 0.0, readout_phase)
    return ramsey_schedule(tau, period if period > 0 else None, 0.0, readout_phase)


def build_motion(kind, config, clouds):
    if kind == 'stochastic':
        sigma = config['motion.smoothing_sigma']
        target = smooth_profile(mean_occupation(clouds), sigma)
        hop = HoppingConfig(config['motion.t_hop_hz'], config['integrator.dt_s'], target, sigma)
        return MotionMode.stochastic(hop)
    return MotionMode(kind)


def build_job(config, geom, schedule, motion, sample_times, site_labels):
    return EngineJob(
        geom=geom,
        j_perp=config['couplings.j_perp_hz'],
        rescale=config['couplings.rescale'],
        disorder_coeff=config['disorder.coeff_hz'],
        schedule=schedule,
        integ=IntegratorConfig(config['integrator.dt_s']),
        motion=motion,
        sample_times=tuple(sample_times),
        n_trajectories=config['ensemble.trajectories'],
        seed=config['run.seed'],
        site_labels=site_labels,
    )


def _tau_grid(config):
    taus = sorted(set(float(t) for t in config['schedule.tau_s']))
    if taus[0] < 0:
        raise ConfigError(f"schedule.tau_s must be >= 0, got {taus[0]}")
    return taus


def _new_result(config, kind):
    return RunResult(dict(config.config), config.scenario_hash(), {}, {
        'kind': kind,
        'seed': config['run.seed'],
        'threads': config['run.threads'],
        'version': get_version_string(),
    })


def _finish(result, timer, clouds=None):
    result.provenance['wall_time_s'] = round(timer.stop(), 3)
    if clouds is not None:
        result.provenance['clouds'] = len(clouds)
        result.provenance['mean_atoms'] = float(np.mean([c.n_atoms for c in clouds]))
    logger.info(f"Scenario {result.scenario_hash} finished in {result.provenance['wall_time_s']} s")
    return result


def _mode_index(kind):
    return CHOICES['motion.mode'].index(kind)


# Squeezing pipeline

def _contrast_estimate(config, ensembles, time_index, key):
    n = config['analysis.bootstrap']
    seed = config['run.seed']
    rng = stream(seed, BOOTSTRAP_STREAM, *key, RAMSEY_SLOT)
    if config['analysis.contrast'] == 'direct':
        return contrast_bootstrap(ensembles, time_index, rng, n)
    sets = []
    for p, phase in enumerate(config['schedule.phase_deg']):
        shot_rng = stream(seed, SHOT_STREAM, *key, RAMSEY_SLOT, p)
        sets.append(synthetic_shots(ensembles, time_index, config['shots.mode'], shot_rng,
                                    readout=(math.radians(phase), math.pi / 2),
                                    metadata={'phase_deg': phase}))
    phases, ratios = ramsey_ratios(sets)
    return contrast_ramsey_fit(phases, ratios, rng, n)


def _squeezing_point(config, shots, contrast, rng, differential):
    """Filter, noise squeezing and Wineland parameter of one shot set"""
    if config['analysis.filter_shots']:
        shots = shot_filter(shots)
    n = config['analysis.bootstrap']
    estimate = xi2_differential(shots, rng, n_resamples=n) if differential else xi2(shots, rng, n_resamples=n)
    if contrast is not None and math.isfinite(contrast.value):
        estimate = wineland(estimate, contrast, rng)
    return shots, estimate


def _append_point(table, mode, tau, theta_deg, est, n_shots):
    table.append(mode, tau, theta_deg, est.xi2, est.xi2_lo, est.xi2_hi, est.xi2_db,
                 est.contrast, est.contrast_lo, est.contrast_hi,
                 est.xi2_r, est.xi2_r_lo, est.xi2_r_hi, est.xi2_r_db, n_shots)


def _append_fit(table, mode, tau, thetas, estimates, contrast, rng, model):
    values = [e.xi2 for e in estimates]
    errors = [e.half_spread for e in estimates]
    try:
        fit = min_squeezing_fit(np.radians(thetas), values, errors, rng, model)
    except FitError as e:
        logger.warning(f"Minimum fit failed at mode={mode}, tau={tau}: {e}")
        table.append(mode, tau, model, math.nan, math.nan, math.nan, math.nan, math.nan, math.nan)
        return None
    c = contrast.value if contrast is not None else math.nan
    xi2r_db = to_db(fit.minimum / c ** 2) if c > 0 else math.nan
    table.append(mode, tau, model, fit.minimum, fit.error, fit.minimum_db, fit.error_db,
                 xi2r_db, math.degrees(fit.theta_min))
    return fit


def _append_correlations(tables, mode, tau, shots, window):
    """g2 map rows into 'correlations' and its radial average into 'correlations_radial'"""
    try:
        corr = g2_correlations(shots, window)
    except EstimatorError as e:
        logger.warning(f"No correlations at mode={mode}, tau={tau}: {e}")
        return
    for dx, dy, g2, n_pairs in corr.rows():
        tables['correlations'].append(mode, tau, dx, dy, g2, n_pairs)
    for r, g2, n_bins in radial_average(corr):
        tables['correlations_radial'].append(mode, tau, r, g2, n_bins)


def _squeezing_grid(config, geom, clouds, site_labels, kind, result):
    """Run one motion mode over the tau x theta grid into ``result``'s tables"""
    taus = _tau_grid(config)
    thetas = [float(t) for t in config['schedule.theta_deg']]
    schedule = build_schedule(config, taus[-1])
    motion = build_motion(kind, config, clouds)
    job = build_job(config, geom, schedule, motion, taus, site_labels)
    ensembles = run_ensemble(job, clouds, config['run.threads'])
    if config['output.dump_trajectories']:
        result.trajectories[kind] = ensembles

    seed = config['run.seed']
    differential = bool(np.any(site_labels == 'B'))
    readout_phase = math.radians(config['schedule.readout_phase_deg'])
    corr_theta = int(np.argmin(np.abs(thetas)))
    m = _mode_index(kind)
    results = result.tables['results']
    for k, tau in enumerate(taus):
        key = (m, k)
        contrast = _contrast_estimate(config, ensembles, k, key)
        estimates = []
        for j, theta in enumerate(thetas):
            shot_rng = stream(seed, SHOT_STREAM, *key, SQUEEZING_SLOT, j)
            shots = synthetic_shots(ensembles, k, config['shots.mode'], shot_rng,
                                    readout=(readout_phase, math.radians(theta)),
                                    metadata={'tau_s': tau, 'theta_deg': theta})
            rng = stream(seed, BOOTSTRAP_STREAM, *key, SQUEEZING_SLOT, j)
            kept, est = _squeezing_point(config, shots, contrast, rng, differential)
            _append_point(results, kind, tau, theta, est, kept.n_shots)
            estimates.append(est)
            if j == corr_theta:
                _append_correlations(result.tables, kind, tau, kept, config['analysis.window'])
        fit = _append_fit(result.tables['fits'], kind, tau, thetas, estimates, contrast,
                          stream(seed, BOOTSTRAP_STREAM, *key, FIT_SLOT), config['analysis.fit_model'])
        best = min(estimates, key=lambda e: e.xi2)
        logger.info(f"[{kind}] tau={tau:g} s: C={contrast.value:.3f}, min xi2={best.xi2_db:.2f} dB"
                    + (f", fitted {fit.minimum_db:.2f}({fit.error_db:.2f}) dB" if fit else ""))


def _squeezing_tables():
    return {
        'results': ResultTable(RESULT_COLUMNS),
        'fits': ResultTable(FIT_COLUMNS),
        'correlations': ResultTable(CORRELATION_COLUMNS),
        'correlations_radial': ResultTable(RADIAL_COLUMNS),
    }


def run_squeezing_scan(config):
    """Noise squeezing, contrast and Wineland parameter over the tau x theta grid"""
    timer = Timer()
    timer.start()
    result = _new_result(config, 'squeezing')
    result.tables.update(_squeezing_tables())
    geom, clouds, labels = build_clouds(config)
    _squeezing_grid(config, geom, clouds, labels, config['motion.mode'], result)
    return _finish(result, timer, clouds)


def run_tunneling_scan(config):
    """The squeezing grid for every motion mode in ``motion.modes`` on the same clouds and seeds"""
    timer = Timer()
    timer.start()
    result = _new_result(config, 'tunneling')
    result.tables.update(_squeezing_tables())
    geom, clouds, labels = build_clouds(config)
    peak = float(mean_occupation(clouds).max())
    if peak > 0.35:
        logger.warning(f"Peak filling {peak:.2f} exceeds the low-filling regime of tunneling scans")
    for kind in config['motion.modes']:
        _squeezing_grid(config, geom, clouds, labels, kind, result)
    return _finish(result, timer, clouds)


def run_shearing_scan(config):
    """<S_y>/(N/2) against tipping angle theta0 and time.

    The state is tipped by theta0 about y from the pole, evolved without
    echoes, and S_y is swapped into S_z by a pi/2 readout about x.
    """
    timer = Timer()
    timer.start()
    result = _new_result(config, 'shearing')
    table = result.tables['results'] = ResultTable(SHEARING_COLUMNS)
    geom, clouds, labels = build_clouds(config)
    taus = _tau_grid(config)
    kind = config['motion.mode']
    motion = build_motion(kind, config, clouds)
    for theta0 in config['shearing.theta0_deg']:
        schedule = ramsey_schedule(taus[-1], None, math.pi / 2, 0.0,
                                   prep_angle=math.radians(theta0), prep_phase=math.pi / 2)
        job = build_job(config, geom, schedule, motion, taus, labels)
        ensembles = run_ensemble(job, clouds, config['run.threads'])
        for k, tau in enumerate(taus):
            values = np.concatenate([
                e.read_out(k, 0.0, math.pi / 2)[..., 2].sum(axis=1) / (e.n_atoms / 2.0) for e in ensembles])
            err = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else math.nan
            table.append(kind, float(theta0), tau, float(values.mean()), err)
        logger.debug(f"Shearing theta0={theta0} done")
    return _finish(result, timer, clouds)


def run_contrast_decay(config):
    """Ramsey contrast against time for one cloud family"""
    timer = Timer()
    timer.start()
    result = _new_result(config, 'contrast')
    table = result.tables['results'] = ResultTable(CONTRAST_COLUMNS)
    geom, clouds, labels = build_clouds(config)
    taus = _tau_grid(config)
    kind = config['motion.mode']
    job = build_job(config, geom, build_schedule(config, taus[-1]), build_motion(kind, config, clouds), taus, labels)
    ensembles = run_ensemble(job, clouds, config['run.threads'])
    if config['output.dump_trajectories']:
        result.trajectories[kind] = ensembles
    mean_atoms = float(np.mean([c.n_atoms for c in clouds]))
    for k, tau in enumerate(taus):
        c = _contrast_estimate(config, ensembles, k, (_mode_index(kind), k))
        table.append(kind, tau, c.value, c.lo, c.hi, mean_atoms)
    return _finish(result, timer, clouds)


def _oracle_rows(table, tau, dtwa, ed, dicke):
    def values(moments):
        if moments is None:
            return dict.fromkeys(ORACLE_QUANTITIES, math.nan)
        xi2_min, theta = moments.squeezing()
        return dict(zip(ORACLE_QUANTITIES, (*map(float, moments.mean), moments.contrast, xi2_min, theta)))
    d, e, o = values(dtwa), values(ed), values(dicke)
    if dicke is not None:
        # Dicke moments live in the frame of a +x start; only frame-free quantities compare
        o['sx'] = o['sy'] = math.nan
    for q in ORACLE_QUANTITIES:
        table.append(tau, q, d[q], e[q], o[q], d[q] - e[q], e[q] - o[q])


def run_oracle_compare(config):
    """DTWA, exact state-vector and (for all-to-all couplings) Dicke moments side by side.

    Uses the first cloud of the scenario, which must hold at most 12 atoms.
    """
    timer = Timer()
    timer.start()
    result = _new_result(config, 'oracle')
    table = result.tables['results'] = ResultTable(ORACLE_COLUMNS)
    geom, clouds, labels = build_clouds(config)
    cloud = clouds[0]
    taus = _tau_grid(config)
    schedule = build_schedule(config, taus[-1])
    all_to_all = config['oracle.all_to_all']

    couplings = build_couplings(geom, cloud, config['couplings.j_perp_hz'], config['couplings.rescale'])
    couplings = couplings.with_field(field_at(cloud.positions, harmonic_disorder(geom, None, config['disorder.coeff_hz'])))
    if all_to_all:
        couplings = oat_replacement(couplings)
    ed = exact_ed_oracle(couplings, schedule, taus)

    kind = 'oat_limit' if all_to_all else 'static'
    job = build_job(config, geom, schedule, MotionMode(kind), taus, labels)
    ensemble = run_ensemble(job, [cloud], config['run.threads'])[0]

    model = None
    if all_to_all and config['schedule.sequence'] == 'ramsey' and np.ptp(couplings.h) == 0:
        model = OatModel.from_uniform_coupling(cloud.n_atoms, float(couplings.J[0, 1]))
    elif all_to_all:
        logger.warning("Dicke oracle skipped: needs a ramsey sequence and a uniform field")

    for k, tau in enumerate(taus):
        dicke = oat_dicke_oracle(model, tau).moments if model is not None else None
        _oracle_rows(table, tau, ensemble.moments(k), ed.moments(k), dicke)
    return _finish(result, timer, [cloud])


RUNNERS = {
    'shearing': run_shearing_scan,
    'squeezing': run_squeezing_scan,
    'tunneling': run_tunneling_scan,
    'contrast': run_contrast_decay,
    'oracle': run_oracle_compare,
}


def run_scenario(config):
    kind = config['scenario.kind']
    logger.info(f"Running {kind} scenario {config.scenario_hash()}")
    return RUNNERS[kind](config)


# Coupling tables and measured shots

def run_couplings_table(atom, spacing, f_lower=None, m_f=None):
    """Coupling rows for every qubit of ``atom``, or the single qubit (f_lower, m_f)"""
    if (f_lower is None) != (m_f is None):
        raise ValueError("give both F_lower and m_F, or neither")
    if f_lower is None:
        return coupling_scan(atom, spacing)
    qubit = HyperfineQubit(Fraction(f_lower), Fraction(m_f))
    qubit.validate_for(atom)
    exact = jz_coupling_factor_exact(atom, qubit)
    c_g = float(exact)
    return [CouplingRow(qubit.f_lower, qubit.m_f, c_g, dipolar_prefactor(atom, spacing).value * c_g, exact)]


def _header_float(cloud, key):
    text = cloud.header_value(key)
    return None if text is None else float(text)


def analyze_shots(path, split_column=None, seed=12345, n_bootstrap=1000, fit_model='sinusoid',
                  window=9, filter_shots=True):
    """Contrast, noise squeezing and correlations from a file of spin-resolved snapshots.

    Snapshot headers carry ``tau_s`` and either ``phase_deg`` (Ramsey contrast
    shots) or ``theta_deg`` (squeezing shots); a snapshot with neither counts
    as a squeezing shot at theta = 0. With ``split_column`` the squeezing is
    differential between the columns left (A) and right (B) of it.
    """
    timer = Timer()
    timer.start()
    path = Path(path)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    clouds = ingest_snapshots(path, split_column)
    if not clouds:
        raise EstimatorError(f"no snapshots in {path}")
    ny, nx = clouds[0].shape
    if split_column is None:
        labels = np.full((ny, nx), 'A', dtype='<U8')
    else:
        labels = np.broadcast_to(np.where(np.arange(nx) < split_column, 'A', 'B'), (ny, nx))

    scenario = {'shots_file': path.name, 'shots_sha256': digest, 'split_column': split_column,
                'seed': seed, 'bootstrap': n_bootstrap, 'fit_model': fit_model,
                'window': window, 'filter_shots': filter_shots}
    result = RunResult(scenario, stable_hash(scenario), _squeezing_tables(),
                       {'kind': 'analyze', 'seed': seed, 'version': get_version_string()})

    groups = {}
    for cloud in clouds:
        tau = _header_float(cloud, 'tau_s') or 0.0
        phase = _header_float(cloud, 'phase_deg')
        theta = _header_float(cloud, 'theta_deg')
        if phase is not None and theta is None:
            groups.setdefault(tau, ({}, {}))[0].setdefault(phase, []).append(cloud)
        else:
            groups.setdefault(tau, ({}, {}))[1].setdefault(theta or 0.0, []).append(cloud)

    def prepare(group, metadata):
        shots = ShotSet.from_snapshots(group, metadata, labels)
        return shot_filter(shots) if filter_shots else shots

    for k, tau in enumerate(sorted(groups)):
        ramsey, squeezing = groups[tau]
        contrast = None
        if len(ramsey) >= 4:
            sets = [prepare(ramsey[p], {'phase_deg': p}) for p in sorted(ramsey)]
            phases, ratios = ramsey_ratios(sets)
            contrast = contrast_ramsey_fit(phases, ratios, stream(seed, BOOTSTRAP_STREAM, k, RAMSEY_SLOT), n_bootstrap)
        elif ramsey:
            logger.warning(f"tau={tau}: {len(ramsey)} Ramsey phases, at least 4 needed for a contrast fit")
        thetas = sorted(squeezing)
        estimates = []
        corr_theta = thetas[int(np.argmin(np.abs(thetas)))] if thetas else None
        for j, theta in enumerate(thetas):
            shots = prepare(squeezing[theta], {'tau_s': tau, 'theta_deg': theta})
            rng = stream(seed, BOOTSTRAP_STREAM, k, SQUEEZING_SLOT, j)
            est = (xi2_differential(shots, rng, n_resamples=n_bootstrap) if split_column is not None
                   else xi2(shots, rng, n_resamples=n_bootstrap))
            if contrast is not None:
                est = wineland(est, contrast, rng)
            _append_point(result.tables['results'], 'measured', tau, theta, est, shots.n_shots)
            estimates.append(est)
            if theta == corr_theta:
                _append_correlations(result.tables, 'measured', tau, shots, window)
        if len(thetas) >= 4:
            _append_fit(result.tables['fits'], 'measured', tau, thetas, estimates,
                        contrast or ContrastEstimate(math.nan, math.nan, math.nan),
                        stream(seed, BOOTSTRAP_STREAM, k, FIT_SLOT), fit_model)
    logger.info(f"Analyzed {len(clouds)} snapshots at {len(groups)} evolution times")
    return _finish(result, timer)
