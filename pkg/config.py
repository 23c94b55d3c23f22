# config.py
import json
from pathlib import Path

from logger import Logger
from utils import stable_hash

logger = Logger()


class ConfigError(ValueError):
    """Invalid scenario configuration"""


FIG3_THETA_DEG = [-40.0 + 4.0 * k for k in range(21)]
FIG4_THETA_DEG = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]

# Allowed values for string-valued keys
CHOICES = {
    'scenario.kind': ('shearing', 'squeezing', 'tunneling', 'contrast', 'oracle'),
    'cloud.source': ('layout', 'snapshots'),
    'cloud.shape': ('rectangle', 'disk'),
    'schedule.sequence': ('ramsey', 'wahuha_echo'),
    'motion.mode': ('static', 'stochastic', 'oat_limit'),
    'shots.mode': ('trajectory-direct', 'binomial-resample'),
    'analysis.fit_model': ('sinusoid', 'quadratic'),
    'analysis.contrast': ('direct', 'ramsey_fit'),
}
LIST_CHOICES = {
    'motion.modes': CHOICES['motion.mode'],
}

# Keys that do not change any result and so stay out of the scenario hash
UNHASHED_KEYS = ('run.threads', 'output.dump_trajectories')


class ScenarioConfig:
    """Scenario configuration: flat dotted keys merged over DEFAULT_CONFIG"""

    # Default configuration
    DEFAULT_CONFIG = {
        'scenario.kind': 'squeezing',
        'lattice.spacing_nm': 266.0,
        'lattice.nx': 48,
        'lattice.ny': 24,
        'cloud.source': 'layout',
        'cloud.shape': 'rectangle',
        'cloud.width': 18,
        'cloud.height': 18,
        'cloud.radius': 10.0,
        'cloud.count': 2,
        'cloud.gap': 8,
        'cloud.fill': 0.8,
        'cloud.snapshot_file': '',
        'cloud.split_column': -1,
        'cloud.samples': 10,
        'couplings.j_perp_hz': 1.09,
        'couplings.rescale': 0.86,
        'disorder.coeff_hz': 0.001,
        'schedule.sequence': 'ramsey',
        'schedule.echo_period_s': 0.066,
        'schedule.tau_s': [0.0, 0.09, 0.18, 0.27],
        'schedule.theta_deg': FIG3_THETA_DEG,
        'schedule.phase_deg': [0.0, 45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0],
        'schedule.readout_phase_deg': -90.0,
        'shearing.theta0_deg': [0.0, 22.5, 45.0, 67.5, 90.0, 112.5, 135.0, 157.5, 180.0],
        'motion.mode': 'static',
        'motion.modes': ['static', 'stochastic', 'oat_limit'],
        'motion.t_hop_hz': 10.0,
        'motion.smoothing_sigma': 1.0,
        'ensemble.trajectories': 100,
        'integrator.dt_s': 0.001,
        'shots.mode': 'trajectory-direct',
        'analysis.bootstrap': 1000,
        'analysis.fit_model': 'sinusoid',
        'analysis.contrast': 'direct',
        'analysis.window': 9,
        'analysis.filter_shots': True,
        'oracle.all_to_all': False,
        'run.seed': 12345,
        'run.threads': 0,
        'output.dump_trajectories': False,
    }

    def __init__(self, config_file=None, overrides=None):
        """Load ``config_file`` (JSON object with dotted keys) over the defaults, then ``overrides``"""
        self.config_file = Path(config_file) if config_file else None
        self.load_config()
        if overrides:
            self.update(overrides)
        logger.info(f"Loaded scenario: kind={self.config['scenario.kind']}, hash={self.scenario_hash()}")

    def load_config(self):
        """Load configuration from file or use the defaults"""
        loaded = {}
        if self.config_file is not None:
            if not self.config_file.exists():
                raise ConfigError(f"Scenario file not found: {self.config_file}")
            try:
                with open(self.config_file, 'r', encoding='utf-8') as f:
                    loaded = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"Scenario file {self.config_file} is not valid JSON: {e}") from e
            if not isinstance(loaded, dict):
                raise ConfigError("Scenario file must hold a JSON object of dotted keys")
            logger.debug(f"Loaded settings from file: {self.config_file}")
        else:
            logger.debug("No scenario file given, using defaults")

        for key, value in loaded.items():
            self._check(key, value)
        # Merge loaded config with defaults
        self.config = {**self.DEFAULT_CONFIG, **loaded}
        self._check_references()

    def _check(self, key, value):
        if key not in self.DEFAULT_CONFIG:
            raise ConfigError(f"Unknown scenario key: {key}")
        default = self.DEFAULT_CONFIG[key]
        if isinstance(default, bool):
            ok = isinstance(value, bool)
        elif isinstance(default, int):
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif isinstance(default, float):
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        elif isinstance(default, str):
            ok = isinstance(value, str)
        elif isinstance(default, list):
            if not isinstance(value, list):
                ok = False
            elif not value:
                raise ConfigError(f"{key} must be a nonempty list")
            elif isinstance(default[0], str):
                ok = all(isinstance(v, str) for v in value)
            else:
                ok = all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
        else:
            ok = True
        if not ok:
            raise ConfigError(f"{key} expects {type(default).__name__}, got {value!r}")
        if key in CHOICES and value not in CHOICES[key]:
            raise ConfigError(f"{key} must be one of {CHOICES[key]}, got {value!r}")
        if key in LIST_CHOICES:
            bad = [v for v in value if v not in LIST_CHOICES[key]]
            if bad:
                raise ConfigError(f"{key} has unknown entries {bad}")

    def _check_references(self):
        if self.config['cloud.source'] == 'snapshots':
            path = self.snapshot_path()
            if path is None or not path.exists():
                raise ConfigError(f"Snapshot file not found: {self.config['cloud.snapshot_file']!r}")

    def snapshot_path(self):
        """Snapshot file path, resolved relative to the scenario file"""
        name = self.config['cloud.snapshot_file']
        if not name:
            return None
        path = Path(name)
        if not path.is_absolute() and self.config_file is not None:
            path = self.config_file.parent / path
        return path

    def get(self, key, default=None):
        """Get configuration value"""
        return self.config.get(key, default)

    def __getitem__(self, key):
        try:
            return self.config[key]
        except KeyError:
            raise ConfigError(f"Unknown scenario key: {key}") from None

    def set(self, key, value):
        """Set configuration value"""
        self._check(key, value)
        old_value = self.config.get(key)
        self.config[key] = value
        logger.debug(f"Config changed: {key} {old_value} -> {value}")
        self._check_references()

    def update(self, updates):
        """Update multiple configuration values"""
        for k, v in updates.items():
            self._check(k, v)
        for k, v in updates.items():
            old_v = self.config.get(k)
            logger.debug(f"Config updated: {k} {old_v} -> {v}")
            self.config[k] = v
        self._check_references()

    def scenario_hash(self):
        """12 hex digits identifying every result-relevant setting"""
        return stable_hash({k: v for k, v in self.config.items() if k not in UNHASHED_KEYS})

