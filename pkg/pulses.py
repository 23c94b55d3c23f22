# pulses.py
"""Instantaneous global rotations and the schedules built from them.

A pulse rotates every spin by ``angle`` about the equatorial axis
(cos phase, sin phase, 0), right-hand rule.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from logger import Logger

logger = Logger()

EVENT_LABELS = ('prep', 'echo', 'wahuha', 'readout')
# Events applied before a sample taken at the same instant
BEFORE_SAMPLE = ('prep', 'wahuha')
TIME_TOL = 1e-12


class ScheduleError(ValueError):
    """Invalid pulse schedule"""


def rotation_matrix(phase, angle):
    """3x3 rotation by ``angle`` about (cos phase, sin phase, 0)"""
    axis = np.array([math.cos(phase), math.sin(phase), 0.0])
    return Rotation.from_rotvec(angle * axis).as_matrix()


def apply_rotation(spins, phase, angle):
    """Rotate spin vectors of shape (..., 3); returns a new array"""
    spins = np.asarray(spins, dtype=float)
    return spins @ rotation_matrix(phase, angle).T


def spin_half_unitary(phase, angle):
    """exp(-i angle n.sigma / 2) for n = (cos phase, sin phase, 0)"""
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    # n.sigma = [[0, e^{-i phase}], [e^{i phase}, 0]]
    return np.array([[c, -1j * s * np.exp(-1j * phase)],
                     [-1j * s * np.exp(1j * phase), c]])


@dataclass(frozen=True)
class PulseEvent:
    time: float
    phase: float
    angle: float
    label: str = 'echo'

    def __post_init__(self):
        if not (math.isfinite(self.time) and self.time >= 0):
            raise ScheduleError(f"pulse time must be >= 0, got {self.time}")
        if self.label not in EVENT_LABELS:
            raise ScheduleError(f"unknown pulse label {self.label!r}")

    def apply(self, spins):
        return apply_rotation(spins, self.phase, self.angle)


@dataclass(frozen=True)
class PulseSchedule:
    """Time-ordered pulse events over a total duration (seconds).

    Simultaneous events apply in list order.
    """
    events: tuple
    duration: float

    def __post_init__(self):
        events = tuple(self.events)
        if not (math.isfinite(self.duration) and self.duration >= 0):
            raise ScheduleError(f"duration must be >= 0, got {self.duration}")
        for prev, cur in zip(events, events[1:]):
            if cur.time < prev.time:
                raise ScheduleError(f"events out of order at t={cur.time}")
        if events and events[-1].time > self.duration + TIME_TOL:
            raise ScheduleError(f"event at t={events[-1].time} after the end {self.duration}")
        object.__setattr__(self, 'events', events)

    @property
    def readout(self):
        """The last readout event, or None"""
        for event in reversed(self.events):
            if event.label == 'readout':
                return event
        return None

    def count(self, label):
        return sum(1 for e in self.events if e.label == label)

    def plan(self, sample_times, include_readout=False):
        """Interleave evolution, pulses and samples.

        Returns a list of ('evolve', t0, t1), ('pulse', event) and
        ('sample', index) steps, where index refers to ``sample_times``.
        A sample at t follows every event earlier than t and the prep and
        wahuha events at t; echo and readout events at t come after it.
        """
        times = [float(t) for t in sample_times]
        for t in times:
            if t < 0 or t > self.duration + TIME_TOL:
                raise ScheduleError(f"sample time {t} outside [0, {self.duration}]")
        keyed = []
        for order, event in enumerate(self.events):
            if event.label == 'readout' and not include_readout:
                continue
            rank = 0 if event.label in BEFORE_SAMPLE else 2
            keyed.append((event.time, rank, order, ('pulse', event)))
        for index, t in enumerate(times):
            keyed.append((t, 1, index, ('sample', index)))
        keyed.sort(key=lambda item: item[:3])

        steps = []
        now = 0.0
        for t, _, _, step in keyed:
            if t > now + TIME_TOL:
                steps.append(('evolve', now, t))
                now = t
            steps.append(step)
        return steps


def echo_times(tau, echo_period):
    """Multiples of ``echo_period`` strictly inside (0, tau)"""
    if echo_period is None:
        return []
    if not echo_period > 0:
        raise ScheduleError(f"echo period must be positive, got {echo_period}")
    times = []
    k = 1
    while k * echo_period < tau - TIME_TOL:
        times.append(k * echo_period)
        k += 1
    return times


def ramsey_schedule(tau, echo_period, readout_angle, readout_phase,
                    prep_angle=math.pi / 2, prep_phase=0.0):
    """Prep pulse at 0, alternating +X/-X pi echoes every ``echo_period``, readout at ``tau``.

    ``echo_period=None`` gives a plain Ramsey sequence.
    """
    if not tau >= 0:
        raise ScheduleError(f"tau must be >= 0, got {tau}")
    events = [PulseEvent(0.0, prep_phase, prep_angle, 'prep')]
    for k, t in enumerate(echo_times(tau, echo_period), start=1):
        events.append(PulseEvent(t, 0.0 if k % 2 else math.pi, math.pi, 'echo'))
    events.append(PulseEvent(float(tau), readout_phase, readout_angle, 'readout'))
    return PulseSchedule(tuple(events), float(tau))


# (slot in units of block_period / 12, phase, angle)
WAHUHA_BLOCK = (
    (1, 0.0, math.pi / 2),
    (2, -math.pi / 2, math.pi / 2),
    (4, math.pi / 2, math.pi / 2),
    (5, math.pi, math.pi / 2),
    (6, -math.pi / 4, math.pi),
    (7, 0.0, math.pi / 2),
    (8, -math.pi / 2, math.pi / 2),
    (10, math.pi / 2, math.pi / 2),
    (11, math.pi, math.pi / 2),
    (12, 3 * math.pi / 4, math.pi),
)


def wahuha_echo_schedule(tau, block_period, readout_angle=0.0, readout_phase=-math.pi / 2):
    """Prep, then whole WAHUHA + echo blocks every ``block_period``, then readout at ``tau``.

    Each block holds two WAHUHA frames (X, -Y, Y, -X quarter turns) each
    followed by a pi pulse about an axis perpendicular to (1, 1, 1); the
    block's net rotation is the identity. Partial blocks are not emitted.

    The pi pulses sit at 6/12 and 12/12 of the block rather than one central
    pi echo, so the second one closes the block and the sequence returns to the
    lab frame at every block boundary.
    """
    if not (math.isfinite(block_period) and block_period > 0):
        raise ScheduleError(f"block period must be positive, got {block_period}")
    if not tau >= 0:
        raise ScheduleError(f"tau must be >= 0, got {tau}")
    step = block_period / 12.0
    events = [PulseEvent(0.0, 0.0, math.pi / 2, 'prep')]
    n_blocks = int(math.floor(tau / block_period + 1e-9))
    for k in range(n_blocks):
        start = k * block_period
        for slot, phase, angle in WAHUHA_BLOCK:
            events.append(PulseEvent(min(start + slot * step, float(tau)), phase, angle, 'wahuha'))
    events.append(PulseEvent(float(tau), readout_phase, readout_angle, 'readout'))
    logger.debug(f"WAHUHA schedule: {n_blocks} blocks over {tau} s")
    return PulseSchedule(tuple(events), float(tau))
