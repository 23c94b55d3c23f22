# test_pulses.py
import math

import numpy as np
import pytest

from pulses import (WAHUHA_BLOCK, PulseEvent, PulseSchedule, ScheduleError, apply_rotation, echo_times,
                    ramsey_schedule, rotation_matrix, spin_half_unitary, wahuha_echo_schedule)


def bloch(psi):
    a, b = psi
    return np.array([2 * (np.conj(a) * b).real, 2 * (np.conj(a) * b).imag, abs(a) ** 2 - abs(b) ** 2])


def test_quarter_turn_about_x_takes_up_to_minus_y():
    np.testing.assert_allclose(apply_rotation([0, 0, 1], 0.0, math.pi / 2), [0, -1, 0], atol=1e-15)
    np.testing.assert_allclose(apply_rotation([0, 0, 1], math.pi / 2, math.pi / 2), [1, 0, 0], atol=1e-15)


def test_rotations_preserve_length_and_compose():
    spins = np.random.default_rng(3).normal(size=(5, 4, 3))
    out = apply_rotation(spins, 0.7, 1.3)
    np.testing.assert_allclose(np.linalg.norm(out, axis=-1), np.linalg.norm(spins, axis=-1))
    back = apply_rotation(out, 0.7, -1.3)
    np.testing.assert_allclose(back, spins, atol=1e-12)


@pytest.mark.parametrize("phase, angle", [(0.0, math.pi / 2), (1.1, 0.4), (-2.0, math.pi), (math.pi / 4, 2.5)])
def test_spin_half_unitary_matches_rotation(phase, angle):
    psi = np.array([0.6, 0.8j * np.exp(0.3j)])
    u = spin_half_unitary(phase, angle)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(bloch(u @ psi), rotation_matrix(phase, angle) @ bloch(psi), atol=1e-12)


def test_event_validation():
    with pytest.raises(ScheduleError):
        PulseEvent(-0.1, 0.0, 1.0)
    with pytest.raises(ScheduleError):
        PulseEvent(0.1, 0.0, 1.0, 'flip')
    a, b = PulseEvent(0.2, 0.0, 1.0), PulseEvent(0.1, 0.0, 1.0)
    with pytest.raises(ScheduleError):
        PulseSchedule((a, b), 0.3)
    with pytest.raises(ScheduleError):
        PulseSchedule((b, a), 0.15)


def test_echo_times_are_strictly_inside():
    assert echo_times(0.132, 0.066) == [0.066]
    assert echo_times(0.27, 0.066) == pytest.approx([0.066, 0.132, 0.198, 0.264])
    assert echo_times(0.05, None) == []
    with pytest.raises(ScheduleError):
        echo_times(0.1, 0.0)


def test_ramsey_schedule_alternates_echo_axes():
    sched = ramsey_schedule(0.27, 0.066, math.radians(10), -math.pi / 2)
    labels = [e.label for e in sched.events]
    assert labels == ['prep', 'echo', 'echo', 'echo', 'echo', 'readout']
    assert [e.phase for e in sched.events if e.label == 'echo'] == [0.0, math.pi, 0.0, math.pi]
    assert sched.readout.angle == pytest.approx(math.radians(10))
    assert sched.duration == 0.27
    assert sched.count('echo') == 4


def test_zero_time_ramsey_has_prep_then_readout():
    sched = ramsey_schedule(0.0, 0.066, 0.0, 0.0)
    assert [e.label for e in sched.events] == ['prep', 'readout']
    steps = sched.plan([0.0], include_readout=True)
    assert [s[0] for s in steps] == ['pulse', 'sample', 'pulse']


def test_plan_samples_before_coincident_echo():
    sched = ramsey_schedule(0.132, 0.066, 0.0, 0.0)
    prep, echo = sched.events[0], sched.events[1]
    steps = sched.plan([0.0, 0.066])
    assert steps == [('pulse', prep), ('sample', 0), ('evolve', 0.0, 0.066), ('sample', 1), ('pulse', echo)]
    with pytest.raises(ScheduleError):
        sched.plan([0.2])


def test_wahuha_block_is_identity():
    total = np.eye(3)
    for _, phase, angle in WAHUHA_BLOCK:
        total = rotation_matrix(phase, angle) @ total
    np.testing.assert_allclose(total, np.eye(3), atol=1e-12)


def test_wahuha_schedule_emits_whole_blocks():
    sched = wahuha_echo_schedule(0.1, 0.066)
    assert sched.count('wahuha') == len(WAHUHA_BLOCK)
    pi_times = [e.time for e in sched.events if e.label == 'wahuha' and e.angle == math.pi]
    assert pi_times == pytest.approx([0.033, 0.066])
    assert sched.events[0].label == 'prep'
    assert sched.events[-1].label == 'readout'
    two = wahuha_echo_schedule(0.132, 0.066)
    assert two.count('wahuha') == 2 * len(WAHUHA_BLOCK)
    assert max(e.time for e in two.events if e.label == 'wahuha') == pytest.approx(0.132)
    with pytest.raises(ScheduleError):
        wahuha_echo_schedule(0.1, 0.0)
