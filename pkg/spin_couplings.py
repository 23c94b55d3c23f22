# spin_couplings.py
"""Dipolar spin-exchange couplings of magnetically insensitive hyperfine qubits.

The qubit is a pair of hyperfine states (F, m_F) and (F+1, m_F). Only the
J_z J_z part of the magnetic dipole-dipole interaction connects the two
states of neighbouring atoms, giving an exchange rate

    J_perp = mu0 gJ^2 muB^2 / (4 pi a^3 h) * |<F+1, m_F| J_z |F, m_F>|^2

Clebsch-Gordan coefficients are evaluated exactly with the Racah formula on
integers and converted to floating point at the boundary.
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction

from utils import NumericalError

# CODATA 2018
MU0 = 1.25663706212e-6          # N / A^2
BOHR_MAGNETON = 9.2740100783e-24  # J / T
PLANCK = 6.62607015e-34         # J s

CSV_HEADER = ("F_lower", "m_F", "C_G", "J_perp_hz")


class AngularMomentumError(ValueError):
    """Quantum numbers outside the domain of the angular-momentum algebra."""


def _doubled(value, name):
    """Return 2*value as an int, rejecting anything that is not a multiple of 1/2"""
    try:
        twice = Fraction(value) * 2
    except (TypeError, ValueError) as e:
        raise AngularMomentumError(f"{name}={value!r} is not a number") from e
    if twice.denominator != 1:
        raise AngularMomentumError(f"{name}={value} is not a multiple of 1/2")
    return int(twice)


def format_half_integer(value):
    """Render 17/2 as '17/2' and 3 as '3'"""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class AngularMomentumSpec:
    """Nuclear spin I, electronic angular momentum J and Lande g_J of a species."""
    nuclear_spin: Fraction
    electronic_j: Fraction
    lande_gj: float

    def __post_init__(self):
        two_i = _doubled(self.nuclear_spin, "nuclear_spin")
        two_j = _doubled(self.electronic_j, "electronic_j")
        if two_i < 0 or two_j < 0:
            raise AngularMomentumError("I and J must be non-negative")
        gj = float(self.lande_gj)
        if not math.isfinite(gj) or gj <= 0:
            raise AngularMomentumError(f"lande_gj must be finite and positive, got {self.lande_gj}")
        object.__setattr__(self, "nuclear_spin", Fraction(two_i, 2))
        object.__setattr__(self, "electronic_j", Fraction(two_j, 2))
        object.__setattr__(self, "lande_gj", gj)

    def f_lower_range(self):
        """All F such that (F, F+1) are both hyperfine levels of this species"""
        lo = abs(self.nuclear_spin - self.electronic_j)
        hi = self.nuclear_spin + self.electronic_j - 1
        values = []
        f = lo
        while f <= hi:
            values.append(f)
            f += 1
        return values


@dataclass(frozen=True)
class HyperfineQubit:
    """Qubit between (F_lower, m_F) and (F_lower + 1, m_F)."""
    f_lower: Fraction
    m_f: Fraction

    def __post_init__(self):
        two_f = _doubled(self.f_lower, "f_lower")
        two_m = _doubled(self.m_f, "m_f")
        if two_f < 0 or abs(two_m) > two_f or (two_f - two_m) % 2:
            raise AngularMomentumError(f"invalid qubit F={self.f_lower}, m_F={self.m_f}")
        object.__setattr__(self, "f_lower", Fraction(two_f, 2))
        object.__setattr__(self, "m_f", Fraction(two_m, 2))

    def validate_for(self, atom):
        """Raise AngularMomentumError unless F_lower lies in [|I-J|, I+J-1] with the right parity"""
        lo = abs(atom.nuclear_spin - atom.electronic_j)
        hi = atom.nuclear_spin + atom.electronic_j - 1
        if not lo <= self.f_lower <= hi or (self.f_lower - lo).denominator != 1:
            raise AngularMomentumError(
                f"F_lower={format_half_integer(self.f_lower)} outside "
                f"[{format_half_integer(lo)}, {format_half_integer(hi)}] for I={atom.nuclear_spin}, J={atom.electronic_j}"
            )


@dataclass(frozen=True)
class DipolarPrefactor:
    """mu0 gJ^2 muB^2 / (4 pi a^3 h) in Hz for lattice spacing a in meters."""
    value: float
    spacing: float


@dataclass(frozen=True)
class CouplingRow:
    """One line of a coupling scan"""
    f_lower: Fraction
    m_f: Fraction
    c_g: float
    j_perp_hz: float
    c_g_exact: Fraction = field(compare=False, repr=False)

    def as_csv_row(self):
        return (format_half_integer(self.f_lower), format_half_integer(self.m_f),
                repr(self.c_g), repr(self.j_perp_hz))


ERBIUM_167 = AngularMomentumSpec(Fraction(7, 2), Fraction(6), 1.1638)


def clebsch_gordan_squared(j1, j2, j, m1, m2, m):
    """Exact Clebsch-Gordan coefficient <j1 m1; j2 m2 | j m> as (sign, square).

    Condon-Shortley convention, Racah closed form on integer factorials.

    Returns
    -------
    tuple
        (sign, square) with sign in {-1, 0, 1} and square a Fraction.
    """
    tj1, tj2, tj = _doubled(j1, "j1"), _doubled(j2, "j2"), _doubled(j, "j")
    tm1, tm2, tm = _doubled(m1, "m1"), _doubled(m2, "m2"), _doubled(m, "m")

    for tjx, tmx, label in ((tj1, tm1, "1"), (tj2, tm2, "2"), (tj, tm, "")):
        if tjx < 0:
            raise AngularMomentumError(f"j{label} must be non-negative")
        if abs(tmx) > tjx or (tjx - tmx) % 2:
            raise AngularMomentumError(f"m{label}={tmx}/2 incompatible with j{label}={tjx}/2")
    if not abs(tj1 - tj2) <= tj <= tj1 + tj2 or (tj1 + tj2 + tj) % 2:
        raise AngularMomentumError(f"triangle rule violated for j1={tj1}/2, j2={tj2}/2, j={tj}/2")

    if tm1 + tm2 != tm:
        return 0, Fraction(0)

    f = math.factorial
    a = (tj1 + tj2 - tj) // 2
    b = (tj1 - tm1) // 2
    c = (tj2 + tm2) // 2
    d = (tj - tj2 + tm1) // 2
    e = (tj - tj1 - tm2) // 2

    prefactor = Fraction(
        (tj + 1) * f(a) * f((tj + tj1 - tj2) // 2) * f((tj - tj1 + tj2) // 2),
        f((tj1 + tj2 + tj) // 2 + 1),
    )
    prefactor *= (f((tj + tm) // 2) * f((tj - tm) // 2)
                  * f((tj1 - tm1) // 2) * f((tj1 + tm1) // 2)
                  * f((tj2 - tm2) // 2) * f((tj2 + tm2) // 2))

    total = Fraction(0)
    for k in range(max(0, -d, -e), min(a, b, c) + 1):
        denom = f(k) * f(a - k) * f(b - k) * f(c - k) * f(d + k) * f(e + k)
        total += Fraction(-1 if k % 2 else 1, denom)

    if total == 0:
        return 0, Fraction(0)
    return (1 if total > 0 else -1), prefactor * total * total


def clebsch_gordan(j1, j2, j, m1, m2, m):
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | j m> as a float."""
    sign, square = clebsch_gordan_squared(j1, j2, j, m1, m2, m)
    return sign * math.sqrt(square)


def _split_square(n):
    """Write a positive integer n as (outer, inner) with n = outer^2 * inner, inner square-free"""
    outer, inner = 1, 1
    p = 2
    while p * p <= n:
        count = 0
        while n % p == 0:
            n //= p
            count += 1
        outer *= p ** (count // 2)
        if count % 2:
            inner *= p
        p += 1
    return outer, inner * n


def jz_coupling_factor_exact(atom, qubit):
    """C_G = |<F+1, m_F| J_z |F, m_F>|^2 as an exact Fraction.

    Each term of the m_J sum is sign * sqrt(rational); terms are grouped by
    their square-free radicand so the square of the sum stays rational.
    """
    if atom.electronic_j == 0:
        return Fraction(0)
    qubit.validate_for(atom)

    big_j, big_i = atom.electronic_j, atom.nuclear_spin
    f_lo, m_f = qubit.f_lower, qubit.m_f
    groups = {}
    two_j = int(big_j * 2)
    for two_mj in range(-two_j, two_j + 1, 2):
        m_j = Fraction(two_mj, 2)
        m_i = m_f - m_j
        if abs(m_i) > big_i:
            continue
        s1, q1 = clebsch_gordan_squared(big_j, big_i, f_lo, m_j, m_i, m_f)
        s2, q2 = clebsch_gordan_squared(big_j, big_i, f_lo + 1, m_j, m_i, m_f)
        sign = s1 * s2 * (1 if m_j > 0 else -1 if m_j < 0 else 0)
        if sign == 0:
            continue
        radicand = m_j * m_j * q1 * q2
        outer, inner = _split_square(radicand.numerator * radicand.denominator)
        coeff = Fraction(sign * outer, radicand.denominator)
        groups[inner] = groups.get(inner, Fraction(0)) + coeff

    nonzero = {k: v for k, v in groups.items() if v != 0}
    if not nonzero:
        return Fraction(0)
    if len(nonzero) > 1:
        raise NumericalError(f"matrix element is not a single surd: {nonzero}")
    (inner, coeff), = nonzero.items()
    return coeff * coeff * inner


def jz_coupling_factor(atom, qubit):
    """C_G as a float; see jz_coupling_factor_exact"""
    return float(jz_coupling_factor_exact(atom, qubit))


def dipolar_prefactor(atom, spacing):
    """mu0 gJ^2 muB^2 / (4 pi a^3 h) in Hz"""
    if not spacing > 0:
        raise AngularMomentumError(f"spacing must be positive, got {spacing}")
    value = MU0 * atom.lande_gj ** 2 * BOHR_MAGNETON ** 2 / (4.0 * math.pi * spacing ** 3 * PLANCK)
    return DipolarPrefactor(value=value, spacing=spacing)


def exchange_coupling(atom, qubit, spacing):
    """Nearest-neighbour exchange J_perp in Hz for a qubit at lattice spacing ``spacing`` (m)"""
    return dipolar_prefactor(atom, spacing).value * jz_coupling_factor(atom, qubit)


def coupling_scan(atom, spacing):
    """Every (F_lower, m_F) qubit of the species with its coupling, sorted by F_lower then m_F."""
    prefactor = dipolar_prefactor(atom, spacing).value
    rows = []
    for f_lo in atom.f_lower_range():
        two_f = int(f_lo * 2)
        for two_m in range(-two_f, two_f + 1, 2):
            qubit = HyperfineQubit(f_lo, Fraction(two_m, 2))
            exact = jz_coupling_factor_exact(atom, qubit)
            c_g = float(exact)
            rows.append(CouplingRow(qubit.f_lower, qubit.m_f, c_g, prefactor * c_g, exact))
    return rows


def family_maxima(rows):
    """Rows of maximal coupling within each F_lower family (ties all kept).

    Returns
    -------
    dict
        F_lower -> list of CouplingRow.
    """
    families = {}
    for row in rows:
        families.setdefault(row.f_lower, []).append(row)
    maxima = {}
    for f_lo, members in families.items():
        best = max(r.c_g_exact for r in members)
        maxima[f_lo] = [r for r in members if r.c_g_exact == best]
    return maxima
