"""Level structure and dipole coupling of the 87Rb D2 line.

Units: hbar = 1 internally.  Energies, detunings and field amplitudes are
cyclic frequencies in MHz.  The circular field amplitudes are stored already
multiplied by the reduced dipole element, ``g_q = D_JJ' * E_q / h``, so the
perturbation ``V`` comes out directly in MHz.  :func:`coefficient_to_si` is
the single place where SI units come back in.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
import json
import math
from typing import NamedTuple

import numpy as np
from scipy import constants as sc

from .angular import wigner3j, wigner6j
from .errors import ConfigError, PerturbativeCeilingError

# fine structure of the D2 line and nuclear spin of 87Rb
J_GROUND = 0.5
J_EXCITED = 1.5
NUCLEAR_SPIN = 1.5

GROUND_F = (1, 2)
EXCITED_F = (0, 1, 2, 3)
N_GROUND = 8
N_EXCITED = 16
DIM = N_GROUND + N_EXCITED

HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True)
class AtomicConstants:
    """Configured atomic data.

    Attributes
    ----------
    dipole : float
        Reduced dipole element <J||er||J'> in C m.
    ground_splitting : float
        F=2 minus F=1 ground hyperfine splitting, MHz.
    excited_offsets : tuple of float
        Energies of F'=1, 2, 3 above F'=0, MHz.
    """

    dipole: float
    ground_splitting: float
    excited_offsets: tuple

    def __post_init__(self):
        offsets = tuple(float(x) for x in self.excited_offsets)
        object.__setattr__(self, "excited_offsets", offsets)
        if len(offsets) != 3:
            raise ConfigError("excited_offsets must hold exactly three values (F'=1,2,3)")
        if not all(math.isfinite(x) for x in (self.dipole, self.ground_splitting, *offsets)):
            raise ConfigError("atomic constants must be finite")
        if self.dipole <= 0:
            raise ConfigError("dipole element must be positive")
        if self.ground_splitting <= 0:
            raise ConfigError("ground splitting must be positive")
        if offsets[0] <= 0 or any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ConfigError("excited offsets must be positive and strictly increasing")


_CONFIG_KEYS = {"dipole_Cm", "ground_splitting_MHz", "excited_offsets_MHz"}


def parse_constants(obj):
    """Build :class:`AtomicConstants` from a decoded JSON object (strict)."""
    if not isinstance(obj, dict):
        raise ConfigError("atomic constants must be a JSON object")
    unknown = set(obj) - _CONFIG_KEYS
    missing = _CONFIG_KEYS - set(obj)
    if unknown:
        raise ConfigError(f"unknown keys in atomic constants: {sorted(unknown)}")
    if missing:
        raise ConfigError(f"missing keys in atomic constants: {sorted(missing)}")
    offsets = obj["excited_offsets_MHz"]
    if not isinstance(offsets, list):
        raise ConfigError("excited_offsets_MHz must be an array")
    try:
        return AtomicConstants(
            dipole=float(obj["dipole_Cm"]),
            ground_splitting=float(obj["ground_splitting_MHz"]),
            excited_offsets=tuple(float(x) for x in offsets),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"non-numeric atomic constant: {exc}") from exc


def load_constants(path=None):
    """Load atomic constants from ``path``, or the bundled 87Rb D2 data."""
    if path is None:
        text = resources.files("nlinterface.data").joinpath("rb87_d2.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"atomic constants are not valid JSON: {exc}") from exc
    return parse_constants(obj)


class State(NamedTuple):
    manifold: str  # "ground" or "excited"
    F: int
    m: int


@dataclass(frozen=True)
class LevelStructure:
    """The 24-state basis, ground states first, each block ordered by (F, m)."""

    states: tuple

    def __post_init__(self):
        ground = [s for s in self.states if s.manifold == "ground"]
        excited = [s for s in self.states if s.manifold == "excited"]
        if len(ground) != N_GROUND or len(excited) != N_EXCITED:
            raise ConfigError("D2 basis needs 8 ground and 16 excited states")
        if list(self.states[:N_GROUND]) != ground:
            raise ConfigError("ground states must precede excited states")

    @classmethod
    def d2(cls):
        ground = [State("ground", F, m) for F in GROUND_F for m in range(-F, F + 1)]
        excited = [State("excited", F, m) for F in EXCITED_F for m in range(-F, F + 1)]
        return cls(tuple(ground + excited))

    @property
    def ground(self):
        return self.states[:N_GROUND]

    @property
    def excited(self):
        return self.states[N_GROUND:]

    def index(self, state):
        return self.states.index(state)

    def manifold_indices(self, F=1):
        """Indices of the ground states with the given F (the degenerate manifold)."""
        return [i for i, s in enumerate(self.states) if s.manifold == "ground" and s.F == F]


LEVELS = LevelStructure.d2()


@dataclass(frozen=True)
class DetuningSet:
    """Rotating-frame energies.

    ``laser`` is the laser detuning from F=1 -> F'=0 (the user-facing axis).
    ``excited`` holds delta_F' = omega_F' - omega for F'=0..3, so that
    ``excited[0] == -laser``.
    """

    laser: float
    excited: tuple
    ground_splitting: float

    def __post_init__(self):
        object.__setattr__(self, "excited", tuple(float(x) for x in self.excited))
        if len(self.excited) != 4:
            raise ConfigError("need four excited detunings (F'=0..3)")

    @classmethod
    def from_laser(cls, constants, laser):
        offsets = (0.0,) + constants.excited_offsets
        return cls(float(laser), tuple(o - laser for o in offsets), constants.ground_splitting)

    @classmethod
    def explicit(cls, excited, ground_splitting):
        """Detunings given directly, e.g. the equal-detuning substitution."""
        excited = tuple(float(x) for x in excited)
        return cls(-excited[0], excited, float(ground_splitting))

    @property
    def delta0(self):
        return self.excited[0]

    @property
    def delta1(self):
        return self.excited[1]

    @property
    def delta2(self):
        return self.excited[2]

    @property
    def delta3(self):
        return self.excited[3]

    def energies(self, structure=LEVELS):
        """Diagonal of h0 in ``structure`` order."""
        out = []
        for s in structure.states:
            if s.manifold == "ground":
                out.append(0.0 if s.F == 1 else self.ground_splitting)
            else:
                out.append(self.excited[s.F])
        return np.array(out)

    def as_dict(self):
        return {
            "laser_detuning_MHz": self.laser,
            "delta_Fprime_MHz": list(self.excited),
            "ground_splitting_MHz": self.ground_splitting,
        }


@dataclass(frozen=True)
class FieldConfig:
    """Circular field amplitudes ``g_pm = D_JJ' E_pm / h`` in MHz."""

    g_plus: complex = 0j
    g_minus: complex = 0j

    def __post_init__(self):
        gp, gm = complex(self.g_plus), complex(self.g_minus)
        if not (np.isfinite(gp) and np.isfinite(gm)):
            raise ConfigError("field amplitudes must be finite")
        object.__setattr__(self, "g_plus", gp)
        object.__setattr__(self, "g_minus", gm)

    def amplitude(self, q):
        if q == 1:
            return self.g_plus
        if q == -1:
            return self.g_minus
        raise ValueError("only sigma+ (q=+1) and sigma- (q=-1) components exist")

    def scaled(self, factor):
        return FieldConfig(self.g_plus * factor, self.g_minus * factor)

    @property
    def max_amplitude(self):
        return max(abs(self.g_plus), abs(self.g_minus))


def perturbative_ceiling(detuning):
    """Default ceiling on |g|: a tenth of the smallest excited detuning."""
    return min(abs(d) for d in detuning.excited) / 10.0


def check_ceiling(field, detuning, ceiling=None):
    limit = perturbative_ceiling(detuning) if ceiling is None else ceiling
    if field.max_amplitude >= limit:
        raise PerturbativeCeilingError(
            f"|g| = {field.max_amplitude:.3g} MHz exceeds the perturbative ceiling {limit:.3g} MHz"
        )


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense complex matrix tagged with its basis ("full" 24-dim or "ground" 3-dim)."""

    data: np.ndarray
    basis: str = "full"
    hermitian: bool = field(default=True)

    def __post_init__(self):
        arr = np.array(self.data, dtype=complex)
        expected = {"full": DIM, "ground": 3}.get(self.basis)
        if expected is None:
            raise ValueError(f"unknown basis tag {self.basis!r}")
        if arr.shape != (expected, expected):
            raise ValueError(f"{self.basis} operator must be {expected}x{expected}, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if self.hermitian and not is_hermitian(arr):
            raise ValueError("matrix tagged Hermitian is not Hermitian")

    @property
    def dim(self):
        return self.data.shape[0]


def is_hermitian(arr, rtol=HERMITIAN_RTOL):
    scale = np.abs(arr).max()
    if scale == 0:
        return True
    return np.abs(arr - arr.conj().T).max() < rtol * scale


def unperturbed_hamiltonian(detuning, structure=LEVELS):
    """Rotating-frame h0 = 0 I3 + Delta I5 + delta_0 I1 + delta_1 I3 + delta_2 I5 + delta_3 I7."""
    return OperatorMatrix(np.diag(detuning.energies(structure)).astype(complex), "full")


def build_level_structure(constants, laser_detuning):
    """Return ``(structure, detunings, h0)`` for a laser detuning in MHz."""
    detuning = DetuningSet.from_laser(constants, laser_detuning)
    return LEVELS, detuning, unperturbed_hamiltonian(detuning)


@lru_cache(maxsize=None)
def _absorption_factor(F, m, Fp, mp, q):
    # hyperfine reduction: <F m|e r_q|F' m'> = <J||er||J'> (-1)^(F'+J+1+I) sqrt((2F'+1)(2J+1))
    #        {J J' 1; F' F I} (-1)^(F'-1+m) sqrt(2F+1) (F' 1 F; m' q -m)
    # and <F' m'|e r_q|F m> = (-1)^q <F m|e r_{-q}|F' m'>^*
    reduced = (
        (-1) ** int(round(Fp + J_GROUND + 1 + NUCLEAR_SPIN))
        * math.sqrt((2 * Fp + 1) * (2 * J_GROUND + 1))
        * wigner6j(J_GROUND, J_EXCITED, 1, Fp, F, NUCLEAR_SPIN)
    )
    emission = (
        reduced
        * (-1) ** (Fp - 1 + m)
        * math.sqrt(2 * F + 1)
        * wigner3j(Fp, 1, F, mp, -q, -m)
    )
    return (-1) ** q * emission


def dipole_element(ground, excited, q):
    """Dimensionless factor of <F' m'|e r_q|F m> in units of D_JJ'.

    ``ground`` and ``excited`` are :class:`State` or ``(F, m)`` pairs.  The
    Condon-Shortley phase convention of the 3j/6j symbols is kept.
    """
    if q == 0:
        raise ValueError("pi transitions (q=0) are excluded: the beam propagates along z")
    if q not in (1, -1):
        raise ValueError("q must be +1 or -1")
    F, m = ground[-2:]
    Fp, mp = excited[-2:]
    if mp - m != q:
        return 0.0
    return _absorption_factor(F, m, Fp, mp, q)


@lru_cache(maxsize=None)
def _coupling_pattern(q):
    out = np.zeros((N_EXCITED, N_GROUND))
    for r, e in enumerate(LEVELS.excited):
        for c, g in enumerate(LEVELS.ground):
            if e.m - g.m == q:
                out[r, c] = dipole_element(g, e, q)
    out.setflags(write=False)
    return out


def upward_block(field):
    """The 16x8 block V_up (excited rows, ground columns) in MHz."""
    return _coupling_pattern(1) * field.g_plus + _coupling_pattern(-1) * field.g_minus


def build_perturbation(field, detuning=None, *, ceiling=None, allow_strong=False):
    """Dipole perturbation V = [[0, V_up^+], [V_up, 0]] in the RWA.

    If ``detuning`` is given the field is checked against the perturbative
    ceiling unless ``allow_strong`` is set.
    """
    if detuning is not None and not allow_strong:
        check_ceiling(field, detuning, ceiling)
    vup = upward_block(field)
    V = np.zeros((DIM, DIM), dtype=complex)
    V[N_GROUND:, :N_GROUND] = vup
    V[:N_GROUND, N_GROUND:] = vup.conj().T
    return OperatorMatrix(V, "full")


def coefficient_to_si(value, order, constants):
    """Convert an internal order-``order`` coefficient to SI (J per (V/m)^order).

    The internal value multiplies ``g^order`` and yields MHz; in SI the term is
    ``h*1e6 * value * (D E / (h*1e6))**order``.
    """
    unit = sc.h * 1e6
    return value * constants.dipole**order / unit ** (order - 1)
