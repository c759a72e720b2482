"""Spin/Stokes decomposition of the effective Hamiltonian and its spectra.

The F=1 operator basis is ``{I, j_x, j_y, j_z, j_0}`` with
``j_x = (f_x^2 - f_y^2)/2``, ``j_y = (f_x f_y + f_y f_x)/2``, ``j_z = f_z/2``
and ``j_0 = f_z^2/2``.  The closed-form coefficients are quoted per collective
operator ``J = 2 * sum_i j^(i)`` (equivalently ``J_z = sum f_z``,
``J_0 = sum f_z^2``), which is the normalization under which
``sum_i P_{m=0} = N_A - J_0`` holds.  :data:`J_NORMALIZATION` converts between
the two; ``N_A`` terms carry no factor.

Stokes components are built from the Rabi-scaled amplitudes,
``S_i = (g+*, g-*) sigma_i (g+, g-)^T``, so second-order coefficients are in
MHz per MHz^2 and fourth-order ones in MHz per MHz^4.
"""

from dataclasses import dataclass, field
import csv
import io
import json
import logging
import math

import numpy as np
from scipy.optimize import bisect

from .atomic import DetuningSet, FieldConfig
from .errors import DecompositionError, PoleError
from .klein import POLE_TOL, effective_hamiltonian

log = logging.getLogger(__name__)

J_NORMALIZATION = 2.0

COEFFICIENTS = ("alpha1", "alpha2", "beta0J", "beta0N", "beta1", "beta2")
SPECTRA_HEADER = ("detuning_MHz",) + COEFFICIENTS

OPERATOR_NAMES = ("I", "jx", "jy", "jz", "j0")
MONOMIALS = {
    2: ("S0", "Sx", "Sy", "Sz"),
    4: ("S0^2", "S0Sx", "S0Sy", "S0Sz", "Sz^2", "SxSz", "SySz", "Sx^2-Sy^2", "SxSy"),
}

RESIDUAL_TOL = 1e-10
CONDITION_LIMIT = 1e8


def spin_one():
    """f_x, f_y, f_z for f=1 in the basis m = -1, 0, +1."""
    fp = np.zeros((3, 3), dtype=complex)
    fp[1, 0] = fp[2, 1] = math.sqrt(2)  # raising
    fm = fp.conj().T
    fx = (fp + fm) / 2
    fy = (fp - fm) / 2j
    fz = np.diag([-1.0, 0.0, 1.0]).astype(complex)
    return fx, fy, fz


@dataclass(frozen=True, eq=False)
class SpinOperatorBasis:
    """The five operators spanning Delta m in {0, +-2} on f=1, with their dual basis."""

    operators: tuple
    dual: tuple
    names: tuple = OPERATOR_NAMES

    @classmethod
    def build(cls):
        fx, fy, fz = spin_one()
        ops = (
            np.eye(3, dtype=complex),
            (fx @ fx - fy @ fy) / 2,
            (fx @ fy + fy @ fx) / 2,
            fz / 2,
            fz @ fz / 2,
        )
        gram = np.array([[np.trace(a.conj().T @ b).real for b in ops] for a in ops])
        inv = np.linalg.inv(gram)
        dual = tuple(sum(inv[a, b] * ops[b] for b in range(5)) for a in range(5))
        return cls(ops, dual)

    def gram(self):
        return np.array([[np.trace(a.conj().T @ b).real for b in self.operators] for a in self.operators])

    def biorthogonality(self):
        """tr(D_a^dag O_b); the identity matrix by construction."""
        return np.array([[np.trace(d.conj().T @ o).real for o in self.operators] for d in self.dual])

    def project(self, h):
        """Real coefficients c with h = sum_b c_b O_b (exact when h is in the span)."""
        return np.array([np.trace(d.conj().T @ h).real for d in self.dual])

    def compose(self, coeffs):
        return sum(c * o for c, o in zip(coeffs, self.operators))

    def __getitem__(self, name):
        return self.operators[self.names.index(name)]


BASIS = SpinOperatorBasis.build()


@dataclass(frozen=True)
class StokesVector:
    s0: float
    sx: float
    sy: float
    sz: float

    @classmethod
    def from_field(cls, field):
        gp, gm = field.g_plus, field.g_minus
        cross = np.conj(gp) * gm
        return cls(abs(gp) ** 2 + abs(gm) ** 2, 2 * cross.real, 2 * cross.imag, abs(gp) ** 2 - abs(gm) ** 2)

    def monomials(self, order):
        s0, sx, sy, sz = self.s0, self.sx, self.sy, self.sz
        if order == 2:
            return np.array([s0, sx, sy, sz])
        if order == 4:
            return np.array([s0 * s0, s0 * sx, s0 * sy, s0 * sz, sz * sz, sx * sz, sy * sz, sx * sx - sy * sy, sx * sy])
        raise ValueError(f"no Stokes monomials for order {order}")


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Fit of h_eff^(t) = sum_{mono, op} c[mono, op] * mono(S) * op."""

    order: int
    detuning: DetuningSet
    coeffs: np.ndarray  # (n_monomials, 5)
    residual: float
    condition: float

    def coefficient(self, monomial, operator):
        return self.coeffs[MONOMIALS[self.order].index(monomial), OPERATOR_NAMES.index(operator)]

    def named(self):
        c = self.coefficient
        if self.order == 2:
            return {
                "alpha1": c("Sz", "jz") / J_NORMALIZATION,
                "alpha2": c("Sx", "jx") / J_NORMALIZATION,
                "alpha0J": c("S0", "j0") / J_NORMALIZATION,
                "alpha0N": c("S0", "I"),
            }
        return {
            "beta0J": c("Sz^2", "j0") / J_NORMALIZATION,
            "beta0N": c("Sz^2", "I"),
            "beta1": c("S0Sz", "jz") / J_NORMALIZATION,
            "beta2": c("S0Sx", "jx") / J_NORMALIZATION,
            "remainder0J": c("S0^2", "j0") / J_NORMALIZATION,
            "remainder0N": c("S0^2", "I"),
        }

    def reconstruct(self, stokes):
        weights = stokes.monomials(self.order) @ self.coeffs
        return BASIS.compose(weights)

    def named_reconstruct(self, stokes):
        """h_eff rebuilt from the named terms only (the named ansatz)."""
        n = self.named()
        s = stokes
        J = J_NORMALIZATION
        if self.order == 2:
            w = [n["alpha0N"] * s.s0, J * n["alpha2"] * s.sx, J * n["alpha2"] * s.sy,
                 J * n["alpha1"] * s.sz, J * n["alpha0J"] * s.s0]
        else:
            w = [n["beta0N"] * s.sz**2 + n["remainder0N"] * s.s0**2,
                 J * n["beta2"] * s.s0 * s.sx, J * n["beta2"] * s.s0 * s.sy,
                 J * n["beta1"] * s.s0 * s.sz,
                 J * (n["beta0J"] * s.sz**2 + n["remainder0J"] * s.s0**2)]
        return BASIS.compose(w)


def sample_fields(detuning, extra=10, seed=0):
    """Polarization-diverse probe fields scaled well inside the perturbative ceiling."""
    a = min(abs(d) for d in detuning.excited) / 50.0
    base = [
        (1, 0), (0, 1),                                   # circular
        (1 / math.sqrt(2), 1 / math.sqrt(2)),             # linear
        (1 / math.sqrt(2), 1j / math.sqrt(2)),            # linear, rotated
        (0.9, 0.4 * np.exp(0.7j)),                        # elliptical
        (0.3 * 0.6, 0.95 * 0.6 * np.exp(-1.1j)),          # weaker elliptical
    ]
    rng = np.random.default_rng(seed)
    for _ in range(extra):
        z = rng.normal(size=2) + 1j * rng.normal(size=2)
        base.append(tuple(z / np.linalg.norm(z) * rng.uniform(0.4, 1.0)))
    return [FieldConfig(a * gp, a * gm) for gp, gm in base]


def extract_coefficients(order, detuning, table=None, seed=0):
    """Decompose h_eff^(order) into Stokes monomials times spin operators.

    Raises :class:`DecompositionError` when the fit residual exceeds
    1e-10 relative, i.e. the Hamiltonian has a piece outside the ansatz.
    """
    if order not in MONOMIALS:
        raise ValueError("coefficients are defined for orders 2 and 4")
    extra = 10
    for attempt in range(4):
        fields = sample_fields(detuning, extra=extra, seed=seed + attempt)
        scale = min(abs(d) for d in detuning.excited) / 50.0
        A = np.array([StokesVector.from_field(f).monomials(order) for f in fields])
        cond = np.linalg.cond(A / scale**order)
        if cond < CONDITION_LIMIT:
            break
        extra *= 2
    else:
        raise DecompositionError(f"sample design stays ill-conditioned (cond={cond:.3g})")

    hs = [effective_hamiltonian(order, f, detuning, table).matrix.data for f in fields]
    Y = np.array([BASIS.project(h) for h in hs])
    coeffs, *_ = np.linalg.lstsq(A, Y, rcond=None)

    # residual in operator space, so pieces outside the 5-operator span count too
    err = 0.0
    norm = 0.0
    for h, row in zip(hs, A):
        err += np.linalg.norm(h - BASIS.compose(row @ coeffs)) ** 2
        norm += np.linalg.norm(h) ** 2
    residual = math.sqrt(err / norm) if norm > 0 else 0.0
    if residual > RESIDUAL_TOL:
        raise DecompositionError(f"order-{order} fit residual {residual:.3g} exceeds {RESIDUAL_TOL:g}")
    return Decomposition(order, detuning, coeffs, residual, float(cond))


@dataclass(frozen=True)
class TensorCoefficients:
    """Named coupling strengths at one detuning (internal units)."""

    detuning: DetuningSet
    alpha1: float
    alpha2: float
    alpha0J: float
    alpha0N: float
    beta0J: float
    beta0N: float
    beta1: float
    beta2: float
    remainder0J: float
    remainder0N: float
    residual2: float = 0.0
    residual4: float = 0.0

    def as_dict(self):
        out = {k: getattr(self, k) for k in (
            "alpha1", "alpha2", "alpha0J", "alpha0N", "beta0J", "beta0N",
            "beta1", "beta2", "remainder0J", "remainder0N", "residual2", "residual4")}
        out.update(self.detuning.as_dict())
        return out


def tensor_coefficients(detuning, table=None):
    d2 = extract_coefficients(2, detuning, table)
    d4 = extract_coefficients(4, detuning, table)
    return TensorCoefficients(detuning, **d2.named(), **d4.named(), residual2=d2.residual, residual4=d4.residual)


def _check_poles(values, tol=POLE_TOL):
    for name, v in values:
        if abs(v) < tol:
            raise PoleError(name, v, tol)


def alpha_numerators(detuning):
    d0, d1, d2 = detuning.delta0, detuning.delta1, detuning.delta2
    return (
        5 * d0 * d1 - 5 * d0 * d2 - 4 * d1 * d2,
        d0 * d1 - 5 * d0 * d2 + 4 * d1 * d2,
    )


def beta_numerators(detuning):
    d0, d1, d2, D = detuning.delta0, detuning.delta1, detuning.delta2, detuning.ground_splitting
    bJ = (12 * d0**3 * d1**2 * d2**2 - 4 * d0**3 * d1 * d2**3 + 12 * d0**3 * d1**3 * D
          - 10 * d0**3 * d1**2 * d2 * D - 12 * d0**2 * d1**3 * d2 * D
          - 10 * d0**3 * d1 * d2**2 * D - 12 * d0 * d1**3 * d2**2 * D
          + 20 * d0**2 * d1 * d2**3 * D + 20 * d0 * d1**2 * d2**3 * D)
    bN = -12 * d0**3 * d1**3 * d2 - 24 * d0**3 * d1**2 * d2**2 + 4 * d0**3 * d1 * d2**3
    b1 = (-9 * d0**3 * d1**3 * d2 + 6 * d0**3 * d1**2 * d2**2 + 3 * d0**3 * d1 * d2**3
          + 35 * d0**3 * d1**3 * D - 5 * d0**3 * d1**2 * d2 * D - 4 * d0**2 * d1**3 * d2 * D
          - 5 * d0**3 * d1 * d2**2 * D - 4 * d0 * d1**3 * d2**2 * D - 25 * d0**3 * d2**3 * D
          - 20 * d0**2 * d1 * d2**3 * D - 20 * d0 * d1**2 * d2**3 * D - 16 * d1**3 * d2**3 * D)
    b2 = (3 * d0**3 * d1**3 * d2 - 6 * d0**3 * d1**2 * d2**2 + 3 * d0**3 * d1 * d2**3
          + 7 * d0**3 * d1**3 * D - 15 * d0**3 * d1**2 * d2 * D + 16 * d0**2 * d1**3 * d2 * D
          - 15 * d0**3 * d1 * d2**2 * D + 16 * d0 * d1**3 * d2**2 * D - 25 * d0**3 * d2**3 * D
          + 16 * d1**3 * d2**3 * D)
    return bJ, bN, b1, b2


def closed_form_alpha(detuning):
    """(alpha1, alpha2) = B * polynomial, B = -1 / (48 delta0 delta1 delta2)."""
    _check_poles([("F'=0", detuning.delta0), ("F'=1", detuning.delta1), ("F'=2", detuning.delta2)])
    B = -1.0 / (48 * detuning.delta0 * detuning.delta1 * detuning.delta2)
    n1, n2 = alpha_numerators(detuning)
    return B * n1, B * n2


def closed_form_beta(detuning):
    """(beta0J, beta0N, beta1, beta2) = C * polynomial, C = 1 / (1152 d0^3 d1^3 d2^3 Delta)."""
    _check_poles([("F'=0", detuning.delta0), ("F'=1", detuning.delta1), ("F'=2", detuning.delta2),
                  ("F=2", detuning.ground_splitting)])
    d0, d1, d2 = detuning.delta0, detuning.delta1, detuning.delta2
    C = 1.0 / (1152 * d0**3 * d1**3 * d2**3 * detuning.ground_splitting)
    return tuple(C * n for n in beta_numerators(detuning))


def closed_form(name, detuning):
    if name in ("alpha1", "alpha2"):
        return closed_form_alpha(detuning)[("alpha1", "alpha2").index(name)]
    if name in ("beta0J", "beta0N", "beta1", "beta2"):
        return closed_form_beta(detuning)[("beta0J", "beta0N", "beta1", "beta2").index(name)]
    raise ValueError(f"unknown coefficient {name!r}; expected one of {COEFFICIENTS}")


def numerator(name, detuning):
    """Polynomial part of a closed form; shares its zeros but not its poles."""
    if name in ("alpha1", "alpha2"):
        return alpha_numerators(detuning)[("alpha1", "alpha2").index(name)]
    if name in ("beta0J", "beta0N", "beta1", "beta2"):
        return beta_numerators(detuning)[("beta0J", "beta0N", "beta1", "beta2").index(name)]
    raise ValueError(f"unknown coefficient {name!r}; expected one of {COEFFICIENTS}")


def extracted(name, detuning, table=None):
    if name not in COEFFICIENTS:
        raise ValueError(f"unknown coefficient {name!r}; expected one of {COEFFICIENTS}")
    order = 2 if name.startswith("alpha") else 4
    return extract_coefficients(order, detuning, table).named()[name]


def pole_positions(constants):
    """Laser detunings of the four excited resonances (MHz)."""
    return (0.0,) + tuple(constants.excited_offsets)


@dataclass
class SpectraTable:
    detuning: np.ndarray
    values: dict
    masked: list = field(default_factory=list)

    def rows(self):
        for i, d in enumerate(self.detuning):
            yield (d,) + tuple(self.values[k][i] for k in COEFFICIENTS)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SPECTRA_HEADER)
        for row in self.rows():
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def spectra(grid, constants, pole_margin=0.5):
    """Closed-form coefficient spectra versus laser detuning.

    Points within ``pole_margin`` MHz of a resonance that the coefficients
    diverge at (F'=0, 1, 2) are masked and reported in ``masked``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty detuning grid")
    poles = pole_positions(constants)[:3]
    keep, masked = [], []
    for d in grid:
        (masked if min(abs(d - p) for p in poles) < pole_margin else keep).append(d)
    values = {k: [] for k in COEFFICIENTS}
    for d in keep:
        ds = DetuningSet.from_laser(constants, d)
        a = closed_form_alpha(ds)
        b = closed_form_beta(ds)
        for k, v in zip(COEFFICIENTS, a + b):
            values[k].append(v)
    if masked:
        log.warning("masked %d pole-adjacent detunings", len(masked))
    return SpectraTable(np.array(keep), {k: np.array(v) for k, v in values.items()}, masked)


@dataclass(frozen=True)
class RootRecord:
    coefficient: str
    root: float
    bracket_lo: float
    bracket_hi: float

    def as_dict(self):
        return {"coefficient": self.coefficient, "root_MHz": self.root,
                "bracket_lo": self.bracket_lo, "bracket_hi": self.bracket_hi}


def roots_to_json(records):
    return json.dumps([r.as_dict() for r in records], indent=2)


def _pole_free_intervals(lo, hi, poles, margin):
    cuts = sorted(p for p in poles if lo < p < hi)
    edges = [lo]
    for p in cuts:
        edges.extend([p - margin, p + margin])
    edges.append(hi)
    return [(a, b) for a, b in zip(edges[::2], edges[1::2]) if b > a]


def find_roots(name, lo, hi, constants, source="closed_form", step=0.5, xtol=1e-6,
               pole_margin=1e-3, table=None):
    """Sign-change roots of a coefficient in ``[lo, hi]`` (laser detuning, MHz).

    The interval is split at every excited resonance.  ``source`` selects the
    closed-form numerator polynomial or the coefficient extracted from the
    perturbation pipeline.  Each bracketed root is refined by bisection to
    ``xtol`` MHz.
    """
    if name not in COEFFICIENTS:
        raise ValueError(f"unknown coefficient {name!r}; expected one of {COEFFICIENTS}")
    if not lo < hi:
        raise ValueError("need lo < hi")
    if source == "closed_form":
        def f(x):
            return numerator(name, DetuningSet.from_laser(constants, x))
    elif source == "extracted":
        def f(x):
            return extracted(name, DetuningSet.from_laser(constants, x), table)
    else:
        raise ValueError(f"unknown source {source!r}")

    out = []
    for a, b in _pole_free_intervals(lo, hi, pole_positions(constants), pole_margin):
        n = max(2, int(math.ceil((b - a) / step)) + 1)
        xs = np.linspace(a, b, n)
        ys = [f(x) for x in xs]
        for x0, x1, y0, y1 in zip(xs, xs[1:], ys, ys[1:]):
            if y0 == 0.0:
                out.append(RootRecord(name, float(x0), float(x0), float(x0)))
            elif y0 * y1 < 0:
                r = bisect(f, x0, x1, xtol=xtol / 4, maxiter=200)
                out.append(RootRecord(name, float(r), float(x0), float(x1)))
        if ys[-1] == 0.0 and (not out or out[-1].root != xs[-1]):
            out.append(RootRecord(name, float(xs[-1]), float(xs[-1]), float(xs[-1])))
    return out
