"""Effective Hamiltonian on the F=1 ground manifold by Klein's expansion.

The order-t contribution is

    h_eff^(t) = sum_{k} A_{k} P0 V R^(k1) V R^(k2) ... V R^(k_{t-1}) V P0,

summed over non-negative index vectors with k1 + ... + k_{t-1} = t - 1,
where R^(0) = P0 and R^(k) = ((1 - P0) / (E0 - h0))^k with E0 = 0.  The
rational coefficients A live in a bundled JSON table.

:func:`exact_ground_manifold` and :func:`convergence_scan` form the
brute-force check: diagonalize ``h0 + eps V`` and compare with the
perturbative eigenvalues as eps shrinks.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from importlib import resources
import json
import logging

import numpy as np

from .atomic import (
    LEVELS,
    DetuningSet,
    FieldConfig,
    OperatorMatrix,
    build_perturbation,
    is_hermitian,
    unperturbed_hamiltonian,
)
from .errors import ConfigError, DegeneracyError, PoleError

log = logging.getLogger(__name__)

POLE_TOL = 1e-6  # MHz
OVERLAP_THRESHOLD = 0.9
SUPPORTED_ORDERS = (2, 3, 4)


@dataclass(frozen=True)
class KleinTerm:
    kvec: tuple
    coeff: Fraction

    def __post_init__(self):
        kvec = tuple(int(k) for k in self.kvec)
        if any(k < 0 for k in kvec):
            raise ConfigError(f"negative index in {kvec}")
        object.__setattr__(self, "kvec", kvec)
        object.__setattr__(self, "coeff", Fraction(self.coeff))

    @property
    def order(self):
        return len(self.kvec) + 1


@dataclass(frozen=True)
class KleinTable:
    """Coefficient table keyed by perturbative order."""

    terms: dict

    def __post_init__(self):
        for order, terms in self.terms.items():
            kvecs = [t.kvec for t in terms]
            if len(set(kvecs)) != len(kvecs):
                raise ConfigError(f"duplicate index vectors at order {order}")
            for t in terms:
                if t.order != order or sum(t.kvec) != order - 1:
                    raise ConfigError(f"index vector {t.kvec} violates sum(k) = t-1 at order {order}")
        if 2 in self.terms:
            second = self.terms[2]
            if len(second) != 1 or second[0].kvec != (1,) or second[0].coeff != 1:
                raise ConfigError("second order must be the single term {1} with A = 1")

    def __getitem__(self, order):
        try:
            return self.terms[order]
        except KeyError:
            raise ValueError(f"order {order} not in the Klein table") from None

    def orders(self):
        return sorted(self.terms)

    def to_records(self):
        return [
            {"order": o, "kvec": list(t.kvec), "A_num": t.coeff.numerator, "A_den": t.coeff.denominator}
            for o in self.orders()
            for t in self.terms[o]
        ]


def parse_klein_table(records):
    if not isinstance(records, list):
        raise ConfigError("Klein table must be a JSON array")
    grouped = {}
    for rec in records:
        if set(rec) != {"order", "kvec", "A_num", "A_den"}:
            raise ConfigError(f"malformed Klein record {rec!r}")
        if rec["A_den"] == 0:
            raise ConfigError("zero denominator in Klein table")
        term = KleinTerm(tuple(rec["kvec"]), Fraction(rec["A_num"], rec["A_den"]))
        if term.order != rec["order"]:
            raise ConfigError(f"record {rec!r}: kvec length does not match order")
        grouped.setdefault(rec["order"], []).append(term)
    return KleinTable({o: tuple(ts) for o, ts in grouped.items()})


def load_klein_table(path=None):
    """Load a Klein table from ``path``, or the bundled one."""
    if path is None:
        text = resources.files("nlinterface.data").joinpath("klein_table.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return parse_klein_table(json.loads(text))


@lru_cache(maxsize=1)
def default_klein_table():
    return load_klein_table()


def projector_p0(structure=LEVELS):
    """Projector onto the F=1 ground manifold."""
    p = np.zeros(len(structure.states))
    p[structure.manifold_indices(1)] = 1.0
    return OperatorMatrix(np.diag(p), "full")


def _resolvent_diagonal(h0, p0, tol=POLE_TOL, structure=LEVELS):
    energies = np.real(np.diag(h0.data))
    inside = np.real(np.diag(p0.data)) > 0.5
    r = np.zeros_like(energies)
    for i, e in enumerate(energies):
        if inside[i]:
            continue
        if abs(e) < tol:
            raise PoleError(structure.states[i], e, tol)
        r[i] = 1.0 / (0.0 - e)
    return r


def resolvent(k, h0, p0, tol=POLE_TOL):
    """R^(0) = P0, R^(k) = ((1 - P0) / (E0 - h0))^k for k > 0, with E0 = 0."""
    if k < 0:
        raise ValueError("resolvent power must be non-negative")
    if k == 0:
        return p0
    r = _resolvent_diagonal(h0, p0, tol)
    return OperatorMatrix(np.diag(r**k), "full")


def _operator_string(kvec, V, p_diag, r_diag):
    X = p_diag[:, None] * V
    for k in kvec:
        d = p_diag if k == 0 else r_diag**k
        X = (X * d[None, :]) @ V
    return X * p_diag[None, :]


def klein_operator(kvec, V, h0, p0, tol=POLE_TOL):
    """O_{k} = P0 V R^(k1) V ... V R^(k_{t-1}) V P0 on the full space."""
    p_diag = np.real(np.diag(p0.data))
    r_diag = _resolvent_diagonal(h0, p0, tol) if any(k > 0 for k in kvec) else None
    return OperatorMatrix(_operator_string(kvec, V.data, p_diag, r_diag), "full", hermitian=False)


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    """h_eff^(t) restricted to F=1, basis m_F = -1, 0, +1."""

    order: int
    matrix: OperatorMatrix
    detuning: DetuningSet
    field: FieldConfig


def _manifold_block(full, structure=LEVELS):
    idx = structure.manifold_indices(1)
    return full[np.ix_(idx, idx)]


def klein_contributions(order, field, detuning, table=None):
    """Per-term 3x3 blocks ``A_k * O_k``, keyed by index vector."""
    table = default_klein_table() if table is None else table
    h0 = unperturbed_hamiltonian(detuning)
    p0 = projector_p0()
    V = build_perturbation(field)
    p_diag = np.real(np.diag(p0.data))
    r_diag = _resolvent_diagonal(h0, p0)
    out = {}
    for term in table[order]:
        block = _manifold_block(_operator_string(term.kvec, V.data, p_diag, r_diag))
        out[term.kvec] = float(term.coeff) * block
    return out


def effective_hamiltonian(order, field, detuning, table=None):
    """Order-``order`` effective Hamiltonian on the F=1 manifold (MHz)."""
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported order {order}; expected one of {SUPPORTED_ORDERS}")
    parts = klein_contributions(order, field, detuning, table)
    h = sum(parts.values(), np.zeros((3, 3), dtype=complex))
    if not is_hermitian(h):
        raise ArithmeticError(f"order-{order} effective Hamiltonian is not Hermitian")
    h = 0.5 * (h + h.conj().T)
    return EffectiveHamiltonian(order, OperatorMatrix(h, "ground"), detuning, field)


def exact_ground_manifold(field, detuning, eps, overlap_threshold=OVERLAP_THRESHOLD):
    """Eigenvalues of h0 + eps V continuously connected to the F=1 manifold.

    The three eigenvectors with the largest weight on F=1 are selected; each
    must carry at least ``overlap_threshold`` of its norm there.  Returned
    sorted ascending.
    """
    h0 = unperturbed_hamiltonian(detuning).data
    V = build_perturbation(field).data
    evals, evecs = np.linalg.eigh(h0 + eps * V)
    idx = LEVELS.manifold_indices(1)
    overlap = np.sum(np.abs(evecs[idx, :]) ** 2, axis=0)
    order = np.argsort(overlap)[::-1]
    chosen = order[:3]
    if np.any(overlap[chosen] < overlap_threshold):
        raise DegeneracyError(
            f"manifold overlaps {np.sort(overlap[chosen])} fall below {overlap_threshold}"
        )
    return np.sort(evals[chosen])


@dataclass(frozen=True)
class ScanResult:
    slope: float
    eps: np.ndarray
    residuals: np.ndarray
    kept: np.ndarray
    orders: tuple

    @property
    def dropped(self):
        return int(np.count_nonzero(~self.kept))


def _noise_floor(field, detuning, eps):
    scale = max(np.abs(detuning.energies()).max(), eps * field.max_amplitude)
    return 100 * np.finfo(float).eps * scale


def convergence_scan(field, detuning, eps_grid, orders=(2, 4), table=None):
    """Log-log slope of the exact-vs-perturbative eigenvalue residual.

    ``orders`` selects the model: ``(2,)`` for second order only, ``(2, 4)``
    for second plus fourth, ``()`` for the zero Hamiltonian.  Points whose
    residual sits at the rounding floor are dropped with a warning.
    """
    eps_grid = np.asarray(eps_grid, dtype=float)
    blocks = {t: effective_hamiltonian(t, field, detuning, table).matrix.data for t in orders}
    residuals = np.empty_like(eps_grid)
    kept = np.ones(eps_grid.shape, dtype=bool)
    for i, eps in enumerate(eps_grid):
        exact = exact_ground_manifold(field, detuning, eps)
        model = sum((eps**t * blocks[t] for t in orders), np.zeros((3, 3), dtype=complex))
        approx = np.linalg.eigvalsh(model)
        residuals[i] = np.abs(exact - approx).max()
        if residuals[i] <= _noise_floor(field, detuning, eps):
            kept[i] = False
    if kept.sum() < 2:
        raise ValueError("fewer than two residuals above the rounding floor")
    if not kept.all():
        log.warning("dropped %d scan points at the rounding floor", (~kept).sum())
    slope = np.polyfit(np.log(eps_grid[kept]), np.log(residuals[kept]), 1)[0]
    return ScanResult(float(slope), eps_grid, residuals, kept, tuple(orders))
