"""Estimation of J_Z by Faraday rotation, and one-axis twisting of the light.

Conventions for the quantum Stokes operators of one pulse mode:
``S_i = (1/2) (a+^dag, a-^dag) sigma_i (a+, a-)^T``, so at fixed photon
number ``N_L`` they form a spin-``N_L/2`` representation with
``S_0 = N_L / 2``.  Classical Stokes parameters relate as ``S_i = 2 gamma S_i``
(hat on the right), ``gamma = hbar omega Z0 / (2 T A)``.

The Faraday map, to first order in the interaction time, is

    S_Y_out = S_Y_in + (tau/hbar) (alpha1 + beta1 gamma S_0) gamma S_X_in J_Z,

and with var(S_Y_in) = S_0/2 (coherent input along X) the unit-SNR
sensitivity is

    dJ_Z = hbar / (sqrt(2) tau gamma |alpha1 S_0^(1/2) + beta1 gamma S_0^(3/2)|).

A second variant with ``beta1 gamma / 2`` in place of ``beta1 gamma`` is kept
for comparison (``form="half"``); results carry a label saying which form
produced them.
"""

from dataclasses import dataclass, field
import csv
import io
import json
import math
import warnings

import numpy as np
from scipy import constants as sc
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from .errors import MixedRegimeError

SMALL_ROTATION = 0.1
TWIST_CAP = 2000
SENSITIVITY_FORMS = ("rederived", "half")
SENSITIVITY_HEADER = ("N_L", "delta_JZ_analytic", "delta_JZ_montecarlo", "mc_stderr")


@dataclass(frozen=True)
class BeamParameters:
    """Pulse parameters setting the single-photon intensity gamma."""

    omega: float  # rad/s
    duration: float  # s
    area: float  # m^2
    impedance: float = sc.physical_constants["characteristic impedance of vacuum"][0]

    def __post_init__(self):
        for name in ("omega", "duration", "area", "impedance"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")

    @classmethod
    def from_wavelength(cls, wavelength, duration, area):
        return cls(2 * math.pi * sc.c / wavelength, duration, area)

    @property
    def gamma(self):
        return sc.hbar * self.omega * self.impedance / (2 * self.duration * self.area)


@dataclass(frozen=True)
class MetrologyScenario:
    alpha1: float
    beta1: float
    tau: float
    gamma: float
    s0: float  # photon-number Stokes magnitude, N_L / 2
    jz: float = 0.0
    hbar: float = sc.hbar

    @property
    def n_photons(self):
        return 2 * self.s0

    @property
    def coupling(self):
        """alpha1 + beta1 gamma S_0."""
        return self.alpha1 + self.beta1 * self.gamma * self.s0

    @property
    def slope(self):
        """d<S_Y_out>/dJ_Z."""
        return self.tau * self.gamma / self.hbar * self.coupling * self.s0

    def with_s0(self, s0):
        return MetrologyScenario(self.alpha1, self.beta1, self.tau, self.gamma, s0, self.jz, self.hbar)


@dataclass(frozen=True)
class FaradayResult:
    phi: float
    mean_sy_out: float
    small_rotation: bool


def faraday_output(scenario):
    """Rotation angle and mean S_Y_out for a coherent input along +X.

    Terms in S_Z_in J_X_in are left out; they average to zero for this input.
    """
    s = scenario
    phi = s.tau * s.gamma / s.hbar * s.coupling * s.jz
    small = abs(phi) <= SMALL_ROTATION
    if not small:
        warnings.warn(f"rotation angle {phi:.3g} rad is outside the small-rotation regime", stacklevel=2)
    return FaradayResult(phi, phi * s.s0, small)


def sensitivity(scenario, form="rederived"):
    """Unit-SNR sensitivity dJ_Z."""
    if form not in SENSITIVITY_FORMS:
        raise ValueError(f"form must be one of {SENSITIVITY_FORMS}")
    s = scenario
    if s.alpha1 == 0 and s.beta1 == 0:
        raise ZeroDivisionError("both couplings vanish: no sensitivity to J_Z")
    nl = s.beta1 * s.gamma * (0.5 if form == "half" else 1.0)
    denom = math.sqrt(2) * s.tau * s.gamma * abs(s.alpha1 * math.sqrt(s.s0) + nl * s.s0**1.5)
    if denom == 0:
        raise ZeroDivisionError("linear and nonlinear couplings cancel at this intensity")
    return s.hbar / denom


def snr_condition(scenario, jz):
    """Left and right sides of the unit-SNR condition at a given J_Z."""
    s = scenario
    lhs = (s.tau * s.gamma / s.hbar) ** 2 * s.s0**2 * s.coupling**2 * jz**2
    return lhs, s.s0 / 2


@dataclass(frozen=True)
class Crossover:
    s0: float
    cancellation: float | None = None


def crossover(alpha1, beta1, gamma):
    """Intensity S_0* where the linear and nonlinear terms are equal in size.

    With opposite signs the two terms also cancel exactly at
    ``-alpha1 / (beta1 gamma)``, returned as ``cancellation``.
    """
    if alpha1 == 0 or beta1 == 0:
        raise ValueError("crossover needs both couplings nonzero")
    s_star = abs(alpha1 / (beta1 * gamma))
    cancel = None if alpha1 * beta1 * gamma > 0 else s_star
    return Crossover(s_star, cancel)


def scaling_exponent(n_photons, values, crossover_n=None):
    """Least-squares slope of log(values) against log(n_photons).

    With ``crossover_n`` the range must lie a decade or more on one side.
    """
    x = np.asarray(n_photons, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.size < 10:
        raise ValueError("need at least 10 points")
    if np.log10(x.max() / x.min()) < 2 - 1e-9:
        raise ValueError("need at least two decades of N_L")
    if crossover_n is not None:
        below = x.max() <= crossover_n / 10 * (1 + 1e-9)
        above = x.min() >= crossover_n * 10 * (1 - 1e-9)
        if not (below or above):
            raise MixedRegimeError("fit range is within a decade of the crossover")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def local_slope(scenario, s0, form="rederived", rel_step=1e-4):
    """d log(dJ_Z) / d log(S_0) by central difference."""
    up = sensitivity(scenario.with_s0(s0 * (1 + rel_step)), form)
    dn = sensitivity(scenario.with_s0(s0 * (1 - rel_step)), form)
    return (math.log(up) - math.log(dn)) / (math.log1p(rel_step) - math.log1p(-rel_step))


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    std: float
    trials: int
    estimates: np.ndarray = field(repr=False)

    @property
    def stderr_mean(self):
        return self.std / math.sqrt(self.trials)

    @property
    def stderr_std(self):
        return self.std / math.sqrt(2 * (self.trials - 1))


def monte_carlo_estimate(scenario, trials, seed, batch=10_000):
    """Shot-noise-limited estimates of J_Z from simulated S_Y_out readings.

    S_Y_in is drawn Gaussian with variance S_0/2; the estimator inverts the
    known slope.  Batches use spawned child streams, merged in order, so the
    output depends only on ``seed`` and ``trials``.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials")
    slope = scenario.slope
    if slope == 0:
        raise ZeroDivisionError("estimator slope is zero")
    sigma = math.sqrt(scenario.s0 / 2)
    n_batches = -(-trials // batch)
    children = np.random.SeedSequence(seed).spawn(n_batches)
    draws = []
    remaining = trials
    for child in children:
        n = min(batch, remaining)
        draws.append(np.random.default_rng(child).normal(0.0, sigma, n))
        remaining -= n
    sy_in = np.concatenate(draws)
    sy_out = sy_in + slope * scenario.jz
    est = sy_out / slope
    return MonteCarloResult(float(est.mean()), float(est.std(ddof=1)), trials, est)


def sensitivity_curve(scenario, n_grid, trials=0, seed=None, form="rederived"):
    """Rows (N_L, analytic, Monte Carlo, stderr); Monte Carlo columns are NaN when trials=0."""
    rows = []
    for i, n in enumerate(n_grid):
        sc_n = scenario.with_s0(n / 2)
        analytic = sensitivity(sc_n, form)
        if trials:
            if seed is None:
                raise ValueError("Monte Carlo needs an explicit seed")
            mc = monte_carlo_estimate(sc_n, trials, [seed, i])
            rows.append((float(n), analytic, mc.std, mc.stderr_std))
        else:
            rows.append((float(n), analytic, math.nan, math.nan))
    return rows


def curve_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SENSITIVITY_HEADER)
    for row in rows:
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# two-mode polarization states at fixed photon number


def stokes_operators(n):
    """Dense (S_X, S_Y, S_Z) on the N+1 states labelled by n_+ = 0..N."""
    k = np.arange(n + 1)
    up = np.sqrt((k[:-1] + 1) * (n - k[:-1]))  # a+^dag a- |k> = sqrt((k+1)(N-k)) |k+1>
    sp = np.diag(up, -1).astype(complex)
    sm = sp.conj().T
    return (sp + sm) / 2, (sp - sm) / 2j, np.diag(k - n / 2).astype(complex)


@dataclass(frozen=True, eq=False)
class TwoModeState:
    """Pure N-photon polarization state in the S_Z eigenbasis (index = n_+)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex)
        if abs(np.vdot(amp, amp).real - 1) > 1e-12:
            raise ValueError("state is not normalized")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def n_photons(self):
        return self.amplitudes.size - 1

    @property
    def m(self):
        """S_Z eigenvalues, (n_+ - n_-)/2."""
        n = self.n_photons
        return np.arange(n + 1) - n / 2

    @property
    def probabilities(self):
        return np.abs(self.amplitudes) ** 2

    def norm(self):
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def _apply(self):
        # S_X psi, S_Y psi, S_Z psi without building dense matrices
        n = self.n_photons
        c = self.amplitudes
        k = np.arange(n + 1)
        up = np.sqrt((k[:-1] + 1) * (n - k[:-1]))
        sp = np.zeros_like(c)
        sm = np.zeros_like(c)
        sp[1:] = up * c[:-1]
        sm[:-1] = up * c[1:]
        return (sp + sm) / 2, (sp - sm) / 2j, self.m * c

    def mean_spin(self):
        vs = self._apply()
        return np.array([np.vdot(self.amplitudes, v).real for v in vs])

    def covariance(self):
        """Symmetrized covariance <{S_i, S_j}>/2 - <S_i><S_j>."""
        vs = self._apply()
        mean = np.array([np.vdot(self.amplitudes, v).real for v in vs])
        second = np.array([[np.vdot(a, b).real for b in vs] for a in vs])
        return second - np.outer(mean, mean)

    def sz_moment(self, power):
        return float(np.sum(self.probabilities * self.m**power))


def coherent_state(n, tilt=0.0):
    """Spin coherent state pointing along (cos tilt, 0, sin tilt)."""
    if n < 0:
        raise ValueError("photon number must be non-negative")
    polar = math.pi / 2 - tilt
    c, s = math.cos(polar / 2), math.sin(polar / 2)
    if s == 0.0:
        amp = np.zeros(n + 1)
        amp[n] = 1.0
        return TwoModeState(amp.astype(complex))
    k = np.arange(n + 1)
    log_amp = (0.5 * (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))
               + k * math.log(c) + (n - k) * math.log(s))
    amp = np.exp(log_amp - log_amp.max())
    amp /= np.linalg.norm(amp)
    return TwoModeState(amp.astype(complex))


@dataclass(frozen=True, eq=False)
class TwistReport:
    n_photons: int
    chi_t: float
    tilt: float
    state: TwoModeState
    mean: np.ndarray
    covariance: np.ndarray
    min_variance: float
    qfi: float

    def as_dict(self):
        return {
            "N": self.n_photons,
            "chi_t": self.chi_t,
            "tilt": self.tilt,
            "mean_S": self.mean.tolist(),
            "covariance": self.covariance.tolist(),
            "min_variance": self.min_variance,
            "qfi": self.qfi,
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2)


def min_transverse_variance(mean, cov):
    """Smallest variance in the plane orthogonal to the mean spin."""
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        return float(np.linalg.eigvalsh(cov)[0])
    n = mean / norm
    trial = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = trial - n * (trial @ n)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    P = np.array([e1, e2])
    return float(np.linalg.eigvalsh(P @ cov @ P.T)[0])


def twisting_evolve(n, chi_t, tilt=0.0, cap=TWIST_CAP):
    """Apply exp(-i chi_t S_Z^2) to a coherent state tilted from +X toward +Z."""
    if n > cap:
        raise ValueError(f"N = {n} exceeds the twisting cap {cap}")
    if not 0 <= tilt <= math.pi / 2:
        raise ValueError("tilt must lie in [0, pi/2]")
    psi0 = coherent_state(n, tilt)
    amp = psi0.amplitudes * np.exp(-1j * chi_t * psi0.m**2)
    psi = TwoModeState(amp / np.linalg.norm(amp))
    mean = psi.mean_spin()
    cov = psi.covariance()
    return TwistReport(n, chi_t, tilt, psi, mean, cov, min_transverse_variance(mean, cov), twisting_qfi(psi))


def twisting_qfi(state):
    """QFI for the generator S_Z^2: 4 var(S_Z^2) from exact fourth moments."""
    m2 = state.sz_moment(2)
    return 4 * (state.sz_moment(4) - m2**2)


def optimal_tilt_qfi(n, grid=33):
    """Largest twisting QFI over the initial tilt, with the tilt achieving it.

    A coarse grid locates the peak, then golden-section search refines it.
    """
    def neg(t):
        return -twisting_qfi(coherent_state(n, t))

    ts = np.linspace(0, math.pi / 2, grid)
    vals = [neg(t) for t in ts]
    i = int(np.argmin(vals))
    if i in (0, grid - 1):
        return float(ts[i]), -vals[i]
    res = minimize_scalar(neg, bracket=(ts[i - 1], ts[i], ts[i + 1]), method="golden")
    return float(res.x), float(-res.fun)
