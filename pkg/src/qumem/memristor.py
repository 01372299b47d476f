"""Quantum memristor device model.

A tunable beam splitter whose reflectivity R is driven by feedback from
single-photon detection at one output port.  The model covers:

* the mean-field output relation  <n_out> = (1 - R) <n_in>
* the output quantum states in single-rail (vacuum/one-photon) and
  dual-rail (path) encoding, and their purities
* the feedback update laws: sliding-window integration
  R(t) = 0.5 + (1/T) integral_{t-T}^{t} (<n_in> - 0.5) dtau,
  a first-order low-pass variant, and a frozen (open-loop) variant
* the imperfect-splitter leakage model and the classical
  doped-junction memristor the device is formally analogous to.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

R_MIN = 1e-3  # feedback floor: the controller never lets R reach zero

WINDOWED = "windowed"
LOWPASS = "lowpass"
FROZEN = "frozen"
_LAWS = (WINDOWED, LOWPASS, FROZEN)


@dataclass(frozen=True)
class QubitInput:
    """Input qubit amplitudes: alpha on vacuum, beta on the one-photon
    component, |alpha|^2 + |beta|^2 = 1.  <n_in> = |beta|^2."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"|alpha|^2 + |beta|^2 = {norm}, expected 1")

    @classmethod
    def from_beta2(cls, beta2):
        """Real-amplitude qubit with <n_in> = beta2."""
        if not 0.0 <= beta2 <= 1.0:
            raise ValueError("beta2 must lie in [0, 1]")
        return cls(math.sqrt(1.0 - beta2), math.sqrt(beta2))

    @property
    def beta2(self):
        return abs(self.beta) ** 2


def mz_reflectivity(theta):
    """Reflectivity of a balanced Mach-Zehnder vs its internal phase:
    R(theta) = (1 + cos theta) / 2."""
    return 0.5 * (1.0 + np.cos(theta))


def output_expectation(n_in, reflectivity):
    """Mean photon number at the through port: (1 - R) <n_in>."""
    if not 0.0 <= n_in <= 1.0:
        raise ValueError("n_in must lie in [0, 1]")
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError("reflectivity must lie in [0, 1]")
    return (1.0 - reflectivity) * n_in


@dataclass(frozen=True)
class LeakyCoupler:
    """Imperfect splitter: a fraction eta of the light always reaches
    the undesired output, regardless of the control."""

    eta: float

    def __post_init__(self):
        if not 0.0 <= self.eta < 0.5:
            raise ValueError("leakage factor eta must lie in [0, 0.5)")


def leaky_output_expectation(n_in, reflectivity, coupler):
    """Through-port mean with leakage: [eta R + (1-eta)(1-R)] <n_in>."""
    if not 0.0 <= n_in <= 1.0:
        raise ValueError("n_in must lie in [0, 1]")
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError("reflectivity must lie in [0, 1]")
    eta = coupler.eta
    return (eta * reflectivity + (1.0 - eta) * (1.0 - reflectivity)) * n_in


def output_state_single_rail(qubit, reflectivity):
    """2x2 output density matrix in the vacuum/one-photon basis.

    Mixture of the heralded-loss branch and the coherent survival
    branch: diag entries |alpha|^2 + |beta|^2 R and |beta|^2 (1-R),
    coherence alpha beta^* sqrt(1-R).
    """
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError("reflectivity must lie in [0, 1]")
    a, b = qubit.alpha, qubit.beta
    t = math.sqrt(1.0 - reflectivity)
    rho = np.array(
        [
            [abs(a) ** 2 + abs(b) ** 2 * reflectivity, a * np.conj(b) * t],
            [np.conj(a) * b * t, abs(b) ** 2 * (1.0 - reflectivity)],
        ],
        dtype=complex,
    )
    return rho


def output_state_dual_rail(qubit, reflectivity):
    """3x3 output density matrix over the path-encoded kept rails.

    Basis order: no photon kept (it crossed to the feedback port),
    photon in the bypass rail, photon in the through rail.  Diagonal
    (|beta|^2 R, |alpha|^2, |beta|^2 (1-R)); the lower 2x2 block is the
    coherent qubit that survived.
    """
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError("reflectivity must lie in [0, 1]")
    a, b = qubit.alpha, qubit.beta
    t = math.sqrt(1.0 - reflectivity)
    rho = np.zeros((3, 3), dtype=complex)
    rho[0, 0] = abs(b) ** 2 * reflectivity
    rho[1, 1] = abs(a) ** 2
    rho[2, 2] = abs(b) ** 2 * (1.0 - reflectivity)
    rho[1, 2] = a * np.conj(b) * t
    rho[2, 1] = np.conj(a) * b * t
    return rho


def purity_closed_form(beta2, reflectivity):
    """Single-rail output purity: 1 - 2 |beta|^4 R (1 - R)."""
    if not 0.0 <= beta2 <= 1.0 or not 0.0 <= reflectivity <= 1.0:
        raise ValueError("beta2 and reflectivity must lie in [0, 1]")
    return 1.0 - 2.0 * beta2**2 * reflectivity * (1.0 - reflectivity)


def dual_rail_purity(beta2, reflectivity):
    """Dual-rail output purity.

    The extra heralded population splits off an additional incoherent
    branch, so the dual-rail value is lower than the single-rail one:
    1 - 2 |beta|^4 R (1-R) - 2 |alpha|^2 |beta|^2 R.
    """
    alpha2 = 1.0 - beta2
    return (
        purity_closed_form(beta2, reflectivity)
        - 2.0 * alpha2 * beta2 * reflectivity
    )


def estimate_n_in(n_meas_d, r_prev):
    """Invert the feedback-port measurement: <n_in> = <n_meas,D> / R.

    The controller keeps R >= R_MIN so this division is always safe;
    the estimate is clamped to the physical range [0, 1].
    """
    if r_prev < R_MIN:
        raise ValueError(f"reflectivity {r_prev} is below the floor {R_MIN}")
    return min(max(n_meas_d / r_prev, 0.0), 1.0)


class MemristorState:
    """Reflectivity R plus the sample window that drives it.

    law is one of 'windowed' (sliding-window integration over the last
    T seconds), 'lowpass' (first-order filter with cutoff f_cut toward
    the instantaneous target), or 'frozen' (open loop, R fixed).
    Updates are single-writer: advance() mutates this object.
    """

    def __init__(self, reflectivity=0.5, window_seconds=1.0, law=WINDOWED,
                 f_cut=None, r_min=R_MIN, t0=0.0):
        if law not in _LAWS:
            raise ValueError(f"law must be one of {_LAWS}")
        if law == LOWPASS and (f_cut is None or f_cut <= 0):
            raise ValueError("lowpass law needs a positive f_cut")
        if law == WINDOWED and window_seconds <= 0:
            raise ValueError("windowed law needs a positive window")
        self.law = law
        self.T = float(window_seconds)
        self.f_cut = f_cut
        self.r_min = r_min
        self.R = self._clamp(reflectivity)
        self.window = deque()  # (t, n_in, dt) triples spanning <= T
        self.last_t = float(t0)

    def _clamp(self, r):
        return min(max(r, self.r_min), 1.0)

    def advance(self, t, n_in):
        """Feed one (timestamp, <n_in>) sample and update R."""
        if t < self.last_t:
            raise ValueError("timestamps must be nondecreasing")
        dt = t - self.last_t
        self.last_t = t
        if self.law == FROZEN:
            return self
        if self.law == WINDOWED:
            self.window.append((t, n_in, dt))
            while self.window and self.window[0][0] <= t - self.T:
                self.window.popleft()
            integral = sum((n - 0.5) * w for _, n, w in self.window)
            self.R = self._clamp(0.5 + integral / self.T)
        else:  # lowpass: exact exponential step, stable at any dt
            decay = math.exp(-2.0 * math.pi * self.f_cut * dt)
            self.R = self._clamp(n_in + (self.R - n_in) * decay)
        return self

    def copy(self):
        dup = MemristorState(self.R, self.T, self.law, self.f_cut,
                             self.r_min, self.last_t)
        dup.window = deque(self.window)
        return dup


def update_windowed(state, sample):
    """Advance a windowed-law memristor by one (t, n_in) sample."""
    if state.law != WINDOWED:
        raise ValueError("state law is not 'windowed'")
    t, n_in = sample
    return state.advance(t, n_in)


def update_lowpass(state, sample):
    """Advance a low-pass-law memristor by one (t, n_in) sample."""
    if state.law != LOWPASS:
        raise ValueError("state law is not 'lowpass'")
    t, n_in = sample
    return state.advance(t, n_in)


@dataclass(frozen=True)
class ClassicalMemristorState:
    """Doped/intrinsic junction memristor: doped thickness w inside a
    junction of thickness D, resistances R_low < R_high, ion mobility
    constant mu."""

    w: float
    D: float
    R_low: float
    R_high: float
    mu: float

    def __post_init__(self):
        if not 0.0 <= self.w <= self.D:
            raise ValueError("doped thickness must satisfy 0 <= w <= D")
        if self.R_low >= self.R_high:
            raise ValueError("R_low must be smaller than R_high")

    @property
    def memristance(self):
        frac = self.w / self.D
        return self.R_low * frac + self.R_high * (1.0 - frac)


def classical_memristor_step(state, current, dt):
    """One explicit step of the junction memristor.

    v = [R_low w/D + R_high (1 - w/D)] i, then the ion drift
    w <- clamp(w + mu (R_high / D) i dt, [0, D]).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    voltage = state.memristance * current
    w_new = state.w + state.mu * (state.R_high / state.D) * current * dt
    w_new = min(max(w_new, 0.0), state.D)
    return voltage, replace(state, w=w_new)
