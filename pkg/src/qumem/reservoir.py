"""Memristor-based quantum reservoir computer.

Input vectors are amplitude-encoded (or mixed into coherent kets for
the classical baseline) on an m-mode, p-photon Fock space, scrambled by
a fixed random coupler mesh, passed through a bank of floor(m/3)
memristors, scrambled again, and measured in the Fock basis.  Memory
lives only in the memristor reflectivities: each step consumes a fresh
encoded input, and the feedback-port statistics of that step drive a
discrete sliding-window update of every reflectivity.

Each memristor owns a triple of rails (bypass, through, feedback); its
coupler acts on (through, feedback).  A photon found on the feedback
rail is reinjected: the feedback occupation is measured (which dephases
across feedback outcomes) and moved back onto the through rail, so the
map is trace preserving and photon-number conserving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import (
    DimensionError,
    ModeUnitary,
    QuantumState,
    _lift_sector,
    _sector,
    coupler,
    enumerate_basis,
    lift_unitary,
)
from .memristor import R_MIN

QUANTUM = "quantum"
COHERENT = "coherent"


@dataclass(frozen=True)
class ReservoirConfig:
    """Geometry, seeds and measurement mode of the reservoir."""

    modes: int = 9
    photons: int = 3
    mesh_seed: int = 2021
    shots: int = None        # None: exact Fock distribution
    window: int = 12         # memristor memory, in steps
    feedback: bool = True    # False freezes every reflectivity at r_init
    r_init: float = 0.5
    sample_seed: int = None

    def __post_init__(self):
        if self.modes < 3:
            raise ValueError("need at least three modes for one memristor")
        if self.photons < 1:
            raise ValueError("need at least one photon")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be positive or None")

    @property
    def n_memristors(self):
        return self.modes // 3


@dataclass
class EncodedInput:
    """A reservoir input state plus its encoding provenance."""

    state: QuantumState
    kind: str = QUANTUM
    zero_fallback: bool = False


# ---------------------------------------------------------------------------
# encodings

def amplitude_encode(v, basis):
    """Classical vector as amplitudes on the first len(v) basis states.

    An all-zero vector cannot be normalised; it falls back to the first
    basis state and the fallback is flagged on the returned input.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size > basis.size:
        raise DimensionError(
            f"vector of length {v.size} exceeds basis size {basis.size}"
        )
    amps = np.zeros(basis.size, dtype=complex)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        amps[0] = 1.0
        state = QuantumState.pure(basis, amps, validate=False)
        return EncodedInput(state, QUANTUM, zero_fallback=True)
    amps[: v.size] = v / norm
    return EncodedInput(QuantumState.pure(basis, amps, validate=False), QUANTUM)


def _coherent_ket(k, dim):
    """Truncated coherent ket with amplitude k over a dim-level ladder,
    renormalised after truncation.  Computed in log space: the raw
    coefficients k^n / sqrt(n!) overflow long before n ~ 165."""
    if k == 0:
        ket = np.zeros(dim)
        ket[0] = 1.0
        return ket
    n = np.arange(dim, dtype=float)
    logs = n * math.log(k) - 0.5 * np.array(
        [math.lgamma(i + 1.0) for i in range(dim)]
    )
    logs -= logs.max()
    ket = np.exp(logs)
    return ket / np.linalg.norm(ket)


def coherent_encode(v, basis, truncation=None):
    """Classical baseline: statistical mixture of fixed coherent kets.

    Component j of v weights the truncated coherent ket of amplitude j,
    so the data enters only through the mixture weights.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    if np.any(v < 0):
        raise ValueError("mixture weights must be non-negative")
    total = v.sum()
    if total == 0.0:
        raise ValueError("all-zero vector cannot form a mixture")
    if v.size > basis.size:
        raise DimensionError(
            f"vector of length {v.size} exceeds basis size {basis.size}"
        )
    dim = basis.size if truncation is None else int(truncation)
    if dim != basis.size:
        raise ValueError("truncation must equal the basis size")
    kets = np.stack([_coherent_ket(k, dim) for k in range(v.size)])
    weights = v / total
    rho = (kets.T * weights) @ kets.conj()
    rho = (rho + rho.conj().T) / 2.0
    state = QuantumState.from_density(basis, rho.astype(complex),
                                      validate=False)
    return EncodedInput(state, COHERENT)


# ---------------------------------------------------------------------------
# random meshes and random states

def build_mesh(modes, seed=None, rng=None, reflectivity=None, phase=None):
    """Rectangular nearest-neighbour coupler mesh of depth `modes`.

    Every coupler draws reflectivity ~ U[0,1] and phase ~ U[0, 2 pi)
    from the seeded generator; fixed values may be forced for tests.
    """
    if modes < 2:
        raise ValueError("a mesh needs at least two modes")
    if rng is None:
        rng = np.random.default_rng(seed)
    u = np.eye(modes, dtype=complex)
    for layer in range(modes):
        for j in range(layer % 2, modes - 1, 2):
            r = rng.uniform() if reflectivity is None else reflectivity
            ph = rng.uniform(0.0, 2.0 * math.pi) if phase is None else phase
            block = coupler(r, ph)
            u[j : j + 2, :] = block @ u[j : j + 2, :]
    return ModeUnitary(u)


def haar_vector(dim, rng):
    """Haar-random pure state on a dim-dimensional space."""
    z = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return z / np.linalg.norm(z)


def _embed(amps, basis):
    vec = np.zeros(basis.size, dtype=complex)
    vec[: amps.size] = amps
    return QuantumState.pure(basis, vec, validate=False)


def sample_entangled(d_loc, seed, basis=None):
    """Haar-random pure state on the d_loc x d_loc bipartite subspace
    (almost surely entangled), embedded on the first d_loc^2 basis
    states."""
    basis = enumerate_basis(9, 3) if basis is None else basis
    if d_loc * d_loc > basis.size:
        raise DimensionError("d_loc^2 exceeds the reservoir dimension")
    rng = np.random.default_rng(seed)
    return _embed(haar_vector(d_loc * d_loc, rng), basis)


def sample_separable(d_loc, seed, basis=None):
    """Tensor product of two Haar-random d_loc states (Schmidt rank 1),
    embedded on the first d_loc^2 basis states."""
    basis = enumerate_basis(9, 3) if basis is None else basis
    if d_loc * d_loc > basis.size:
        raise DimensionError("d_loc^2 exceeds the reservoir dimension")
    rng = np.random.default_rng(seed)
    product = np.outer(haar_vector(d_loc, rng), haar_vector(d_loc, rng))
    return _embed(product.reshape(-1), basis)


def schmidt_coefficients(state, d_loc):
    """Schmidt spectrum of the embedded bipartite amplitudes."""
    amps = state.amplitudes[: d_loc * d_loc].reshape(d_loc, d_loc)
    svals = np.linalg.svd(amps, compute_uv=False)
    norm = np.linalg.norm(svals)
    return svals / norm


def entanglement_entropy(state, d_loc):
    """Von Neumann entropy (nats) of one side of the bipartition."""
    probs = schmidt_coefficients(state, d_loc) ** 2
    probs = probs[probs > 1e-15]
    return float(-(probs * np.log(probs)).sum())


# ---------------------------------------------------------------------------
# the reservoir

class DiscreteMemristor:
    """Sliding-window reflectivity update in discrete time:
    R = clamp(0.5 + (1/W) sum_{last W steps} (n_est - 0.5))."""

    def __init__(self, window, r_init=0.5, frozen=False, r_min=R_MIN):
        self.window = int(window)
        self.r_init = float(r_init)
        self.frozen = frozen
        self.r_min = r_min
        self.samples = []
        self.R = self._clamp(r_init)

    def _clamp(self, r):
        return min(max(r, self.r_min), 1.0)

    def update(self, n_est):
        if self.frozen:
            return self.R
        self.samples.append(float(n_est))
        if len(self.samples) > self.window:
            del self.samples[0]
        acc = sum(s - 0.5 for s in self.samples)
        self.R = self._clamp(0.5 + acc / self.window)
        return self.R

    def reset(self):
        self.samples = []
        self.R = self._clamp(self.r_init)


class Reservoir:
    """Fixed input/output meshes around a bank of memristor couplers.

    Single-writer: step() and run_sequence() mutate the memristor bank
    and the step counter.  Distinct instances are independent.
    """

    def __init__(self, config=None, **kwargs):
        self.config = config or ReservoirConfig(**kwargs)
        cfg = self.config
        self.basis = enumerate_basis(cfg.modes, cfg.photons)
        rng = np.random.default_rng(cfg.mesh_seed)
        self.u_in = build_mesh(cfg.modes, rng=rng)
        self.u_out = build_mesh(cfg.modes, rng=rng)
        self.u_in_f = lift_unitary(self.u_in, self.basis)
        self.u_out_f = lift_unitary(self.u_out, self.basis)
        self.rails = [(3 * k, 3 * k + 1, 3 * k + 2)
                      for k in range(cfg.n_memristors)]
        self.memristors = [
            DiscreteMemristor(cfg.window, cfg.r_init,
                              frozen=not cfg.feedback)
            for _ in self.rails
        ]
        self.step_index = 0
        self._rng = np.random.default_rng(cfg.sample_seed)
        self._build_layer_structure()
        self._build_reinjection()

    # -- precomputed structure ------------------------------------------------

    def _build_layer_structure(self):
        """The bank couples disjoint (through, feedback) pairs, so its
        lifted matrix factorises per pair and per pair-photon sector.
        Everything index-like is precomputed; only the small per-sector
        coupler lifts depend on the reflectivities."""
        occ = self.basis.occupation_matrix()
        p = self.config.photons
        self._pair_q = []       # photons in each pair, per basis state
        self._pair_li = []      # local index inside the pair sector
        mask = np.ones((self.basis.size, self.basis.size), dtype=bool)
        for _, thru, fb in self.rails:
            q = occ[:, thru] + occ[:, fb]
            li = q - occ[:, thru]
            self._pair_q.append(q)
            self._pair_li.append(li)
            mask &= q[:, None] == q[None, :]
        rest_modes = [m for m in range(self.config.modes)
                      if all(m not in (t, f) for _, t, f in self.rails)]
        _, rest_id = np.unique(occ[:, rest_modes], axis=0,
                               return_inverse=True)
        mask &= rest_id[:, None] == rest_id[None, :]
        self._layer_mask = mask
        self._pair_sectors = [_sector(2, q) for q in range(p + 1)]

    def _build_reinjection(self):
        """Feedback-rail measurement groups and the reinjection index
        map (feedback occupation moved onto the through rail)."""
        basis = self.basis
        target = np.empty(basis.size, dtype=int)
        patterns = {}
        for i, occupation in enumerate(basis.states):
            occ = list(occupation)
            pat = tuple(occ[fb] for _, _, fb in self.rails)
            for _, thru, fb in self.rails:
                occ[thru] += occ[fb]
                occ[fb] = 0
            target[i] = basis.index_of(tuple(occ))
            patterns.setdefault(pat, []).append(i)
        self._reinjection_groups = [
            (np.array(idx), target[np.array(idx)])
            for idx in patterns.values()
        ]
        occm = basis.occupation_matrix().astype(float)
        self._fb_weights = [occm[:, fb] for _, _, fb in self.rails]

    # -- per-step pieces -------------------------------------------------------

    def bank_mode_matrix(self):
        """m x m mode matrix of the current memristor couplers."""
        u = np.eye(self.config.modes, dtype=complex)
        for (_, thru, fb), mem in zip(self.rails, self.memristors):
            u[np.ix_((thru, fb), (thru, fb))] = coupler(mem.R)
        return u

    def _layer_lift(self):
        d = self.basis.size
        p = self.config.photons
        out = self._layer_mask.astype(complex)
        for k, mem in enumerate(self.memristors):
            block = coupler(mem.R)
            table = np.zeros((p + 1, p + 1, p + 1), dtype=complex)
            for q in range(p + 1):
                table[q, : q + 1, : q + 1] = _lift_sector(
                    block, self._pair_sectors[q]
                )
            q, li = self._pair_q[k], self._pair_li[k]
            out *= table[q[:, None], li[:, None], li[None, :]]
        return out

    def _reinject_density(self, rho):
        out = np.zeros_like(rho)
        for idx, tgt in self._reinjection_groups:
            out[np.ix_(tgt, tgt)] += rho[np.ix_(idx, idx)]
        return out

    def _reinject_branches(self, vec):
        """Pure-state channel output as stacked branch vectors (columns)."""
        cols = []
        for idx, tgt in self._reinjection_groups:
            part = vec[idx]
            if np.any(part != 0):
                col = np.zeros(vec.size, dtype=complex)
                col[tgt] = part
                cols.append(col)
        return np.stack(cols, axis=1)

    def memristor_layer(self, state):
        """Apply the memristor bank: couplers on the (through, feedback)
        pairs, then reinjection.  Returns the post-reinjection state and
        the per-memristor feedback-rail expectations read off before
        reinjection (these drive the update law)."""
        lifted = self._layer_lift()
        if state.is_pure:
            vec = lifted @ state.amplitudes
            diag = np.abs(vec) ** 2
            rho_mid = np.outer(vec, vec.conj())
        else:
            rho_mid = lifted @ state.density() @ lifted.conj().T
            diag = rho_mid.diagonal().real
        fb_probs = np.array([diag @ w for w in self._fb_weights])
        rho_out = self._reinject_density(rho_mid)
        out = QuantumState.from_density(self.basis, rho_out, validate=False)
        return out, fb_probs

    def _advance_memristors(self, fb_probs):
        for mem, fb in zip(self.memristors, fb_probs):
            if mem.frozen:
                continue
            n_est = min(max(fb / mem.R, 0.0), 1.0)
            mem.update(n_est)

    def _measured_probs(self, probs):
        probs = np.clip(probs, 0.0, None)
        probs /= probs.sum()
        if self.config.shots is None:
            return probs
        counts = self._rng.multinomial(self.config.shots, probs)
        return counts / float(self.config.shots)

    def _step(self, x, want_output):
        state = x.state if isinstance(x, EncodedInput) else x
        if state.dim != self.basis.size:
            raise DimensionError("input state does not match the reservoir")
        lifted_layer = self._layer_lift()
        probs = None
        if state.is_pure:
            vec = self.u_in_f @ state.amplitudes
            vec = lifted_layer @ vec
            diag = np.abs(vec) ** 2
            fb_probs = np.array([diag @ w for w in self._fb_weights])
            if want_output:
                branches = self._reinject_branches(vec)
                out_branches = self.u_out_f @ branches
                probs = (np.abs(out_branches) ** 2).sum(axis=1)
        else:
            rho = self.u_in_f @ state.density() @ self.u_in_f.conj().T
            rho = lifted_layer @ rho @ lifted_layer.conj().T
            diag = rho.diagonal().real
            fb_probs = np.array([diag @ w for w in self._fb_weights])
            if want_output:
                rho = self._reinject_density(rho)
                rho = self.u_out_f @ rho @ self.u_out_f.conj().T
                probs = rho.diagonal().real
        self._advance_memristors(fb_probs)
        self.step_index += 1
        if want_output:
            return self._measured_probs(probs)
        return None

    # -- public API -------------------------------------------------------------

    def reset(self):
        """Clear the memristor memories (new example); the sampling RNG
        stream is left running."""
        for mem in self.memristors:
            mem.reset()
        self.step_index = 0
        return self

    def step(self, x):
        """Feed one encoded input, return the measured Fock
        distribution, and advance every memristor window."""
        return self._step(x, want_output=True)

    def run_sequence(self, inputs, reset=False):
        """Fold the reservoir over an input sequence and return the
        measured distribution of the final step.  Earlier optical
        states are discarded by construction (memory lives in the
        reflectivities), so only the last output is computed."""
        inputs = list(inputs)
        if not inputs:
            raise ValueError("input sequence must be non-empty")
        if reset:
            self.reset()
        for x in inputs[:-1]:
            self._step(x, want_output=False)
        return self._step(inputs[-1], want_output=True)

    @property
    def reflectivities(self):
        return np.array([mem.R for mem in self.memristors])


def step(reservoir, x):
    """Functional wrapper: advance `reservoir` by one input."""
    probs = reservoir.step(x)
    return probs, reservoir


def run_sequence(reservoir, inputs, reset=False):
    return reservoir.run_sequence(inputs, reset=reset)
