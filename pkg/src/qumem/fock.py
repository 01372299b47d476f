"""Dense multimode Fock-space engine for linear optics.

Basis enumeration, lifting of mode unitaries to the multi-photon
Hilbert space via matrix permanents, density-operator algebra, and
photon-counting measurement.  Everything is dense numpy: the systems
of interest stay small (nine modes with three photons give a
165-dimensional space, binomial(m+p-1, p) in general).

Conventions
-----------
* Occupation vectors are enumerated in descending lexicographic order,
  so for a single photon the k-th basis state is the photon in mode k
  and the lifted matrix of a mode unitary U reduces to U itself.
* A two-mode coupler with reflectivity R acts as
  [[t, i r], [i r, t]] with t = sqrt(1-R), r = sqrt(R): the photon
  crosses rails with probability R and picks up the phase i.
"""

from __future__ import annotations

import math

import numpy as np

ATOL_UNITARY = 1e-10
ATOL_STATE = 1e-10
EIG_FLOOR = -1e-9  # tolerated round-off on density-operator eigenvalues


class DimensionError(ValueError):
    """Raised for invalid or mismatched Hilbert-space dimensions."""


def _sector(modes, photons):
    """Occupation vectors of `modes` modes holding exactly `photons`
    photons, in descending lexicographic order."""
    if modes == 1:
        return [(photons,)]
    out = []
    for k in range(photons, -1, -1):
        out.extend((k,) + tail for tail in _sector(modes - 1, photons - k))
    return out


class OccupationBasis:
    """Ordered enumeration of m-mode occupation vectors.

    Either a fixed photon-number sector (size binomial(m+p-1, p)) or
    the union of all sectors 0..p (needed for reduced states and for
    vacuum/one-photon qubits).  The ordering is deterministic: sectors
    ascend in total photon number, and each sector is descending
    lexicographic.
    """

    def __init__(self, modes, photons, states, fixed_total):
        self.modes = modes
        self.photons = photons
        self.states = tuple(tuple(s) for s in states)
        self.fixed_total = fixed_total
        self._index = {occ: i for i, occ in enumerate(self.states)}
        self.totals = np.array([sum(occ) for occ in self.states], dtype=int)

    @property
    def size(self):
        return len(self.states)

    def __len__(self):
        return len(self.states)

    def index_of(self, occupation):
        try:
            return self._index[tuple(occupation)]
        except KeyError:
            raise KeyError(f"occupation {tuple(occupation)} not in basis")

    def occupation_of(self, index):
        return self.states[index]

    def occupation_matrix(self):
        """(size, modes) integer array of occupations."""
        return np.array(self.states, dtype=int)

    def __repr__(self):
        kind = "p=%d" % self.photons if self.fixed_total else "p<=%d" % self.photons
        return f"OccupationBasis(m={self.modes}, {kind}, size={self.size})"


def enumerate_basis(modes, photons):
    """All occupation vectors of `modes` modes with exactly `photons`
    photons.  Size is binomial(modes+photons-1, photons)."""
    if modes < 1:
        raise DimensionError("mode count must be >= 1")
    if photons < 0:
        raise ValueError("photon count must be >= 0")
    states = _sector(modes, photons)
    assert len(states) == math.comb(modes + photons - 1, photons)
    return OccupationBasis(modes, photons, states, fixed_total=True)


def enumerate_basis_upto(modes, photons):
    """Union of the 0..photons sectors (ascending total photon number)."""
    if modes < 1:
        raise DimensionError("mode count must be >= 1")
    states = []
    for p in range(photons + 1):
        states.extend(_sector(modes, p))
    return OccupationBasis(modes, photons, states, fixed_total=False)


class ModeUnitary:
    """An m x m unitary acting on the optical modes."""

    def __init__(self, matrix, atol=ATOL_UNITARY):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionError("mode unitary must be square")
        dev = np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0])))
        if dev > atol:
            raise ValueError(f"matrix is not unitary (deviation {dev:.2e})")
        self.matrix = matrix

    @property
    def dim(self):
        return self.matrix.shape[0]


def coupler(reflectivity, phase=0.0):
    """Two-mode coupler [[t, ir], [ir, t]] @ diag(1, e^{i phase})."""
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError("reflectivity must lie in [0, 1]")
    t = math.sqrt(1.0 - reflectivity)
    r = math.sqrt(reflectivity)
    bs = np.array([[t, 1j * r], [1j * r, t]], dtype=complex)
    if phase:
        bs = bs @ np.diag([1.0, np.exp(1j * phase)])
    return bs


class QuantumState:
    """Pure amplitude vector or density operator over an OccupationBasis."""

    def __init__(self, basis, amplitudes=None, density=None, validate=True):
        if (amplitudes is None) == (density is None):
            raise ValueError("provide exactly one of amplitudes or density")
        self.basis = basis
        if amplitudes is not None:
            vec = np.asarray(amplitudes, dtype=complex).reshape(-1)
            if vec.shape[0] != basis.size:
                raise DimensionError("amplitude length does not match basis size")
            if validate:
                norm = np.sum(np.abs(vec) ** 2)
                if abs(norm - 1.0) > ATOL_STATE:
                    raise ValueError(f"state norm {norm} deviates from 1")
            self.amplitudes = vec
            self._density = None
        else:
            mat = np.asarray(density, dtype=complex)
            if mat.shape != (basis.size, basis.size):
                raise DimensionError("density shape does not match basis size")
            if validate:
                if np.max(np.abs(mat - mat.conj().T)) > ATOL_STATE:
                    raise ValueError("density operator is not Hermitian")
                tr = np.trace(mat).real
                if abs(tr - 1.0) > ATOL_STATE:
                    raise ValueError(f"density trace {tr} deviates from 1")
                if np.min(np.linalg.eigvalsh(mat)) < EIG_FLOOR:
                    raise ValueError("density operator has a negative eigenvalue")
            self.amplitudes = None
            self._density = mat

    @classmethod
    def pure(cls, basis, amplitudes, validate=True):
        return cls(basis, amplitudes=amplitudes, validate=validate)

    @classmethod
    def from_density(cls, basis, matrix, validate=True):
        return cls(basis, density=matrix, validate=validate)

    @classmethod
    def basis_state(cls, basis, occupation):
        vec = np.zeros(basis.size, dtype=complex)
        vec[basis.index_of(occupation)] = 1.0
        return cls(basis, amplitudes=vec, validate=False)

    @property
    def is_pure(self):
        return self.amplitudes is not None

    @property
    def dim(self):
        return self.basis.size

    def density(self):
        """Density-matrix form (outer product for pure states)."""
        if self._density is not None:
            return self._density
        return np.outer(self.amplitudes, self.amplitudes.conj())


# ---------------------------------------------------------------------------
# permanents and unitary lifting

def _permanents(batch):
    """Permanents of a (..., n, n) batch by Ryser's inclusion-exclusion.

    per(A) = (-1)^n sum_{S != 0} (-1)^{|S|} prod_i sum_{j in S} A_ij
    """
    batch = np.asarray(batch)
    n = batch.shape[-1]
    if n == 0:
        return np.ones(batch.shape[:-2], dtype=batch.dtype)
    total = np.zeros(batch.shape[:-2], dtype=batch.dtype)
    for mask in range(1, 1 << n):
        cols = [j for j in range(n) if mask >> j & 1]
        colsum = batch[..., cols].sum(axis=-1)
        total += (-1) ** len(cols) * colsum.prod(axis=-1)
    return total * (-1) ** n


def permanent(matrix):
    """Permanent of one square matrix."""
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError("permanent needs a square matrix")
    return complex(_permanents(matrix))


def _repetition_indices(occs):
    """Mode index repeated by its occupation, per basis state: (d, p)."""
    return np.array(
        [[m for m, n in enumerate(occ) for _ in range(n)] for occ in occs],
        dtype=int,
    )


def _sqrt_factorials(occs):
    return np.array(
        [math.sqrt(math.prod(math.factorial(n) for n in occ)) for occ in occs]
    )


def _lift_sector(u, occs):
    """Lift an m x m mode unitary onto one fixed-photon-number sector.

    <out|U_F|in> = per(U[out|in]) / sqrt(prod out_i! prod in_j!), where
    U[out|in] repeats row i out_i times and column j in_j times.
    """
    p = sum(occs[0])
    d = len(occs)
    if p == 0:
        return np.ones((1, 1), dtype=complex)
    reps = _repetition_indices(occs)
    norms = _sqrt_factorials(occs)
    sub = u[reps[:, None, :, None], reps[None, :, None, :]]  # (d, d, p, p)
    per = _permanents(sub)
    return per / np.outer(norms, norms)


def lift_unitary(u, basis):
    """Lift a mode unitary to the Fock space over `basis`.

    For a mixed-sector basis the lift is block diagonal over photon
    number (a passive unitary conserves total photon number).
    """
    if isinstance(u, ModeUnitary):
        u = u.matrix
    u = np.asarray(u, dtype=complex)
    if u.shape != (basis.modes, basis.modes):
        raise DimensionError(
            f"mode matrix is {u.shape}, basis has {basis.modes} modes"
        )
    if basis.fixed_total:
        return _lift_sector(u, basis.states)
    out = np.zeros((basis.size, basis.size), dtype=complex)
    for p in range(basis.photons + 1):
        idx = np.flatnonzero(basis.totals == p)
        occs = [basis.states[i] for i in idx]
        out[np.ix_(idx, idx)] = _lift_sector(u, occs)
    return out


def apply(state, lifted):
    """Evolve a state by a lifted unitary: U|psi> or U rho U^dagger."""
    lifted = np.asarray(lifted)
    if lifted.shape != (state.dim, state.dim):
        raise DimensionError("lifted unitary does not match state dimension")
    if state.is_pure:
        return QuantumState.pure(state.basis, lifted @ state.amplitudes,
                                 validate=False)
    rho = lifted @ state.density() @ lifted.conj().T
    return QuantumState.from_density(state.basis, rho, validate=False)


# ---------------------------------------------------------------------------
# reduction and scalar functionals

def partial_trace(state, keep_modes):
    """Trace out all modes except `keep_modes`.

    The reduced state lives on the 0..p sector union of the kept modes,
    since the discarded modes may carry any share of the photons.
    """
    basis = state.basis
    keep = tuple(sorted(keep_modes))
    if len(keep) == 0:
        raise ValueError("keep_modes must be non-empty")
    if len(set(keep)) != len(keep) or any(m < 0 or m >= basis.modes for m in keep):
        raise ValueError("keep_modes must be distinct valid mode indices")
    if len(keep) == basis.modes:
        raise ValueError("keep_modes must be a proper subset of the modes")
    env = tuple(m for m in range(basis.modes) if m not in keep)

    reduced = enumerate_basis_upto(len(keep), basis.photons)
    rho = state.density()
    out = np.zeros((reduced.size, reduced.size), dtype=complex)

    groups = {}
    for i, occ in enumerate(basis.states):
        kocc = tuple(occ[m] for m in keep)
        eocc = tuple(occ[m] for m in env)
        groups.setdefault(eocc, []).append((i, reduced.index_of(kocc)))
    for pairs in groups.values():
        idx = [i for i, _ in pairs]
        ridx = [r for _, r in pairs]
        out[np.ix_(ridx, ridx)] += rho[np.ix_(idx, idx)]
    return QuantumState.from_density(reduced, out, validate=False)


def purity(rho):
    """Tr(rho^2)."""
    rho = rho.density() if isinstance(rho, QuantumState) else np.asarray(rho)
    return float(np.einsum("ij,ji->", rho, rho).real)


def _psd_sqrt(mat):
    evals, evecs = np.linalg.eigh(mat)
    evals = np.clip(evals, 0.0, None)
    return (evecs * np.sqrt(evals)) @ evecs.conj().T


def fidelity(rho, sigma):
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    rho = rho.density() if isinstance(rho, QuantumState) else np.asarray(rho)
    sigma = sigma.density() if isinstance(sigma, QuantumState) else np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise DimensionError("fidelity needs equal-dimension operators")
    sr = _psd_sqrt(rho)
    middle = sr @ sigma @ sr
    evals = np.linalg.eigvalsh((middle + middle.conj().T) / 2.0)
    root = np.sqrt(np.clip(evals, 0.0, None)).sum()
    return float(min(root * root, 1.0))


def fock_probabilities(state):
    """Diagonal of the density operator: photon-counting distribution."""
    if state.is_pure:
        probs = np.abs(state.amplitudes) ** 2
    else:
        probs = state.density().diagonal().real
    return np.clip(probs, 0.0, None)


def number_expectations(state):
    """Per-mode photon-number expectation values."""
    probs = fock_probabilities(state)
    return probs @ state.basis.occupation_matrix()


def total_photon_expectation(state):
    return float(number_expectations(state).sum())


def sample_counts(probs, shots, seed):
    """Multinomial photon-counting samples; deterministic given seed."""
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0):
        raise ValueError("probabilities must be non-negative")
    total = probs.sum()
    if abs(total - 1.0) > 1e-8:
        raise ValueError(f"probabilities sum to {total}, expected 1")
    if shots <= 0:
        raise ValueError("shots must be positive")
    rng = np.random.default_rng(seed)
    return rng.multinomial(shots, probs / total)
