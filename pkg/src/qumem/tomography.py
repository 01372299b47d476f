"""Output-state tomography for the dual-rail memristor.

The kept rails are analysed by a tunable coupler (reflectivity and
relative phase) followed by photon counting.  Detection on the kept
rails cannot see the no-photon population, so that corner of the 3x3
density matrix is estimated separately from the feedback-port rate and
the matrix is rescaled to unit trace after insertion.

The lower 2x2 block is reconstructed from the per-setting click counts
by maximum likelihood over a Cholesky-parameterised positive block.

On the fabricated device the surviving qubit's coherence carries an
extra phase: the through arm of the splitter contributes asin(sqrt(R))
and the unequal rail lengths a fixed global offset (5.6 rad on the
characterised chip), so the model phase is
arg rho[1,2] = asin(sqrt(R)) + pi - phi_global.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .fock import coupler, fidelity, purity
from .memristor import QubitInput, output_state_dual_rail

PHI_GLOBAL = 5.6  # rad, fitted rail-length phase offset of the device

_EPS = 1e-12


@dataclass(frozen=True)
class TomographySetting:
    """Analysis coupler setting applied to the two kept rails."""

    reflectivity: float
    phase: float = 0.0
    name: str = ""

    def __post_init__(self):
        if not 0.0 <= self.reflectivity <= 1.0:
            raise ValueError("reflectivity must lie in [0, 1]")

    def unitary(self):
        return coupler(self.reflectivity, self.phase)


def default_settings():
    """Informationally complete set for the one-photon 2x2 block:
    bare detection plus balanced interference at three relative phases."""
    return (
        TomographySetting(0.0, 0.0, "identity"),
        TomographySetting(0.5, 0.0, "balanced"),
        TomographySetting(0.5, math.pi / 2, "phase+"),
        TomographySetting(0.5, -math.pi / 2, "phase-"),
    )


def coherence_phase(reflectivity, phi_global=PHI_GLOBAL):
    """Model phase of the kept-qubit coherence (rho[1,2])."""
    return math.asin(math.sqrt(reflectivity)) + math.pi - phi_global


def apply_phase_model(rho, reflectivity, phi_global=PHI_GLOBAL):
    """Attach the device phase to the coherence of a 3x3 output state."""
    out = np.array(rho, dtype=complex)
    factor = np.exp(1j * coherence_phase(reflectivity, phi_global))
    out[1, 2] = abs(out[1, 2]) * factor
    out[2, 1] = np.conj(out[1, 2])
    return out


@dataclass(frozen=True)
class Fixture:
    beta2: float
    reflectivity: float
    rho: np.ndarray


def table_fixtures(phi_global=PHI_GLOBAL):
    """The 16-point characterisation grid: |beta|^2 in {0, 0.3, 0.7, 1}
    crossed with R in {0, 0.3, 0.5, 0.7, 1} on the measured combinations,
    as phased 3x3 theory matrices."""
    grid = [
        (0.0, 0.0),
        (0.3, 0.0), (0.3, 0.3), (0.3, 0.5), (0.3, 0.7), (0.3, 1.0),
        (0.7, 0.0), (0.7, 0.3), (0.7, 0.5), (0.7, 0.7), (0.7, 1.0),
        (1.0, 0.0), (1.0, 0.3), (1.0, 0.5), (1.0, 0.7), (1.0, 1.0),
    ]
    fixtures = []
    for beta2, refl in grid:
        rho = output_state_dual_rail(QubitInput.from_beta2(beta2), refl)
        rho = apply_phase_model(rho, refl, phi_global)
        fixtures.append(Fixture(beta2, refl, rho))
    return fixtures


def _complex_matrix(entries):
    return np.array([[complex(re, im) for re, im in row] for row in entries])


def project_physical(rho):
    """Nearest physical state: clip negative eigenvalues, renormalise.

    Two-decimal rounding (or finite counts) can leave a reconstructed
    matrix slightly indefinite; this restores positivity before any
    fidelity or purity is quoted.
    """
    rho = np.asarray(rho, dtype=complex)
    evals, evecs = np.linalg.eigh((rho + rho.conj().T) / 2.0)
    evals = np.clip(evals, 0.0, None)
    out = (evecs * evals) @ evecs.conj().T
    return out / np.trace(out).real


def reference_table():
    """Bundled reference data for the characterisation grid: rounded
    theory and reconstructed matrices plus fidelity/purity columns."""
    text = (resources.files("qumem") / "data" /
            "tomography_fixtures.json").read_text()
    raw = json.loads(text)
    rows = []
    for row in raw["rows"]:
        rows.append(
            {
                "beta2": row["beta2"],
                "reflectivity": row["reflectivity"],
                "rho_theory": _complex_matrix(row["rho_theory"]),
                "rho_reconstructed": _complex_matrix(row["rho_reconstructed"]),
                "fidelity": row["fidelity"],
                "purity_theory": row["purity_theory"],
                "purity_reconstructed": row["purity_reconstructed"],
            }
        )
    return rows


# ---------------------------------------------------------------------------
# forward model and counts

def _block(rho):
    """Lower 2x2 one-photon block of a 3x3 output state."""
    return np.array(rho, dtype=complex)[1:, 1:]


def _setting_conditionals(block, setting):
    """Click distribution over the two kept rails, conditioned on the
    photon having survived (the block need not be normalised).
    Returns None when the block carries no population: no photon ever
    reaches the kept rails, so there are no clicks to distribute."""
    v = setting.unitary()
    rotated = v @ block @ v.conj().T
    p = np.clip(np.real(np.diag(rotated)), 0.0, None)
    total = p.sum()
    if total <= _EPS:
        return None
    return p / total


def simulate_counts(rho_true, settings=None, shots=None, seed=None):
    """Per-setting click counts on the kept rails.

    shots=None is the infinite-statistics (exact) mode and returns the
    conditional probabilities as float rows; otherwise each row is a
    multinomial draw of `shots` detected photons.
    """
    settings = default_settings() if settings is None else tuple(settings)
    if not settings:
        raise ValueError("at least one analysis setting is required")
    block = _block(rho_true)
    rows = []
    rng = np.random.default_rng(seed)
    for setting in settings:
        cond = _setting_conditionals(block, setting)
        if cond is None:
            rows.append(np.zeros(2))  # photon never survives: no clicks
        elif shots is None:
            rows.append(cond)
        else:
            rows.append(rng.multinomial(int(shots), cond).astype(float))
    return np.array(rows)


# ---------------------------------------------------------------------------
# maximum-likelihood reconstruction

def _cholesky_block(params):
    """Positive unit-trace 2x2 block from 4 real parameters."""
    t00, t10r, t10i, t11 = params
    t = np.array([[t00, 0.0], [t10r + 1j * t10i, t11]], dtype=complex)
    sigma = t @ t.conj().T
    tr = np.trace(sigma).real
    if tr <= 0:
        raise FloatingPointError("degenerate Cholesky factor")
    return sigma / tr


def _log_likelihood(params, counts, settings):
    sigma = _cholesky_block(params)
    ll = 0.0
    for row, setting in zip(counts, settings):
        cond = _setting_conditionals(sigma, setting)
        for n, q in zip(row, cond):
            if n > 0:
                ll += n * math.log(max(q, _EPS))
    return ll


def _linear_inversion(counts, settings):
    """Moment-based initial block estimate from the click frequencies."""
    freqs = {}
    for row, setting in zip(counts, settings):
        total = row.sum()
        freqs[setting.name or (setting.reflectivity, setting.phase)] = (
            row[0] / total if total > 0 else 0.5
        )
    a = freqs.get("identity", 0.5)
    im = freqs.get("balanced", 0.5) - 0.5
    re = freqs.get("phase-", 0.5) - 0.5
    block = np.array([[a, re + 1j * im], [re - 1j * im, 1.0 - a]],
                     dtype=complex)
    evals, evecs = np.linalg.eigh(block)
    evals = np.clip(evals, 1e-6, None)
    block = (evecs * evals) @ evecs.conj().T
    return block / np.trace(block).real


def _cholesky_params(block):
    chol = np.linalg.cholesky(block + 1e-9 * np.eye(2))
    return np.array(
        [chol[0, 0].real, chol[1, 0].real, chol[1, 0].imag, chol[1, 1].real]
    )


@dataclass
class ReconstructionReport:
    """MLE tomography result for one (input, reflectivity) point."""

    rho: np.ndarray
    fidelity_to_theory: float = None
    purity: float = None
    phi_global: float = None
    meta: dict = field(default_factory=dict)


def mle_reconstruct(counts, p00_estimate, settings=None,
                    rel_tol=1e-9, max_iter=2000):
    """Maximum-likelihood 3x3 reconstruction.

    Maximises the multinomial likelihood of the kept-rail counts over
    Cholesky-parameterised positive 2x2 blocks (gradient ascent with
    backtracking, stopping at relative likelihood change rel_tol), then
    installs the separately measured no-photon population p00 and
    rescales to unit trace.
    """
    counts = np.asarray(counts, dtype=float)
    settings = default_settings() if settings is None else tuple(settings)
    if counts.shape != (len(settings), 2):
        raise ValueError("counts must be (n_settings, 2)")
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    if counts.sum() <= 0:
        raise ValueError("all-zero counts carry no information")
    if not 0.0 <= p00_estimate <= 1.0:
        raise ValueError("p00_estimate must lie in [0, 1]")

    params = _cholesky_params(_linear_inversion(counts, settings))
    ll = _log_likelihood(params, counts, settings)
    step = 0.1
    h = 1e-6
    iterations = 0
    for iterations in range(1, max_iter + 1):
        grad = np.zeros(4)
        for i in range(4):
            up = params.copy()
            dn = params.copy()
            up[i] += h
            dn[i] -= h
            grad[i] = (
                _log_likelihood(up, counts, settings)
                - _log_likelihood(dn, counts, settings)
            ) / (2 * h)
        gnorm = np.linalg.norm(grad)
        if gnorm == 0:
            break
        improved = False
        while step > 1e-14:
            cand = params + step * grad / gnorm
            cand_ll = _log_likelihood(cand, counts, settings)
            if cand_ll > ll:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        rel_change = abs(cand_ll - ll) / max(abs(ll), 1.0)
        params, ll = cand, cand_ll
        step *= 1.5
        if rel_change < rel_tol:
            break

    block = _cholesky_block(params)
    rho = np.zeros((3, 3), dtype=complex)
    rho[0, 0] = p00_estimate
    rho[1:, 1:] = (1.0 - p00_estimate) * block
    rho /= np.trace(rho).real
    return ReconstructionReport(
        rho=rho,
        purity=purity(rho),
        meta={"log_likelihood": ll, "iterations": iterations},
    )


def reconstruction_roundtrip(beta2, reflectivity, shots=None, seed=None,
                             settings=None, phi_global=PHI_GLOBAL):
    """Generate counts from the phased theory state and reconstruct it.

    In exact mode p00 is taken from the state; with finite shots it is
    estimated from a binomial draw of the feedback-port rate.
    """
    rho_true = apply_phase_model(
        output_state_dual_rail(QubitInput.from_beta2(beta2), reflectivity),
        reflectivity, phi_global,
    )
    rng = np.random.default_rng(seed)
    counts = simulate_counts(
        rho_true, settings, shots,
        seed=None if seed is None else rng.integers(2**32),
    )
    p00 = rho_true[0, 0].real
    if shots is not None:
        p00 = rng.binomial(int(shots), p00) / float(shots)
    if counts.sum() == 0:
        # the photon always crossed to the feedback port: the kept-rail
        # block is unobservable and carries weight 1 - p00 ~ 0
        rho = np.diag([p00, (1 - p00) / 2, (1 - p00) / 2]).astype(complex)
        rho /= np.trace(rho).real
        report = ReconstructionReport(rho=rho, purity=purity(rho),
                                      meta={"degenerate": True})
    else:
        report = mle_reconstruct(counts, p00, settings)
    report.fidelity_to_theory = fidelity(report.rho, rho_true)
    report.meta.update(
        beta2=beta2, reflectivity=reflectivity,
        shots=shots, seed=seed, phi_global=phi_global,
    )
    return report


def fit_global_phase(off_diag_samples):
    """Least-squares global phase from (reflectivity, coherence) pairs.

    Inverts arg z = asin(sqrt(R)) + pi - phi_global by a magnitude-
    weighted circular mean.  Samples with (numerically) zero coherence
    carry no phase information; if none remain the fit is undefined.
    """
    acc = 0.0 + 0.0j
    usable = 0
    for reflectivity, z in off_diag_samples:
        z = complex(z)
        if abs(z) < 1e-12:
            continue
        usable += 1
        expected = math.asin(math.sqrt(reflectivity)) + math.pi
        acc += abs(z) * np.exp(1j * (expected - np.angle(z)))
    if usable < 2:
        raise ValueError("need at least two samples with nonzero coherence")
    return float(np.angle(acc) % (2 * math.pi))
