"""Weak-coupling Markovian master equation used as a reference solver.

The bath enters only through two frequency-filtered copies of the
coupling operator: one weighted by the symmetrised noise power at each
transition gap, one by the bare spectral weight with the sign of the
gap.  Dispersive (Lamb-shift) contributions are dropped.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import (
    SpectralDensity,
    evaluate_spectral_density,
    noise_power,
    noise_power_limit,
)

__all__ = [
    "EigenDecomposition",
    "eigendecompose",
    "build_upsilon_xi",
    "bm_rhs",
    "MarkovianSystem",
]

_RECONSTRUCTION_TOL = 1e-10
_HERMITIAN_TOL = 1e-10

# Gaps below this count as degenerate and take the zero-frequency limit.
_GAP_TOL = 1e-9


@dataclass(frozen=True)
class EigenDecomposition:
    """System Hamiltonian eigendata with the coupling in the eigenbasis.

    eigenvalues are ascending; eigenvectors holds the orthonormal basis
    as columns; jump_matrix is the coupling operator transformed into
    that basis; gaps[r, rp] = eigenvalues[r] - eigenvalues[rp].
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    jump_matrix: np.ndarray
    gaps: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


def _require_hermitian(name, a):
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.conj().T).max() > _HERMITIAN_TOL * scale:
        raise ValueError("%s must be Hermitian" % name)


def eigendecompose(hamiltonian, coupling) -> EigenDecomposition:
    """Diagonalise the Hamiltonian and express the coupling in its basis."""
    h = np.asarray(hamiltonian, dtype=complex)
    f = np.asarray(coupling, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("hamiltonian must be a square matrix")
    if f.shape != h.shape:
        raise ValueError("coupling operator shape must match the hamiltonian")
    _require_hermitian("hamiltonian", h)
    _require_hermitian("coupling operator", f)
    energies, states = np.linalg.eigh(h)
    rebuilt = (states * energies) @ states.conj().T
    scale = max(1.0, float(np.abs(h).max()))
    if np.abs(rebuilt - h).max() > _RECONSTRUCTION_TOL * scale:
        raise ValueError("eigendecomposition failed to reconstruct the hamiltonian")
    return EigenDecomposition(
        eigenvalues=energies,
        eigenvectors=states,
        jump_matrix=states.conj().T @ f @ states,
        gaps=energies[:, None] - energies[None, :],
    )


def build_upsilon_xi(
    dec: EigenDecomposition,
    sd: SpectralDensity,
    temperature: float,
    gap_tol: float = _GAP_TOL,
):
    """Frequency-filtered coupling operators of the master equation.

    Each eigenbasis element of the coupling is weighted by half the
    symmetrised noise power at the transition gap (even in the gap) for
    the first operator, and by half the spectral density carrying the
    sign of the gap (odd, zero for degenerate pairs) for the second.
    Degenerate gaps take the zero-frequency limit.  The half prefactor
    is fixed by two closed-form checks: a two-level system relaxes at
    the golden-rule rate 2*pi*J(omega0), and pure dephasing decays at
    the exact long-time rate of the closed-form decoherence exponent.
    """
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    gaps = dec.gaps
    cut = gap_tol * max(1.0, float(np.abs(gaps).max()))
    small = np.abs(gaps) < cut
    magnitudes = np.where(small, 1.0, np.abs(gaps))

    even = np.where(
        small,
        noise_power_limit(sd, temperature),
        noise_power(sd, temperature, magnitudes),
    )
    odd = np.where(
        small,
        0.0,
        np.sign(gaps) * evaluate_spectral_density(sd, magnitudes),
    )

    states = dec.eigenvectors
    back = states.conj().T
    half_pi = 0.5 * np.pi
    upsilon = states @ (half_pi * even * dec.jump_matrix) @ back
    xi = states @ (half_pi * odd * dec.jump_matrix) @ back
    return upsilon, xi


def bm_rhs(rho, hamiltonian, coupling, upsilon, xi):
    """Time derivative of the density matrix.

    d rho / dt = -i[H, rho] - [f, [upsilon, rho]] + [f, {xi, rho}].
    All three terms are outer commutators with f or H, so the trace is
    conserved exactly.
    """
    rho = np.asarray(rho, dtype=complex)
    for name, op in (
        ("hamiltonian", hamiltonian),
        ("coupling", coupling),
        ("upsilon", upsilon),
        ("xi", xi),
    ):
        if np.shape(op) != rho.shape:
            raise ValueError("%s shape does not match the density matrix" % name)
    comm = upsilon @ rho - rho @ upsilon
    anti = xi @ rho + rho @ xi
    return (
        -1j * (hamiltonian @ rho - rho @ hamiltonian)
        - (coupling @ comm - comm @ coupling)
        + (coupling @ anti - anti @ coupling)
    )


class MarkovianSystem:
    """Master-equation generator exposed through the propagation protocol.

    States are plain density matrices; physical() is the identity.
    """

    def __init__(self, hamiltonian, coupling, sd: SpectralDensity, temperature: float):
        self.decomposition = eigendecompose(hamiltonian, coupling)
        self.hamiltonian = np.asarray(hamiltonian, dtype=complex)
        self.coupling = np.asarray(coupling, dtype=complex)
        self.spectral_density = sd
        self.temperature = temperature
        self.upsilon, self.xi = build_upsilon_xi(self.decomposition, sd, temperature)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def stiffness_bound(self) -> float:
        hnorm = float(np.linalg.norm(self.hamiltonian, 2))
        fnorm = float(np.linalg.norm(self.coupling, 2))
        kernels = float(
            np.linalg.norm(self.upsilon, 2) + np.linalg.norm(self.xi, 2)
        )
        # 4*|f|*(|upsilon|+|xi|) bounds the dissipator norm.
        return max(hnorm, 4.0 * fnorm * kernels)

    def initial_state(self, rho0) -> np.ndarray:
        rho = np.asarray(rho0, dtype=complex)
        if rho.shape != self.hamiltonian.shape:
            raise ValueError("initial density matrix has wrong shape")
        return rho.copy()

    def physical(self, state: np.ndarray) -> np.ndarray:
        return state

    def rhs(self, state: np.ndarray) -> np.ndarray:
        return bm_rhs(state, self.hamiltonian, self.coupling, self.upsilon, self.xi)
