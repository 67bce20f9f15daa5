"""System definitions and the closed-form pure-dephasing reference.

Two workhorse setups: a single qubit coupled through its energy basis,
for which the coherence decay can be written as a frequency integral and
used as an oracle, and a pair of exchange-coupled qubits where only the
second one touches the bath.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .bath import (
    LorentzSpectrum,
    OhmicDrudeSpectrum,
    frequency_cutoff,
    noise_power,
)

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)

_EXPECTATION_IMAG_TOL = 1e-8


def plus_projector() -> np.ndarray:
    """Projector on the +1 eigenstate of sigma_x."""
    return 0.5 * np.array([[1.0, 1.0], [1.0, 1.0]], dtype=complex)


def expectation(operator, rho) -> float:
    """Real expectation value, guarding against a non-real trace."""
    value = complex(np.trace(np.asarray(operator) @ np.asarray(rho)))
    if abs(value.imag) > _EXPECTATION_IMAG_TOL * max(1.0, abs(value)):
        raise ValueError(
            "expectation value has imaginary part %.3e; state or operator "
            "is not consistent" % value.imag
        )
    return value.real


@dataclass(frozen=True)
class ModelSpec:
    """Closed-system part of a scenario plus what to record."""

    label: str
    hamiltonian: np.ndarray
    coupling: np.ndarray
    initial_state: np.ndarray
    observable: np.ndarray

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def recorder(self):
        op = self.observable

        def observe(rho):
            return expectation(op, rho)

        return observe


def dephasing_model(qubit_frequency: float = 1.0) -> ModelSpec:
    """Qubit coupled through sigma_z, prepared along x.

    The coupling commutes with the Hamiltonian, so populations freeze
    and the transverse spin decays by pure dephasing.
    """
    return ModelSpec(
        label="dephasing",
        hamiltonian=0.5 * qubit_frequency * SIGMA_Z,
        coupling=SIGMA_Z.copy(),
        initial_state=plus_projector(),
        observable=SIGMA_X.copy(),
    )


def two_qubit_model(
    qubit_frequency: float = 1.0, exchange_coupling: float = 0.1
) -> ModelSpec:
    """Exchange-coupled qubit pair with the bath attached to qubit B.

    Qubit A is probed through its transverse spin; it feels the bath
    only via the exchange term, which is what makes its coherence decay
    sensitive to the bath temperature in a nontrivial way.
    """
    hamiltonian = 0.5 * qubit_frequency * (
        np.kron(SIGMA_Z, IDENTITY2) + np.kron(IDENTITY2, SIGMA_Z)
    ) + exchange_coupling * np.kron(SIGMA_X, SIGMA_X)
    return ModelSpec(
        label="two-qubit",
        hamiltonian=hamiltonian,
        coupling=np.kron(IDENTITY2, SIGMA_X),
        initial_state=np.kron(plus_projector(), plus_projector()),
        observable=np.kron(SIGMA_X, IDENTITY2),
    )


def _one_minus_cos_over_square(omega, t):
    """(1 - cos(omega t)) / omega**2, finite through omega = 0."""
    x = omega * t
    if abs(x) < 1e-4:
        return t * t * (0.5 - x * x / 24.0)
    return (1.0 - np.cos(x)) / (omega * omega)


def _dephasing_exponent_drude(sd, temperature, t):
    split = min(1.0, 0.1 * frequency_cutoff(sd, temperature))
    hi = frequency_cutoff(sd, temperature)

    def weight(omega):
        return float(noise_power(sd, temperature, omega))

    near, _ = quad(
        lambda w: weight(w) * _one_minus_cos_over_square(w, t),
        0.0,
        split,
        limit=400,
    )
    flat, _ = quad(lambda w: weight(w) / w**2, split, hi, limit=400)
    osc, _ = quad(
        lambda w: weight(w) / w**2,
        split,
        hi,
        weight="cos",
        wvar=t,
        limit=800,
    )
    # large-frequency behaviour is 2*eta*omega_c/(pi*omega**3)
    tail = sd.coupling * sd.cutoff / (np.pi * hi * hi)
    return 4.0 * (near + flat - osc + tail)


def _dephasing_exponent_lorentz(sd, t):
    amp = sd.coupling * sd.width / np.pi
    split = 0.5 * max(sd.width, min(sd.center, 1.0))
    hi = abs(sd.center) + 2000.0 * sd.width

    def density_full_line(omega):
        return amp / ((omega - sd.center) ** 2 + sd.width**2)

    near, _ = quad(
        lambda w: density_full_line(w) * _one_minus_cos_over_square(w, t),
        -split,
        split,
        limit=400,
    )
    total = near
    for sign in (1.0, -1.0):

        def envelope(u, s=sign):
            return amp / ((s * u - sd.center) ** 2 + sd.width**2)

        flat, _ = quad(lambda u: envelope(u) / u**2, split, hi, limit=400)
        osc, _ = quad(
            lambda u: envelope(u) / u**2,
            split,
            hi,
            weight="cos",
            wvar=t,
            limit=800,
        )
        total += flat - osc
    return 4.0 * total


def dephasing_decay_exponent(sd, temperature: float, t: float) -> float:
    """Integrated decoherence exponent of the pure-dephasing qubit.

    Equals 4 * integral of noise power times (1 - cos(omega t))/omega**2
    over the support of the spectral density.
    """
    if t < 0.0:
        raise ValueError("time must be nonnegative")
    if t == 0.0:
        return 0.0
    if isinstance(sd, OhmicDrudeSpectrum):
        return _dephasing_exponent_drude(sd, temperature, t)
    if isinstance(sd, LorentzSpectrum):
        if temperature != 0.0:
            raise ValueError("narrow-line bath reference requires T = 0")
        return _dephasing_exponent_lorentz(sd, t)
    raise TypeError("unsupported spectral density %r" % (sd,))


def dephasing_oracle(sd, temperature, qubit_frequency, times) -> np.ndarray:
    """Exact transverse-spin signal cos(w t) * exp(-exponent(t)).

    Valid because the coupling operator commutes with the Hamiltonian,
    making the interaction-picture phase a Gaussian variable.
    """
    times = np.asarray(times, dtype=float)
    decay = np.array(
        [dephasing_decay_exponent(sd, temperature, float(t)) for t in times]
    )
    return np.cos(qubit_frequency * times) * np.exp(-decay)
