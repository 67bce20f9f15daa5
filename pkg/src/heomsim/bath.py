"""Spectral densities, bath correlation functions, and exponential expansions.

Units follow the usual open-system convention hbar = k_B = 1, so frequencies
and temperatures are interchangeable energy scales.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate, special

__all__ = [
    "BathError",
    "QuadratureError",
    "DegenerateParameterError",
    "LorentzSpectrum",
    "OhmicDrudeSpectrum",
    "SpectralDensity",
    "BathExpansion",
    "coth",
    "evaluate_spectral_density",
    "noise_power",
    "noise_power_limit",
    "correlation_quadrature",
    "correlation_with_error",
    "expand_lorentz_zero_temperature",
    "expand_matsubara",
    "matsubara_count_auto",
    "expansion_error",
    "frequency_cutoff",
]

# Below this argument coth switches to its Laurent series to avoid 0/0 noise.
_COTH_SERIES_CUTOFF = 1e-4


class BathError(Exception):
    """Base class for bath construction and evaluation failures."""


class QuadratureError(BathError):
    """Adaptive quadrature did not reach its requested accuracy."""

    def __init__(self, message: str, estimate: float):
        super().__init__(f"{message} (error estimate {estimate:.3e})")
        self.estimate = estimate


class DegenerateParameterError(BathError):
    """Parameter combination sits on a pole of the expansion coefficients."""


def coth(x):
    """Hyperbolic cotangent with the series 1/x + x/3 below |x| = 1e-4."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    small = np.abs(arr) < _COTH_SERIES_CUTOFF
    with np.errstate(divide="ignore"):
        out[small] = 1.0 / arr[small] + arr[small] / 3.0
    out[~small] = 1.0 / np.tanh(arr[~small])
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class LorentzSpectrum:
    """Lorentzian spectral density centred on a single bath mode.

    density(omega) = coupling * width / pi / ((omega - center)^2 + width^2)

    The spectral weight is treated as living on the whole frequency axis,
    which is what makes the zero-temperature correlation function a single
    decaying exponential.
    """

    coupling: float
    width: float
    center: float

    def __post_init__(self):
        if self.coupling <= 0 or self.width <= 0 or self.center <= 0:
            raise ValueError("Lorentz parameters must be positive")

    def density(self, omega):
        omega = np.asarray(omega, dtype=float)
        return self.coupling * self.width / np.pi / (
            (omega - self.center) ** 2 + self.width**2
        )


@dataclass(frozen=True)
class OhmicDrudeSpectrum:
    """Ohmic spectral density with a Drude-Lorentz cutoff.

    density(omega) = 2 * coupling * cutoff * omega / (pi * (omega^2 + cutoff^2))
    """

    coupling: float
    cutoff: float

    def __post_init__(self):
        if self.coupling <= 0 or self.cutoff <= 0:
            raise ValueError("Ohmic-Drude parameters must be positive")

    def density(self, omega):
        omega = np.asarray(omega, dtype=float)
        return (
            2.0
            * self.coupling
            * self.cutoff
            * omega
            / (np.pi * (omega**2 + self.cutoff**2))
        )

    def slope_at_zero(self) -> float:
        return 2.0 * self.coupling / (np.pi * self.cutoff)


SpectralDensity = Union[LorentzSpectrum, OhmicDrudeSpectrum]


def evaluate_spectral_density(sd: SpectralDensity, omega):
    """Spectral density at non-negative frequencies."""
    arr = np.asarray(omega, dtype=float)
    if np.any(arr < 0):
        raise ValueError("spectral density is defined for omega >= 0")
    return sd.density(omega)


def _x_coth_x(x):
    """x * coth(x), finite through x = 0."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    small = np.abs(arr) < _COTH_SERIES_CUTOFF
    out[small] = 1.0 + arr[small] ** 2 / 3.0
    out[~small] = arr[~small] / np.tanh(arr[~small])
    return float(out[0]) if scalar else out


def noise_power(sd: SpectralDensity, temperature: float, omega):
    """Symmetrised noise weight J(omega) * coth(omega / 2T); coth -> 1 at T = 0.

    Evaluated through the smooth form (J(omega)/omega) * omega*coth(omega/2T)
    so the Ohmic-Drude case stays finite down to omega = 0.
    """
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    arr = np.asarray(omega, dtype=float)
    if temperature == 0.0:
        return sd.density(arr)
    if isinstance(sd, OhmicDrudeSpectrum):
        envelope = (
            2.0 * sd.coupling * sd.cutoff / (np.pi * (arr**2 + sd.cutoff**2))
        )
        return envelope * 2.0 * temperature * _x_coth_x(arr / (2.0 * temperature))
    raise BathError("Lorentz noise power is supported at zero temperature only")


def noise_power_limit(sd: SpectralDensity, temperature: float) -> float:
    """Zero-frequency limit of J(omega) * coth(omega / 2T)."""
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if isinstance(sd, OhmicDrudeSpectrum):
        if temperature == 0.0:
            return 0.0
        return 2.0 * temperature * sd.slope_at_zero()
    if temperature == 0.0:
        return float(sd.density(0.0))
    raise BathError("Lorentz noise power diverges at zero frequency for T > 0")


def frequency_cutoff(sd: SpectralDensity, temperature: float) -> float:
    """Upper integration limit used by the correlation quadratures."""
    if isinstance(sd, OhmicDrudeSpectrum):
        return 50.0 * max(sd.cutoff, temperature)
    return sd.center + 2000.0 * sd.width


def _oscillatory_quad(func, lo, hi, t, kind):
    """Integral of func(w) * cos(w t) or * sin(w t) on [lo, hi]."""
    if t == 0.0:
        if kind == "sin":
            return 0.0, 0.0
        value, err = integrate.quad(func, lo, hi, limit=400, full_output=1)[:2]
        return value, err
    value, err = integrate.quad(
        func, lo, hi, weight=kind, wvar=t, limit=800, full_output=1
    )[:2]
    return value, err


def _inverse_square_cos_tail(hi: float, t: float) -> float:
    """Closed form of the integral of cos(w t) / w^2 over [hi, infinity)."""
    if t == 0.0:
        return 1.0 / hi
    si, _ = special.sici(hi * t)
    return math.cos(hi * t) / hi - t * (math.pi / 2.0 - si)


def correlation_with_error(
    sd: SpectralDensity, temperature: float, t: float
) -> tuple[complex, float]:
    """Bath correlation C(t) by adaptive quadrature, with an error estimate.

    The real part integrates J(omega) coth(omega/2T) cos(omega t) and the
    imaginary part -J(omega) sin(omega t).  Ohmic-Drude baths integrate over
    [0, frequency_cutoff]; at t = 0 the real part is the cutoff-regularised
    value (the untruncated integral grows logarithmically with the cutoff).
    Lorentz baths are zero-temperature only and carry their spectral weight
    on the whole axis, so the result tends to the single-exponential form
    coupling * exp(-(width + 1j*center) * t).  The estimate combines the
    quadrature error with a bound on the discarded tail.
    """
    if t < 0:
        raise ValueError("correlation time must be non-negative")
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if isinstance(sd, LorentzSpectrum):
        if temperature != 0.0:
            raise BathError("Lorentz baths are supported at zero temperature only")
        # Shift to u = omega - center: the envelope becomes even in u, so
        # C(t) = exp(-1j*center*t) * 2 * integral_0^inf envelope(u) cos(u t) du
        # with envelope(u) = coupling*width/pi / (u^2 + width^2).
        lam, gam = sd.coupling, sd.width

        def envelope(u):
            return lam * gam / np.pi / (u**2 + gam**2)

        hi = 2000.0 * gam
        part, err = _oscillatory_quad(envelope, 0.0, hi, t, "cos")
        tail = (lam * gam / np.pi) * _inverse_square_cos_tail(hi, t)
        radial = 2.0 * (part + tail)
        value = radial * complex(math.cos(sd.center * t), -math.sin(sd.center * t))
        estimate = 2.0 * err + lam * gam**3 / hi**3
        if 2.0 * err > 1e-6 * lam + 1e-9:
            raise QuadratureError("correlation quadrature did not converge", err)
        return value, estimate
    hi = frequency_cutoff(sd, temperature)

    def weighted(omega):
        return float(noise_power(sd, temperature, omega))

    real, err_r = _oscillatory_quad(weighted, 0.0, hi, t, "cos")
    imag, err_i = _oscillatory_quad(sd.density, 0.0, hi, t, "sin")
    # Beyond the cutoff both integrands are 2*eta*omega_c/(pi*omega) to
    # exponentially good accuracy (coth has saturated), so the oscillatory
    # tails reduce to cosine/sine integrals.
    drude_amp = 2.0 * sd.coupling * sd.cutoff / np.pi
    if t > 0.0:
        si, ci = special.sici(hi * t)
        real += drude_amp * (-ci)
        imag += drude_amp * (math.pi / 2.0 - si)
        tail = drude_amp * sd.cutoff**2 / hi**2
    else:
        tail = 0.0
    value = complex(real, -imag)
    estimate = err_r + err_i + tail
    scale = sd.coupling * max(sd.cutoff, 2.0 * temperature)
    if err_r + err_i > 1e-4 * scale + 1e-8:
        raise QuadratureError("correlation quadrature did not converge", err_r + err_i)
    return value, estimate


def correlation_quadrature(sd: SpectralDensity, temperature: float, t: float) -> complex:
    """Bath correlation C(t); see correlation_with_error for conventions."""
    value, _ = correlation_with_error(sd, temperature, t)
    return value


@dataclass(frozen=True)
class BathExpansion:
    """Correlation function as a finite sum of decaying exponentials.

    reconstruct(t) = sum_k amplitude_k * exp(-rate_k * t); every rate must
    have a positive real part so the reconstruction decays.
    """

    terms: tuple[tuple[complex, complex], ...]
    temperature: float
    provenance: str

    def __post_init__(self):
        if not self.terms:
            raise ValueError("expansion needs at least one term")
        for _, rate in self.terms:
            if complex(rate).real <= 0:
                raise ValueError("expansion rates must have positive real part")

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([a for a, _ in self.terms], dtype=complex)

    @property
    def rates(self) -> np.ndarray:
        return np.array([r for _, r in self.terms], dtype=complex)

    def reconstruct(self, t):
        t = np.asarray(t, dtype=float)
        return np.sum(
            self.amplitudes[:, None] * np.exp(-np.outer(self.rates, t)), axis=0
        ).reshape(t.shape) if t.ndim else complex(
            np.sum(self.amplitudes * np.exp(-self.rates * float(t)))
        )


def expand_lorentz_zero_temperature(sd: SpectralDensity, temperature: float = 0.0):
    """Exact single-exponential expansion of the zero-temperature Lorentz bath."""
    if not isinstance(sd, LorentzSpectrum):
        raise BathError("exact single-mode expansion requires a Lorentz bath")
    if temperature != 0.0:
        raise BathError("the single-mode expansion is exact only at T = 0")
    term = (complex(sd.coupling), complex(sd.width, sd.center))
    return BathExpansion(terms=(term,), temperature=0.0, provenance="exact")


def _matsubara_frequency(k: int, temperature: float) -> float:
    # k = 2 is the first Matsubara pole, 2*pi*T.
    return 2.0 * (k - 1) * math.pi * temperature


def _check_matsubara_resonance(sd: OhmicDrudeSpectrum, temperature: float):
    step = 2.0 * math.pi * temperature
    nearest = round(sd.cutoff / step)
    if nearest >= 1 and abs(sd.cutoff - nearest * step) < 1e-9 * max(sd.cutoff, step):
        raise DegenerateParameterError(
            "cutoff coincides with a Matsubara frequency; expansion poles diverge"
        )


def expand_matsubara(
    sd: SpectralDensity, temperature: float, k_max: int
) -> BathExpansion:
    """Truncated Matsubara expansion of the finite-temperature Ohmic-Drude bath.

    Term 1 is the Drude pole with amplitude eta*omega_c*(cot(omega_c/2T) - 1j)
    and rate omega_c; terms k >= 2 carry the Matsubara poles at
    2*(k-1)*pi*T with real amplitudes 4*eta*omega_c*T*nu_k/(nu_k^2 - omega_c^2).
    """
    if not isinstance(sd, OhmicDrudeSpectrum):
        raise BathError("Matsubara expansion requires an Ohmic-Drude bath")
    if temperature <= 0:
        raise BathError("Matsubara expansion requires positive temperature")
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    _check_matsubara_resonance(sd, temperature)
    eta, omega_c = sd.coupling, sd.cutoff
    x = omega_c / (2.0 * temperature)
    terms = [
        (
            complex(eta * omega_c / math.tan(x), -eta * omega_c),
            complex(omega_c),
        )
    ]
    for k in range(2, k_max + 1):
        nu = _matsubara_frequency(k, temperature)
        amp = 4.0 * eta * omega_c * temperature * nu / (nu**2 - omega_c**2)
        terms.append((complex(amp), complex(nu)))
    return BathExpansion(
        terms=tuple(terms),
        temperature=temperature,
        provenance=f"truncated-matsubara-{k_max}",
    )


def matsubara_count_auto(
    sd: OhmicDrudeSpectrum,
    temperature: float,
    *,
    weight_tol: float = 0.025,
    k_cap: int = 64,
) -> int:
    """Smallest term count whose dropped Matsubara tail is negligible.

    Each exponential contributes |amplitude|/Re(rate) of zero-frequency
    weight, which is what a Markovian closure of the dropped terms would
    see.  The count stops once the discarded tail holds at most weight_tol
    of the total weight, referenced against a long fixed tail sum.
    """
    if not isinstance(sd, OhmicDrudeSpectrum):
        raise BathError("automatic Matsubara count requires an Ohmic-Drude bath")
    if temperature <= 0:
        raise BathError("automatic Matsubara count requires positive temperature")
    _check_matsubara_resonance(sd, temperature)
    k_ref = max(4 * k_cap, 4096)
    ks = np.arange(2, k_ref + 1)
    nus = 2.0 * (ks - 1) * math.pi * temperature
    weights = np.abs(
        4.0 * sd.coupling * sd.cutoff * temperature / (nus**2 - sd.cutoff**2)
    )
    x = sd.cutoff / (2.0 * temperature)
    drude_weight = abs(complex(1.0 / math.tan(x), -1.0)) * sd.coupling
    total = drude_weight + float(weights.sum())
    tail = np.concatenate([np.cumsum(weights[::-1])[::-1], [0.0]])
    # tail[j] is the weight dropped by keeping k_max = j + 1 terms
    for k_max in range(1, k_cap + 1):
        if tail[k_max - 1] <= weight_tol * total:
            return k_max
    return k_cap


def expansion_error(
    expansion: BathExpansion,
    sd: SpectralDensity,
    temperature: float,
    t_grid,
) -> float:
    """Max deviation between expansion reconstruction and quadrature on a grid."""
    grid = np.asarray(t_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("t_grid must be non-empty")
    if np.any(grid < 0):
        raise ValueError("t_grid must be non-negative")
    worst = 0.0
    for t in grid:
        exact = correlation_quadrature(sd, temperature, float(t))
        approx = expansion.reconstruct(float(t))
        worst = max(worst, abs(exact - approx))
    return worst
