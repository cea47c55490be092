"""Closed-loop frequency-domain analysis of derivative feedback cooling.

Derivative (velocity-proportional) feedback multiplies the intrinsic damping
without adding thermal force, so the effective susceptibility is the open
loop one with gamma_m replaced by (1+g) gamma_m. The price is that readout
imprecision is fed back as a real force; balancing the two yields an optimal
gain and a floor on the reachable effective temperature.

Variance integrals run over omega in [omega0/10, 10 omega0] with adaptive
quadrature seeded at omega0 +- k gamma_eff; the resonance is far too narrow
for any uniform grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from .constants import KB
from .errors import DomainError, NumericalError
from .resonator import MechanicalResonator
from .spectrum import KIND_ASD, SpectrumRecord

TWO_PI = 2.0 * math.pi

INTEGRAL_RTOL = 1.0e-6
BAND_DECADES = (0.1, 10.0)  # integration band, multiples of omega0


def derivative_feedback(res: MechanicalResonator, g: float, omega):
    """Derivative feedback transfer i m g gamma_m(omega) omega, N/m."""
    if g < 0.0:
        raise DomainError("g must be >= 0")
    omega = np.asarray(omega, dtype=float)
    return 1j * res.mass * g * res.damping_rate(omega) * omega


def effective_susceptibility(res: MechanicalResonator, g: float, omega):
    """Closed-loop susceptibility with effective damping (1+g) gamma_m, m/N.

    Algebraically identical to chi_m / (1 + chi_m chi_fb) with the
    derivative feedback above.
    """
    if g < 0.0:
        raise DomainError("g must be >= 0")
    omega = np.asarray(omega, dtype=float)
    gm = res.damping_rate(omega)
    return 1.0 / (res.mass * (res.omega0 ** 2 - omega ** 2
                              + 1j * (1.0 + g) * gm * omega))


def _psd_lookup(value, what: str):
    """Normalize a flat PSD value or SpectrumRecord into a callable of omega."""
    if value is None:
        return lambda omega: np.zeros_like(np.asarray(omega, dtype=float))
    if isinstance(value, SpectrumRecord):
        rec = value.to_psd() if value.kind == KIND_ASD else value
        return lambda omega: rec.interp(omega)
    value = float(value)
    if value < 0.0:
        raise DomainError(f"{what} must be >= 0")
    return lambda omega: np.full_like(np.asarray(omega, dtype=float), value)


@dataclass(frozen=True)
class CoolingSetup:
    """Inputs of a closed-loop variance calculation.

    res                : mechanical resonator
    gain               : unitless feedback gain g >= 0
    imprecision_psd    : readout imprecision S_xx^n, m^2/Hz (flat or record)
    external_force_psd : optional external force PSD S_FF^ext, N^2/Hz
    """

    res: MechanicalResonator
    gain: float
    imprecision_psd: float | SpectrumRecord
    external_force_psd: float | SpectrumRecord | None = None

    def __post_init__(self):
        if self.gain < 0.0:
            raise DomainError("gain must be >= 0")
        if self.imprecision_psd is None:
            raise DomainError("imprecision_psd is required")

    def imprecision_at(self, omega):
        return _psd_lookup(self.imprecision_psd, "imprecision_psd")(omega)

    def external_at(self, omega):
        return _psd_lookup(self.external_force_psd, "external_force_psd")(omega)


@dataclass(frozen=True)
class CoolingResult:
    """Closed-loop displacement variance and its decomposition.

    variance    : total <x^2>, m^2
    thermal     : thermal contribution, m^2
    feedthrough : imprecision fed back as force, m^2
    external    : external-force contribution, m^2
    t_eff       : m omega0^2 variance / kB, K
    t_n         : noise temperature of the imprecision, K
    """

    variance: float
    thermal: float
    feedthrough: float
    external: float
    t_eff: float
    t_n: float


@dataclass(frozen=True)
class ClosedLoopVariance:
    """Both routes to the closed-loop variance.

    ``numeric`` integrates the closed-loop PSD and is authoritative
    downstream; ``analytic`` is the high-Q, g >> 1 approximation reported
    alongside it.
    """

    numeric: CoolingResult
    analytic: CoolingResult


def closed_loop_psd(setup: CoolingSetup, omega):
    """Closed-loop displacement PSD S_xx(omega), m^2/Hz."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0.0):
        raise DomainError("omega must be > 0")
    chi2 = np.abs(effective_susceptibility(setup.res, setup.gain, omega)) ** 2
    fb2 = np.abs(derivative_feedback(setup.res, setup.gain, omega)) ** 2
    return chi2 * (setup.res.thermal_force_psd(omega)
                   + setup.external_at(omega)
                   + fb2 * setup.imprecision_at(omega))


def _integrate_band(func, res, g, what: str) -> float:
    """Integrate func(omega)/(2 pi) over the analysis band around omega0."""
    lo = BAND_DECADES[0] * res.omega0
    hi = BAND_DECADES[1] * res.omega0
    gamma_eff = (1.0 + g) * float(res.damping_rate(res.omega0))
    points = res.omega0 + gamma_eff * np.arange(-10, 11)
    points = sorted(p for p in points if lo < p < hi)
    value, abserr, info, *tail = quad(
        func, lo, hi, points=points, limit=400, epsabs=0.0,
        epsrel=INTEGRAL_RTOL, full_output=1)
    if tail and abs(abserr) > 10.0 * INTEGRAL_RTOL * max(abs(value), 1e-300):
        raise NumericalError(
            f"{what} integral did not reach rtol {INTEGRAL_RTOL:g}: "
            f"value {value:.6g}, abserr {abserr:.3g}, message: {tail[0]}")
    return value / TWO_PI


def noise_temperature(res: MechanicalResonator, imprecision_psd) -> float:
    """Apparent temperature of the readout imprecision, K.

    T_n = m omega0^2 <x_n^2> / kB with <x_n^2> = gamma_m S_xx^n(omega0) / 4.
    """
    s_n = float(np.asarray(_psd_lookup(imprecision_psd, "imprecision_psd")(res.omega0)))
    if not s_n > 0.0:
        raise DomainError("imprecision PSD must be > 0 at omega0")
    gm = float(res.damping_rate(res.omega0))
    return res.mass * res.omega0 ** 2 * gm * s_n / (4.0 * KB)


def open_loop_thermal_variance(res: MechanicalResonator) -> float:
    """Equipartition displacement variance kB T / (m omega0^2), m^2."""
    return KB * res.temperature / (res.mass * res.omega0 ** 2)


def imprecision_variance(res: MechanicalResonator, imprecision_psd) -> float:
    """Apparent displacement variance of the readout, gamma_m S_n / 4, m^2."""
    s_n = float(np.asarray(_psd_lookup(imprecision_psd, "imprecision_psd")(res.omega0)))
    return float(res.damping_rate(res.omega0)) * s_n / 4.0


def closed_loop_variance(setup: CoolingSetup) -> ClosedLoopVariance:
    """Closed-loop variance by numeric band integration and analytic form.

    Analytic: <x^2> = <x_th,0^2>/(1+g) + g^2 <x_n^2>/(1+g) + <x_ext^2>(g)
    with <x_th,0^2> = kB T / m omega0^2 and <x_n^2> = gamma_m S_n(omega0)/4.
    The external term is integrated numerically in both routes.
    """
    res, g = setup.res, setup.gain

    def chi2(w):
        return abs(effective_susceptibility(res, g, w)) ** 2

    def fb2(w):
        return abs(derivative_feedback(res, g, w)) ** 2

    thermal_num = _integrate_band(
        lambda w: chi2(w) * float(res.thermal_force_psd(w)), res, g, "thermal")
    feed_num = _integrate_band(
        lambda w: chi2(w) * fb2(w) * float(setup.imprecision_at(w)), res, g,
        "feedthrough")
    if setup.external_force_psd is not None:
        ext = _integrate_band(
            lambda w: chi2(w) * float(setup.external_at(w)), res, g, "external")
    else:
        ext = 0.0

    s_n0 = float(np.asarray(setup.imprecision_at(res.omega0)))
    t_n = noise_temperature(res, setup.imprecision_psd) if s_n0 > 0.0 else 0.0
    scale = res.mass * res.omega0 ** 2 / KB

    total_num = thermal_num + feed_num + ext
    numeric = CoolingResult(total_num, thermal_num, feed_num, ext,
                            t_eff=scale * total_num, t_n=t_n)

    x_th0 = open_loop_thermal_variance(res)
    x_n2 = imprecision_variance(res, setup.imprecision_psd)
    thermal_an = x_th0 / (1.0 + g)
    feed_an = g ** 2 * x_n2 / (1.0 + g)
    total_an = thermal_an + feed_an + ext
    analytic = CoolingResult(total_an, thermal_an, feed_an, ext,
                             t_eff=scale * total_an, t_n=t_n)
    return ClosedLoopVariance(numeric=numeric, analytic=analytic)


class OptimalGain(NamedTuple):
    """Closed-form optimal gain and the numerically minimized cross-check."""

    closed_form: float
    minimized: float


def optimal_gain(res: MechanicalResonator, imprecision_psd) -> OptimalGain:
    """Gain minimizing the on-resonance displacement.

    Closed form sqrt(4 kB T / (m omega0^2 Gamma_m S_n)) with Gamma_m =
    gamma_m(omega0); the companion value minimizes the analytic closed-loop
    variance (thermal plus feedthrough) numerically.
    """
    if not res.temperature > 0.0:
        raise DomainError("temperature must be > 0")
    x_th0 = open_loop_thermal_variance(res)
    x_n2 = imprecision_variance(res, imprecision_psd)
    if not x_n2 > 0.0:
        raise DomainError("imprecision PSD must be > 0 at omega0")
    closed_form = math.sqrt(x_th0 / x_n2)

    def variance(g):
        return (x_th0 + g * g * x_n2) / (1.0 + g)

    hi = max(100.0 * closed_form, 10.0)
    fit = minimize_scalar(variance, bounds=(0.0, hi), method="bounded",
                          options={"xatol": max(closed_form, 1.0) * 1e-9})
    if not fit.success:
        raise NumericalError(f"gain minimization failed: {fit.message}")
    return OptimalGain(closed_form=closed_form, minimized=float(fit.x))


def effective_temperature(res: MechanicalResonator, g: float, t_n: float) -> float:
    """Effective test-mass temperature T/(1+g) + g^2 T_n/(1+g), K."""
    if g < 0.0:
        raise DomainError("g must be >= 0")
    if t_n < 0.0:
        raise DomainError("t_n must be >= 0")
    return (res.temperature + g ** 2 * t_n) / (1.0 + g)


def effective_temperature_floor(res: MechanicalResonator, t_n: float) -> float:
    """Lowest reachable effective temperature 2 sqrt(T T_n), K."""
    if t_n < 0.0:
        raise DomainError("t_n must be >= 0")
    return 2.0 * math.sqrt(res.temperature * t_n)
