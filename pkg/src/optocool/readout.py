"""Optical readout models: Fabry-Perot frequency readout and heterodyne
interferometer with its digital phasemeter.

The Fabry-Perot readout converts cavity length change into laser frequency
shift through nu = x * c / (wavelength * cavity_length); its dynamic range
is set by the laser tuning range and its capture range by wavelength/finesse.
The heterodyne interferometer is the long-range readout: apparent position
is true position plus an imprecision draw, with no range limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import C_LIGHT, G_STANDARD
from .errors import ConfigError, DomainError, RangeError
from .resonator import MechanicalResonator
from .spectrum import KIND_ASD, SpectrumRecord

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class FpiReadout:
    """Fabry-Perot frequency readout.

    cavity_length : mean cavity length, m
    wavelength    : mean laser wavelength, m
    tuning_range  : laser frequency tuning range, Hz
    finesse       : cavity finesse (only the capture range consumes it)
    readout_noise : frequency noise floor nu_n; flat value in Hz/rtHz,
                    a SpectrumRecord, or None for noiseless
    """

    cavity_length: float
    wavelength: float
    tuning_range: float
    finesse: float = 1000.0
    readout_noise: float | SpectrumRecord | None = None

    def __post_init__(self):
        if not self.cavity_length > 0.0:
            raise DomainError("cavity_length must be > 0")
        if not self.wavelength > 0.0:
            raise DomainError("wavelength must be > 0")
        if not self.tuning_range > 0.0:
            raise DomainError("tuning_range must be > 0")
        if not self.finesse > 1.0:
            raise DomainError("finesse must be > 1")
        if self.capture_range() >= self.dynamic_range():
            raise DomainError(
                "capture range wavelength/finesse must be below the dynamic range")

    @property
    def displacement_to_frequency(self) -> float:
        """c / (wavelength * cavity_length), Hz per m."""
        return C_LIGHT / (self.wavelength * self.cavity_length)

    def dynamic_range(self) -> float:
        """Largest trackable length change, wavelength*length*tuning/c, m."""
        return self.wavelength * self.cavity_length * self.tuning_range / C_LIGHT

    def capture_range(self) -> float:
        """Linear-regime displacement bound wavelength/finesse, m."""
        return self.wavelength / self.finesse

    def freq_from_displacement(self, x: float) -> float:
        """Laser frequency shift for displacement x, Hz."""
        if abs(x) >= self.dynamic_range():
            raise RangeError(
                f"|x| = {abs(x):.4g} m exceeds the dynamic range "
                f"{self.dynamic_range():.4g} m")
        return x * self.displacement_to_frequency

    def capture_check(self, rms_x: float) -> bool:
        """True iff rms motion is strictly inside the capture range."""
        if rms_x < 0.0:
            raise DomainError("rms_x must be >= 0")
        return rms_x < self.capture_range()

    def noise_asd(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        if self.readout_noise is None:
            return np.zeros_like(omega)
        if isinstance(self.readout_noise, SpectrumRecord):
            rec = self.readout_noise
            if rec.kind != KIND_ASD:
                rec = rec.to_asd()
            return rec.interp(omega)
        return np.full_like(omega, float(self.readout_noise))

    def output_spectrum(self, res: MechanicalResonator, g: float,
                        omega=None, external_accel: SpectrumRecord | None = None,
                        include_thermal: bool = True) -> SpectrumRecord:
        """ASD of the detected laser frequency, Hz/rtHz.

        External and thermal acceleration drive the mass through the
        (closed-loop, for g > 0) response; the readout noise passes straight
        through. Statistically independent terms combine as the root sum of
        squares. With g = 0 the response keeps the full frequency-dependent
        damping; with g > 0 the closed-loop denominator uses the
        viscous-equivalent (1+g) omega omega0 / Q damping term.
        """
        if g < 0.0:
            raise DomainError("g must be >= 0")
        if omega is None:
            omega = self._default_grid(external_accel)
        omega = np.asarray(omega, dtype=float)
        if np.any(omega <= 0.0):
            raise DomainError("omega must be > 0")

        if g == 0.0:
            denom = (res.omega0 ** 2 - omega ** 2
                     + 1j * res.damping_rate(omega) * omega)
        else:
            q = res.quality_factor()
            denom = (res.omega0 ** 2 - omega ** 2
                     + 1j * (1.0 + g) * omega * res.omega0 / q)
        accel_to_freq = self.displacement_to_frequency / np.abs(denom)

        psd = self.noise_asd(omega) ** 2
        if include_thermal:
            psd = psd + (accel_to_freq * res.thermal_accel_asd(omega)) ** 2
        if external_accel is not None:
            ext = external_accel
            if ext.kind != KIND_ASD:
                ext = ext.to_asd()
            psd = psd + (accel_to_freq * ext.interp(omega)) ** 2
        return SpectrumRecord(omega, np.sqrt(psd), KIND_ASD, "Hz/rtHz")

    def _default_grid(self, external_accel):
        grids = [rec.omega for rec in (external_accel,
                                       self.readout_noise
                                       if isinstance(self.readout_noise, SpectrumRecord)
                                       else None)
                 if rec is not None]
        if not grids:
            raise DomainError("no frequency grid given and no gridded inputs")
        lo = max(g[0] for g in grids)
        hi = min(g[-1] for g in grids)
        if lo >= hi:
            raise DomainError("input spectra have no overlapping band")
        base = grids[0]
        return base[(base >= lo) & (base <= hi)]

    def acceleration_equivalent(self, res: MechanicalResonator) -> dict:
        """Acceleration equivalent of the dynamic range, both readings.

        ``as_written`` evaluates dynamic_range * omega0 / sqrt(Q) (nominal
        units m/s); ``dimensional`` evaluates dynamic_range * omega0^2 /
        sqrt(Q) (m s^-2 / rtHz). Both are also quoted in units of standard
        gravity for comparison with noise budgets quoted in ng/rtHz.
        """
        q = res.quality_factor()
        dl = self.dynamic_range()
        as_written = dl * res.omega0 / math.sqrt(q)
        dimensional = dl * res.omega0 ** 2 / math.sqrt(q)
        return {
            "as_written": as_written,
            "as_written_g": as_written / G_STANDARD,
            "dimensional": dimensional,
            "dimensional_g": dimensional / G_STANDARD,
        }


@dataclass(frozen=True)
class HliReadout:
    """Heterodyne laser interferometer (long-range readout).

    wavelength           : m
    imprecision_asd      : displacement noise floor, m/rtHz (flat value or
                           a SpectrumRecord for a shaped measured floor)
    lpf_corner           : phasemeter low-pass corner, Hz
    heterodyne_frequency : beat note frequency, Hz
    """

    wavelength: float
    imprecision_asd: float | SpectrumRecord
    lpf_corner: float = 500.0
    heterodyne_frequency: float = 1.0e4

    def __post_init__(self):
        if not self.wavelength > 0.0:
            raise DomainError("wavelength must be > 0")
        if isinstance(self.imprecision_asd, SpectrumRecord):
            if np.any(self.imprecision_asd.values <= 0.0):
                raise DomainError("imprecision ASD must be > 0 everywhere")
        elif not self.imprecision_asd > 0.0:
            raise DomainError("imprecision ASD must be > 0")
        if not self.lpf_corner > 0.0:
            raise DomainError("lpf_corner must be > 0")
        if not self.heterodyne_frequency > 0.0:
            raise DomainError("heterodyne_frequency must be > 0")

    def sample(self, x: float, noise_draw: float) -> float:
        """Apparent position y = x + noise_draw, m; no range limit."""
        return x + noise_draw

    def imprecision_psd_at(self, omega) -> np.ndarray:
        """Imprecision PSD S_xx^n at omega, m^2/Hz."""
        omega = np.asarray(omega, dtype=float)
        if isinstance(self.imprecision_asd, SpectrumRecord):
            rec = self.imprecision_asd
            if rec.kind != KIND_ASD:
                rec = rec.to_asd()
            return rec.interp(omega) ** 2
        return np.full_like(omega, float(self.imprecision_asd) ** 2)


class Phasemeter:
    """Streaming I/Q phasemeter for a heterodyne beat note.

    Demodulates at the heterodyne frequency, low-passes I and Q with a
    first-order IIR (bilinear transform design), takes the four-quadrant
    angle and unwraps it across calls. One instance per stream; the filter
    state is not shareable.
    """

    def __init__(self, heterodyne_frequency: float, lpf_corner: float,
                 sample_rate: float, wavelength: float | None = None):
        if sample_rate <= 4.0 * heterodyne_frequency:
            raise ConfigError(
                f"sample_rate {sample_rate:g} Hz must exceed 4 x heterodyne "
                f"frequency ({4.0 * heterodyne_frequency:g} Hz)")
        if lpf_corner >= heterodyne_frequency / 2.0:
            raise ConfigError(
                f"lpf_corner {lpf_corner:g} Hz must be below half the "
                f"heterodyne frequency ({heterodyne_frequency / 2.0:g} Hz)")
        self.f_het = heterodyne_frequency
        self.sample_rate = sample_rate
        self.wavelength = wavelength
        # first-order low-pass via bilinear transform of wc/(s+wc)
        wc = TWO_PI * lpf_corner
        k = 2.0 * sample_rate
        self._b = wc / (k + wc)
        self._a1 = (wc - k) / (k + wc)
        self._zi = None  # filter states [I, Q]
        self._n = 0      # samples consumed
        self._last_phase = None

    def process(self, samples) -> np.ndarray:
        """Consume beat samples, return the unwrapped phase series, rad."""
        samples = np.asarray(samples, dtype=float)
        n = np.arange(self._n, self._n + samples.size)
        self._n += samples.size
        phase_lo = TWO_PI * self.f_het / self.sample_rate * n
        i_raw = 2.0 * samples * np.cos(phase_lo)
        q_raw = -2.0 * samples * np.sin(phase_lo)
        i_f, zi_i = _first_order_lowpass(i_raw, self._b, self._a1,
                                         None if self._zi is None else self._zi[0])
        q_f, zi_q = _first_order_lowpass(q_raw, self._b, self._a1,
                                         None if self._zi is None else self._zi[1])
        self._zi = (zi_i, zi_q)
        phase = np.arctan2(q_f, i_f)
        if self._last_phase is not None:
            phase = np.unwrap(np.concatenate(([self._last_phase], phase)))[1:]
        else:
            phase = np.unwrap(phase)
        self._last_phase = float(phase[-1])
        return phase

    def displacement(self, samples) -> np.ndarray:
        """Phase converted to displacement, phase * wavelength / 2 pi, m."""
        if self.wavelength is None:
            raise ConfigError("wavelength required for displacement output")
        return self.process(samples) * self.wavelength / TWO_PI


def _first_order_lowpass(x, b, a1, zi=None):
    # y[n] = b x[n] + b x[n-1] - a1 y[n-1], direct form I with carried state
    from scipy.signal import lfilter

    bcoef = np.array([b, b])
    acoef = np.array([1.0, a1])
    if zi is None:
        zi = np.zeros(1)
    y, zf = lfilter(bcoef, acoef, x, zi=zi)
    return y, zf


def phasemeter_extract(beat, sample_rate: float, heterodyne_frequency: float,
                       lpf_corner: float) -> np.ndarray:
    """One-shot phase extraction from a beat series, rad (unwrapped)."""
    pm = Phasemeter(heterodyne_frequency, lpf_corner, sample_rate)
    return pm.process(beat)


def phase_from_csv(path, heterodyne_frequency: float, lpf_corner: float):
    """Run the phasemeter on a raw ``t_s,value`` sample CSV.

    Returns (t, unwrapped phase in rad). The sample rate is taken from the
    first two timestamps; ``#`` comment lines are skipped.
    """
    import csv

    t, values = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#") or row[0] == "t_s":
                continue
            t.append(float(row[0]))
            values.append(float(row[1]))
    if len(t) < 2:
        raise ConfigError(f"{path}: need at least two samples")
    t = np.asarray(t)
    sample_rate = 1.0 / (t[1] - t[0])
    return t, phasemeter_extract(np.asarray(values), sample_rate,
                                 heterodyne_frequency, lpf_corner)
