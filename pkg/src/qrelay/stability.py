"""Interferometer path-length drift and the pulse-rate-tracking stabilizer.

The split-delay analyzers only erase which-path information while their
arm imbalance matches the laser pulse spacing, so two slow processes
erode the dip: thermal expansion of the imbalance fiber and wander of the
laser repetition rate (which moves the spacing itself).  In the lab both
ride the same temperature, which is why a single feedforward from the
measured repetition rate, at an empirically fitted micrometers-per-hertz
gain, can cancel the sum.  The model here makes that explicit: the
default temperature-to-rate coupling is chosen so the quoted gain is
exactly the right one for the simulated plant.

simulate() produces the time series needed to reproduce both behaviours:
free-running drift walking off the dip within hours and the stabilized
trace pinned at the dip floor for a day.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.constants import c as _SPEED_OF_LIGHT

from .errors import ConfigError

DRIFT_KINDS = ("sinusoid", "random-walk")

# empirical feedforward gain, micrometers of delay per hertz of rate shift
DEFAULT_GAIN_UM_PER_HZ = 0.07


def pulse_spacing(rep_rate_hz: float, group_index: float = 1.468) -> float:
    """In-fiber distance between successive pulses, in meters."""
    if rep_rate_hz <= 0:
        raise ConfigError("rep_rate_hz must be > 0")
    if group_index < 1.0:
        raise ConfigError("group_index must be >= 1")
    return _SPEED_OF_LIGHT / (group_index * rep_rate_hz)


def rep_rate_length_shift(
    delta_f_hz: float,
    rep_rate_hz: float = 75e6,
    spacing_m: Optional[float] = None,
) -> float:
    """Arm-length correction (meters) that keeps one pulse spacing of
    imbalance when the repetition rate moves by delta_f_hz."""
    if spacing_m is None:
        spacing_m = pulse_spacing(rep_rate_hz)
    return spacing_m * delta_f_hz / rep_rate_hz


@dataclass(frozen=True)
class DriftModel:
    """Slow environmental drift acting on one analyzer's arm imbalance.

    The lab temperature process (sinusoid or bounded random walk) drives
    both the fiber length directly (thermal_um_per_k) and the laser
    repetition rate (temp_to_rate_hz_per_k); a fast clipped
    Ornstein-Uhlenbeck term models uncorrelated spool jitter.  When the
    rate coupling is left unset it is derived so that the default
    feedforward gain cancels the combined drift exactly.
    """

    kind: str = "sinusoid"
    amplitude_k: float = 1.0
    period_h: float = 48.0
    thermal_um_per_k: float = 100.0
    temp_to_rate_hz_per_k: Optional[float] = None
    rep_wander_bound_hz_per_h: float = 400.0
    jitter_sigma_um: float = 3.0
    jitter_tau_s: float = 600.0
    jitter_bound_um: float = 10.0
    rep_rate_hz: float = 75e6
    group_index: float = 1.468

    def __post_init__(self):
        if self.kind not in DRIFT_KINDS:
            raise ConfigError(f"kind must be one of {DRIFT_KINDS}")
        if self.amplitude_k < 0:
            raise ConfigError("amplitude_k must be >= 0")
        if self.period_h <= 0:
            raise ConfigError("period_h must be > 0")
        if self.thermal_um_per_k < 0:
            raise ConfigError("thermal_um_per_k must be >= 0")
        if self.rep_wander_bound_hz_per_h < 0:
            raise ConfigError("rep_wander_bound_hz_per_h must be >= 0")
        if self.jitter_sigma_um < 0 or self.jitter_bound_um < 0:
            raise ConfigError("jitter parameters must be >= 0")
        if self.jitter_tau_s <= 0:
            raise ConfigError("jitter_tau_s must be > 0")
        if self.rep_rate_hz <= 0:
            raise ConfigError("rep_rate_hz must be > 0")
        if self.temp_to_rate_hz_per_k is not None and self.temp_to_rate_hz_per_k < 0:
            raise ConfigError("temp_to_rate_hz_per_k must be >= 0")

    def spacing_m(self) -> float:
        return pulse_spacing(self.rep_rate_hz, self.group_index)

    def rate_length_um_per_hz(self) -> float:
        """Micrometers of arm mismatch per hertz of repetition-rate shift."""
        return self.spacing_m() * 1e6 / self.rep_rate_hz

    def rate_coupling_hz_per_k(self) -> float:
        if self.temp_to_rate_hz_per_k is not None:
            return self.temp_to_rate_hz_per_k
        # chosen so the default gain cancels thermal and rate drift together:
        # gain * kappa = thermal + (spacing/f0) * kappa
        denom = DEFAULT_GAIN_UM_PER_HZ - self.rate_length_um_per_hz()
        if denom <= 0:
            raise ConfigError(
                "default gain does not exceed the rate-length coefficient; "
                "set temp_to_rate_hz_per_k explicitly"
            )
        return self.thermal_um_per_k / denom

    def mismatch_um_per_k(self) -> float:
        """Total arm-mismatch response to temperature, both channels."""
        return (
            self.thermal_um_per_k
            + self.rate_length_um_per_hz() * self.rate_coupling_hz_per_k()
        )

    def ideal_gain_um_per_hz(self) -> float:
        """Feedforward gain that exactly cancels the temperature drift."""
        return self.mismatch_um_per_k() / self.rate_coupling_hz_per_k()


@dataclass(frozen=True)
class Controller:
    """Feedforward motor driven by the measured repetition-rate shift."""

    gain_um_per_hz: float = DEFAULT_GAIN_UM_PER_HZ
    motor_resolution_um: float = 0.2
    update_interval_s: float = 60.0

    def __post_init__(self):
        if self.gain_um_per_hz < 0:
            raise ConfigError("gain_um_per_hz must be >= 0")
        if self.motor_resolution_um < 0:
            raise ConfigError("motor_resolution_um must be >= 0")
        if self.update_interval_s <= 0:
            raise ConfigError("update_interval_s must be > 0")


@dataclass(frozen=True)
class StabilityTrace:
    """Time series from one drift run; all arrays share one length."""

    time_s: np.ndarray
    delta_x_um: np.ndarray
    rep_rate_hz: np.ndarray
    motor_um: np.ndarray
    norm_coincidences: np.ndarray


def _temperature_series(drift: DriftModel, times: np.ndarray, rng) -> np.ndarray:
    if drift.kind == "sinusoid":
        period_s = drift.period_h * 3600.0
        return drift.amplitude_k * np.sin(2.0 * math.pi * times / period_s)
    # bounded random walk: per-step temperature increments are capped so the
    # implied rate wander never exceeds the hourly bound
    kappa = drift.rate_coupling_hz_per_k()
    theta = np.empty(len(times))
    theta[0] = 0.0
    for i in range(1, len(times)):
        dt_h = (times[i] - times[i - 1]) / 3600.0
        max_step = drift.rep_wander_bound_hz_per_h * dt_h / kappa
        theta[i] = theta[i - 1] + rng.uniform(-max_step, max_step)
    return theta


def _jitter_series(drift: DriftModel, times: np.ndarray, rng) -> np.ndarray:
    out = np.zeros(len(times))
    if drift.jitter_sigma_um == 0.0:
        return out
    x = 0.0
    for i in range(1, len(times)):
        dt = times[i] - times[i - 1]
        decay = math.exp(-dt / drift.jitter_tau_s)
        x = x * decay + rng.normal(0.0, drift.jitter_sigma_um * math.sqrt(1.0 - decay * decay))
        x = min(max(x, -drift.jitter_bound_um), drift.jitter_bound_um)
        out[i] = x
    return out


def simulate(
    drift: DriftModel,
    controller: Optional[Controller] = None,
    duration_s: float = 24 * 3600.0,
    dt_s: float = 60.0,
    seed: int = 0,
    dip_visibility: float = 1.0 / 3.0,
    fwhm_um: float = 144.0,
) -> StabilityTrace:
    """Drift, optional stabilization, and the normalized coincidence level.

    Coincidences are normalized to the far-from-overlap level, so the trace
    sits at 1 - dip_visibility while the mismatch is held at zero and climbs
    toward one as drift pulls the analyzers apart.
    """
    if duration_s <= 0 or dt_s <= 0:
        raise ConfigError("duration_s and dt_s must be > 0")
    if not 0.0 <= dip_visibility <= 1.0:
        raise ConfigError("dip_visibility must be in [0, 1]")
    if fwhm_um <= 0:
        raise ConfigError("fwhm_um must be > 0")
    n = int(round(duration_s / dt_s)) + 1
    times = np.arange(n) * dt_s
    rng_walk = np.random.Generator(np.random.Philox(key=[seed, 0]))
    rng_jitter = np.random.Generator(np.random.Philox(key=[seed, 1]))

    theta = _temperature_series(drift, times, rng_walk)
    delta_f = drift.rate_coupling_hz_per_k() * theta
    jitter = _jitter_series(drift, times, rng_jitter)
    drift_um = (
        drift.thermal_um_per_k * theta
        + drift.rate_length_um_per_hz() * delta_f
        + jitter
    )

    motor = np.zeros(n)
    if controller is not None:
        steps_per_update = max(1, int(round(controller.update_interval_s / dt_s)))
        held = 0.0
        for i in range(n):
            if i % steps_per_update == 0:
                target = controller.gain_um_per_hz * delta_f[i]
                if controller.motor_resolution_um > 0:
                    target = controller.motor_resolution_um * round(
                        target / controller.motor_resolution_um
                    )
                held = target
            motor[i] = held

    delta_x = drift_um - motor
    ell = fwhm_um / math.sqrt(2.0 * math.log(2.0))
    xi_sq = np.exp(-2.0 * (delta_x / ell) ** 2)
    norm = 1.0 - dip_visibility * xi_sq
    return StabilityTrace(times, delta_x, drift.rep_rate_hz + delta_f, motor, norm)


@dataclass(frozen=True)
class FeasibilityReport:
    """Whether stabilizing on the coincidence rate itself could work."""

    integration_time_s: float
    drift_time_s: float
    feasible: bool
    resolve_um: float
    count_rate_per_s: float
    sigmas: float


def pid_alternative_analysis(
    drift: DriftModel,
    count_rate_per_s: float,
    resolve_um: Optional[float] = None,
    sigmas: float = 3.0,
    dip_visibility: float = 1.0 / 3.0,
    fwhm_um: float = 144.0,
) -> FeasibilityReport:
    """Compare the integration time needed to see a mismatch step against
    how fast the drift moves by that step.

    A counting feedback loop must resolve the rate change produced by a
    mismatch of resolve_um at the dip bottom before the drift has moved
    that far; otherwise the error signal is stale and the loop hunts.
    """
    if count_rate_per_s <= 0:
        raise ConfigError("count_rate_per_s must be > 0")
    if resolve_um is None:
        resolve_um = min(10.0, fwhm_um / 4.0)
    ell = fwhm_um / math.sqrt(2.0 * math.log(2.0))
    delta_n = dip_visibility * (1.0 - math.exp(-2.0 * (resolve_um / ell) ** 2))
    floor = 1.0 - dip_visibility
    integration = sigmas**2 * floor / (count_rate_per_s * delta_n**2)

    if drift.kind == "sinusoid":
        rate_k_per_s = (
            drift.amplitude_k * 2.0 * math.pi / (drift.period_h * 3600.0)
        )
    else:
        rate_k_per_s = (
            drift.rep_wander_bound_hz_per_h
            / drift.rate_coupling_hz_per_k()
            / 3600.0
        )
    speed_um_per_s = drift.mismatch_um_per_k() * rate_k_per_s
    drift_time = math.inf if speed_um_per_s == 0 else resolve_um / speed_um_per_s
    return FeasibilityReport(
        integration, drift_time, integration <= drift_time, resolve_um,
        count_rate_per_s, sigmas,
    )
