"""Detuning noise traces and slow decoherence models.

The detuning delta(t) seen by the spin combines a slow drift, modeled as a
stationary Ornstein-Uhlenbeck process, with deterministic mains pickup
(50 Hz and harmonics) and a DC offset.  Spontaneous decay of the probe
level is treated as a pure contrast loss exp(-T/lifetime).

The OU parameters are placeholders: with active field compensation running,
the residual drift spectrum depends on the apparatus and should be set per
setup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sample grid: t_k = t0 + k*dt, k = 0..count-1."""

    t0: float
    dt: float
    count: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.count < 1:
            raise ValueError("count must be >= 1")

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.count)

    @property
    def duration(self) -> float:
        return self.dt * (self.count - 1)


@dataclass(frozen=True, eq=False)
class NoiseTrace:
    """Sampled detuning delta(t_k) in rad/s on a uniform grid."""

    grid: TimeGrid
    samples: np.ndarray
    descriptor: str = ""
    seed: object = None

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.shape != (self.grid.count,):
            raise ValueError("samples must match the grid length")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def values_at(self, t) -> np.ndarray:
        """Nearest-sample lookup (no interpolation; step << tau_c in all
        supported regimes)."""
        idx = np.rint((np.asarray(t, dtype=float) - self.grid.t0) / self.grid.dt)
        idx = np.clip(idx.astype(int), 0, self.grid.count - 1)
        return self.samples[idx]

    def __add__(self, other: "NoiseTrace") -> "NoiseTrace":
        if not isinstance(other, NoiseTrace):
            return NotImplemented
        if self.grid != other.grid:
            raise ValueError("cannot add traces on different grids")
        descriptor = "+".join(d for d in (self.descriptor, other.descriptor) if d)
        return NoiseTrace(self.grid, self.samples + other.samples, descriptor)


@dataclass(frozen=True)
class NoiseModel:
    """Drift + mains model of the detuning.

    ou_sigma: stationary standard deviation of the drift, rad/s.
    ou_tau_c: drift correlation time, s.
    line_harmonics: (frequency_hz, amplitude_rad_s, phase_rad) triples.
    dc_offset: constant detuning, rad/s.
    """

    ou_sigma: float = 0.0
    ou_tau_c: float = 1.0
    line_harmonics: tuple[tuple[float, float, float], ...] = ()
    dc_offset: float = 0.0

    def __post_init__(self):
        if not self.ou_tau_c > 0:
            raise ValueError("ou_tau_c must be > 0")
        if self.ou_sigma < 0:
            raise ValueError("ou_sigma must be >= 0")
        harmonics = tuple((float(f), float(a), float(p))
                          for f, a, p in self.line_harmonics)
        for freq, amp, _ in harmonics:
            if freq <= 0:
                raise ValueError("line frequencies must be > 0")
            if amp < 0:
                raise ValueError("line amplitudes must be >= 0")
        object.__setattr__(self, "line_harmonics", harmonics)

    @property
    def is_quiet(self) -> bool:
        return (self.ou_sigma == 0.0 and not self.line_harmonics
                and self.dc_offset == 0.0)


def mains_harmonics(amplitudes_rad_s, base_hz: float = 50.0,
                    phases=None) -> tuple[tuple[float, float, float], ...]:
    """Harmonic triples at multiples of the mains frequency (50 Hz default)."""
    amplitudes = list(amplitudes_rad_s)
    if phases is None:
        phases = [0.0] * len(amplitudes)
    return tuple((base_hz * (k + 1), float(a), float(p))
                 for k, (a, p) in enumerate(zip(amplitudes, phases)))


def sample_ou_trace(model: NoiseModel, grid: TimeGrid, seed) -> NoiseTrace:
    """Stationary OU drift around dc_offset, by exact discretization:

        x_{k+1} = x_k e^(-dt/tau) + sigma sqrt(1 - e^(-2 dt/tau)) xi_k

    with x_0 ~ N(0, sigma^2).  Identical (seed, grid, model) always gives
    the identical trace.
    """
    rng = np.random.default_rng(seed)
    rho = math.exp(-grid.dt / model.ou_tau_c)
    noise_scale = model.ou_sigma * math.sqrt(1.0 - rho * rho)
    x = np.empty(grid.count)
    x[0] = model.ou_sigma * rng.standard_normal()
    if grid.count > 1:
        xi = rng.standard_normal(grid.count - 1)
        for k in range(grid.count - 1):
            x[k + 1] = x[k] * rho + noise_scale * xi[k]
    return NoiseTrace(grid, x + model.dc_offset, descriptor="ou", seed=seed)


def ac_line_trace(model: NoiseModel, grid: TimeGrid) -> NoiseTrace:
    """Deterministic mains pickup: dc_offset + sum of a*sin(2 pi f t + p)."""
    t = grid.times()
    delta = np.full(grid.count, model.dc_offset)
    for freq, amp, phase in model.line_harmonics:
        delta += amp * np.sin(2.0 * math.pi * freq * t + phase)
    return NoiseTrace(grid, delta, descriptor="line")


def delta_trace(model: NoiseModel, grid: TimeGrid, seed) -> NoiseTrace:
    """Full detuning trace: zero-mean OU drift + mains + one dc_offset."""
    rng = np.random.default_rng(seed)
    rho = math.exp(-grid.dt / model.ou_tau_c)
    noise_scale = model.ou_sigma * math.sqrt(1.0 - rho * rho)
    x = np.zeros(grid.count)
    if model.ou_sigma > 0:
        x[0] = model.ou_sigma * rng.standard_normal()
        xi = rng.standard_normal(grid.count - 1)
        for k in range(grid.count - 1):
            x[k + 1] = x[k] * rho + noise_scale * xi[k]
    t = grid.times()
    for freq, amp, phase in model.line_harmonics:
        x += amp * np.sin(2.0 * math.pi * freq * t + phase)
    return NoiseTrace(grid, x + model.dc_offset, descriptor="ou+line", seed=seed)


def decay_survival(t: float, lifetime: float) -> float:
    """Survival fraction exp(-t/lifetime); multiplies the fringe contrast."""
    if not lifetime > 0:
        raise ValueError("lifetime must be > 0")
    if t < 0:
        raise ValueError("t must be >= 0")
    return math.exp(-t / lifetime)


@dataclass(frozen=True)
class StaticKappaBudget:
    """Static contributions to the quadratic shift coefficient, rad/s.

    The quadrupole and second-order Zeeman parts are tuning knobs that
    place the working point; the tensor term is the signal."""

    quadrupole: float = 0.0
    second_order_zeeman: float = 0.0
    tensor_term: float = 0.0

    @property
    def total(self) -> float:
        return self.quadrupole + self.second_order_zeeman + self.tensor_term


def static_kappa(budget: StaticKappaBudget) -> float:
    return budget.total


def write_trace(out: IO[str], trace: NoiseTrace) -> None:
    """Two-column export: t_s, delta_rad_per_s."""
    if trace.descriptor:
        out.write(f"# descriptor = {trace.descriptor}\n")
    out.write("t_s,delta_rad_per_s\n")
    for t, d in zip(trace.grid.times(), trace.samples):
        out.write(f"{t:.17g},{d:.17g}\n")


def read_trace(path) -> NoiseTrace:
    times = []
    values = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith("t_s"):
                continue
            t_text, d_text = line.split(",")
            times.append(float(t_text))
            values.append(float(d_text))
    if len(times) < 2:
        raise ValueError("trace file must contain at least two samples")
    dt = times[1] - times[0]
    grid = TimeGrid(times[0], dt, len(times))
    if not np.allclose(grid.times(), times, rtol=0, atol=1e-9 * abs(dt)):
        raise ValueError("trace file must be uniformly sampled")
    return NoiseTrace(grid, np.array(values))
