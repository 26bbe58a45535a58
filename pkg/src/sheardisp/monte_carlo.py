"""Particle Monte Carlo for the channel advection-diffusion problem.

Stochastic characteristics of

    dX = Pe v(Y, xi(t)) dt + sqrt(2) dW_x,
    dY = sqrt(2) dW_y,   Y reflected at y = 0, 1 (or wrapped, periodic),

driven by a single shared OU path per realization -- the same path feeds
the forward solver, the backward point evaluator, and the analytic wind
model, so single-realization comparisons are meaningful.

Reflection is positional folding (y -> |y|, y -> 2 - y), which is exact
in distribution for the uniform invariant measure and adequate for
sqrt(2 dt) << 1.  xi is taken at step midpoints of the supplied path;
the path grid must coincide with the stepping grid, so no interpolation
bias enters.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ou_process import OUPath, realization_seed
from .eff_diffusivity import EigenData, FlowSpec


@dataclass(frozen=True)
class SimConfig:
    """Step size, ensemble sizes, seeding, and transport parameters."""

    dt: float = 1e-3
    n_particles: int = 10_000
    n_realizations: int = 1
    seed: int = 0
    bc: str = "no-flux"
    pe: float = 1.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_particles < 1 or self.n_realizations < 1:
            raise ValueError("particle and realization counts must be >= 1")
        if self.pe < 0:
            raise ValueError("Pe must be nonnegative")
        if self.bc not in ("no-flux", "periodic"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")


@dataclass(frozen=True)
class InitialData:
    """Initial scalar profile; all kinds are x-stratified (no y structure)."""

    kind: str
    s: Optional[float] = None            # gaussian variance
    a: Optional[float] = None            # random-wave wavenumber
    amplitude: Optional[complex] = None  # random-wave complex amplitude A
    alpha: Optional[float] = None        # spectral exponent
    cutoff: Optional[object] = None      # spectral cutoff profile

    @classmethod
    def delta_line(cls) -> "InitialData":
        return cls("delta-line")

    @classmethod
    def gaussian(cls, s: float) -> "InitialData":
        if s <= 0:
            raise ValueError("gaussian variance must be positive")
        return cls("gaussian", s=s)

    @classmethod
    def random_wave(cls, a: float, amplitude: complex) -> "InitialData":
        return cls("random-wave", a=a, amplitude=complex(amplitude))

    @classmethod
    def spectral(cls, alpha: float, cutoff) -> "InitialData":
        return cls("spectral", alpha=alpha, cutoff=cutoff)

    @property
    def mass(self) -> float:
        """Total streamwise integral; unit for the localized kinds."""
        if self.kind in ("delta-line", "gaussian"):
            return 1.0
        if self.kind == "random-wave":
            return 0.0
        raise ValueError(f"mass undefined for {self.kind} data")

    def sample_particles(self, n: int, rng: np.random.Generator):
        if self.kind == "delta-line":
            x = np.zeros(n)
        elif self.kind == "gaussian":
            x = rng.standard_normal(n) * math.sqrt(self.s)
        else:
            raise ValueError(f"{self.kind} data cannot be sampled as particles")
        y = rng.uniform(0.0, 1.0, n)
        return x, y

    def value(self, x, y=None):
        """Pointwise initial value T0(x, y); needed by the backward solver."""
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            return np.exp(-x * x / (2.0 * self.s)) / math.sqrt(2.0 * math.pi * self.s)
        if self.kind == "random-wave":
            return 2.0 * np.real(self.amplitude * np.exp(-1j * self.a * x))
        raise ValueError(f"{self.kind} data has no pointwise evaluation")


@dataclass
class ForwardResult:
    """Streamwise moment history and final-state summaries."""

    times: np.ndarray
    t1bar: np.ndarray
    t2bar: np.ndarray
    var_x: np.ndarray
    kappa_estimate: np.ndarray
    y_bin_edges: np.ndarray
    x_mean_by_bin: np.ndarray
    x_var_by_bin: np.ndarray
    n_particles: int
    final_x: Optional[np.ndarray] = None
    final_y: Optional[np.ndarray] = None

    def kappa_standard_error(self) -> float:
        """Rough MC standard error of the final kappa estimate (Gaussian
        approximation for the sample-variance fluctuation)."""
        return float(self.var_x[-1] / (2.0 * self.times[-1]) * math.sqrt(2.0 / (self.n_particles - 1)))


def _fold(y: np.ndarray) -> np.ndarray:
    """Exact positional reflection of arbitrary overshoot into [0, 1]."""
    y = np.mod(y, 2.0)
    return np.where(y > 1.0, 2.0 - y, y)


def _apply_bc(y: np.ndarray, bc: str) -> np.ndarray:
    if bc == "no-flux":
        return _fold(y)
    return np.mod(y, 1.0)


def _step_indices(path: Optional[OUPath], t_end: float, dt: float) -> int:
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be an integer number of steps")
    if path is not None:
        if path.times.size < n_steps + 1:
            raise ValueError("path does not cover [0, t_end] at the stepping resolution")
        dts = np.diff(path.times[:n_steps + 1])
        if not np.allclose(dts, dt, rtol=1e-9, atol=1e-12):
            raise ValueError("path grid must coincide with the stepping grid")
    return n_steps


def simulate_forward(flow: FlowSpec, gamma: float, init: InitialData, t_end: float,
                     cfg: SimConfig, path: Optional[OUPath] = None,
                     n_record: int = 50, n_y_bins: int = 10,
                     keep_positions: bool = False,
                     realization: int = 0) -> ForwardResult:
    """Euler-Maruyama particle ensemble for one flow realization.

    ``path`` supplies the shared xi realization (required unless the flow
    is steady); randomness beyond xi is the per-particle Brownian noise,
    seeded from (cfg.seed, realization).
    """
    needs_path = flow.kind != "steady"
    if needs_path and (path is None or path.values is None):
        raise ValueError("non-steady flows require an OU path with xi values")
    dt = cfg.dt
    if dt * math.pi**2 > 0.25:
        warnings.warn("dt does not resolve the slowest cross-channel mode; "
                      "y-resolved moment post-processing will be biased",
                      RuntimeWarning)
    n_steps = _step_indices(path if needs_path else None, t_end, dt)
    rng = np.random.default_rng(realization_seed(cfg.seed, realization))
    x, y = init.sample_particles(cfg.n_particles, rng)

    stride = max(1, n_steps // n_record)
    rec_t, rec_m1, rec_m2 = [0.0], [float(np.mean(x))], [float(np.mean(x * x))]
    sqrt2dt = math.sqrt(2.0 * dt)
    xi = path.values if needs_path else None
    for k in range(n_steps):
        if needs_path:
            xi_mid = 0.5 * (xi[k] + xi[k + 1])
            v = flow.velocity(y, xi_mid, gamma)
        else:
            v = flow.velocity(y, 0.0)
        noise = rng.standard_normal((2, cfg.n_particles))
        x = x + cfg.pe * v * dt + sqrt2dt * noise[0]
        y = _apply_bc(y + sqrt2dt * noise[1], cfg.bc)
        if y.size != cfg.n_particles or np.any((y < 0.0) | (y > 1.0)):
            raise AssertionError("particle left the channel: reflection broke mass conservation")
        if (k + 1) % stride == 0 or k + 1 == n_steps:
            rec_t.append((k + 1) * dt)
            rec_m1.append(float(np.mean(x)))
            rec_m2.append(float(np.mean(x * x)))

    times = np.array(rec_t)
    t1 = np.array(rec_m1)
    t2 = np.array(rec_m2)
    var = t2 - t1**2
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = np.where(times > 0, var / (2.0 * times), np.nan)

    edges = np.linspace(0.0, 1.0, n_y_bins + 1)
    which = np.clip(np.digitize(y, edges) - 1, 0, n_y_bins - 1)
    mean_by = np.full(n_y_bins, np.nan)
    var_by = np.full(n_y_bins, np.nan)
    for b in range(n_y_bins):
        sel = which == b
        if np.any(sel):
            mean_by[b] = float(np.mean(x[sel]))
            var_by[b] = float(np.var(x[sel]))

    return ForwardResult(
        times=times, t1bar=t1, t2bar=t2, var_x=var, kappa_estimate=kappa,
        y_bin_edges=edges, x_mean_by_bin=mean_by, x_var_by_bin=var_by,
        n_particles=cfg.n_particles,
        final_x=x if keep_positions else None,
        final_y=y if keep_positions else None,
    )


def evaluate_point_backward(flow: FlowSpec, gamma: float, path: OUPath,
                            x: float, y: float, t: float, init: InitialData,
                            cfg: SimConfig, realization: int = 0) -> tuple[float, float]:
    """Backward-characteristics estimate of T(x, y, t) for one realization.

    Every backward sample sees the same xi path (randomness lives in the
    Brownian increments only), so the estimate is one realization of the
    random field.  Returns (estimate, standard error).
    """
    if t == 0.0:
        return float(init.value(np.array(x), y)), 0.0
    if path.values is None:
        raise ValueError("backward evaluation needs pointwise xi values")
    dt = cfg.dt
    n_steps = _step_indices(path, t, dt)
    rng = np.random.default_rng(realization_seed(cfg.seed, realization))
    n = cfg.n_particles
    xi = path.values
    ypos = np.full(n, float(y))
    drift = np.zeros(n)
    sqrt2dt = math.sqrt(2.0 * dt)
    for k in range(n_steps):
        # backward clock: step k uses xi over [t-(k+1)dt, t-k dt]
        xi_mid = 0.5 * (xi[n_steps - k] + xi[n_steps - k - 1])
        drift += flow.velocity(ypos, xi_mid, gamma) * dt
        ypos = _apply_bc(ypos + sqrt2dt * rng.standard_normal(n), cfg.bc)
    x0 = x - cfg.pe * drift + math.sqrt(2.0 * t) * rng.standard_normal(n)
    vals = np.asarray(init.value(x0, ypos), dtype=float)
    est = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(n))
    return est, stderr


def wind_model_solution(x, t: float, path: OUPath, eigen: EigenData, ubar: float,
                        init: Optional[InitialData] = None, mass: float = 1.0):
    """Analytic long-time wind-model field on one xi realization:

        T(x, t) = mass * N(x; Pe ubar I(t), var),

    var = 2 kappa_eff t for integrable data; for gaussian(s) data the
    Fourier evaluation is exact and var = s + 2 kappa_eff t.
    """
    if eigen.kappa_eff <= 0:
        raise ValueError("kappa_eff must be positive")
    drift = eigen.pe * ubar * path.integral_at(t)
    var = 2.0 * eigen.kappa_eff * t
    if init is not None:
        if init.kind != "gaussian":
            raise ValueError("exact wind-model profiles support gaussian data; "
                             "pass init=None with a mass for generic integrable data")
        var += init.s
        mass = init.mass
    x_arr = np.asarray(x, dtype=float)
    return mass * np.exp(-(x_arr - drift) ** 2 / (2.0 * var)) / np.sqrt(2.0 * math.pi * var)


def simulate_random_wave(a: float, pe: float, ubar: float, kappa_eff: float,
                         paths: Optional[list[OUPath]] = None, n: Optional[int] = None,
                         x: float = 0.0, seed: int = 0) -> np.ndarray:
    """Rescaled random-wave scalar samples Ttilde = Z cos(a x + a Pe ubar I(t)).

    The combined Gaussian wave amplitude Z (the "2 Re A" factor) carries
    unit variance, which is the normalization under which the limiting
    density is the Bessel-K0 law with variance 1/2 and kurtosis 9/2.
    With ``paths`` the phase comes from each realization's OU integral
    (regime flag: the rescaling neglects O(a^2 t) decay curvature, so
    a^2 t should stay small); without paths the phase is drawn uniform,
    which is the long-time law.
    """
    rng = np.random.default_rng(realization_seed(seed, 0))
    if paths is not None:
        t_end = paths[0].t_end
        if a * a * t_end > 0.1:
            warnings.warn(f"a^2 t = {a * a * t_end:.3g} > 0.1: outside the "
                          "random-wave rescaling regime", RuntimeWarning)
        eta = np.array([a * x + a * pe * ubar * p.integral_at(p.t_end) for p in paths])
    else:
        if n is None:
            raise ValueError("need either an ensemble of paths or a sample count")
        eta = rng.uniform(0.0, 2.0 * math.pi, n)
    amplitude = rng.standard_normal(eta.size)
    return amplitude * np.cos(eta)


# ---------------------------------------------------------------------------
# empirical distributions
# ---------------------------------------------------------------------------

@dataclass
class PDFEstimate:
    """Normalized histogram plus the empirical CDF of a sample set."""

    sorted_samples: np.ndarray
    bin_edges: np.ndarray
    density: np.ndarray

    @property
    def n(self) -> int:
        return self.sorted_samples.size

    def empirical_cdf(self, x) -> np.ndarray:
        return np.searchsorted(self.sorted_samples, np.asarray(x), side="right") / self.n

    def ks_distance(self, cdf) -> float:
        """Kolmogorov-Smirnov distance against an analytic CDF callable."""
        f = np.asarray(cdf(self.sorted_samples), dtype=float)
        i = np.arange(1, self.n + 1)
        return float(np.max(np.maximum(np.abs(i / self.n - f), np.abs(f - (i - 1) / self.n))))

    def moment(self, k: int) -> float:
        return float(np.mean(self.sorted_samples**k))

    def variance(self) -> float:
        return float(np.var(self.sorted_samples))

    def kurtosis(self) -> float:
        """Flatness <x^4>/<x^2>^2 about the mean."""
        c = self.sorted_samples - np.mean(self.sorted_samples)
        return float(np.mean(c**4) / np.mean(c**2) ** 2)


def ensemble_pdf(samples, bins: int = 100) -> PDFEstimate:
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 1000:
        raise ValueError("need at least 1e3 samples for a stable histogram")
    density, edges = np.histogram(samples, bins=bins, density=True)
    return PDFEstimate(np.sort(samples), edges, density)
