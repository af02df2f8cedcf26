"""Noise model: motional heating and dephasing, mains-frequency modulation, slow drift, photon recoil."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .hilbert import DisplacementExponent, FockSpace, OscOperator

DEFAULT_MAINS = ((50.0, 25.0, 0.0), (100.0, 1.0, 0.0), (150.0, 29.0, 0.0), (200.0, 3.0, 0.0), (250.0, 31.0, 0.0))
RECOIL_MEAN_NORM = 0.13
_ANGLE_DISTRIBUTIONS = ("isotropic_projected", "fixed_axis")
_CALIBRATION_DRAWS = 400_000
_CALIBRATION_SEED = 20201017


def _photon_sum(rng: np.random.Generator, mean_photons: float, angle_distribution: str, size: int) -> np.ndarray:
    """Net kick per unit kick_per_photon, shape (size, 2) in (dq, dp)."""
    counts = rng.geometric(1.0 / mean_photons, size=size)
    total = counts.sum()
    phase = rng.uniform(0.0, 2 * np.pi, size=total)
    if angle_distribution == "isotropic_projected":
        # emission direction uniform on the sphere, projected on the trap axis
        mag = rng.uniform(-1.0, 1.0, size=total)
    else:
        mag = np.ones(total)
    owner = np.repeat(np.arange(size), counts)
    dq = np.bincount(owner, mag * np.cos(phase), minlength=size)
    dp = np.bincount(owner, mag * np.sin(phase), minlength=size)
    return np.stack([dq, dp], axis=1)


@lru_cache(maxsize=16)
def _unit_mean_norm(mean_photons: float, angle_distribution: str) -> float:
    rng = np.random.default_rng(_CALIBRATION_SEED)
    kicks = _photon_sum(rng, mean_photons, angle_distribution, _CALIBRATION_DRAWS)
    return float(np.hypot(kicks[:, 0], kicks[:, 1]).mean())


@dataclass(frozen=True)
class RecoilModel:
    """Photon-recoil sampler for one repump event.

    The photon count is geometric on {1, 2, ...} with the given mean; each
    photon kicks the oscillator at a uniformly random motional phase.
    ``kick_per_photon`` is solved at construction so the mean kick norm equals
    ``mean_norm`` (pass ``kick_per_photon`` explicitly to bypass calibration).
    """

    mean_photons: float = 2.0
    mean_norm: float = RECOIL_MEAN_NORM
    angle_distribution: str = "isotropic_projected"
    kick_per_photon: float | None = None
    enabled: bool = True

    def __post_init__(self):
        if self.mean_photons < 1.0:
            raise ValueError("mean_photons must be >= 1 (at least one photon per repump)")
        if self.angle_distribution not in _ANGLE_DISTRIBUTIONS:
            raise ValueError(f"angle_distribution must be one of {_ANGLE_DISTRIBUTIONS}")
        if self.mean_norm < 0:
            raise ValueError("mean_norm must be non-negative")
        if self.kick_per_photon is None:
            k = self.mean_norm / _unit_mean_norm(float(self.mean_photons), self.angle_distribution)
            object.__setattr__(self, "kick_per_photon", float(k))
        elif self.kick_per_photon < 0:
            raise ValueError("kick_per_photon must be non-negative")

    def sample_shift(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        """Phase-space shifts (dq, dp), shape (size, 2)."""
        if not self.enabled or self.kick_per_photon == 0.0:
            return np.zeros((size, 2))
        return self.kick_per_photon * _photon_sum(rng, self.mean_photons, self.angle_distribution, size)

    def __call__(self, rng: np.random.Generator) -> DisplacementExponent:
        return sample_recoil(rng, self)


def sample_recoil(rng: np.random.Generator, model: RecoilModel) -> DisplacementExponent:
    dq, dp = model.sample_shift(rng, 1)[0]
    return DisplacementExponent.from_shift(float(dq), float(dp))


@dataclass(frozen=True)
class NoiseModel:
    """Rates in 1/s; mains tones as (frequency Hz, amplitude Hz, phase rad); drift sigma in rad/s."""

    gamma_down: float = 10.0
    gamma_up: float = 10.0
    gamma_deph: float = 20.0
    mains: tuple[tuple[float, float, float], ...] = DEFAULT_MAINS
    drift_sigma: float = 2 * np.pi * 6.0
    recoil: RecoilModel = field(default_factory=RecoilModel)
    line_trigger: bool = False
    half_detuning: bool = False

    def __post_init__(self):
        for name in ("gamma_down", "gamma_up", "gamma_deph", "drift_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        object.__setattr__(self, "mains", tuple(tuple(float(x) for x in tone) for tone in self.mains))
        for f, a, _ in self.mains:
            if f <= 0:
                raise ValueError("mains frequencies must be positive")
            if a < 0:
                raise ValueError("mains amplitudes must be non-negative")

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls(0.0, 0.0, 0.0, (), 0.0, RecoilModel(enabled=False, kick_per_photon=0.0))

    @property
    def is_silent(self) -> bool:
        return (
            self.gamma_down == self.gamma_up == self.gamma_deph == 0.0
            and self.drift_sigma == 0.0
            and all(a == 0.0 for _, a, _ in self.mains)
        )

    def max_rate(self) -> float:
        return max(self.gamma_down, self.gamma_up, self.gamma_deph)


def mains_phases(model: NoiseModel, rng: np.random.Generator | None) -> np.ndarray:
    """Configured phases under line trigger, otherwise fresh uniform draws."""
    fixed = np.array([ph for _, _, ph in model.mains])
    if model.line_trigger or rng is None:
        return fixed
    return rng.uniform(0.0, 2 * np.pi, size=len(model.mains))


def mains_delta(t, model: NoiseModel, phases: np.ndarray | None = None):
    """delta(t) = 2 pi sum_i A_i sin(2 pi f_i t + phi_i) in rad/s."""
    if not model.mains:
        return np.zeros_like(np.asarray(t, dtype=float)) if np.ndim(t) else 0.0
    f = np.array([m[0] for m in model.mains])
    a = np.array([m[1] for m in model.mains])
    ph = np.array([m[2] for m in model.mains]) if phases is None else np.asarray(phases)
    t = np.asarray(t, dtype=float)
    out = 2 * np.pi * np.sum(a * np.sin(2 * np.pi * f * t[..., None] + ph), axis=-1)
    return float(out) if out.ndim == 0 else out


def mains_phase_integral(t0: float, t1: float, model: NoiseModel, phases: np.ndarray) -> float:
    """Closed-form integral of mains_delta over [t0, t1]."""
    total = 0.0
    for (f, a, _), ph in zip(model.mains, phases):
        w = 2 * np.pi * f
        total += 2 * np.pi * a * (np.cos(w * t0 + ph) - np.cos(w * t1 + ph)) / w
    return float(total)


def sample_drift(rng: np.random.Generator, model: NoiseModel) -> float:
    if model.drift_sigma == 0.0:
        return 0.0
    return float(rng.normal(0.0, model.drift_sigma))


def jump_operators(model: NoiseModel, space: FockSpace) -> list[tuple[float, OscOperator]]:
    """[(rate, operator)] for annihilation, creation and number-operator jumps; zero rates omitted."""
    ops = space.operators()
    out = []
    for rate, name in ((model.gamma_down, "a"), (model.gamma_up, "adag"), (model.gamma_deph, "n")):
        if rate > 0:
            out.append((rate, ops[name]))
    return out
