"""Monte-Carlo wavefunction trajectories interleaved with protocol pulses.

Between pulses the oscillator evolves under H = delta(t) a^dag a with jump
operators a, a^dag and a^dag a.  The effective Hamiltonian is diagonal in the
Fock basis, so the no-jump propagator over a segment is known in closed form
and jump times can be found exactly by the waiting-time method.  A
fixed-step first-order integrator is available for cross-checks.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .codes import CodeSpec
from .hilbert import HybridState, TruncationError, cond_displace, displace
from .modular import MeasurementSpec, StabParams, finite_measure, repump_branches, round_pulses
from .noise import NoiseModel, mains_phase_integral, mains_phases, sample_drift

ROUND_TIME = 75e-6
REPUMP_TIME = 10e-6
MAX_STEP_JUMP_PROB = 0.05


class StepSizeError(RuntimeError):
    pass


class TrajectoryError(RuntimeError):
    def __init__(self, index: int, seed: int, cause: Exception):
        super().__init__(f"trajectory {index} (master seed {seed}) failed: {cause}")
        self.index, self.seed, self.cause = index, seed, cause


# -- schedule ---------------------------------------------------------------


@dataclass(frozen=True)
class Event:
    t: float
    kind: str  # "sdd" | "disp" | "repump" | "readout" | "free"
    exponent: tuple[float, float] = (0.0, 0.0)
    axis: str = "X"
    duration: float = 0.0
    tag: str = ""
    cycle: int = 0
    spec: Optional[MeasurementSpec] = None
    sign: int = 1


@dataclass
class Schedule:
    events: list[Event] = field(default_factory=list)
    t: float = 0.0
    cycle: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        t = 0.0
        for ev in self.events:
            if ev.t < t - 1e-15:
                raise ValueError("schedule times must be non-decreasing")
            if ev.kind == "free":
                if abs(ev.t - t) > 1e-12:
                    raise ValueError("free segments must tile the time axis")
                t = ev.t + ev.duration
            else:
                if abs(ev.t - t) > 1e-12:
                    raise ValueError("instantaneous events must sit at the end of the previous segment")

    # builders append in place and return self for chaining
    def free(self, duration: float) -> "Schedule":
        if duration > 0:
            self.events.append(Event(self.t, "free", duration=duration))
            self.t += duration
        return self

    def pulse(self, exponent, axis: Optional[str]) -> "Schedule":
        kind = "disp" if axis is None else "sdd"
        self.events.append(Event(self.t, kind, tuple(float(x) for x in exponent), axis or "X"))
        return self

    def repump(self) -> "Schedule":
        self.events.append(Event(self.t, "repump"))
        return self.free(REPUMP_TIME)

    def readout(self, tag: str, spec: MeasurementSpec, sign: int = 1) -> "Schedule":
        self.events.append(Event(self.t, "readout", tag=tag, cycle=self.cycle, spec=spec, sign=sign))
        return self

    def stabilization_round(self, code: CodeSpec, round_index: int, params: StabParams) -> "Schedule":
        pulses = round_pulses(code, round_index, params)
        gap = (ROUND_TIME - REPUMP_TIME) / len(pulses)
        for d, axis in pulses:
            self.pulse(d, axis)
            self.free(gap)
        return self.repump()

    def stabilization_cycle(self, code: CodeSpec, params: StabParams) -> "Schedule":
        self.stabilization_round(code, 1, params)
        self.stabilization_round(code, 2, params)
        self.cycle += 1
        return self

    @property
    def duration(self) -> float:
        return self.t


# -- noise context & free evolution -------------------------------------------


@dataclass
class NoiseContext:
    model: NoiseModel
    delta0: float
    phases: np.ndarray
    dim: int

    def __post_init__(self):
        n = np.arange(self.dim, dtype=float)
        up = np.where(n < self.dim - 1, n + 1, 0.0)
        m = self.model
        self.rate_down = m.gamma_down * n
        self.rate_up = m.gamma_up * up
        self.rate_deph = m.gamma_deph * n * n
        self.decay = self.rate_down + self.rate_up + self.rate_deph
        self.scale = 0.5 if m.half_detuning else 1.0

    @classmethod
    def draw(cls, model: NoiseModel, dim: int, rng: np.random.Generator) -> "NoiseContext":
        return cls(model, sample_drift(rng, model), mains_phases(model, rng), dim)

    def phase(self, t0: float, t1: float) -> float:
        """Accumulated detuning phase over [t0, t1]."""
        ph = self.delta0 * (t1 - t0)
        if self.model.mains:
            ph += mains_phase_integral(t0, t1, self.model, self.phases)
        return self.scale * ph


def _no_jump(amps: np.ndarray, ctx: NoiseContext, t0: float, t1: float) -> np.ndarray:
    n = np.arange(ctx.dim)
    fac = np.exp(-1j * ctx.phase(t0, t1) * n - 0.5 * ctx.decay * (t1 - t0))
    return amps * fac


def _apply_jump(amps: np.ndarray, ctx: NoiseContext, rng: np.random.Generator) -> tuple[np.ndarray, str]:
    pops = np.einsum("ij,ij->j", amps.conj(), amps).real
    w = np.array([pops @ ctx.rate_down, pops @ ctx.rate_up, pops @ ctx.rate_deph])
    k = int(rng.choice(3, p=w / w.sum()))
    out = np.zeros_like(amps)
    sq = np.sqrt(np.arange(ctx.dim, dtype=float))
    if k == 0:
        out[:, :-1] = amps[:, 1:] * sq[1:]
    elif k == 1:
        out[:, 1:] = amps[:, :-1] * sq[1:]
    else:
        out = amps * np.arange(ctx.dim)
    out /= np.sqrt(np.vdot(out, out).real)
    return out, ("a", "adag", "n")[k]


def evolve_segment(
    state: HybridState,
    t0: float,
    duration: float,
    ctx: NoiseContext,
    rng: np.random.Generator,
    dt: Optional[float] = None,
) -> tuple[HybridState, list[tuple[float, str]]]:
    """Evolve over [t0, t0 + duration]; returns the normalized state and the jump log.

    ``dt=None`` uses exact waiting times; a float selects the first-order
    stepped integrator with that step.
    """
    amps = state.amps / state.norm
    jumps: list[tuple[float, str]] = []
    t_end = t0 + duration
    if ctx.decay.any():
        if dt is None:
            t = t0
            while t < t_end:
                r = rng.uniform()
                pops = np.einsum("ij,ij->j", amps.conj(), amps).real
                survive = lambda tau: float(pops @ np.exp(-ctx.decay * tau)) - r  # noqa: E731
                if survive(t_end - t) >= 0:
                    amps = _no_jump(amps, ctx, t, t_end)
                    break
                tau = brentq(survive, 0.0, t_end - t, xtol=1e-15, rtol=1e-12)
                amps = _no_jump(amps, ctx, t, t + tau)
                amps, kind = _apply_jump(amps, ctx, rng)
                t += tau
                jumps.append((t, kind))
            amps = amps / np.sqrt(np.vdot(amps, amps).real)
        else:
            if dt <= 0 or dt > duration + 1e-18:
                raise ValueError("dt must lie in (0, duration]")
            steps = max(1, int(round(duration / dt)))
            h = duration / steps
            for i in range(steps):
                ts = t0 + i * h
                pops = np.einsum("ij,ij->j", amps.conj(), amps).real
                p_jump = h * float(pops @ ctx.decay)
                if p_jump > MAX_STEP_JUMP_PROB:
                    raise StepSizeError(f"jump probability {p_jump:.3f} per step exceeds {MAX_STEP_JUMP_PROB}")
                if rng.uniform() < p_jump:
                    amps, kind = _apply_jump(amps, ctx, rng)
                    jumps.append((ts, kind))
                    amps = _no_jump(amps, ctx, ts, ts + h)
                else:
                    amps = _no_jump(amps, ctx, ts, ts + h)
                amps = amps / np.sqrt(np.vdot(amps, amps).real)
    else:
        amps = _no_jump(amps, ctx, t0, t_end)
    out = HybridState(amps, state.tail_tol)
    out.check_truncation()
    return out, jumps


# -- trajectories --------------------------------------------------------------


@dataclass
class TrajectoryResult:
    index: int
    seed: int
    tags: list[str]
    cycles: np.ndarray
    times: np.ndarray
    values: np.ndarray
    jumps: list[tuple[float, str]] = field(default_factory=list)
    repump_excited: int = 0


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream keyed by (master_seed, index)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),)))


def run_trajectory(
    schedule: Schedule,
    initial: HybridState,
    noise: NoiseModel,
    master_seed: int,
    index: int = 0,
    dt: Optional[float] = None,
    observables: Optional[dict[str, Callable[[HybridState], float]]] = None,
) -> TrajectoryResult:
    """Run one trajectory; readouts are exact Born expectations on copies of the state."""
    rng = trajectory_rng(master_seed, index)
    ctx = NoiseContext.draw(noise, initial.dim, rng)
    recoil = noise.recoil if noise.recoil.enabled else None
    state = initial.normalized()
    tags, cycles, times, values, jumps = [], [], [], [], []
    excited = 0
    try:
        for ev in schedule.events:
            if ev.kind == "free":
                if noise.is_silent:
                    continue
                state, js = evolve_segment(state, ev.t, ev.duration, ctx, rng, dt)
                jumps.extend(js)
            elif ev.kind == "sdd":
                state = cond_displace(state, ev.exponent, ev.axis)
            elif ev.kind == "disp":
                state = displace(state, ev.exponent)
            elif ev.kind == "repump":
                branches = repump_branches(state, recoil, rng)
                probs = np.array([w for w, _ in branches])
                pick = int(rng.choice(len(branches), p=probs / probs.sum())) if len(branches) > 1 else 0
                if len(branches) > 1 and pick == 1:
                    excited += 1
                state = branches[pick][1]
            elif ev.kind == "readout":
                if observables and ev.tag in observables:
                    val = observables[ev.tag](state)
                else:
                    val = finite_measure(state, ev.spec, check=False).value
                tags.append(ev.tag)
                cycles.append(ev.cycle)
                times.append(ev.t)
                values.append(ev.sign * val)
            else:
                raise ValueError(f"unknown event kind {ev.kind!r}")
    except (TruncationError, StepSizeError) as exc:
        raise TrajectoryError(index, master_seed, exc) from exc
    is_complex = any(isinstance(v, complex) for v in values)
    vals = np.array(values, dtype=complex if is_complex else float)
    return TrajectoryResult(index, master_seed, tags, np.array(cycles), np.array(times), vals, jumps, excited)


# -- ensembles -------------------------------------------------------------------


@dataclass
class EnsembleResult:
    tags: list[str]
    cycles: np.ndarray
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_traj: int
    values: np.ndarray  # (n_traj, n_readouts)

    def select(self, tag: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        idx = [i for i, t in enumerate(self.tags) if t == tag]
        return self.times[idx], self.mean[idx], self.stderr[idx]


def _pairwise_sum(rows: np.ndarray) -> np.ndarray:
    """Deterministic pairwise reduction along axis 0."""
    while len(rows) > 1:
        if len(rows) % 2:
            rows = np.concatenate([rows, np.zeros_like(rows[:1])])
        rows = rows[0::2] + rows[1::2]
    return rows[0]


def aggregate(results: Sequence[TrajectoryResult]) -> EnsembleResult:
    results = sorted(results, key=lambda r: r.index)
    first = results[0]
    vals = np.array([r.values for r in results])
    n = len(results)
    mean = _pairwise_sum(vals) / n
    if n > 1:
        dev = vals - mean
        var = _pairwise_sum((dev * np.conj(dev)).real) / (n - 1)
        stderr = np.sqrt(var / n)
    else:
        stderr = np.zeros(vals.shape[1])
    return EnsembleResult(list(first.tags), first.cycles, first.times, mean, stderr, n, vals)


def _run_one(args):
    return run_trajectory(*args)


def run_ensemble(
    schedule: Schedule,
    initial: HybridState | Callable[[int], HybridState],
    noise: NoiseModel,
    n_traj: int,
    master_seed: int,
    workers: int = 1,
    dt: Optional[float] = None,
    observables: Optional[dict] = None,
) -> EnsembleResult:
    """Mean and standard error of every readout over ``n_traj`` trajectories.

    Results do not depend on ``workers``: each trajectory has its own RNG
    stream and reduction happens in trajectory order.  With ``workers > 1``
    the observables must be picklable (module-level functions).
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    init = initial if callable(initial) else (lambda i: initial)
    jobs = [(schedule, init(i), noise, master_seed, i, dt, observables) for i in range(n_traj)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=max(1, n_traj // (4 * workers))))
    else:
        results = [_run_one(j) for j in jobs]
    return aggregate(results)
