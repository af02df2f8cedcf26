"""Named experiments driven by a ScenarioConfig; each returns tabular results."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .analytic import optimize_epsilon, readout_biased
from .codes import CodeSpec, code_state, make_code, run_prep
from .config import ScenarioConfig
from .fitting import FitError, fit_exp_decay
from .hilbert import FockConfig, HybridState, characteristic_function, expectation, fock_space
from .mcwf import REPUMP_TIME, ROUND_TIME, EnsembleResult, Schedule, run_ensemble
from .modular import (
    MeasurementSpec,
    PauliFrame,
    StabParams,
    finite_measure,
    init_pulses,
    logical_init,
    measure_value,
    pump_from_vacuum,
    stabilizer_spec,
)

CYCLE_TIME = 2 * ROUND_TIME


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def add(self, *row) -> None:
        if len(row) != len(self.columns):
            raise ValueError("row length does not match columns")
        self.rows.append(tuple(row))

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


@dataclass
class ScenarioResult:
    name: str
    tables: dict[str, Table]


# -- shared helpers ---------------------------------------------------------------


def _code(cfg: ScenarioConfig) -> CodeSpec:
    return make_code(cfg.code, cfg.kappa)


def _params(cfg: ScenarioConfig) -> StabParams:
    return StabParams(cfg.eps, cfg.mu, cfg.eps_offset)


def readout_eps(cfg: ScenarioConfig, k: int) -> float:
    value = cfg.readout_eps_k1 if k == 1 else cfg.readout_eps_k2
    return float(value) if value is not None else optimize_epsilon("readout", cfg.kappa, k)


def logical_spec(cfg: ScenarioConfig, code: CodeSpec, which: str) -> MeasurementSpec:
    return MeasurementSpec.for_logical(code, which, eps=readout_eps(cfg, 1), eps_offset=cfg.readout_eps_offset)


def stab_spec(cfg: ScenarioConfig, code: CodeSpec, which: str) -> MeasurementSpec:
    return stabilizer_spec(code, which, readout_eps(cfg, 2), cfg.readout_eps_offset)


def _fock(cfg: ScenarioConfig) -> FockConfig:
    return FockConfig(dim=cfg.dim, tail_tol=cfg.tail_tol)


def _use_trajectories(cfg: ScenarioConfig) -> bool:
    # exact branching is only defined without jump noise
    return cfg.noise.enabled or cfg.mode == "sampled"


def _ensemble(cfg: ScenarioConfig, schedule: Schedule, initial, observables=None) -> EnsembleResult:
    return run_ensemble(schedule, initial, cfg.noise.model(), cfg.n_traj, cfg.seed, cfg.workers, observables=observables)


def _fit_row(observable: str, branch: str, t, y, sigma, baseline: Optional[float]) -> tuple:
    try:
        f = fit_exp_decay(t, y, sigma, baseline=baseline)
        return (observable, branch, f.a, f.b, f.gamma, f.lifetime, f.lifetime_err, f.a_err, f.b_err, f.gamma_err, f.residual_norm, f.converged)
    except (FitError, ValueError):
        nan = float("nan")
        return (observable, branch, nan, nan, nan, nan, nan, nan, nan, nan, nan, False)


FIT_COLUMNS = ("observable", "branch", "a", "b", "gamma", "lifetime", "lifetime_err", "a_err", "b_err", "gamma_err", "residual_norm", "converged")


# -- epsilon sweep ---------------------------------------------------------------


def scenario_epsilon_sweep(cfg: ScenarioConfig) -> ScenarioResult:
    """Finite Z_L (k = 1) and S_z (k = 2) readouts of |1_L> against the bias eps."""
    code = _code(cfg)
    state = code_state(code, "-Z", _fock(cfg))
    grid = np.linspace(0.0, cfg.scan.eps_max, cfg.scan.points)
    table = Table(("k", "eps", "value", "stderr", "analytic"))
    specs = []
    for k in (1, 2):
        for e in grid:
            if k == 1:
                spec = MeasurementSpec.for_logical(code, "Z", eps=float(e), eps_offset=cfg.readout_eps_offset)
            else:
                spec = stabilizer_spec(code, "Z", float(e), cfg.readout_eps_offset)
            specs.append((k, float(e), spec))

    def overlay(k: int, e: float) -> float:
        if code.name != "square":
            return float("nan")
        return readout_biased(k, cfg.kappa, e + cfg.readout_eps_offset, z=1)

    if not cfg.noise.enabled:
        for k, e, spec in specs:
            table.add(k, e, finite_measure(state, spec).value, 0.0, overlay(k, e))
    else:
        sch = Schedule().free(cfg.scan.hold_time)
        for i, (_, _, spec) in enumerate(specs):
            sch.readout(f"r{i}", spec)
        res = _ensemble(cfg, sch, state)
        for i, (k, e, _) in enumerate(specs):
            _, m, s = res.select(f"r{i}")
            table.add(k, e, float(m[0]), float(s[0]), overlay(k, e))
    return ScenarioResult("epsilon_sweep", {"epsilon_sweep": table})


# -- stabilizer onset --------------------------------------------------------------


def scenario_stabilizer_onset(cfg: ScenarioConfig) -> ScenarioResult:
    """Stabilizer readouts per cycle while pumping from the ground state."""
    code = _code(cfg)
    params = _params(cfg)
    table = Table(("cycle", "S_z", "S_z_stderr", "S_x", "S_x_stderr"))
    if not _use_trajectories(cfg):
        hist = pump_from_vacuum(cfg.dim, code, params, cfg.cycles)
        for c, ens in enumerate(hist):
            table.add(c, measure_value(ens, stab_spec(cfg, code, "Z")), 0.0, measure_value(ens, stab_spec(cfg, code, "X")), 0.0)
    else:
        sch = Schedule()
        for c in range(cfg.cycles + 1):
            if c:
                sch.stabilization_cycle(code, params)
            sch.readout("S_z", stab_spec(cfg, code, "Z")).readout("S_x", stab_spec(cfg, code, "X"))
        res = _ensemble(cfg, sch, HybridState.fock(cfg.dim, 0, cfg.tail_tol))
        _, mz, sz = res.select("S_z")
        _, mx, sx = res.select("S_x")
        for c in range(cfg.cycles + 1):
            table.add(c, float(mz[c]), float(sz[c]), float(mx[c]), float(sx[c]))
    return ScenarioResult("stabilizer_onset", {"stabilizer_onset": table})


# -- lifetimes --------------------------------------------------------------------


def _free_times(cfg: ScenarioConfig, t_max: Optional[float] = None) -> np.ndarray:
    return np.linspace(0.0, cfg.scan.t_max_free if t_max is None else t_max, cfg.scan.free_points)


def _free_readouts(sch: Schedule, times: np.ndarray, readouts: list[tuple[str, MeasurementSpec, int]]) -> Schedule:
    start = sch.t
    for t in times:
        sch.free(start + t - sch.t)
        for tag, spec, sign in readouts:
            sch.readout(tag, spec, sign)
    return sch


def _stabilized_readouts(
    sch: Schedule, code: CodeSpec, params: StabParams, n_cycles: int, every: int, readouts: list[tuple[str, MeasurementSpec, int, str]], frame: bool
) -> Schedule:
    for c in range(n_cycles + 1):
        if c:
            sch.stabilization_cycle(code, params)
        if c % every == 0:
            pf = PauliFrame().after_cycles(c)
            for tag, spec, sign, which in readouts:
                sgn = sign * (pf.sign(which) if frame and which in "XYZ" else 1)
                sch.readout(tag, spec, sgn)
    return sch


def _curves(res: EnsembleResult, tag: str, t0: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    t, m, s = res.select(tag)
    return np.asarray(t) - t0, np.asarray(m, dtype=float), np.asarray(s, dtype=float)


def scenario_lifetimes(cfg: ScenarioConfig) -> ScenarioResult:
    """Logical and stabilizer decay with and without stabilization, plus exponential fits.

    Logical curves start from the four-pulse prepared eigenstates; stabilizer
    curves start from the state pumped from the ground state for
    ``scan.pump_cycles`` cycles.  Values are reported sign-corrected so every
    curve starts positive.  Unstabilized fits leave the baseline free; stabilized
    fits fix it to zero.
    """
    code = _code(cfg)
    params = _params(cfg)
    noise = cfg.noise.model()
    fock = _fock(cfg)
    n_cycles = int(np.ceil(cfg.scan.t_max / CYCLE_TIME))
    every = cfg.scan.readout_every
    data = Table(("time", "observable", "branch", "value", "stderr"))
    fits = Table(FIT_COLUMNS)

    def record(res: EnsembleResult, tag: str, branch: str, t0: float, baseline: Optional[float]):
        t, m, s = _curves(res, tag, t0)
        for ti, mi, si in zip(t, m, s):
            data.add(float(ti), tag, branch, float(mi), float(si))
        # unweighted: the t = 0 point is deterministic and would dominate a weighted fit
        fits.add(*_fit_row(tag, branch, t, m, None, baseline))

    # stabilizers: pump, then either keep pumping or stop
    stab_reads = [("S_z", stab_spec(cfg, code, "Z"), 1), ("S_x", stab_spec(cfg, code, "X"), 1)]
    vac = HybridState.fock(cfg.dim, 0, cfg.tail_tol)
    for branch in ("unstabilized", "stabilized"):
        sch = Schedule()
        for _ in range(cfg.scan.pump_cycles):
            sch.stabilization_cycle(code, params)
        t0 = sch.t
        if branch == "unstabilized":
            _free_readouts(sch, _free_times(cfg, cfg.scan.t_max_stab_free), stab_reads)
        else:
            _stabilized_readouts(sch, code, params, n_cycles, every, [r + ("S",) for r in stab_reads], False)
        res = run_ensemble(sch, vac, noise, cfg.n_traj, cfg.seed, cfg.workers)
        for tag, _, _ in stab_reads:
            record(res, tag, branch, t0, None if branch == "unstabilized" else 0.0)

    # logical eigenstates from the prepared states
    for eig in cfg.scan.eigenstates:
        which, sign = eig[1], (1 if eig[0] == "+" else -1)
        _, prepared = run_prep(code, eig, fock)
        reads = [(eig, logical_spec(cfg, code, which), sign)]
        for branch in ("unstabilized", "stabilized"):
            sch = Schedule()
            if branch == "unstabilized":
                _free_readouts(sch, _free_times(cfg), reads)
            else:
                _stabilized_readouts(sch, code, params, n_cycles, every, [r + (which,) for r in reads], cfg.frame_corrected)
            res = run_ensemble(sch, prepared, noise, cfg.n_traj, cfg.seed, cfg.workers)
            record(res, eig, branch, 0.0, None if branch == "unstabilized" else 0.0)
    return ScenarioResult("lifetimes", {"lifetimes": data, "lifetimes_fits": fits})


# -- logical initialization ---------------------------------------------------------


def scenario_logical_init(cfg: ScenarioConfig) -> ScenarioResult:
    """Pump from vacuum, reset into each logical eigenstate, read out all three logicals."""
    code = _code(cfg)
    if code.name != "square":
        raise ValueError("logical initialization is defined for the square code only")
    params = _params(cfg)
    table = Table(("eigenstate", "observable", "value", "stderr"))
    eigs = ("+X", "-X", "+Y", "-Y", "+Z", "-Z")
    if not _use_trajectories(cfg):
        pumped = pump_from_vacuum(cfg.dim, code, params, cfg.scan.pump_cycles)[-1]
        for eig in eigs:
            ens = logical_init(pumped, eig, cfg.init_eps, code, params)
            for which in "XYZ":
                table.add(eig, which, measure_value(ens, logical_spec(cfg, code, which)), 0.0)
    else:
        vac = HybridState.fock(cfg.dim, 0, cfg.tail_tol)
        for eig in eigs:
            sch = Schedule()
            for _ in range(cfg.scan.pump_cycles):
                sch.stabilization_cycle(code, params)
            for kind, d, axis in init_pulses(eig, cfg.init_eps):
                sch.pulse(d, axis if kind == "sdd" else None)
            sch.free(ROUND_TIME - REPUMP_TIME).repump()
            sch.stabilization_cycle(code, params).stabilization_cycle(code, params)
            for which in "XYZ":
                sch.readout(which, logical_spec(cfg, code, which))
            res = _ensemble(cfg, sch, vac)
            for which in "XYZ":
                _, m, s = res.select(which)
                table.add(eig, which, float(m[0]), float(s[0]))
    return ScenarioResult("logical_init", {"logical_init": table})



# -- characteristic function -----------------------------------------------------------


def scenario_charfn(cfg: ScenarioConfig) -> ScenarioResult:
    """Characteristic function on a square grid of displacement exponents.

    ``cycles = 0`` uses the prepared |1_L> state; otherwise the noiseless state
    pumped from the ground state for ``cycles`` cycles.
    """
    code = _code(cfg)
    if cfg.cycles == 0:
        _, target = run_prep(code, "-Z", _fock(cfg))
    else:
        target = pump_from_vacuum(cfg.dim, code, _params(cfg), cfg.cycles)[-1]
    axis = np.linspace(-cfg.scan.extent, cfg.scan.extent, cfg.scan.grid)
    grid = [(float(a), float(b)) for a in axis for b in axis]
    vals = characteristic_function(target, grid)
    table = Table(("a", "b", "re", "im"))
    for (a, b), v in zip(grid, vals):
        table.add(a, b, float(np.real(v)), float(np.imag(v)))
    return ScenarioResult("charfn", {"charfn": table})


# -- Ramsey reference --------------------------------------------------------------------


def annihilation_expectation(state: HybridState) -> complex:
    """<a> of the oscillator; twice its magnitude is the 0-1 coherence."""
    space = fock_space(state.dim)
    return complex(expectation(state, space.operators()["a"]))


def scenario_ramsey(cfg: ScenarioConfig) -> ScenarioResult:
    """Free evolution of (|0> + |1>)/sqrt(2) under the noise model; coherence 2|E<a>|."""
    psi = np.zeros(cfg.dim, dtype=complex)
    psi[0] = psi[1] = 1 / np.sqrt(2)
    start = HybridState.from_oscillator(psi, 0, cfg.tail_tol)
    times = np.linspace(0.0, cfg.scan.ramsey_t_max, cfg.scan.ramsey_points)
    sch = _free_readouts(Schedule(), times, [("coh", None, 1)])
    res = _ensemble(cfg, sch, start, {"coh": annihilation_expectation})
    t, m, s = res.select("coh")
    coh = 2 * np.abs(m)
    err = 2 * np.asarray(s, dtype=float)
    table = Table(("time", "coherence", "stderr"))
    for ti, ci, ei in zip(t, coh, err):
        table.add(float(ti), float(ci), float(ei))
    fits = Table(FIT_COLUMNS)
    # coherence of a dephasing two-level superposition decays to zero
    fits.add(*_fit_row("coherence", "free", np.asarray(t), coh, None, 0.0))
    return ScenarioResult("ramsey", {"ramsey": table, "ramsey_fits": fits})


SCENARIO_FUNCS: dict[str, Callable[[ScenarioConfig], ScenarioResult]] = {
    "epsilon_sweep": scenario_epsilon_sweep,
    "stabilizer_onset": scenario_stabilizer_onset,
    "lifetimes": scenario_lifetimes,
    "logical_init": scenario_logical_init,
    "charfn": scenario_charfn,
    "ramsey": scenario_ramsey,
}


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    return SCENARIO_FUNCS[cfg.scenario](cfg)
