"""Finite-state modular measurements, Kraus maps and the dissipative stabilization cycle."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .codes import CodeSpec
from .hilbert import (
    SQRT_PI,
    DisplacementExponent,
    HybridState,
    OscEnsemble,
    OscOperator,
    TruncationError,
    ancilla_project,
    cond_displace,
    displace,
    fock_space,
)

PRUNE_WEIGHT = 1e-6

RecoilSampler = Callable[[np.random.Generator], Sequence[float]]


class ProtocolError(RuntimeError):
    """A protocol step was applied to a state that violates its precondition."""


def _unit(d: Sequence[float]) -> tuple[float, float]:
    n = float(np.hypot(d[0], d[1]))
    if n == 0.0:
        raise ValueError("zero-length axis")
    return (d[0] / n, d[1] / n)


def _perp(u: Sequence[float]) -> tuple[float, float]:
    # exponent whose displacement moves the state along the direction u is sensitive to
    return (-u[1], u[0])


# -- measurements -----------------------------------------------------------


_ANCILLA_BASIS = {"readout": "Z", "error_signal": "Y"}


@dataclass(frozen=True)
class MeasurementSpec:
    """Finite-state measurement of exp(i k l (axis . (q, p))).

    ``length`` l is the logical displacement amplitude (sqrt(pi) for the square
    Z_L/X_L, sqrt(2 pi) for Y_L); k = 2 measures the stabilizer.
    """

    k: int = 1
    axis: tuple[float, float] = (1.0, 0.0)
    eps: float = 0.0
    basis: str = "readout"
    eps_offset: float = 0.0
    length: float = SQRT_PI

    def __post_init__(self):
        if self.k not in (1, 2):
            raise ValueError("k must be 1 (logical) or 2 (stabilizer)")
        if self.eps < 0:
            raise ValueError("eps must be non-negative")
        if self.basis not in _ANCILLA_BASIS:
            raise ValueError(f"basis must be one of {sorted(_ANCILLA_BASIS)}")
        if abs(np.hypot(*self.axis) - 1.0) > 1e-9:
            raise ValueError("axis must be a unit vector")

    @classmethod
    def for_logical(cls, code: CodeSpec, which: str, k: int = 1, **kw) -> "MeasurementSpec":
        d = code.logical(which)
        return cls(k=k, axis=_unit(d), length=d.norm, **kw)

    @property
    def alpha(self) -> float:
        return self.k * self.length / 2.0

    def pulse_exponent(self) -> DisplacementExponent:
        return DisplacementExponent(self.alpha * self.axis[0], self.alpha * self.axis[1])

    def bias_exponent(self) -> DisplacementExponent:
        e = self.eps + self.eps_offset
        px, pp = _perp(self.axis)
        return DisplacementExponent(e * px, e * pp)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "axis": list(self.axis),
            "eps": self.eps,
            "basis": self.basis,
            "eps_offset": self.eps_offset,
            "length": self.length,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MeasurementSpec":
        d = dict(d)
        d["axis"] = tuple(d.get("axis", (1.0, 0.0)))
        return cls(**d)


@dataclass
class MeasureOutcome:
    p_plus: float
    p_minus: float
    post_plus: HybridState
    post_minus: HybridState

    @property
    def value(self) -> float:
        return self.p_plus - self.p_minus


def _require_ground(state: HybridState, tol: float = 1e-9) -> None:
    pops = state.ancilla_populations()
    if pops[1] > tol * pops.sum():
        raise ProtocolError(f"ancilla not in |0>_S (excited population {pops[1] / pops.sum():.2e})")


def _measure_pulses(state: HybridState, spec: MeasurementSpec, check: bool) -> HybridState:
    _require_ground(state)
    s = cond_displace(state, spec.bias_exponent(), "Y", check)
    return cond_displace(s, spec.pulse_exponent(), "X", check)


def _outcome(s: HybridState, spec: MeasurementSpec) -> MeasureOutcome:
    basis = _ANCILLA_BASIS[spec.basis]
    pp, post_p = ancilla_project(s, basis, +1)
    pm, post_m = ancilla_project(s, basis, -1)
    return MeasureOutcome(pp, pm, post_p, post_m)


def finite_measure(state: HybridState, spec: MeasurementSpec, check: bool = True) -> MeasureOutcome:
    """Bias pulse, measurement pulse, then ancilla projection."""
    return _outcome(_measure_pulses(state, spec, check), spec)


def check_ensemble_truncation(ens: OscEnsemble) -> OscEnsemble:
    """Weighted tail population of the mixture must stay below tail_tol.

    Low-weight components of a compressed mixture may individually carry a
    large relative tail; only their weighted contribution matters.
    """
    if not len(ens):
        return ens
    tol = ens.branches[0][1].tail_tol
    leaked = sum(w * s.tail_population() / s.norm**2 for w, s in ens)
    if leaked > tol:
        raise TruncationError(leaked, tol)
    return ens


def measure_value(target: HybridState | OscEnsemble, spec: MeasurementSpec) -> float:
    """p_plus - p_minus, averaged over ensemble branches."""
    if isinstance(target, HybridState):
        return finite_measure(target, spec).value
    moved = OscEnsemble([(w, _measure_pulses(s, spec, False)) for w, s in target])
    check_ensemble_truncation(moved)
    return float(sum(w * _outcome(s, spec).value for w, s in moved))


def error_signal(state: HybridState, spec: MeasurementSpec, chi: float) -> float:
    """Displace by chi along the measured quadrature, then read the sine-form signal."""
    shift = DisplacementExponent(*_perp(spec.axis)).scale(-chi)
    moved = displace(state, shift)
    return finite_measure(moved, replace(spec, basis="error_signal")).value


# -- Kraus operators --------------------------------------------------------


@dataclass(frozen=True)
class KrausPair:
    K_plus: OscOperator
    K_minus: OscOperator

    def completeness_error(self, interior: float = 0.8) -> float:
        """max |K+^dag K+ + K-^dag K- - I| on the lowest ``interior`` fraction of levels."""
        kp, km = self.K_plus.matrix, self.K_minus.matrix
        s = kp.conj().T @ kp + km.conj().T @ km
        n = int(interior * s.shape[0])
        return float(np.abs(s[:n, :n] - np.eye(n)).max())


_SIGMA = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
}


def _cd_blocks(dim: int, d: Sequence[float], axis: str) -> np.ndarray:
    """exp(i G sigma) = I (x) cos G + sigma (x) i sin G as a (2, 2, dim, dim) block array."""
    D = fock_space(dim).displacement_matrix(d)
    Dd = D.conj().T
    C, iS = (D + Dd) / 2, (D - Dd) / 2
    sig = _SIGMA[axis]
    return np.eye(2)[:, :, None, None] * C + sig[:, :, None, None] * iS


def _compose(*blocks: np.ndarray) -> np.ndarray:
    """Block product in operator order (leftmost acts last)."""
    out = blocks[0]
    for b in blocks[1:]:
        out = np.einsum("ijab,jkbc->ikac", out, b)
    return out


def _kraus_from_blocks(U: np.ndarray, basis: str) -> KrausPair:
    vecs = {"Z": (np.array([1, 0]), np.array([0, 1])),
            "Y": (np.array([1, 1j]) / np.sqrt(2), np.array([1, -1j]) / np.sqrt(2)),
            "X": (np.array([1, 1]) / np.sqrt(2), np.array([1, -1]) / np.sqrt(2))}[basis]
    col = U[:, 0]  # ancilla input |0>
    ks = [np.einsum("i,iab->ab", v.conj(), col) for v in vecs]
    return KrausPair(OscOperator(ks[0]), OscOperator(ks[1]))


def make_measure_kraus(spec: MeasurementSpec, dim: int) -> KrausPair:
    """Kraus pair of exp(i alpha x X) exp(i eps x_perp Y) followed by projection in ``spec.basis``."""
    U = _compose(_cd_blocks(dim, spec.pulse_exponent(), "X"), _cd_blocks(dim, spec.bias_exponent(), "Y"))
    return _kraus_from_blocks(U, _ANCILLA_BASIS[spec.basis])


def make_feedback_kraus(alpha: float, eps: float, mu: float, quadrature: str, dim: int, basis: str = "Z") -> KrausPair:
    """Kraus pair of one stabilization round, decomposed over the ancilla ``basis``.

    ``quadrature='q'`` is the round exp(i mu p Y) exp(i alpha q X) exp(i eps p Y)
    that corrects position; ``'p'`` is exp(i mu q Y) exp(-i alpha p X) exp(i eps q Y).
    """
    if quadrature == "q":
        meas, perp = (alpha, 0.0), (0.0, 1.0)
    elif quadrature == "p":
        meas, perp = (0.0, -alpha), (1.0, 0.0)
    else:
        raise ValueError("quadrature must be 'q' or 'p'")
    U = _compose(
        _cd_blocks(dim, (mu * perp[0], mu * perp[1]), "Y"),
        _cd_blocks(dim, meas, "X"),
        _cd_blocks(dim, (eps * perp[0], eps * perp[1]), "Y"),
    )
    return _kraus_from_blocks(U, basis)


# -- stabilization ------------------------------------------------------------


@dataclass(frozen=True)
class StabParams:
    """Bias and feedback strengths for the two-round stabilization cycle."""

    eps: float = 2 * SQRT_PI * 0.045
    mu: float = 2 * SQRT_PI * 0.065
    eps_offset: float = 0.0

    def __post_init__(self):
        if self.eps < 0 or self.mu < 0:
            raise ValueError("eps and mu must be non-negative")


def round_pulses(code: CodeSpec, round_index: int, params: StabParams) -> list[tuple[DisplacementExponent, str]]:
    """(exponent, ancilla axis) list in time order for one stabilization round."""
    if round_index not in (1, 2):
        raise ValueError("round_index must be 1 or 2")
    stab = code.stab_z if round_index == 1 else code.stab_x
    u = _unit(stab)
    alpha = stab.norm / 2.0
    v = DisplacementExponent(*_perp(u))
    return [
        (v.scale(params.eps + params.eps_offset), "Y"),
        (DisplacementExponent(alpha * u[0], alpha * u[1]), "X"),
        (v.scale(params.mu), "Y"),
    ]


def apply_round_unitary(
    state: HybridState, code: CodeSpec, round_index: int, params: StabParams, check: bool = True
) -> HybridState:
    for d, axis in round_pulses(code, round_index, params):
        state = cond_displace(state, d, axis, check)
    return state


def repump_branches(
    state: HybridState, recoil: Optional[RecoilSampler] = None, rng: Optional[np.random.Generator] = None
) -> list[tuple[float, HybridState]]:
    """Split over ancilla Z; the excited part is kicked by a recoil draw; both reset to |0>_S."""
    pops = state.ancilla_populations()
    total = pops.sum()
    out = []
    for b in (0, 1):
        w = pops[b] / total
        if w <= 0.0:
            continue
        psi = state.amps[b] / np.sqrt(pops[b])
        s = HybridState.from_oscillator(psi, 0, state.tail_tol)
        if b == 1 and recoil is not None:
            if rng is None:
                raise ValueError("recoil sampling needs an rng")
            s = displace(s, recoil(rng), check=False)
        out.append((float(w), s))
    return out


MAX_DISCARDED = 1e-2


def compress(ens: OscEnsemble, prune: float = PRUNE_WEIGHT) -> OscEnsemble:
    """Re-express a ground-ancilla mixture by the eigenvectors of its density matrix.

    Eigen-components with relative weight below ``prune`` are dropped, as are
    components whose own tail population exceeds ``tail_tol``: those have been
    scrambled by the truncation boundary.  The removed probability accumulates
    in ``discarded``; exceeding MAX_DISCARDED raises TruncationError.
    """
    if len(ens) <= 1:
        return ens
    tail_tol = ens.branches[0][1].tail_tol
    vecs = np.array([np.sqrt(w) * s.amps[0] / s.norm for w, s in ens])
    if len(ens) > vecs.shape[1] // 2:
        vals, evecs = np.linalg.eigh(vecs.T @ vecs.conj())
        comps = evecs.T
    else:
        # few branches: diagonalize the Gram matrix instead
        vals, u = np.linalg.eigh(vecs.conj() @ vecs.T)
        comps = (u.T @ vecs) / np.sqrt(np.clip(vals, 1e-300, None))[:, None]
    total = vals.sum()
    cut = int(np.ceil(0.9 * vecs.shape[1]))
    kept, dropped = [], 0.0
    for v, c in zip(vals[::-1], comps[::-1]):
        c = c / np.linalg.norm(c)
        if v < prune * total or np.vdot(c[cut:], c[cut:]).real > tail_tol:
            dropped += max(float(v), 0.0) / total
            continue
        kept.append((float(v), HybridState.from_oscillator(c, 0, tail_tol)))
    out = OscEnsemble.mixture(kept)
    out.discarded = ens.discarded + (1.0 - ens.discarded) * dropped
    if out.discarded > MAX_DISCARDED:
        raise TruncationError(out.discarded, MAX_DISCARDED)
    return out


def repump(
    ens: OscEnsemble,
    mode: str = "exact_branching",
    rng: Optional[np.random.Generator] = None,
    recoil: Optional[RecoilSampler] = None,
    compress_mixture: bool = True,
) -> OscEnsemble:
    items = []
    for w, s in ens:
        branches = repump_branches(s, recoil, rng)
        if mode == "exact_branching":
            items.extend((w * bw, bs) for bw, bs in branches)
        elif mode == "sampled":
            if rng is None:
                raise ValueError("sampled mode needs an rng")
            probs = np.array([bw for bw, _ in branches])
            pick = int(rng.choice(len(branches), p=probs / probs.sum())) if len(branches) > 1 else 0
            items.append((w, branches[pick][1]))
        else:
            raise ValueError(f"unknown mode {mode!r}")
    total = sum(w for w, _ in items)
    if mode == "exact_branching" and compress_mixture:
        merged = OscEnsemble.mixture(items)
        merged.discarded = ens.discarded
        return compress(merged)
    kept = [(w, s) for w, s in items if w / total >= PRUNE_WEIGHT]
    out = OscEnsemble.mixture(kept)
    dropped = 1.0 - sum(w for w, _ in kept) / total
    out.discarded = ens.discarded + (1.0 - ens.discarded) * dropped
    return out


def stabilization_round(
    ens: OscEnsemble,
    round_index: int,
    code: CodeSpec,
    params: StabParams,
    mode: str = "exact_branching",
    rng: Optional[np.random.Generator] = None,
    recoil: Optional[RecoilSampler] = None,
) -> OscEnsemble:
    """Round unitary on every branch followed by the repump step."""
    for _, s in ens:
        _require_ground(s)
    moved = OscEnsemble([(w, apply_round_unitary(s, code, round_index, params, check=False)) for w, s in ens])
    moved.discarded = ens.discarded
    check_ensemble_truncation(moved)
    return repump(moved, mode, rng, recoil)


def stabilization_cycle(ens, code, params, mode="exact_branching", rng=None, recoil=None) -> OscEnsemble:
    ens = stabilization_round(ens, 1, code, params, mode, rng, recoil)
    return stabilization_round(ens, 2, code, params, mode, rng, recoil)


@dataclass
class PauliFrame:
    """Logical Paulis applied by the protocol since the reference point.

    Round 1 applies Z_L^{+-1} (flips X_L and Y_L readouts); round 2 applies
    X_L^{+-1} (flips Z_L and Y_L readouts).
    """

    x: int = 0
    z: int = 0

    def after_round(self, round_index: int) -> "PauliFrame":
        if round_index == 1:
            return PauliFrame(self.x, self.z ^ 1)
        return PauliFrame(self.x ^ 1, self.z)

    def after_cycles(self, n: int) -> "PauliFrame":
        f = self
        for _ in range(n):
            f = f.after_round(1).after_round(2)
        return f

    def sign(self, which: str) -> int:
        which = which.upper()
        flips = {"Z": self.x, "X": self.z, "Y": self.x ^ self.z}[which]
        return -1 if flips else 1


def logical_readout(
    target: HybridState | OscEnsemble,
    code: CodeSpec,
    which: str,
    eps: float,
    frame: Optional[PauliFrame] = None,
    eps_offset: float = 0.0,
    raw: bool = False,
) -> float:
    spec = MeasurementSpec.for_logical(code, which, eps=eps, eps_offset=eps_offset)
    val = measure_value(target, spec)
    if raw or frame is None:
        return val
    return frame.sign(which) * val


def stabilizer_spec(code: CodeSpec, which: str, eps: float, eps_offset: float = 0.0) -> MeasurementSpec:
    d = code.stabilizer(which)
    return MeasurementSpec(k=2, axis=_unit(d), eps=eps, length=d.norm / 2, eps_offset=eps_offset)


def stabilizer_readout(target, code: CodeSpec, which: str, eps: float, eps_offset: float = 0.0) -> float:
    return measure_value(target, stabilizer_spec(code, which, eps, eps_offset))


# -- logical initialization --------------------------------------------------

_DELTA = SQRT_PI / 2


def init_pulses(eigenstate: str, eps: float, delta: float = _DELTA) -> list[tuple[str, tuple[float, float], Optional[str]]]:
    """Time-ordered (kind, exponent, axis) for the square-code projective reset.

    Each sequence is: bias SDD, global displacement by delta, measurement SDD,
    feedback SDD whose sign selects the eigenvalue.  The bias always points
    along the direction conjugate to the measured one (the same rule as the
    stabilization rounds).  With this module's Pauli convention the feedback
    exponent (-d, +d) for X, (0, -d) for Y and (-d, -d) for Z selects the -1
    eigenstate.
    """
    if eigenstate not in ("+X", "-X", "+Y", "-Y", "+Z", "-Z"):
        raise ValueError(f"unknown eigenstate {eigenstate!r}")
    s = -1.0 if eigenstate[0] == "+" else 1.0
    d = delta
    axis = eigenstate[1]
    if axis == "X":
        seq = [("sdd", (eps, 0.0), "Y"), ("disp", (d, 0.0), None), ("sdd", (0.0, -d), "X"), ("sdd", (-s * d, s * d), "Y")]
    elif axis == "Y":
        seq = [("sdd", (eps, eps), "Y"), ("disp", (d, 0.0), None), ("sdd", (d, -d), "X"), ("sdd", (0.0, -s * d), "Y")]
    else:
        seq = [("sdd", (0.0, eps), "Y"), ("disp", (0.0, d), None), ("sdd", (d, 0.0), "X"), ("sdd", (-s * d, -s * d), "Y")]
    return seq


def logical_init(
    ens: OscEnsemble,
    eigenstate: str,
    eps: float,
    code: CodeSpec,
    params: StabParams,
    mode: str = "exact_branching",
    rng: Optional[np.random.Generator] = None,
    recoil: Optional[RecoilSampler] = None,
    extra_cycles: int = 2,
) -> OscEnsemble:
    """Projective reset into a square-code logical eigenstate, then envelope-restoring cycles."""
    if code.name != "square":
        raise ValueError("logical initialization sequences exist only for the square code")
    seq = init_pulses(eigenstate, eps)
    branches = []
    for w, s in ens:
        _require_ground(s)
        for kind, d, axis in seq:
            s = displace(s, d, False) if kind == "disp" else cond_displace(s, d, axis, False)
        branches.append((w, s))
    moved = OscEnsemble(branches, ens.discarded)
    out = repump(check_ensemble_truncation(moved), mode, rng, recoil)
    for _ in range(extra_cycles):
        out = stabilization_cycle(out, code, params, mode, rng, recoil)
    return out


def pump_from_vacuum(
    dim: int, code: CodeSpec, params: StabParams, cycles: int, mode: str = "exact_branching", rng=None, recoil=None
) -> list[OscEnsemble]:
    """Ensembles after 0..cycles full stabilization cycles starting from the ground state."""
    ens = OscEnsemble.pure(HybridState.fock(dim, 0))
    history = [ens]
    for _ in range(cycles):
        ens = stabilization_cycle(ens, code, params, mode, rng, recoil)
        history.append(ens)
    return history


def optimize_mu(
    code: CodeSpec,
    eps: float,
    dim: int,
    mu_grid: Sequence[float],
    cycles: int = 10,
    eps_readout: Optional[float] = None,
) -> tuple[float, np.ndarray]:
    """Grid search over mu maximizing the noiseless S_z readout after ``cycles`` cycles.

    The score averages cycles ``cycles - 1`` and ``cycles``: the logical
    content left over from the vacuum flips every cycle and modulates the
    finite stabilizer readout with cycle parity.
    """
    eps_readout = eps if eps_readout is None else eps_readout
    scores = []
    for mu in mu_grid:
        hist = pump_from_vacuum(dim, code, StabParams(eps, float(mu)), cycles)
        scores.append(np.mean([stabilizer_readout(h, code, "Z", eps_readout) for h in hist[-2:]]))
    scores = np.array(scores)
    return float(mu_grid[int(np.argmax(scores))]), scores
