"""Truncated Fock-space algebra for an oscillator coupled to a two-level ancilla.

States are stored as ``(2, dim)`` complex arrays: the first index is the
ancilla (0 = |0>_S, 1 = |1>_S), the second the Fock level.

Displacements ``exp(i(c_q q + c_p p))`` are applied through the spectral
decomposition of the truncated position operator.  Because
``c_q q + c_p p = t * exp(-i phi n) q exp(i phi n)`` holds exactly inside the
truncation, every displacement costs two dense real mat-vecs and two diagonal
phases, and no per-pulse matrix exponential is ever formed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla

SQRT_PI = np.sqrt(np.pi)


class TruncationError(RuntimeError):
    """Raised when an operation pushes population into the top of the Fock space."""

    def __init__(self, leaked: float, tail_tol: float):
        super().__init__(f"population {leaked:.3e} above 0.9*dim exceeds tail_tol={tail_tol:.1e}")
        self.leaked = leaked
        self.tail_tol = tail_tol


class DegenerateProjection(RuntimeError):
    """Raised when an ancilla projection has (numerically) zero probability."""


@dataclass(frozen=True)
class FockConfig:
    dim: int = 300
    tail_tol: float = 1e-6

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"Fock dimension must be an integer >= 2, got {self.dim}")
        if not 0.0 < self.tail_tol < 1.0:
            raise ValueError(f"tail_tol must lie in (0, 1), got {self.tail_tol}")


class DisplacementExponent(NamedTuple):
    """Coefficients of the operator exp(i(c_q q + c_p p)).

    exp(i c q) shifts <p> by +c, exp(i c p) shifts <q> by -c.
    """

    c_q: float
    c_p: float

    def __add__(self, other):
        return DisplacementExponent(self.c_q + other[0], self.c_p + other[1])

    def __sub__(self, other):
        return DisplacementExponent(self.c_q - other[0], self.c_p - other[1])

    def __neg__(self):
        return DisplacementExponent(-self.c_q, -self.c_p)

    def scale(self, s: float) -> "DisplacementExponent":
        return DisplacementExponent(s * self.c_q, s * self.c_p)

    __rmul__ = scale

    def __mul__(self, s):
        return self.scale(s)

    @property
    def norm(self) -> float:
        return float(np.hypot(self.c_q, self.c_p))

    def phase_space_shift(self) -> tuple[float, float]:
        """(dq, dp) induced on a state by this displacement."""
        return (-self.c_p, self.c_q)

    @classmethod
    def from_shift(cls, dq: float, dp: float) -> "DisplacementExponent":
        return cls(dp, -dq)


def symplectic(d1: Sequence[float], d2: Sequence[float]) -> float:
    """ad - bc for exponents (a, b), (c, d); controls the commutation phase."""
    return float(d1[0] * d2[1] - d1[1] * d2[0])


@dataclass(frozen=True)
class OscOperator:
    matrix: np.ndarray
    hermitian_flag: bool = False

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("operator matrix must be square")
        if self.hermitian_flag and not np.allclose(m, m.conj().T, atol=1e-12, rtol=0):
            raise ValueError("hermitian_flag set on a non-Hermitian matrix")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _real_matmul(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    """x @ m for complex x and real m as a single real GEMM."""
    shape = x.shape
    x2 = x.reshape(-1, shape[-1])
    k = x2.shape[0]
    stacked = np.empty((2 * k, shape[-1]))
    stacked[:k] = x2.real
    stacked[k:] = x2.imag
    out = stacked @ m
    return (out[:k] + 1j * out[k:]).reshape(shape[:-1] + (m.shape[1],))


class FockSpace:
    """Immutable operator tables for one truncation dimension."""

    def __init__(self, dim: int):
        FockConfig(dim)
        self.dim = dim
        self.levels = np.arange(dim, dtype=float)
        self.sqrt_n = np.sqrt(np.arange(1, dim, dtype=float))
        a = np.diag(self.sqrt_n, k=1).astype(complex)
        self.a = a
        self.adag = a.conj().T
        self.q = (self.adag + a) / np.sqrt(2)
        self.p = 1j * (self.adag - a) / np.sqrt(2)
        self.n = np.diag(self.levels).astype(complex)
        # q is real symmetric tridiagonal: off-diagonal sqrt(n/2)
        evals, evecs = sla.eigh_tridiagonal(np.zeros(dim), self.sqrt_n / np.sqrt(2))
        self.q_eigvals = evals
        self.q_eigvecs = np.ascontiguousarray(evecs)
        self.q_eigvecs_T = np.ascontiguousarray(evecs.T)
        for arr in (self.a, self.adag, self.q, self.p, self.n, self.q_eigvals, self.q_eigvecs):
            arr.setflags(write=False)

    def _rot(self, phi: float) -> np.ndarray:
        return np.exp(1j * phi * self.levels)

    def apply_displacement(self, vecs: np.ndarray, d: Sequence[float]) -> np.ndarray:
        """exp(i(c_q q + c_p p)) applied along the last axis of ``vecs``."""
        c_q, c_p = float(d[0]), float(d[1])
        t = np.hypot(c_q, c_p)
        if t == 0.0:
            return np.array(vecs, dtype=complex, copy=True)
        phi = np.arctan2(-c_p, c_q)
        rot = self._rot(phi)
        w = vecs * rot
        w = _real_matmul(w, self.q_eigvecs)  # coefficients in the q eigenbasis
        w *= np.exp(1j * t * self.q_eigvals)
        w = _real_matmul(w, self.q_eigvecs_T)
        return w * rot.conj()

    def displacement_matrix(self, d: Sequence[float]) -> np.ndarray:
        return self.apply_displacement(np.eye(self.dim, dtype=complex), d).T

    def quadrature(self, phi: float) -> np.ndarray:
        """q_phi = cos(phi) q - sin(phi) p."""
        return np.cos(phi) * self.q - np.sin(phi) * self.p

    @lru_cache(maxsize=64)
    def squeeze_matrix(self, r: float, theta: float) -> np.ndarray:
        q_t = self.quadrature(theta)
        p_t = self.quadrature(theta - np.pi / 2)
        gen = 0.5j * r * (q_t @ p_t + p_t @ q_t)
        return sla.expm(gen)

    def operators(self) -> dict[str, OscOperator]:
        return {
            "a": OscOperator(self.a),
            "adag": OscOperator(self.adag),
            "q": OscOperator(self.q, True),
            "p": OscOperator(self.p, True),
            "n": OscOperator(self.n, True),
        }


@lru_cache(maxsize=8)
def fock_space(dim: int) -> FockSpace:
    return FockSpace(int(dim))


def build_operators(cfg: FockConfig) -> dict[str, OscOperator]:
    """Lowering/raising, quadratures and number operator for ``cfg.dim``."""
    if not isinstance(cfg, FockConfig):
        cfg = FockConfig(cfg)
    return fock_space(cfg.dim).operators()


# -- ancilla Paulis -------------------------------------------------------

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@lru_cache(maxsize=None)
def _pauli_eigbasis(phi_s: float) -> np.ndarray:
    """Columns: +1 and -1 eigenvectors of cos(phi_s) X + sin(phi_s) Y."""
    e = np.exp(1j * phi_s)
    basis = np.array([[1, 1], [e, -e]], dtype=complex) / np.sqrt(2)
    basis.setflags(write=False)
    return basis


_AXIS_PHASE = {"X": 0.0, "Y": np.pi / 2}

_BASIS_VECTORS = {
    "Z": (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)),
    "X": (np.array([1, 1], dtype=complex) / np.sqrt(2), np.array([1, -1], dtype=complex) / np.sqrt(2)),
    "Y": (np.array([1, 1j], dtype=complex) / np.sqrt(2), np.array([1, -1j], dtype=complex) / np.sqrt(2)),
}


# -- states ---------------------------------------------------------------


class HybridState:
    """Pure state of ancilla (x) truncated oscillator, shape ``(2, dim)``."""

    __slots__ = ("amps", "tail_tol", "flagged")

    def __init__(self, amps: np.ndarray, tail_tol: float = 1e-6, flagged: bool = False):
        amps = np.asarray(amps, dtype=complex)
        if amps.ndim == 1:
            amps = amps.reshape(2, -1)
        if amps.shape[0] != 2:
            raise ValueError("HybridState amplitudes must have shape (2, dim)")
        self.amps = amps
        self.tail_tol = tail_tol
        self.flagged = flagged

    @classmethod
    def from_oscillator(cls, psi: np.ndarray, ancilla: int | np.ndarray = 0, tail_tol: float = 1e-6):
        psi = np.asarray(psi, dtype=complex)
        anc = np.zeros(2, dtype=complex)
        if np.isscalar(ancilla):
            anc[int(ancilla)] = 1.0
        else:
            anc[:] = ancilla
        return cls(np.outer(anc, psi), tail_tol)

    @classmethod
    def fock(cls, dim: int, n: int = 0, tail_tol: float = 1e-6):
        psi = np.zeros(dim, dtype=complex)
        psi[n] = 1.0
        return cls.from_oscillator(psi, 0, tail_tol)

    @property
    def dim(self) -> int:
        return self.amps.shape[1]

    @property
    def flat(self) -> np.ndarray:
        """Length 2*dim vector, ancilla index slow."""
        return self.amps.reshape(-1)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amps, self.amps).real))

    def normalized(self) -> "HybridState":
        return HybridState(self.amps / self.norm, self.tail_tol, self.flagged)

    def copy(self) -> "HybridState":
        return HybridState(self.amps.copy(), self.tail_tol, self.flagged)

    def tail_population(self) -> float:
        cut = int(np.ceil(0.9 * self.dim))
        tail = self.amps[:, cut:]
        return float(np.vdot(tail, tail).real)

    def check_truncation(self) -> "HybridState":
        leaked = self.tail_population() / max(self.norm**2, 1e-300)
        if leaked > self.tail_tol:
            raise TruncationError(leaked, self.tail_tol)
        return self

    def oscillator(self, ancilla: int = 0) -> np.ndarray:
        return self.amps[ancilla]

    def ancilla_populations(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.amps.conj(), self.amps).real

    def __repr__(self):
        return f"HybridState(dim={self.dim}, anc_pop={self.ancilla_populations().round(6).tolist()})"


@dataclass
class OscEnsemble:
    """Weighted mixture of pure hybrid states."""

    branches: list[tuple[float, HybridState]] = field(default_factory=list)
    # probability removed by pruning or truncation filtering so far
    discarded: float = 0.0

    def __post_init__(self):
        if self.branches:
            total = sum(w for w, _ in self.branches)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"ensemble weights sum to {total}, expected 1")

    @classmethod
    def pure(cls, state: HybridState) -> "OscEnsemble":
        return cls([(1.0, state)])

    @classmethod
    def mixture(cls, items: Iterable[tuple[float, HybridState]]) -> "OscEnsemble":
        items = [(float(w), s) for w, s in items if w > 0]
        total = sum(w for w, _ in items)
        return cls([(w / total, s) for w, s in items])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.branches])

    def __len__(self):
        return len(self.branches)

    def __iter__(self):
        return iter(self.branches)


# -- operations -------------------------------------------------------------


def _guarded(amps: np.ndarray, like: HybridState, check: bool) -> HybridState:
    out = HybridState(amps, like.tail_tol, like.flagged)
    if check:
        out.check_truncation()
    return out


def displace(state: HybridState, d: Sequence[float], check: bool = True) -> HybridState:
    """Apply exp(i(c_q q + c_p p)) on the oscillator, identity on the ancilla."""
    space = fock_space(state.dim)
    return _guarded(space.apply_displacement(state.amps, d), state, check)


def cond_displace(state: HybridState, d: Sequence[float], axis: str | float = "X", check: bool = True) -> HybridState:
    """Apply exp(i (c_q q + c_p p) sigma) with sigma = cos(phi_s) X + sin(phi_s) Y.

    ``axis`` is "X", "Y" or the angle phi_s.
    """
    phi_s = _AXIS_PHASE[axis] if isinstance(axis, str) else float(axis)
    basis = _pauli_eigbasis(phi_s)
    space = fock_space(state.dim)
    comps = basis.conj().T @ state.amps
    comps[0] = space.apply_displacement(comps[0], d)
    comps[1] = space.apply_displacement(comps[1], (-d[0], -d[1]))
    return _guarded(basis @ comps, state, check)


def sdd(state: HybridState, gamma: float, phi_m: float, phi_s: float, check: bool = True) -> HybridState:
    """State-dependent displacement exp(-i gamma q_phi_m sigma_phi_s).

    q_phi_m = cos(phi_m) q - sin(phi_m) p, sigma_phi_s = cos(phi_s) X + sin(phi_s) Y.
    """
    d = (-gamma * np.cos(phi_m), gamma * np.sin(phi_m))
    return cond_displace(state, d, phi_s, check)


def squeeze(state: HybridState, r: float, theta: float = 0.0, check: bool = True) -> HybridState:
    """exp(i r/2 (q_theta p_theta + p_theta q_theta)); squeezes q_theta by e^{-r}."""
    if r == 0.0:
        return state.copy()
    space = fock_space(state.dim)
    s = space.squeeze_matrix(float(r), float(theta))
    return _guarded(state.amps @ s.T, state, check)


def ancilla_rotate(state: HybridState, unitary: np.ndarray) -> HybridState:
    return HybridState(unitary @ state.amps, state.tail_tol, state.flagged)


def ancilla_project(state: HybridState, basis: str, outcome: int) -> tuple[float, HybridState]:
    """Project the ancilla onto the ``outcome`` (+1/-1) eigenvector of ``basis``.

    Returns the Born probability and the renormalized post-state, whose ancilla
    is reset to |0>_S-equivalent ordering: the oscillator part is stored on the
    eigenvector itself.  A probability below 1e-14 returns a flagged state.
    """
    plus, minus = _BASIS_VECTORS[basis]
    vec = plus if outcome > 0 else minus
    osc = vec.conj() @ state.amps
    prob = float(np.vdot(osc, osc).real) / state.norm**2
    if prob < 1e-14:
        return prob, HybridState(np.outer(vec, osc), state.tail_tol, flagged=True)
    return prob, HybridState(np.outer(vec, osc) / np.sqrt(prob * state.norm**2), state.tail_tol)


def project_and_require(state: HybridState, basis: str, outcome: int) -> tuple[float, HybridState]:
    prob, post = ancilla_project(state, basis, outcome)
    if post.flagged:
        raise DegenerateProjection(f"outcome {outcome:+d} in basis {basis} has probability {prob:.2e}")
    return prob, post


def ancilla_expect(state: HybridState, pauli: str) -> float:
    m = PAULI[pauli]
    return float(np.einsum("ik,ij,jk->", state.amps.conj(), m, state.amps).real) / state.norm**2


def _expect_pure(state: HybridState, op) -> complex:
    space = fock_space(state.dim)
    if isinstance(op, OscOperator):
        if op.dim != state.dim:
            raise ValueError(f"operator dim {op.dim} != state dim {state.dim}")
        val = np.einsum("ik,kl,il->", state.amps.conj(), op.matrix, state.amps)
        if op.hermitian_flag:
            if abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
                raise ValueError(f"Hermitian expectation has imaginary residue {val.imag:.2e}")
            return complex(val.real, 0.0) / state.norm**2
        return complex(val) / state.norm**2
    moved = space.apply_displacement(state.amps, op)
    return complex(np.vdot(state.amps, moved)) / state.norm**2


def expectation(target: HybridState | OscEnsemble, op) -> complex:
    """<op> on a pure state or an ensemble; ``op`` is an OscOperator or an exponent pair."""
    if isinstance(target, OscEnsemble):
        return complex(sum(w * _expect_pure(s, op) for w, s in target))
    return _expect_pure(target, op)


def characteristic_function(target: HybridState | OscEnsemble, grid: Iterable[Sequence[float]]) -> np.ndarray:
    """chi(d) = <exp(i(c_q q + c_p p))> at every exponent in ``grid``."""
    pts = np.asarray(list(grid), dtype=float)
    out = np.zeros(len(pts), dtype=complex)
    branches = target.branches if isinstance(target, OscEnsemble) else [(1.0, target)]
    for w, s in branches:
        space = fock_space(s.dim)
        nrm = s.norm**2
        for i, d in enumerate(pts):
            moved = space.apply_displacement(s.amps, d)
            HybridState(moved, s.tail_tol).check_truncation()
            out[i] += w * np.vdot(s.amps, moved) / nrm
    return out


def fidelity(target: HybridState | OscEnsemble, psi: np.ndarray) -> float:
    """<psi| rho_osc |psi> with the ancilla traced out."""
    psi = np.asarray(psi, dtype=complex)
    branches = target.branches if isinstance(target, OscEnsemble) else [(1.0, target)]
    total = 0.0
    for w, s in branches:
        ov = s.amps @ psi.conj()
        total += w * float(np.vdot(ov, ov).real) / s.norm**2
    return total


def vacuum(dim: int, tail_tol: float = 1e-6) -> HybridState:
    return HybridState.fock(dim, 0, tail_tol)


def coherent(dim: int, dq: float, dp: float, tail_tol: float = 1e-6) -> HybridState:
    """Coherent state centred at (<q>, <p>) = (dq, dp)."""
    return displace(vacuum(dim, tail_tol), DisplacementExponent.from_shift(dq, dp))
