"""Square and hexagonal GKP codes, finite code states and measurement-free preparation."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .hilbert import (
    SQRT_PI,
    DisplacementExponent,
    FockConfig,
    HybridState,
    ancilla_project,
    fock_space,
    squeeze,
    symplectic,
)
from .pulses import CondDisplacement, Displacement, Project, PulseSequence, Squeeze

# lattice cell of area 4*pi at a relative angle of 2*pi/3
HEX_STABILIZER_AMPLITUDE = 2.0 * np.sqrt(2.0 * np.pi / np.sqrt(3.0))
# amplitude as printed for the hexagonal code; equals the logical (half) amplitude
HEX_PRINTED_ALPHA = SQRT_PI * np.sqrt(2.0 / np.sqrt(3.0))
HEX_ANGLE = 2.0 * np.pi / 3.0

EIGENSTATES = ("+X", "-X", "+Y", "-Y", "+Z", "-Z")


def r_from_db(db: float) -> float:
    return db * np.log(10.0) / 20.0


def kappa_from_db(db: float) -> float:
    return float(np.exp(-r_from_db(db)))


KAPPA_8P9DB = kappa_from_db(8.9)


@dataclass(frozen=True)
class CodeSpec:
    name: str
    stab_z: DisplacementExponent
    stab_x: DisplacementExponent
    logical_z: DisplacementExponent
    logical_x: DisplacementExponent
    logical_y: DisplacementExponent
    kappa: float

    def logical(self, which: str) -> DisplacementExponent:
        return {"X": self.logical_x, "Y": self.logical_y, "Z": self.logical_z}[which.upper()]

    def stabilizer(self, which: str) -> DisplacementExponent:
        return {"X": self.stab_x, "Z": self.stab_z}[which.upper()]

    def check(self) -> None:
        if not 0.0 < self.kappa < 1.0:
            raise ValueError(f"kappa must lie in (0, 1), got {self.kappa}")
        w_s = symplectic(self.stab_z, self.stab_x) / (2 * np.pi)
        if abs(w_s - round(w_s)) > 1e-9:
            raise ValueError("stabilizers do not commute")
        w_l = symplectic(self.logical_z, self.logical_x) / np.pi
        if abs(w_l - round(w_l)) > 1e-9 or round(w_l) % 2 == 0:
            raise ValueError("logical operators do not anticommute")
        for half, full in ((self.logical_z, self.stab_z), (self.logical_x, self.stab_x)):
            if not np.allclose(np.multiply(half, 2), full, atol=1e-12):
                raise ValueError("logical exponents must be half the stabilizer exponents")
        if not np.allclose(self.logical_x + self.logical_z, self.logical_y, atol=1e-12):
            raise ValueError("logical_y must equal logical_x + logical_z")

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "CodeSpec":
        fields = {k: DisplacementExponent(*v) if isinstance(v, (list, tuple)) else v for k, v in d.items()}
        spec = cls(**fields)
        spec.check()
        return spec


def make_code(name: str, kappa: float = KAPPA_8P9DB) -> CodeSpec:
    """Square code: S_z = e^{2 sqrt(pi) i q}, S_x = e^{-2 sqrt(pi) i p}.

    Hexagonal code: S_z = e^{i A q}, S_x = e^{i A q_{2pi/3}} with A chosen so the
    stabilizers commute (cell area 4 pi).
    """
    if name == "square":
        sz = DisplacementExponent(2 * SQRT_PI, 0.0)
        sx = DisplacementExponent(0.0, -2 * SQRT_PI)
    elif name == "hexagonal":
        a = HEX_STABILIZER_AMPLITUDE
        sz = DisplacementExponent(a, 0.0)
        sx = DisplacementExponent(a * np.cos(HEX_ANGLE), -a * np.sin(HEX_ANGLE))
    else:
        raise ValueError(f"unknown code {name!r}; expected 'square' or 'hexagonal'")
    lz, lx = sz.scale(0.5), sx.scale(0.5)
    spec = CodeSpec(name, sz, sx, lz, lx, lx + lz, float(kappa))
    spec.check()
    return spec


def envelope_cutoff(kappa: float, step: float, tol: float = 1e-8) -> int:
    """Largest |m| whose envelope amplitude exp(-kappa^2 (m step)^2 / 2) is >= tol."""
    return int(np.ceil(np.sqrt(-2.0 * np.log(tol)) / (kappa * step)))


def _grid_sum(code: CodeSpec, z: int, cfg: FockConfig) -> np.ndarray:
    space = fock_space(cfg.dim)
    r = -np.log(code.kappa)
    seed = squeeze(HybridState.fock(cfg.dim, 0, cfg.tail_tol), r).amps[0]
    lx = code.logical_x
    step = abs(lx.phase_space_shift()[0])
    m_max = envelope_cutoff(code.kappa, step)
    psi = np.zeros(cfg.dim, dtype=complex)
    for m in range(-m_max, m_max + 1):
        if (m - z) % 2:
            continue
        w = np.exp(-0.5 * (code.kappa * m * step) ** 2)
        psi += w * space.apply_displacement(seed, lx.scale(m))
    return psi / np.linalg.norm(psi)


def ideal_gkp_state(code: CodeSpec, z: int, cfg: FockConfig | None = None) -> HybridState:
    """Finite computational-basis state |z_L> with the ancilla in |0>_S.

    Envelope-weighted superposition of q-squeezed vacua translated by
    multiples of the logical X displacement; amplitudes
    exp(-kappa^2 dq^2 / 2) for a translation dq along q.
    """
    cfg = cfg or FockConfig()
    if z not in (0, 1):
        raise ValueError("z must be 0 or 1")
    state = HybridState.from_oscillator(_grid_sum(code, z, cfg), 0, cfg.tail_tol)
    return state.check_truncation()


def code_state(code: CodeSpec, eigenstate: str, cfg: FockConfig | None = None) -> HybridState:
    """Finite +/-1 eigenstate of X_L, Y_L or Z_L (e.g. "+X", "-Z")."""
    cfg = cfg or FockConfig()
    if eigenstate not in EIGENSTATES:
        raise ValueError(f"unknown eigenstate {eigenstate!r}")
    sign, axis = (1 if eigenstate[0] == "+" else -1), eigenstate[1]
    zero, one = _grid_sum(code, 0, cfg), _grid_sum(code, 1, cfg)
    if axis == "Z":
        psi = zero if sign > 0 else one
    elif axis == "X":
        psi = zero + sign * one
    else:
        psi = zero + sign * 1j * one
    psi = psi / np.linalg.norm(psi)
    return HybridState.from_oscillator(psi, 0, cfg.tail_tol).check_truncation()


# -- measurement-free preparation -------------------------------------------

ALPHA_GRID = 2 * SQRT_PI
PREP_ALPHAS = (ALPHA_GRID, 0.031 * ALPHA_GRID, 0.5 * ALPHA_GRID, 0.125 * ALPHA_GRID)

_HEX_LAMBDA = np.sqrt(2.0 / np.sqrt(3.0))
PREP_TABLE = {
    ("square", "-X"): (np.pi / 2, 1.0),
    ("square", "-Y"): (np.pi / 4, np.sqrt(2.0)),
    ("square", "-Z"): (0.0, 1.0),
    ("hexagonal", "-X"): (2 * np.pi / 3, _HEX_LAMBDA),
    ("hexagonal", "-Y"): (np.pi / 3, _HEX_LAMBDA),
    ("hexagonal", "-Z"): (0.0, _HEX_LAMBDA),
}


@dataclass(frozen=True)
class PrepParams:
    theta: float
    lam: float
    betas: tuple[float, float, float, float]
    phis: tuple[float, float, float, float]

    @classmethod
    def from_table(cls, theta: float, lam: float) -> "PrepParams":
        a1, a2, a3, a4 = PREP_ALPHAS
        betas = (a1 / lam, lam * a2, a3 / lam, lam * a4)
        phis = (np.pi / 2 + theta, theta, -np.pi / 2 + theta, np.pi + theta)
        return cls(theta, lam, betas, phis)


def prep_params(code: CodeSpec, eigenstate: str) -> PrepParams:
    key = (code.name, "-" + eigenstate[1])
    if eigenstate not in EIGENSTATES or key not in PREP_TABLE:
        raise ValueError(f"unsupported eigenstate {eigenstate!r} for code {code.name!r}")
    return PrepParams.from_table(*PREP_TABLE[key])


def prep_sequence(code: CodeSpec, eigenstate: str, squeezing_db: float = 8.9) -> PulseSequence:
    """Squeeze, four state-dependent displacements, then a dark-detection projection.

    The pulses realise exp(i b4 q_f4 Y) exp(-i b3 q_f3 X) exp(i b2 q_f2 Y) exp(-i b1 q_f1 X)
    on a q_theta-squeezed vacuum.  The X-conditioned pulses carry the opposite
    sign to the tabulated form so that, with this module's Pauli convention, the
    ancilla is left in |0>_S and the oscillator in the even-parity grid state.
    +1 eigenstates append a global displacement by the anticommuting logical
    operator, which flips the eigenvalue.
    """
    pp = prep_params(code, eigenstate)
    pulses = [Squeeze(r_from_db(squeezing_db), pp.theta)]
    for beta, phi, axis in zip(pp.betas, pp.phis, ("X", "Y", "X", "Y")):
        sign = -1.0 if axis == "X" else 1.0
        pulses.append(CondDisplacement((sign * beta * np.cos(phi), -sign * beta * np.sin(phi)), axis))
    pulses.append(Project("Z", +1))
    if eigenstate[0] == "+":
        flip = code.logical_x if eigenstate[1] == "Z" else code.logical_z
        pulses.append(Displacement(tuple(flip)))
    return PulseSequence(pulses)


def run_prep(
    code: CodeSpec, eigenstate: str, cfg: FockConfig | None = None, squeezing_db: float = 8.9
) -> tuple[float, HybridState]:
    """Run the preparation from the oscillator ground state; returns (P(dark), state)."""
    cfg = cfg or FockConfig()
    state = HybridState.fock(cfg.dim, 0, cfg.tail_tol)
    prob = 1.0
    for p in prep_sequence(code, eigenstate, squeezing_db):
        if p.kind == "project":
            pr, state = ancilla_project(state, p.basis, p.outcome)
            prob *= pr
        else:
            state = p.apply(state)
    return prob, state
