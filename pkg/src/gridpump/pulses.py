"""Pulse primitives and ordered pulse sequences.

Sequences are stored in time order (first element acts first), i.e. the
reverse of operator-product notation exp(..)exp(..), where the rightmost factor acts first.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Union

from .hilbert import HybridState, cond_displace, displace, squeeze


@dataclass(frozen=True)
class CondDisplacement:
    """exp(i(c_q q + c_p p) sigma), sigma in {X, Y}."""

    exponent: tuple[float, float]
    axis: str = "X"
    duration: float = 0.0
    kind: str = field(default="sdd", init=False)

    def apply(self, state: HybridState, check: bool = True) -> HybridState:
        return cond_displace(state, self.exponent, self.axis, check)


@dataclass(frozen=True)
class Displacement:
    """Global (ancilla-independent) displacement exp(i(c_q q + c_p p))."""

    exponent: tuple[float, float]
    duration: float = 0.0
    kind: str = field(default="disp", init=False)

    def apply(self, state: HybridState, check: bool = True) -> HybridState:
        return displace(state, self.exponent, check)


@dataclass(frozen=True)
class Squeeze:
    r: float
    theta: float = 0.0
    duration: float = 0.0
    kind: str = field(default="squeeze", init=False)

    def apply(self, state: HybridState, check: bool = True) -> HybridState:
        return squeeze(state, self.r, self.theta, check)


@dataclass(frozen=True)
class Project:
    """Ancilla projection; ``outcome=+1`` on Z is the dark (|0>_S) result."""

    basis: str = "Z"
    outcome: int = 1
    duration: float = 0.0
    kind: str = field(default="project", init=False)


@dataclass(frozen=True)
class Repump:
    """Optical pumping of the ancilla back to |0>_S, with photon recoil."""

    duration: float = 10e-6
    kind: str = field(default="repump", init=False)


Pulse = Union[CondDisplacement, Displacement, Squeeze, Project, Repump]

_KINDS = {"sdd": CondDisplacement, "disp": Displacement, "squeeze": Squeeze, "project": Project, "repump": Repump}


@dataclass
class PulseSequence:
    pulses: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.pulses)

    def __len__(self):
        return len(self.pulses)

    def __add__(self, other: "PulseSequence") -> "PulseSequence":
        return PulseSequence(list(self.pulses) + list(other.pulses))

    @property
    def duration(self) -> float:
        return sum(p.duration for p in self.pulses)

    def unitary_part(self) -> "PulseSequence":
        return PulseSequence([p for p in self.pulses if hasattr(p, "apply")])

    def apply_unitaries(self, state: HybridState, check: bool = True) -> HybridState:
        """Apply every unitary pulse in order; raises on projections/repumps."""
        for p in self.pulses:
            if not hasattr(p, "apply"):
                raise TypeError(f"pulse of kind {p.kind!r} is not unitary")
            state = p.apply(state, check)
        return state

    def to_list(self) -> list[dict]:
        return [asdict(p) for p in self.pulses]

    @classmethod
    def from_list(cls, items: Iterable[dict]) -> "PulseSequence":
        pulses = []
        for item in items:
            item = dict(item)
            kind = item.pop("kind")
            if "exponent" in item:
                item["exponent"] = tuple(float(x) for x in item["exponent"])
            pulses.append(_KINDS[kind](**item))
        return cls(pulses)
