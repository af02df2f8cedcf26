"""Closed-form expectations for finite square-lattice GKP states.

Everything here works on displacement products evaluated against a sum of
displaced q-squeezed vacua, never on Fock-space vectors, so it serves as an
independent check of the numerical engine.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

SQRT_PI = np.sqrt(np.pi)


class ApproximationDomainWarning(UserWarning):
    pass


def vacuum_disp_expect(A: float, B: float) -> complex:
    """<0| exp(iAq + iBp) |0> = exp(-|A + iB|^2 / 4)."""
    return complex(np.exp(-(A * A + B * B) / 4.0))


def _omega(d1, d2) -> float:
    return d1[0] * d2[1] - d1[1] * d2[0]


@dataclass(frozen=True)
class DisplacementProduct:
    """Operator product prod_j exp(i(A_j q + B_j p)) times exp(i scalar_phase).

    ``terms`` are listed left to right as written in the product.
    """

    terms: tuple[tuple[float, float], ...] = ()
    scalar_phase: float = 0.0

    def __mul__(self, other: "DisplacementProduct") -> "DisplacementProduct":
        return DisplacementProduct(self.terms + other.terms, self.scalar_phase + other.scalar_phase)

    def combined(self) -> tuple[float, float, float]:
        """(A, B, phi) with the product equal to exp(i(Aq + Bp)) exp(i phi)."""
        a = b = 0.0
        phase = self.scalar_phase
        for ta, tb in self.terms:
            # D(x) D(y) = D(x + y) exp(-i omega(x, y) / 2)
            phase -= 0.5 * _omega((a, b), (ta, tb))
            a += ta
            b += tb
        return a, b, phase

    def normal_ordered(self) -> tuple[float, float, float]:
        """(A, B, phi_AB) with the product equal to e^{iAq} e^{iBp} e^{i phi_AB}."""
        a, b, phase = self.combined()
        return a, b, phase + 0.5 * a * b


def dp(a: float, b: float = 0.0) -> DisplacementProduct:
    return DisplacementProduct(((float(a), float(b)),))


# an operator "polynomial" is a list of (complex coefficient, DisplacementProduct)
Poly = list


def poly_mul(*polys: Poly) -> Poly:
    out: Poly = [(1.0 + 0j, DisplacementProduct())]
    for poly in polys:
        out = [(c1 * c2, p1 * p2) for c1, p1 in out for c2, p2 in poly]
    return out


def cos_op(a: float, b: float = 0.0) -> Poly:
    return [(0.5, dp(a, b)), (0.5, dp(-a, -b))]


def sin_op(a: float, b: float = 0.0) -> Poly:
    return [(-0.5j, dp(a, b)), (0.5j, dp(-a, -b))]


def scale_poly(c: complex, poly: Poly) -> Poly:
    return [(c * k, p) for k, p in poly]


@dataclass(frozen=True)
class EnvelopeState:
    """N sum_s exp(-kappa^2 x_s^2 / 2) exp(-i x_s p) S(r)|0>, x_s = (2s + z) l."""

    kappa: float
    lattice_step: float = SQRT_PI
    z: int = 0
    s_max: int = field(default=0)

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("kappa must lie in (0, 1)")
        if self.lattice_step <= 0:
            raise ValueError("lattice step must be positive")
        if self.z not in (0, 1):
            raise ValueError("z must be 0 or 1")
        if self.s_max <= 0:
            s_max = int(np.ceil(np.sqrt(2 * 18.5) / (2 * self.kappa * self.lattice_step))) + 2
            object.__setattr__(self, "s_max", s_max)

    def positions(self) -> np.ndarray:
        s = np.arange(-self.s_max, self.s_max + 1)
        return (2 * s + self.z) * self.lattice_step

    def amplitudes(self) -> np.ndarray:
        x = self.positions()
        return np.exp(-0.5 * (self.kappa * x) ** 2)


def _sq_vac_expect(a: float, b: float, kappa: float) -> complex:
    # S(r)^dag q S(r) = kappa q, S(r)^dag p S(r) = p / kappa
    return vacuum_disp_expect(a * kappa, b / kappa)


def gkp_expect(env: EnvelopeState, op: DisplacementProduct | Poly, exact: bool = False) -> complex:
    """<op> on a finite GKP state.

    By default only the diagonal s = s' terms are kept and the normalisation
    is N^2 = 1 / sum_s w_s^2 (neighbouring peaks assumed non-overlapping).
    ``exact=True`` evaluates the full double sum with exact normalisation.
    """
    if isinstance(op, list):
        return sum(c * gkp_expect(env, p, exact) for c, p in op)
    a, b, phase = op.combined()
    if not exact and abs(b) >= env.lattice_step:
        warnings.warn(
            f"p-coefficient {b:.3f} >= lattice step {env.lattice_step:.3f}; diagonal approximation unreliable",
            ApproximationDomainWarning,
            stacklevel=2,
        )
    x = env.positions()
    w = env.amplitudes()
    kappa = env.kappa
    if not exact:
        # <sq| D(-x)^+ ... : exp(i x p) moves q by -x; conj. of exp(iaq) gives exp(-i a x)
        vals = w**2 * np.exp(-1j * a * x) * _sq_vac_expect(a, b, kappa)
        return complex(np.exp(1j * phase) * vals.sum() / (w**2).sum())
    # exact: <sq| e^{i x' p}... with translation operators T(x) = exp(-i x p)
    total = 0j
    norm = 0.0
    for xs, ws in zip(x, w):
        for xt, wt in zip(x, w):
            # T(xt)^dag op T(xs) = D(0, xt) D(a, b) D(0, -xs)
            prod = DisplacementProduct(((0.0, xt), (a, b), (0.0, -xs)), phase)
            ca, cb, cph = prod.combined()
            total += wt * ws * np.exp(1j * cph) * _sq_vac_expect(ca, cb, kappa)
            n_prod = DisplacementProduct(((0.0, xt), (0.0, -xs)))
            na, nb, nph = n_prod.combined()
            norm += (wt * ws * np.exp(1j * nph) * _sq_vac_expect(na, nb, kappa)).real
    return complex(total / norm)


# -- finite measurement closed forms ----------------------------------------


def expect_Y_biased(k: int, kappa: float, eps: float, chi: float, z: int = 0) -> float:
    """<Y>_{eps,chi} = (-1)^{kz} e^{-pi k^2 kappa^2/4} sin(k sqrt(pi) chi) [e^{-eps^2/kappa^2} + sin(k sqrt(pi) eps)]."""
    pref = (-1) ** (k * z) * np.exp(-np.pi * k * k * kappa * kappa / 4.0)
    return float(pref * np.sin(k * SQRT_PI * chi) * (np.exp(-eps * eps / kappa**2) + np.sin(k * SQRT_PI * eps)))


def readout_biased(k: int, kappa: float, eps: float, z: int = 0) -> float:
    """Cosine-form (readout) value at zero displacement error."""
    pref = (-1) ** (k * z) * np.exp(-np.pi * k * k * kappa * kappa / 4.0)
    return float(pref * (np.exp(-eps * eps / kappa**2) + np.sin(k * SQRT_PI * abs(eps))))


def preservation_fidelity(kappa: float, eps: float) -> float:
    """F = e^{-pi kappa^2/2} (e^{-eps^2/kappa^2} + sin(eps sqrt(pi)))^2 with mu = eps."""
    return float(np.exp(-np.pi * kappa**2 / 2.0) * (np.exp(-eps * eps / kappa**2) + np.sin(eps * SQRT_PI)) ** 2)


def measurement_operator(k: int, eps: float, basis: str = "readout") -> Poly:
    """Oscillator operator measured by exp(i alpha q X) exp(i eps p Y) on |0>_S.

    alpha = k sqrt(pi)/2.  ``readout`` projects the ancilla on Z, ``error_signal``
    on Y.  Returned as a displacement-product polynomial.
    """
    alpha = k * SQRT_PI / 2.0
    c, s = cos_op(0.0, eps), sin_op(0.0, eps)
    C, S = cos_op(2 * alpha), sin_op(2 * alpha)
    if basis == "readout":
        # c C c - s C s - i c S s + i s S c
        return (
            poly_mul(c, C, c)
            + scale_poly(-1, poly_mul(s, C, s))
            + scale_poly(-1j, poly_mul(c, S, s))
            + scale_poly(1j, poly_mul(s, S, c))
        )
    if basis == "error_signal":
        # c S c - s S s + i c C s - i s C c
        return (
            poly_mul(c, S, c)
            + scale_poly(-1, poly_mul(s, S, s))
            + scale_poly(1j, poly_mul(c, C, s))
            + scale_poly(-1j, poly_mul(s, C, c))
        )
    raise ValueError(f"unknown basis {basis!r}")


def readout_single_sum(k: int, kappa: float, eps: float, z: int = 0, exact: bool = False) -> float:
    """Readout evaluated term by term on the envelope state (no closed-form step)."""
    env = EnvelopeState(kappa, SQRT_PI, z)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ApproximationDomainWarning)
        return float(gkp_expect(env, measurement_operator(k, eps), exact).real)


# -- epsilon optimisation ------------------------------------------------------


def _objective(kind: str, k: int, kappa: float) -> Callable[[float], float]:
    if kind == "readout":
        return lambda e: readout_biased(k, kappa, e, 0)
    if kind == "preservation":
        return lambda e: preservation_fidelity(kappa, e)
    raise ValueError(f"unknown objective {kind!r}")


def optimize_epsilon(objective: str, kappa: float, k: int = 1, tol: float = 1e-6) -> float:
    """Maximise the chosen closed form over eps in [0, 3 kappa].

    A coarse scan checks unimodality; golden-section search refines the
    bracketing maximum.  If the scan finds several local maxima the best grid
    point of a dense scan is returned instead.
    """
    if not 0.05 <= kappa <= 0.8:
        raise ValueError(f"kappa={kappa} outside the supported range [0.05, 0.8]")
    f = _objective(objective, k, kappa)
    hi = 3.0 * kappa
    grid = np.linspace(0.0, hi, 201)
    vals = np.array([f(e) for e in grid])
    interior = (vals[1:-1] > vals[:-2]) & (vals[1:-1] >= vals[2:])
    if interior.sum() > 1:
        dense = np.linspace(0.0, hi, 20001)
        return float(dense[np.argmax([f(e) for e in dense])])
    i = int(np.argmax(vals))
    lo_b, hi_b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if i == 0 or i == len(grid) - 1:
        return float(grid[i])
    res = optimize.minimize_scalar(lambda e: -f(e), bracket=(lo_b, grid[i], hi_b), method="golden", tol=tol)
    return float(res.x)


def eps_opt_units(eps: float) -> float:
    """eps expressed in units of 2 sqrt(pi)."""
    return float(eps / (2 * SQRT_PI))
