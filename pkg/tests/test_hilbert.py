import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridpump.codes import code_state, make_code, r_from_db
from gridpump.hilbert import (
    SQRT_PI,
    DisplacementExponent,
    FockConfig,
    HybridState,
    OscEnsemble,
    TruncationError,
    ancilla_expect,
    ancilla_project,
    build_operators,
    characteristic_function,
    coherent,
    cond_displace,
    displace,
    expectation,
    fidelity,
    fock_space,
    sdd,
    squeeze,
    symplectic,
    vacuum,
)

DIM = 120
small = st.floats(-1.5, 1.5, allow_nan=False)


def _variance(state, name):
    ops = build_operators(FockConfig(state.dim))
    m = ops[name].matrix
    mean = expectation(state, ops[name]).real
    return expectation(state, type(ops[name])(m @ m, True)).real - mean**2


def test_fock_config_rejects_small_dim():
    with pytest.raises(ValueError):
        FockConfig(dim=1)
    with pytest.raises(ValueError):
        FockConfig(dim=10, tail_tol=0.0)


def test_lowering_operator_dim2():
    a = build_operators(FockConfig(2))["a"].matrix
    np.testing.assert_allclose(a, [[0, 1], [0, 0]])


def test_position_matrix_element():
    q = build_operators(FockConfig(10))["q"].matrix
    assert q[1, 0] == pytest.approx(1 / np.sqrt(2))


def test_canonical_commutator_below_cutoff():
    ops = build_operators(FockConfig(50))
    q, p = ops["q"].matrix, ops["p"].matrix
    comm = q @ p - p @ q
    assert comm[5, 5] == pytest.approx(1j)
    np.testing.assert_allclose(np.diag(comm)[:-1], 1j, atol=1e-12)


def test_zero_displacement_is_identity():
    s = coherent(DIM, 0.7, -0.3)
    np.testing.assert_allclose(displace(s, (0.0, 0.0)).amps, s.amps, atol=1e-14)


def test_vacuum_displacement_overlap_example():
    assert expectation(vacuum(DIM), (1.0, 1.0)).real == pytest.approx(np.exp(-0.5), abs=1e-10)


@given(small, small)
@settings(max_examples=30, deadline=None)
def test_vacuum_displacement_overlap(A, B):
    val = expectation(vacuum(DIM), (A, B))
    assert val == pytest.approx(np.exp(-(A * A + B * B) / 4), abs=1e-10)


def test_position_generator_shifts_momentum():
    p = build_operators(FockConfig(DIM))["p"]
    s = displace(vacuum(DIM), (SQRT_PI, 0.0))
    assert expectation(s, p).real == pytest.approx(SQRT_PI, abs=1e-9)


def test_from_shift_places_coherent_state():
    ops = build_operators(FockConfig(DIM))
    s = coherent(DIM, 1.2, -0.4)
    assert expectation(s, ops["q"]).real == pytest.approx(1.2, abs=1e-9)
    assert expectation(s, ops["p"]).real == pytest.approx(-0.4, abs=1e-9)
    d = DisplacementExponent.from_shift(1.2, -0.4)
    assert d.phase_space_shift() == pytest.approx((1.2, -0.4))


@given(small, small, small, small)
@settings(max_examples=30, deadline=None)
def test_displacement_composition_phase(a, b, c, d):
    s = coherent(DIM, 0.3, 0.2)
    two = displace(displace(s, (c, d)), (a, b))
    one = displace(s, (a + c, b + d))
    phase = np.exp(-0.5j * symplectic((a, b), (c, d)))
    np.testing.assert_allclose(two.amps, phase * one.amps, atol=1e-9)


@given(small, small)
@settings(max_examples=20, deadline=None)
def test_displacement_preserves_norm(a, b):
    s = displace(coherent(DIM, -0.5, 0.8), (a, b))
    assert s.norm == pytest.approx(1.0, abs=1e-10)


def test_truncation_guard_reports_leak():
    with pytest.raises(TruncationError) as info:
        displace(vacuum(20), (6.0, 0.0))
    assert info.value.leaked > info.value.tail_tol


def test_squeeze_zero_is_identity():
    s = coherent(DIM, 0.4, 0.1)
    np.testing.assert_allclose(squeeze(s, 0.0).amps, s.amps)


def test_squeeze_position_variance_at_8p9_db():
    r = r_from_db(8.9)
    assert r == pytest.approx(8.9 * np.log(10) / 20)
    assert np.exp(-r) == pytest.approx(0.359, abs=1e-3)
    s = squeeze(vacuum(DIM), r)
    assert _variance(s, "q") == pytest.approx(np.exp(-2 * r) / 2, abs=1e-8)


def test_squeeze_rotated_quadrature():
    r = 0.6
    s = squeeze(vacuum(DIM), r, np.pi / 2)
    assert _variance(s, "p") == pytest.approx(np.exp(-2 * r) / 2, abs=1e-8)
    assert _variance(s, "q") == pytest.approx(np.exp(2 * r) / 2, abs=1e-8)


def test_sdd_zero_is_identity():
    s = coherent(DIM, 0.2, 0.3)
    np.testing.assert_allclose(sdd(s, 0.0, 0.3, 0.0).amps, s.amps, atol=1e-14)


@given(st.floats(0.0, 1.5))
@settings(max_examples=20, deadline=None)
def test_sdd_ancilla_z_on_vacuum(gamma):
    s = sdd(vacuum(DIM), gamma, 0.0, 0.0)
    assert ancilla_expect(s, "Z") == pytest.approx(np.exp(-gamma**2), abs=1e-9)


def test_position_conditioned_y_signal_vanishes_on_vacuum():
    s = cond_displace(vacuum(DIM), (0.8, 0.0), "X")
    assert ancilla_expect(s, "Y") == pytest.approx(0.0, abs=1e-12)


def test_project_ground_on_z():
    s = coherent(DIM, 0.3, 0.0)
    prob, post = ancilla_project(s, "Z", +1)
    assert prob == pytest.approx(1.0)
    np.testing.assert_allclose(post.amps, s.amps, atol=1e-14)


@pytest.mark.parametrize("outcome", [+1, -1])
def test_project_ground_on_y_is_even(outcome):
    prob, post = ancilla_project(vacuum(DIM), "Y", outcome)
    assert prob == pytest.approx(0.5)
    assert post.norm == pytest.approx(1.0)


def test_project_zero_probability_flags():
    prob, post = ancilla_project(vacuum(DIM), "Z", -1)
    assert prob == 0.0 and post.flagged


def test_y_signal_on_one_logical_vanishes():
    code = make_code("square", 0.37)
    s = cond_displace(code_state(code, "-Z", FockConfig(200)), (SQRT_PI / 2, 0.0), "X")
    assert ancilla_expect(s, "Y") == pytest.approx(0.0, abs=1e-6)


def test_number_expectation_on_vacuum():
    n = build_operators(FockConfig(DIM))["n"]
    assert expectation(vacuum(DIM), n).real == 0.0


def test_stabilizer_expectation_on_one_logical():
    kappa = 0.37
    code = make_code("square", kappa)
    s = code_state(code, "-Z", FockConfig(200))
    assert expectation(s, code.stab_z).real == pytest.approx(np.exp(-np.pi * kappa**2), abs=0.01)


def test_characteristic_function_vacuum():
    grid = [(0.0, 0.0), (1.0, 0.5), (-2.0, 1.0)]
    chi = characteristic_function(vacuum(DIM), grid)
    np.testing.assert_allclose(chi, [np.exp(-(a * a + b * b) / 4) for a, b in grid], atol=1e-10)


def test_characteristic_function_origin_is_one():
    s = coherent(DIM, 1.0, -0.7)
    assert characteristic_function(s, [(0.0, 0.0)])[0] == pytest.approx(1.0)


def test_characteristic_function_peaks_on_lattice():
    code = make_code("square", 0.37)
    s = code_state(code, "+Z", FockConfig(200))
    line = np.linspace(0.5 * SQRT_PI, 3.0 * SQRT_PI, 101)
    step = line[1] - line[0]
    along_x = np.abs(characteristic_function(s, [(0.0, -c) for c in line]))
    along_z = np.abs(characteristic_function(s, [(c, 0.0) for c in line]))
    assert abs(line[np.argmax(along_x)] - code.stab_x.norm) <= step
    peaks_z = [line[i] for i in range(1, len(line) - 1) if along_z[i] >= along_z[i - 1] and along_z[i] >= along_z[i + 1]]
    # the envelope pulls |chi| maxima slightly towards the origin
    np.testing.assert_allclose(np.array(peaks_z) / SQRT_PI, [1.0, 2.0, 3.0], atol=0.1)


def test_ensemble_expectation_and_fidelity():
    a, b = coherent(DIM, 1.0, 0.0), coherent(DIM, -1.0, 0.0)
    ens = OscEnsemble.mixture([(1.0, a), (3.0, b)])
    q = build_operators(FockConfig(DIM))["q"]
    assert expectation(ens, q).real == pytest.approx(0.25 - 0.75, abs=1e-9)
    assert fidelity(ens, a.amps[0]) == pytest.approx(0.25 + 0.75 * np.exp(-2.0), abs=1e-9)


def test_ensemble_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        OscEnsemble([(0.5, vacuum(10))])


def test_displacement_matrix_is_unitary_inside_truncation():
    space = fock_space(80)
    D = space.displacement_matrix((0.9, -0.4))
    inner = (D.conj().T @ D)[:40, :40]
    np.testing.assert_allclose(inner, np.eye(40), atol=1e-10)


def test_hybrid_state_shape_check():
    with pytest.raises(ValueError):
        HybridState(np.zeros((3, 4)))
