import numpy as np
import pytest

from gridpump.analytic import optimize_epsilon
from gridpump.config import ConfigError, config_from_mapping
from gridpump.scenarios import SCENARIO_FUNCS, Table, run_scenario

QUIET = {"enabled": False}


def run(**kw):
    return run_scenario(config_from_mapping(kw))


def test_every_scenario_is_registered():
    from gridpump.config import SCENARIOS

    assert set(SCENARIO_FUNCS) == set(SCENARIOS)


def test_noiseless_sweep_peaks_near_analytic_optimum():
    points = 41
    res = run(scenario="epsilon_sweep", noise=QUIET, dim=300, scan={"points": points})
    t = res.tables["epsilon_sweep"]
    step = 0.4 * np.sqrt(np.pi) / (points - 1)
    for k, sign in ((1, -1), (2, 1)):
        rows = [r for r in t.rows if r[0] == k]
        eps = np.array([r[1] for r in rows])
        vals = sign * np.array([r[2] for r in rows])
        closed = sign * np.array([r[4] for r in rows])
        assert abs(eps[np.argmax(vals)] - optimize_epsilon("readout", 0.37, k)) <= step
        assert np.abs(vals - closed).max() <= 0.01


def test_noiseless_onset_table():
    res = run(scenario="stabilizer_onset", noise=QUIET, dim=200, cycles=3)
    t = res.tables["stabilizer_onset"]
    assert t.columns == ("cycle", "S_z", "S_z_stderr", "S_x", "S_x_stderr")
    assert t.column("cycle") == [0, 1, 2, 3]
    assert all(s == 0.0 for s in t.column("S_z_stderr"))
    assert t.column("S_z")[-1] > 0.7


def test_charfn_of_prepared_state():
    res = run(scenario="charfn", noise=QUIET, dim=200, cycles=0, scan={"grid": 5, "extent": 4.0})
    t = res.tables["charfn"]
    assert len(t.rows) == 25
    origin = [r for r in t.rows if r[0] == 0.0 and r[1] == 0.0][0]
    assert origin[2] == pytest.approx(1.0) and origin[3] == pytest.approx(0.0, abs=1e-12)


def test_logical_init_table():
    res = run(scenario="logical_init", noise=QUIET, dim=200, scan={"pump_cycles": 2, "eigenstates": ["+X", "-X"]})
    t = res.tables["logical_init"]
    vals = {(r[0], r[1]): r[2] for r in t.rows}
    assert vals[("+X", "X")] > 0.85 and vals[("-X", "X")] < -0.85
    assert abs(vals[("+X", "Z")]) < 0.05


def test_logical_init_rejects_hexagonal():
    with pytest.raises(ConfigError):
        config_from_mapping({"scenario": "logical_init", "code": "hexagonal"})


def test_tiny_lifetimes_run():
    res = run(
        scenario="lifetimes",
        dim=120,
        n_traj=3,
        scan={"t_max": 1.2e-3, "t_max_free": 1e-3, "t_max_stab_free": 1e-3, "free_points": 4, "pump_cycles": 1, "eigenstates": ["+Z"]},
    )
    fits = res.tables["lifetimes_fits"]
    assert {(r[0], r[1]) for r in fits.rows} == {
        (o, b) for o in ("S_z", "S_x", "+Z") for b in ("unstabilized", "stabilized")
    }
    curve = res.tables["lifetimes"]
    assert set(curve.column("branch")) == {"unstabilized", "stabilized"}


def test_tiny_ramsey_run():
    res = run(scenario="ramsey", dim=30, n_traj=5, scan={"ramsey_t_max": 5e-3, "ramsey_points": 4})
    t = res.tables["ramsey"]
    assert t.column("coherence")[0] == pytest.approx(1.0)
    assert len(res.tables["ramsey_fits"].rows) == 1


def test_noisy_runs_are_reproducible():
    kw = dict(scenario="stabilizer_onset", cycles=1, dim=120, n_traj=3, seed=5, mode="sampled")
    a = run(**kw).tables["stabilizer_onset"].rows
    b = run(**kw).tables["stabilizer_onset"].rows
    assert a == b


def test_table_rejects_wrong_width():
    t = Table(("a", "b"))
    with pytest.raises(ValueError):
        t.add(1)
