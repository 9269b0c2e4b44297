import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dartwin import corpus
from dartwin import model as m
from dartwin.sim import (
    BindingError,
    FireProtectionState,
    GoalEvaluationError,
    KineticLimits,
    PlantParams,
    Scenario,
    ScenarioError,
    Timeline,
    Trace,
    arbiter_min,
    arbiter_strictest,
    bind_behaviors,
    check_price_table,
    cost_saving_setpoint,
    energy_saving_setpoint,
    evaluate_goals,
    false_runs,
    fire_protection_step,
    freeze_protection_command,
    parse_scenario,
    run,
    thermostat_command,
)

finite = st.floats(-50, 50, allow_nan=False)


# -- behaviors -----------------------------------------------------------------


def test_thermostat_examples():
    assert thermostat_command(18.0, 21.0, 1.0, False) is True
    assert thermostat_command(21.0, 21.0, 1.0, True) is True
    assert thermostat_command(21.0, 21.0, 1.0, False) is False
    assert thermostat_command(23.0, 21.0, 1.0, True) is False


def _band_machine(room, comfort, d, prev):
    # Oracle: classify the reading into a band, then apply a transition table.
    band = "low" if room < comfort - d else "high" if room > comfort + d else "mid"
    table = {("low", False): True, ("low", True): True, ("high", False): False, ("high", True): False}
    return table.get((band, prev), prev)


def test_thermostat_matches_band_machine_on_grid():
    for room in np.arange(15.0, 27.0, 0.25):
        for d in (0.25, 0.5, 1.0, 2.0):
            for prev in (False, True):
                assert thermostat_command(room, 21.0, d, prev) == _band_machine(room, 21.0, d, prev)


@settings(max_examples=200)
@given(st.lists(finite, min_size=2, max_size=60), st.floats(-10, 30), st.floats(0.05, 5))
def test_thermostat_no_chatter(rooms, comfort, d):
    cmd = False
    for room in rooms:
        new = thermostat_command(room, comfort, d, cmd)
        if new != cmd:
            assert (new and room < comfort - d) or (not new and room > comfort + d)
        cmd = new


def test_energy_saving_examples():
    assert energy_saving_setpoint(21, True, True, -2, -4) == 21
    assert energy_saving_setpoint(21, True, False, -2, -4) == 21
    day = energy_saving_setpoint(21, False, True, -2, -4)
    night = energy_saving_setpoint(21, False, False, -2, -4)
    assert (day, night) == (19, 17) and night <= day


def test_freeze_protection_examples():
    assert freeze_protection_command(5.0, False, 8.0) is True
    assert freeze_protection_command(20.0, True, 8.0) is True
    assert freeze_protection_command(20.0, False, 8.0) is False
    assert freeze_protection_command(8.0, False, 8.0) is True


def _fire_run(upstream, step, max_on, cooloff):
    state, out = FireProtectionState(), []
    for u in upstream:
        cmd, state = fire_protection_step(u, state, step, max_on, cooloff)
        out.append(cmd)
    return out, state


def test_fire_protection_cuts_after_max_on():
    out, _ = _fire_run([True] * 61, 60.0, 3600.0, 600.0)
    assert out[:60] == [True] * 60 and out[60] is False


def test_fire_protection_off_stays_off():
    out, state = _fire_run([False] * 100, 60.0, 3600.0, 600.0)
    assert not any(out)
    assert state.on_time == 0.0 and state.cooling == 0.0


def _runs(bits):
    runs, cur = [], 0
    for b in bits:
        cur = cur + 1 if b else 0
        runs.append(cur)
    return max(runs, default=0)


@settings(max_examples=200)
@given(
    st.lists(st.booleans(), min_size=1, max_size=300),
    st.sampled_from([10.0, 30.0, 60.0]),
    st.floats(60, 3600),
    st.floats(10, 1200),
)
def test_fire_protection_on_run_bound(upstream, step, max_on, cooloff):
    out, _ = _fire_run(upstream, step, max_on, cooloff)
    assert _runs(out) * step <= max_on
    assert all(u or not o for u, o in zip(upstream, out))  # never switches on by itself


@settings(max_examples=100)
@given(st.sampled_from([10.0, 60.0]), st.floats(120, 1800), st.floats(10, 1200))
def test_fire_protection_cooloff_length(step, max_on, cooloff):
    n = int(max_on // step) + 1 + int(math.ceil(cooloff / step)) + 2
    out, _ = _fire_run([True] * n, step, max_on, cooloff)
    first_off = out.index(False)
    resumed = out.index(True, first_off)
    assert (resumed - first_off) * step >= cooloff


def test_cost_saving_examples():
    assert cost_saving_setpoint(0.5, 21, [(1.0, -1), (2.0, -3)]) == 21
    assert cost_saving_setpoint(2.5, 21, [(1.0, -1), (2.0, -3)]) == 18
    assert cost_saving_setpoint(1.0, 21, [(1.0, -1), (2.0, -3)]) == 20


@pytest.mark.parametrize("table", [[(2.0, -1), (1.0, -2)], [(1.0, -2), (2.0, -1)], [(1.0, 1.0)], [(1.0, -1), (1.0, -2)]])
def test_cost_saving_malformed_tables(table):
    with pytest.raises(ValueError, match="malformed table"):
        check_price_table(table)


@st.composite
def price_tables(draw):
    n = draw(st.integers(1, 5))
    thresholds = sorted(set(draw(st.lists(st.floats(0, 2), min_size=n, max_size=n))))
    deltas = sorted(draw(st.lists(st.floats(-6, 0), min_size=len(thresholds), max_size=len(thresholds))), reverse=True)
    return list(zip(thresholds, deltas))


@settings(max_examples=200)
@given(price_tables(), st.floats(0, 3), st.floats(0, 3), st.floats(10, 25))
def test_cost_saving_monotone(table, pa, pb, comfort):
    lo, hi = min(pa, pb), max(pa, pb)
    assert cost_saving_setpoint(lo, comfort, table) >= cost_saving_setpoint(hi, comfort, table)
    assert cost_saving_setpoint(lo, comfort, table) <= comfort


@settings(max_examples=200)
@given(finite, finite)
def test_arbiter_min_algebra(a, b):
    assert arbiter_min(a, a) == a
    assert arbiter_min(a, b) == arbiter_min(b, a)
    assert arbiter_min(a, b) <= a and arbiter_min(a, b) <= b
    assert arbiter_min(a, b) in (a, b)


def test_arbiter_examples():
    assert arbiter_min(19, 21) == 19
    assert arbiter_strictest(KineticLimits(2, 1), KineticLimits(1, 3)) == KineticLimits(1, 1)


limits = st.builds(KineticLimits, st.floats(0.01, 10), st.floats(0.01, 10))


@settings(max_examples=200)
@given(limits, limits)
def test_arbiter_strictest_algebra(a, b):
    r = arbiter_strictest(a, b)
    assert arbiter_strictest(a, a) == a
    assert r == arbiter_strictest(b, a)
    assert all(x <= y for x, y in zip(r, a)) and all(x <= y for x, y in zip(r, b))
    assert isinstance(r, KineticLimits)


# -- scenarios -----------------------------------------------------------------


def test_parse_scenario():
    sc = parse_scenario(
        "# demo\nduration 120\nstep 60\ninput presence: 0=true, 60=false\nplant outdoor_temp: 0=-3\n"
        "plant heater_power 1500\nparam cost_saving.table 0.2:-1, 0.4:-2\nbind NoFreezing.room_temp = room_temp\n"
    )
    assert sc.steps == 2
    assert sc.inputs["presence"].at(0) == 1.0 and sc.inputs["presence"].at(59.9) == 1.0 and sc.inputs["presence"].at(60) == 0.0
    assert sc.plant.heater_power == 1500 and sc.plant.outdoor_temp.at(1000) == -3
    assert sc.params == {"cost_saving": {"table": ((0.2, -1.0), (0.4, -2.0))}}
    assert sc.bindings == {"NoFreezing.room_temp": "room_temp"}


@pytest.mark.parametrize(
    "text",
    [
        "step 60\n",
        "duration 100\nstep 60\n",
        "duration 60\nstep 0\n",
        "duration 60\nstep 60\ninput x: 10=1\n",
        "duration 60\nstep 60\ninput x: 0=1, 0=2\n",
        "duration 60\nstep 60\nplant wattage 3\n",
        "duration 60\nstep 60\nwhatever\n",
        "duration 60\nstep 60\ninput x: 0=warm\n",
        "duration 60\nstep 60\nplant thermal_mass 0\n",
    ],
)
def test_bad_scenarios(text):
    with pytest.raises(ScenarioError):
        parse_scenario(text)


def test_bundled_scenarios_parse():
    for name in corpus.scenarios():
        parse_scenario(corpus.path(name).read_text())


# -- binding -------------------------------------------------------------------


def test_plan_order_chained(fixtures):
    assert bind_behaviors(fixtures["chained_freeze"]).order == ("EnergySaving", "ThermostatLogic", "FreezeProtection")


def test_plan_order_compromise(fixtures):
    order = bind_behaviors(fixtures["compromise_saving"]).order
    assert order.index("Arbiter") > max(order.index("EnergySaving"), order.index("CostSaving"))
    assert order.index("Arbiter") < order.index("ThermostatLogic")


def test_missing_behavior_names_the_dt(fixtures):
    model = fixtures["thermal_comfort"]
    dt = dataclasses.replace(model.root.dts[0], behavior_key=None)
    model = dataclasses.replace(model, root=dataclasses.replace(model.root, dts=(dt,)))
    with pytest.raises(BindingError, match="ThermostatLogic"):
        bind_behaviors(model)


def test_unregistered_behavior(fixtures):
    with pytest.raises(BindingError, match="trajectory_solver"):
        bind_behaviors(fixtures["gantry_initial"])


def test_cycle_rejected():
    def arb(i):
        return m.Dt(
            i,
            i,
            (
                m.Port("in_a", m.Direction.INPUT, m.Role.INTER_DT, "celsius"),
                m.Port("in_b", m.Direction.INPUT, m.Role.USER, "celsius"),
                m.Port("result", m.Direction.OUTPUT, m.Role.INTER_DT, "celsius"),
            ),
            "min",
        )

    root = m.TwinSystem(
        "S",
        ports=(m.Port("c", m.Direction.INPUT, m.Role.USER, "celsius"),),
        dts=(arb("A"), arb("B")),
        flows=(
            m.Flow(m.PortRef("A", "result"), m.PortRef("B", "in_a")),
            m.Flow(m.PortRef("B", "result"), m.PortRef("A", "in_a")),
            m.Flow(m.PortRef("S", "c"), m.PortRef("A", "in_b")),
            m.Flow(m.PortRef("S", "c"), m.PortRef("B", "in_b")),
        ),
    )
    with pytest.raises(BindingError, match="cyclic"):
        bind_behaviors(m.Model("loop", root))


def test_two_writers_on_one_sink_rejected(fixtures):
    with pytest.raises(BindingError, match="more than one source"):
        bind_behaviors(fixtures["orthogonal_freeze"])


# -- runs ----------------------------------------------------------------------


def _scenario(duration=3600.0, step=60.0, comfort=21.0, outdoor=5.0, presence=1.0, **plant):
    return Scenario(
        duration,
        step,
        {"comfort_temp": Timeline.constant(comfort), "presence": Timeline.constant(presence), "price": Timeline.constant(0.2)},
        PlantParams(outdoor_temp=Timeline.constant(outdoor), **plant),
    )


def test_zero_duration(fixtures):
    tr = run(bind_behaviors(fixtures["thermal_comfort"]), _scenario(duration=0.0))
    assert len(tr.time) == 1
    assert tr["time"][0] == 0 and tr["room_temp"][0] == 20.0 and tr["energy_used"][0] == 0.0


def test_trace_length(fixtures):
    sc = _scenario(duration=600.0, step=60.0)
    tr = run(bind_behaviors(fixtures["thermal_comfort"]), sc)
    assert all(len(a) == 11 for a in tr.channels.values())
    assert np.all(np.diff(tr.time) > 0)


def test_heater_forced_off_decays(fixtures):
    tr = run(bind_behaviors(fixtures["thermal_comfort"]), _scenario(comfort=-50.0, outdoor=0.0))
    assert np.all(np.diff(tr["room_temp"]) < 0) and np.all(tr["room_temp"] > 0)
    assert tr["energy_used"][-1] == 0.0


def test_heater_forced_on_heats(fixtures):
    tr = run(bind_behaviors(fixtures["thermal_comfort"]), _scenario(comfort=90.0, outdoor=0.0, heater_power=20000.0))
    assert np.all(np.diff(tr["room_temp"]) > 0)
    assert tr["energy_used"][-1] == pytest.approx(20000.0 * 3600.0)
    assert tr["heater_on_time"][-1] == 3600.0


def test_determinism(fixtures):
    plan = bind_behaviors(fixtures["compromise_saving"])
    sc = parse_scenario(corpus.path("energy.scn").read_text())
    a, b = run(plan, sc), run(plan, sc)
    assert a.to_csv() == b.to_csv()


@pytest.mark.parametrize("name", ["thermal_comfort", "green_comfort", "chained_freeze", "additional_heater", "compromise_saving"])
def test_signal_propagation(fixtures, name):
    model = fixtures[name]
    tr = run(bind_behaviors(model), parse_scenario(corpus.path("energy.scn").read_text()))
    for f in model.flows():
        np.testing.assert_array_equal(tr[f.src.id], tr[f.dst.id])


def test_arbiter_dominance(fixtures):
    sc = parse_scenario(
        "duration 86400\nstep 300\ninput comfort_temp: 0=21\ninput presence: 0=true, 30000=false, 60000=true\n"
        "input price: 0=0.1, 20000=0.3, 40000=0.5, 70000=0.2\nplant outdoor_temp: 0=0\n"
    )
    tr = run(bind_behaviors(fixtures["compromise_saving"]), sc)
    got = tr["ThermostatLogic.comfort_temp"]
    assert np.all(got <= tr["EnergySaving.comfort_temp_out"]) and np.all(got <= tr["CostSaving.comfort_temp_out"])
    assert np.any(got < 21)


def test_unknown_param_rejected(fixtures):
    sc = dataclasses.replace(_scenario(), params={"thermostat": {"hysteresis": 1.0}})
    with pytest.raises(ScenarioError):
        run(bind_behaviors(fixtures["thermal_comfort"]), sc)


def test_missing_input_timeline(fixtures):
    sc = dataclasses.replace(_scenario(), inputs={})
    with pytest.raises(ScenarioError, match="comfort_temp"):
        run(bind_behaviors(fixtures["thermal_comfort"]), sc)


def test_csv_header(fixtures):
    tr = run(bind_behaviors(fixtures["thermal_comfort"]), _scenario(duration=60.0))
    header = tr.to_csv().splitlines()[0].split(",")
    assert header[:5] == ["time", "room_temp", "outdoor_temp", "energy_used", "heater_on_time"]
    assert "ThermostatLogic.heater" in header


@settings(max_examples=100, deadline=None)
@given(
    st.floats(-20.0, 5.0),
    st.floats(-10.0, 15.0),
    st.sampled_from([30.0, 60.0, 120.0]),
    st.floats(5.0, 20.0),
)
def test_chained_freeze_safety(outdoor, setpoint, step, initial):
    model = corpus.load("chained_freeze")
    sc = _scenario(duration=6 * 3600.0, step=step, comfort=setpoint, outdoor=outdoor, initial_temp=initial)
    p = sc.plant
    threshold = 8.0
    assert p.heater_power > p.loss_coefficient * (threshold - outdoor)
    margin = step * p.loss_coefficient * (threshold - outdoor) / p.thermal_mass
    tr = run(bind_behaviors(model), sc)
    assert tr["room_temp"].min() >= min(initial, threshold - margin) - 1e-12


def test_energy_monotonicity(fixtures):
    sc = parse_scenario(corpus.path("energy.scn").read_text())
    base = run(bind_behaviors(fixtures["thermal_comfort"]), sc)["energy_used"][-1]
    green = run(bind_behaviors(fixtures["flat_green_comfort"]), sc)["energy_used"][-1]
    assert green < base
    no_setback = dataclasses.replace(sc, params={"energy_saving": {"absent_day_delta": 0.0, "absent_night_delta": 0.0}})
    same = run(bind_behaviors(fixtures["flat_green_comfort"]), no_setback)["energy_used"][-1]
    assert same == base


# -- goals ---------------------------------------------------------------------


def _synthetic(**channels):
    n = len(next(iter(channels.values())))
    chans = {"time": np.arange(n, dtype=float) * 60.0}
    chans.update({k: np.asarray(v, dtype=float) for k, v in channels.items()})
    return Trace(60.0, chans)


def test_no_freezing_dip(fixtures):
    tr = _synthetic(room_temp=[12, 10, 7, 6, 7, 9, 11])
    report = evaluate_goals(fixtures["chained_freeze"], tr, goals=["NoFreezing"])
    r = report.result("NoFreezing")
    assert r.verdict == "violated" and r.intervals == ((120.0, 240.0),)
    assert not report.all_satisfied


def test_unconstrained_goal_is_satisfied(fixtures):
    tr = _synthetic(room_temp=[20, 20])
    assert evaluate_goals(fixtures["chained_freeze"], tr, goals=["LowerEnergy"]).all_satisfied


def test_satisfied_iff_no_interval(fixtures):
    tr = _synthetic(room_temp=[20, 21, 22])
    for r in evaluate_goals(fixtures["chained_freeze"], tr).results:
        assert r.satisfied == (not r.intervals)


def test_no_swing_at_end(fixtures):
    model = fixtures["gantry_initial"]
    still = _synthetic(swing_angle=[0.3, 0.1, 0.0], angular_velocity=[0.2, -0.1, 1e-12])
    moving = _synthetic(swing_angle=[0.0, 0.0, 0.01], angular_velocity=[0.0, 0.0, 0.0])
    assert evaluate_goals(model, still, goals=["NoSwing"]).all_satisfied
    bad = evaluate_goals(model, moving, goals=["NoSwing"]).result("NoSwing")
    assert bad.verdict == "violated" and bad.intervals == ((120.0, 120.0),)


def test_poi_binding(fixtures):
    tr = _synthetic(inside=[9, 9])
    with pytest.raises(GoalEvaluationError, match="room_temp"):
        evaluate_goals(fixtures["chained_freeze"], tr, goals=["NoFreezing"])
    report = evaluate_goals(fixtures["chained_freeze"], tr, {"NoFreezing.room_temp": "inside"}, ["NoFreezing"])
    assert report.all_satisfied


def test_false_runs():
    t = np.arange(6.0)
    assert false_runs(t, np.array([True, False, False, True, False, True])) == ((1.0, 2.0), (4.0, 4.0))
    assert false_runs(t, np.ones(6, bool)) == ()


def test_report_formats(fixtures):
    tr = _synthetic(room_temp=[12, 7, 12])
    report = evaluate_goals(fixtures["chained_freeze"], tr, goals=["NoFreezing"])
    assert report.to_text().startswith("NoFreezing: violated\n  violated from t=60 to t=60")
    assert '"verdict": "violated"' in report.to_records()
