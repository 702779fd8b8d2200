"""Look-ahead simulation, steering search, barrier, and sensibility."""

import pytest

from plotwright.anticipator import (
    Anticipator,
    apply_intervention,
    search_effectors,
    simulate,
)
from plotwright.automaton import compile_scenario
from plotwright.effectors import builtin_catalog
from plotwright.engine import BeatEngine, build_system
from plotwright.errors import BarrierTimeoutError, HorizonZeroError, TargetMissingError
from plotwright.runtime import Session, run_headless
from plotwright.system import capture, fingerprint
from plotwright.scenario import parse_scenario


def setup(scenario, seed=0):
    automaton = compile_scenario(scenario)
    engine = BeatEngine(scenario, automaton)
    state = build_system(scenario, automaton, seed)
    start = scenario.start_scene()
    if start:
        engine.activate_scene(state, start)
    return engine, state


class TestSimulate:
    def test_gossip_enters_undesirable_at_beat_two(self, gossip):
        engine, state = setup(gossip)
        prediction = simulate(engine, capture(state), horizon=3)
        assert prediction.verdict == "enters_undesirable"
        assert prediction.verdict_beat == 2

    def test_strength_one_is_ok(self, gossip_text):
        weakened = gossip_text.replace('FACT friends "Lovisa" "Karin" 2;',
                                       'FACT friends "Lovisa" "Karin" 1;')
        scenario = parse_scenario(weakened).scenario
        engine, state = setup(scenario)
        prediction = simulate(engine, capture(state), horizon=8)
        assert prediction.verdict == "ok"

    def test_horizon_zero_rejected(self, gossip):
        engine, state = setup(gossip)
        with pytest.raises(HorizonZeroError):
            simulate(engine, capture(state), horizon=0)

    def test_no_leak_into_live_state(self, gossip):
        engine, state = setup(gossip)
        before = fingerprint(state)
        rng_before = state.model_rng.getstate()
        for _ in range(5):
            simulate(engine, capture(state), horizon=6)
        assert fingerprint(state) == before
        assert state.model_rng.getstate() == rng_before

    def test_prediction_determinism(self, gossip):
        engine, state = setup(gossip)
        snap = capture(state)
        a = simulate(engine, snap, horizon=4)
        b = simulate(engine, snap, horizon=4)
        assert a == b

    def test_events_are_captured_not_emitted(self, gossip):
        engine, state = setup(gossip)
        prediction = simulate(engine, capture(state), horizon=3)
        performed = [e for entry in prediction.trajectory for e in entry.events]
        assert any(e.action == "tell" for e in performed)


class TestSearch:
    def test_worked_example_three_candidates(self, gossip):
        engine, state = setup(gossip)
        snap = capture(state)
        prediction = simulate(engine, snap, horizon=4)
        catalog = builtin_catalog(gossip)
        found = search_effectors(engine, snap, prediction, catalog, k_max=2)
        assert found is not None
        assert found.candidates_evaluated == 3
        assert sorted(found.feasible) == [
            "auto:goal:Lovisa.hold_back",
            "auto:rmplan:Lovisa.gossip",
            "auto:set:Lovisa.friends(Lovisa,Karin)=1",
        ]
        # cheapest feasible candidate wins: lower the friendship one notch
        assert found.ids() == ("auto:set:Lovisa.friends(Lovisa,Karin)=1",)
        assert found.after.verdict == "ok"

    def test_empty_catalog_finds_nothing(self, gossip):
        engine, state = setup(gossip)
        snap = capture(state)
        prediction = simulate(engine, snap, horizon=4)
        assert search_effectors(engine, snap, prediction, [], k_max=2) is None

    def test_two_agent_scenario_needs_a_pair(self, duet):
        engine, state = setup(duet)
        snap = capture(state)
        prediction = simulate(engine, snap, horizon=4)
        assert prediction.verdict == "enters_undesirable"
        catalog = builtin_catalog(duet)
        found = search_effectors(engine, snap, prediction, catalog, k_max=2)
        assert found is not None
        assert len(found.effectors) == 2
        assert found.ids() == (
            "auto:set:Anna.friends(Anna,Karin)=1",
            "auto:set:Bert.friends(Bert,Karin)=1",
        )
        assert found.after.verdict == "ok"


class TestApplyIntervention:
    def test_live_application_blocks_gossip(self, gossip):
        engine, state = setup(gossip)
        snap = capture(state)
        prediction = simulate(engine, snap, horizon=4)
        found = search_effectors(engine, snap, prediction, builtin_catalog(gossip), 2)
        results = apply_intervention(found, state, gossip)
        assert results[0].updates[0].new_value == 10  # friendship down to 1
        # the live run now idles and never reaches the flagged scene
        for _ in range(20):
            engine.run_beat(state, [])
        assert state.model.current == "s_calm"

    def test_plan_removal_falls_back_to_idling(self, gossip):
        engine, state = setup(gossip)
        removal = [e for e in builtin_catalog(gossip) if e.action == "remove_plan"][0]
        snap = capture(state)
        prediction = simulate(engine, snap, horizon=4)
        iv = search_effectors(engine, snap, prediction, [removal], 1)
        apply_intervention(iv, state, gossip)
        events = []
        for _ in range(10):
            events.extend(engine.run_beat(state, []).events)
        assert {e.action for e in events} == {"doIdle"}
        assert not state.agents["Lovisa"].has_plan("gossip")

    def test_departed_agent_keeps_atomicity(self, duet):
        engine, state = setup(duet)
        snap = capture(state)
        prediction = simulate(engine, snap, horizon=4)
        found = search_effectors(engine, snap, prediction, builtin_catalog(duet), 2)
        del state.agents["Bert"]
        before = fingerprint(state)
        with pytest.raises(TargetMissingError):
            apply_intervention(found, state, duet)
        assert fingerprint(state) == before


class TestBarrier:
    def test_all_check_ins_release(self, gossip):
        engine, state = setup(gossip)
        anticipator = Anticipator(engine, [], horizon=3)
        for name in ("a", "b", "c"):
            anticipator.register(name)
        anticipator._live = state

        class Stub:
            def __init__(self, name):
                self.id = name

        anticipator.synchronize(Stub("a"))
        anticipator.synchronize(Stub("b"))
        assert not any(kind == "snapshot" for _, kind, _ in anticipator.log)
        anticipator.synchronize(Stub("c"))
        assert any(kind == "snapshot" for _, kind, _ in anticipator.log)

    def test_single_agent_snapshots_immediately(self, gossip):
        engine, state = setup(gossip)
        anticipator = Anticipator(engine, [], horizon=3)
        anticipator.bind(state)
        engine.run_beat(state, [], barrier_poll=anticipator.barrier_poll)
        assert any(kind == "snapshot" for _, kind, _ in anticipator.log)

    def test_missing_agent_times_out(self, gossip):
        engine, state = setup(gossip)
        anticipator = Anticipator(engine, [], horizon=3, barrier_timeout=3)
        for name in ("Lovisa", "Ghost"):
            anticipator.register(name)
        anticipator._live = state
        state.agents["Lovisa"].observer = anticipator.synchronize
        engine.run_beat(state, [], barrier_poll=anticipator.barrier_poll)
        engine.run_beat(state, [], barrier_poll=anticipator.barrier_poll)
        with pytest.raises(BarrierTimeoutError) as exc:
            engine.run_beat(state, [], barrier_poll=anticipator.barrier_poll)
        assert exc.value.missing == frozenset({"Ghost"})


class TestSensibility:
    def test_matching_reality_keeps_prediction(self, kaktus):
        session = Session(kaktus, seed=1, anticipator="on", horizon=12, max_beats=30)
        session.run()
        log = session.anticipator.log
        assert not any(kind == "discard" for _, kind, _ in log)

    def test_unpredicted_action_discards_within_the_beat(self, kaktus):
        # silence run: q2 is current again at beat 3; inject the invite there
        probe = Session(kaktus, seed=1, anticipator="on", horizon=12, max_beats=30)
        hits = []
        while not probe.finished:
            if probe.state.model.current == "q2" and probe.state.beat >= 3:
                hits.append(probe.state.beat)
                break
            probe.tick(None)
        inject_at = hits[0]

        from plotwright.engine import ScriptedPolicy

        script = [""] * inject_at + ["/act invite Niklas"]
        session = Session(
            kaktus,
            seed=1,
            policy=ScriptedPolicy(script),
            anticipator="on",
            horizon=12,
            max_beats=30,
        )
        session.run()
        log = session.anticipator.log
        discards = [beat for beat, kind, _ in log if kind == "discard"]
        assert inject_at in discards
        snapshots = [beat for beat, kind, _ in log if kind == "snapshot"]
        assert inject_at in snapshots  # re-snapshot within the same beat
        # and the story never fell into the detour scene
        assert session.undesirable_entered == 0

    def test_identity_at_current_beat_keeps(self, gossip):
        engine, state = setup(gossip)
        anticipator = Anticipator(engine, builtin_catalog(gossip), horizon=4)
        anticipator.bind(state)
        snap = capture(state)
        anticipator.prediction = simulate(engine, snap, horizon=4)
        assert anticipator.sensibility_check(anticipator.prediction, state) == "keep"


class TestSteeringSoundness:
    def test_gossip_never_enters_flagged_state_over_seeds(self, gossip):
        for seed in range(60):
            report = run_headless(gossip, seed=seed, anticipator="on", horizon=4, max_beats=25)
            assert report.undesirable_entered == 0, seed

    def test_without_controller_a_fraction_enters(self, gossip):
        entered = 0
        for seed in range(60):
            report = run_headless(gossip, seed=seed, anticipator="off", max_beats=25)
            entered += 1 if report.undesirable_entered else 0
        assert entered > 0

    def test_interventions_land_before_body_steps(self, gossip):
        # friendship must drop before the agent binds $strength (cycle 0);
        # the trace therefore shows idling, never the tell
        report = run_headless(gossip, seed=0, anticipator="on", horizon=4, max_beats=10)
        assert report.interventions
        assert all("tell" not in line for line in report.event_log)
        assert any("doIdle" in line for line in report.event_log)
