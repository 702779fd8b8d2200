"""Live sessions: scenes in and out, ticks, headless runs, reports."""

import pytest

from plotwright.automaton import accepts, compile_scenario
from plotwright.engine import BeatEngine, build_system, convert_input, make_policy
from plotwright.errors import MalformedCommandError
from plotwright.runtime import Session, run_headless
from plotwright.scenario import parse_scenario


class TestSceneDirection:
    def test_activation_injects_exactly_the_beats(self, kaktus):
        automaton = compile_scenario(kaktus)
        engine = BeatEngine(kaktus, automaton)
        state = build_system(kaktus, automaton, 0)
        ebba = state.agents["Ebba"]
        before_plans = [p.name for p in ebba.plans]
        q3 = kaktus.scene("q3")
        engine.activate_scene(state, q3)
        gained = [p for p in ebba.plans if p.name not in before_plans]
        assert [p.name for p in gained] == ["reveal_secret"]
        assert all(p.origin == ("q3", "reveal") for p in gained)
        assert [g.name for g in ebba.goals if g.origin] == ["reveal_secret"]

    def test_deactivation_is_exact_inverse(self, kaktus):
        automaton = compile_scenario(kaktus)
        engine = BeatEngine(kaktus, automaton)
        state = build_system(kaktus, automaton, 0)
        fingerprints = {name: a.fingerprint() for name, a in state.agents.items()}
        q3 = kaktus.scene("q3")
        engine.activate_scene(state, q3)
        engine.deactivate_scene(state, q3)
        assert {name: a.fingerprint() for name, a in state.agents.items()} == fingerprints

    def test_beatless_scene_changes_nothing(self, gossip):
        automaton = compile_scenario(gossip)
        engine = BeatEngine(gossip, automaton)
        state = build_system(gossip, automaton, 0)
        before = state.agents["Lovisa"].fingerprint()
        engine.activate_scene(state, gossip.scene("s_calm"))
        assert state.agents["Lovisa"].fingerprint() == before


class TestConvertInput:
    def test_addressed_say(self, kaktus):
        move = convert_input("@Ebba: did you invite Niklas?", kaktus)
        assert (move.move, move.addressee) == ("say", "Ebba")
        assert move.content == "did you invite Niklas?"

    def test_act_command(self, kaktus):
        move = convert_input("/act give candy Lovisa", kaktus)
        assert move.move == "act"
        assert move.content == "give"
        assert move.args == ("candy", "Lovisa")

    def test_bare_text_goes_to_scene(self, kaktus):
        move = convert_input("what about music?", kaktus)
        assert (move.move, move.addressee) == ("say", None)

    def test_empty_line_rejected(self, kaktus):
        with pytest.raises(MalformedCommandError):
            convert_input("", kaktus)

    def test_unknown_agent_rejected(self, kaktus):
        with pytest.raises(MalformedCommandError):
            convert_input("@Niklas: hi", kaktus)

    def test_unknown_command_rejected(self, kaktus):
        with pytest.raises(MalformedCommandError):
            convert_input("/dance", kaktus)


class TestTick:
    def test_scene_frame_only_on_transition(self, kaktus):
        session = Session(kaktus, seed=1, anticipator="off", max_beats=30)
        frames = session.tick(None)
        # beat 0 fires a0, so a scene frame appears
        assert any(f.type == "scene" for f in frames)

    def test_conditions_evaluated_once_per_beat(self, kaktus):
        session = Session(kaktus, seed=1, anticipator="on", horizon=12, max_beats=30)
        counts_before = list(session.engine.evaluator.eval_counts)
        session.tick(None)
        counts_after = list(session.engine.evaluator.eval_counts)
        assert all(b - a <= 1 for a, b in zip(counts_before, counts_after))
        while not session.finished:
            before = list(session.engine.evaluator.eval_counts)
            session.tick(None)
            after = list(session.engine.evaluator.eval_counts)
            assert all(y - x <= 1 for x, y in zip(before, after))

    def test_idle_beat_changes_nothing(self, gossip_text):
        # weaken the agent so nothing ever happens, then watch a quiet beat
        scenario = parse_scenario(
            gossip_text.replace('FACT friends "Lovisa" "Karin" 2;', 'FACT friends "Lovisa" "Karin" 1;')
        ).scenario
        session = Session(scenario, anticipator="off", max_beats=10)
        session.tick(None)  # burn the one idle event
        session.tick(None)
        model_before = session.state.model
        frames = session.tick(None)
        assert frames == []
        assert session.state.model == model_before

    def test_paired_seed_comparison_around_the_detour(self, kaktus):
        def run(mode):
            return run_headless(
                kaktus,
                policy="scripted",
                script=["", "", "", "/act invite Niklas"],
                seed=6,
                anticipator=mode,
                horizon=12,
                max_beats=30,
            )

        free = run("off")
        # without the controller this seed walks straight into the detour
        assert "a16" in free.trace
        assert free.undesirable_entered >= 1
        steered = run("on")
        assert steered.undesirable_entered == 0
        assert "a16" not in steered.trace
        # the player's premature invitation is filtered out
        assert ("deny_invite",) in steered.interventions


class TestHeadless:
    def test_silence_seed_one_reaches_an_ending(self, kaktus):
        report = run_headless(kaktus, policy="silence", seed=1, anticipator="on", max_beats=40)
        assert report.ended_at_end
        assert report.unrecovered is False
        assert report.undesirable_entered == 0

    def test_zero_max_beats(self, kaktus):
        report = run_headless(kaktus, seed=0, max_beats=0)
        assert report.trace == ()
        assert report.beats == 0
        assert not report.ended_at_end

    def test_trace_language_agreement(self, kaktus):
        automaton = compile_scenario(kaktus)
        for seed in range(30):
            report = run_headless(
                kaktus, policy="random", seed=seed, anticipator="off", max_beats=40
            )
            assert accepts(automaton, list(report.trace)) == report.ended_at_end, seed

    def test_seed_reproducibility(self, kaktus):
        for seed in (0, 7, 23):
            a = run_headless(kaktus, policy="random", seed=seed, anticipator="on", max_beats=40)
            b = run_headless(kaktus, policy="random", seed=seed, anticipator="on", max_beats=40)
            assert a.key() == b.key()

    def test_bookkeeping_monotone_and_desirable(self, kaktus):
        automaton = compile_scenario(kaktus)
        session = Session(kaktus, seed=5, anticipator="on", horizon=12, max_beats=40)
        seen = set()
        while not session.finished:
            session.tick(None)
            played = set(session.state.model.played)
            assert seen <= played  # never shrinks
            seen = played
            active = session.state.model.active_scene
            scene = kaktus.scene(active)
            if scene and automaton.desirability.get(session.state.model.current) == "desirable":
                assert scene.desirability == "desirable"

    def test_no_leak_watch_equals_off(self, kaktus):
        for seed in range(50):
            watch = run_headless(kaktus, policy="random", seed=seed, anticipator="watch", max_beats=40)
            off = run_headless(kaktus, policy="random", seed=seed, anticipator="off", max_beats=40)
            assert watch.key() == off.key(), seed

    def test_monte_carlo_flagging_without_controller(self, kaktus):
        flagged = sum(
            1
            for seed in range(100)
            if run_headless(
                kaktus, policy="random", seed=seed, anticipator="off", max_beats=40
            ).undesirable_entered
        )
        assert flagged >= 5  # the fixture guarantees the detour is reachable


class TestInteractiveEquivalence:
    def test_scripted_replay_of_interactive_session(self, kaktus):
        lines = ["", "@Ebba: how is the party coming along?", "/act give candy Lovisa", "", "", ""]
        interactive = Session(kaktus, seed=11, anticipator="on", horizon=12, max_beats=30)
        interactive.mode = "interactive"
        for line in lines:
            if interactive.finished:
                break
            interactive.handle_input(line)
        while not interactive.finished:
            interactive.handle_input("")
        headless = run_headless(
            kaktus, policy="scripted", script=lines, seed=11,
            anticipator="on", horizon=12, max_beats=30,
        )
        assert tuple(interactive.trace) == headless.trace
        assert tuple(interactive.event_log) == headless.event_log

    def test_same_seed_same_transcript(self, kaktus):
        def transcript():
            session = Session(kaktus, seed=7, anticipator="on", horizon=12, max_beats=30, debug=True)
            session.mode = "interactive"
            from plotwright.protocol import encode_frame

            lines = [encode_frame(f) for f in session.hello_frames()]
            while not session.finished:
                lines.extend(encode_frame(f) for f in session.handle_input(""))
            return lines

        assert transcript() == transcript()


class TestPolicies:
    def test_scripted_then_silence(self, kaktus):
        policy = make_policy("scripted", 0, kaktus, script=["@Ebba: hi", ""])
        assert policy.next_line(0) == "@Ebba: hi"
        assert policy.next_line(1) is None
        assert policy.next_line(2) is None

    def test_random_policy_is_seed_stable(self, kaktus):
        a = make_policy("random", 3, kaktus)
        b = make_policy("random", 3, kaktus)
        assert [a.next_line(i) for i in range(20)] == [b.next_line(i) for i in range(20)]
