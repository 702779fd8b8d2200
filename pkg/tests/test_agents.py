"""Character interpreter: scripts, cycles, plan selection, snapshots."""

import random

import pytest

from plotwright.agents import (
    AgentEnv,
    Fact,
    Goal,
    WILDCARD,
    assert_fact,
    interpreter_cycle,
    parse_agent,
    parse_agent_program,
    restore,
    retract_fact,
    select_plan,
    snapshot,
    unparse_program,
)
from plotwright.errors import (
    DslSyntaxError,
    PrimitiveNotRegisteredError,
    UnboundVariableError,
)
from plotwright.fixedpoint import parse_num


def env():
    e = AgentEnv()
    for name in ("doIdle", "tell", "say"):
        e.register(name)
    return e


def run_cycles(agent, n, e=None):
    e = e or env()
    events = []
    for _ in range(n):
        events.extend(interpreter_cycle(agent, e))
    return events


class TestParsing:
    def test_example_agent_loads(self, fig_agent_source):
        agent = parse_agent(fig_agent_source, "Lovisa")
        assert [g.name for g in agent.goals] == ["live"]
        assert len(agent.wm) == 2
        assert [p.name for p in agent.plans] == ["live", "gossip"]

    def test_missing_goal_section(self):
        with pytest.raises(DslSyntaxError):
            parse_agent_program('PLAN:\n{\nNAME:\n  "x"\nBODY:\n  EXECUTE doIdle;\n}')

    def test_unbound_variable(self):
        src = (
            "PLAN:\n{\nNAME:\n  \"bad\"\nGOAL:\n  ACHIEVE g;\nBODY:\n"
            '  PERFORM tell "Karin" $who;\n}'
        )
        with pytest.raises(UnboundVariableError) as exc:
            parse_agent_program(src)
        assert "who" in str(exc.value)

    def test_or_binding_stays_local(self):
        src = (
            "PLAN:\n{\nNAME:\n  \"bad\"\nGOAL:\n  ACHIEVE g;\nBODY:\n"
            "  OR\n  {\n    RETRIEVE secret $x;\n  }\n  {\n    EXECUTE doIdle;\n  };\n"
            "  PERFORM tell $x;\n}"
        )
        with pytest.raises(UnboundVariableError):
            parse_agent_program(src)

    def test_numbers_are_tenths(self):
        prog = parse_agent_program('FACTS:\n  FACT mood 4.5;')
        assert prog.facts[0].args == (45,)

    def test_unparse_round_trip(self, fig_agent_source):
        prog = parse_agent_program(fig_agent_source)
        again = parse_agent_program(unparse_program(prog))
        assert again == prog


class TestSelection:
    def test_only_candidate(self, fig_agent_source):
        agent = parse_agent(fig_agent_source, "Lovisa")
        plan = select_plan(agent, agent.goals[0])
        assert plan is not None and plan.name == "live"

    def test_utility_wins(self):
        src = (
            "GOALS:\n  ACHIEVE g;\n"
            "PLAN:\n{\nNAME:\n  \"low\"\nGOAL:\n  ACHIEVE g;\nBODY:\n  EXECUTE doIdle;\n}\n"
            "PLAN:\n{\nNAME:\n  \"high\"\nGOAL:\n  ACHIEVE g;\nUTILITY:\n  2;\nBODY:\n  EXECUTE doIdle;\n}"
        )
        agent = parse_agent(src, "a")
        assert select_plan(agent, agent.goals[0]).name == "high"

    def test_declaration_order_breaks_ties(self):
        src = (
            "GOALS:\n  ACHIEVE g;\n"
            "PLAN:\n{\nNAME:\n  \"first\"\nGOAL:\n  ACHIEVE g;\nBODY:\n  EXECUTE doIdle;\n}\n"
            "PLAN:\n{\nNAME:\n  \"second\"\nGOAL:\n  ACHIEVE g;\nBODY:\n  EXECUTE doIdle;\n}"
        )
        agent = parse_agent(src, "a")
        assert select_plan(agent, agent.goals[0]).name == "first"

    def test_unsatisfiable_prefix_disqualifies(self):
        src = (
            "GOALS:\n  ACHIEVE g;\n"
            "PLAN:\n{\nNAME:\n  \"needs\"\nGOAL:\n  ACHIEVE g;\nBODY:\n"
            "  RETRIEVE missing $x;\n  EXECUTE doIdle;\n}"
        )
        agent = parse_agent(src, "a")
        assert select_plan(agent, agent.goals[0]) is None


class TestCycles:
    def test_strength_one_idles(self, fig_agent_source):
        agent = parse_agent(fig_agent_source, "Lovisa")
        events = run_cycles(agent, 20)
        assert events, "expected at least one event"
        assert {e.action for e in events} == {"doIdle"}
        assert agent.wm.match("knows", ("Karin", "in_love", "Lovisa", WILDCARD)) == []

    def test_strength_two_gossips_once(self, fig_agent_source):
        agent = parse_agent(fig_agent_source, "Lovisa")
        assert_fact(agent, Fact("friends", ("Lovisa", "Karin", parse_num("2"))))
        events = run_cycles(agent, 20)
        tells = [e for e in events if e.action == "tell"]
        assert len(tells) == 1
        assert tells[0].kind == "PERFORM"
        assert tells[0].args == ("Karin", "in_love", "Lovisa", "Niklas")
        knows = agent.wm.match("knows", ("Karin", "in_love", "Lovisa", WILDCARD))
        assert len(knows) == 1
        assert knows[0].value() == "Niklas"

    def test_or_branches_are_exclusive(self, fig_agent_source):
        # one live-plan run produces events from exactly one branch
        for strength in ("1", "2"):
            agent = parse_agent(fig_agent_source, "Lovisa")
            assert_fact(agent, Fact("friends", ("Lovisa", "Karin", parse_num(strength))))
            actions = {e.action for e in run_cycles(agent, 20)}
            assert actions in ({"doIdle"}, {"tell"})

    def test_empty_goal_list_still_observes(self):
        agent = parse_agent("FACTS:\n  FACT x 1;", "a")
        observed = []
        agent.observer = lambda ag: observed.append(ag.cycle)
        events = run_cycles(agent, 3)
        assert events == []
        assert observed == [0, 1, 2]

    def test_observer_between_steps(self, fig_agent_source):
        # exactly one observation before every executed step
        agent = parse_agent(fig_agent_source, "Lovisa")
        assert_fact(agent, Fact("friends", ("Lovisa", "Karin", parse_num("2"))))
        ledger = []
        agent.observer = lambda ag: ledger.append("observe")
        e = env()
        for _ in range(6):
            for ev in interpreter_cycle(agent, e):
                ledger.append("event")
        observations = [i for i, x in enumerate(ledger) if x == "observe"]
        events = [i for i, x in enumerate(ledger) if x == "event"]
        for a, b in zip(events, events[1:]):
            assert any(a < o < b for o in observations), ledger

    def test_unregistered_primitive(self):
        src = "GOALS:\n  ACHIEVE g;\nPLAN:\n{\nGOAL:\n  ACHIEVE g;\nBODY:\n  PERFORM dance;\n}"
        agent = parse_agent(src, "a")
        strict = AgentEnv(strict=True)
        with pytest.raises(PrimitiveNotRegisteredError):
            run_cycles(agent, 3, strict)

    def test_determinism_across_runs(self, fig_agent_source):
        def trace():
            agent = parse_agent(fig_agent_source, "Lovisa", seed=9)
            assert_fact(agent, Fact("friends", ("Lovisa", "Karin", parse_num("2"))))
            return [e.render() for e in run_cycles(agent, 15)]

        assert trace() == trace()


class TestWorldModel:
    def test_upsert_is_last_writer_wins(self, fig_agent_source):
        agent = parse_agent(fig_agent_source, "Lovisa")
        assert_fact(agent, Fact("friends", ("Lovisa", "Karin", parse_num("2"))))
        facts = agent.wm.match("friends", ("Lovisa", "Karin", WILDCARD))
        assert len(facts) == 1
        assert facts[0].value() == parse_num("2")

    def test_retraction_blocks_gossip(self, fig_agent_source):
        agent = parse_agent(fig_agent_source, "Lovisa")
        assert_fact(agent, Fact("friends", ("Lovisa", "Karin", parse_num("2"))))
        retract_fact(agent, "in_love", ("Lovisa", WILDCARD))
        events = run_cycles(agent, 20)
        assert all(e.action != "tell" for e in events)
        assert agent.wm.match("knows", ("Karin", "in_love", "Lovisa", WILDCARD)) == []

    def test_retract_missing_is_noop(self, fig_agent_source):
        agent = parse_agent(fig_agent_source, "Lovisa")
        before = agent.wm.fingerprint()
        assert retract_fact(agent, "nothing", (WILDCARD,)) == 0
        assert agent.wm.fingerprint() == before


class TestSnapshots:
    def test_restored_agent_replays_identically(self, fig_agent_source):
        agent = parse_agent(fig_agent_source, "Lovisa", seed=4)
        assert_fact(agent, Fact("friends", ("Lovisa", "Karin", parse_num("2"))))
        run_cycles(agent, 1)  # mid-flight state
        copy = restore(snapshot(agent))
        original_trace = [e.render() for e in run_cycles(agent, 10)]
        copy_trace = [e.render() for e in run_cycles(copy, 10)]
        assert original_trace == copy_trace

    def test_copy_mutation_never_leaks(self, fig_agent_source):
        agent = parse_agent(fig_agent_source, "Lovisa")
        baseline = agent.wm.fingerprint()
        copy = restore(snapshot(agent))
        rng = random.Random(13)
        for i in range(10_000):
            assert_fact(copy, Fact(f"junk{rng.randrange(50)}", (rng.randrange(100),)))
            if i % 7 == 0:
                copy.add_goal(Goal("ACHIEVE", f"g{i}", i))
        assert agent.wm.fingerprint() == baseline
        assert len(agent.goals) == 1

    def test_snapshot_of_restored_is_equal(self, fig_agent_source):
        agent = parse_agent(fig_agent_source, "Lovisa", seed=2)
        run_cycles(agent, 2)
        snap = snapshot(agent)
        again = snapshot(restore(snap))
        assert snap == again
