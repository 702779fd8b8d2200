import pathlib

import pytest

from plotwright.scenario import parse_scenario

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def load_fixture(name: str):
    result = parse_scenario((FIXTURES / name).read_text(encoding="utf-8"))
    assert result.ok, [e.render() for e in result.errors]
    return result.scenario


@pytest.fixture(scope="session")
def kaktus():
    return load_fixture("kaktus.plot")


@pytest.fixture(scope="session")
def gossip():
    return load_fixture("gossip.plot")


@pytest.fixture(scope="session")
def duet():
    return load_fixture("duet.plot")


@pytest.fixture()
def kaktus_text():
    return (FIXTURES / "kaktus.plot").read_text(encoding="utf-8")


@pytest.fixture()
def gossip_text():
    return (FIXTURES / "gossip.plot").read_text(encoding="utf-8")


FIG_AGENT = """
GOALS:
  ACHIEVE live;
FACTS:
  FACT friends "Lovisa" "Karin" 1;
  FACT in_love "Lovisa" "Niklas";
PLAN:
{
NAME:
  "live"
GOAL:
  ACHIEVE live;
BODY:
  FACT friends "Lovisa" "Karin" $strength;
  OR
  {
    TEST( > $strength 1);
    ACHIEVE gossip;
  }
  {
    EXECUTE doIdle;
  };
}
PLAN:
{
NAME:
  "gossip"
GOAL:
  ACHIEVE gossip;
BODY:
  RETRIEVE in_love "Lovisa" $who;
  PERFORM tell "Karin" "in_love" "Lovisa" $who;
EFFECTS:
  ASSERT knows "Karin" "in_love" "Lovisa" $who;
}
"""


@pytest.fixture()
def fig_agent_source():
    return FIG_AGENT
