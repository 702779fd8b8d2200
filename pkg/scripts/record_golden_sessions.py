"""Record golden session transcripts for the protocol contract tests.

A transcript interleaves both directions: lines starting with "> " are
client-to-server frames, "< " server-to-client. Tabs are literal. Run this
after deliberate protocol or fixture changes, then review the diff:

    python scripts/record_golden_sessions.py
"""

import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from plotwright.protocol import encode_frame, frame  # noqa: E402
from plotwright.runtime import Session  # noqa: E402
from plotwright.scenario import parse_scenario  # noqa: E402

SESSIONS = ROOT / "fixtures" / "sessions"

RECIPES = {
    "gossip_seed7.txt": {
        "fixture": "gossip.plot",
        "seed": 7,
        "debug": True,
        "horizon": 4,
        "max_beats": 8,
        "inputs": ["", "", "", ""],
    },
    "kaktus_seed7.txt": {
        "fixture": "kaktus.plot",
        "seed": 7,
        "debug": True,
        "horizon": 12,
        "max_beats": 30,
        "inputs": ["", "@Ebba: how is the party coming along?", "", "", "", "", "", ""],
    },
}


def record(name: str, recipe: dict) -> str:
    scenario = parse_scenario((ROOT / "fixtures" / recipe["fixture"]).read_text()).scenario
    session = Session(
        scenario,
        seed=recipe["seed"],
        anticipator="on",
        horizon=recipe["horizon"],
        max_beats=recipe["max_beats"],
        debug=recipe["debug"],
    )
    session.mode = "interactive"
    lines = [f"> {encode_frame(frame('hello', version='1'))}"]
    for f in session.hello_frames():
        lines.append(f"< {encode_frame(f)}")
    for text in recipe["inputs"]:
        lines.append(f"> {encode_frame(frame('input', text=text))}")
        for f in session.handle_input(text):
            lines.append(f"< {encode_frame(f)}")
        if session.finished:
            break
    return "\n".join(lines) + "\n"


def main():
    SESSIONS.mkdir(parents=True, exist_ok=True)
    for name, recipe in RECIPES.items():
        text = record(name, recipe)
        (SESSIONS / name).write_text(text, encoding="utf-8")
        print(f"wrote {SESSIONS / name} ({text.count(chr(10))} lines)")


if __name__ == "__main__":
    main()
