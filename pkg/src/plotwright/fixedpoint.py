"""Fixed-point tenths arithmetic.

All numbers that live in world models, guards, costs, and story values are
integers counting tenths of a unit. This keeps every comparison and
aggregation bit-exact across platforms; floats never enter simulation state.
"""

from __future__ import annotations

SCALE = 10


def parse_num(text: str) -> int:
    """Parse '2' -> 20, '4.5' -> 45, '-1.2' -> -12. Raises ValueError."""
    text = text.strip()
    neg = text.startswith("-")
    if neg:
        text = text[1:]
    if "." in text:
        whole, _, frac = text.partition(".")
        if len(frac) != 1 or not frac.isdigit() or not (whole.isdigit() or whole == ""):
            raise ValueError(f"not a tenths number: {text!r}")
        value = int(whole or "0") * SCALE + int(frac)
    else:
        if not text.isdigit():
            raise ValueError(f"not a tenths number: {text!r}")
        value = int(text) * SCALE
    return -value if neg else value


def fmt_num(value: int) -> str:
    """Inverse of parse_num: 20 -> '2', 45 -> '4.5'."""
    sign = "-" if value < 0 else ""
    value = abs(value)
    whole, frac = divmod(value, SCALE)
    if frac:
        return f"{sign}{whole}.{frac}"
    return f"{sign}{whole}"


def units(value: int) -> int:
    """Whole units in a tenths quantity, rounding half away from zero."""
    sign = -1 if value < 0 else 1
    return sign * ((abs(value) + SCALE // 2) // SCALE)


def is_num(atom) -> bool:
    return isinstance(atom, int) and not isinstance(atom, bool)
