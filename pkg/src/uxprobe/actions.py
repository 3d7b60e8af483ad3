"""Browser actions in the normalized 1000x1000 screen space, and their parser.

The plain-text grammar (one action per turn)::

    click(x, y)              hover(x, y)
    type(x, y, "text")       scroll(up) | scroll(down) | scroll_bottom
    select(tag, "option")    terminate(success|failure, "reason")

Coordinates are integers in [0, 1000], origin at the top-left corner.
GOTO/URL navigation is not an action and is rejected.
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass
from typing import Union

SCREEN_SIZE = 1000


class ActionParseError(ValueError):
    """The model proposed something that is not a valid single action."""


@dataclass(frozen=True)
class Click:
    x: int
    y: int
    kind = "click"


@dataclass(frozen=True)
class Hover:
    x: int
    y: int
    kind = "hover"


@dataclass(frozen=True)
class Type:
    x: int
    y: int
    text: str
    kind = "type"


@dataclass(frozen=True)
class Scroll:
    direction: str  # up, down, bottom
    kind = "scroll"


@dataclass(frozen=True)
class Select:
    tag_id: int
    option: str
    kind = "select"


@dataclass(frozen=True)
class Terminate:
    status: str  # success, failure
    reason: str = ""
    kind = "terminate"


Action = Union[Click, Hover, Type, Scroll, Select, Terminate]
POINTER_ACTIONS = (Click, Hover, Type)
SCROLL_DIRECTIONS = ("up", "down", "bottom")


def _coord(value, name):
    if isinstance(value, bool):
        raise ActionParseError(f"{name} coordinate must be an integer")
    if isinstance(value, float):
        if not value.is_integer():
            raise ActionParseError(f"{name} coordinate must be an integer, got {value}")
        value = int(value)
    if not isinstance(value, int):
        raise ActionParseError(f"{name} coordinate must be an integer, got {value!r}")
    if not 0 <= value <= SCREEN_SIZE:
        raise ActionParseError(
            f"{name}={value} is outside the {SCREEN_SIZE}x{SCREEN_SIZE} screen space"
        )
    return value


def validate(action: Action) -> Action:
    """Check field ranges; returns the action unchanged or raises ActionParseError."""
    if isinstance(action, POINTER_ACTIONS):
        _coord(action.x, "x")
        _coord(action.y, "y")
        if isinstance(action, Type) and not isinstance(action.text, str):
            raise ActionParseError("type text must be a string")
    elif isinstance(action, Scroll):
        if action.direction not in SCROLL_DIRECTIONS:
            raise ActionParseError(f"unknown scroll direction {action.direction!r}")
    elif isinstance(action, Select):
        if isinstance(action.tag_id, bool) or not isinstance(action.tag_id, int) or action.tag_id < 1:
            raise ActionParseError(f"select needs a positive element tag, got {action.tag_id!r}")
        if not isinstance(action.option, str) or not action.option:
            raise ActionParseError("select needs an option label")
    elif isinstance(action, Terminate):
        if action.status not in ("success", "failure"):
            raise ActionParseError(f"terminate status must be success or failure, got {action.status!r}")
    else:
        raise ActionParseError(f"not an action: {action!r}")
    return action


def to_dict(action: Action) -> dict:
    d = {"type": action.kind}
    d.update(vars(action))
    return d


def from_dict(data: dict) -> Action:
    """Build an action from its structured form (as produced by ``to_dict``)."""
    if not isinstance(data, dict) or "type" not in data:
        raise ActionParseError(f"action object needs a 'type' field: {data!r}")
    kind = str(data["type"]).lower()
    if kind in ("goto", "navigate", "open_url"):
        raise ActionParseError("GOTO/URL navigation is not allowed; interact with the page instead")
    if kind in ("click", "hover", "type"):
        x, y = data.get("x"), data.get("y")
        coord = data.get("coordinate") or data.get("coordinates")
        if coord is not None:
            if not isinstance(coord, (list, tuple)) or len(coord) != 2:
                raise ActionParseError(f"coordinate must be [x, y], got {coord!r}")
            x, y = coord
        if x is None or y is None:
            raise ActionParseError(f"{kind.upper()} requires coordinates [x, y]")
        if kind == "click":
            action = Click(x, y)
        elif kind == "hover":
            action = Hover(x, y)
        else:
            action = Type(x, y, data.get("text", ""))
    elif kind in ("scroll", "scroll_bottom", "scroll_down", "scroll_up"):
        direction = data.get("direction") or kind.partition("_")[2] or "down"
        action = Scroll(str(direction).lower())
    elif kind == "select":
        tag = data.get("tag_id", data.get("tag"))
        option = data.get("option", data.get("option_label"))
        action = Select(tag, "" if option is None else str(option))
    elif kind == "terminate":
        action = Terminate(str(data.get("status", "")).lower(), str(data.get("reason", "")))
    else:
        raise ActionParseError(f"unknown action type {kind!r}")
    return validate(action)


def describe(action: Action) -> str:
    """Canonical grammar text; ``parse(describe(a)) == a``."""
    if isinstance(action, (Click, Hover)):
        return f"{action.kind}({action.x}, {action.y})"
    if isinstance(action, Type):
        return f"type({action.x}, {action.y}, {_quote(action.text)})"
    if isinstance(action, Scroll):
        return "scroll_bottom" if action.direction == "bottom" else f"scroll({action.direction})"
    if isinstance(action, Select):
        return f"select({action.tag_id}, {_quote(action.option)})"
    return f"terminate({action.status}, {_quote(action.reason)})"


def _quote(text):
    return json.dumps(text, ensure_ascii=False)


_QUOTED = r'"(?:[^"\\]|\\.)*"|\'(?:[^\'\\]|\\.)*\''
_CALL = re.compile(
    rf"\b(click|hover|type|select|terminate|goto|navigate|scroll)\s*[\(\[]((?:{_QUOTED}|[^\)\]\"'])*)[\)\]]"
    r"|\b(scroll_bottom|scroll_down|scroll_up)\b(?:\s*\(\s*\))?",
    re.IGNORECASE,
)
_ARG = re.compile(r'"(?:[^"\\]|\\.)*"|\'(?:[^\'\\]|\\.)*\'|[^,\s]+')
_ACTION_LINE = re.compile(r"^\s*ACTION\s*:\s*(.+)$", re.IGNORECASE | re.MULTILINE)


def _args(raw: str | None) -> list:
    out = []
    for tok in _ARG.findall(raw or ""):
        if tok[0] in "\"'":
            out.append(ast.literal_eval(tok))
            continue
        tok = tok.lstrip("#")
        try:
            out.append(int(tok))
        except ValueError:
            try:
                out.append(float(tok))
            except ValueError:
                out.append(tok)
    return out


def _from_call(name: str, raw: str | None) -> Action:
    name = name.lower()
    args = _args(raw)
    if name in ("goto", "navigate"):
        raise ActionParseError("GOTO/URL navigation is not allowed; interact with the page instead")
    if name in ("click", "hover", "type"):
        nums = [a for a in args[:2] if isinstance(a, (int, float)) and not isinstance(a, bool)]
        if len(nums) < 2:
            raise ActionParseError(
                f"{name.upper()} requires coordinates [x, y]; text labels alone are not accepted"
            )
        if name == "type":
            if len(args) < 3 or not isinstance(args[2], str):
                raise ActionParseError('type needs text: type(x, y, "text")')
            return validate(Type(_coord(args[0], "x"), _coord(args[1], "y"), args[2]))
        cls = Click if name == "click" else Hover
        if len(args) != 2:
            raise ActionParseError(f"{name} takes exactly two coordinates")
        return validate(cls(_coord(args[0], "x"), _coord(args[1], "y")))
    if name.startswith("scroll"):
        direction = name.partition("_")[2] or (str(args[0]).lower() if args else "down")
        if direction == "to_bottom":
            direction = "bottom"
        return validate(Scroll(direction))
    if name == "select":
        if len(args) != 2:
            raise ActionParseError('select needs an element tag and an option: select(12, "4")')
        tag = args[0]
        if isinstance(tag, float) and tag.is_integer():
            tag = int(tag)
        return validate(Select(tag, str(args[1])))
    # terminate
    if not args:
        raise ActionParseError("terminate needs a status (success or failure)")
    reason = str(args[1]) if len(args) > 1 else ""
    return validate(Terminate(str(args[0]).lower().strip("'\""), reason))


def parse(text: str) -> Action:
    """Parse one action from model text.

    An explicit ``ACTION:`` line wins; otherwise the text must contain exactly
    one action call.
    """
    line = _ACTION_LINE.search(text)
    haystack = line.group(1) if line else text
    calls = list(_CALL.finditer(haystack))
    if not calls:
        raise ActionParseError("no action found; expected e.g. click(x, y)")
    if len(calls) > 1 and not line:
        names = ", ".join(m.group(1) or m.group(3) for m in calls)
        raise ActionParseError(f"execute only one action per turn (found {names})")
    m = calls[0]
    if m.group(3):
        return _from_call(m.group(3), None)
    return _from_call(m.group(1), m.group(2))
