"""Deterministic simulated website driven by a JSON page graph.

The fixture format (schema ``uxprobe.sim/1``) is documented in
``docs/sim-format.md``. Every action yields the same outcome, latency and
screenshot on every run, which is what replay tests and the acceptance suite
rely on.
"""

from __future__ import annotations

import copy
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..actions import Action, Click, Hover, Scroll, Select, Terminate, Type
from ..grounding import Observation, RawElement, RawPage, clip_to_viewport, denormalize_point, fully_covered
from ..session import ActionOutcome
from .base import ActResult, Capabilities, DriverError, Snapshot

SCHEMA = "uxprobe.sim/1"
BACKDROP_Z = 1000
MODAL_Z = 1001
NAVIGATE_SETTLE_MS = 300
DEFAULT_SETTLE_MS = 50


@dataclass
class SimState:
    page: str
    modal: Optional[str] = None
    scroll_y: int = 0
    values: dict = field(default_factory=dict)  # the site's real state
    shown: dict = field(default_factory=dict)  # what the UI displays

    def digest(self) -> str:
        blob = json.dumps(
            {"page": self.page, "modal": self.modal, "scroll": self.scroll_y, "values": self.values, "shown": self.shown},
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()


def load_site(path) -> dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    validate_site(data, str(path))
    return data


def validate_site(data: dict, source: str = "site") -> None:
    if data.get("schema") != SCHEMA:
        raise DriverError(f"{source}: expected schema {SCHEMA}, got {data.get('schema')!r}")
    pages, modals = data.get("pages") or {}, data.get("modals") or {}
    if data.get("start") not in pages:
        raise DriverError(f"{source}: start page {data.get('start')!r} is not defined")
    for pid, page in pages.items():
        blocking = (page.get("faults") or {}).get("blocking_modal")
        if blocking and blocking not in modals:
            raise DriverError(f"{source}: page {pid} blocks with unknown modal {blocking!r}")
        for el in page.get("elements", []) + [e for m in modals.values() for e in m.get("elements", [])]:
            for key in ("id", "bbox"):
                if key not in el:
                    raise DriverError(f"{source}: element in {pid} lacks {key!r}")
            for kind in ("click", "type", "select", "hover"):
                beh = el.get(kind) or {}
                if beh.get("navigate") and beh["navigate"] not in pages:
                    raise DriverError(f"{source}: {el['id']} navigates to unknown page {beh['navigate']!r}")
                if beh.get("open_modal") and beh["open_modal"] not in modals:
                    raise DriverError(f"{source}: {el['id']} opens unknown modal {beh['open_modal']!r}")


class SimBrowser:
    """Simulated site. ``act`` hit-tests in pixels exactly as a browser would."""

    capabilities = Capabilities("sim", screenshots=True, select_native=True, deterministic=True)

    def __init__(self, site, viewport=None, render=True):
        self.site = load_site(site) if isinstance(site, (str, Path)) else site
        if isinstance(site, dict):
            validate_site(site)
        self.viewport = tuple(viewport or self.site.get("viewport", (1280, 800)))
        self.render = render
        self.state = self._initial_state()
        self.history: list[str] = []

    # ---- state

    def _initial_state(self) -> SimState:
        values = {k: str(v) for k, v in (self.site.get("vars") or {}).items()}
        state = SimState(page=self.site["start"], values=values, shown=dict(values))
        self._enter(state, state.page)
        return state

    def _enter(self, state: SimState, page_id: str):
        state.page = page_id
        state.scroll_y = 0
        state.modal = (self._page(page_id).get("faults") or {}).get("blocking_modal")

    def _page(self, page_id=None) -> dict:
        return self.site["pages"][page_id or self.state.page]

    def _desynced(self, state: SimState) -> set:
        keys = set((self._page(state.page).get("faults") or {}).get("state_desync", ()))
        if state.modal:
            keys |= set((self.site["modals"][state.modal].get("faults") or {}).get("state_desync", ()))
        return keys

    def open(self, url: str) -> None:
        for pid, page in self.site["pages"].items():
            if page.get("url") == url:
                self.state = self._initial_state()
                self._enter(self.state, pid)
                return
        self.state = self._initial_state()

    def close(self) -> None:
        pass

    # ---- layout

    def _visible(self, el) -> bool:
        if not el.get("visible", True):
            return False
        cond = el.get("show_if") or {}
        return all(self.state.values.get(k) == str(v) for k, v in cond.items())

    def _layout(self):
        """(element, viewport bbox, z, in_modal) for everything currently drawn."""
        out = []
        page = self._page()
        for el in page.get("elements", []):
            if not self._visible(el):
                continue
            x, y, w, h = el["bbox"]
            fixed = el.get("fixed", False)
            box = (x, y if fixed else y - self.state.scroll_y, w, h)
            out.append((el, box, el.get("z", 10 if fixed else 0), False))
        if self.state.modal:
            modal = self.site["modals"][self.state.modal]
            if modal.get("backdrop", True):
                backdrop = {"id": f"{self.state.modal}-backdrop", "tag": "div", "interactive": False}
                out.append((backdrop, (0, 0, *self.viewport), BACKDROP_Z, True))
            for el in modal.get("elements", []):
                if self._visible(el):
                    out.append((el, tuple(el["bbox"]), MODAL_Z + el.get("z", 0), True))
        return out

    def _label(self, el) -> str:
        label = el.get("label", "")
        try:
            return label.format(**self.state.shown)
        except (KeyError, IndexError, ValueError):
            return label

    def snapshot(self) -> Snapshot:
        layout = self._layout()
        clipped_all = [clip_to_viewport(box, self.viewport) for _, box, _, _ in layout]
        elements = []
        for (el, box, z, _), clipped in zip(layout, clipped_all):
            higher = [c for (_, _, oz, _), c in zip(layout, clipped_all) if c is not None and oz > z]
            elements.append(RawElement(
                node_id=el["id"],
                tag=el.get("tag", "div"),
                bbox_px=tuple(box),
                label=self._label(el),
                role=el.get("role"),
                input_type=el.get("input_type"),
                options=tuple(el.get("options", ())),
                z=z,
                interactive=el.get("interactive", True),
                occluded=clipped is not None and fully_covered(clipped, higher),
            ))
        page = self._page()
        raw = RawPage(page.get("url", ""), tuple(elements), (0, self.state.scroll_y), page.get("title", ""))
        png = self._screenshot(layout) if self.render else b""
        return Snapshot(raw, png, self.viewport)

    def _screenshot(self, layout) -> bytes:
        from PIL import Image, ImageDraw

        img = Image.new("RGB", self.viewport, (255, 255, 255))
        draw = ImageDraw.Draw(img, "RGBA")
        for el, (x, y, w, h), z, _ in sorted(layout, key=lambda t: t[2]):
            if z == BACKDROP_Z:
                draw.rectangle([0, 0, self.viewport[0], self.viewport[1]], fill=(0, 0, 0, 110))
                continue
            fill = (238, 238, 238) if el.get("interactive", True) else (250, 250, 250)
            draw.rectangle([x, y, x + w, y + h], fill=fill, outline=(90, 90, 90))
            draw.text((x + 4, y + max(0, h // 2 - 6)), self._label(el)[:60], fill=(20, 20, 20))
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    def _hit(self, px, py):
        layout = self._layout()
        hits = [(z, i, el, in_modal) for i, (el, (x, y, w, h), z, in_modal) in enumerate(layout)
                if x <= px < x + w and y <= py < y + h]
        if not hits:
            return None, False
        _, _, el, in_modal = max(hits, key=lambda t: (t[0], t[1]))
        return el, in_modal

    # ---- actions

    def act(self, action: Action, observation: Optional[Observation] = None) -> ActResult:
        before = self.state.digest()
        saved = copy.deepcopy(self.state)
        status, reason, latency = self._dispatch(action, observation)
        if status != "applied":
            self.state = saved
        changed = self.state.digest() != before
        self.history.append(before)
        return ActResult(ActionOutcome(status, reason, changed), latency)

    def _dispatch(self, action, observation):
        if isinstance(action, Terminate):
            return "applied", "", 0
        if isinstance(action, Scroll):
            if self.state.modal:
                return "applied", "", DEFAULT_SETTLE_MS
            height = self._page().get("height", self.viewport[1])
            max_scroll = max(0, height - self.viewport[1])
            step = int(self.viewport[1] * 0.8)
            y = self.state.scroll_y
            y = {"up": y - step, "down": y + step, "bottom": max_scroll}[action.direction]
            self.state.scroll_y = max(0, min(max_scroll, y))
            return "applied", "", DEFAULT_SETTLE_MS
        if isinstance(action, Select):
            el = self._element_for_tag(action.tag_id, observation)
            if el is None:
                return "failed", f"element [{action.tag_id}] not found", 0
            if self.state.modal and not self._in_modal(el):
                return "failed", "element is covered by a dialog", 0
            if action.option not in el.get("options", ()):
                return "failed", f"option {action.option!r} not available", 0
            return self._behave(el, "select", action.option)
        viewport = observation.viewport if observation else self.viewport
        px, py = denormalize_point((action.x, action.y), viewport)
        el, _ = self._hit(px, py)
        if el is None:
            return "applied", "", DEFAULT_SETTLE_MS
        if isinstance(action, Hover):
            return self._behave(el, "hover")
        if isinstance(action, Type):
            return self._behave(el, "type", action.text)
        if isinstance(action, Click):
            return self._behave(el, "click")
        raise DriverError(f"unsupported action {action!r}")

    def _in_modal(self, el) -> bool:
        return bool(self.state.modal) and el in self.site["modals"][self.state.modal].get("elements", [])

    def _element_for_tag(self, tag_id, observation):
        node = observation.by_tag(tag_id).node_id if observation and observation.by_tag(tag_id) else None
        for el, _, _, _ in self._layout():
            if el.get("id") == node:
                return el
        return None

    def _behave(self, el, kind, value=None):
        if not el.get("interactive", True):
            return "applied", "", DEFAULT_SETTLE_MS
        if kind != "select" and not self._in_modal(el) and (self._page().get("faults") or {}).get("unresponsive"):
            return "applied", "", DEFAULT_SETTLE_MS
        beh = el.get(kind)
        if not beh or beh.get("dead"):
            return "applied", "", DEFAULT_SETTLE_MS
        if beh.get("timeout"):
            return "failed", "timeout", beh.get("settle_ms", 10_000)
        s = self.state
        if beh.get("store") and value is not None:
            s.values[beh["store"]] = value
        for k, v in (beh.get("set") or {}).items():
            s.values[k] = str(v)
        for k, n in (beh.get("incr") or {}).items():
            cap = (beh.get("cap") or {}).get(k)
            new = int(s.values.get(k, "0")) + int(n)
            s.values[k] = str(min(new, cap) if cap is not None else new)
        if beh.get("close_modal"):
            s.modal = None
        if beh.get("open_modal"):
            s.modal = beh["open_modal"]
        settle = beh.get("settle_ms", DEFAULT_SETTLE_MS)
        if beh.get("navigate"):
            self._enter(s, beh["navigate"])
            settle = beh.get("settle_ms", NAVIGATE_SETTLE_MS)
        frozen = self._desynced(s)
        if beh.get("desync"):
            frozen |= {beh.get("store"), *(beh.get("set") or {}), *(beh.get("incr") or {})}
        for k, v in s.values.items():
            if k not in frozen:
                s.shown[k] = v
        return "applied", "", settle

