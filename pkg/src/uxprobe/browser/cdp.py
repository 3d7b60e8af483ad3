"""Real-browser driver over the Chrome DevTools Protocol.

Connects to an already running Chromium started with
``--remote-debugging-port``. Element geometry comes from a small script run in
the page; input goes through ``Input.dispatch*`` so the page sees real events.
"""

from __future__ import annotations

import base64
import itertools
import json
import logging
import time
from typing import Callable, Optional

import httpx

from ..actions import Action, Click, Hover, Scroll, Select, Terminate, Type
from ..grounding import Observation, RawElement, RawPage, denormalize_point
from ..session import ActionOutcome
from .base import ActResult, Capabilities, DriverError, Snapshot

log = logging.getLogger(__name__)

# Collects candidate interactive elements, tags each with data-uxprobe-id and
# reports geometry plus an occlusion hint from elementFromPoint at the centre.
DUMP_JS = r"""
(() => {
  const sel = 'a[href],button,input,select,textarea,[role=button],[role=link],[role=checkbox],[onclick],[tabindex]:not([tabindex="-1"])';
  const out = [];
  let n = 0;
  for (const el of document.querySelectorAll(sel)) {
    const r = el.getBoundingClientRect();
    const cs = getComputedStyle(el);
    const visible = r.width > 0 && r.height > 0 && cs.visibility !== 'hidden' && cs.display !== 'none' && parseFloat(cs.opacity) > 0;
    if (!el.dataset.uxprobeId) el.dataset.uxprobeId = 'n' + (++n) + '-' + Math.random().toString(36).slice(2, 6);
    let occluded = false;
    if (visible) {
      const cx = r.left + r.width / 2, cy = r.top + r.height / 2;
      const top = document.elementFromPoint(cx, cy);
      occluded = !!top && top !== el && !el.contains(top) && !top.contains(el);
    }
    const label = (el.getAttribute('aria-label') || el.innerText || el.value || el.placeholder || el.title || el.alt || '').trim().replace(/\s+/g, ' ').slice(0, 120);
    out.push({
      id: el.dataset.uxprobeId, tag: el.tagName.toLowerCase(), role: el.getAttribute('role'),
      type: el.getAttribute('type'), label, visible, occluded,
      bbox: [Math.round(r.left), Math.round(r.top), Math.round(r.width), Math.round(r.height)],
      options: el.tagName === 'SELECT' ? Array.from(el.options).map(o => o.text.trim()) : [],
    });
  }
  return JSON.stringify({url: location.href, title: document.title, scroll: [Math.round(scrollX), Math.round(scrollY)], elements: out});
})()
"""

# Cheap fingerprint of what the user can see; compared before and after acting.
STATE_JS = r"""
(() => {
  const s = location.href + '|' + scrollY + '|' + document.body.innerText.length + '|' + document.getElementsByTagName('*').length + '|' +
    Array.from(document.querySelectorAll('input,select,textarea')).map(e => e.value).join('\u0001');
  let h = 0;
  for (let i = 0; i < s.length; i++) h = (h * 31 + s.charCodeAt(i)) | 0;
  return String(h) + ':' + document.readyState;
})()
"""

SELECT_JS = r"""
((id, option) => {
  const el = document.querySelector('[data-uxprobe-id="' + id + '"]');
  if (!el) return 'missing';
  const opt = Array.from(el.options).find(o => o.text.trim() === option || o.value === option);
  if (!opt) return 'no-option';
  el.value = opt.value;
  el.dispatchEvent(new Event('input', {bubbles: true}));
  el.dispatchEvent(new Event('change', {bubbles: true}));
  return 'ok';
})
"""


class CdpError(DriverError):
    pass


class CdpConnection:
    """Minimal request/response client on the DevTools websocket."""

    def __init__(self, ws_url: str, timeout: float = 30.0):
        from websockets.sync.client import connect

        self._ws = connect(ws_url, max_size=None, open_timeout=timeout)
        self._ids = itertools.count(1)
        self.timeout = timeout
        self.events: list[dict] = []

    def send(self, method: str, params: Optional[dict] = None, timeout: Optional[float] = None) -> dict:
        msg_id = next(self._ids)
        self._ws.send(json.dumps({"id": msg_id, "method": method, "params": params or {}}))
        deadline = time.monotonic() + (timeout or self.timeout)
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError(f"{method} timed out")
            data = json.loads(self._ws.recv(timeout=remaining))
            if data.get("id") == msg_id:
                if "error" in data:
                    raise CdpError(f"{method}: {data['error'].get('message')}")
                return data.get("result", {})
            self.events.append(data)

    def close(self):
        self._ws.close()


def discover_target(endpoint: str, client: Optional[httpx.Client] = None) -> str:
    """Websocket URL of the first page target of a browser's debugging endpoint."""
    client = client or httpx.Client(timeout=10)
    try:
        targets = client.get(endpoint.rstrip("/") + "/json/list").json()
    except httpx.HTTPError as exc:
        raise CdpError(f"cannot reach browser at {endpoint}: {exc}") from exc
    for t in targets:
        if t.get("type") == "page" and t.get("webSocketDebuggerUrl"):
            return t["webSocketDebuggerUrl"]
    raise CdpError(f"no page target at {endpoint}")


class CdpBrowser:
    capabilities = Capabilities("cdp", screenshots=True, select_native=True, deterministic=False)

    def __init__(self, endpoint="http://127.0.0.1:9222", viewport=(1280, 800), connection=None,
                 quiet_window=0.3, settle_cap=10.0, poll=0.1,
                 clock: Callable[[], float] = time.monotonic, sleep: Callable = time.sleep):
        self.viewport = tuple(viewport)
        self.conn = connection or CdpConnection(discover_target(endpoint))
        self.quiet_window = quiet_window
        self.settle_cap = settle_cap
        self.poll = poll
        self._clock = clock
        self._sleep = sleep
        self.conn.send("Page.enable")
        self.conn.send("Emulation.setDeviceMetricsOverride", {
            "width": self.viewport[0], "height": self.viewport[1], "deviceScaleFactor": 1, "mobile": False,
        })

    def _eval(self, expression: str):
        res = self.conn.send("Runtime.evaluate", {"expression": expression, "returnByValue": True})
        if "exceptionDetails" in res:
            raise CdpError(f"page script failed: {res['exceptionDetails'].get('text')}")
        return res.get("result", {}).get("value")

    def _fingerprint(self) -> str:
        return self._eval(STATE_JS) or ""

    def wait_quiet(self) -> int:
        """Poll the fingerprint until it holds still for ``quiet_window``; returns ms waited."""
        start = self._clock()
        last, stable_since = None, start
        while True:
            now = self._clock()
            fp = self._fingerprint()
            if fp != last or not fp.endswith(":complete"):
                last, stable_since = fp, now
            elif now - stable_since >= self.quiet_window:
                break
            if now - start >= self.settle_cap:
                log.info("page did not settle within %.1fs", self.settle_cap)
                break
            self._sleep(self.poll)
        return int(round((self._clock() - start) * 1000))

    def open(self, url: str) -> None:
        self.conn.send("Page.navigate", {"url": url})
        self.wait_quiet()

    def snapshot(self) -> Snapshot:
        dump = json.loads(self._eval(DUMP_JS))
        elements = tuple(
            RawElement(
                node_id=e["id"], tag=e["tag"], bbox_px=tuple(e["bbox"]), label=e.get("label", ""),
                role=e.get("role"), input_type=e.get("type"), options=tuple(e.get("options", ())),
                visible=e.get("visible", True), occluded=e.get("occluded", False),
            )
            for e in dump["elements"]
        )
        shot = self.conn.send("Page.captureScreenshot", {"format": "png"})
        png = base64.b64decode(shot.get("data", ""))
        return Snapshot(RawPage(dump["url"], elements, tuple(dump["scroll"]), dump.get("title", "")), png, self.viewport)

    def _mouse(self, kind, x, y, **extra):
        self.conn.send("Input.dispatchMouseEvent", {"type": kind, "x": x, "y": y, **extra})

    def _click(self, x, y):
        self._mouse("mouseMoved", x, y)
        self._mouse("mousePressed", x, y, button="left", clickCount=1)
        self._mouse("mouseReleased", x, y, button="left", clickCount=1)

    def act(self, action: Action, observation: Optional[Observation] = None) -> ActResult:
        if isinstance(action, Terminate):
            return ActResult(ActionOutcome("applied", "", False), 0)
        try:
            before = self._fingerprint()
            failure = self._dispatch(action, observation)
            if failure:
                return ActResult(ActionOutcome("failed", failure, False), 0)
            latency = self.wait_quiet()
            after = self._fingerprint()
        except TimeoutError:
            return ActResult(ActionOutcome("failed", "timeout", False), int(self.settle_cap * 1000))
        except (ConnectionError, OSError) as exc:
            return ActResult(ActionOutcome("failed", f"page gone: {exc}", False), 0)
        return ActResult(ActionOutcome("applied", "", before.split(":")[0] != after.split(":")[0]), latency)

    def _dispatch(self, action, observation) -> str:
        viewport = observation.viewport if observation else self.viewport
        if isinstance(action, Scroll):
            js = {"up": "window.scrollBy(0, -0.8 * innerHeight)", "down": "window.scrollBy(0, 0.8 * innerHeight)",
                  "bottom": "window.scrollTo(0, document.documentElement.scrollHeight)"}[action.direction]
            self._eval(js)
            return ""
        if isinstance(action, Select):
            el = observation.by_tag(action.tag_id) if observation else None
            if el is None:
                return f"element [{action.tag_id}] not found"
            res = self._eval(f"({SELECT_JS})({json.dumps(el.node_id)}, {json.dumps(action.option)})")
            return "" if res == "ok" else {"missing": "element gone", "no-option": f"option {action.option!r} not available"}.get(res, str(res))
        x, y = denormalize_point((action.x, action.y), viewport)
        if isinstance(action, Hover):
            self._mouse("mouseMoved", x, y)
        elif isinstance(action, Click):
            self._click(x, y)
        elif isinstance(action, Type):
            self._click(x, y)
            self.conn.send("Input.insertText", {"text": action.text})
        return ""

    def close(self) -> None:
        close = getattr(self.conn, "close", None)
        if close:
            close()
