import io

import pytest
from PIL import Image

from uxprobe.actions import Click, Scroll, Select, Type
from uxprobe.browser import DriverError
from uxprobe.browser.sim import SimBrowser
from uxprobe.grounding import ground_observation, normalize_point


def site(**faults):
    return {
        "schema": "uxprobe.sim/1",
        "viewport": [1000, 500],
        "start": "home",
        "vars": {"n": 1, "q": ""},
        "pages": {
            "home": {
                "url": "https://sim.test/",
                "height": 1500,
                "faults": faults,
                "elements": [
                    {"id": "go", "tag": "button", "label": "Go", "bbox": [100, 100, 100, 40], "click": {"navigate": "next"}},
                    {"id": "dead", "tag": "button", "label": "Nothing", "bbox": [300, 100, 100, 40], "click": {"dead": True}},
                    {"id": "plus", "tag": "button", "label": "+ ({n})", "bbox": [500, 100, 100, 40],
                     "click": {"incr": {"n": 1}, "cap": {"n": 3}}},
                    {"id": "q", "tag": "input", "label": "Search", "bbox": [100, 200, 300, 40], "type": {"store": "q"}},
                    {"id": "size", "tag": "select", "label": "Size {n}", "bbox": [500, 200, 100, 40],
                     "options": ["2", "3"], "select": {"store": "n"}},
                    {"id": "foot", "tag": "a", "label": "Help", "bbox": [100, 1400, 100, 30], "click": {"navigate": "next"}},
                    {"id": "slow", "tag": "button", "label": "Slow", "bbox": [700, 100, 100, 40], "click": {"timeout": True}},
                    {"id": "open", "tag": "button", "label": "Dialog", "bbox": [700, 200, 100, 40], "click": {"open_modal": "m"}},
                ],
            },
            "next": {"url": "https://sim.test/next", "elements": []},
        },
        "modals": {"m": {"elements": [
            {"id": "ok", "tag": "button", "label": "OK", "bbox": [400, 300, 200, 50], "click": {"close_modal": True}},
        ]}},
    }


def click(sim, node):
    obs = ground_observation(sim.snapshot().page, sim.viewport)
    el = next(e for e in obs.elements if e.node_id == node)
    return sim.act(Click(*el.center()), obs)


def test_navigate_changes_state():
    sim = SimBrowser(site())
    r = click(sim, "go")
    assert r.outcome.status == "applied" and r.outcome.state_changed
    assert sim.snapshot().page.url == "https://sim.test/next"


def test_dead_click_leaves_hash_alone():
    sim = SimBrowser(site())
    before = sim.state.digest()
    r = click(sim, "dead")
    assert not r.outcome.state_changed and sim.state.digest() == before


def test_label_tracks_state_and_cap():
    sim = SimBrowser(site())
    for _ in range(4):
        click(sim, "plus")
    labels = {e.node_id: e.label for e in sim.snapshot().page.elements}
    assert labels["plus"] == "+ (3)"


def test_desync_keeps_display_stale():
    sim = SimBrowser(site(state_desync=["n"]))
    r = click(sim, "plus")
    assert r.outcome.state_changed
    assert sim.state.values["n"] == "2"
    assert {e.node_id: e.label for e in sim.snapshot().page.elements}["plus"] == "+ (1)"


def test_type_and_select():
    sim = SimBrowser(site())
    obs = ground_observation(sim.snapshot().page, sim.viewport)
    q = next(e for e in obs.elements if e.node_id == "q")
    assert sim.act(Type(*q.center(), "tents"), obs).outcome.state_changed
    size = next(e for e in obs.elements if e.node_id == "size")
    assert sim.act(Select(size.tag_id, "3"), obs).outcome.state_changed
    bad = sim.act(Select(size.tag_id, "9"), obs)
    assert bad.outcome.status == "failed" and "not available" in bad.outcome.reason
    assert sim.state.values == {"n": "3", "q": "tents"}


def test_blocking_modal_occludes_page():
    sim = SimBrowser(site(blocking_modal="m"))
    obs = ground_observation(sim.snapshot().page, sim.viewport)
    by_node = {e.node_id: e for e in obs.elements}
    assert all(by_node[n].occluded for n in ("go", "dead", "q"))
    assert not by_node["ok"].occluded
    assert not sim.act(Click(*by_node["go"].center()), obs).outcome.state_changed
    click(sim, "ok")
    assert sim.state.modal is None


def test_unresponsive_page():
    sim = SimBrowser(site(unresponsive=True))
    assert not click(sim, "go").outcome.state_changed


def test_timeout_is_failed_outcome():
    r = click(SimBrowser(site()), "slow")
    assert r.outcome.status == "failed" and r.outcome.reason == "timeout"


def test_scroll_bottom_reveals_footer():
    sim = SimBrowser(site())
    assert "foot" not in {e.node_id for e in ground_observation(sim.snapshot().page, sim.viewport).elements}
    assert sim.act(Scroll("bottom")).outcome.state_changed
    assert not sim.act(Scroll("bottom")).outcome.state_changed
    assert sim.state.scroll_y == 1000
    assert click(sim, "foot").outcome.state_changed


def test_screenshot_matches_viewport_and_is_stable():
    a, b = SimBrowser(site()).snapshot().screenshot, SimBrowser(site()).snapshot().screenshot
    assert a == b
    assert Image.open(io.BytesIO(a)).size == (1000, 500)


def test_click_pixel_mapping():
    sim = SimBrowser(site())
    # the "go" button spans pixels 100..199 horizontally
    assert normalize_point((150, 120), sim.viewport) == (150, 240)
    assert sim.act(Click(150, 240)).outcome.state_changed


def test_bad_fixture_rejected():
    bad = site()
    bad["pages"]["home"]["elements"][0]["click"]["navigate"] = "nowhere"
    with pytest.raises(DriverError, match="nowhere"):
        SimBrowser(bad)
