import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from uxprobe.grounding import (
    RawElement,
    RawPage,
    denormalize_point,
    fully_covered,
    ground_observation,
    normalize_point,
)

from .oracles import pixel_covered


def test_midpoint_and_origin():
    assert normalize_point((960, 540), (1920, 1080)) == (500, 500)
    assert normalize_point((0, 0), (1920, 1080)) == (0, 0)
    assert denormalize_point((500, 500), (1920, 1080)) == (960, 540)
    assert denormalize_point((0, 0), (1920, 1080)) == (0, 0)


def test_clamped():
    assert normalize_point((2000, -5), (1920, 1080)) == (1000, 0)


@pytest.mark.parametrize("viewport", [(0, 10), (10, -1)])
def test_bad_viewport(viewport):
    with pytest.raises(ValueError):
        normalize_point((1, 1), viewport)


def test_roundtrip_random_points():
    rng = random.Random(7)
    for _ in range(1000):
        vw, vh = rng.randint(320, 2560), rng.randint(240, 2560)
        px, py = rng.randint(0, vw), rng.randint(0, vh)
        bx, by = denormalize_point(normalize_point((px, py), (vw, vh)), (vw, vh))
        assert abs(bx - px) <= 1 and abs(by - py) <= 1


def _btn(node, x, y, w=200, h=50, **kw):
    return RawElement(node_id=node, tag="button", bbox_px=(x, y, w, h), label=node, **kw)


def test_identity_viewport():
    obs = ground_observation(RawPage("https://a.test/", (_btn("go", 100, 100),)), (1000, 1000))
    assert len(obs.elements) == 1
    el = obs.elements[0]
    assert (el.tag_id, el.bbox_norm, el.role) == (1, (100, 100, 200, 50), "button")


def test_left_to_right_on_same_row():
    page = RawPage("https://a.test/", (_btn("right", 300, 100), _btn("left", 100, 100)))
    obs = ground_observation(page, (1000, 1000))
    assert [e.label for e in obs.elements] == ["left", "right"]
    assert [e.tag_id for e in obs.elements] == [1, 2]


def test_filters_hidden_offscreen_zero_area_noninteractive():
    page = RawPage(
        "https://a.test/",
        (
            _btn("hidden", 10, 10, visible=False),
            _btn("offscreen", 10, 2000),
            _btn("flat", 10, 10, w=0),
            _btn("deco", 10, 10, interactive=False),
            _btn("ok", 10, 300),
        ),
    )
    obs = ground_observation(page, (1000, 1000))
    assert [e.label for e in obs.elements] == ["ok"]


def test_modal_occludes_but_keeps_elements():
    backdrop = RawElement("backdrop", "div", (0, 0, 1000, 1000), z=10, interactive=False)
    close = _btn("close", 400, 400, z=11)
    page = RawPage("https://a.test/", (_btn("under", 100, 100), backdrop, close))
    obs = ground_observation(page, (1000, 1000))
    by_label = {e.label: e for e in obs.elements}
    assert by_label["under"].occluded is True
    assert by_label["close"].occluded is False


def test_deterministic():
    page = RawPage("https://a.test/", tuple(_btn(f"b{i}", (i * 37) % 900, (i * 91) % 900) for i in range(30)))
    assert ground_observation(page, (1280, 800)) == ground_observation(page, (1280, 800))


rects = st.tuples(st.integers(0, 40), st.integers(0, 40), st.integers(1, 25), st.integers(1, 25))


@given(rects, st.lists(rects, max_size=5))
def test_fully_covered_matches_raster_oracle(rect, covers):
    assert fully_covered(rect, covers) == pixel_covered(rect, covers)


@given(
    st.integers(320, 2560), st.integers(240, 1600),
    st.floats(0, 0.95), st.floats(0, 0.95), st.floats(0.01, 0.3), st.floats(0.01, 0.3),
)
def test_center_lands_in_pixel_bbox(vw, vh, fx, fy, fw, fh):
    bbox = (int(fx * vw), int(fy * vh), max(2, int(fw * vw)), max(2, int(fh * vh)))
    obs = ground_observation(RawPage("https://a.test/", (_btn("b", *bbox),)), (vw, vh))
    if not obs.elements:
        return
    cx, cy = denormalize_point(obs.elements[0].center(), (vw, vh))
    x, y, w, h = bbox
    w, h = min(w, vw - x), min(h, vh - y)
    assert x - 1 <= cx <= x + w + 1
    assert y - 1 <= cy <= y + h + 1
