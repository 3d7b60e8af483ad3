"""Grounded observations: tag interactive elements and map pixels to the 1000x1000 grid.

A driver hands over a :class:`RawPage` (element geometry in viewport pixels).
:func:`ground_observation` keeps the elements a user could act on, orders them
top-to-bottom then left-to-right, and numbers them 1..N. Elements hidden
behind something drawn above them stay in the list with ``occluded=True``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

SCREEN_SIZE = 1000
ROLES = ("button", "link", "input", "select", "checkbox", "other")

# html tag -> grounded role, used when the driver gives no explicit role
_TAG_ROLES = {
    "button": "button",
    "a": "link",
    "input": "input",
    "textarea": "input",
    "select": "select",
}


@dataclass(frozen=True)
class RawElement:
    node_id: str
    tag: str
    bbox_px: tuple[int, int, int, int]  # x, y, w, h in viewport pixels
    label: str = ""
    role: Optional[str] = None
    input_type: Optional[str] = None
    options: tuple[str, ...] = ()
    z: int = 0
    visible: bool = True
    interactive: bool = True
    occluded: bool = False  # driver-side hint, OR'ed with the geometric test


@dataclass(frozen=True)
class RawPage:
    url: str
    elements: tuple[RawElement, ...]
    scroll_offset: tuple[int, int] = (0, 0)
    title: str = ""


@dataclass(frozen=True)
class GroundedElement:
    tag_id: int
    role: str
    label: str
    bbox_norm: tuple[int, int, int, int]
    occluded: bool = False
    node_id: str = ""
    input_type: Optional[str] = None
    options: tuple[str, ...] = ()

    def center(self) -> tuple[int, int]:
        x, y, w, h = self.bbox_norm
        return x + w // 2, y + h // 2

    def contains(self, x, y) -> bool:
        bx, by, bw, bh = self.bbox_norm
        return bx <= x <= bx + bw and by <= y <= by + bh

    def to_dict(self):
        return {
            "tag_id": self.tag_id,
            "role": self.role,
            "label": self.label,
            "bbox_norm": list(self.bbox_norm),
            "occluded": self.occluded,
            "node_id": self.node_id,
            "input_type": self.input_type,
            "options": list(self.options),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["tag_id"], d["role"], d["label"], tuple(d["bbox_norm"]), d.get("occluded", False),
            d.get("node_id", ""), d.get("input_type"), tuple(d.get("options", ())),
        )


@dataclass(frozen=True)
class Observation:
    elements: tuple[GroundedElement, ...]
    viewport: tuple[int, int]
    scroll_offset: tuple[int, int] = (0, 0)
    page_url: str = ""
    title: str = ""
    screenshot_ref: str = ""

    def __post_init__(self):
        if self.viewport[0] <= 0 or self.viewport[1] <= 0:
            raise ValueError(f"viewport dimensions must be positive, got {self.viewport}")

    def by_tag(self, tag_id) -> Optional[GroundedElement]:
        for el in self.elements:
            if el.tag_id == tag_id:
                return el
        return None

    def element_at(self, x, y) -> Optional[GroundedElement]:
        """Element under a normalized point; unoccluded and smallest first."""
        hits = [el for el in self.elements if el.contains(x, y)]
        if not hits:
            return None
        hits.sort(key=lambda el: (el.occluded, el.bbox_norm[2] * el.bbox_norm[3], el.tag_id))
        return hits[0]

    def to_dict(self):
        return {
            "elements": [el.to_dict() for el in self.elements],
            "viewport": list(self.viewport),
            "scroll_offset": list(self.scroll_offset),
            "page_url": self.page_url,
            "title": self.title,
        }

    def element_table(self) -> str:
        """Side table sent to the model next to the screenshot."""
        if not self.elements:
            return "(no interactive elements visible)"
        rows = []
        for el in self.elements:
            x, y = el.center()
            extra = ""
            if el.options:
                extra = " options=[" + ", ".join(el.options) + "]"
            if el.input_type:
                extra += f" type={el.input_type}"
            if el.occluded:
                extra += " (covered)"
            rows.append(f"[{el.tag_id}] {el.role} '{el.label}' at ({x}, {y}){extra}")
        return "\n".join(rows)


def _check_viewport(viewport):
    w, h = viewport
    if w <= 0 or h <= 0:
        raise ValueError(f"viewport dimensions must be positive, got {viewport}")
    return w, h


def _round(v: float) -> int:
    # half-up; Python's round() is banker's rounding
    return int(v + 0.5) if v >= 0 else -int(-v + 0.5)


def normalize_point(p, viewport) -> tuple[int, int]:
    """Viewport pixels -> integer coordinates on the 1000x1000 grid."""
    w, h = _check_viewport(viewport)
    x = min(max(_round(p[0] * SCREEN_SIZE / w), 0), SCREEN_SIZE)
    y = min(max(_round(p[1] * SCREEN_SIZE / h), 0), SCREEN_SIZE)
    return x, y


def denormalize_point(p, viewport) -> tuple[int, int]:
    """Grid coordinates -> viewport pixels (inverse of :func:`normalize_point`)."""
    w, h = _check_viewport(viewport)
    x = min(max(_round(p[0] * w / SCREEN_SIZE), 0), w)
    y = min(max(_round(p[1] * h / SCREEN_SIZE), 0), h)
    return x, y


def normalize_bbox(bbox, viewport) -> tuple[int, int, int, int]:
    x0, y0 = normalize_point((bbox[0], bbox[1]), viewport)
    x1, y1 = normalize_point((bbox[0] + bbox[2], bbox[1] + bbox[3]), viewport)
    return x0, y0, x1 - x0, y1 - y0


def clip_to_viewport(bbox, viewport):
    """Intersection of a pixel bbox with the viewport, or None if it lies outside."""
    w, h = viewport
    x0, y0 = max(bbox[0], 0), max(bbox[1], 0)
    x1, y1 = min(bbox[0] + bbox[2], w), min(bbox[1] + bbox[3], h)
    if x1 <= x0 or y1 <= y0:
        return None
    return x0, y0, x1 - x0, y1 - y0


def fully_covered(rect, covers: Sequence) -> bool:
    """True if the union of ``covers`` contains ``rect`` (all in pixels)."""
    x, y, w, h = rect
    if w <= 0 or h <= 0:
        return False
    clipped = []
    for c in covers:
        cx0, cy0 = max(c[0], x), max(c[1], y)
        cx1, cy1 = min(c[0] + c[2], x + w), min(c[1] + c[3], y + h)
        if cx1 > cx0 and cy1 > cy0:
            clipped.append((cx0, cy0, cx1, cy1))
    if not clipped:
        return False
    xs = sorted({x, x + w, *(c[0] for c in clipped), *(c[2] for c in clipped)})
    ys = sorted({y, y + h, *(c[1] for c in clipped), *(c[3] for c in clipped)})
    # every cell of the compressed grid must be inside some cover
    for xa, xb in zip(xs, xs[1:]):
        mx = (xa + xb) / 2
        for ya, yb in zip(ys, ys[1:]):
            my = (ya + yb) / 2
            if not any(c[0] <= mx < c[2] and c[1] <= my < c[3] for c in clipped):
                return False
    return True


def element_role(el: RawElement) -> str:
    if el.role in ROLES:
        return el.role
    tag = el.tag.lower()
    if tag == "input" and (el.input_type or "").lower() in ("checkbox", "radio"):
        return "checkbox"
    return _TAG_ROLES.get(tag, "other")


def ground_observation(raw_page: RawPage, viewport, screenshot_ref: str = "") -> Observation:
    """Filter, order and tag the interactive elements of a page dump."""
    viewport = _check_viewport(viewport)
    shown = []
    for el in raw_page.elements:
        if not el.visible:
            continue
        clipped = clip_to_viewport(el.bbox_px, viewport)
        if clipped is None or clipped[2] * clipped[3] < 1:
            continue
        shown.append((el, clipped))

    # Anything drawn above an element can hide it, interactive or not (modal
    # backdrops usually are not).
    grounded = []
    for el, clipped in shown:
        if not el.interactive:
            continue
        higher = [c for other, c in shown if other.z > el.z]
        occluded = el.occluded or fully_covered(clipped, higher)
        grounded.append((clipped[1], clipped[0], el.node_id, el, clipped, occluded))
    grounded.sort(key=lambda t: (t[0], t[1], t[2]))

    elements = tuple(
        GroundedElement(
            tag_id=i,
            role=element_role(el),
            label=el.label,
            bbox_norm=normalize_bbox(clipped, viewport),
            occluded=occluded,
            node_id=el.node_id,
            input_type=el.input_type,
            options=tuple(el.options),
        )
        for i, (_, _, _, el, clipped, occluded) in enumerate(grounded, start=1)
    )
    return Observation(
        elements=elements,
        viewport=viewport,
        scroll_offset=tuple(raw_page.scroll_offset),
        page_url=raw_page.url,
        title=raw_page.title,
        screenshot_ref=screenshot_ref,
    )


class GroundingProvider(Protocol):
    def ground(self, raw_page: RawPage, viewport, screenshot: bytes) -> Observation: ...


@dataclass
class GeometryGrounding:
    """Default provider: the driver's element dump plus geometry, no vision model."""

    name: str = field(default="geometry")

    def ground(self, raw_page: RawPage, viewport, screenshot: bytes = b"") -> Observation:
        return ground_observation(raw_page, viewport)


def render_overlay(screenshot: bytes, observation: Observation) -> bytes:
    """Debug aid: draw the numeric tags onto the screenshot (PNG in, PNG out)."""
    import io

    from PIL import Image, ImageDraw

    img = Image.open(io.BytesIO(screenshot)).convert("RGB")
    draw = ImageDraw.Draw(img)
    for el in observation.elements:
        x0, y0 = denormalize_point(el.bbox_norm[:2], observation.viewport)
        x1, y1 = denormalize_point(
            (el.bbox_norm[0] + el.bbox_norm[2], el.bbox_norm[1] + el.bbox_norm[3]), observation.viewport
        )
        color = (150, 150, 150) if el.occluded else (220, 30, 30)
        draw.rectangle([x0, y0, x1, y1], outline=color, width=2)
        draw.rectangle([x0, y0, x0 + 22, y0 + 14], fill=color)
        draw.text((x0 + 3, y0 + 1), str(el.tag_id), fill=(255, 255, 255))
    out = io.BytesIO()
    img.save(out, format="PNG")
    return out.getvalue()
