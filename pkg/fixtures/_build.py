"""Regenerate the replay fixtures in this directory.

Each fixture directory holds a simulated site (site.json), the scripted model
replies in call order (script.json), optionally canned search results
(search.json), and a config.toml tying them together. Click coordinates are
derived from the site geometry so the two files cannot drift apart.

    python3 fixtures/_build.py
"""

from __future__ import annotations

import json
from pathlib import Path

from uxprobe.grounding import clip_to_viewport, normalize_bbox

HERE = Path(__file__).parent
VIEWPORT = (1280, 800)


def center(bbox, scroll_y=0, viewport=VIEWPORT):
    """Where the element table tells the model the element is."""
    x, y, w, h = bbox
    nx, ny, nw, nh = normalize_bbox(clip_to_viewport((x, y - scroll_y, w, h), viewport), viewport)
    return nx + nw // 2, ny + nh // 2


def el(id, tag, label, bbox, **kw):
    return {"id": id, "tag": tag, "label": label, "bbox": list(bbox), **kw}


def decide(think, action):
    return {"role": "reasoning", "json": {"think_aloud": think, "action": action}}


def assess(seq, eff, cla, con, notes, tags=()):
    e, c, k = notes
    return {"role": "ux", "json": {
        "seq": seq, "efficiency": eff, "clarity": cla, "confidence": con,
        "efficiency_note": e, "clarity_note": c, "confidence_note": k, "friction_tags": list(tags),
    }}


def checklist(items, statuses):
    return {"role": "checklist", "json": {"items": [{"text": t, "status": s} for t, s in zip(items, statuses)]}}


def write(name, site, script, config, search=None):
    d = HERE / name
    d.mkdir(exist_ok=True)
    (d / "site.json").write_text(json.dumps(site, indent=2) + "\n")
    (d / "script.json").write_text(json.dumps({"schema": "uxprobe.script/1", "responses": script}, indent=2) + "\n")
    if search is not None:
        (d / "search.json").write_text(json.dumps({"results": search}, indent=2) + "\n")
    (d / "config.toml").write_text(config.strip() + "\n")


# ---------------------------------------------------------------- discogs

def discogs():
    accept = (990, 685, 82, 32)
    guidelines = (350, 2855, 110, 31)
    site = {
        "schema": "uxprobe.sim/1", "viewport": list(VIEWPORT), "start": "home",
        "pages": {
            "home": {
                "url": "https://www.discogs.com/", "title": "Discogs - Music Database and Marketplace", "height": 3000,
                "faults": {"blocking_modal": "cookies"},
                "elements": [
                    el("search", "input", "Search artists, albums and more", (300, 20, 520, 40)),
                    el("explore", "a", "Explore", (860, 20, 90, 40), click={"dead": True}),
                    el("marketplace", "a", "Marketplace", (960, 20, 120, 40), click={"dead": True}),
                    el("trending", "a", "Trending releases", (100, 400, 400, 300), click={"dead": True}),
                    el("about", "a", "About Discogs", (100, 2855, 140, 30), click={"dead": True}),
                    el("guidelines", "a", "Database Guidelines", guidelines, click={"navigate": "guidelines"}),
                    el("help", "a", "Help & Support", (600, 2855, 140, 30), click={"dead": True}),
                ],
            },
            "guidelines": {
                "url": "https://support.discogs.com/hc/en-us/articles/database-guidelines",
                "title": "Database Guidelines - Discogs Support", "height": 2000,
                "elements": [
                    el("toc-general", "a", "1. General Rules", (100, 200, 300, 30)),
                    el("toc-submit", "a", "Submitting a Release", (100, 240, 300, 30)),
                ],
            },
        },
        "modals": {"cookies": {"backdrop": False, "elements": [
            el("cookie-text", "div", "We use cookies to improve your experience", (0, 640, 1280, 160), interactive=False, z=-1),
            el("cookie-accept", "button", "Accept All", accept, click={"close_modal": True}),
            el("cookie-settings", "button", "Cookie Settings", (850, 685, 130, 32)),
        ]}},
    }
    items = ["Homepage loaded", "Help or footer links found", "Submission guidelines page open"]
    ax, ay = center(accept)
    gx, gy = center(guidelines, scroll_y=3000 - VIEWPORT[1])
    assert (ax, ay) == (805, 876) and (gx, gy) == (316, 838), ((ax, ay), (gx, gy))
    script = [
        {"role": "reasoning", "text": (
            "Dismiss the cookie banner first so it does not cover the page. "
            "Scroll to the footer, where Discogs keeps its help and policy links. "
            "Open the Database Guidelines link there to read the submission rules.")},
        {"role": "checklist", "json": {"items": items}},
        decide("A cookie banner covers the bottom of the page. I will accept it so I can use the site.",
               f"click({ax}, {ay})"),
        assess(6, 6, 6, 6, ("One click cleared the banner.", "The Accept All button was clearly labelled.",
                            "The banner closed right away.")),
        checklist(items, ["completed", "pending", "pending"]),
        decide("The roadmap says the guidelines live in the footer, so I will jump to the bottom of the page.",
               "scroll_bottom"),
        assess(5, 5, 5, 5, ("The page is long and the footer is far down.",
                            "Nothing on the first screen pointed to the guidelines.",
                            "I am fairly sure the footer holds the link."), ["scrolling"]),
        checklist(items, ["completed", "in_progress", "pending"]),
        decide("The footer shows a Database Guidelines link next to Help & Support. That is what I need.",
               f"click({gx}, {gy})"),
        assess(6, 6, 6, 6, ("The link was in the expected place.", "The footer labels are plain.",
                            "The guidelines page opened.")),
        checklist(items, ["completed", "completed", "pending"]),
        decide("The guidelines page is open and lists the rules for submitting a release. The task is done.",
               'terminate(success, "database guidelines page found")'),
        assess(7, 7, 7, 7, ("Done in four steps.", "The page title matches the goal.", "I found what I was asked for.")),
        checklist(items, ["completed", "completed", "completed"]),
        {"role": "ux", "json": {"responses": [5, 1, 5, 2, 4, 2, 5, 2, 4, 1],
                                "rationale": "Short, direct session; only the long scroll cost effort."}},
    ]
    search = [
        {"title": "Discogs Help: Database Guidelines", "url": "https://support.discogs.com/hc/en-us/articles/database-guidelines",
         "snippet": "Rules for adding and editing releases. Linked from the site footer."},
        {"title": "Discogs Help Center", "url": "https://support.discogs.com/hc/en-us",
         "snippet": "Help topics, including how to submit releases to the database."},
    ]
    config = """
[run]
url = "https://www.discogs.com/"
task = "Find the Discogs guidelines for submitting releases to the database"
persona = "record collector who wants to contribute a release"
fixed_clock = "2026-03-02T10:00:00Z"

[driver]
kind = "sim"
site = "site.json"

[gateway]
kind = "scripted"
script = "script.json"

[search]
kind = "fixture"
fixture = "search.json"

[synthesis]
sus = "model"
"""
    write("discogs", site, script, config, search)


# ---------------------------------------------------------------- recreation

def recreation():
    search_box = (340, 300, 600, 48)
    result = (200, 220, 700, 90)
    dates = (820, 260, 300, 48)
    check = (820, 420, 300, 56)
    sat = (560, 330, 60, 48)
    date_input = (360, 200, 300, 40)
    toggle = (360, 470, 300, 40)
    plus = (680, 530, 40, 40)
    party = (360, 590, 300, 40)
    apply_btn = (700, 660, 120, 44)
    close_btn = (860, 150, 40, 40)
    site = {
        "schema": "uxprobe.sim/1", "viewport": list(VIEWPORT), "start": "home",
        "vars": {"query": "", "date": "", "adults": 1, "guests_open": 0},
        "pages": {
            "home": {
                "url": "https://www.recreation.gov/", "title": "Recreation.gov", "height": 2400,
                "elements": [
                    el("search", "input", "Search by location or activity", search_box,
                       type={"store": "query", "navigate": "results", "settle_ms": 900}),
                    el("camping", "a", "Camping & Lodging", (340, 380, 200, 40), click={"dead": True}),
                ],
            },
            "results": {
                "url": "https://www.recreation.gov/search?q=lake+pleasant", "title": "Search results", "height": 2400,
                "elements": [
                    el("result-1", "a", "Lake Pleasant Group Campground", result,
                       click={"navigate": "site", "settle_ms": 1200}),
                    el("result-2", "a", "Lake Pleasant Day Use Area", (200, 330, 700, 90), click={"dead": True}),
                ],
            },
            "site": {
                "url": "https://www.recreation.gov/camping/campgrounds/lake-pleasant-group", "title": "Lake Pleasant Group Campground",
                "height": 2400,
                "elements": [
                    el("dates", "button", "Select dates", dates, click={"open_modal": "calendar"}),
                    el("guests-summary", "button", "Group size: {adults}", (820, 330, 300, 48), click={"open_modal": "calendar"}),
                    el("check", "button", "Check Availability", check, click={"navigate": "availability", "settle_ms": 2500}),
                ],
            },
            "availability": {
                "url": "https://www.recreation.gov/camping/campgrounds/lake-pleasant-group/availability",
                "title": "Availability", "height": 1600,
                "elements": [
                    el("avail-row", "a", "Site G1 - Group size {adults} - Saturday unavailable", (200, 240, 800, 60)),
                ],
            },
        },
        "modals": {"calendar": {"backdrop": True, "elements": [
            el("cal-close", "button", "Close", close_btn, click={"close_modal": True}),
            el("cal-date", "input", "Arrival date (mm/dd/yyyy)", date_input, type={"store": "date"}),
            el("cal-fri", "button", "Fri 12", (490, 330, 60, 48), click={"dead": True}),
            el("cal-sat", "button", "Sat 13", sat, click={"dead": True}),
            el("cal-sun", "button", "Sun 14", (630, 330, 60, 48), click={"dead": True}),
            el("cal-toggle", "button", "Guests: {adults} adults", toggle, click={"set": {"guests_open": 1}}),
            el("cal-plus", "button", "Add adult", plus, show_if={"guests_open": 1},
               click={"incr": {"adults": 1}, "cap": {"adults": 3}}),
            el("cal-party", "select", "Group size", party, options=["2", "3", "4", "5"], show_if={"guests_open": 1},
               select={"store": "adults", "desync": True}),
            el("cal-apply", "button", "Apply", apply_btn, click={"dead": True}),
        ]}},
    }
    items = ["Campground page found", "Arrival date set to Saturday", "Group size set to four",
             "Availability results shown"]
    c = center
    sx, sy = c(search_box)
    rx, ry = c(result)
    dx, dy = c(dates)
    satx, saty = c(sat)
    ix, iy = c(date_input)
    tx, ty = c(toggle)
    px, py = c(plus)
    ax, ay = c(apply_btn)
    cx, cy = c(close_btn)
    kx, ky = c(check)
    # the party select is tagged after the elements above it in reading order
    P, D, S, A = "pending", "in_progress", "completed", "failed"
    st = lambda *s: checklist(items, s)  # noqa: E731
    script = [
        {"role": "checklist", "json": {"items": items}},
        # 1
        decide("The home page has one big search box. I will type the campground name into it.",
               f'type({sx}, {sy}, "Lake Pleasant group campsite")'),
        assess(7, 7, 7, 7, ("Search was the first thing on the page.", "The placeholder said what to type.",
                            "Results loaded after I typed.")),
        st(P, P, P, P),
        # 2
        decide("The first result is the group campground I want.", f"click({rx}, {ry})"),
        assess(7, 7, 7, 7, ("One click to the campground.", "The result title matched exactly.",
                            "The campground page opened.")),
        st(S, P, P, P),
        # 3
        decide("I need to pick dates before I can check availability. The Select dates button should open a calendar.",
               f"click({dx}, {dy})"),
        assess(7, 7, 7, 7, ("The calendar opened immediately.", "The button label was clear.",
                            "I can see the calendar now.")),
        st(S, D, P, P),
        # 4
        decide("Saturday the 13th is right there in the calendar. I will click it.", f"click({satx}, {saty})"),
        assess(1, 1, 2, 1, ("Clicking the day did nothing at all.",
                            "The cell looks clickable but gives no feedback when pressed.",
                            "I cannot tell whether the date was taken."), ["error", "uncertainty"]),
        st(S, D, P, P),
        # 5
        decide("Clicking the day cell did nothing. There is a text field for the arrival date, so I will type it instead.",
               f'type({ix}, {iy}, "06/13/2026")'),
        assess(2, 2, 3, 2, ("I had to fall back to typing the date by hand.",
                            "The calendar did not show the typed date as selected.",
                            "I am not sure the date was accepted."), ["retrying", "uncertainty"]),
        st(S, D, P, P),
        # 6
        decide("Now the group size. The guests control shows 1 adult; I will open it.", f"click({tx}, {ty})"),
        assess(6, 6, 6, 6, ("The guest controls opened.", "The control shows the current count.",
                            "The plus button appeared.")),
        st(S, D, D, P),
        # 7
        decide("I need four people. I will press Add adult.", f"click({px}, {py})"),
        assess(7, 7, 7, 7, ("The count went up at once.", "The plus button is obvious.", "The label now reads 2 adults.")),
        st(S, D, D, P),
        # 8
        decide("Two adults so far. One more press of Add adult.", f"click({px}, {py})"),
        assess(6, 6, 6, 6, ("The count went up again.", "Still clear.", "Three adults shown.")),
        st(S, D, D, P),
        # 9
        decide("Three adults shown. Pressing Add adult once more to reach four.", f"click({px}, {py})"),
        assess(1, 1, 1, 1, ("The button stopped responding at three.", "There is no message explaining a limit.",
                            "I do not know why the count will not go up."), ["error", "confusion"]),
        st(S, D, D, P),
        # 10
        decide("The plus button is stuck at three. There is a Group size dropdown below it; I will choose 4 there.",
               'select(PARTY_TAG, "4")'),
        assess(1, 1, 1, 1, ("Choosing 4 did not change the guest count shown.",
                            "The dropdown and the guest label disagree.",
                            "I cannot tell which group size the site will use."), ["confusion", "uncertainty"]),
        st(S, D, D, P),
        # 11
        decide("The display still says 3 adults. Maybe Apply will commit the dropdown value.", f"click({ax}, {ay})"),
        assess(1, 1, 1, 1, ("Apply did nothing.", "There is no feedback after pressing Apply.",
                            "Neither the date nor the group size looks saved."), ["error", "uncertainty"]),
        st(S, D, D, P),
        # 12
        decide("This dialog is not saving anything. I will close it and try the availability check directly.",
               f"click({cx}, {cy})"),
        assess(7, 7, 7, 7, ("The dialog closed at once.", "The close control is standard.", "I am back on the campground page.")),
        st(S, A, D, P),
        # 13
        decide("Back on the campground page. I will press Check Availability.", f"click({kx}, {ky})"),
        assess(6, 5, 6, 6, ("The results took a moment to load.", "The button did what it says.",
                            "Results are showing."), ["waiting"]),
        st(S, A, D, S),
        # 14
        decide("The availability page shows a group size of 4 but I never saw that confirmed, and Saturday is not bookable. "
               "I cannot complete the reservation as asked.",
               'terminate(failure, "date and group size inputs did not match the displayed state")'),
        assess(3, 3, 3, 3, ("The session ended without a booking.", "The site showed inconsistent group sizes.",
                            "I do not trust what the site recorded."), ["confusion", "uncertainty"]),
        st(S, A, A, S),
        {"role": "ux", "json": {"responses": [3, 3, 4, 2, 3, 3, 4, 4, 3, 3],
                                "rationale": "Several dead controls and a desynchronised group size."}},
    ]
    config = """
[run]
url = "https://www.recreation.gov/"
task = "Reserve a group campsite at Lake Pleasant for four adults arriving Saturday, June 13"
persona = "first-time visitor planning a group camping trip"
fixed_clock = "2026-03-02T09:00:00Z"

[driver]
kind = "sim"
site = "site.json"

[gateway]
kind = "scripted"
script = "script.json"

[synthesis]
sus = "model"
"""
    # resolve the dropdown's tag id from the grounded modal at step 10
    from uxprobe.browser.sim import SimBrowser
    from uxprobe.grounding import ground_observation

    sim = SimBrowser(site, render=False)
    sim.state.page, sim.state.modal, sim.state.values["guests_open"] = "site", "calendar", "1"
    obs = ground_observation(sim.snapshot().page, VIEWPORT)
    tag = next(e.tag_id for e in obs.elements if e.node_id == "cal-party")
    text = json.dumps(script).replace("PARTY_TAG", str(tag))
    write("recreation", site, json.loads(text), config)


# ---------------------------------------------------------------- login wall

def login():
    site = {
        "schema": "uxprobe.sim/1", "viewport": list(VIEWPORT), "start": "signin",
        "pages": {"signin": {
            "url": "https://members.example.test/account", "title": "Your account",
            "elements": [
                el("email", "input", "Email address", (440, 300, 400, 44), type={"store": "email"}),
                el("password", "input", "Password", (440, 360, 400, 44), input_type="password", type={"store": "pw"}),
                el("submit", "button", "Continue", (440, 430, 400, 48), click={"navigate": "signin"}),
            ],
        }},
    }
    items = ["Account settings page open", "Email preferences changed"]
    ex, ey = center((440, 300, 400, 44))
    script = [
        {"role": "checklist", "json": {"items": items}},
        decide("The site asks me to enter an email and password before anything else.",
               f'type({ex}, {ey}, "test@example.test")'),
        assess(2, 2, 4, 3, ("I was stopped at a login form.", "The form is clear, but I may not log in.",
                            "I cannot continue without an account."), ["error"]),
        checklist(items, ["failed", "pending"]),
        {"role": "ux", "json": {"responses": [2, 3, 2, 4, 2, 3, 3, 3, 2, 3]}},
    ]
    config = """
[run]
url = "https://members.example.test/account"
task = "Turn off marketing emails in the account settings"
fixed_clock = "2026-03-02T11:00:00Z"

[driver]
kind = "sim"
site = "site.json"

[gateway]
kind = "scripted"
script = "script.json"
"""
    write("login", site, script, config)


# ---------------------------------------------------------------- dead button loop

def deadbutton():
    button = (540, 500, 200, 50)
    site = {
        "schema": "uxprobe.sim/1", "viewport": list(VIEWPORT), "start": "form",
        "pages": {"form": {
            "url": "https://forms.example.test/newsletter", "title": "Newsletter",
            "faults": {"unresponsive": True},
            "elements": [
                el("name", "input", "Your name", (440, 300, 400, 44), type={"store": "name"}),
                el("subscribe", "button", "Subscribe", button, click={"set": {"subscribed": 1}}),
            ],
        }},
    }
    items = ["Subscribe button pressed", "Confirmation message shown"]
    bx, by = center(button)
    script = [{"role": "checklist", "json": {"items": items}}]
    for i in range(1, 6):
        script += [
            decide(f"Nothing happened yet. I will press Subscribe again (attempt {i}).", f"click({bx}, {by})"),
            assess(max(1, 4 - i), 2, 3, 1, ("The button gives no response.", "Nothing indicates progress.",
                                            "I do not know if it worked."), ["retrying", "error"]),
            checklist(items, ["in_progress", "pending"]),
        ]
    config = """
[run]
url = "https://forms.example.test/newsletter"
task = "Subscribe to the newsletter"
fixed_clock = "2026-03-02T12:00:00Z"

[driver]
kind = "sim"
site = "site.json"

[gateway]
kind = "scripted"
script = "script.json"

[synthesis]
sus = "rule_based"
"""
    write("deadbutton", site, script, config)


if __name__ == "__main__":
    discogs()
    recreation()
    login()
    deadbutton()
    print("fixtures written to", HERE)
