"""Scoring math: SUS, the Sauro-Lewis curved grading scale, and SEQ statistics.

Everything in here is a pure function. Scores are carried internally as
integers (SUS in units of 2.5, grade bounds in tenths of a point) so that the
numbers written into reports do not depend on float rounding.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Sequence

SUS_ITEMS = (
    "I think that I would like to use this system frequently.",
    "I found the system unnecessarily complex.",
    "I thought the system was easy to use.",
    "I think that I would need the support of a technical person to be able to use this system.",
    "I found the various functions in this system were well integrated.",
    "I thought there was too much inconsistency in this system.",
    "I would imagine that most people would learn to use this system very quickly.",
    "I found the system very cumbersome to use.",
    "I felt very confident using the system.",
    "I needed to learn a lot of things before I could get going with this system.",
)

SEQ_QUESTION = "Overall, how difficult or easy was this task?"
SEQ_MIN, SEQ_MAX = 1, 7

SUCCESS_THRESHOLD = Fraction("6.5")
FRICTION_THRESHOLD = Fraction("3.3")
GOOD_EXPERIENCE_MEAN = Fraction("5.5")


class ValidationError(ValueError):
    """Raised when a score or response set is outside its allowed range."""


@dataclass(frozen=True)
class SusResponses:
    items: tuple[int, ...]

    def __post_init__(self):
        items = tuple(self.items)
        if len(items) != 10:
            raise ValidationError(f"SUS needs exactly 10 responses, got {len(items)}")
        for i, value in enumerate(items, start=1):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValidationError(f"SUS item {i} must be an integer, got {value!r}")
            if not 1 <= value <= 5:
                raise ValidationError(f"SUS item {i} out of range 1-5: {value}")
        object.__setattr__(self, "items", items)


@dataclass(frozen=True)
class CgsGrade:
    grade: str
    percentile_range: tuple[int, int]
    lower_bound: float


# Half-open intervals [lower, next lower); bounds in tenths of a point.
_CGS_TABLE = (
    (841, "A+", (96, 100)),
    (808, "A", (90, 95)),
    (789, "A-", (85, 89)),
    (772, "B+", (80, 84)),
    (741, "B", (70, 79)),
    (726, "B-", (65, 69)),
    (711, "C+", (60, 64)),
    (650, "C", (41, 59)),
    (627, "C-", (35, 40)),
    (517, "D", (15, 34)),
    (0, "F", (0, 14)),
)

GRADE_ORDER = tuple(row[1] for row in reversed(_CGS_TABLE))  # F ... A+


def cgs_table() -> list[CgsGrade]:
    """Rows of the curved grading scale, best grade first."""
    return [CgsGrade(g, pct, lower / 10) for lower, g, pct in _CGS_TABLE]


def compute_sus(responses: SusResponses | Sequence[int]) -> float:
    """System Usability Scale score (0-100) for one questionnaire.

    Odd items are positively worded and contribute ``answer - 1``; even items
    are negatively worded and contribute ``5 - answer``. The sum is scaled by 2.5.
    """
    if not isinstance(responses, SusResponses):
        responses = SusResponses(tuple(responses))
    odd = sum(q - 1 for q in responses.items[0::2])
    even = sum(5 - q for q in responses.items[1::2])
    units = odd + even  # 0..40
    return units * 25 / 10


def round_half_up(value: Fraction, places: int = 2) -> float:
    """Decimal rounding with ties away from zero (values here are never negative)."""
    scale = 10**places
    return float(Fraction(int(value * scale + Fraction(1, 2)), scale))


def _tenths(score) -> Fraction:
    if isinstance(score, bool):
        raise ValidationError(f"not a score: {score!r}")
    if isinstance(score, float):
        value = Fraction(Decimal(repr(score)))
    else:
        value = Fraction(score)
    if not 0 <= value <= 100:
        raise ValidationError(f"SUS score must lie in [0, 100], got {score}")
    return value * 10


def grade_sus(score: float) -> CgsGrade:
    """Map a SUS score to its Sauro-Lewis letter grade and percentile range."""
    tenths = _tenths(score)
    for lower, grade, pct in _CGS_TABLE:
        if tenths >= lower:
            return CgsGrade(grade, pct, lower / 10)
    raise AssertionError("unreachable: F covers 0")


class StepClass(str, enum.Enum):
    SUCCESS = "success"
    NEUTRAL = "neutral"
    FRICTION = "friction"


def check_seq(value) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float, Fraction)):
        raise ValidationError(f"SEQ rating must be numeric, got {value!r}")
    if not SEQ_MIN <= value <= SEQ_MAX:
        raise ValidationError(f"SEQ rating out of range 1-7: {value}")


def classify_step(seq) -> StepClass:
    """Success at or above 6.5, friction at or below 3.3, neutral between.

    Comparisons are on real values so fractional (averaged) ratings classify
    with the same thresholds as integer ones.
    """
    check_seq(seq)
    value = Fraction(Decimal(repr(seq))) if isinstance(seq, float) else Fraction(seq)
    if value >= SUCCESS_THRESHOLD:
        return StepClass.SUCCESS
    if value <= FRICTION_THRESHOLD:
        return StepClass.FRICTION
    return StepClass.NEUTRAL


@dataclass(frozen=True)
class SeqSummary:
    mean: float
    min: int
    count: int
    friction_steps: tuple[int, ...]
    success_steps: tuple[int, ...]
    good_experience: bool
    mean_exact: Fraction

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "mean_rounded": round_half_up(self.mean_exact),
            "mean_fraction": [self.mean_exact.numerator, self.mean_exact.denominator],
            "min": self.min,
            "count": self.count,
            "friction_steps": list(self.friction_steps),
            "success_steps": list(self.success_steps),
            "good_experience": self.good_experience,
            "good_experience_threshold": float(GOOD_EXPERIENCE_MEAN),
        }


def aggregate_seq(series: Sequence[int]) -> SeqSummary:
    """Summarise a session's per-step SEQ ratings (steps numbered from 1)."""
    series = list(series)
    if not series:
        raise ValidationError("no assessed steps")
    for value in series:
        check_seq(value)
    total = sum(Fraction(v) for v in series)
    mean = total / len(series)
    classes = [classify_step(v) for v in series]
    return SeqSummary(
        mean=float(mean),
        min=min(series),
        count=len(series),
        friction_steps=tuple(i for i, c in enumerate(classes, 1) if c is StepClass.FRICTION),
        success_steps=tuple(i for i, c in enumerate(classes, 1) if c is StepClass.SUCCESS),
        good_experience=mean >= GOOD_EXPERIENCE_MEAN,
        mean_exact=mean,
    )
