"""Factorial layouts, slides, designs and the baseline contrast algebra.

Treatments are plain tuples of level indices, level 0 being the baseline
level of each factor.  All coefficients are :class:`fractions.Fraction`.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

Treatment = tuple[int, ...]


class InvalidInput(ValueError):
    """Raised for malformed layouts, treatments, designs or serialized data."""


def parse_rational(text: str | int | Fraction) -> Fraction:
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidInput(f"not a rational: {text!r}") from exc


def format_rational(q: Fraction | int) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class FactorLayout:
    levels: tuple[int, ...]

    def __post_init__(self):
        levels = tuple(int(s) for s in self.levels)
        if not levels:
            raise InvalidInput("a layout needs at least one factor")
        if any(s < 2 for s in levels):
            raise InvalidInput(f"every factor needs at least 2 levels: {levels}")
        object.__setattr__(self, "levels", levels)

    @classmethod
    def parse(cls, text: str) -> "FactorLayout":
        """Parse ``"2x3"`` or ``"2x2x3"`` (``*`` and ``,`` also accepted)."""
        parts = text.lower().replace("*", "x").replace(",", "x").split("x")
        try:
            return cls(tuple(int(p) for p in parts))
        except ValueError as exc:
            raise InvalidInput(f"invalid layout string: {text!r}") from exc

    @property
    def n(self) -> int:
        return len(self.levels)

    @property
    def v(self) -> int:
        out = 1
        for s in self.levels:
            out *= s
        return out

    @property
    def baseline(self) -> Treatment:
        return (0,) * self.n

    def treatments(self) -> list[Treatment]:
        return enumerate_treatments(self)

    def index(self, t: Treatment) -> int:
        """Position of ``t`` in lexicographic treatment order."""
        self.check(t)
        k = 0
        for i, s in zip(t, self.levels):
            k = k * s + i
        return k

    def check(self, t: Treatment) -> Treatment:
        if len(t) != self.n or any(not 0 <= i < s for i, s in zip(t, self.levels)):
            raise InvalidInput(f"treatment {t} does not belong to layout {self}")
        return t

    def effects(self) -> list[Treatment]:
        """All non-baseline treatments, i.e. the indices of the v-1 effects."""
        return [t for t in self.treatments() if any(t)]

    def __str__(self) -> str:
        return "x".join(map(str, self.levels))


def enumerate_treatments(layout: FactorLayout) -> list[Treatment]:
    return list(itertools.product(*(range(s) for s in layout.levels)))


def effect_order(effect: Treatment) -> int:
    return sum(1 for i in effect if i)


def treatment_label(t: Treatment) -> str:
    if all(i < 10 for i in t):
        return "".join(map(str, t))
    return ".".join(map(str, t))


def parse_treatment(text: str, layout: FactorLayout) -> Treatment:
    text = text.strip()
    if "." in text or "," in text:
        t = tuple(int(p) for p in text.replace(",", ".").split("."))
    else:
        t = tuple(int(ch) for ch in text)
    return layout.check(t)


class ContrastVector(dict):
    """Rational coefficients on the treatment means of one layout.

    Keys are treatments; missing keys mean a zero coefficient.
    """

    def __init__(self, layout: FactorLayout, coefficients: dict | None = None):
        super().__init__()
        self.layout = layout
        for t, q in (coefficients or {}).items():
            q = Fraction(q)
            if q:
                self[layout.check(tuple(t))] = q

    def dense(self) -> list[Fraction]:
        return [self.get(t, Fraction(0)) for t in self.layout.treatments()]

    def scaled(self, k) -> "ContrastVector":
        return ContrastVector(self.layout, {t: k * q for t, q in self.items()})

    def total(self) -> Fraction:
        return sum(self.values(), Fraction(0))


def baseline_contrast(layout: FactorLayout, effect: Treatment) -> ContrastVector:
    """Baseline-parametrization effect as a contrast of treatment means.

    For effect ``i`` with nonzero positions ``P`` the coefficient of the
    treatment keeping only the positions in ``S`` (others zeroed) is
    ``(-1) ** (|P| - |S|)`` for every subset ``S`` of ``P``.
    """
    effect = layout.check(tuple(effect))
    nonzero = [k for k, i in enumerate(effect) if i]
    if not nonzero:
        raise InvalidInput("the all-zero treatment is not an effect")
    coefficients = {}
    for r in range(len(nonzero) + 1):
        for kept in itertools.combinations(nonzero, r):
            t = tuple(i if k in kept else 0 for k, i in enumerate(effect))
            coefficients[t] = Fraction((-1) ** (len(nonzero) - r))
    return ContrastVector(layout, coefficients)


_ORTHOGONAL_SIGNS = {
    # signs on (11, 10, 01, 00)
    (1, 0): (1, 1, -1, -1),
    (0, 1): (1, -1, 1, -1),
    (1, 1): (1, -1, -1, 1),
}


def orthogonal_contrast_2x2(effect: Treatment, layout: FactorLayout | None = None) -> ContrastVector:
    layout = layout or FactorLayout((2, 2))
    if layout.levels != (2, 2):
        raise InvalidInput("the orthogonal parametrization is only provided for the 2x2 factorial")
    signs = _ORTHOGONAL_SIGNS.get(tuple(effect))
    if signs is None:
        raise InvalidInput(f"not a 2x2 effect: {effect}")
    half = Fraction(1, 2)
    return ContrastVector(
        layout, {t: half * s for t, s in zip([(1, 1), (1, 0), (0, 1), (0, 0)], signs)}
    )


def effect_contrast(layout: FactorLayout, effect: Treatment, parametrization: str = "baseline") -> ContrastVector:
    if parametrization == "baseline":
        return baseline_contrast(layout, effect)
    if parametrization == "orthogonal":
        return orthogonal_contrast_2x2(effect, layout)
    raise InvalidInput(f"unknown parametrization {parametrization!r}")


class Slide(NamedTuple):
    red: Treatment
    green: Treatment

    def swapped(self) -> "Slide":
        return Slide(self.green, self.red)

    def unordered(self) -> "Slide":
        return self if self.red <= self.green else self.swapped()

    def __str__(self) -> str:
        return f"({treatment_label(self.red)},{treatment_label(self.green)})"


@dataclass(frozen=True)
class Design:
    layout: FactorLayout
    slides: tuple[Slide, ...]

    def __post_init__(self):
        slides = tuple(Slide(tuple(s[0]), tuple(s[1])) for s in self.slides)
        if not slides:
            raise InvalidInput("a design needs at least one slide")
        for s in slides:
            self.layout.check(s.red)
            self.layout.check(s.green)
            if s.red == s.green:
                raise InvalidInput(f"slide compares a treatment with itself: {s}")
        object.__setattr__(self, "slides", slides)

    @classmethod
    def from_pairs(cls, layout: FactorLayout | Sequence[int], pairs: Iterable) -> "Design":
        """Build from ``("11", "00")`` label pairs or tuple pairs."""
        if not isinstance(layout, FactorLayout):
            layout = FactorLayout(tuple(layout))
        slides = []
        for red, green in pairs:
            if isinstance(red, str):
                red = parse_treatment(red, layout)
            if isinstance(green, str):
                green = parse_treatment(green, layout)
            slides.append(Slide(tuple(red), tuple(green)))
        return cls(layout, tuple(slides))

    @property
    def N(self) -> int:
        return len(self.slides)

    def counts(self, dye_sensitive: bool = True) -> Counter:
        if dye_sensitive:
            return Counter(self.slides)
        return Counter(s.unordered() for s in self.slides)

    def degrees(self) -> Counter:
        deg = Counter()
        for s in self.slides:
            deg[s.red] += 1
            deg[s.green] += 1
        return deg

    def dye_balance(self) -> dict[Treatment, int]:
        """Red appearances minus green appearances, per treatment."""
        bal = {t: 0 for t in self.layout.treatments()}
        for s in self.slides:
            bal[s.red] += 1
            bal[s.green] -= 1
        return bal

    def is_connected(self) -> bool:
        treatments = self.layout.treatments()
        parent = {t: t for t in treatments}

        def find(t):
            while parent[t] != t:
                parent[t] = parent[parent[t]]
                t = parent[t]
            return t

        for s in self.slides:
            parent[find(s.red)] = find(s.green)
        return len({find(t) for t in treatments}) == 1

    def __add__(self, other: "Design") -> "Design":
        if other.layout != self.layout:
            raise InvalidInput("cannot combine designs on different layouts")
        return Design(self.layout, self.slides + other.slides)

    def __str__(self) -> str:
        return "{" + ", ".join(map(str, self.slides)) + "}"

    def to_dict(self) -> dict:
        return {
            "layout": list(self.layout.levels),
            "slides": [{"red": list(s.red), "green": list(s.green)} for s in self.slides],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "Design":
        try:
            layout = FactorLayout(tuple(data["layout"]))
            slides = tuple(Slide(tuple(s["red"]), tuple(s["green"])) for s in data["slides"])
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed design JSON: {exc}") from exc
        return cls(layout, slides)

    @classmethod
    def from_json(cls, text: str) -> "Design":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"malformed design JSON: {exc}") from exc


def canonicalize(design: Design, dye_sensitive: bool = True) -> Design:
    slides = design.slides if dye_sensitive else [s.unordered() for s in design.slides]
    return Design(design.layout, tuple(sorted(slides)))


def candidate_slides(layout: FactorLayout, dye_sensitive: bool) -> list[Slide]:
    """All possible slides in canonical order: unordered pairs, or ordered ones."""
    ts = layout.treatments()
    if dye_sensitive:
        return sorted(Slide(a, b) for a in ts for b in ts if a != b)
    return [Slide(a, b) for a, b in itertools.combinations(ts, 2)]


# Fixed 2x2 slide order used for frequency vectors f = (f1, ..., f6).
SLIDES_2X2 = (
    Slide((0, 1), (0, 0)),
    Slide((1, 0), (0, 0)),
    Slide((1, 1), (0, 0)),
    Slide((1, 0), (0, 1)),
    Slide((1, 1), (0, 1)),
    Slide((1, 1), (1, 0)),
)


def from_frequencies(f: Sequence[int]) -> Design:
    if len(f) != 6 or any(k < 0 for k in f):
        raise InvalidInput(f"a 2x2 frequency vector has six nonnegative entries: {f}")
    slides = [s for s, k in zip(SLIDES_2X2, f) for _ in range(k)]
    return Design(FactorLayout((2, 2)), tuple(slides))


def frequencies(design: Design) -> tuple[int, ...]:
    if design.layout.levels != (2, 2):
        raise InvalidInput("frequency vectors are defined for the 2x2 factorial only")
    counts = design.counts(dye_sensitive=False)
    return tuple(counts[s.unordered()] for s in SLIDES_2X2)
