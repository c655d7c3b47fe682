"""Observation models for slides and exact BLUE variances.

Parameter vector layout: the ``v`` treatment means in lexicographic order,
followed by ``v`` dye parameters (general dye model) or a single common dye
parameter (reduced dye model).  Variances are reported in units of the
observation variance for homoscedastic models and of the measurement-error
variance when the per-treatment biological components are given
(heteroscedastic or replication models).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Sequence

from . import exact
from .factorial import (
    ContrastVector,
    Design,
    FactorLayout,
    InvalidInput,
    Treatment,
    baseline_contrast,
    effect_order,
    format_rational,
    parse_rational,
    parse_treatment,
    treatment_label,
)


class NotEstimable(Exception):
    def __init__(self, effects: Sequence = (), message: str | None = None):
        self.effects = list(effects)
        if message is None:
            labels = ", ".join(treatment_label(e) if isinstance(e, tuple) else str(e) for e in self.effects)
            message = f"not estimable: {labels}" if labels else "not estimable"
        super().__init__(message)


class Dye(str, Enum):
    NONE = "none"
    GENERAL = "general"
    REDUCED = "reduced"


@dataclass(frozen=True)
class ReplicationPlan:
    """Subject labels for the red and green sample of every slide.

    A label shared by two occurrences means the same subject (technical
    replication); a label is bound to a single treatment.
    """

    subjects: tuple[tuple[Hashable, Hashable], ...]

    def __post_init__(self):
        object.__setattr__(self, "subjects", tuple((r, g) for r, g in self.subjects))

    @classmethod
    def all_biological(cls, design: Design) -> "ReplicationPlan":
        return cls(tuple((2 * k, 2 * k + 1) for k in range(design.N)))

    def validate(self, design: Design) -> None:
        if len(self.subjects) != design.N:
            raise InvalidInput(f"replication plan has {len(self.subjects)} slides, design has {design.N}")
        owner = {}
        for slide, (r, g) in zip(design.slides, self.subjects):
            for label, t in ((r, slide.red), (g, slide.green)):
                if owner.setdefault(label, t) != t:
                    raise InvalidInput(f"subject {label!r} attached to two treatments")

    def is_all_biological(self) -> bool:
        labels = [x for pair in self.subjects for x in pair]
        return len(set(labels)) == len(labels)

    def to_dict(self) -> dict:
        return {"subjects": [[r, g] for r, g in self.subjects]}

    @classmethod
    def from_dict(cls, data: dict) -> "ReplicationPlan":
        try:
            return cls(tuple((r, g) for r, g in data["subjects"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed replication plan: {exc}") from exc


@dataclass(frozen=True)
class ModelSpec:
    dye: Dye = Dye.NONE
    hetero: tuple[tuple[Treatment, Fraction], ...] | None = None
    replication: ReplicationPlan | None = None
    ratio: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "dye", Dye(self.dye))
        if self.hetero is not None:
            items = self.hetero.items() if isinstance(self.hetero, Mapping) else self.hetero
            items = tuple(sorted((tuple(t), Fraction(g)) for t, g in items))
            if any(g < 0 for _, g in items):
                raise InvalidInput("biological variance ratios must be nonnegative")
            object.__setattr__(self, "hetero", items)
        ratio = Fraction(self.ratio)
        if ratio < 0:
            raise InvalidInput("variance ratio must be nonnegative")
        object.__setattr__(self, "ratio", ratio)
        if self.replication is not None and self.hetero is not None:
            raise InvalidInput("replication plans assume a common biological variance")

    @classmethod
    def heteroscedastic(cls, layout: FactorLayout, pattern, dye: Dye = Dye.NONE) -> "ModelSpec":
        """``pattern`` is a mapping or a sequence in lexicographic treatment order."""
        if not isinstance(pattern, Mapping):
            pattern = list(pattern)
            if len(pattern) != layout.v:
                raise InvalidInput(f"pattern needs {layout.v} values")
            pattern = dict(zip(layout.treatments(), (parse_rational(x) if isinstance(x, str) else Fraction(x) for x in pattern)))
        return cls(dye=dye, hetero=tuple(pattern.items()))

    @property
    def gamma(self) -> dict[Treatment, Fraction] | None:
        return dict(self.hetero) if self.hetero is not None else None

    @property
    def unit(self) -> str:
        return "sigma^2" if self.hetero is None and self.replication is None else "delta^2"

    @property
    def is_diagonal(self) -> bool:
        return self.replication is None

    def slide_variance(self, slide) -> Fraction:
        """Variance of one slide's log-ratio, in the model's units."""
        if self.hetero is not None:
            g = self.gamma
            return g.get(slide.red, Fraction(0)) + g.get(slide.green, Fraction(0)) + 1
        if self.replication is not None:
            return 2 * self.ratio + 1
        return Fraction(1)


PLAIN = ModelSpec()
GENERAL_DYE = ModelSpec(dye=Dye.GENERAL)
REDUCED_DYE = ModelSpec(dye=Dye.REDUCED)


def parameter_count(layout: FactorLayout, dye: Dye) -> int:
    return layout.v + {Dye.NONE: 0, Dye.GENERAL: layout.v, Dye.REDUCED: 1}[Dye(dye)]


def slide_row(layout: FactorLayout, slide, dye: Dye) -> list[int]:
    v = layout.v
    row = [0] * parameter_count(layout, dye)
    r, g = layout.index(slide.red), layout.index(slide.green)
    row[r] += 1
    row[g] -= 1
    if dye == Dye.GENERAL:
        row[v + r] += 1
        row[v + g] += 1
    elif dye == Dye.REDUCED:
        row[v] = 1
    return row


def model_rows(design: Design, model: ModelSpec) -> exact.Matrix:
    return exact.as_matrix(slide_row(design.layout, s, model.dye) for s in design.slides)


def observation_covariance(design: Design, model: ModelSpec) -> exact.Matrix:
    n = design.N
    cov = exact.zeros(n)
    for k, s in enumerate(design.slides):
        cov[k][k] = model.slide_variance(s)
    if model.replication is not None:
        plan = model.replication
        plan.validate(design)
        r = model.ratio
        for a in range(n):
            for b in range(a + 1, n):
                ra, ga = plan.subjects[a]
                rb, gb = plan.subjects[b]
                # subject effect enters a log-ratio with + on red, - on green
                shared = (ra == rb) + (ga == gb) - (ra == gb) - (ga == rb)
                cov[a][b] = cov[b][a] = shared * r
        if not exact.is_positive_definite(cov):
            raise InvalidInput("observation covariance is not positive definite")
    return cov


def information_matrix(design: Design, model: ModelSpec) -> exact.Matrix:
    """``X' Sigma^-1 X`` for the design under the model."""
    p = parameter_count(design.layout, model.dye)
    if model.is_diagonal:
        info = exact.zeros(p)
        for s in design.slides:
            row = slide_row(design.layout, s, model.dye)
            weight = 1 / model.slide_variance(s)
            nz = [(i, x) for i, x in enumerate(row) if x]
            for i, x in nz:
                for j, y in nz:
                    info[i][j] += weight * x * y
        return info
    x = model_rows(design, model)
    prec = exact.inverse(observation_covariance(design, model))
    return exact.matmul(exact.transpose(x), exact.matmul(prec, x))


def padded(contrast: ContrastVector, model: ModelSpec) -> list[Fraction]:
    dense = contrast.dense()
    extra = parameter_count(contrast.layout, model.dye) - len(dense)
    return dense + [Fraction(0)] * extra


class Analysis:
    """Information matrix of a design with one symmetric g-inverse, cached."""

    def __init__(self, design: Design, model: ModelSpec):
        self.design = design
        self.model = model
        self.info = information_matrix(design, model)
        self.ginv, self.basis = exact.symmetric_ginverse(self.info)

    def estimable(self, contrast: ContrastVector) -> bool:
        c = padded(contrast, self.model)
        projected = exact.matvec(self.info, exact.matvec(self.ginv, c))
        return projected == c

    def variance(self, contrast: ContrastVector) -> Fraction:
        if not self.estimable(contrast):
            raise NotEstimable(message="contrast is not estimable under this design")
        c = padded(contrast, self.model)
        return exact.quadratic_form(c, self.ginv)


def _check_layout(design: Design, contrast: ContrastVector):
    if contrast.layout != design.layout:
        raise InvalidInput("contrast and design are on different layouts")


def is_estimable(design: Design, model: ModelSpec, contrast: ContrastVector) -> bool:
    _check_layout(design, contrast)
    return Analysis(design, model).estimable(contrast)


def blue_variance(design: Design, model: ModelSpec, contrast: ContrastVector) -> Fraction:
    _check_layout(design, contrast)
    return Analysis(design, model).variance(contrast)


class VarianceReport(dict):
    """Effect -> exact BLUE variance, in lexicographic effect order."""

    def __init__(self, layout: FactorLayout, values: Mapping[Treatment, Fraction], unit: str = "sigma^2"):
        super().__init__(sorted(values.items()))
        self.layout = layout
        self.unit = unit

    def vector(self) -> tuple[Fraction, ...]:
        return tuple(self[e] for e in sorted(self))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["effect", "order", "variance"])
        for e in sorted(self):
            writer.writerow([treatment_label(e), effect_order(e), format_rational(self[e])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, layout: FactorLayout, unit: str = "sigma^2") -> "VarianceReport":
        rows = list(csv.DictReader(io.StringIO(text)))
        try:
            values = {parse_treatment(r["effect"], layout): parse_rational(r["variance"]) for r in rows}
        except KeyError as exc:
            raise InvalidInput(f"malformed variance report: missing {exc}") from exc
        return cls(layout, values, unit)

    def scaled(self, k) -> "VarianceReport":
        return VarianceReport(self.layout, {e: k * q for e, q in self.items()}, self.unit)


def variance_report(design: Design, model: ModelSpec, effects: Iterable[Treatment] | None = None) -> VarianceReport:
    layout = design.layout
    analysis = Analysis(design, model)
    effects = list(effects) if effects is not None else layout.effects()
    contrasts = {e: baseline_contrast(layout, e) for e in effects}
    failing = [e for e, c in contrasts.items() if not analysis.estimable(c)]
    if failing:
        raise NotEstimable(failing)
    return VarianceReport(layout, {e: analysis.variance(c) for e, c in contrasts.items()}, model.unit)
