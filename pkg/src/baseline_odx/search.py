"""Exact-design search: w-optimality, admissibility, augmentation, replication plans.

Large spaces are screened in floating point (:mod:`baseline_odx.batch`) and
every design within a small window of the float optimum is re-evaluated
exactly, so reported criterion values, optima and optima counts are exact.
"""

from __future__ import annotations

import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import exact
from .batch import BatchEvaluator, count_multisets, multisets_with_first
from .constructions import construct_dbar, d0_collection, dye_swap
from .factorial import (
    Design,
    FactorLayout,
    InvalidInput,
    Slide,
    Treatment,
    baseline_contrast,
    canonicalize,
    candidate_slides,
    effect_order,
    format_rational,
    parse_rational,
    treatment_label,
)
from .models import (
    Analysis,
    Dye,
    ModelSpec,
    NotEstimable,
    ReplicationPlan,
    VarianceReport,
    model_rows,
    variance_report,
)

WINDOW = 1e-9
JOBS_ENV = "BASELINE_ODX_JOBS"


class CriterionWeights(dict):
    """Nonnegative rational weight per effect; effects not listed weigh zero."""

    def __init__(self, weights: Mapping[Treatment, object]):
        super().__init__({tuple(e): Fraction(w) for e, w in weights.items()})
        if any(w < 0 for w in self.values()):
            raise InvalidInput("weights must be nonnegative")
        if not any(w > 0 for w in self.values()):
            raise InvalidInput("at least one weight must be positive")

    @classmethod
    def two_factor(cls, layout: FactorLayout, w) -> "CriterionWeights":
        """Weight 1 on main effects and ``w`` on every interaction."""
        w = parse_rational(w) if isinstance(w, str) else Fraction(w)
        return cls({e: (1 if effect_order(e) == 1 else w) for e in layout.effects()})

    def vector(self, effects: Sequence[Treatment]) -> np.ndarray:
        return np.array([float(self.get(e, 0)) for e in effects])

    def active(self) -> list[Treatment]:
        return sorted(e for e, w in self.items() if w)


def as_weights(layout: FactorLayout, weights) -> CriterionWeights:
    if isinstance(weights, CriterionWeights):
        return weights
    if isinstance(weights, Mapping):
        return CriterionWeights(weights)
    return CriterionWeights.two_factor(layout, weights)


def criterion_value(design: Design, model: ModelSpec, weights) -> Fraction:
    weights = as_weights(design.layout, weights)
    report = variance_report(design, model, weights.active())
    return sum((weights[e] * report[e] for e in report), Fraction(0))


@dataclass
class SearchResult:
    criterion: Fraction
    design: Design
    optima_count: int
    optima: list[Design] = field(default_factory=list)

    def to_dict(self, include_optima: bool = False) -> dict:
        out = {
            "criterion": format_rational(self.criterion),
            "design": self.design.to_dict(),
            "optima_count": self.optima_count,
        }
        if include_optima:
            out["optima"] = [d.to_dict() for d in self.optima]
        return out

    def to_json(self, include_optima: bool = False) -> str:
        return json.dumps(self.to_dict(include_optima), separators=(",", ":"))


def resolve_jobs(jobs: int | None) -> int:
    if jobs is None:
        jobs = int(os.environ.get(JOBS_ENV, "1") or 1)
    return max(1, int(jobs))


def _run(func, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, tasks, chunksize=1))


def search_candidates(layout: FactorLayout, model: ModelSpec, restrict: Iterable[Slide] | None = None) -> list[Slide]:
    dye_sensitive = model.dye != Dye.NONE
    if restrict is None:
        return candidate_slides(layout, dye_sensitive)
    slides = {s if dye_sensitive else s.unordered() for s in restrict}
    for s in slides:
        layout.check(s.red)
        layout.check(s.green)
    return sorted(slides)


@dataclass(frozen=True)
class _Task:
    layout: FactorLayout
    model: ModelSpec
    candidates: tuple
    effects: tuple
    weights: tuple | None
    prefix: tuple
    size: int
    first: int
    mode: str  # "min", "front" or "any"


def _task_blocks(task: _Task):
    prefix = np.array(task.prefix, dtype=np.int64)
    if task.size == 0:
        yield prefix.reshape(1, -1)
        return
    for block in multisets_with_first(len(task.candidates), task.size, task.first):
        if len(prefix):
            block = np.hstack([np.broadcast_to(prefix, (len(block), len(prefix))), block])
        yield block


def _pareto_rows(points: np.ndarray) -> list[int]:
    """Indices of non-dominated rows (minimization); equal rows are all kept."""
    order = np.lexsort(points.T[::-1])
    front: list[int] = []
    kept = np.empty((0, points.shape[1]))
    for i in order:
        p = points[i]
        if len(front):
            dominated = np.all(kept <= p, axis=1) & np.any(kept < p, axis=1)
            if dominated.any():
                continue
        front.append(int(i))
        kept = np.vstack([kept, p])
    return front


def _scan(task: _Task):
    ev = BatchEvaluator(task.layout, task.model, task.candidates, task.effects)
    if task.mode == "min":
        wvec = np.array(task.weights)
        best = np.inf
        keep: list[tuple[float, tuple]] = []
        for block in _task_blocks(task):
            var, ok = ev.evaluate(block)
            if not ok.any():
                continue
            crit = var[ok] @ wvec
            rows = block[ok]
            local = crit.min()
            best = min(best, local)
            sel = crit <= best + WINDOW * max(1.0, abs(best))
            keep = [k for k in keep if k[0] <= best + WINDOW * max(1.0, abs(best))]
            keep.extend((float(c), tuple(int(x) for x in sorted(r))) for c, r in zip(crit[sel], rows[sel]))
        return best, keep
    if task.mode == "front":
        pts, combos = [], []
        for block in _task_blocks(task):
            var, ok = ev.evaluate(block)
            if ok.any():
                pts.append(np.round(var[ok], 9))
                combos.extend(tuple(int(x) for x in sorted(r)) for r in block[ok])
        if not pts:
            return np.empty((0, len(task.effects))), []
        pts = np.vstack(pts)
        idx = _pareto_rows(pts)
        return pts[idx], [combos[i] for i in idx]
    if task.mode == "any":
        for block in _task_blocks(task):
            _, ok = ev.evaluate(block)
            if ok.any():
                return tuple(int(x) for x in block[np.argmax(ok)])
        return None
    raise ValueError(task.mode)


def _design(layout: FactorLayout, candidates: Sequence[Slide], combo: Iterable[int]) -> Design:
    return Design(layout, tuple(candidates[i] for i in sorted(combo)))


def _tasks(layout, model, candidates, effects, weights, prefixes, size, mode) -> list[_Task]:
    tasks = []
    for prefix in prefixes:
        firsts = range(len(candidates)) if size > 0 else [0]
        for first in firsts:
            tasks.append(
                _Task(layout, model, tuple(candidates), tuple(effects), weights, tuple(prefix), size, first, mode)
            )
    return tasks


def _minimize(layout, model, weights, candidates, prefixes, size, jobs) -> SearchResult:
    weights = as_weights(layout, weights)
    effects = layout.effects()
    wtuple = tuple(float(weights.get(e, 0)) for e in effects)
    results = _run(_scan, _tasks(layout, model, candidates, effects, wtuple, prefixes, size, "min"), jobs)
    best = min((b for b, _ in results), default=np.inf)
    if not np.isfinite(best):
        raise NotEstimable(message="no design in the search space keeps every effect estimable")
    cutoff = best + WINDOW * max(1.0, abs(best))
    near = sorted({combo for _, keep in results for value, combo in keep if value <= cutoff})
    dye_sensitive = model.dye != Dye.NONE
    scored = []
    for combo in near:
        d = canonicalize(_design(layout, candidates, combo), dye_sensitive)
        scored.append((criterion_value(d, model, weights), d))
    value = min(v for v, _ in scored)
    optima = sorted({d for v, d in scored if v == value}, key=lambda d: d.slides)
    return SearchResult(value, optima[0], len(optima), optima)


def exhaustive_w_optimal(
    layout: FactorLayout,
    N: int,
    model: ModelSpec,
    weights,
    restrict: Iterable[Slide] | None = None,
    jobs: int | None = None,
) -> SearchResult:
    """Global w-optimum over all N-slide multisets of candidate slides.

    Candidates are unordered pairs for the no-dye model and ordered pairs
    otherwise; ``restrict`` narrows them.  Only designs keeping every effect
    estimable are admitted.
    """
    if N < 1:
        raise InvalidInput("N must be positive")
    candidates = search_candidates(layout, model, restrict)
    return _minimize(layout, model, weights, candidates, [()], N, resolve_jobs(jobs))


def augment_optimal(layout: FactorLayout, N: int, model: ModelSpec, weights, jobs: int | None = None) -> SearchResult:
    """Best design among all augmentations of the optimal saturated designs."""
    if model.dye == Dye.REDUCED:
        raise InvalidInput("augmentation is defined for the no-dye and general dye models")
    bases = d0_collection(layout)
    if model.dye == Dye.GENERAL:
        bases = sorted({canonicalize(dye_swap(d)) for d in bases}, key=lambda d: d.slides)
    base_size = bases[0].N
    if N < base_size:
        raise InvalidInput(f"N={N} is below the saturated base size {base_size}")
    candidates = search_candidates(layout, model)
    position = {s: k for k, s in enumerate(candidates)}
    dye_sensitive = model.dye != Dye.NONE
    prefixes = sorted(
        {tuple(sorted(position[s if dye_sensitive else s.unordered()] for s in b.slides)) for b in bases}
    )
    return _minimize(layout, model, weights, candidates, prefixes, N - base_size, resolve_jobs(jobs))


def _exact_front(designs: list[Design], model: ModelSpec) -> list[Design]:
    reports = [(d, variance_report(d, model).vector()) for d in designs]
    front = []
    for d, vec in reports:
        dominated = any(
            all(a <= b for a, b in zip(other, vec)) and any(a < b for a, b in zip(other, vec))
            for _, other in reports
        )
        if not dominated:
            front.append(d)
    return sorted(set(front), key=lambda d: d.slides)


def pareto_admissible(
    layout: FactorLayout,
    N: int,
    model: ModelSpec,
    restrict: Iterable[Slide] | None = None,
    designs: Iterable[Design] | None = None,
    jobs: int | None = None,
) -> list[Design]:
    """Designs not dominated on the full per-effect variance vector.

    With ``designs`` the candidate space is that explicit list (all exact);
    otherwise all estimable N-slide multisets of candidate slides.
    """
    dye_sensitive = model.dye != Dye.NONE
    if designs is not None:
        pool = []
        for d in designs:
            d = canonicalize(d, dye_sensitive)
            try:
                variance_report(d, model)
            except NotEstimable:
                continue
            pool.append(d)
        return _exact_front(sorted(set(pool), key=lambda d: d.slides), model)
    candidates = search_candidates(layout, model, restrict)
    effects = layout.effects()
    results = _run(_scan, _tasks(layout, model, candidates, effects, None, [()], N, "front"), resolve_jobs(jobs))
    pts = [p for p, _ in results if len(p)]
    if not pts:
        return []
    pts = np.vstack(pts)
    combos = [c for _, cs in results for c in cs]
    idx = _pareto_rows(pts)
    front = [canonicalize(_design(layout, candidates, combos[i]), dye_sensitive) for i in idx]
    return _exact_front(front, model)


@dataclass
class ConjectureReport:
    omega_value: Fraction
    global_value: Fraction
    equal: bool
    omega_design: Design
    global_design: Design


def check_conjecture(layout: FactorLayout, N: int, w, jobs: int | None = None) -> ConjectureReport:
    """Compare the w-optimum over designs built from dbar's slides with the global one."""
    if layout.n != 2:
        raise InvalidInput("the conjecture concerns two-factor layouts")
    s1, s2 = layout.levels
    lo, hi = layout.v - 1, layout.v - 1 + (s1 - 1) * (s2 - 1)
    if not lo < N <= hi:
        raise InvalidInput(f"N must satisfy {lo} < N <= {hi}")
    plain = ModelSpec()
    omega = exhaustive_w_optimal(layout, N, plain, w, restrict=construct_dbar(layout).slides, jobs=jobs)
    full = exhaustive_w_optimal(layout, N, plain, w, jobs=jobs)
    return ConjectureReport(omega.criterion, full.criterion, omega.criterion == full.criterion, omega.design, full.design)


def all_effects_estimable_exact(design: Design, model: ModelSpec) -> bool:
    """Exact rank test: rank[X] - rank[X_nuisance] == v - 1."""
    x = model_rows(design, model)
    v = design.layout.v
    nuisance = [row[v:] for row in x]
    r_nuisance = exact.rank(nuisance) if nuisance and nuisance[0] else 0
    return exact.rank(x) - r_nuisance == v - 1


def min_slides(layout: FactorLayout, model: ModelSpec, N_max: int, jobs: int | None = None) -> tuple[int, Design]:
    """Smallest N for which some N-slide design keeps every effect estimable, with a witness."""
    candidates = search_candidates(layout, model)
    effects = layout.effects()
    jobs = resolve_jobs(jobs)
    for N in range(1, N_max + 1):
        found = _run(_scan, _tasks(layout, model, candidates, effects, None, [()], N, "any"), jobs)
        hits = [f for f in found if f is not None]
        if hits:
            witness = canonicalize(_design(layout, candidates, min(hits)), model.dye != Dye.NONE)
            if not all_effects_estimable_exact(witness, model):
                raise RuntimeError("float screening disagreed with the exact rank test")
            return N, witness
    raise NotEstimable(message=f"no design with at most {N_max} slides keeps every effect estimable")


def exhaustive_estimability(layout: FactorLayout, N: int, model: ModelSpec) -> list[Design]:
    """All N-slide designs keeping every effect estimable, by exact rank tests (small spaces only)."""
    candidates = search_candidates(layout, model)
    out = []
    for combo in itertools.combinations_with_replacement(range(len(candidates)), N):
        d = _design(layout, candidates, combo)
        if all_effects_estimable_exact(d, model):
            out.append(d)
    return out


# -- replication plans -------------------------------------------------------


def _set_partitions(items: list):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]


def replication_plans(design: Design) -> list[ReplicationPlan]:
    """Every way of grouping each treatment's occurrences into subjects."""
    occurrences: dict[Treatment, list[tuple[int, int]]] = {}
    for k, s in enumerate(design.slides):
        occurrences.setdefault(s.red, []).append((k, 0))
        occurrences.setdefault(s.green, []).append((k, 1))
    treatments = sorted(occurrences)
    plans = []
    for parts in itertools.product(*(list(_set_partitions(occurrences[t])) for t in treatments)):
        labels = [[None, None] for _ in design.slides]
        for t, partition in zip(treatments, parts):
            for b, block in enumerate(partition):
                for k, side in block:
                    labels[k][side] = f"{treatment_label(t)}#{b}"
        plans.append(ReplicationPlan(tuple((r, g) for r, g in labels)))
    return plans


def _plan_key(design: Design, plan: ReplicationPlan) -> tuple:
    """Canonical form of (design, plan) up to reordering identical slides and relabelling subjects."""
    groups = [list(g) for _, g in itertools.groupby(range(design.N), key=lambda k: design.slides[k])]
    best = None
    for perms in itertools.product(*(itertools.permutations(g) for g in groups)):
        order = [k for p in perms for k in p]
        names: dict = {}
        seq = tuple(names.setdefault(x, len(names)) for k in order for x in plan.subjects[k])
        if best is None or seq < best:
            best = seq
    return design.slides, best


@dataclass
class ReplicationResult:
    ratio: Fraction
    criterion: Fraction
    design: Design
    plan: ReplicationPlan
    optima_count: int
    optima: list[tuple[Design, ReplicationPlan]] = field(default_factory=list)


@lru_cache(maxsize=None)
def _replication_table(layout: FactorLayout, N: int, ratio: Fraction):
    table = []
    seen = set()
    for combo in itertools.combinations_with_replacement(candidate_slides(layout, False), N):
        design = Design(layout, combo)
        if not design.is_connected():
            continue
        for plan in replication_plans(design):
            key = _plan_key(design, plan)
            if key in seen:
                continue
            seen.add(key)
            model = ModelSpec(replication=plan, ratio=ratio)
            analysis = Analysis(design, model)
            variances = {e: analysis.variance(baseline_contrast(layout, e)) for e in layout.effects()}
            table.append((design, plan, variances))
    return table


def replication_search(layout: FactorLayout, N: int, w, ratio_grid: Iterable) -> dict[Fraction, ReplicationResult]:
    """GLS w-optimum over designs and biological/technical replication plans, per variance ratio."""
    weights = as_weights(layout, w)
    out = {}
    for r in ratio_grid:
        r = parse_rational(r) if isinstance(r, str) else Fraction(r)
        scored = []
        for design, plan, variances in _replication_table(layout, N, r):
            value = sum((weights.get(e, 0) * q for e, q in variances.items()), Fraction(0))
            scored.append((value, design, plan))
        best = min(v for v, _, _ in scored)
        optima = [(d, p) for v, d, p in scored if v == best]
        optima.sort(key=lambda dp: (dp[0].slides, not dp[1].is_all_biological(), _plan_key(*dp)[1]))
        d, p = optima[0]
        out[r] = ReplicationResult(r, best, d, p, len(optima), optima)
    return out
