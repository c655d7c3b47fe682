"""Approximate design theory: design measures on candidate slides.

Floating point throughout.  The information of a measure is
``sum_s pi_s x_s x_s' / var_s`` per unit mass, so an N-slide design ``d``
viewed as the measure ``d / N`` has criterion ``N * criterion_value(d)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .batch import BatchEvaluator
from .factorial import (
    SLIDES_2X2,
    Design,
    FactorLayout,
    InvalidInput,
    Slide,
    candidate_slides,
    effect_contrast,
    frequencies,
)
from .models import Dye, ModelSpec, NotEstimable, variance_report
from .search import as_weights, criterion_value, exhaustive_w_optimal

MASS_FLOOR = 1e-12


class NonConvergence(RuntimeError):
    pass


@dataclass
class DesignMeasure:
    layout: FactorLayout
    slides: tuple[Slide, ...]
    mass: np.ndarray

    def __post_init__(self):
        self.slides = tuple(Slide(tuple(s[0]), tuple(s[1])) for s in self.slides)
        mass = np.asarray(self.mass, dtype=float)
        if mass.shape != (len(self.slides),):
            raise InvalidInput("one mass per slide is required")
        if (mass < 0).any() or abs(mass.sum() - 1) > 1e-12:
            raise InvalidInput("masses must be nonnegative and sum to 1")
        self.mass = mass

    @classmethod
    def from_design(cls, design: Design) -> "DesignMeasure":
        counts = design.counts(dye_sensitive=True)
        slides = sorted(counts)
        return cls(design.layout, tuple(slides), np.array([counts[s] for s in slides], float) / design.N)

    def support(self) -> list[tuple[Slide, float]]:
        return [(s, float(p)) for s, p in zip(self.slides, self.mass) if p > 0]

    def masses_2x2(self) -> np.ndarray:
        """Masses in the fixed 2x2 slide order (01,00),(10,00),(11,00),(10,01),(11,01),(11,10)."""
        if self.layout.levels != (2, 2):
            raise InvalidInput("only defined for the 2x2 factorial")
        out = np.zeros(6)
        lookup = {s.unordered(): k for k, s in enumerate(SLIDES_2X2)}
        for s, p in zip(self.slides, self.mass):
            out[lookup[s.unordered()]] += p
        return out

    def to_dict(self) -> dict:
        return {
            "layout": list(self.layout.levels),
            "mass": [
                {"red": list(s.red), "green": list(s.green), "pi": float(p)} for s, p in zip(self.slides, self.mass)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "DesignMeasure":
        try:
            layout = FactorLayout(tuple(data["layout"]))
            slides = tuple(Slide(tuple(e["red"]), tuple(e["green"])) for e in data["mass"])
            mass = np.array([float(e["pi"]) for e in data["mass"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed measure JSON: {exc}") from exc
        return cls(layout, slides, mass / mass.sum())


def _from_2x2(mass: Sequence[float]) -> DesignMeasure:
    return DesignMeasure(FactorLayout((2, 2)), SLIDES_2X2, np.asarray(mass, float))


def measure_variances(m: DesignMeasure, model: ModelSpec, parametrization: str = "baseline") -> dict:
    ev = BatchEvaluator(m.layout, model, m.slides, parametrization=parametrization)
    info = np.einsum("c,cij->ij", m.mass, ev.outer)
    var, ok = ev.evaluate_information(info[None])
    if not ok[0]:
        raise NotEstimable(message="measure support does not keep every effect estimable")
    return dict(zip(ev.effects, var[0]))


def measure_criterion(m: DesignMeasure, model: ModelSpec, weights, parametrization: str = "baseline") -> float:
    weights = as_weights(m.layout, weights)
    var = measure_variances(m, model, parametrization)
    return float(sum(float(weights.get(e, 0)) * v for e, v in var.items()))


class _Problem:
    """A-type criterion on the no-dye model, baseline treatment mean pinned to zero."""

    def __init__(self, layout, model, weights, parametrization):
        if model.dye != Dye.NONE or not model.is_diagonal:
            raise InvalidInput("measure optimization supports the no-dye model with uncorrelated slides")
        self.layout = layout
        self.slides = candidate_slides(layout, dye_sensitive=False)
        v = layout.v
        z = np.zeros((len(self.slides), v))
        for k, s in enumerate(self.slides):
            z[k, layout.index(s.red)] += 1
            z[k, layout.index(s.green)] -= 1
            z[k] /= math.sqrt(float(model.slide_variance(s)))
        self.z = z[:, 1:]
        weights = as_weights(layout, weights)
        w = np.zeros((v - 1, v - 1))
        for e, q in weights.items():
            if q:
                c = np.array([float(x) for x in effect_contrast(layout, e, parametrization).dense()])[1:]
                w += float(q) * np.outer(c, c)
        self.w = w

    def value(self, pi):
        m = self.z.T @ (pi[:, None] * self.z)
        try:
            k = np.linalg.inv(m)
        except np.linalg.LinAlgError:
            return np.inf, None, None
        if not np.isfinite(k).all() or np.linalg.cond(m) > 1e14:
            return np.inf, None, None
        a = self.z @ k
        phi = float(np.sum(k * self.w))
        d = np.einsum("ij,jk,ik->i", a, self.w, a)
        return phi, d, (a, k)

    def hessian(self, extra, support):
        a, _ = extra
        zs = self.z[support]
        p = a[support] @ zs.T
        q = a[support] @ self.w @ a[support].T
        return 2 * p * q

    def multiplicative(self, pi, steps, gap_target):
        for _ in range(steps):
            phi, d, _ = self.value(pi)
            if d.max() / phi - 1 < gap_target:
                break
            pi = pi * d / phi
            pi /= pi.sum()
        return pi

    def newton(self, pi, iters=200):
        pi = pi.copy()
        support = np.flatnonzero(pi > 0)
        for _ in range(iters):
            phi, d, extra = self.value(pi)
            g = -d[support]
            h = self.hessian(extra, support)
            n = len(support)
            kkt = np.zeros((n + 1, n + 1))
            kkt[:n, :n] = h
            kkt[:n, n] = kkt[n, :n] = 1.0
            rhs = np.concatenate([-g, [0.0]])
            step = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:n]
            if np.abs(step).max() < 1e-16:
                break
            cur = pi[support]
            neg = step < 0
            alpha = min(1.0, float(np.min(-cur[neg] / step[neg]))) if neg.any() else 1.0
            slope = float(g @ step)
            accepted = False
            while alpha > 1e-14:
                trial = pi.copy()
                trial[support] = np.maximum(cur + alpha * step, 0.0)
                trial /= trial.sum()
                val = self.value(trial)[0]
                if val <= phi + 1e-4 * alpha * slope or val <= phi * (1 + 1e-15):
                    accepted = True
                    break
                alpha /= 2
            if not accepted:
                break
            trial[trial < MASS_FLOOR] = 0.0
            trial /= trial.sum()
            pi = trial
            support = np.flatnonzero(pi > 0)
        return pi

    def solve(self, start, tol, max_iter):
        pi = self.multiplicative(start, min(max_iter, 5000), 1e-4)
        for _ in range(60):
            pi = self.newton(pi)
            pi[pi < MASS_FLOOR] = 0.0
            pi /= pi.sum()
            phi, d, _ = self.value(pi)
            if d.max() / phi - 1 <= tol:
                return pi, phi
            violators = d > phi * (1 + tol)
            pi[violators] = np.maximum(pi[violators], 1e-3)
            pi /= pi.sum()
            pi = self.multiplicative(pi, min(max_iter, 2000), 1e-6)
        raise NonConvergence("measure optimization did not reach the first-order certificate")


def optimize_measure(
    layout: FactorLayout,
    model: ModelSpec,
    weights,
    parametrization: str = "baseline",
    tol: float = 1e-10,
    restarts: int = 20,
    seed: int = 0,
    max_iter: int = 100_000,
) -> DesignMeasure:
    """w-optimal design measure over all unordered candidate slides.

    Multiplicative updates bring the measure near the optimum, then Newton
    steps on the active support converge it; the result satisfies
    ``d_s <= Phi * (1 + tol)`` for every candidate slide ``s``.
    """
    prob = _Problem(layout, model, weights, parametrization)
    rng = np.random.default_rng(seed)
    m = len(prob.slides)
    starts = [np.full(m, 1.0 / m)] + [rng.dirichlet(np.ones(m)) for _ in range(max(0, restarts - 1))]
    best = None
    for start in starts:
        pi, phi = prob.solve(start, tol, max_iter)
        key = (phi, tuple(np.round(pi, 12)))
        if best is None or key < best[0]:
            best = (key, pi)
    return DesignMeasure(layout, tuple(prob.slides), best[1])


def certificate(m: DesignMeasure, model: ModelSpec, weights, parametrization: str = "baseline") -> float:
    """Smallest relative directional derivative ``(Phi - d_s) / Phi`` over all candidate slides."""
    prob = _Problem(m.layout, model, weights, parametrization)
    index = {s: k for k, s in enumerate(prob.slides)}
    pi = np.zeros(len(prob.slides))
    for s, p in zip(m.slides, m.mass):
        pi[index[s.unordered()]] += p
    phi, d, _ = prob.value(pi)
    return float(np.min(phi - d) / phi)


def closed_form_pi0(w) -> DesignMeasure:
    w = float(w)
    if w <= 0:
        raise InvalidInput("w must be positive")
    xi = 0.25 * (math.sqrt(w * w + 2 * w) - w)
    return _from_2x2((0.5 - xi, 0.5 - xi, 0, 0, xi, xi))


def xi_of(w) -> float:
    w = float(w)
    return 0.25 * (math.sqrt(w * w + 2 * w) - w)


def closed_form_orth(w) -> DesignMeasure:
    w = float(w)
    if w <= 0:
        raise InvalidInput("w must be positive")
    if w >= 4:
        return _from_2x2((0.25, 0.25, 0, 0, 0.25, 0.25))
    alpha = 0.5 * math.sqrt(w) / (2 + math.sqrt(w))
    return _from_2x2((alpha, alpha, 0.5 - 2 * alpha, 0.5 - 2 * alpha, alpha, alpha))


PI_TILDE = (0.25, 0.25, 0.0, 0.0, 0.25, 0.25)


def efficiency(
    target: Design | DesignMeasure,
    model: ModelSpec,
    weights,
    parametrization: str = "baseline",
    optimum: DesignMeasure | None = None,
) -> float:
    """Percentage ratio of the optimal measure's criterion to the target's per-unit-mass criterion."""
    m = DesignMeasure.from_design(target) if isinstance(target, Design) else target
    if optimum is None:
        optimum = optimize_measure(m.layout, model, weights, parametrization)
    best = measure_criterion(optimum, model, weights, parametrization)
    return 100.0 * best / measure_criterion(m, model, weights, parametrization)


def exact_efficiency(design: Design, model: ModelSpec, weights, jobs: int | None = None) -> float:
    """Percentage ratio of the exact N-slide optimum to the design's criterion (exact ratio)."""
    best = exhaustive_w_optimal(design.layout, design.N, model, weights, jobs=jobs).criterion
    return float(100 * best / criterion_value(design, model, weights))


def round_measure(m: DesignMeasure, N: int) -> Design:
    """Nearest-integer apportionment of ``N * mass``, fixed up to total N by largest remainders."""
    if N < 1:
        raise InvalidInput("N must be positive")
    target = N * m.mass
    counts = np.floor(target + 0.5).astype(int)
    diff = N - int(counts.sum())
    residual = target - counts
    if diff > 0:
        for k in sorted(range(len(counts)), key=lambda k: (-residual[k], k))[:diff]:
            counts[k] += 1
    elif diff < 0:
        order = [k for k in sorted(range(len(counts)), key=lambda k: (residual[k], k)) if counts[k] > 0]
        for k in order[:-diff]:
            counts[k] -= 1
    slides = tuple(s for s, c in zip(m.slides, counts) for _ in range(c))
    design = Design(m.layout, slides)
    variance_report(design, ModelSpec())
    return design


def hetero_efficiency(pattern: Sequence, w, layout: FactorLayout | None = None) -> float:
    """Efficiency of the homoscedastic optimum pi0(w) when biological variances follow ``pattern``."""
    layout = layout or FactorLayout((2, 2))
    model = ModelSpec.heteroscedastic(layout, pattern)
    return efficiency(closed_form_pi0(w), model, w)


def admissibility_gaps(m: DesignMeasure, model: ModelSpec, parametrization: str = "baseline", starts: int = 8, seed: int = 0) -> dict:
    """For each effect, how far its variance can be lowered without raising any other.

    Each entry is ``V_e(m) - min V_e`` over measures with every other variance
    at most its value under ``m``; all entries near zero mean no dominating
    measure was found.
    """
    layout = m.layout
    base = measure_variances(m, model, parametrization)
    effects = sorted(base)
    prob = _Problem(layout, model, {e: 1 for e in effects}, parametrization)
    contrasts = {e: np.array([float(x) for x in effect_contrast(layout, e, parametrization).dense()])[1:] for e in effects}

    def variances(pi):
        mat = prob.z.T @ (np.maximum(pi, 0)[:, None] * prob.z) + 1e-12 * np.eye(prob.z.shape[1])
        k = np.linalg.inv(mat)
        return {e: float(c @ k @ c) for e, c in contrasts.items()}

    index = {s: k for k, s in enumerate(prob.slides)}
    start0 = np.zeros(len(prob.slides))
    for s, p in zip(m.slides, m.mass):
        start0[index[s.unordered()]] += p
    rng = np.random.default_rng(seed)
    gaps = {}
    for e in effects:
        others = [f for f in effects if f != e]
        cons = [{"type": "eq", "fun": lambda p: p.sum() - 1}]
        cons += [{"type": "ineq", "fun": (lambda p, f=f: base[f] - variances(p)[f])} for f in others]
        best = base[e]
        for k in range(starts):
            x0 = start0 if k == 0 else 0.5 * start0 + 0.5 * rng.dirichlet(np.ones(len(start0)))
            res = minimize(
                lambda p: variances(p)[e],
                x0,
                method="SLSQP",
                bounds=[(0, 1)] * len(x0),
                constraints=cons,
                options={"ftol": 1e-14, "maxiter": 500},
            )
            if res.success:
                found = variances(res.x)
                if all(found[f] <= base[f] * (1 + 1e-12) for f in others):
                    best = min(best, found[e])
        gaps[e] = base[e] - best
    return gaps


def is_admissible(m: DesignMeasure, model: ModelSpec, parametrization: str = "baseline", rel_tol: float = 1e-4) -> bool:
    """No effect's variance can be cut by more than ``rel_tol`` (relative) without raising another.

    When a variance already sits at its unconstrained minimum, the float
    slack on that constraint lets the others move by its square root, hence
    the loose default.
    """
    base = measure_variances(m, model, parametrization)
    gaps = admissibility_gaps(m, model, parametrization)
    return all(gaps[e] <= rel_tol * base[e] for e in gaps)
