"""Vectorized floating-point evaluation of many designs at once.

Used only to screen large search spaces; every design that can matter for
a reported result is re-evaluated exactly in :mod:`baseline_odx.models`.
A design is given as a row of indices into a fixed candidate slide list.
"""

from __future__ import annotations

import itertools
from math import comb
from typing import Iterator, Sequence

import numpy as np

from .factorial import FactorLayout, Slide, effect_contrast
from .models import Dye, ModelSpec, parameter_count, slide_row

RANK_TOL = 1e-9


class BatchEvaluator:
    def __init__(
        self,
        layout: FactorLayout,
        model: ModelSpec,
        candidates: Sequence[Slide],
        effects=None,
        parametrization: str = "baseline",
    ):
        if not model.is_diagonal:
            raise ValueError("batch evaluation needs uncorrelated observations")
        self.layout = layout
        self.model = model
        self.candidates = list(candidates)
        self.effects = list(effects) if effects is not None else layout.effects()
        v = layout.v
        self.v = v
        self.p = parameter_count(layout, model.dye)
        rows = np.array([slide_row(layout, s, model.dye) for s in self.candidates], dtype=float)
        prec = np.array([1.0 / float(model.slide_variance(s)) for s in self.candidates])
        self.rows = rows
        self.precision = prec
        self.outer = np.einsum("c,ci,cj->cij", prec, rows, rows)
        self.contrasts = np.array(
            [[float(x) for x in effect_contrast(layout, e, parametrization).dense()] for e in self.effects]
        )

    def information(self, combos: np.ndarray) -> np.ndarray:
        info = np.zeros((combos.shape[0], self.p, self.p))
        for j in range(combos.shape[1]):
            info += self.outer[combos[:, j]]
        return info

    def treatment_information(self, info: np.ndarray) -> np.ndarray:
        """Schur complement of the nuisance block (dye parameters), if any."""
        v = self.v
        if self.p == v:
            return info
        tt = info[:, :v, :v]
        tn = info[:, :v, v:]
        nn = info[:, v:, v:]
        vals, vecs = np.linalg.eigh(nn)
        cutoff = RANK_TOL * np.maximum(1.0, vals[:, -1:])
        inv_vals = np.where(vals > cutoff, 1.0 / np.where(vals > cutoff, vals, 1.0), 0.0)
        pinv = np.einsum("bij,bj,bkj->bik", vecs, inv_vals, vecs)
        return tt - tn @ pinv @ np.swapaxes(tn, 1, 2)

    def evaluate(self, combos: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-effect variances (rows of NaN where not all effects are estimable) and the estimable mask."""
        return self.evaluate_information(self.information(combos))

    def evaluate_information(self, info: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        c = self.treatment_information(info) + 1.0 / self.v
        vals = np.linalg.eigvalsh(c)
        ok = vals[:, 0] > RANK_TOL * np.maximum(1.0, vals[:, -1])
        out = np.full((c.shape[0], len(self.effects)), np.nan)
        if ok.any():
            k = np.linalg.inv(c[ok])
            out[ok] = np.einsum("ev,bvw,ew->be", self.contrasts, k, self.contrasts)
        return out, ok


def count_multisets(n_items: int, size: int) -> int:
    return comb(n_items + size - 1, size) if size >= 0 else 0


def multisets_with_first(n_items: int, size: int, first: int, chunk: int = 200_000) -> Iterator[np.ndarray]:
    """All sorted index tuples of length ``size`` whose smallest entry is ``first``, in chunks."""
    rest = size - 1
    if rest == 0:
        yield np.array([[first]], dtype=np.int64)
        return
    it = itertools.combinations_with_replacement(range(first, n_items), rest)
    total = count_multisets(n_items - first, rest)
    done = 0
    while done < total:
        take = min(chunk, total - done)
        flat = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(it, take)), dtype=np.int64, count=take * rest
        )
        block = np.empty((take, size), dtype=np.int64)
        block[:, 0] = first
        block[:, 1:] = flat.reshape(take, rest)
        yield block
        done += take


def multisets(n_items: int, size: int, chunk: int = 200_000) -> Iterator[np.ndarray]:
    for first in range(n_items):
        yield from multisets_with_first(n_items, size, first, chunk)
