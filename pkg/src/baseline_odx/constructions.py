"""Named design constructions for baseline-parametrized factorials."""

from __future__ import annotations

import itertools
from collections import defaultdict

from .factorial import (
    Design,
    FactorLayout,
    InvalidInput,
    Slide,
    Treatment,
    canonicalize,
    from_frequencies,
)


class OddDegree(ValueError):
    """Some treatment appears an odd number of times, so no balanced dye assignment exists."""


def rho(t: Treatment) -> Treatment:
    """Zero the first nonzero level of ``t``."""
    for k, i in enumerate(t):
        if i:
            return t[:k] + (0,) + t[k + 1 :]
    raise InvalidInput("rho is undefined for the all-zero treatment")


def construct_d0(layout: FactorLayout) -> Design:
    """Saturated design pairing every nonzero treatment (red) with rho of it (green)."""
    return Design(layout, tuple(Slide(t, rho(t)) for t in layout.effects()))


def permuted_d0(layout: FactorLayout, order: tuple[int, ...]) -> Design:
    """d0 built with the factors taken in ``order``, mapped back to the original factor order."""
    order = tuple(order)
    if sorted(order) != list(range(layout.n)):
        raise InvalidInput(f"not a permutation of the {layout.n} factors: {order}")
    # order[k] is the original factor placed at position k
    permuted = FactorLayout(tuple(layout.levels[j] for j in order))

    def back(t):
        out = [0] * layout.n
        for k, j in enumerate(order):
            out[j] = t[k]
        return tuple(out)

    return Design(layout, tuple(Slide(back(s.red), back(s.green)) for s in construct_d0(permuted).slides))


def d0_collection(layout: FactorLayout) -> list[Design]:
    """Optimal saturated designs: free rho choice for two factors, factor permutations otherwise.

    Returned in canonical (dye-sensitive) form, sorted, without duplicates.
    """
    if layout.n == 2:
        s1, s2 = layout.levels
        fixed = [Slide((i, 0), (0, 0)) for i in range(1, s1)] + [Slide((0, j), (0, 0)) for j in range(1, s2)]
        interior = [(i, j) for i in range(1, s1) for j in range(1, s2)]
        designs = set()
        for choice in itertools.product((0, 1), repeat=len(interior)):
            slides = list(fixed)
            for (i, j), c in zip(interior, choice):
                slides.append(Slide((i, j), (0, j) if c == 0 else (i, 0)))
            designs.add(canonicalize(Design(layout, tuple(slides))))
    else:
        designs = {canonicalize(permuted_d0(layout, p)) for p in itertools.permutations(range(layout.n))}
    return sorted(designs, key=lambda d: d.slides)


def dye_swap(design: Design) -> Design:
    return Design(design.layout, tuple(x for s in design.slides for x in (s, s.swapped())))


def construct_dbar(layout: FactorLayout) -> Design:
    """Union of the two-factor saturated optimal designs."""
    if layout.n != 2:
        raise InvalidInput("dbar is defined for two-factor layouts only")
    s1, s2 = layout.levels
    slides = [Slide((i, j), (0, j)) for i in range(1, s1) for j in range(s2)]
    slides += [Slide((i, j), (i, 0)) for i in range(s1) for j in range(1, s2)]
    return Design(layout, tuple(slides))


def construct_reference(layout: FactorLayout) -> Design:
    return Design(layout, tuple(Slide(t, layout.baseline) for t in layout.effects()))


def construct_symmetric(layout: FactorLayout) -> Design:
    ts = layout.treatments()
    return Design(layout, tuple(Slide(b, a) for a, b in itertools.combinations(ts, 2)))


def is_egd(design: Design) -> bool:
    """True when pair multiplicities depend only on the coordinatewise equality pattern."""
    counts = design.counts(dye_sensitive=False)
    by_pattern = defaultdict(set)
    for a, b in itertools.combinations(design.layout.treatments(), 2):
        pattern = tuple(x == y for x, y in zip(a, b))
        by_pattern[pattern].add(counts.get(Slide(a, b), 0))
    return all(len(m) == 1 for m in by_pattern.values())


def construct_egd_2x3() -> Design:
    return Design.from_pairs(
        (2, 3), [("11", "00"), ("12", "00"), ("10", "01"), ("12", "01"), ("10", "02"), ("11", "02")]
    )


def family_phi(N: int, phi: int) -> Design:
    """2x2 design with frequencies (N/2 - phi, N/2 - phi, 0, 0, phi, phi)."""
    if N % 2 or N <= 0:
        raise InvalidInput(f"N must be a positive even number, got {N}")
    if not 0 <= phi <= N // 2:
        raise InvalidInput(f"phi must lie in [0, N/2], got {phi}")
    half = N // 2
    return from_frequencies((half - phi, half - phi, 0, 0, phi, phi))


def orient_even_design(design: Design) -> Design:
    """Re-orient slides so each treatment is red exactly as often as green.

    Designs that are already balanced are returned in canonical order.
    Otherwise every connected component of the slide multigraph is walked
    along an Eulerian circuit (Hierholzer), always leaving a vertex by its
    lexicographically smallest unused edge, and each slide is oriented in
    the direction of travel.
    """
    degrees = design.degrees()
    odd = sorted(t for t, d in degrees.items() if d % 2)
    if odd:
        raise OddDegree(f"treatments with odd appearance count: {odd}")
    if all(b == 0 for b in design.dye_balance().values()):
        return canonicalize(design)

    edges = sorted(s.unordered() for s in design.slides)
    incident = defaultdict(list)
    for k, (a, b) in enumerate(edges):
        incident[a].append((b, k))
        incident[b].append((a, k))
    for t in incident:
        incident[t].sort()
    used = [False] * len(edges)
    cursor = defaultdict(int)
    oriented = []

    for start in sorted(incident):
        stack = [(start, None)]
        while stack:
            vertex, _ = stack[-1]
            nbrs = incident[vertex]
            while cursor[vertex] < len(nbrs) and used[nbrs[cursor[vertex]][1]]:
                cursor[vertex] += 1
            if cursor[vertex] < len(nbrs):
                other, k = nbrs[cursor[vertex]]
                used[k] = True
                stack.append((other, Slide(vertex, other)))
            else:
                _, slide = stack.pop()
                if slide is not None:
                    oriented.append(slide)
    return canonicalize(Design(design.layout, tuple(oriented)))
