"""Seed sets, similitudes, cylinder realizations and separation checks.

Geometry is restricted to intervals (q = 1) and axis-aligned boxes
(q = 2) so that the separation condition can be certified by interval
arithmetic.  Seeds are normalized to unit diameter; the image of seed
J_j under the map of cell (i, j) must land inside J_i, pairwise
disjoint from its siblings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Similitude:
    """x -> ratio * O(x) + translate with O orthogonal (identity or axis flip)."""

    ratio: float
    translate: tuple
    reflect: bool = False

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise GeometryError(f"ratio {self.ratio} outside (0, 1)")

    @property
    def q(self) -> int:
        return len(self.translate)

    def scale_vector(self) -> np.ndarray:
        # Reflection flips the first coordinate; enough generality for boxes.
        s = np.full(self.q, self.ratio)
        if self.reflect:
            s[0] = -self.ratio
        return s

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.scale_vector() * np.asarray(x, dtype=float) + np.asarray(self.translate)

    def apply_box(self, lo: np.ndarray, hi: np.ndarray) -> tuple:
        a = self.apply(lo)
        b = self.apply(hi)
        return np.minimum(a, b), np.maximum(a, b)


def _diameter(lo, hi) -> float:
    return float(np.linalg.norm(np.asarray(hi) - np.asarray(lo)))


def _box_gap(lo1, hi1, lo2, hi2) -> float:
    """Euclidean distance between two axis-aligned boxes (0 if they meet)."""
    d = np.maximum(0.0, np.maximum(np.asarray(lo1) - np.asarray(hi2),
                                   np.asarray(lo2) - np.asarray(hi1)))
    return float(np.linalg.norm(d))


@dataclass(frozen=True)
class GeometrySpec:
    """Seeds J_1..J_N plus one similitude per base cell of S_2."""

    q: int
    seeds: tuple            # tuple of (lo, hi) coordinate tuples
    maps: dict = field(hash=False)  # (i, j) -> Similitude, 1-based base cells

    def __post_init__(self):
        if self.q not in (1, 2):
            raise GeometryError("only q in {1, 2} is supported")
        for lo, hi in self.seeds:
            if len(lo) != self.q or len(hi) != self.q:
                raise GeometryError("seed dimension mismatch")
            if abs(_diameter(lo, hi) - 1.0) > 1e-9:
                raise GeometryError("seeds must have unit diameter")
        for (i, j), sim in self.maps.items():
            if sim.q != self.q:
                raise GeometryError(f"map {(i, j)} dimension mismatch")

    @property
    def n_base(self) -> int:
        return len(self.seeds)

    def seed_box(self, i: int) -> tuple:
        lo, hi = self.seeds[i - 1]
        return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)

    def anchor(self, i: int) -> np.ndarray:
        lo, hi = self.seed_box(i)
        return (lo + hi) / 2.0


def cylinder_set(sigma, geom: GeometrySpec) -> tuple:
    """Realize J_sigma = T_sigma(J_{sigma_n}); returns ((lo, hi), diameter)."""
    lo, hi = geom.seed_box(sigma[-1])
    for h in range(len(sigma) - 2, -1, -1):
        cell = (sigma[h], sigma[h + 1])
        try:
            sim = geom.maps[cell]
        except KeyError:
            raise GeometryError(f"no similitude for cell {cell}") from None
        lo, hi = sim.apply_box(lo, hi)
    return (lo, hi), _diameter(lo, hi)


def realize_point(word, geom: GeometrySpec, n_base: int | None = None) -> np.ndarray:
    """T_sigma applied to the centroid of the terminal seed.

    Accepts a lifted or base word; lifted letters are projected first,
    which is consistent because all lifts of a cell share one map.
    """
    if n_base is None:
        n_base = geom.n_base
    sigma = tuple((l - 1) % n_base + 1 for l in word)
    x = geom.anchor(sigma[-1])
    for h in range(len(sigma) - 2, -1, -1):
        x = geom.maps[(sigma[h], sigma[h + 1])].apply(x)
    return x


@dataclass
class GeometryReport:
    ok: bool
    delta: float
    witness: tuple | None = None
    message: str = ""


def validate_geometry(geom: GeometrySpec) -> GeometryReport:
    """Check containment plus pairwise disjointness; return the separation constant.

    delta is the largest constant satisfying both the level-1 seed gaps
    and the level-2 within-row gaps d(J_ij, J_il) >= delta * max(diam);
    it then certifies the same inequality for every incomparable pair.
    """
    n = geom.n_base
    delta = np.inf
    # level 1: seeds pairwise disjoint with positive gaps
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            gap = _box_gap(*geom.seed_box(i), *geom.seed_box(j))
            if gap <= 0.0:
                return GeometryReport(False, 0.0, (i, j), "seeds overlap")
            delta = min(delta, gap)  # unit diameters
    # level 2: containment and within-row disjointness
    rows = {}
    for (i, j), sim in geom.maps.items():
        rows.setdefault(i, []).append((j, sim))
    for i, cells in rows.items():
        plo, phi = geom.seed_box(i)
        images = []
        for j, sim in sorted(cells):
            lo, hi = sim.apply_box(*geom.seed_box(j))
            if np.any(lo < plo - 1e-12) or np.any(hi > phi + 1e-12):
                return GeometryReport(False, 0.0, (i, j),
                                      "image escapes its parent seed")
            images.append((j, lo, hi))
        for a in range(len(images)):
            for b in range(a + 1, len(images)):
                ja, lo1, hi1 = images[a]
                jb, lo2, hi2 = images[b]
                gap = _box_gap(lo1, hi1, lo2, hi2)
                dmax = max(_diameter(lo1, hi1), _diameter(lo2, hi2))
                if gap <= 0.0:
                    return GeometryReport(False, 0.0, ((i, ja), (i, jb)),
                                          "sibling images overlap")
                delta = min(delta, gap / dmax)
    return GeometryReport(True, float(delta))


def interval_geometry(cells, ratios, n_base: int) -> GeometrySpec:
    """Default 1-D layout: unit seeds [2(i-1), 2(i-1)+1], images at slot corners.

    ``cells`` are the base cells of S_2 and ``ratios`` maps each to its
    contraction ratio.  Each parent interval is split into equal slots,
    one per child cell, and the image is pinned at the slot's left end,
    which keeps siblings disjoint whenever ratio < 1/(children per row).
    """
    seeds = tuple(((2.0 * (i - 1),), (2.0 * (i - 1) + 1.0,))
                  for i in range(1, n_base + 1))
    rows = {}
    for (i, j) in sorted(cells):
        rows.setdefault(i, []).append(j)
    maps = {}
    for i, js in rows.items():
        nslots = len(js)
        lo_i = 2.0 * (i - 1)
        for slot, j in enumerate(js):
            s = float(ratios[(i, j)])
            if s >= 1.0 / nslots:
                raise GeometryError(
                    f"ratio {s} too large for {nslots} children in row {i}")
            slot_lo = lo_i + slot / nslots
            lo_j = 2.0 * (j - 1)
            maps[(i, j)] = Similitude(s, (slot_lo - s * lo_j,))
    return GeometrySpec(1, seeds, maps)
