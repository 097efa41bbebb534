"""System specification, assumption-regime checks, and paper fixtures.

A :class:`SystemSpec` bundles the 2N x 2N transition matrix P, the
initial vector chi, one contraction ratio per overlapping base cell,
the quantization order r and optional geometry.  Probabilities are kept
as exact fractions whenever the input allows it, because the regime
checks and reducibility tests are equality tests on rationals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import geometry as geo
from . import symbolic as sym


class SpecError(ValueError):
    pass


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)  # accepts "a/b" and decimal strings
    if isinstance(x, float):
        return Fraction(x)  # exact binary value of the float
    raise SpecError(f"cannot interpret {x!r} as a probability")


class SystemSpec:
    """Markov system with complete overlaps on the doubled alphabet.

    Parameters
    ----------
    n_base : N, the base alphabet size (the doubled alphabet has 2N letters).
    P : 2N x 2N row-stochastic matrix; entry > 0 iff the edge exists.
    chi : length-2N positive initial probability vector.
    ratios : mapping (i, j) -> ratio in (0,1), defined exactly on the base
        cells with at least one realized lifted edge (all four lifted pairs
        of a cell share the one ratio).
    r : quantization order, > 0.
    geometry : optional GeometrySpec; ``default_geometry()`` builds one.
    """

    def __init__(self, n_base, P, chi, ratios, r=2.0, geometry=None):
        if n_base < 2:
            raise SpecError("need N >= 2")
        self.n_base = int(n_base)
        m = 2 * self.n_base
        P = [list(row) for row in P]
        if len(P) != m or any(len(row) != m for row in P):
            raise SpecError(f"P must be {m}x{m}")
        self.P = tuple(tuple(_to_fraction(x) for x in row) for row in P)
        self.exact = all(isinstance(x, (int, str, Fraction))
                         for row in P for x in row)
        if len(chi) != m:
            raise SpecError(f"chi must have length {m}")
        self.chi = tuple(_to_fraction(x) for x in chi)
        for row in self.P:
            if any(x < 0 for x in row):
                raise SpecError("negative transition probability")
            if sum(row) != 1 and abs(float(sum(row)) - 1.0) > 1e-12:
                raise SpecError(f"row {row} does not sum to 1")
        if any(x <= 0 for x in self.chi):
            raise SpecError("chi must be strictly positive")
        if sum(self.chi) != 1 and abs(float(sum(self.chi)) - 1.0) > 1e-12:
            raise SpecError("chi does not sum to 1")
        if r <= 0:
            raise SpecError("order r must be positive")
        self.r = float(r)

        self.P_f = np.array([[float(x) for x in row] for row in self.P])
        self.chi_f = np.array([float(x) for x in self.chi])
        edges = frozenset((a + 1, b + 1)
                          for a in range(m) for b in range(m)
                          if self.P[a][b] > 0)
        self.graph = sym.TransitionGraph(self.n_base, edges)
        self.cells = sym.overlap_cells(self.graph)
        self.s2_cells = tuple(sorted(c for c, cell in self.cells.items()
                                     if cell.count > 0))
        missing = [c for c in self.s2_cells if c not in ratios]
        extra = [c for c in ratios if c not in self.s2_cells]
        if missing or extra:
            raise SpecError(
                f"ratios must cover exactly the realized cells; "
                f"missing={missing} extra={extra}")
        self.ratios = {c: float(ratios[c]) for c in self.s2_cells}
        for c, s in self.ratios.items():
            if not 0.0 < s < 1.0:
                raise SpecError(f"ratio {s} for cell {c} outside (0,1)")
        self.geometry = geometry

        # N x N lookup tables used by the transfer-matrix machinery:
        # T[u][v][i-1, j-1] = P[lift_u(i), lift_v(j)], ratio_t the cell ratio.
        n = self.n_base
        self.T = np.zeros((2, 2, n, n))
        for i in range(n):
            for j in range(n):
                self.T[0, 0, i, j] = self.P_f[i, j]
                self.T[0, 1, i, j] = self.P_f[i, j + n]
                self.T[1, 0, i, j] = self.P_f[i + n, j]
                self.T[1, 1, i, j] = self.P_f[i + n, j + n]
        self.ratio_t = np.zeros((n, n))
        for (i, j), s in self.ratios.items():
            self.ratio_t[i - 1, j - 1] = s

    # -- small accessors -------------------------------------------------
    @property
    def N(self) -> int:
        return self.n_base

    def p(self, a: int, b: int) -> Fraction:
        return self.P[a - 1][b - 1]

    def chi_of(self, a: int) -> Fraction:
        return self.chi[a - 1]

    def lift(self, i: int) -> int:
        return i + self.n_base

    def with_r(self, r: float) -> "SystemSpec":
        return SystemSpec(self.n_base, self.P, self.chi, self.ratios, r,
                          self.geometry)

    def default_geometry(self) -> geo.GeometrySpec:
        return geo.interval_geometry(self.s2_cells, self.ratios, self.n_base)

    def with_default_geometry(self) -> "SystemSpec":
        return SystemSpec(self.n_base, self.P, self.chi, self.ratios, self.r,
                          self.default_geometry())

    def __repr__(self):
        return (f"SystemSpec(N={self.n_base}, r={self.r}, "
                f"cells={len(self.s2_cells)}, exact={self.exact})")


# ---------------------------------------------------------------------------
# regime validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Flag:
    ok: bool
    witness: tuple | None = None

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class RegimeReport:
    a1: Flag
    a2: Flag
    a3: Flag
    a4: Flag
    a5: Flag
    g1: Flag
    g2: Flag
    b1: Flag
    b2: Flag
    p_irreducible: bool
    case: str  # "I", "II" or "other"

    def flags(self) -> dict:
        return {"A1": self.a1, "A2": self.a2, "A3": self.a3, "A4": self.a4,
                "A5": self.a5, "g1": self.g1, "g2": self.g2,
                "b1": self.b1, "b2": self.b2}


def _support_irreducible(block: Sequence[Sequence[Fraction]]) -> bool:
    n = len(block)
    reach = [[block[i][j] > 0 for j in range(n)] for i in range(n)]
    for k in range(n):
        for i in range(n):
            if reach[i][k]:
                row_k = reach[k]
                row_i = reach[i]
                for j in range(n):
                    if row_k[j]:
                        row_i[j] = True
    return all(reach[i][j] for i in range(n) for j in range(n))


def _block(spec: SystemSpec, rows, cols):
    return [[spec.P[a][b] for b in cols] for a in rows]


def validate(spec: SystemSpec) -> RegimeReport:
    """Decide the assumption flags (A1)-(A5), (g1), (g2), (b1), (b2).

    Every check is finite and exact on the stored fractions; a failed
    flag carries a concrete witness (index or cell).
    """
    n = spec.n_base
    lo = range(n)
    hi = range(n, 2 * n)

    p1 = _block(spec, lo, lo)
    p2 = _block(spec, hi, hi)
    p4 = _block(spec, hi, lo)

    # A1: both diagonal blocks irreducible, lower-left block zero
    a1_witness = None
    if not _support_irreducible(p1):
        a1_witness = ("P1 reducible",)
    elif not _support_irreducible(p2):
        a1_witness = ("P2 reducible",)
    else:
        for i in range(n):
            for j in range(n):
                if p4[i][j] > 0:
                    a1_witness = ("P4 nonzero", (i + 1 + n, j + 1))
                    break
            if a1_witness:
                break
    a1 = Flag(a1_witness is None, a1_witness)

    # A2: row supports of both diagonal blocks have cardinality >= 2
    a2_witness = None
    for i in range(n):
        if sum(1 for j in range(n) if p1[i][j] > 0) < 2:
            a2_witness = (i + 1,)
            break
        if sum(1 for j in range(n) if p2[i][j] > 0) < 2:
            a2_witness = (i + 1 + n,)
            break
    a2 = Flag(a2_witness is None, a2_witness)

    # A3 / A4: overlap-cell shapes
    a3_witness = a4_witness = None
    for (i, j), cell in sorted(spec.cells.items()):
        if cell.count == 0:
            continue
        triple = frozenset({(i, j), (i, j + n), (i + n, j + n)})
        full = frozenset({(i, j), (i, j + n), (i + n, j), (i + n, j + n)})
        if a3_witness is None and cell.members != triple:
            a3_witness = (i, j)
        if a4_witness is None and cell.members != full:
            a4_witness = (i, j)
    a3 = Flag(a3_witness is None, a3_witness)
    a4 = Flag(a4_witness is None, a4_witness)

    a5 = Flag(_support_irreducible(p1), None if _support_irreducible(p1) else ("P1",))

    # g1 / g2: lifted row / column sum identities over the realized cells
    g1_witness = g2_witness = None
    for (i, j) in spec.s2_cells:
        jn, i_n = j + n, i + n
        if g1_witness is None and \
                spec.p(i, j) + spec.p(i, jn) != spec.p(i_n, j) + spec.p(i_n, jn):
            g1_witness = (i, j)
        if g2_witness is None and \
                spec.p(i, j) + spec.p(i_n, j) != spec.p(i, jn) + spec.p(i_n, jn):
            g2_witness = (i, j)
    g1 = Flag(g1_witness is None, g1_witness)
    g2 = Flag(g2_witness is None, g2_witness)

    # b1: chi_i = chi_{i+}
    b1_witness = next(((i + 1,) for i in range(n)
                       if spec.chi[i] != spec.chi[i + n]), None)
    b1 = Flag(b1_witness is None, b1_witness)

    # b2: for every i some l with p_{l,i} + p_{l+,i} != p_{l,i+} + p_{l+,i+}
    b2_witness = None
    for i in range(1, n + 1):
        found = any(
            spec.p(l, i) + spec.p(l + n, i) != spec.p(l, i + n) + spec.p(l + n, i + n)
            for l in range(1, n + 1))
        if not found:
            b2_witness = (i,)
            break
    b2 = Flag(b2_witness is None, b2_witness)

    p_irr = _support_irreducible(spec.P)

    if a1 and a2 and a3:
        case = "I"
    elif a2 and a4 and a5 and p_irr:
        case = "II"
    else:
        case = "other"
    return RegimeReport(a1, a2, a3, a4, a5, g1, g2, b1, b2, p_irr, case)


# ---------------------------------------------------------------------------
# builders and fixtures
# ---------------------------------------------------------------------------

def build_condensation(q, t, ratios, r=2.0, chi=None, geometry=None) -> SystemSpec:
    """Condensation system: upper-left rows q, upper-right q0*t, lower-right t.

    ``q = (q0, q1, .., qN)`` and ``t = (t1, .., tN)`` are positive
    probability vectors; ``ratios`` gives one contraction ratio per base
    letter (the maps of row i all share the ratio of the i-th similitude).
    The projected measure agrees with the inhomogeneous self-similar
    measure driven by (q, t).
    """
    q = [_to_fraction(x) for x in q]
    t = [_to_fraction(x) for x in t]
    n = len(t)
    if len(q) != n + 1:
        raise SpecError("q must have length N+1 (q0 included)")
    if any(x <= 0 for x in q) or any(x <= 0 for x in t):
        raise SpecError("q and t must be strictly positive")
    if sum(q) != 1 or sum(t) != 1:
        raise SpecError("q (with q0) and t must each sum to 1")
    if len(ratios) != n:
        raise SpecError("need one ratio per base letter")
    q0, qs = q[0], q[1:]
    P = []
    for _ in range(n):
        P.append(list(qs) + [q0 * tj for tj in t])
    for _ in range(n):
        P.append([Fraction(0)] * n + list(t))
    chi = chi if chi is not None else list(qs) + [q0 * tj for tj in t]
    cell_ratios = {(i, j): ratios[i - 1]
                   for i in range(1, n + 1) for j in range(1, n + 1)}
    return SystemSpec(n, P, chi, cell_ratios, r=r, geometry=geometry)


_F = Fraction

_EG2_P1 = [
    ["1/3", "1/3", 0, "1/3", 0, 0],
    [0, "1/3", "1/3", 0, 0, "1/3"],
    ["1/3", 0, "2/3", 0, 0, 0],
    [0, 0, 0, "1/3", 0, "2/3"],
    [0, 0, 0, 0, "1/3", "2/3"],
    [0, 0, 0, "1/3", "1/3", "1/3"],
]

_EG2_P2 = [
    ["1/3", "1/3", 0, "1/3", 0, 0],
    [0, "1/3", "1/3", 0, 0, "1/3"],
    ["1/3", 0, "2/3", 0, 0, 0],
    [0, 0, 0, "1/3", 0, "2/3"],
    ["1/3", 0, 0, 0, "1/3", "1/3"],
    [0, 0, 0, "1/3", "1/3", "1/3"],
]

_EG3_P = [
    ["1/6", "1/3", 0, "1/6", "1/3", 0],
    [0, "1/6", "1/3", 0, "1/6", "1/3"],
    ["1/3", 0, "1/6", "1/3", 0, "1/6"],
    ["1/3", "1/6", 0, "1/3", "1/6", 0],
    [0, "1/3", "1/6", 0, "1/3", "1/6"],
    ["1/3", 0, "1/6", "1/3", 0, "1/6"],
]

_EG3_CHI = ["1/6", "1/9", "1/6", "1/6", "2/9", "1/6"]

_EG5_P = [
    ["1/6", "1/6", 0, "1/3", "1/3", 0],
    [0, "1/6", "1/6", 0, "1/3", "1/3"],
    ["1/6", 0, "1/6", "1/3", 0, "1/3"],
    ["1/4", "1/4", 0, "1/8", "3/8", 0],
    [0, "1/4", "1/4", 0, "1/4", "1/4"],
    ["1/4", 0, "1/4", "1/4", 0, "1/4"],
]

FIXTURE_NAMES = ("eg1-default", "eg2-P1", "eg2-P2", "eg3", "eg5")


def _uniform_cell_ratios(P, n, ratio):
    ratios = {}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            lifted = [(i, j), (i, j + n), (i + n, j), (i + n, j + n)]
            if any(_to_fraction(P[a - 1][b - 1]) > 0 for (a, b) in lifted):
                ratios[(i, j)] = ratio
    return ratios


def load_fixture(name: str, ratio: float = 0.25, r: float = 2.0,
                 chi=None, with_geometry: bool = True) -> SystemSpec:
    """Exact rational fixtures for the worked examples.

    The examples fix P (and mostly chi) but leave the geometry open, so
    every fixture takes one uniform contraction ratio (default 1/4,
    small enough for the default interval layout).  ``eg5`` has no chi
    of its own; the default is uniform, which realizes chi_i = chi_{i+}.
    """
    if name == "eg1-default":
        spec = build_condensation(
            q=["1/3", "1/3", "1/3"], t=["1/2", "1/2"],
            ratios=[ratio, ratio], r=r)
        if chi is not None:
            spec = SystemSpec(spec.n_base, spec.P, chi, spec.ratios, r)
    elif name in ("eg2-P1", "eg2-P2"):
        P = _EG2_P1 if name == "eg2-P1" else _EG2_P2
        chi = chi if chi is not None else [_F(1, 6)] * 6
        spec = SystemSpec(3, P, chi, _uniform_cell_ratios(P, 3, ratio), r)
    elif name == "eg3":
        chi = chi if chi is not None else _EG3_CHI
        spec = SystemSpec(3, _EG3_P, chi, _uniform_cell_ratios(_EG3_P, 3, ratio), r)
    elif name == "eg5":
        chi = chi if chi is not None else [_F(1, 6)] * 6
        spec = SystemSpec(3, _EG5_P, chi, _uniform_cell_ratios(_EG5_P, 3, ratio), r)
    else:
        raise SpecError(f"unknown fixture {name!r}; choose from {FIXTURE_NAMES}")
    if with_geometry:
        spec = spec.with_default_geometry()
    return spec


# ---------------------------------------------------------------------------
# JSON configuration
# ---------------------------------------------------------------------------

_TOP_FIELDS = {"N", "P", "chi", "ratios", "geometry", "r"}
_GEO_FIELDS = {"q", "seeds", "maps"}
_MAP_FIELDS = {"ratio", "translate", "reflect"}


def _geometry_from_json(doc) -> geo.GeometrySpec:
    unknown = set(doc) - _GEO_FIELDS
    if unknown:
        raise SpecError(f"unknown geometry fields: {sorted(unknown)}")
    seeds = tuple((tuple(float(x) for x in lo), tuple(float(x) for x in hi))
                  for lo, hi in doc["seeds"])
    maps = {}
    for key, m in doc["maps"].items():
        unknown = set(m) - _MAP_FIELDS
        if unknown:
            raise SpecError(f"unknown map fields: {sorted(unknown)}")
        i, j = (int(x) for x in key.split(","))
        maps[(i, j)] = geo.Similitude(float(m["ratio"]),
                                      tuple(float(x) for x in m["translate"]),
                                      bool(m.get("reflect", False)))
    return geo.GeometrySpec(int(doc["q"]), seeds, maps)


def load_config(path) -> SystemSpec:
    """Load a SystemSpec from a JSON document; unknown fields are rejected."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    unknown = set(doc) - _TOP_FIELDS
    if unknown:
        raise SpecError(f"unknown config fields: {sorted(unknown)}")
    for field_name in ("N", "P", "chi", "ratios"):
        if field_name not in doc:
            raise SpecError(f"config missing required field {field_name!r}")
    ratios = {}
    for key, s in doc["ratios"].items():
        i, j = (int(x) for x in key.split(","))
        ratios[(i, j)] = float(s)
    geom = None
    if doc.get("geometry") is not None:
        geom = _geometry_from_json(doc["geometry"])
    return SystemSpec(doc["N"], doc["P"], doc["chi"], ratios,
                      r=float(doc.get("r", 2.0)), geometry=geom)
