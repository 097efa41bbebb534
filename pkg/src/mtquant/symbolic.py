"""Words over the base and doubled alphabets, admissibility, lifts.

Conventions used throughout the package:

* letters are 1-based; the base alphabet is ``{1..N}``, the doubled
  alphabet is ``{1..2N}`` where letter ``i + N`` is the "upper" lift of
  ``i`` (written ``i+`` in reports);
* words are plain tuples of ints;
* a *lifted* word is admissible when every consecutive pair is an edge
  of the transition graph; a *projected* word ``sigma`` is valid at
  length ``n`` when it has at least one admissible lift
  (``gamma(sigma) != set()``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence


class EnumerationCapExceeded(RuntimeError):
    """Raised when a word enumeration would exceed its configured cap."""


DEFAULT_WORD_CAP = 10**7


@dataclass(frozen=True)
class TransitionGraph:
    """Directed graph on the doubled alphabet {1..2N}, one edge per pair."""

    n_base: int
    edges: frozenset

    def __post_init__(self):
        m = 2 * self.n_base
        for (a, b) in self.edges:
            if not (1 <= a <= m and 1 <= b <= m):
                raise ValueError(f"edge {(a, b)} outside alphabet 1..{m}")
        missing = [a for a in range(1, m + 1)
                   if not any(e[0] == a for e in self.edges)]
        if missing:
            raise ValueError(f"vertices without outgoing edges: {missing}")

    @property
    def n_doubled(self) -> int:
        return 2 * self.n_base

    def has_edge(self, a: int, b: int) -> bool:
        return (a, b) in self.edges

    def successors(self, a: int) -> list:
        return sorted(b for (x, b) in self.edges if x == a)


def lifts_of(letter: int, n_base: int) -> tuple:
    """The two candidate lifts (lower, upper) of a base letter."""
    return (letter, letter + n_base)


def project(word: Sequence[int], n_base: int) -> tuple:
    """Collapse a lifted word onto the base alphabet (i and i+N both map to i)."""
    return tuple((l - 1) % n_base + 1 for l in word)


def is_admissible(word: Sequence[int], g: TransitionGraph) -> bool:
    """True when every consecutive pair of the lifted word is a graph edge."""
    return all(g.has_edge(word[i], word[i + 1]) for i in range(len(word) - 1))


def gamma(sigma: Sequence[int], g: TransitionGraph) -> list:
    """All admissible lifts of the base word ``sigma``.

    Depth-first over the per-position lower/upper choices, lower branch
    first, which makes the output lexicographic in the lift mask.  The
    empty list is a valid answer and means ``sigma`` is not a valid word
    (it is not in S_n).
    """
    n = g.n_base
    for l in sigma:
        if not 1 <= l <= n:
            raise ValueError(f"letter {l} outside base alphabet 1..{n}")
    out = []
    first = sigma[0]
    stack = [(first,), (first + n,)]
    # DFS, pushing the upper branch first so the lower one pops first.
    work = [stack[1], stack[0]]
    while work:
        prefix = work.pop()
        k = len(prefix)
        if k == len(sigma):
            out.append(prefix)
            continue
        nxt = sigma[k]
        for cand in (nxt + n, nxt):
            if g.has_edge(prefix[-1], cand):
                work.append(prefix + (cand,))
    return out


def lift_endpoints(sigma: Sequence[int], g: TransitionGraph) -> tuple:
    """Reachable final lifts of ``sigma``: subset of (sigma_n, sigma_n + N).

    This is the 2-bit DP state behind S_n membership: empty means
    ``sigma`` has no admissible lift.
    """
    n = g.n_base
    state = lifts_of(sigma[0], n)  # G_1 = Omega, both lifts available
    for l in sigma[1:]:
        lo, hi = lifts_of(l, n)
        new = tuple(v for v in (lo, hi)
                    if any(g.has_edge(u, v) for u in state))
        if not new:
            return ()
        state = new
    return state


def in_Sn(sigma: Sequence[int], g: TransitionGraph) -> bool:
    return bool(lift_endpoints(sigma, g))


def children(sigma: Sequence[int], g: TransitionGraph) -> list:
    """Letters j such that sigma * j stays a valid base word."""
    state = lift_endpoints(sigma, g)
    if not state:
        raise ValueError(f"{sigma} is not a valid word (empty lift set)")
    n = g.n_base
    out = []
    for j in range(1, n + 1):
        lo, hi = lifts_of(j, n)
        if any(g.has_edge(u, v) for u in state for v in (lo, hi)):
            out.append(j)
    return out


def iter_Sn(g: TransitionGraph, n: int, cap: int = DEFAULT_WORD_CAP) -> Iterator[tuple]:
    """Yield S_n in lexicographic order via DFS on the endpoint-state DP."""
    if n < 1:
        raise ValueError("word length must be >= 1")
    count = 0
    base = g.n_base
    # stack entries: (word, endpoint state)
    stack = [((i,), lifts_of(i, base)) for i in range(base, 0, -1)]
    while stack:
        word, state = stack.pop()
        if len(word) == n:
            count += 1
            if count > cap:
                raise EnumerationCapExceeded(
                    f"|S_{n}| exceeds cap {cap}; reduce n or raise the cap")
            yield word
            continue
        for j in range(base, 0, -1):
            lo, hi = lifts_of(j, base)
            new = tuple(v for v in (lo, hi)
                        if any(g.has_edge(u, v) for u in state))
            if new:
                stack.append((word + (j,), new))


def enumerate_Sn(g: TransitionGraph, n: int, cap: int = DEFAULT_WORD_CAP) -> list:
    """All valid base words of length n (the set S_n), lexicographic."""
    return list(iter_Sn(g, n, cap))


def iter_Gn(g: TransitionGraph, n: int, cap: int = DEFAULT_WORD_CAP) -> Iterator[tuple]:
    """Yield G_n, all admissible lifted words of length n."""
    if n < 1:
        raise ValueError("word length must be >= 1")
    count = 0
    stack = [(a,) for a in range(g.n_doubled, 0, -1)]
    while stack:
        word = stack.pop()
        if len(word) == n:
            count += 1
            if count > cap:
                raise EnumerationCapExceeded(
                    f"|G_{n}| exceeds cap {cap}; reduce n or raise the cap")
            yield word
            continue
        for b in range(g.n_doubled, 0, -1):
            if g.has_edge(word[-1], b):
                stack.append(word + (b,))


@dataclass(frozen=True)
class OverlapCell:
    """Realized lifted pairs N_{i,j} ∩ G_2 for one base cell (i, j)."""

    pair: tuple
    members: frozenset

    @property
    def count(self) -> int:
        return len(self.members)


def overlap_cells(g: TransitionGraph) -> dict:
    """Map every base cell (i, j) to its realized lifted members."""
    n = g.n_base
    cells = {}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            candidates = [(i, j), (i, j + n), (i + n, j), (i + n, j + n)]
            members = frozenset(e for e in candidates if g.has_edge(*e))
            cells[(i, j)] = OverlapCell((i, j), members)
    return cells


def has_complete_overlaps(g: TransitionGraph) -> bool:
    return any(c.count >= 2 for c in overlap_cells(g).values())


def word_str(word: Iterable[int], n_base: int | None = None) -> str:
    """Render a word for reports; upper lifts print as 'i+'."""
    parts = []
    for l in word:
        if n_base is not None and l > n_base:
            parts.append(f"{l - n_base}+")
        else:
            parts.append(str(l))
    return "(" + ",".join(parts) + ")"
