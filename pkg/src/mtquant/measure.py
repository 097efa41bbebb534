"""Cylinder measures, energies, reducibility and auxiliary measures.

Everything here evaluates the projected measure mu and the energy
E_r(sigma) = mu(J_sigma) * s_sigma^r.  Two routes are kept deliberately
independent: explicit enumeration of the lift set of a word, and the
chained 2x2 transfer products whose row vector tracks how much mass
sits on the lower/upper lift of the running letter.  The transfer form
is exact for every admissible word because lift admissibility is a
per-edge condition.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import symbolic as sym
from .model import SystemSpec, validate


class RegimeMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# transfer products
# ---------------------------------------------------------------------------

def transfer_matrix(spec: SystemSpec, a: int, b: int, scaled: bool = False):
    """2x2 matrix of the lifted edge probabilities of base cell (a, b)."""
    i, j = a - 1, b - 1
    m = np.array([[spec.T[0, 0, i, j], spec.T[0, 1, i, j]],
                  [spec.T[1, 0, i, j], spec.T[1, 1, i, j]]])
    if scaled:
        m = m * spec.ratio_t[i, j] ** spec.r
    return m


def scaled_tables(spec: SystemSpec):
    """The four N x N lookup tables with the cell ratio^r folded in."""
    f = spec.ratio_t ** spec.r
    return (spec.T[0, 0] * f, spec.T[0, 1] * f,
            spec.T[1, 0] * f, spec.T[1, 1] * f)


def chain(spec: SystemSpec, word, scaled: bool = False):
    """Row vector (lower, upper) after threading ``word`` through the
    transfer matrices, with a separate log scale to survive long words.

    Returns ``(v0, v1, log_scale)``; the actual masses are
    ``(v0, v1) * exp(log_scale)`` and their sum is mu (unscaled) or the
    energy E_r (scaled).
    """
    i0 = word[0] - 1
    v = np.array([spec.chi_f[i0], spec.chi_f[i0 + spec.n_base]])
    log_scale = 0.0
    for h in range(len(word) - 1):
        v = v @ transfer_matrix(spec, word[h], word[h + 1], scaled)
        m = v[0] + v[1]
        if m <= 0.0:
            raise ValueError(f"word {tuple(word)} has no admissible lift")
        v /= m
        log_scale += math.log(m)
    return float(v[0]), float(v[1]), log_scale


@dataclass(frozen=True)
class CylinderValue:
    word: tuple
    mu: float
    i1: float
    i2: float
    energy: float
    log_energy: float


def mu_cylinder(spec: SystemSpec, sigma, method: str = "transfer") -> CylinderValue:
    """Evaluate mu(J_sigma) plus its lower/upper split and the energy.

    ``method="enumerate"`` sums chi * p over the explicit lift set;
    ``method="transfer"`` chains the 2x2 edge matrices.  Both agree to
    machine precision and an invalid word raises either way.
    """
    sigma = tuple(sigma)
    if method == "enumerate":
        lifts = sym.gamma(sigma, spec.graph)
        if not lifts:
            raise ValueError(f"{sigma} is not a valid word")
        n = spec.n_base
        i1 = i2 = 0.0
        for w in lifts:
            v = spec.chi_f[w[0] - 1]
            for h in range(len(w) - 1):
                v *= spec.P_f[w[h] - 1, w[h + 1] - 1]
            if w[-1] <= n:
                i1 += v
            else:
                i2 += v
        mu = i1 + i2
        s_log = _log_s(spec, sigma)
        e = mu * math.exp(spec.r * s_log)
        return CylinderValue(sigma, mu, i1, i2, e,
                             math.log(mu) + spec.r * s_log)
    if method != "transfer":
        raise ValueError(f"unknown method {method!r}")
    v0, v1, ls = chain(spec, sigma, scaled=False)
    mu = (v0 + v1) * math.exp(ls)
    s_log = _log_s(spec, sigma)
    log_e = math.log(v0 + v1) + ls + spec.r * s_log
    return CylinderValue(sigma, mu, v0 * math.exp(ls), v1 * math.exp(ls),
                         math.exp(log_e), log_e)


def _log_s(spec: SystemSpec, sigma) -> float:
    out = 0.0
    for h in range(len(sigma) - 1):
        out += math.log(spec.ratio_t[sigma[h] - 1, sigma[h + 1] - 1])
    return out


def nu_cylinder(spec: SystemSpec, word, log: bool = False):
    """nu of a lifted cylinder: chi_{w1} * prod p along the word."""
    word = tuple(word)
    if not sym.is_admissible(word, spec.graph):
        raise ValueError(f"{word} is not admissible")
    out = math.log(spec.chi_f[word[0] - 1])
    for h in range(len(word) - 1):
        out += math.log(spec.P_f[word[h] - 1, word[h + 1] - 1])
    return out if log else math.exp(out)


def nu_cylinder_exact(spec: SystemSpec, word) -> Fraction:
    word = tuple(word)
    if not sym.is_admissible(word, spec.graph):
        raise ValueError(f"{word} is not admissible")
    out = spec.chi_of(word[0])
    for h in range(len(word) - 1):
        out *= spec.p(word[h], word[h + 1])
    return out


def mu_cylinder_exact(spec: SystemSpec, sigma):
    """Exact rational (mu, I1, I2) via the lift enumeration."""
    sigma = tuple(sigma)
    lifts = sym.gamma(sigma, spec.graph)
    if not lifts:
        raise ValueError(f"{sigma} is not a valid word")
    n = spec.n_base
    i1 = Fraction(0)
    i2 = Fraction(0)
    for w in lifts:
        v = nu_cylinder_exact(spec, w)
        if w[-1] <= n:
            i1 += v
        else:
            i2 += v
    return i1 + i2, i1, i2


def energy(spec: SystemSpec, sigma) -> float:
    return mu_cylinder(spec, sigma).energy


def log_energy(spec: SystemSpec, sigma) -> float:
    return mu_cylinder(spec, sigma).log_energy


def write_cylinder_csv(spec: SystemSpec, words, path, header_lines=()):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["word", "mu", "i1", "i2", "energy", "log_energy"])
        for sigma in words:
            cv = mu_cylinder(spec, sigma)
            w.writerow([sym.word_str(cv.word), repr(cv.mu), repr(cv.i1),
                        repr(cv.i2), repr(cv.energy), repr(cv.log_energy)])


# ---------------------------------------------------------------------------
# sandwich / quasi-multiplicativity constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SandwichConstants:
    """The explicit constants of the one-step energy sandwich and the
    quasi-multiplicative junction bounds.

    c1 = min(p_min, 2 chi_min) s_min^r       (lower one-step factor)
    c2 = max(p_max, zeta_max, d_max) s_max^r (upper one-step factor)
    C1 = p_min s_min^r / chi_max             (lower junction factor)
    C2 = p_max s_max^r / chi_min             (upper junction factor)
    """

    n_base: int
    r: float
    p_min: float
    p_max: float
    s_min: float
    s_max: float
    chi_min: float
    chi_max: float
    zeta_max: float
    d_max: float

    @property
    def c1(self) -> float:
        return min(self.p_min, 2.0 * self.chi_min) * self.s_min ** self.r

    @property
    def c2(self) -> float:
        return max(self.p_max, self.zeta_max, self.d_max) * self.s_max ** self.r

    @property
    def junction_lo(self) -> float:
        return self.p_min * self.s_min ** self.r / self.chi_max

    @property
    def junction_hi(self) -> float:
        return self.p_max * self.s_max ** self.r / self.chi_min

    def h(self, s: float) -> float:
        n = self.n_base
        return ((n * self.c2 ** s) ** (-n) * self.junction_hi ** (-s)
                * self.c1 ** (n * s) * self.junction_lo ** s)

    def g1(self, s: float) -> float:
        return self.h(s) * self.junction_lo ** s / self.n_base

    def g2(self, s: float) -> float:
        return self.junction_hi ** s

    def b(self, s0: float) -> float:
        return self.g2(s0) / self.g1(s0)


def sandwich_constants(spec: SystemSpec) -> SandwichConstants:
    pos = spec.P_f[spec.P_f > 0]
    n = spec.n_base
    zeta = max(spec.chi_f[i] + spec.chi_f[i + n] for i in range(n))
    d_max = 0.0
    for (i, j) in spec.s2_cells:
        lo = spec.P_f[i - 1, j - 1] + spec.P_f[i - 1, j - 1 + n]
        hi = spec.P_f[i - 1 + n, j - 1] + spec.P_f[i - 1 + n, j - 1 + n]
        d_max = max(d_max, lo, hi)
    ratios = np.array(list(spec.ratios.values()))
    return SandwichConstants(
        n_base=n, r=spec.r,
        p_min=float(pos.min()), p_max=float(pos.max()),
        s_min=float(ratios.min()), s_max=float(ratios.max()),
        chi_min=float(spec.chi_f.min()), chi_max=float(spec.chi_f.max()),
        zeta_max=float(zeta), d_max=float(d_max))


# ---------------------------------------------------------------------------
# surrogate kernels
# ---------------------------------------------------------------------------

def chitilde(spec: SystemSpec):
    """chi~_i = chi_i + chi_{i+}, exact."""
    n = spec.n_base
    return tuple(spec.chi[i] + spec.chi[i + n] for i in range(n))


def ptilde(spec: SystemSpec):
    """N x N reduced kernel p~_{i,j} = mu(J_ij) / mu(J_i), exact fractions."""
    n = spec.n_base
    ct = chitilde(spec)
    out = [[Fraction(0)] * n for _ in range(n)]
    for (i, j) in spec.s2_cells:
        num = (spec.chi_of(i) * (spec.p(i, j) + spec.p(i, j + n))
               + spec.chi_of(i + n) * (spec.p(i + n, j) + spec.p(i + n, j + n)))
        out[i - 1][j - 1] = num / ct[i - 1]
    return tuple(tuple(row) for row in out)


def phat(spec: SystemSpec, mode: str):
    """N x N collapsed kernel: row ("g1") or column ("g2") lift sums."""
    n = spec.n_base
    out = [[Fraction(0)] * n for _ in range(n)]
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if mode == "g1":
                out[i - 1][j - 1] = spec.p(i, j) + spec.p(i, j + n)
            elif mode == "g2":
                out[i - 1][j - 1] = spec.p(i, j) + spec.p(i + n, j)
            else:
                raise ValueError(f"unknown phat mode {mode!r}")
    return tuple(tuple(row) for row in out)


# ---------------------------------------------------------------------------
# reducibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducibilityVerdict:
    status: str                  # "REDUCIBLE" | "NOT_REDUCIBLE" | "UNKNOWN"
    reason: str = ""
    witness_word: tuple | None = None
    witness_letter: int | None = None
    delta: Fraction | float | None = None
    ptilde: tuple | None = None
    chitilde: tuple | None = None
    depth_searched: int = 0


def delta_sigma_j(spec: SystemSpec, sigma, j: int):
    """Delta_{sigma,j} = mu(J_{sigma*j}) - mu(J_sigma) p~_{i,j}, exact."""
    i = sigma[-1]
    mu_sj, _, _ = mu_cylinder_exact(spec, tuple(sigma) + (j,))
    mu_s, _, _ = mu_cylinder_exact(spec, sigma)
    return mu_sj - mu_s * ptilde(spec)[i - 1][j - 1]


def _row_condition(spec: SystemSpec, i: int) -> bool:
    """(a): p_{i,j} + p_{i,j+} = p_{i+,j} + p_{i+,j+} for every base j."""
    n = spec.n_base
    return all(spec.p(i, j) + spec.p(i, j + n)
               == spec.p(i + n, j) + spec.p(i + n, j + n)
               for j in range(1, n + 1))


def _chain_exact(spec: SystemSpec, sigma):
    """Exact (I1, I2) via the rational transfer chain, O(len) per word."""
    n = spec.n_base
    i1, i2 = spec.chi_of(sigma[0]), spec.chi_of(sigma[0] + n)
    for h in range(len(sigma) - 1):
        a, b = sigma[h], sigma[h + 1]
        i1, i2 = (i1 * spec.p(a, b) + i2 * spec.p(a + n, b),
                  i1 * spec.p(a, b + n) + i2 * spec.p(a + n, b + n))
    return i1, i2


def _imbalance_search(spec: SystemSpec, i: int, depth_max: int,
                      node_cap: int = 2 * 10**6):
    """Breadth-first over words ending in i for chi_{i+} I1 != chi_i I2.

    The exact (I1, I2) pair rides along in the queue, so each node costs
    four rational multiplications; the walk stops at ``depth_max`` or
    after ``node_cap`` nodes, whichever comes first.
    """
    n = spec.n_base
    ci, cip = spec.chi_of(i), spec.chi_of(i + n)
    queue = deque(((w,), spec.chi_of(w), spec.chi_of(w + n))
                  for w in range(1, n + 1))
    seen = 0
    while queue:
        sigma, i1, i2 = queue.popleft()
        seen += 1
        if seen > node_cap:
            return None
        if (i1 > 0 or i2 > 0) and sigma[-1] == i and cip * i1 != ci * i2:
            return sigma
        if len(sigma) < depth_max:
            a = sigma[-1]
            for j in range(1, n + 1):
                w1 = i1 * spec.p(a, j) + i2 * spec.p(a + n, j)
                w2 = i1 * spec.p(a, j + n) + i2 * spec.p(a + n, j + n)
                if w1 > 0 or w2 > 0:
                    queue.append((sigma + (j,), w1, w2))
    return None


def classify_reducibility(spec: SystemSpec, depth_max: int = 12) -> ReducibilityVerdict:
    """Decide whether mu collapses to an N x N Markov-type measure.

    Case I systems are decided by the finite identity
    p_{i,j} + p_{i,j+} = p_{i+,j+} over the realized cells.  Irreducible
    systems are decided exactly when the chi-pair / column-sum
    certificates apply; otherwise each row failing the row-sum identity
    is searched breadth-first for a lift-imbalance witness up to
    ``depth_max``, and an honest UNKNOWN is returned when none shows up.
    """
    rep = validate(spec)
    n = spec.n_base
    pt, ct = ptilde(spec), chitilde(spec)

    if rep.case == "I":
        bad_cell = next(
            ((i, j) for (i, j) in spec.s2_cells
             if spec.p(i, j) + spec.p(i, j + n) != spec.p(i + n, j + n)),
            None)
        if bad_cell is None:
            return ReducibilityVerdict(
                "REDUCIBLE", reason="case-I identity holds on every cell",
                ptilde=pt, chitilde=ct)
        i0, j0 = bad_cell
        # Witness word exists because the lower-block mass decays strictly
        # faster; widen the search if the default depth misses it.
        for budget in (depth_max, depth_max + 6, depth_max + 12):
            sigma = _imbalance_search(spec, i0, budget)
            if sigma is not None:
                return ReducibilityVerdict(
                    "NOT_REDUCIBLE",
                    reason=f"cell {bad_cell} breaks the case-I identity",
                    witness_word=sigma, witness_letter=j0,
                    delta=delta_sigma_j(spec, sigma, j0),
                    depth_searched=budget)
        return ReducibilityVerdict("UNKNOWN", reason="no witness found",
                                   depth_searched=depth_max + 12)

    if not (rep.a2 and rep.a5):
        raise RegimeMismatch(
            "reducibility classification needs (A2)+(A5) or (A1)-(A3)")

    rows_ok = {i: _row_condition(spec, i) for i in range(1, n + 1)}
    if all(rows_ok.values()):
        return ReducibilityVerdict(
            "REDUCIBLE", reason="row lift sums match on every row (g1 form)",
            ptilde=pt, chitilde=ct)

    # column-sum certificate: chi-pairs equal plus column identity everywhere
    if rep.b1 and rep.g2:
        return ReducibilityVerdict(
            "REDUCIBLE",
            reason="chi pairs equal and column lift sums match (claim-1 induction)",
            ptilde=pt, chitilde=ct)

    depth_used = depth_max
    for i in range(1, n + 1):
        if rows_ok[i]:
            continue
        j0 = next(j for j in range(1, n + 1)
                  if spec.p(i, j) + spec.p(i, j + n)
                  != spec.p(i + n, j) + spec.p(i + n, j + n)
                  and (i, j) in spec.s2_cells)
        sigma = _imbalance_search(spec, i, depth_max)
        if sigma is not None:
            return ReducibilityVerdict(
                "NOT_REDUCIBLE",
                reason=f"row {i} fails the row identity and word "
                       f"{sigma} carries a lift imbalance",
                witness_word=sigma, witness_letter=j0,
                delta=delta_sigma_j(spec, sigma, j0),
                depth_searched=depth_max)
    return ReducibilityVerdict("UNKNOWN",
                               reason="every failing row kept the lift "
                                      "balance to the searched depth",
                               depth_searched=depth_used)


# ---------------------------------------------------------------------------
# cycle rates and the equivalence probe
# ---------------------------------------------------------------------------

def cycle_rate(spec: SystemSpec, cycle) -> float:
    """Spectral radius of the transfer product around one cycle period.

    Governs the decay rate of mu on the cylinders (cycle repeated n
    times); the closing edge back to the first letter is included.
    """
    from .spectral import spectral_radius
    cycle = tuple(cycle)
    edges = [(cycle[h], cycle[h + 1]) for h in range(len(cycle) - 1)]
    edges.append((cycle[-1], cycle[0]))
    m = np.eye(2)
    for (a, b) in edges:
        if (a, b) not in spec.s2_cells:
            raise ValueError(f"cycle edge {(a, b)} is not a realized cell")
        m = m @ transfer_matrix(spec, a, b, scaled=False)
    return spectral_radius(m)


def simple_cycles(spec: SystemSpec, max_len: int):
    """All simple cycles of the base-cell graph up to the given length,
    rooted at their smallest vertex."""
    n = spec.n_base
    adj = {i: sorted(j for (x, j) in spec.s2_cells if x == i)
           for i in range(1, n + 1)}
    out = []

    def walk(root, path):
        cur = path[-1]
        for j in adj.get(cur, ()):
            if j == root:
                out.append(tuple(path))
            elif j > root and j not in path and len(path) < max_len:
                walk(root, path + [j])

    for root in range(1, n + 1):
        walk(root, [root])
    return [c for c in out if len(c) <= max_len]


@dataclass(frozen=True)
class CycleRow:
    cycle: tuple
    mu_rate: float
    surrogate_rate: float | None
    mix_coeffs: tuple | None   # (vertex, lo, hi) endpoints when zeta-dependent
    required_mix: float | None


@dataclass(frozen=True)
class EquivalenceReport:
    surrogate: str
    rows: tuple
    verdict: str        # "NON-EQUIVALENT" | "EQUIVALENT-CONSISTENT" | "INCONCLUSIVE"
    conflict: tuple | None = None


def equivalence_probe(spec: SystemSpec, surrogate: str = "ptilde",
                      cycle_max_len: int = 3) -> EquivalenceReport:
    """Compare per-cycle decay of mu against a surrogate Markov kernel.

    For the ``ptilde`` surrogate the kernel entries depend on the unknown
    mixing weights zeta_i = chi_i / (chi_i + chi_{i+}); a cycle whose
    product has exactly one zeta-dependent factor pins that zeta to a
    linear solution, and two cycles pinning the same vertex to different
    values (or a value outside (0,1)) certify non-equivalence.  For the
    ``phat-g1`` / ``phat-g2`` surrogates the product is a constant and the
    row reports the plain rate ratio.
    """
    n = spec.n_base
    rows = []
    required = {}
    conflict = None
    verdict = "EQUIVALENT-CONSISTENT"
    if surrogate in ("phat-g1", "phat-g2"):
        kernel = [[float(x) for x in row]
                  for row in phat(spec, surrogate.split("-")[1])]
    elif surrogate != "ptilde":
        raise ValueError(f"unknown surrogate {surrogate!r}")

    for cycle in simple_cycles(spec, cycle_max_len):
        edges = [(cycle[h], cycle[h + 1]) for h in range(len(cycle) - 1)]
        edges.append((cycle[-1], cycle[0]))
        rate = cycle_rate(spec, cycle)
        if surrogate != "ptilde":
            prod = 1.0
            for (a, b) in edges:
                prod *= kernel[a - 1][b - 1]
            rows.append(CycleRow(cycle, rate, prod, None, None))
            if not math.isclose(rate, prod, rel_tol=1e-9):
                verdict = "INCONCLUSIVE"
            continue
        # ptilde: factor for edge (a, b) is zeta_a * lo + (1 - zeta_a) * hi
        const = 1.0
        dep = []
        for (a, b) in edges:
            lo = spec.P_f[a - 1, b - 1] + spec.P_f[a - 1, b - 1 + n]
            hi = spec.P_f[a - 1 + n, b - 1] + spec.P_f[a - 1 + n, b - 1 + n]
            if math.isclose(lo, hi, rel_tol=0, abs_tol=1e-15):
                const *= lo
            else:
                dep.append((a, lo, hi))
        if len(dep) != 1:
            rows.append(CycleRow(cycle, rate, None,
                                 tuple(dep) if dep else (), None))
            continue
        a, lo, hi = dep[0]
        # zeta_a * lo + (1 - zeta_a) * hi = rate / const
        target = rate / const
        zeta = (target - hi) / (lo - hi)
        rows.append(CycleRow(cycle, rate, None, ((a, lo, hi),), zeta))
        if not 0.0 < zeta < 1.0:
            verdict = "NON-EQUIVALENT"
            conflict = (cycle,)
        elif a in required:
            prev_cycle, prev_zeta = required[a]
            if abs(prev_zeta - zeta) > 1e-9:
                verdict = "NON-EQUIVALENT"
                conflict = (prev_cycle, cycle)
            # keep the earlier pin
        else:
            required[a] = (cycle, zeta)
    return EquivalenceReport(surrogate, tuple(rows), verdict, conflict)


# ---------------------------------------------------------------------------
# auxiliary measures
# ---------------------------------------------------------------------------

def block_edges(spec: SystemSpec, block: int):
    """Base-alphabet edge set of the lower (1) or upper (2) diagonal block."""
    n = spec.n_base
    off = 0 if block == 1 else n
    return {(i, j) for i in range(1, n + 1) for j in range(1, n + 1)
            if spec.P_f[i - 1 + off, j - 1 + off] > 0}


def check_maximal_antichain(words, edges, n_base: int, root=None) -> bool:
    """True when ``words`` is a maximal anti-chain of the block word tree.

    The tree branches along ``edges``; maximality means every long
    enough admissible path hits exactly one member.
    """
    members = set(map(tuple, words))
    for w in members:
        for v in members:
            if w != v and len(w) <= len(v) and v[:len(w)] == w:
                return False  # comparable pair
    horizon = max(len(w) for w in members) + 1
    roots = [(root,)] if root is not None else [(i,) for i in range(1, n_base + 1)]
    stack = roots
    while stack:
        w = stack.pop()
        if w in members:
            continue
        if len(w) >= horizon:
            return False  # escaped past every member
        nxt = [j for j in range(1, n_base + 1) if (w[-1], j) in edges]
        if not nxt:
            return False
        for j in nxt:
            stack.append(w + (j,))
    return True


def nu1_antichain_sum(spec: SystemSpec, block: int, s: float, antichain,
                      root=None) -> float:
    """Sum of the block's spectral auxiliary measure over an anti-chain.

    nu1([sigma]) = rho^{-|sigma|} (p_sigma s_sigma^r)^{s/(s+r)} xi_{end};
    over a maximal anti-chain the sum telescopes to rho^{-1} (or
    rho^{-1} xi_root when all words start at a fixed letter).
    """
    from .spectral import block_param_matrix, perron_vectors
    edges = block_edges(spec, block)
    if not check_maximal_antichain(antichain, edges, spec.n_base, root):
        raise ValueError("anti-chain is not maximal (coverage test failed)")
    sp = s / (s + spec.r)
    mat = block_param_matrix(spec, block, sp)
    xi, _, rho = perron_vectors(mat)
    n = spec.n_base
    off = 0 if block == 1 else n
    total = 0.0
    for w in antichain:
        lp = 0.0
        for h in range(len(w) - 1):
            p = spec.P_f[w[h] - 1 + off, w[h + 1] - 1 + off]
            lp += math.log(p) + spec.r * math.log(spec.ratio_t[w[h] - 1, w[h + 1] - 1])
        total += math.exp(-len(w) * math.log(rho) + sp * lp) * xi[w[-1] - 1]
    return total


def lambda_m(spec: SystemSpec, m: int, tr: float, max_len: int | None = None):
    """Finite-stage auxiliary measure: lambda_m(J_sigma) for |sigma| <= max_len.

    lambda_m puts mass E_r(sigma)^{s0} / T_m(s0) (s0 = tr/(tr+r)) on each
    length-m word and is evaluated on shorter cylinders by summing over
    admissible extensions.  Needs the strongly connected regime so that
    extension admissibility only depends on the junction letter.
    """
    rep = validate(spec)
    if rep.case != "II":
        raise RegimeMismatch("lambda_m needs the irreducible (A2)(A4)(A5) regime")
    if max_len is None:
        max_len = m - 1
    if m <= max_len:
        raise ValueError("need m > max_len")
    s0 = tr / (tr + spec.r)
    acc = {}
    total = 0.0
    t00, t01, t10, t11 = scaled_tables(spec)
    n = spec.n_base
    # iterative DFS over S_m carrying the scaled transfer state
    stack = [((i,), spec.chi_f[i - 1], spec.chi_f[i - 1 + n], 0.0)
             for i in range(1, n + 1)]
    while stack:
        word, v0, v1, ls = stack.pop()
        if len(word) == m:
            w = math.exp(s0 * (math.log(v0 + v1) + ls))
            total += w
            for h in range(1, max_len + 1):
                key = word[:h]
                acc[key] = acc.get(key, 0.0) + w
            continue
        a = word[-1] - 1
        sc = v0 + v1
        lsn = ls + math.log(sc)
        v0n, v1n = v0 / sc, v1 / sc
        for j in range(n):
            w0 = v0n * t00[a, j] + v1n * t10[a, j]
            w1 = v0n * t01[a, j] + v1n * t11[a, j]
            if w0 > 0.0 or w1 > 0.0:
                stack.append((word + (j + 1,), w0, w1, lsn))
    return {k: v / total for k, v in acc.items()}
