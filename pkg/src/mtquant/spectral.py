"""Spectral radii, dimension roots, pressure function and its root.

The parametric matrices carry entries (weight * ratio^r)^s; their
spectral radii as functions of the dimension variable are strictly
decreasing, so every root is found by plain bisection.  The pressure
function only exists as a limit, which is why its root is always quoted
with the explicit Fekete bracket derived from the quasi-multiplicative
junction constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import measure as ms
from . import symbolic as sym
from .model import SystemSpec, validate


class NonConvergence(RuntimeError):
    pass


class BracketError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# parametric matrices
# ---------------------------------------------------------------------------

def _powered(weights: np.ndarray, ratios: np.ndarray, r: float, s: float):
    out = np.zeros_like(weights)
    mask = weights > 0
    out[mask] = (weights[mask] * ratios[mask] ** r) ** s
    return out


def block_param_matrix(spec: SystemSpec, block: int, s: float) -> np.ndarray:
    """A_block(s) for the four quadrant blocks (1..4), N x N."""
    u, v = {1: (0, 0), 2: (1, 1), 3: (0, 1), 4: (1, 0)}[block]
    return _powered(spec.T[u, v], spec.ratio_t, spec.r, s)


def param_matrix(spec: SystemSpec, kind: str, s: float) -> np.ndarray:
    """The 2N x 2N assembly A(s), the blocks A1..A4, or the collapsed B(s)."""
    if kind in ("A1", "A2", "A3", "A4"):
        return block_param_matrix(spec, int(kind[1]), s)
    if kind == "A":
        a1 = block_param_matrix(spec, 1, s)
        a2 = block_param_matrix(spec, 2, s)
        a3 = block_param_matrix(spec, 3, s)
        a4 = block_param_matrix(spec, 4, s)
        return np.block([[a1, a3], [a4, a2]])
    if kind in ("B-g1", "B-g2"):
        w = np.array([[float(x) for x in row]
                      for row in ms.phat(spec, kind.split("-")[1])])
        return _powered(w, spec.ratio_t, spec.r, s)
    raise ValueError(f"unknown matrix kind {kind!r}")


# ---------------------------------------------------------------------------
# spectral radius and Perron vectors
# ---------------------------------------------------------------------------

def _radius_2x2(m: np.ndarray) -> float:
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    disc = tr * tr - 4.0 * det
    if disc >= 0.0:
        root = math.sqrt(disc)
        return max(abs(tr + root), abs(tr - root)) / 2.0
    return math.sqrt(det)  # complex pair, |lambda| = sqrt(det)


def _strongly_connected_components(adj: np.ndarray):
    """Tarjan, iterative; returns components as lists of indices."""
    n = adj.shape[0]
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack = []
    comps = []
    counter = [0]
    for start in range(n):
        if index[start] != -1:
            continue
        work = [(start, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter[0]
                counter[0] += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for w in range(pi, n):
                if not adj[v, w]:
                    continue
                if index[w] == -1:
                    work[-1] = (v, w + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                pv = work[-1][0]
                low[pv] = min(low[pv], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def is_irreducible(m: np.ndarray) -> bool:
    adj = m > 0
    return len(_strongly_connected_components(adj)) == 1 and m.shape[0] >= 1


def _power_radius(m: np.ndarray, tol: float, max_iter: int):
    """Power iteration with a diagonal shift (kills periodicity)."""
    n = m.shape[0]
    if n == 1:
        return float(m[0, 0]), np.ones(1)
    shift = float(m.max())
    if shift == 0.0:
        return 0.0, np.ones(n) / n
    b = m + shift * np.eye(n)
    v = np.ones(n) / n
    lam = 0.0
    for _ in range(max_iter):
        w = b @ v
        nw = w.sum()
        w /= nw
        if abs(nw - lam) <= tol * max(1.0, abs(nw)):
            return float(nw - shift), w
        lam = nw
        v = w
    raise NonConvergence(
        f"power iteration did not reach tol {tol} in {max_iter} steps "
        f"(last eigenvalue estimates {lam}, {nw})")


def spectral_radius(m: np.ndarray, tol: float = 1e-14,
                    max_iter: int = 100_000) -> float:
    """Dominant eigenvalue of a nonnegative matrix.

    2x2 matrices use the closed form.  Reducible matrices are split into
    their strongly connected components first and the maximum of the
    component radii is returned, which keeps the answer exact for the
    block-triangular case-I assemblies.
    """
    m = np.asarray(m, dtype=float)
    if np.any(m < 0):
        raise ValueError("matrix must be nonnegative")
    if m.shape[0] == 2:
        return _radius_2x2(m)
    comps = _strongly_connected_components(m > 0)
    if len(comps) == 1:
        return _power_radius(m, tol, max_iter)[0]
    best = 0.0
    for comp in comps:
        sub = m[np.ix_(comp, comp)]
        if sub.shape[0] == 2:
            best = max(best, _radius_2x2(sub))
        else:
            best = max(best, _power_radius(sub, tol, max_iter)[0])
    return best


def perron_vectors(m: np.ndarray, tol: float = 1e-14,
                   max_iter: int = 200_000):
    """(right, left, radius) of an irreducible nonnegative matrix.

    Both vectors are positive and normalized to sum 1; the eigen
    residual is checked against 1e-10 before returning.
    """
    m = np.asarray(m, dtype=float)
    if not is_irreducible(m):
        raise ValueError("matrix is reducible; Perron vectors undefined")
    rho, right = _power_radius(m, tol, max_iter)
    _, left = _power_radius(m.T, tol, max_iter)
    right = right / right.sum()
    left = left / left.sum()
    res_r = np.max(np.abs(m @ right - rho * right))
    res_l = np.max(np.abs(m.T @ left - rho * left))
    if max(res_r, res_l) > 1e-10:
        raise NonConvergence(
            f"eigen residual {max(res_r, res_l):.2e} above 1e-10")
    return right, left, float(rho)


# ---------------------------------------------------------------------------
# dimension roots
# ---------------------------------------------------------------------------

def rho_of(spec: SystemSpec, kind: str, s_dim: float) -> float:
    """rho(s) = psi(s / (s + r)) for the requested matrix family."""
    return spectral_radius(param_matrix(spec, kind, s_dim / (s_dim + spec.r)))


def solve_dimension_root(spec: SystemSpec, kind: str,
                         tol: float = 1e-10) -> float:
    """Unique s > 0 with rho_kind(s) = 1, by bisection on [1e-9, s_hi]."""
    if kind.startswith("B"):
        rep = validate(spec)
        if not (rep.g1 or rep.g2):
            raise ms.RegimeMismatch("B(s) root needs the g1 or g2 regime")
    lo = 1e-9
    f_lo = rho_of(spec, kind, lo) - 1.0
    if f_lo <= 0.0:
        raise BracketError("rho(s) <= 1 already at s = 1e-9")
    hi = 1.0
    for _ in range(200):
        if rho_of(spec, kind, hi) < 1.0:
            break
        hi *= 2.0
    else:
        raise BracketError("could not bracket the dimension root")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if rho_of(spec, kind, mid) - 1.0 > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# energy levels and the pressure function
# ---------------------------------------------------------------------------

class EnergyLevels:
    """log E_r(sigma) for every valid word, grouped by length.

    Built once by a vectorized level-wise expansion; T_n(s) evaluations
    are then plain exponential sums, so the pressure root bisection pays
    the tree walk only once.
    """

    def __init__(self, spec: SystemSpec, n_max: int,
                 max_words: int = sym.DEFAULT_WORD_CAP):
        self.spec = spec
        self.n_max = n_max
        t00, t01, t10, t11 = ms.scaled_tables(spec)
        n = spec.n_base
        last = np.arange(n, dtype=np.int64)
        v0 = spec.chi_f[:n].copy()
        v1 = spec.chi_f[n:].copy()
        loge = np.log(v0 + v1)
        norm = v0 + v1
        v0, v1 = v0 / norm, v1 / norm
        self.log_energies = [loge.copy()]
        total = n
        for _ in range(n_max - 1):
            nl, nv0, nv1, nle = [], [], [], []
            for j in range(n):
                w0 = v0 * t00[last, j] + v1 * t10[last, j]
                w1 = v0 * t01[last, j] + v1 * t11[last, j]
                m = w0 + w1
                alive = m > 0.0
                if not np.any(alive):
                    continue
                nl.append(np.full(int(alive.sum()), j, dtype=np.int64))
                nv0.append(w0[alive] / m[alive])
                nv1.append(w1[alive] / m[alive])
                nle.append(loge[alive] + np.log(m[alive]))
            last = np.concatenate(nl)
            v0 = np.concatenate(nv0)
            v1 = np.concatenate(nv1)
            loge = np.concatenate(nle)
            total += last.size
            if total > max_words:
                raise sym.EnumerationCapExceeded(
                    f"energy levels exceed {max_words} words")
            self.log_energies.append(loge.copy())

    def log_T(self, n: int, s: float) -> float:
        le = self.log_energies[n - 1]
        m = le.max()
        return s * m + math.log(np.exp(s * (le - m)).sum())


@dataclass
class PressureEstimate:
    s: float
    n_max: int
    log_tn: dict
    phi_hat: float
    phi_lo: float
    phi_hi: float


def pressure(spec: SystemSpec, s: float, n_max: int = 12,
             levels: EnergyLevels | None = None) -> PressureEstimate:
    """Point estimate and rigorous bracket for the pressure at exponent s.

    phi_hat = log T_n / n at n = n_max; the bracket comes from Fekete's
    lemma applied to the quasi-multiplicative junction constants g1, g2
    (best bound over all computed levels, which only tightens it).
    """
    rep = validate(spec)
    if rep.case != "II":
        raise ms.RegimeMismatch("pressure needs the irreducible regime")
    if levels is None:
        levels = EnergyLevels(spec, n_max)
    cst = ms.sandwich_constants(spec)
    lg1, lg2 = math.log(cst.g1(s)), math.log(cst.g2(s))
    log_tn = {n: levels.log_T(n, s) for n in range(1, n_max + 1)}
    phi_hat = log_tn[n_max] / n_max
    phi_lo = max((lt + lg1) / n for n, lt in log_tn.items())
    phi_hi = min((lt + lg2) / n for n, lt in log_tn.items())
    return PressureEstimate(s, n_max, log_tn, phi_hat, phi_lo, phi_hi)


@dataclass
class TrResult:
    tr: float
    tr_lo: float
    tr_hi: float
    tr_point: float       # raw root of phi_hat, possibly outside the bracket
    n_max: int
    bisection_trace: list = field(default_factory=list)

    @property
    def width(self) -> float:
        return self.tr_hi - self.tr_lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.tr_lo + self.tr_hi)


def _root_in_t(fn, r: float, tol: float = 1e-10, trace=None):
    lo = 1e-9
    if fn(lo / (lo + r)) <= 0.0:
        raise BracketError("pressure already nonpositive at t = 1e-9")
    hi = 1.0
    for _ in range(200):
        if fn(hi / (hi + r)) < 0.0:
            break
        hi *= 2.0
    else:
        raise BracketError("could not bracket the pressure root; raise n_max")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        val = fn(mid / (mid + r))
        if trace is not None:
            trace.append((mid, val))
        if val > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_tr(spec: SystemSpec, n_max: int = 12,
             levels: EnergyLevels | None = None) -> TrResult:
    """Root of the pressure in the t / (t + r) substitution, with bracket.

    The bracket ends are the roots of the lower/upper Fekete envelopes;
    the reported point is the phi_hat root clamped into the bracket
    (phi_hat is biased by the unknown junction prefactor, so its raw
    root can fall just outside).  Monotonicity of phi_hat along the
    bisection trace is asserted.
    """
    if levels is None:
        levels = EnergyLevels(spec, n_max)
    cache = {}

    def est(sp: float) -> PressureEstimate:
        if sp not in cache:
            cache[sp] = pressure(spec, sp, n_max, levels)
        return cache[sp]

    trace = []
    t_point = _root_in_t(lambda sp: est(sp).phi_hat, spec.r, trace=trace)
    t_lo = _root_in_t(lambda sp: est(sp).phi_lo, spec.r)
    t_hi = _root_in_t(lambda sp: est(sp).phi_hi, spec.r)
    seen = sorted(trace)
    vals = [v for (_, v) in seen]
    if any(vals[i] < vals[i + 1] - 1e-12 for i in range(len(vals) - 1)):
        raise NonConvergence("phi_hat not monotone on the bisection trace")
    tr = min(max(t_point, t_lo), t_hi)
    return TrResult(tr=tr, tr_lo=t_lo, tr_hi=t_hi, tr_point=t_point,
                    n_max=n_max, bisection_trace=trace)


# ---------------------------------------------------------------------------
# strictness test and reports
# ---------------------------------------------------------------------------

@dataclass
class StrictnessResult:
    ok: bool
    mode: str
    margin: float
    failing_component: int | None = None


def strictness_test(spec: SystemSpec, a_r: float) -> StrictnessResult:
    """Check A(a_r/(a_r+r)) v~ > v~ (g1, right) or w~ A > w~ (g2, left).

    A strict componentwise inequality certifies rho(a_r) > 1 and hence
    s_r > a_r.  Returns the relative margin; non-strict components make
    the test inconclusive rather than false.
    """
    rep = validate(spec)
    if rep.g1:
        mode = "g1"
    elif rep.g2:
        mode = "g2"
    else:
        raise ms.RegimeMismatch("strictness test needs g1 or g2")
    sp = a_r / (a_r + spec.r)
    b = param_matrix(spec, f"B-{mode}", sp)
    right, left, rho_b = perron_vectors(b)
    a = param_matrix(spec, "A", sp)
    if mode == "g1":
        v = np.concatenate([right, right])
        gain = (a @ v) / v
    else:
        w = np.concatenate([left, left])
        gain = (w @ a) / w
    margin = float(gain.min() - 1.0)
    if margin <= 1e-12:
        return StrictnessResult(False, mode, margin,
                                failing_component=int(gain.argmin()))
    return StrictnessResult(True, mode, margin)


@dataclass
class DimensionReport:
    r: float
    case: str
    s1r: float
    s2r: float
    sr: float
    ar: float | None = None
    tr: float | None = None
    tr_lo: float | None = None
    tr_hi: float | None = None
    n_max: int | None = None
    root_tol: float = 1e-10

    def residuals(self, spec: SystemSpec) -> dict:
        out = {"rho1": abs(rho_of(spec, "A1", self.s1r) - 1.0),
               "rho2": abs(rho_of(spec, "A2", self.s2r) - 1.0),
               "rho": abs(rho_of(spec, "A", self.sr) - 1.0)}
        if self.ar is not None:
            rep = validate(spec)
            kind = "B-g1" if rep.g1 else "B-g2"
            out["xiB"] = abs(rho_of(spec, kind, self.ar) - 1.0)
        return out


def dimension_report(spec: SystemSpec, n_max: int = 12) -> DimensionReport:
    """All dimension roots meaningful for the spec's regime."""
    rep = validate(spec)
    s1 = solve_dimension_root(spec, "A1")
    s2 = solve_dimension_root(spec, "A2")
    sr = solve_dimension_root(spec, "A")
    ar = None
    if rep.g1 or rep.g2:
        ar = solve_dimension_root(spec, "B-g1" if rep.g1 else "B-g2")
    out = DimensionReport(r=spec.r, case=rep.case, s1r=s1, s2r=s2, sr=sr,
                          ar=ar, n_max=n_max)
    if rep.case == "II":
        res = solve_tr(spec, n_max)
        out.tr, out.tr_lo, out.tr_hi = res.tr, res.tr_lo, res.tr_hi
    return out


@dataclass
class ScanRow:
    r: float
    s1r: float
    s2r: float
    sign: int  # sign of s2r - s1r


def small_r_scan(spec: SystemSpec, r_grid) -> list:
    """Recompute the block roots over a grid of orders r.

    Reports, via the sign column, where the upper-block root dominates;
    the motivating fact is that it always does for small enough r.
    """
    rows = []
    for r in r_grid:
        sub = spec.with_r(float(r))
        s1 = solve_dimension_root(sub, "A1")
        s2 = solve_dimension_root(sub, "A2")
        d = s2 - s1
        sign = 0 if abs(d) <= 2e-10 else (1 if d > 0 else -1)
        rows.append(ScanRow(float(r), s1, s2, sign))
    return rows


def leading_positive_prefix(rows) -> int:
    """Length of the initial run of grid points with s2r > s1r."""
    count = 0
    for row in rows:
        if row.sign > 0:
            count += 1
        else:
            break
    return count
