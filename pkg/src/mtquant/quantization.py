"""Energy anti-chains, surrogate error curves, sampling and Lloyd.

The anti-chain at threshold index k collects the words whose energy
first drops below c1^k; its cardinality together with the summed
energies is the combinatorial surrogate of the k-point quantization
error, and regression of the two reproduces the quantization dimension
without touching any geometry.  The empirical half of the module draws
samples from the projected measure and runs Lloyd's algorithm in the
requested distortion order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kn
from . import geometry as geo
from . import measure as ms
from . import symbolic as sym
from .model import SystemSpec


class AntichainCapExceeded(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# materialized anti-chains
# ---------------------------------------------------------------------------

@dataclass
class AntiChain:
    k: int
    threshold_log: float         # k * log(c1)
    words: list
    log_energies: np.ndarray
    l1: int
    l2: int

    @property
    def phi(self) -> int:
        return len(self.words)


def build_antichain(spec: SystemSpec, k: int,
                    max_words: int = 10**6) -> AntiChain:
    """Words sigma with E_r(sigma) < c1^k <= E_r(parent), fully materialized.

    Tree expansion from the single letters, descending while the energy
    stays at or above the threshold; comparisons happen in log space.
    Use :func:`antichain_stats` when only the statistics are needed.
    """
    cst = ms.sandwich_constants(spec)
    if not 0.0 < cst.c1 < 1.0:
        raise ValueError(f"c1 = {cst.c1} outside (0, 1)")
    theta = k * math.log(cst.c1)
    t00, t01, t10, t11 = ms.scaled_tables(spec)
    n = spec.n_base
    words, log_e = [], []
    stack = []
    for i in range(n, 0, -1):
        v0, v1 = spec.chi_f[i - 1], spec.chi_f[i - 1 + n]
        stack.append(((i,), v0, v1, math.log(v0 + v1)))
    while stack:
        word, v0, v1, le = stack.pop()
        if le < theta:
            words.append(word)
            log_e.append(le)
            if len(words) > max_words:
                raise AntichainCapExceeded(
                    f"anti-chain for k={k} exceeds {max_words} words")
            continue
        m = v0 + v1
        v0, v1 = v0 / m, v1 / m
        a = word[-1] - 1
        for j in range(n, 0, -1):
            w0 = v0 * t00[a, j - 1] + v1 * t10[a, j - 1]
            w1 = v0 * t01[a, j - 1] + v1 * t11[a, j - 1]
            tot = w0 + w1
            if tot > 0.0:
                stack.append((word + (j,), w0, w1, le + math.log(tot)))
    lengths = [len(w) for w in words]
    return AntiChain(k, theta, words, np.array(log_e),
                     min(lengths), max(lengths))


def F_value(spec: SystemSpec, antichain: AntiChain, s: float) -> float:
    """Moment sum over the anti-chain, F = sum E_r^{s/(s+r)} (log-sum-exp)."""
    if s <= 0:
        raise ValueError("s must be positive")
    sp = s / (s + spec.r)
    le = antichain.log_energies * sp
    m = le.max()
    return float(math.exp(m) * np.exp(le - m).sum())


def surrogate_error(antichain: AntiChain) -> float:
    """Summed energy over the anti-chain, the k-point error surrogate."""
    le = antichain.log_energies
    m = le.max()
    return float(math.exp(m) * np.exp(le - m).sum())


# ---------------------------------------------------------------------------
# streaming statistics over a threshold range
# ---------------------------------------------------------------------------

@dataclass
class AntichainStats:
    """Per-threshold anti-chain statistics from one streaming pass.

    ``log_surrogate[k]`` and ``log_F[s][k]`` are natural logs; ``phi[k]``
    the cardinality; ``l1/l2`` the length range.  Entries below k_min
    are unset.
    """

    k_min: int
    k_max: int
    log_c1: float
    s_values: tuple
    phi: np.ndarray
    log_surrogate: np.ndarray
    log_F: dict
    l1: np.ndarray
    l2: np.ndarray
    visits: int

    def ks(self):
        return np.arange(self.k_min, self.k_max + 1)


def antichain_stats(spec: SystemSpec, k_min: int, k_max: int,
                    s_values=(), max_visits: int = 2 * 10**10) -> AntichainStats:
    """phi, surrogate and F-moment sums for every k in [k_min, k_max].

    One depth-first pass visits each tree node once, assigning it to the
    run of thresholds it crosses; no words are stored, so the budget is
    node visits rather than memory.
    """
    cst = ms.sandwich_constants(spec)
    lc1 = math.log(cst.c1)
    lc2 = math.log(cst.c2)
    # depth bound: energies shrink by at least c2 per letter
    max_depth = int(2 + ((k_max + 1) * (-lc1) + 2.0) / (-lc2))
    t00, t01, t10, t11 = ms.scaled_tables(spec)
    n = spec.n_base
    s_exps = np.array([s / (s + spec.r) for s in s_values])
    phi, surr, fsum, lmin, lmax, visits = kn.antichain_scan(
        t00, t01, t10, t11, spec.chi_f[:n].copy(), spec.chi_f[n:].copy(),
        1.0 / cst.c1, k_min, k_max, s_exps, max_visits, max_depth)
    ks = np.arange(k_max + 1)
    with np.errstate(divide="ignore"):
        log_surr = np.where(surr > 0, np.log(np.maximum(surr, 1e-300)), -np.inf)
        log_surr = log_surr + ks * lc1
        log_f = {}
        for si, s in enumerate(s_values):
            sp = s / (s + spec.r)
            lf = np.where(fsum[si] > 0,
                          np.log(np.maximum(fsum[si], 1e-300)), -np.inf)
            log_f[s] = lf + ks * lc1 * sp
    return AntichainStats(k_min, k_max, lc1, tuple(s_values),
                          phi, log_surr, log_f, lmin, lmax, visits)


def fit_dimension(stats: AntichainStats, r: float,
                  k_lo: int | None = None, k_hi: int | None = None):
    """Slope of log(phi) against -log(surrogate^{1/r}) over a k window.

    The surrogate tracks the r-th power of the quantization error, so
    the 1/r root turns the regression slope into the quantization
    dimension itself (for r = 1 the x-variable is -log(surrogate)
    verbatim).  Returns (slope, intercept, r_squared).
    """
    k_lo = stats.k_min if k_lo is None else k_lo
    k_hi = stats.k_max if k_hi is None else k_hi
    sel = slice(k_lo, k_hi + 1)
    y = np.log(stats.phi[sel].astype(float))
    x = -stats.log_surrogate[sel] / r
    return _linfit(x, y)


def _linfit(x, y):
    a = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), res, *_ = np.linalg.lstsq(a, y, rcond=None)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(res[0]) / ss_tot if res.size and ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


# ---------------------------------------------------------------------------
# sampling from mu
# ---------------------------------------------------------------------------

def sample_paths(spec: SystemSpec, count: int, depth: int,
                 seed: int = 0) -> np.ndarray:
    """Letter paths of the lifted chain, (count, depth) 1-based letters."""
    rng = np.random.default_rng(seed)
    cum_init = np.cumsum(spec.chi_f)
    cum_rows = np.cumsum(spec.P_f, axis=1)
    out = np.empty((count, depth), np.int32)
    chunk = 1 << 18
    for lo in range(0, count, chunk):
        hi = min(lo + chunk, count)
        uniforms = rng.random((hi - lo, depth))
        out[lo:hi] = kn.markov_paths(cum_init, cum_rows, uniforms)
    return out + 1


def realize_points(spec: SystemSpec, paths: np.ndarray) -> np.ndarray:
    """Map letter paths through the composed similitudes (1-D geometry)."""
    geom = spec.geometry
    if geom is None:
        raise geo.GeometryError("spec has no geometry; sampling needs one")
    if geom.q != 1:
        raise geo.GeometryError("vectorized realization is 1-D only")
    n = spec.n_base
    scale = np.zeros((n, n))
    offset = np.zeros((n, n))
    for (i, j), sim in geom.maps.items():
        scale[i - 1, j - 1] = sim.scale_vector()[0]
        offset[i - 1, j - 1] = sim.translate[0]
    anchors = np.array([geom.anchor(i)[0] for i in range(1, n + 1)])
    proj = (paths - 1) % n
    a = np.ones(paths.shape[0])
    b = np.zeros(paths.shape[0])
    for t in range(1, paths.shape[1]):
        i, j = proj[:, t - 1], proj[:, t]
        b = b + a * offset[i, j]
        a = a * scale[i, j]
    return a * anchors[proj[:, -1]] + b


def sample_mu(spec: SystemSpec, count: int, depth: int | None = None,
              seed: int = 0) -> np.ndarray:
    """Draw points approximately distributed as mu (truncation depth s.t.
    the cylinder diameter is below 1e-9 by default); deterministic in seed."""
    if spec.geometry is None:
        raise geo.GeometryError("spec has no geometry; sampling needs one")
    if depth is None:
        s_max = max(spec.ratios.values())
        depth = max(2, int(math.ceil(math.log(1e-9) / math.log(s_max))) + 1)
    return realize_points(spec, sample_paths(spec, count, depth, seed))


# ---------------------------------------------------------------------------
# Lloyd quantization
# ---------------------------------------------------------------------------

@dataclass
class Codebook:
    points: np.ndarray
    distortion: float       # mean d(x, codebook)^r over the samples
    iterations: int
    converged: bool
    r: float
    seed: int


def _init_centers(xs_sorted: np.ndarray, k: int, rng) -> np.ndarray:
    idx = rng.choice(xs_sorted.size, size=k, replace=False)
    return np.sort(xs_sorted[idx])


def _median_updates(xs_sorted, counts):
    """Per-cluster medians of contiguous slices of the sorted samples."""
    out = np.empty(counts.size)
    start = 0
    for c in range(counts.size):
        stop = start + counts[c]
        sl = xs_sorted[start:stop]
        out[c] = float(np.median(sl)) if sl.size else np.nan
        start = stop
    return out


def _gradient_updates(xs_sorted, counts, centers, r):
    """One damped gradient step of the cluster-wise L_r center problem."""
    out = centers.copy()
    start = 0
    for c in range(counts.size):
        stop = start + counts[c]
        sl = xs_sorted[start:stop]
        start = stop
        if not sl.size:
            out[c] = np.nan
            continue
        d = sl - centers[c]
        grad = -r * np.sum(np.sign(d) * np.abs(d) ** (r - 1.0))
        scale = r * (r - 1.0) * np.mean(np.abs(d) ** (r - 2.0)) * sl.size \
            if r > 1 else sl.size
        step = grad / max(scale, 1e-30)
        out[c] = centers[c] - step
    return out


def _lloyd_single(xs_sorted, k, r, rng, max_iter, tol):
    n = xs_sorted.size
    centers = _init_centers(xs_sorted, k, rng)
    counts, sums, dist = kn.lloyd_step_1d(xs_sorted, centers, r)
    prev = dist
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        if r == 2.0:
            with np.errstate(invalid="ignore"):
                new = sums / counts
        elif r == 1.0:
            new = _median_updates(xs_sorted, counts)
        else:
            new = _gradient_updates(xs_sorted, counts, centers, r)
        empty = ~np.isfinite(new)
        if np.any(empty):
            # reseed empty cells at the sample farthest from its center
            order = np.argsort(centers)
            mid = 0.5 * (centers[order][:-1] + centers[order][1:])
            idx = np.searchsorted(mid, xs_sorted)
            gaps = np.abs(xs_sorted - centers[order][idx])
            for c in np.nonzero(empty)[0]:
                new[c] = xs_sorted[int(gaps.argmax())]
                gaps[int(gaps.argmax())] = -1.0
        centers = np.sort(new)
        counts, sums, dist = kn.lloyd_step_1d(xs_sorted, centers, r)
        if r in (1.0, 2.0) and dist > prev * (1.0 + 1e-12) + 1e-30:
            raise AssertionError(
                f"distortion increased: {prev} -> {dist} at iter {iterations}")
        if prev - dist <= tol * max(prev, 1e-300):
            converged = True
            break
        prev = dist
    return centers, dist / n, iterations, converged


def lloyd(points, k: int, r: float = 2.0, seed: int = 0,
          restarts: int = 4, max_iter: int = 500, tol: float = 1e-9) -> Codebook:
    """Best-of-``restarts`` Lloyd quantizer in the L_r distortion.

    Scalar data runs the fused sorted sweep; centers are means (r = 2),
    cluster medians (r = 1, the 1-D Weiszfeld limit), or damped gradient
    steps otherwise.  Empty cells are reseeded from the farthest sample.
    """
    xs = np.asarray(points, dtype=float).reshape(-1)
    if xs.size == 0:
        raise ValueError("no samples")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= xs.size:
        raise ValueError("k must be below the sample count")
    xs_sorted = np.sort(xs)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        centers, dist, iters, conv = _lloyd_single(
            xs_sorted, k, float(r), rng, max_iter, tol)
        if best is None or dist < best.distortion:
            best = Codebook(centers, dist, iters, conv, float(r), seed)
    return best


@dataclass
class DimensionFit:
    slope: float
    intercept: float
    r_squared: float
    stderr: float
    ci95: tuple
    rows: list = field(default_factory=list)  # (k, distortion, x, y)


def empirical_dimension(spec: SystemSpec, k_list, samples: int,
                        seed: int = 0, r: float | None = None,
                        depth: int | None = None, restarts: int = 4) -> DimensionFit:
    """Estimate the quantization dimension by direct Lloyd quantization.

    Regresses log k on -log e_k where e_k is the empirical L_r error
    (distortion^{1/r}); the slope estimates the dimension and the 95%
    band comes from the usual least-squares standard error.
    """
    r = spec.r if r is None else float(r)
    pts = sample_mu(spec, samples, depth=depth, seed=seed)
    rows = []
    xs, ys = [], []
    for i, k in enumerate(k_list):
        cb = lloyd(pts, int(k), r=r, seed=seed + 1000 + i, restarts=restarts)
        x = -math.log(cb.distortion) / r     # = -log e_k
        y = math.log(k)
        rows.append((int(k), cb.distortion, x, y))
        xs.append(x)
        ys.append(y)
    x = np.array(xs)
    y = np.array(ys)
    slope, intercept, r2 = _linfit(x, y)
    resid = y - (slope * x + intercept)
    dof = max(len(xs) - 2, 1)
    sxx = float(((x - x.mean()) ** 2).sum())
    stderr = math.sqrt(float((resid ** 2).sum()) / dof / sxx) if sxx > 0 else float("nan")
    return DimensionFit(slope, intercept, r2, stderr,
                        (slope - 1.96 * stderr, slope + 1.96 * stderr), rows)
