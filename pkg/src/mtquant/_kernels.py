"""Hot numeric kernels: numba-jitted with pure-numpy fallbacks.

Three inner loops dominate the package's runtime and get dual
implementations:

* ``antichain_scan``  - streaming depth-first accumulation of the
  energy anti-chain statistics (cardinality, energy sums, moment sums)
  for a whole range of thresholds in one tree pass;
* ``lloyd_step_1d``   - one assignment/accumulation sweep of Lloyd's
  algorithm over sorted scalar samples;
* ``markov_paths``    - sampling letter paths from (chi, P).

Set ``MTQUANT_NUMBA=0`` in the environment to force the numpy path;
``mtquant.kernel_backend()`` reports which one is active.  Both paths
produce the same results (bit-identical counts, float sums equal up to
summation order).  ``bench/kernel_bench.py`` times them side by side.
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("MTQUANT_NUMBA", "").strip().lower()
_WANT_NUMBA = _env not in ("0", "off", "false", "no")

if _WANT_NUMBA:
    try:
        from numba import njit, prange
        USING_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USING_NUMBA = False
else:
    USING_NUMBA = False

if not USING_NUMBA:  # identity decorators so the same source still runs
    def njit(*args, **kwargs):
        def wrap(f):
            return f
        if args and callable(args[0]):
            return args[0]
        return wrap

    prange = range


def kernel_backend() -> str:
    return "numba" if USING_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# anti-chain scan
# ---------------------------------------------------------------------------
#
# State per word: the 2-vector of lift-path masses rescaled by c1^{-kp},
# where kp is the number of thresholds already crossed.  The total e of
# the vector sits in [1, 1/c1) while the word is alive, so no explicit
# log is needed; each crossing of e below 1 emits one anti-chain member
# (threshold index kp) and rescales by 1/c1.

@njit(cache=True)
def _scan_core(T00, T01, T10, T11, seed_letter, seed_v0, seed_v1,
               seed_kp, seed_depth, inv_c1, k_min, k_max, s_exps,
               max_visits, max_depth,
               phi, surr, fsum, lmin, lmax):
    n = T00.shape[0]
    ns = s_exps.shape[0]
    cap = (max_depth + 2) * n + 2
    st_letter = np.empty(cap, np.int32)
    st_v0 = np.empty(cap, np.float64)
    st_v1 = np.empty(cap, np.float64)
    st_kp = np.empty(cap, np.int32)
    st_d = np.empty(cap, np.int32)
    top = 0
    st_letter[top] = seed_letter
    st_v0[top] = seed_v0
    st_v1[top] = seed_v1
    st_kp[top] = seed_kp
    st_d[top] = seed_depth
    top += 1
    visits = 0
    while top > 0:
        top -= 1
        a = st_letter[top]
        v0 = st_v0[top]
        v1 = st_v1[top]
        kp = st_kp[top]
        d = st_d[top]
        visits += 1
        if visits > max_visits:
            return -1
        e = v0 + v1
        while e < 1.0:
            if k_min <= kp <= k_max:
                phi[kp] += 1
                surr[kp] += e
                for si in range(ns):
                    fsum[si, kp] += e ** s_exps[si]
                if d < lmin[kp]:
                    lmin[kp] = d
                if d > lmax[kp]:
                    lmax[kp] = d
            kp += 1
            if kp > k_max:
                break
            v0 *= inv_c1
            v1 *= inv_c1
            e = v0 + v1
        if kp > k_max:
            continue
        if d >= max_depth:
            # tree deeper than the stack budget: abort loudly
            return -2
        for j in range(n):
            w0 = v0 * T00[a, j] + v1 * T10[a, j]
            w1 = v0 * T01[a, j] + v1 * T11[a, j]
            if w0 > 0.0 or w1 > 0.0:
                st_letter[top] = j
                st_v0[top] = w0
                st_v1[top] = w1
                st_kp[top] = kp
                st_d[top] = d + 1
                top += 1
    return visits


@njit(cache=True, parallel=True)
def _scan_tasks(T00, T01, T10, T11, t_letter, t_v0, t_v1, t_kp, t_d,
                inv_c1, k_min, k_max, s_exps, max_visits, max_depth,
                phi_t, surr_t, fsum_t, lmin_t, lmax_t, visits_t):
    for ti in prange(t_letter.shape[0]):
        visits_t[ti] = _scan_core(
            T00, T01, T10, T11,
            t_letter[ti], t_v0[ti], t_v1[ti], t_kp[ti], t_d[ti],
            inv_c1, k_min, k_max, s_exps, max_visits, max_depth,
            phi_t[ti], surr_t[ti], fsum_t[ti], lmin_t[ti], lmax_t[ti])


def _emit(phi, surr, fsum, lmin, lmax, ks, es, depth, k_min, k_max, s_exps):
    sel = (ks >= k_min) & (ks <= k_max)
    if not np.any(sel):
        return
    ks = ks[sel]
    es = es[sel]
    np.add.at(phi, ks, 1)
    np.add.at(surr, ks, es)
    for si, s in enumerate(s_exps):
        np.add.at(fsum[si], ks, es ** s)
    np.minimum.at(lmin, ks, depth)
    np.maximum.at(lmax, ks, depth)


def antichain_scan_numpy(T00, T01, T10, T11, chi0, chi1, inv_c1,
                         k_min, k_max, s_exps, max_visits,
                         max_depth=None, chunk=1 << 17):
    """Pure-numpy anti-chain scan: chunked level-wise depth-first walk."""
    n = T00.shape[0]
    nk = k_max + 1
    ns = len(s_exps)
    phi = np.zeros(nk, np.int64)
    surr = np.zeros(nk, np.float64)
    fsum = np.zeros((ns, nk), np.float64)
    lmin = np.full(nk, np.iinfo(np.int64).max, np.int64)
    lmax = np.zeros(nk, np.int64)
    s_exps = np.asarray(s_exps, dtype=np.float64)

    roots = np.arange(n, dtype=np.int64)
    stack = [(1,
              roots,
              chi0.astype(np.float64).copy(),
              chi1.astype(np.float64).copy(),
              np.zeros(n, np.int64))]
    visits = 0
    while stack:
        depth, last, v0, v1, kp = stack.pop()
        visits += last.size
        if visits > max_visits:
            raise RuntimeError(
                f"anti-chain scan exceeded {max_visits} node visits")
        e = v0 + v1
        active = e < 1.0
        while np.any(active):
            _emit(phi, surr, fsum, lmin, lmax,
                  kp[active], e[active], depth, k_min, k_max, s_exps)
            kp[active] += 1
            v0[active] *= inv_c1
            v1[active] *= inv_c1
            e = v0 + v1
            active = (e < 1.0) & (kp <= k_max)
        live = kp <= k_max
        if not np.any(live):
            continue
        last, v0, v1, kp = last[live], v0[live], v1[live], kp[live]
        for j in range(n):
            w0 = v0 * T00[last, j] + v1 * T10[last, j]
            w1 = v0 * T01[last, j] + v1 * T11[last, j]
            alive = (w0 > 0.0) | (w1 > 0.0)
            if not np.any(alive):
                continue
            cl = last[alive] * 0 + j
            cw0, cw1, ckp = w0[alive], w1[alive], kp[alive].copy()
            for lo in range(0, cl.size, chunk):
                hi = min(lo + chunk, cl.size)
                stack.append((depth + 1, cl[lo:hi], cw0[lo:hi].copy(),
                              cw1[lo:hi].copy(), ckp[lo:hi].copy()))
    return phi, surr, fsum, lmin, lmax, visits


def antichain_scan(T00, T01, T10, T11, chi0, chi1, inv_c1,
                   k_min, k_max, s_exps, max_visits, max_depth):
    """Accumulate per-threshold anti-chain statistics in one tree pass.

    Returns ``(phi, surr, fsum, lmin, lmax, visits)`` indexed by the
    threshold exponent k in ``[0, k_max]``; ``surr[k]`` is the energy sum
    rescaled by c1^{-k} (multiply back by c1^k), ``fsum[si, k]`` likewise
    for the moment exponent ``s_exps[si]``.
    """
    s_exps = np.asarray(s_exps, dtype=np.float64)
    if not USING_NUMBA:
        return antichain_scan_numpy(T00, T01, T10, T11, chi0, chi1, inv_c1,
                                    k_min, k_max, s_exps, max_visits,
                                    max_depth)
    n = T00.shape[0]
    nk = k_max + 1
    # tasks: the N root letters plus their alive children, for parallelism
    t_letter, t_v0, t_v1, t_kp, t_d = [], [], [], [], []
    # depth-1 roots are handled as tasks directly (cheap, keeps code single-path)
    for i in range(n):
        t_letter.append(i)
        t_v0.append(chi0[i])
        t_v1.append(chi1[i])
        t_kp.append(0)
        t_d.append(1)
    t_letter = np.array(t_letter, np.int32)
    t_v0 = np.array(t_v0, np.float64)
    t_v1 = np.array(t_v1, np.float64)
    t_kp = np.array(t_kp, np.int32)
    t_d = np.array(t_d, np.int32)
    nt = t_letter.size
    ns = s_exps.size
    phi_t = np.zeros((nt, nk), np.int64)
    surr_t = np.zeros((nt, nk), np.float64)
    fsum_t = np.zeros((nt, ns, nk), np.float64)
    lmin_t = np.full((nt, nk), np.iinfo(np.int64).max, np.int64)
    lmax_t = np.zeros((nt, nk), np.int64)
    visits_t = np.zeros(nt, np.int64)
    _scan_tasks(T00, T01, T10, T11, t_letter, t_v0, t_v1, t_kp, t_d,
                float(inv_c1), int(k_min), int(k_max), s_exps,
                int(max_visits), int(max_depth),
                phi_t, surr_t, fsum_t, lmin_t, lmax_t, visits_t)
    if np.any(visits_t == -2):
        raise RuntimeError("anti-chain scan exceeded its depth budget")
    if np.any(visits_t < 0):
        raise RuntimeError(
            f"anti-chain scan exceeded {max_visits} node visits")
    return (phi_t.sum(axis=0), surr_t.sum(axis=0), fsum_t.sum(axis=0),
            lmin_t.min(axis=0), lmax_t.max(axis=0), int(visits_t.sum()))


# ---------------------------------------------------------------------------
# Lloyd sweep (scalar samples)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _lloyd_step_1d_numba(xs, centers, r):
    k = centers.shape[0]
    counts = np.zeros(k, np.int64)
    sums = np.zeros(k, np.float64)
    dist = 0.0
    b = 0
    if r == 2.0:
        for idx in range(xs.shape[0]):
            x = xs[idx]
            while b < k - 1 and x > 0.5 * (centers[b] + centers[b + 1]):
                b += 1
            counts[b] += 1
            sums[b] += x
            d = x - centers[b]
            dist += d * d
    else:
        for idx in range(xs.shape[0]):
            x = xs[idx]
            while b < k - 1 and x > 0.5 * (centers[b] + centers[b + 1]):
                b += 1
            counts[b] += 1
            sums[b] += x
            dist += abs(x - centers[b]) ** r
    return counts, sums, dist


def lloyd_step_1d_numpy(xs, centers, r):
    k = centers.shape[0]
    mid = 0.5 * (centers[:-1] + centers[1:])
    idx = np.searchsorted(mid, xs, side="left")
    counts = np.bincount(idx, minlength=k).astype(np.int64)
    sums = np.bincount(idx, weights=xs, minlength=k)
    if r == 2.0:
        d = xs - centers[idx]
        dist = float(np.dot(d, d))
    else:
        dist = float(np.sum(np.abs(xs - centers[idx]) ** r))
    return counts, sums, dist


def lloyd_step_1d(xs, centers, r=2.0):
    """Assign sorted samples to sorted centers; per-cluster counts/sums and
    the total r-th-power distortion of the current codebook."""
    if USING_NUMBA:
        return _lloyd_step_1d_numba(xs, centers, float(r))
    return lloyd_step_1d_numpy(xs, centers, float(r))


# ---------------------------------------------------------------------------
# Markov path sampling
# ---------------------------------------------------------------------------

@njit(cache=True)
def _markov_paths_numba(cum_init, cum_rows, uniforms):
    count, depth = uniforms.shape
    m = cum_init.shape[0]
    letters = np.empty((count, depth), np.int32)
    for s in range(count):
        u = uniforms[s, 0]
        a = 0
        while a < m - 1 and u >= cum_init[a]:
            a += 1
        letters[s, 0] = a
        for t in range(1, depth):
            u = uniforms[s, t]
            row = cum_rows[a]
            b = 0
            while b < m - 1 and u >= row[b]:
                b += 1
            letters[s, t] = b
            a = b
    return letters


def markov_paths_numpy(cum_init, cum_rows, uniforms):
    count, depth = uniforms.shape
    m = cum_init.shape[0]
    letters = np.empty((count, depth), np.int32)
    first = (uniforms[:, 0][:, None] >= cum_init[None, :]).sum(axis=1)
    letters[:, 0] = np.minimum(first, m - 1)
    for t in range(1, depth):
        rows = cum_rows[letters[:, t - 1]]
        idx = (uniforms[:, t][:, None] >= rows).sum(axis=1)
        letters[:, t] = np.minimum(idx, m - 1)
    return letters


def markov_paths(cum_init, cum_rows, uniforms):
    """Map iid uniforms to letter paths of the chain (chi, P); 0-based letters."""
    if USING_NUMBA:
        return _markov_paths_numba(cum_init, cum_rows, uniforms)
    return markov_paths_numpy(cum_init, cum_rows, uniforms)
