"""Bounded-variable primal simplex pivot loop.

Two implementations of the same iteration live here: ``iterate_jit`` (numba,
scalar loops) and ``iterate_numpy`` (vectorised numpy, Python-level loop over
pivots). ``iterate`` is whichever one the ``ESSP_DISABLE_JIT`` flag selects.

Tableau layout: ``T`` has ``m`` constraint rows followed by cost rows; the
row used for pricing is ``cost_row``. All variables are shifted so that their
lower bound is 0; ``ub`` holds the shifted upper bound (``inf`` allowed).
Nonbasic variables sit at 0 or at ``ub`` (``at_upper``).

Status codes: 0 optimal, 1 iteration limit, 2 unbounded.
"""

import numpy as np

from essp._jit import NUMBA_AVAILABLE, USE_JIT, njit  # noqa: F401

OPTIMAL = 0
ITERATION_LIMIT = 1
UNBOUNDED = 2

RULE_BLAND = 0
RULE_DANTZIG = 1

# consecutive degenerate pivots before the Dantzig rule hands over to Bland
_DEGENERATE_SWITCH = 50


@njit(cache=True)
def iterate_jit(T, xB, basis, is_basic, at_upper, ub, enterable, cost_row, rule,
                max_iter, piv_tol, dj_tol):
    m = xB.shape[0]
    nrow = T.shape[0]
    ncol = T.shape[1]
    use_bland = rule == RULE_BLAND
    streak = 0
    it = 0
    while it < max_iter:
        q = -1
        best = 0.0
        for j in range(ncol):
            if is_basic[j] or not enterable[j]:
                continue
            dj = T[cost_row, j]
            score = dj if at_upper[j] else -dj
            if score > dj_tol:
                if use_bland:
                    q = j
                    break
                if score > best:
                    best = score
                    q = j
        if q == -1:
            return OPTIMAL, it

        direction = -1.0 if at_upper[q] else 1.0
        r = -1
        r_to_upper = False
        best_ratio = np.inf
        for i in range(m):
            a = T[i, q] * direction
            if a > piv_tol:
                v = xB[i]
                if v < 0.0:
                    v = 0.0
                ratio = v / a
                to_upper = False
            elif a < -piv_tol:
                ubi = ub[basis[i]]
                if ubi == np.inf:
                    continue
                v = ubi - xB[i]
                if v < 0.0:
                    v = 0.0
                ratio = v / (-a)
                to_upper = True
            else:
                continue
            if r == -1 or ratio < best_ratio - 1e-12:
                best_ratio = ratio
                r = i
                r_to_upper = to_upper
            elif ratio <= best_ratio + 1e-12 and basis[i] < basis[r]:
                r = i
                r_to_upper = to_upper

        flip = ub[q]
        if r == -1 and flip == np.inf:
            return UNBOUNDED, it
        do_flip = r == -1 or flip <= best_ratio
        theta = flip if do_flip else best_ratio

        if theta <= 1e-12:
            streak += 1
            if streak > _DEGENERATE_SWITCH:
                use_bland = True
        else:
            streak = 0

        step = theta * direction
        if step != 0.0:
            for i in range(m):
                xB[i] -= step * T[i, q]
        if do_flip:
            at_upper[q] = not at_upper[q]
        else:
            entering_value = theta if direction > 0.0 else ub[q] - theta
            leaving = basis[r]
            is_basic[leaving] = False
            at_upper[leaving] = r_to_upper
            xB[r] = entering_value
            basis[r] = q
            is_basic[q] = True
            at_upper[q] = False
            piv = T[r, q]
            for j in range(ncol):
                T[r, j] /= piv
            for i in range(nrow):
                if i == r:
                    continue
                f = T[i, q]
                if f != 0.0:
                    for j in range(ncol):
                        T[i, j] -= f * T[r, j]
                    T[i, q] = 0.0
        it += 1
    return ITERATION_LIMIT, it


def iterate_numpy(T, xB, basis, is_basic, at_upper, ub, enterable, cost_row, rule,
                  max_iter, piv_tol, dj_tol):
    m = xB.shape[0]
    use_bland = rule == RULE_BLAND
    streak = 0
    it = 0
    basis_ub = ub[basis]
    while it < max_iter:
        d = T[cost_row]
        score = np.where(at_upper, d, -d)
        eligible = (score > dj_tol) & ~is_basic & enterable
        if not eligible.any():
            return OPTIMAL, it
        if use_bland:
            q = int(np.argmax(eligible))
        else:
            q = int(np.argmax(np.where(eligible, score, -np.inf)))

        direction = -1.0 if at_upper[q] else 1.0
        col = T[:m, q]
        a = col * direction
        ratios = np.full(m, np.inf)
        to_upper = np.zeros(m, dtype=np.bool_)
        down = a > piv_tol
        ratios[down] = np.maximum(xB[down], 0.0) / a[down]
        up = (a < -piv_tol) & np.isfinite(basis_ub)
        ratios[up] = np.maximum(basis_ub[up] - xB[up], 0.0) / (-a[up])
        to_upper[up] = True

        r = -1
        best_ratio = np.inf
        if (down | up).any():
            best_ratio = ratios.min()
            ties = np.flatnonzero(ratios <= best_ratio + 1e-12)
            r = int(ties[np.argmin(basis[ties])])
            best_ratio = ratios[r] if ratios[r] < best_ratio else best_ratio

        flip = ub[q]
        if r == -1 and flip == np.inf:
            return UNBOUNDED, it
        do_flip = r == -1 or flip <= best_ratio
        theta = flip if do_flip else best_ratio

        if theta <= 1e-12:
            streak += 1
            if streak > _DEGENERATE_SWITCH:
                use_bland = True
        else:
            streak = 0

        step = theta * direction
        if step != 0.0:
            xB -= step * col
        if do_flip:
            at_upper[q] = not at_upper[q]
        else:
            entering_value = theta if direction > 0.0 else ub[q] - theta
            leaving = basis[r]
            is_basic[leaving] = False
            at_upper[leaving] = to_upper[r]
            xB[r] = entering_value
            basis[r] = q
            basis_ub[r] = ub[q]
            is_basic[q] = True
            at_upper[q] = False
            T[r] /= T[r, q]
            f = T[:, q].copy()
            f[r] = 0.0
            nz = np.flatnonzero(f)
            if nz.size:
                T[nz] -= np.outer(f[nz], T[r])
                T[nz, q] = 0.0
        it += 1
    return ITERATION_LIMIT, it


iterate = iterate_jit if USE_JIT else iterate_numpy
