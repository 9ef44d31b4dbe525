"""Compiled inner loops for the heuristic geodesic search.

Targets are passed as ``(kind, params)``: kind 0 point ``(px, py, -, -)``,
1 segment ``(ax, ay, bx, by)``, 2 line ``(ox, oy, dx, dy)`` with unit direction.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def target_dist(kind, tp, x, y):
    if kind == 0:
        return math.hypot(x - tp[0], y - tp[1])
    if kind == 1:
        dx = tp[2] - tp[0]
        dy = tp[3] - tp[1]
        u = ((x - tp[0]) * dx + (y - tp[1]) * dy) / (dx * dx + dy * dy)
        if u < 0.0:
            u = 0.0
        elif u > 1.0:
            u = 1.0
        return math.hypot(x - tp[0] - u * dx, y - tp[1] - u * dy)
    u = (x - tp[0]) * tp[2] + (y - tp[1]) * tp[3]
    return math.hypot(x - tp[0] - u * tp[2], y - tp[1] - u * tp[3])


@njit(cache=True)
def closest(kind, tp, x, y):
    if kind == 0:
        return tp[0], tp[1]
    if kind == 1:
        dx = tp[2] - tp[0]
        dy = tp[3] - tp[1]
        u = ((x - tp[0]) * dx + (y - tp[1]) * dy) / (dx * dx + dy * dy)
        if u < 0.0:
            u = 0.0
        elif u > 1.0:
            u = 1.0
        return tp[0] + u * dx, tp[1] + u * dy
    u = (x - tp[0]) * tp[2] + (y - tp[1]) * tp[3]
    return tp[0] + u * tp[2], tp[1] + u * tp[3]


def build_grid(pts, cell=1.0):
    """Unit-bucket index ``(x0, y0, nx, ny, start, items)`` over candidate points."""
    x0 = float(pts[:, 0].min()) if len(pts) else 0.0
    y0 = float(pts[:, 1].min()) if len(pts) else 0.0
    ci = np.floor((pts[:, 0] - x0) / cell).astype(np.int64)
    cj = np.floor((pts[:, 1] - y0) / cell).astype(np.int64)
    nx = int(ci.max()) + 1 if len(pts) else 1
    ny = int(cj.max()) + 1 if len(pts) else 1
    ids = ci * ny + cj
    items = np.argsort(ids, kind="stable").astype(np.int64)
    start = np.searchsorted(ids[items], np.arange(nx * ny + 1)).astype(np.int64)
    return (x0, y0, nx, ny, start, items)


@njit(cache=True)
def monotone_seed(pts, order, proj, perp, sx, sy, dT, mu, reach):
    """Best path for the linearized cost ``mu * L - N`` among paths monotone in ``proj``.

    ``order`` sorts candidates by increasing ``proj``; predecessors are searched
    within ``reach`` in both the projected and perpendicular coordinates.
    Returns candidate indices of the chosen interior points.
    """
    m = pts.shape[0]
    best = np.empty(m)
    pred = np.full(m, -1, np.int64)
    for jj in range(m):
        j = order[jj]
        xj = pts[j, 0]
        yj = pts[j, 1]
        b = mu * math.hypot(xj - sx, yj - sy) - 1.0
        pr = -1
        ii = jj - 1
        while ii >= 0:
            i = order[ii]
            if proj[j] - proj[i] > reach:
                break
            if proj[i] < proj[j] and abs(perp[i] - perp[j]) <= reach:
                v = best[i] + mu * math.hypot(xj - pts[i, 0], yj - pts[i, 1]) - 1.0
                if v < b:
                    b = v
                    pr = i
            ii -= 1
        best[j] = b
        pred[j] = pr
    end = -1
    tot = math.inf
    for j in range(m):
        v = best[j] + mu * dT[j]
        if v < tot:
            tot = v
            end = j
    out = np.empty(m, np.int64)
    n = 0
    k = end
    while k >= 0:
        out[n] = k
        n += 1
        k = pred[k]
    res = np.empty(n, np.int64)
    for q in range(n):
        res[q] = out[n - 1 - q]
    return res


@njit(cache=True)
def _legs(pts, seq, n, sx, sy, dT, vx, vy, legs):
    vx[0] = sx
    vy[0] = sy
    for q in range(n):
        vx[q + 1] = pts[seq[q], 0]
        vy[q + 1] = pts[seq[q], 1]
    total = 0.0
    for q in range(n):
        legs[q] = math.hypot(vx[q + 1] - vx[q], vy[q + 1] - vy[q])
        total += legs[q]
    return total


@njit(cache=True)
def local_search(pts, seq0, sx, sy, kind, tp, dT, d0, s, tol, max_iter, grid):
    """Best-improvement descent over insert / pair insert / remove / relocate / reversal moves.

    ``dT[c]`` is the distance from candidate ``c`` to the target and ``d0`` the
    distance from the start.  ``grid`` is the bucket index from
    :func:`build_grid`; insertions are only tried near each leg, which loses
    nothing because a farther point cannot improve the action.  Stops when no
    move lowers the action by more than ``tol``.  Returns ``(sequence, iterations)``.
    """
    gx0, gy0, gnx, gny, gstart, gitems = grid
    m = pts.shape[0]
    seq = np.empty(m, np.int64)
    n = seq0.shape[0]
    used = np.zeros(m, np.bool_)
    for q in range(n):
        seq[q] = seq0[q]
        used[seq0[q]] = True
    vx = np.empty(m + 1)
    vy = np.empty(m + 1)
    legs = np.empty(m + 1)
    near = np.empty(m, np.int64)
    two_s = 2.0 * s
    it = 0
    while it < max_iter:
        it += 1
        inner = _legs(pts, seq, n, sx, sy, dT, vx, vy, legs)
        final = d0 if n == 0 else dT[seq[n - 1]]
        L = inner + final
        cur = L * L / two_s - n

        best_gain = tol
        mv = 0  # 1 insert, 2 remove, 3 relocate, 4 reverse, 5 pair insert
        a1 = -1
        a2 = -1
        a3 = -1

        # insert candidate c after vertex i (vertex 0 is the start)
        eps = math.sqrt(L * L + two_s) - L
        bdl = math.inf
        bc = -1
        bi = -1
        for i in range(n + 1):
            ax = vx[i]
            ay = vy[i]
            if i < n:
                bx = vx[i + 1]
                by = vy[i + 1]
                ell = legs[i]
            else:
                bx, by = closest(kind, tp, ax, ay)
                ell = final
            reach = 1.5 * math.sqrt(2.0 * eps * (ell + eps) + eps * eps) + 1e-9
            ci0 = max(0, int(math.floor(min(ax, bx) - reach - gx0)))
            ci1 = min(gnx - 1, int(math.floor(max(ax, bx) + reach - gx0)))
            cj0 = max(0, int(math.floor(min(ay, by) - reach - gy0)))
            cj1 = min(gny - 1, int(math.floor(max(ay, by) + reach - gy0)))
            for ci in range(ci0, ci1 + 1):
                for cj in range(cj0, cj1 + 1):
                    cell = ci * gny + cj
                    for q in range(gstart[cell], gstart[cell + 1]):
                        c = gitems[q]
                        if used[c]:
                            continue
                        cx = pts[c, 0]
                        cy = pts[c, 1]
                        d1 = math.hypot(cx - ax, cy - ay)
                        if i < n:
                            dl = d1 + math.hypot(cx - bx, cy - by) - ell
                        else:
                            dl = d1 + dT[c] - final
                        if dl < bdl or (dl == bdl and (c < bc or (c == bc and i < bi))):
                            bdl = dl
                            bc = c
                            bi = i
        if bc >= 0:
            Ln = L + bdl
            g = cur - (Ln * Ln / two_s - (n + 1))
            if g > best_gain:
                best_gain = g
                mv = 1
                a1 = bc
                a2 = bi

        # insert a pair (c, e) after vertex i; both must fit the single-insert ellipse
        eps2 = math.sqrt(L * L + 2.0 * two_s) - L
        for i in range(n + 1):
            ax = vx[i]
            ay = vy[i]
            if i < n:
                bx = vx[i + 1]
                by = vy[i + 1]
                ell = legs[i]
            else:
                bx, by = closest(kind, tp, ax, ay)
                ell = final
            reach = 1.5 * math.sqrt(2.0 * eps2 * (ell + eps2) + eps2 * eps2) + 1e-9
            ci0 = max(0, int(math.floor(min(ax, bx) - reach - gx0)))
            ci1 = min(gnx - 1, int(math.floor(max(ax, bx) + reach - gx0)))
            cj0 = max(0, int(math.floor(min(ay, by) - reach - gy0)))
            cj1 = min(gny - 1, int(math.floor(max(ay, by) + reach - gy0)))
            k = 0
            for ci in range(ci0, ci1 + 1):
                for cj in range(cj0, cj1 + 1):
                    cell = ci * gny + cj
                    for q in range(gstart[cell], gstart[cell + 1]):
                        c = gitems[q]
                        if used[c]:
                            continue
                        d1 = math.hypot(pts[c, 0] - ax, pts[c, 1] - ay)
                        if i < n:
                            dl = d1 + math.hypot(pts[c, 0] - bx, pts[c, 1] - by) - ell
                        else:
                            dl = d1 + dT[c] - final
                        if dl < eps2:
                            near[k] = c
                            k += 1
            for u in range(k):
                c = near[u]
                du = math.hypot(pts[c, 0] - ax, pts[c, 1] - ay)
                for w in range(k):
                    if w == u:
                        continue
                    e = near[w]
                    if i < n:
                        tail = math.hypot(pts[e, 0] - bx, pts[e, 1] - by)
                    else:
                        tail = dT[e]
                    dl = du + math.hypot(pts[e, 0] - pts[c, 0], pts[e, 1] - pts[c, 1]) + tail - ell
                    Ln = L + dl
                    g = cur - (Ln * Ln / two_s - (n + 2))
                    if g > best_gain:
                        best_gain = g
                        mv = 5
                        a1 = c
                        a2 = i
                        a3 = e

        # remove vertex i (1..n)
        for i in range(1, n + 1):
            if i < n:
                dl = math.hypot(vx[i + 1] - vx[i - 1], vy[i + 1] - vy[i - 1]) - legs[i - 1] - legs[i]
            else:
                back = d0 if i == 1 else dT[seq[i - 2]]
                dl = back - legs[i - 1] - final
            Ln = L + dl
            g = cur - (Ln * Ln / two_s - (n - 1))
            if g > best_gain:
                best_gain = g
                mv = 2
                a1 = i
                a2 = -1

        # relocate vertex i to the leg after vertex k of the original path
        for i in range(1, n + 1):
            px = vx[i]
            py = vy[i]
            if i < n:
                rem = math.hypot(vx[i + 1] - vx[i - 1], vy[i + 1] - vy[i - 1]) - legs[i - 1] - legs[i]
            else:
                back = d0 if i == 1 else dT[seq[i - 2]]
                rem = back - legs[i - 1] - final
            pdT = dT[seq[i - 1]]
            for k in range(n + 1):
                if k == i - 1 or k == i:
                    continue
                d1 = math.hypot(px - vx[k], py - vy[k])
                if k < n:
                    ins = d1 + math.hypot(px - vx[k + 1], py - vy[k + 1]) - legs[k]
                else:
                    ins = d1 + pdT - final
                Ln = L + rem + ins
                g = cur - (Ln * Ln / two_s - n)
                if g > best_gain:
                    best_gain = g
                    mv = 3
                    a1 = i
                    a2 = k

        # reverse vertices i..j
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                old = legs[i - 1]
                new = math.hypot(vx[j] - vx[i - 1], vy[j] - vy[i - 1])
                if j < n:
                    old += legs[j]
                    new += math.hypot(vx[j + 1] - vx[i], vy[j + 1] - vy[i])
                else:
                    old += final
                    new += dT[seq[i - 1]]
                Ln = L + new - old
                g = cur - (Ln * Ln / two_s - n)
                if g > best_gain:
                    best_gain = g
                    mv = 4
                    a1 = i
                    a2 = j

        if mv == 0:
            break
        if mv == 1:
            # new point goes to sequence position a2 (after vertex a2)
            for q in range(n, a2, -1):
                seq[q] = seq[q - 1]
            seq[a2] = a1
            used[a1] = True
            n += 1
        elif mv == 5:
            for q in range(n + 1, a2 + 1, -1):
                seq[q] = seq[q - 2]
            seq[a2] = a1
            seq[a2 + 1] = a3
            used[a1] = True
            used[a3] = True
            n += 2
        elif mv == 2:
            used[seq[a1 - 1]] = False
            for q in range(a1 - 1, n - 1):
                seq[q] = seq[q + 1]
            n -= 1
        elif mv == 3:
            c = seq[a1 - 1]
            # vertex k of the original path; after removing vertex a1 it shifts when k > a1
            k = a2 if a2 < a1 else a2 - 1
            for q in range(a1 - 1, n - 1):
                seq[q] = seq[q + 1]
            for q in range(n - 1, k, -1):
                seq[q] = seq[q - 1]
            seq[k] = c
        else:
            lo = a1 - 1
            hi = a2 - 1
            while lo < hi:
                tmp = seq[lo]
                seq[lo] = seq[hi]
                seq[hi] = tmp
                lo += 1
                hi -= 1
    return seq[:n].copy(), it


@njit(cache=True)
def window_dp(ax, ay, loc, end_cost, end0):
    """Shortest path from ``a`` through exactly n of the ``loc`` points, for every n.

    The path ends with cost ``end_cost[j]`` after its last point ``j`` (``end0``
    when it has no points).  Returns ``(best, last_mask, last_point, parent)``
    with ``best[n]`` the minimal length; ``parent[mask, j]`` is the previous
    point (-1 for the first).
    """
    k = loc.shape[0]
    full = 1 << k
    dp = np.full((full, k), np.inf)
    par = np.full((full, k), -1, np.int64)
    for j in range(k):
        dp[1 << j, j] = math.hypot(loc[j, 0] - ax, loc[j, 1] - ay)
    D = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            D[i, j] = math.hypot(loc[i, 0] - loc[j, 0], loc[i, 1] - loc[j, 1])
    best = np.full(k + 1, np.inf)
    bmask = np.full(k + 1, -1, np.int64)
    blast = np.full(k + 1, -1, np.int64)
    best[0] = end0
    for mask in range(1, full):
        cnt = 0
        mm = mask
        while mm:
            mm &= mm - 1
            cnt += 1
        for j in range(k):
            if not (mask >> j) & 1:
                continue
            cur = dp[mask, j]
            if cur == np.inf:
                continue
            tot = cur + end_cost[j]
            if tot < best[cnt]:
                best[cnt] = tot
                bmask[cnt] = mask
                blast[cnt] = j
            for q in range(k):
                if (mask >> q) & 1:
                    continue
                nm = mask | (1 << q)
                v = cur + D[j, q]
                if v < dp[nm, q]:
                    dp[nm, q] = v
                    par[nm, q] = j
    return best, bmask, blast, par
