"""Compiled inner loops for the event-driven engine and Newman-Ziff sweeps."""

import numpy as np
from numba import njit

FREE_FINITE, FROZEN_ZERO, FROZEN_ONE, PERIODIC = 0, 1, 2, 3

_DX = np.array([1, -1, 0, 0])
_DY = np.array([0, 0, 1, -1])


@njit(cache=True, inline="always")
def majority(state, y, x, policy):
    """Majority of the neighbours of ``(y, x)``; ties keep the current opinion."""
    h, w = state.shape
    ones = 0
    deg = 0
    for d in range(4):
        ny = y + _DY[d]
        nx = x + _DX[d]
        if 0 <= ny < h and 0 <= nx < w:
            ones += state[ny, nx]
            deg += 1
        elif policy == FREE_FINITE:
            continue
        elif policy == PERIODIC:
            ones += state[ny % h, nx % w]
            deg += 1
        else:
            if policy == FROZEN_ONE:
                ones += 1
            deg += 1
    if 2 * ones > deg:
        return 1
    if 2 * ones < deg:
        return 0
    return state[y, x]


@njit(cache=True)
def run_events(state, ev_t, ev_y, ev_x, policy, force_until, flip_idx):
    """Apply ring events in order, in place.

    Rings strictly before ``force_until`` set the site to 1 instead of
    applying the majority rule. Indices of events that changed the state are
    written to ``flip_idx``; returns the number of flips.
    """
    nflip = 0
    for i in range(ev_t.shape[0]):
        y = ev_y[i]
        x = ev_x[i]
        old = state[y, x]
        if ev_t[i] < force_until:
            new = 1
        else:
            new = majority(state, y, x, policy)
        if new != old:
            state[y, x] = new
            flip_idx[nflip] = i
            nflip += 1
    return nflip


@njit(cache=True, nogil=True)
def run_batch(states, offsets, ev_t, ev_y, ev_x, policy, force_until):
    """Run each replica ``b`` on events ``offsets[b]:offsets[b+1]``; returns flip counts."""
    nb = states.shape[0]
    flips = np.zeros(nb, dtype=np.int64)
    scratch = np.empty(ev_t.shape[0], dtype=np.int64)
    for b in range(nb):
        lo = offsets[b]
        hi = offsets[b + 1]
        flips[b] = run_events(states[b], ev_t[lo:hi], ev_y[lo:hi], ev_x[lo:hi],
                              policy, force_until, scratch[lo:hi])
    return flips


@njit(cache=True)
def run_pair(lower, upper, ev_t, ev_y, ev_x, policy, force_lower, force_upper, t_stop, strict):
    """Evolve two configurations on shared events up to ``t_stop`` (inclusive).

    Returns ``(next_event, violations)``. With ``strict`` the order
    ``lower <= upper`` is checked at the updated site after every event; an
    order violation can only appear at the site that was just updated.
    """
    violations = 0
    i = 0
    n = ev_t.shape[0]
    while i < n and ev_t[i] <= t_stop:
        y = ev_y[i]
        x = ev_x[i]
        if ev_t[i] < force_lower:
            lower[y, x] = 1
        else:
            lower[y, x] = majority(lower, y, x, policy)
        if ev_t[i] < force_upper:
            upper[y, x] = 1
        else:
            upper[y, x] = majority(upper, y, x, policy)
        if strict and lower[y, x] > upper[y, x]:
            violations += 1
        i += 1
    return i, violations


@njit(cache=True)
def count_unstable(state, policy):
    h, w = state.shape
    n = 0
    for y in range(h):
        for x in range(w):
            if majority(state, y, x, policy) != state[y, x]:
                n += 1
    return n


@njit(cache=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True, nogil=True)
def crossing_steps(orders, h, w):
    """Newman-Ziff site sweeps on an ``h x w`` box.

    ``orders[s]`` is the occupation order of sweep ``s`` (row-major indices).
    For each sweep returns the number of occupied sites at which some cluster
    first touches both the left and right columns (``n + 1`` if never), and
    the largest cluster size after every step summed over sweeps, together
    with the sum of its squares.
    """
    nsweep, n = orders.shape
    steps = np.full(nsweep, n + 1, dtype=np.int64)
    sizes = np.zeros(n, dtype=np.float64)
    sizes2 = np.zeros(n, dtype=np.float64)
    parent = np.empty(n, dtype=np.int64)
    size = np.empty(n, dtype=np.int64)
    left = np.empty(n, dtype=np.bool_)
    right = np.empty(n, dtype=np.bool_)
    occ = np.empty(n, dtype=np.bool_)
    for s in range(nsweep):
        occ[:] = False
        big = 0
        big_root = -1
        for k in range(n):
            i = orders[s, k]
            occ[i] = True
            parent[i] = i
            size[i] = 1
            x = i % w
            y = i // w
            left[i] = x == 0
            right[i] = x == w - 1
            for d in range(4):
                nx = x + _DX[d]
                ny = y + _DY[d]
                if 0 <= nx < w and 0 <= ny < h:
                    j = ny * w + nx
                    if occ[j]:
                        a = _find(parent, i)
                        b = _find(parent, j)
                        if a != b:
                            if size[a] < size[b]:
                                a, b = b, a
                            parent[b] = a
                            size[a] += size[b]
                            left[a] = left[a] or left[b]
                            right[a] = right[a] or right[b]
            r = _find(parent, i)
            if size[r] > big:
                big = size[r]
            sizes[k] += big
            sizes2[k] += big * big
            if steps[s] > n and left[r] and right[r]:
                steps[s] = k + 1
    return steps, sizes, sizes2
