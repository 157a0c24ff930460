"""Independent brute-force oracles used only by the tests.

Nothing here imports the package under test except for plain data types.
"""

from __future__ import annotations


import numpy as np
from scipy.linalg import expm


def majority(own: int, nbrs) -> int:
    """Majority of the open neighbours present; a tie keeps ``own``."""
    ones = sum(nbrs)
    if 2 * ones > len(nbrs):
        return 1
    if 2 * ones < len(nbrs):
        return 0
    return own


def free_neighbours(w: int, h: int):
    """Row-major neighbour index lists of a ``w x h`` grid without outside sites."""
    out = []
    for y in range(h):
        for x in range(w):
            out.append([(y + dy) * w + (x + dx) for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1))
                        if 0 <= x + dx < w and 0 <= y + dy < h])
    return out


def generator_law(w: int, h: int, t: float, p: float) -> np.ndarray:
    """Exact law at time ``t`` on the free ``w x h`` grid via ``expm(Q t)``.

    State ``c`` has bit ``i`` equal to the opinion of row-major site ``i``.
    """
    n = w * h
    nb = free_neighbours(w, h)
    Q = np.zeros((1 << n, 1 << n))
    for c in range(1 << n):
        for i in range(n):
            own = (c >> i) & 1
            new = majority(own, [(c >> j) & 1 for j in nb[i]])
            if new != own:
                d = c ^ (1 << i)
                Q[c, d] += 1.0
                Q[c, c] -= 1.0
    ones = np.array([bin(c).count("1") for c in range(1 << n)])
    pi0 = p ** ones * (1 - p) ** (n - ones)
    return pi0 @ expm(Q * t)


def dfs_crossing(bits: np.ndarray) -> bool:
    """Open nearest-neighbour path from column 0 to the last column, by explicit DFS."""
    h, w = bits.shape
    seen = set()
    stack = [(0, y) for y in range(h) if bits[y, 0]]
    while stack:
        x, y = stack.pop()
        if (x, y) in seen:
            continue
        seen.add((x, y))
        if x == w - 1:
            return True
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = x + dx, y + dy
            if 0 <= a < w and 0 <= b < h and bits[b, a] and (a, b) not in seen:
                stack.append((a, b))
    return False


def dfs_connects(bits: np.ndarray, A, B) -> bool:
    """``A`` and ``B`` (local ``(x, y)`` cells) joined by an open path."""
    h, w = bits.shape
    targets = {b for b in B if bits[b[1], b[0]]}
    stack = [a for a in A if bits[a[1], a[0]]]
    seen = set()
    while stack:
        v = stack.pop()
        if v in targets:
            return True
        if v in seen:
            continue
        seen.add(v)
        x, y = v
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = x + dx, y + dy
            if 0 <= a < w and 0 <= b < h and bits[b, a]:
                stack.append((a, b))
    return False


def face_flood_circuit(bits: np.ndarray, m: int, n: int) -> np.ndarray:
    """Open circuit in ``[-n, n]^2`` around ``[-m, m]^2``, decided on the dual faces.

    ``bits`` has shape ``(B, 2n+1, 2n+1)`` with index ``[k, y + n, x + n]``.
    Faces are unit squares with corners at sites (plus one outer layer);
    two adjacent faces communicate unless their common edge joins two open
    annulus sites. A surrounding circuit exists iff the faces around the
    origin cannot reach the outer layer.
    """
    B, size, _ = bits.shape
    coords = np.arange(-n, n + 1)
    X, Y = np.meshgrid(coords, coords)
    ann = (np.maximum(np.abs(X), np.abs(Y)) > m)
    op = bits.astype(bool) & ann[None]
    F = size + 1  # faces indexed by lower-left corner in [-n-1, n]
    # blocked vertical face-edge between faces (i, j) and (i+1, j): edge from site (i+1, j) to (i+1, j+1)
    pad = np.zeros((B, size + 2, size + 2), dtype=bool)
    pad[:, 1:-1, 1:-1] = op  # pad index [y + n + 1, x + n + 1]
    # face (fx, fy) for fx, fy in [-n-1, n] has index fx + n + 1
    # horizontal move face (fx,fy)->(fx+1,fy) crosses edge site (fx+1,fy)-(fx+1,fy+1)
    block_h = pad[:, 0:F, 1:F + 1] & pad[:, 1:F + 1, 1:F + 1]
    # vertical move (fx,fy)->(fx,fy+1) crosses edge site (fx,fy+1)-(fx+1,fy+1)
    block_v = pad[:, 1:F + 1, 0:F] & pad[:, 1:F + 1, 1:F + 1]
    reach = np.zeros((B, F, F), dtype=bool)
    c = n + 1
    reach[:, c - 1:c + 1, c - 1:c + 1] = True  # the four faces touching the origin
    while True:
        new = reach.copy()
        new[:, :, 1:] |= reach[:, :, :-1] & ~block_h[:, :, :-1]
        new[:, :, :-1] |= reach[:, :, 1:] & ~block_h[:, :, :-1]
        new[:, 1:, :] |= reach[:, :-1, :] & ~block_v[:, :-1, :]
        new[:, :-1, :] |= reach[:, 1:, :] & ~block_v[:, :-1, :]
        if np.array_equal(new, reach):
            break
        reach = new
    escaped = reach[:, 0, :].any(1) | reach[:, -1, :].any(1) | reach[:, :, 0].any(1) | reach[:, :, -1].any(1)
    return ~escaped


def all_configs(n_sites: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    idx = np.arange(start, (1 << n_sites) if stop is None else stop, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n_sites)) & 1).astype(np.uint8)




def reference_forward(bits: np.ndarray, x0: int, y0: int, events, policy: str) -> np.ndarray:
    """Plain Python forward run; ``events`` is an iterable of ``(time, x, y)`` in processing order.

    ``policy`` is one of ``free``, ``zero``, ``one``, ``periodic``.
    """
    b = np.array(bits, dtype=np.uint8)
    h, w = b.shape
    for _, x, y in events:
        i, j = x - x0, y - y0
        nbrs = []
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, c = i + dx, j + dy
            if 0 <= a < w and 0 <= c < h:
                nbrs.append(int(b[c, a]))
            elif policy == "periodic":
                nbrs.append(int(b[c % h, a % w]))
            elif policy == "zero":
                nbrs.append(0)
            elif policy == "one":
                nbrs.append(1)
        b[j, i] = majority(int(b[j, i]), nbrs)
    return b


def winding_cycle_circuit(bits: np.ndarray, m: int, n: int) -> bool:
    """Surrounding open circuit by enumerating simple cycles of the open annulus graph.

    A cycle surrounds the origin iff its total winding angle is a nonzero
    multiple of ``2 pi``. Only practical for very small annuli.
    """
    import networkx as nx

    size = 2 * n + 1
    G = nx.Graph()
    for y in range(size):
        for x in range(size):
            cx, cy = x - n, y - n
            if max(abs(cx), abs(cy)) > m and bits[y, x]:
                G.add_node((cx, cy))
    for (x, y) in list(G.nodes):
        for dx, dy in ((1, 0), (0, 1)):
            if (x + dx, y + dy) in G:
                G.add_edge((x, y), (x + dx, y + dy))
    for cyc in nx.simple_cycles(G):
        if len(cyc) < 4:
            continue
        ang = 0.0
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            d = np.arctan2(b[1], b[0]) - np.arctan2(a[1], a[0])
            ang += (d + np.pi) % (2 * np.pi) - np.pi
        if abs(ang) > np.pi:
            return True
    return False
