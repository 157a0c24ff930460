"""Clusters, crossings and circuits of open sites in a configuration.

All functions are pure and work on :class:`~majperc.grid.SpinConfig`
windows; a site is *open* when its opinion is 1. Batched variants operate on
``(B, h, w)`` arrays of replicas and label all replicas in a single pass.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import ndimage

from .grid import Rect, Site, SpinConfig


class Connectivity(enum.Enum):
    """Adjacency used to grow clusters.

    ``NEAREST_NEIGHBOR`` joins the four orthogonal neighbours. ``STAR`` adds
    the diagonals and is meant for the closed side of planar duality.
    """

    NEAREST_NEIGHBOR = 4
    STAR = 8

    @classmethod
    def parse(cls, value) -> "Connectivity":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("-", "_")
        aliases = {"NN": "NEAREST_NEIGHBOR", "NEARESTNEIGHBOR": "NEAREST_NEIGHBOR", "4": "NEAREST_NEIGHBOR",
                   "8": "STAR"}
        try:
            return cls[aliases.get(key, key)]
        except KeyError:
            raise ValueError(f"unknown connectivity {value!r}") from None

    @property
    def structure(self) -> np.ndarray:
        if self is Connectivity.STAR:
            return np.ones((3, 3), dtype=bool)
        return ndimage.generate_binary_structure(2, 1)


class EmptySetWarning(UserWarning):
    """Raised (as a warning) when a connection query has an empty endpoint set."""


@dataclass(frozen=True)
class ClusterLabeling:
    """Cluster labels of the open sites of a window.

    ``labels`` has the window's ``(height, width)`` shape. Closed sites carry
    label 0 and clusters are numbered ``1..count`` in order of their first
    site in row-major order. ``sizes[k - 1]`` is the size of cluster ``k``.
    """

    region: Rect
    labels: np.ndarray
    count: int
    sizes: np.ndarray

    def label_at(self, site) -> int:
        x, y = site
        if not self.region.contains((x, y)):
            raise KeyError(f"site {(x, y)} outside {self.region}")
        return int(self.labels[y - self.region.y0, x - self.region.x0])

    def size_of(self, label: int) -> int:
        return 0 if label == 0 else int(self.sizes[label - 1])

    def members(self, label: int) -> list[Site]:
        ys, xs = np.nonzero(self.labels == label)
        return [Site(int(x) + self.region.x0, int(y) + self.region.y0) for y, x in zip(ys, xs)]


def _label(bits: np.ndarray, conn: Connectivity) -> tuple[np.ndarray, int]:
    labels, count = ndimage.label(bits, structure=conn.structure)
    return labels, int(count)


def _label_batch(states: np.ndarray, conn: Connectivity) -> tuple[np.ndarray, int]:
    """Label a ``(B, h, w)`` stack with no adjacency across the batch axis."""
    structure = np.zeros((3, 3, 3), dtype=bool)
    structure[1] = conn.structure
    labels, count = ndimage.label(states, structure=structure)
    return labels, int(count)


def label_clusters(config: SpinConfig, conn=Connectivity.NEAREST_NEIGHBOR) -> ClusterLabeling:
    conn = Connectivity.parse(conn)
    labels, count = _label(config.bits, conn)
    sizes = np.bincount(labels.ravel(), minlength=count + 1)[1:]
    labels.setflags(write=False)
    return ClusterLabeling(config.region, labels, count, sizes)


def largest_cluster_size(config: SpinConfig) -> int:
    lab = label_clusters(config)
    return int(lab.sizes.max()) if lab.count else 0


def _local_mask(region: Rect, sites: Iterable) -> np.ndarray:
    mask = np.zeros(region.shape, dtype=bool)
    for x, y in sites:
        if not region.contains((x, y)):
            raise ValueError(f"site {(x, y)} outside {region}")
        mask[y - region.y0, x - region.x0] = True
    return mask


def _touching(labels: np.ndarray, count: int, a_mask: np.ndarray, b_mask: np.ndarray) -> np.ndarray:
    """Per-replica flag: some nonzero label appears under both masks.

    Masks broadcast against ``labels`` (leading batch axis optional).
    """
    mark = np.zeros(count + 1, dtype=bool)
    mark[np.where(a_mask, labels, 0)] = True
    mark[0] = False
    hit = mark[np.where(b_mask, labels, 0)]
    return hit.reshape(hit.shape[0], -1).any(axis=1) if hit.ndim == 3 else hit.any()


def connects(config: SpinConfig, region: Rect, A, B, conn=Connectivity.NEAREST_NEIGHBOR) -> bool:
    """Whether an open path inside ``region`` joins a site of ``A`` to a site of ``B``.

    An empty ``A`` or ``B`` gives ``False`` together with an
    :class:`EmptySetWarning`.
    """
    A, B = list(A), list(B)
    if not A or not B:
        warnings.warn("connects() called with an empty endpoint set", EmptySetWarning, stacklevel=2)
        return False
    conn = Connectivity.parse(conn)
    sub = config.crop(region)
    labels, count = _label(sub.bits, conn)
    return bool(_touching(labels, count, _local_mask(region, A), _local_mask(region, B)))


def has_h_crossing(config: SpinConfig, rect: Rect | None = None) -> bool:
    """Open left-right crossing of ``rect`` (default: the whole window)."""
    bits = (config.crop(rect) if rect is not None else config).bits
    labels, count = _label(bits, Connectivity.NEAREST_NEIGHBOR)
    return bool(np.intersect1d(labels[:, 0], labels[:, -1]).any())


def has_v_crossing(config: SpinConfig, rect: Rect | None = None) -> bool:
    """Open bottom-top crossing of ``rect`` (default: the whole window)."""
    bits = (config.crop(rect) if rect is not None else config).bits
    labels, count = _label(bits, Connectivity.NEAREST_NEIGHBOR)
    return bool(np.intersect1d(labels[0, :], labels[-1, :]).any())


def h_crossing_batch(states: np.ndarray) -> np.ndarray:
    """Left-right crossing flags of every replica in a ``(B, h, w)`` stack."""
    states = np.asarray(states)
    labels, count = _label_batch(states, Connectivity.NEAREST_NEIGHBOR)
    mark = np.zeros(count + 1, dtype=bool)
    mark[labels[:, :, 0]] = True
    mark[0] = False
    return mark[labels[:, :, -1]].any(axis=1)


def largest_cluster_batch(states: np.ndarray) -> np.ndarray:
    """Largest open cluster size of every replica in a ``(B, h, w)`` stack."""
    states = np.asarray(states)
    labels, count = _label_batch(states, Connectivity.NEAREST_NEIGHBOR)
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    # labels are assigned in raster order, so each replica owns a contiguous
    # label range ending at its maximal label
    top = labels.reshape(len(labels), -1).max(axis=1)
    out = np.zeros(len(labels), dtype=np.int64)
    lo = 1
    for b, hi in enumerate(top):
        if hi >= lo:
            out[b] = sizes[lo:hi + 1].max()
            lo = hi + 1
    return out


# --- circuits ----------------------------------------------------------------


def _annulus_masks(region: Rect, m: int, n: int):
    if not 0 <= m < n:
        raise ValueError(f"need 0 <= m < n, got m={m}, n={n}")
    if not region.contains_rect(Rect.centered(n)):
        raise ValueError(f"annulus [-{n},{n}]^2 is not inside {region}")
    xs, ys = region.coords_grid()
    sup = np.maximum(np.abs(xs), np.abs(ys))
    return (sup > m) & (sup <= n), sup == m + 1, sup == n


def has_circuit(config: SpinConfig, m: int, n: int) -> bool:
    """Open circuit in ``[-n, n]^2`` surrounding ``[-m, m]^2``.

    Decided by duality: such a circuit exists iff the closed sites of the
    annulus do not star-connect the ring at sup-distance ``m + 1`` to the
    ring at sup-distance ``n``.
    """
    return bool(circuit_batch(config.bits[None], m, n, config.region)[0])


def circuit_batch(states: np.ndarray, m: int, n: int, region: Rect) -> np.ndarray:
    """:func:`has_circuit` for every replica of a ``(B, h, w)`` stack on ``region``."""
    states = np.asarray(states)
    annulus, inner, outer = _annulus_masks(region, m, n)
    closed = (states == 0) & annulus
    labels, count = _label_batch(closed, Connectivity.STAR)
    return ~_touching(labels, count, inner, outer)


# --- renormalisation witness -------------------------------------------------


@dataclass(frozen=True)
class CrossingRect:
    rect: Rect
    direction: str  # "h" (left-right) or "v" (bottom-top)

    def crossed(self, config: SpinConfig) -> bool:
        if self.direction == "h":
            return has_h_crossing(config, self.rect)
        return has_v_crossing(config, self.rect)


def witness_rectangles(L: int, factor: int) -> tuple[list[CrossingRect], Rect]:
    """Sub-rectangles of the concatenation argument and the big rectangle.

    For ``factor`` 3 the big rectangle is ``[1, 9L] x [1, 3L]``, covered by
    four horizontal strips of length ``3L`` glued by three vertical
    rectangles of height ``3L``. For ``factor`` 4 it is ``[1, 16L] x [1, 4L]``
    with seven strips of length ``4L`` and six vertical rectangles of
    height ``4L``.
    """
    if L < 1:
        raise ValueError("scale L must be positive")
    if factor == 3:
        strips = [Rect(2 * x * L + 1, (2 * x + 3) * L, 1, L) for x in range(4)]
        glue = [Rect(2 * x * L + 1, (2 * x + 1) * L, -2 * L + 1, L) for x in range(1, 4)]
    elif factor == 4:
        strips = [Rect(2 * x * L + 1, (2 * x + 4) * L, 1, L) for x in range(7)]
        glue = [Rect(2 * x * L + 1, (2 * x + 1) * L, -3 * L + 1, L) for x in range(1, 7)]
    else:
        raise ValueError(f"factor must be 3 or 4, got {factor}")
    big = Rect(1, factor * factor * L, 1, factor * L)
    return [CrossingRect(r, "h") for r in strips] + [CrossingRect(r, "v") for r in glue], big


@dataclass(frozen=True)
class WitnessResult:
    """Outcome of one concatenation check; truthy iff the implication held."""

    antecedent: bool
    consequent: bool

    @property
    def holds(self) -> bool:
        return self.consequent or not self.antecedent

    def __bool__(self) -> bool:
        return self.holds


def concatenation_witness(config: SpinConfig, L: int, factor: int) -> WitnessResult:
    """Check "every listed rectangle crossed long-ways implies the big one is"."""
    rects, big = witness_rectangles(L, factor)
    need = Rect(1, max(r.rect.x1 for r in rects), min(r.rect.y0 for r in rects), big.y1)
    if not config.region.contains_rect(need):
        raise ValueError(f"configuration must cover {need}")
    antecedent = all(r.crossed(config) for r in rects)
    return WitnessResult(antecedent, has_h_crossing(config, big))
