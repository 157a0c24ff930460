"""Lattice geometry, opinion configurations and boundary policies.

Coordinates are integer pairs ``(x, y)``. Configurations store their opinions
in a ``(height, width)`` numpy array indexed ``[y - y0, x - x0]``, so a "row"
is a line of constant ``y`` and row-major order walks ``y`` first, then ``x``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np


class Site(NamedTuple):
    x: int
    y: int

    @property
    def parity(self) -> str:
        """``"A"`` when ``x + y`` is even, ``"B"`` otherwise."""
        return "A" if (self.x + self.y) % 2 == 0 else "B"

    def shifted(self, dx: int, dy: int) -> "Site":
        return Site(self.x + dx, self.y + dy)


# east, west, north, south
OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(frozen=True)
class Rect:
    """Axis-aligned box ``[x0, x1] x [y0, y1]`` with inclusive bounds."""

    x0: int
    x1: int
    y0: int
    y1: int

    def __post_init__(self):
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError(f"empty rectangle {self!r}")

    @classmethod
    def square(cls, n: int) -> "Rect":
        """The box ``[1, n] x [1, n]``."""
        return cls(1, n, 1, n)

    @classmethod
    def centered(cls, n: int) -> "Rect":
        """The box ``[-n, n]^2``."""
        return cls(-n, n, -n, n)

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def boundary_size(self) -> int:
        if self.width == 1 or self.height == 1:
            return self.area
        return 2 * (self.width + self.height) - 4

    def contains(self, site) -> bool:
        x, y = site
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def contains_rect(self, other: "Rect") -> bool:
        return (self.x0 <= other.x0 and other.x1 <= self.x1
                and self.y0 <= other.y0 and other.y1 <= self.y1)

    def translate(self, dx: int, dy: int) -> "Rect":
        return Rect(self.x0 + dx, self.x1 + dx, self.y0 + dy, self.y1 + dy)

    def pad(self, m: int) -> "Rect":
        return Rect(self.x0 - m, self.x1 + m, self.y0 - m, self.y1 + m)

    def sites(self) -> Iterator[Site]:
        """Row-major iteration over the sites of the box."""
        for y in range(self.y0, self.y1 + 1):
            for x in range(self.x0, self.x1 + 1):
                yield Site(x, y)

    def index(self, site) -> int:
        """Row-major position of ``site`` inside the box."""
        x, y = site
        return (y - self.y0) * self.width + (x - self.x0)

    def coords_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """``(xs, ys)`` as ``(height, width)`` integer arrays."""
        ys, xs = np.mgrid[self.y0:self.y1 + 1, self.x0:self.x1 + 1]
        return xs.astype(np.int64), ys.astype(np.int64)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Row-major ``(xs, ys)`` arrays of all sites."""
        xs, ys = self.coords_grid()
        return xs.ravel(), ys.ravel()

    def __str__(self) -> str:
        return f"[{self.x0},{self.x1}]x[{self.y0},{self.y1}]"


class BoundaryPolicy(enum.Enum):
    """How reads outside a finite region are resolved.

    ``FREE_FINITE``: the region is the whole graph; boundary sites have fewer
    neighbours. ``FROZEN_ZERO`` / ``FROZEN_ONE``: outside sites hold a constant
    opinion forever. ``PERIODIC``: coordinates wrap around the region.
    """

    FREE_FINITE = 0
    FROZEN_ZERO = 1
    FROZEN_ONE = 2
    PERIODIC = 3

    @classmethod
    def parse(cls, value) -> "BoundaryPolicy":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("-", "_")
        aliases = {"FREE": "FREE_FINITE", "FREEFINITE": "FREE_FINITE",
                   "FROZENZERO": "FROZEN_ZERO", "ZERO": "FROZEN_ZERO",
                   "FROZENONE": "FROZEN_ONE", "ONE": "FROZEN_ONE",
                   "TORUS": "PERIODIC"}
        key = aliases.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown boundary policy {value!r}") from None

    @property
    def frozen_value(self) -> int | None:
        return {BoundaryPolicy.FROZEN_ZERO: 0, BoundaryPolicy.FROZEN_ONE: 1}.get(self)


class Neighbor(NamedTuple):
    """A lattice neighbour and where its opinion is read from.

    ``source`` is a site inside the region, or a constant opinion for frozen
    boundaries.
    """

    site: Site
    source: Site | int


def neighbors(s, region: Rect, policy: BoundaryPolicy) -> list[Neighbor]:
    s = Site(*s)
    if not region.contains(s):
        raise ValueError(f"site {s} outside region {region}")
    policy = BoundaryPolicy.parse(policy)
    out = []
    for dx, dy in OFFSETS:
        nb = s.shifted(dx, dy)
        if region.contains(nb):
            out.append(Neighbor(nb, nb))
        elif policy is BoundaryPolicy.FREE_FINITE:
            continue
        elif policy is BoundaryPolicy.PERIODIC:
            wrapped = Site(region.x0 + (nb.x - region.x0) % region.width,
                           region.y0 + (nb.y - region.y0) % region.height)
            out.append(Neighbor(nb, wrapped))
        else:
            out.append(Neighbor(nb, policy.frozen_value))
    return out


class SpinConfig:
    """Opinions in ``{0, 1}`` on every site of a rectangle.

    Instances are immutable: the backing array is marked read-only.
    """

    __slots__ = ("region", "_bits")

    def __init__(self, region: Rect, bits):
        bits = np.array(bits, dtype=np.uint8, copy=True)
        if bits.shape != region.shape:
            raise ValueError(f"bits shape {bits.shape} does not match region {region.shape}")
        if bits.size and bits.max() > 1:
            raise ValueError("opinions must be 0 or 1")
        bits.setflags(write=False)
        self.region = region
        self._bits = bits

    @classmethod
    def constant(cls, region: Rect, value: int) -> "SpinConfig":
        return cls(region, np.full(region.shape, value, dtype=np.uint8))

    @classmethod
    def from_sites(cls, region: Rect, open_sites) -> "SpinConfig":
        bits = np.zeros(region.shape, dtype=np.uint8)
        for x, y in open_sites:
            bits[y - region.y0, x - region.x0] = 1
        return cls(region, bits)

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    def __getitem__(self, site) -> int:
        x, y = site
        if not self.region.contains((x, y)):
            raise KeyError(f"site {(x, y)} outside region {self.region}; use read() with a policy")
        return int(self._bits[y - self.region.y0, x - self.region.x0])

    def read(self, site, policy: BoundaryPolicy) -> int | None:
        """Opinion at ``site`` under ``policy``; ``None`` if the site does not exist."""
        x, y = site
        r = self.region
        if r.contains((x, y)):
            return int(self._bits[y - r.y0, x - r.x0])
        policy = BoundaryPolicy.parse(policy)
        if policy is BoundaryPolicy.PERIODIC:
            return int(self._bits[(y - r.y0) % r.height, (x - r.x0) % r.width])
        if policy is BoundaryPolicy.FREE_FINITE:
            return None
        return policy.frozen_value

    def count_ones(self) -> int:
        return int(self._bits.sum())

    def count_zeros(self) -> int:
        return self.region.area - self.count_ones()

    def open_sites(self) -> list[Site]:
        ys, xs = np.nonzero(self._bits)
        return [Site(int(x) + self.region.x0, int(y) + self.region.y0) for y, x in zip(ys, xs)]

    def with_values(self, updates) -> "SpinConfig":
        """Copy with ``{site: opinion}`` updates applied."""
        bits = self._bits.copy()
        for (x, y), v in dict(updates).items():
            bits[y - self.region.y0, x - self.region.x0] = v
        return SpinConfig(self.region, bits)

    def crop(self, rect: Rect) -> "SpinConfig":
        if not self.region.contains_rect(rect):
            raise ValueError(f"{rect} not inside {self.region}")
        r = self.region
        return SpinConfig(rect, self._bits[rect.y0 - r.y0:rect.y1 - r.y0 + 1,
                                           rect.x0 - r.x0:rect.x1 - r.x0 + 1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpinConfig):
            return NotImplemented
        return self.region == other.region and np.array_equal(self._bits, other._bits)

    def __le__(self, other: "SpinConfig") -> bool:
        if self.region != other.region:
            raise ValueError("sitewise order needs a common region")
        return bool(np.all(self._bits <= other._bits))

    def __ge__(self, other: "SpinConfig") -> bool:
        return other <= self

    def __hash__(self) -> int:
        return hash((self.region, self._bits.tobytes()))

    def __repr__(self) -> str:
        return f"SpinConfig({self.region}, ones={self.count_ones()})"

    def to_text(self) -> str:
        r = self.region
        lines = [f"rect {r.x0} {r.x1} {r.y0} {r.y1}"]
        lines.extend("".join("1" if b else "0" for b in row) for row in self._bits)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SpinConfig":
        lines = text.splitlines()
        if not lines:
            raise ValueError("empty configuration text")
        head = lines[0].split()
        if len(head) != 5 or head[0] != "rect":
            raise ValueError(f"bad header line: {lines[0]!r}")
        region = Rect(*(int(v) for v in head[1:]))
        rows = lines[1:]
        if len(rows) != region.height or any(len(row) != region.width for row in rows):
            raise ValueError("row count or width does not match header")
        if any(set(row) - {"0", "1"} for row in rows):
            raise ValueError("rows may only contain '0' and '1'")
        bits = np.array([[c == "1" for c in row] for row in rows], dtype=np.uint8)
        return cls(region, bits.reshape(region.shape))


def random_init(region: Rect, p: float, uniforms) -> SpinConfig:
    """Open each site whose uniform is ``<= p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    uniforms = np.asarray(uniforms, dtype=float)
    if uniforms.shape != region.shape:
        raise ValueError(f"uniform field shape {uniforms.shape} does not match region {region.shape}")
    return SpinConfig(region, uniforms <= p)


def checkerboard(region: Rect, parity: str = "A") -> SpinConfig:
    xs, ys = region.coords()
    on = ((xs + ys) % 2 == 0) if parity == "A" else ((xs + ys) % 2 == 1)
    return SpinConfig(region, on.reshape(region.shape))
