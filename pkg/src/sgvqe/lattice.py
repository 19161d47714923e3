"""Open-boundary grid lattices.

2D specs are ``(n_row, n_col)`` with row-major vertex ids ``r * n_col + c``.
3D specs are ``(n_len, n_wid, n_hei)`` with layer-major ids
``(h * n_wid + w) * n_len + l``, so each height layer is a contiguous block.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property


@dataclass(frozen=True)
class LatticeSpec:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) not in (2, 3):
            raise ValueError(f"lattice must be 2D or 3D, got dims {dims}")
        if min(dims) < 1:
            raise ValueError(f"lattice dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def parse(cls, text: str) -> "LatticeSpec":
        """``LatticeSpec.parse("3x4")`` or ``"2x2x2"``."""
        return cls(tuple(int(p) for p in text.lower().replace(",", "x").split("x")))

    @property
    def n_vertices(self) -> int:
        out = 1
        for d in self.dims:
            out *= d
        return out

    @property
    def ndim(self) -> int:
        return len(self.dims)

    def __str__(self) -> str:
        return "x".join(map(str, self.dims))

    def vertex(self, *coords: int) -> int:
        if self.ndim == 2:
            r, c = coords
            return r * self.dims[1] + c
        l, w, h = coords
        n_len, n_wid, _ = self.dims
        return (h * n_wid + w) * n_len + l

    def coords(self) -> list[tuple[int, ...]]:
        """Coordinates of every vertex, indexed by vertex id."""
        out = [None] * self.n_vertices
        for c in itertools.product(*(range(d) for d in self.dims)):
            out[self.vertex(*c)] = c
        return out

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Nearest-neighbour pairs ``(u, v)`` with ``u < v``, sorted."""
        out = []
        for c in itertools.product(*(range(d) for d in self.dims)):
            u = self.vertex(*c)
            for axis in range(self.ndim):
                if c[axis] + 1 < self.dims[axis]:
                    nxt = list(c)
                    nxt[axis] += 1
                    v = self.vertex(*nxt)
                    out.append((min(u, v), max(u, v)))
        return tuple(sorted(out))

    @cached_property
    def neighbours(self) -> tuple[tuple[int, ...], ...]:
        adj = [[] for _ in range(self.n_vertices)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    def is_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._edge_set

    @cached_property
    def _edge_set(self) -> frozenset:
        return frozenset(self.edges)
