"""Circuit families: sequentially generated (SG) ansatz and three baselines.

The SG circuit over an ordering of ``n`` qubits uses ``k = ceil(log2 R) + 1``:
one block on the first ``k - 1`` positions, then ``n - k + 1`` blocks sliding
over positions ``j .. j + k - 1``. A ``w``-qubit block repeats ``L`` layers of
``w`` random single-qubit rotations followed by a top-down ladder of ``w - 1``
random controlled rotations, so it holds ``L (2w - 1)`` gates, all
parameterised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lattice import LatticeSpec
from .statevector import CONTROLLED_ROTATIONS, ROTATIONS, Circuit, Gate

FAMILIES = ("sg", "he", "ptg", "iqp")
MAX_LINE_VERTICES = 24


@dataclass(frozen=True)
class SgConfig:
    n_qubits: int
    bond: int = 4
    layers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.bond < 2:
            raise ValueError("bond dimension must be >= 2")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.k > self.n_qubits:
            raise ValueError(
                f"block width k={self.k} (bond {self.bond}) exceeds {self.n_qubits} qubits"
            )

    @property
    def k(self) -> int:
        return math.ceil(math.log2(self.bond)) + 1


def sg_gate_count(n_qubits: int, bond: int, layers: int) -> int:
    k = math.ceil(math.log2(bond)) + 1
    return layers * (2 * k - 3) + (n_qubits - k + 1) * layers * (2 * k - 1)


def _sg_block(positions, layers, rng, slot, gates):
    w = len(positions)
    for _ in range(layers):
        for q in positions:
            kind = ROTATIONS[rng.integers(3)]
            gates.append(Gate(kind, (q,), slot))
            slot += 1
        for a, b in zip(positions, positions[1:]):
            kind = CONTROLLED_ROTATIONS[rng.integers(3)]
            gates.append(Gate(kind, (a, b), slot))
            slot += 1
    return slot


def build_sg_1d(cfg: SgConfig, ordering: Sequence[int] | None = None) -> Circuit:
    """SG circuit along ``ordering`` (defaults to ``0 .. n-1``)."""
    n, k = cfg.n_qubits, cfg.k
    order = list(range(n)) if ordering is None else [int(q) for q in ordering]
    if sorted(order) != list(range(n)):
        raise ValueError(f"ordering must be a permutation of 0..{n - 1}")
    rng = np.random.default_rng(cfg.seed)
    gates: list[Gate] = []
    slot = _sg_block(order[: k - 1], cfg.layers, rng, 0, gates)
    for j in range(n - k + 1):
        slot = _sg_block(order[j : j + k], cfg.layers, rng, slot, gates)
    return Circuit(n, tuple(gates))


def line_seeds(seed: int, count: int) -> list[int]:
    """Independent per-line gate-kind seeds derived from one config seed."""
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def build_sg_lines(
    lines: Sequence[Sequence[int]], cfg: SgConfig, seeds: Sequence[int] | None = None
) -> Circuit:
    """Concatenate one SG circuit per line, in order, with disjoint slots."""
    if seeds is None:
        seeds = line_seeds(cfg.seed, len(lines))
    if len(seeds) != len(lines):
        raise ValueError("need one seed per line")
    circuit = Circuit(cfg.n_qubits)
    for line, s in zip(lines, seeds):
        sub = SgConfig(cfg.n_qubits, cfg.bond, cfg.layers, int(s))
        circuit = circuit + build_sg_1d(sub, line)
    return circuit


def snake_lines_2d(spec: LatticeSpec) -> tuple[list[int], list[int]]:
    """Column-wise and row-wise boustrophedon orderings from the top-left vertex."""
    if spec.ndim != 2:
        raise ValueError("snake lines need a 2D lattice")
    n_row, n_col = spec.dims
    col_line = []
    for c in range(n_col):
        rows = range(n_row) if c % 2 == 0 else range(n_row - 1, -1, -1)
        col_line += [spec.vertex(r, c) for r in rows]
    row_line = []
    for r in range(n_row):
        cols = range(n_col) if r % 2 == 0 else range(n_col - 1, -1, -1)
        row_line += [spec.vertex(r, c) for c in cols]
    return col_line, row_line


def build_sg_2d(spec: LatticeSpec, cfg: SgConfig) -> Circuit:
    """Column-snake SG circuit followed by the row-snake one."""
    if cfg.n_qubits != spec.n_vertices:
        raise ValueError(f"config has {cfg.n_qubits} qubits, lattice has {spec.n_vertices}")
    return build_sg_lines(snake_lines_2d(spec), cfg)


def hamiltonian_paths(spec: LatticeSpec, start: int = 0) -> dict[int, list[tuple[int, ...]]]:
    """All Hamiltonian paths from ``start``, grouped by end vertex.

    Depth-first with neighbours visited in ascending order, so each group is
    in lexicographic order.
    """
    n = spec.n_vertices
    adj = spec.neighbours
    full = (1 << n) - 1
    out: dict[int, list[tuple[int, ...]]] = {}
    path = [start]

    def dfs(u: int, visited: int) -> None:
        if visited == full:
            out.setdefault(u, []).append(tuple(path))
            return
        for v in adj[u]:
            if not visited >> v & 1:
                path.append(v)
                dfs(v, visited | 1 << v)
                path.pop()

    if n == 1:
        return {start: [(start,)]}
    dfs(start, 1 << start)
    return out


def line_set_3d(spec: LatticeSpec) -> list[list[int]]:
    """Hamiltonian paths from vertex 0 whose edges jointly cover the lattice.

    The destination is the vertex reached by the most Hamiltonian paths
    (smallest id on ties). Paths ending there are picked greedily by number of
    still-uncovered edges; ties go to the path whose new edges are rarest
    (largest sum of 1 / #paths containing the edge), then to lexicographic
    order.
    """
    n = spec.n_vertices
    if n > MAX_LINE_VERTICES:
        raise ValueError(f"line generation limited to {MAX_LINE_VERTICES} vertices, got {n}")
    by_end = hamiltonian_paths(spec)
    if not by_end:
        raise ValueError(f"lattice {spec} has no Hamiltonian path from vertex 0")
    dest = min(by_end, key=lambda j: (-len(by_end[j]), j))
    paths = by_end[dest]

    edge_id = {e: i for i, e in enumerate(spec.edges)}
    masks = []
    for p in paths:
        m = 0
        for a, b in zip(p, p[1:]):
            m |= 1 << edge_id[(min(a, b), max(a, b))]
        masks.append(m)
    n_edges = len(spec.edges)
    full = (1 << n_edges) - 1
    if n_edges and _or_all(masks) != full:
        raise ValueError(f"paths ending at {dest} do not cover every edge of {spec}")
    counts = [sum(m >> e & 1 for m in masks) for e in range(n_edges)]
    weight = [1.0 / c if c else 0.0 for c in counts]

    chosen: list[int] = []
    covered = 0
    while covered != full or not chosen:
        best, best_key = None, None
        for i, m in enumerate(masks):
            new = m & ~covered
            gain = bin(new).count("1")
            key = (gain, round(sum(weight[e] for e in range(n_edges) if new >> e & 1), 12))
            if best_key is None or key > best_key:
                best, best_key = i, key
        chosen.append(best)
        covered |= masks[best]
    return [list(paths[i]) for i in chosen]


def _or_all(masks):
    out = 0
    for m in masks:
        out |= m
    return out


def check_line_cover(spec: LatticeSpec, lines: Sequence[Sequence[int]]) -> None:
    """Assert every line is a Hamiltonian path and all edges are covered."""
    n = spec.n_vertices
    seen = set()
    for line in lines:
        if sorted(line) != list(range(n)):
            raise AssertionError(f"line {list(line)} is not a permutation of the vertices")
        for a, b in zip(line, line[1:]):
            if not spec.is_edge(a, b):
                raise AssertionError(f"({a}, {b}) in line {list(line)} is not a lattice edge")
            seen.add((min(a, b), max(a, b)))
    missing = set(spec.edges) - seen
    if missing:
        raise AssertionError(f"edges not covered: {sorted(missing)}")


def build_sg_3d(spec: LatticeSpec, cfg: SgConfig) -> Circuit:
    if cfg.n_qubits != spec.n_vertices:
        raise ValueError(f"config has {cfg.n_qubits} qubits, lattice has {spec.n_vertices}")
    return build_sg_lines(line_set_3d(spec), cfg)


def build_he(n_qubits: int, layers: int, seed: int = 0) -> Circuit:
    """Hardware-efficient: RY and RZ on every qubit, then a CNOT ladder, per layer.

    ``seed`` is accepted for a uniform builder signature; the circuit is fixed.
    """
    gates, slot = [], 0
    for _ in range(layers):
        for q in range(n_qubits):
            gates.append(Gate("RY", (q,), slot))
            gates.append(Gate("RZ", (q,), slot + 1))
            slot += 2
        gates += [Gate("CNOT", (q, q + 1)) for q in range(n_qubits - 1)]
    return Circuit(n_qubits, tuple(gates))


def build_ptg(n_qubits: int, layers: int, seed: int = 0) -> Circuit:
    """One random single-qubit rotation per qubit, then PISWAP on each adjacent pair."""
    rng = np.random.default_rng(seed)
    gates, slot = [], 0
    for _ in range(layers):
        for q in range(n_qubits):
            gates.append(Gate(ROTATIONS[rng.integers(3)], (q,), slot))
            slot += 1
        for q in range(n_qubits - 1):
            gates.append(Gate("PISWAP", (q, q + 1), slot))
            slot += 1
    return Circuit(n_qubits, tuple(gates))


def build_iqp(n_qubits: int, layers: int, seed: int = 0, reverse_pairs: bool = False) -> Circuit:
    """Hadamard wall, ``layers`` of RZ + nearest-neighbour ZZ(theta), Hadamard wall.

    ``reverse_pairs`` lists each layer's ZZ interactions back to front; all
    middle gates are diagonal, so the unitary is the same.
    """
    gates = [Gate("H", (q,)) for q in range(n_qubits)]
    slot = 0
    # slot of each ZZ term is tied to its pair, not to its position in the layer
    pairs = list(enumerate((q, q + 1) for q in range(n_qubits - 1)))
    if reverse_pairs:
        pairs.reverse()
    for _ in range(layers):
        for q in range(n_qubits):
            gates.append(Gate("RZ", (q,), slot))
            slot += 1
        for i, (a, b) in pairs:
            gates += [Gate("CNOT", (a, b)), Gate("RZ", (b,), slot + i), Gate("CNOT", (a, b))]
        slot += n_qubits - 1
    gates += [Gate("H", (q,)) for q in range(n_qubits)]
    return Circuit(n_qubits, tuple(gates))


def make_ansatz(
    family: str,
    n_qubits: int,
    layers: int,
    seed: int = 0,
    bond: int = 4,
    lattice: LatticeSpec | None = None,
) -> Circuit:
    """Build any family; SG follows the lattice geometry when one is given."""
    if family == "sg":
        cfg = SgConfig(n_qubits, bond, layers, seed)
        if lattice is None or lattice.ndim == 2 and 1 in lattice.dims:
            return build_sg_1d(cfg)
        if lattice.ndim == 2:
            return build_sg_2d(lattice, cfg)
        return build_sg_3d(lattice, cfg)
    if family == "he":
        return build_he(n_qubits, layers, seed)
    if family == "ptg":
        return build_ptg(n_qubits, layers, seed)
    if family == "iqp":
        return build_iqp(n_qubits, layers, seed)
    raise ValueError(f"unknown ansatz family {family!r}; choose from {FAMILIES}")
