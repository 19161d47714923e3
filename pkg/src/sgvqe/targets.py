"""Random reconstruction targets: bounded-bond MPS states and their mixtures."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAX_DENSE_SITES = 20
MAX_MIXED_QUBITS = 10


@dataclass(frozen=True)
class Mps:
    """Open-boundary MPS; site ``i`` holds a ``(chi_{i-1}, 2, chi_i)`` tensor."""

    tensors: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "tensors", tuple(np.asarray(t, dtype=complex) for t in self.tensors))
        ts = self.tensors
        if not ts:
            raise ValueError("MPS needs at least one site")
        if ts[0].shape[0] != 1 or ts[-1].shape[2] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        for a, b in zip(ts, ts[1:]):
            if a.shape[2] != b.shape[0]:
                raise ValueError(f"bond mismatch between {a.shape} and {b.shape}")
        for t in ts:
            if t.ndim != 3 or t.shape[1] != 2:
                raise ValueError(f"site tensor must be (l, 2, r), got {t.shape}")

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]


def random_mps(n: int, bond: int, seed=None) -> Mps:
    """Complex-Gaussian site tensors with bonds ``min(R, 2^i, 2^(n-i))``."""
    if bond < 1:
        raise ValueError("bond dimension must be >= 1")
    rng = np.random.default_rng(seed)
    chis = [1] + [min(bond, 2**i, 2 ** (n - i)) for i in range(1, n)] + [1]
    tensors = []
    for i in range(n):
        shape = (chis[i], 2, chis[i + 1])
        tensors.append(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return Mps(tuple(tensors))


def mps_to_statevector(mps: Mps) -> np.ndarray:
    """Contract left to right and normalise; site 0 is the most significant qubit."""
    if mps.n_sites > MAX_DENSE_SITES:
        raise ValueError(f"dense contraction limited to {MAX_DENSE_SITES} sites")
    psi = mps.tensors[0].reshape(2, -1)
    for t in mps.tensors[1:]:
        chi_l, _, chi_r = t.shape
        psi = (psi @ t.reshape(chi_l, 2 * chi_r)).reshape(-1, chi_r)
    psi = psi.reshape(-1)
    return psi / np.linalg.norm(psi)


def random_mixed_target(n: int, mixture: int, bond: int, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """``rho = sum_j p_j |psi_j><psi_j|`` over ``mixture`` random MPS states.

    Weights are uniform draws normalised to sum to one.
    """
    if mixture < 1:
        raise ValueError("mixture rank must be >= 1")
    if n > MAX_MIXED_QUBITS:
        raise ValueError(f"dense mixed targets limited to {MAX_MIXED_QUBITS} qubits")
    ss = np.random.SeedSequence(seed)
    weight_seed, *state_seeds = ss.spawn(mixture + 1)
    weights = np.random.default_rng(weight_seed).uniform(0.0, 1.0, mixture)
    weights /= weights.sum()
    rho = np.zeros((2**n, 2**n), dtype=complex)
    for p, s in zip(weights, state_seeds):
        psi = mps_to_statevector(random_mps(n, bond, s))
        rho += p * np.outer(psi, psi.conj())
    return rho, weights


def ancilla_count(mixture: int) -> int:
    """Purification ancillas for a rank-``mixture`` target: ``ceil(log2 M)``."""
    return int(np.ceil(np.log2(mixture))) if mixture > 1 else 0


def save_amplitudes(path, amplitudes: np.ndarray) -> None:
    """Little-endian ``uint64`` length, then interleaved ``float64`` re/im pairs."""
    a = np.ascontiguousarray(amplitudes, dtype="<c16").reshape(-1)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", a.size))
        fh.write(a.view("<f8").tobytes())


def load_amplitudes(path) -> np.ndarray:
    data = Path(path).read_bytes()
    (size,) = struct.unpack_from("<Q", data)
    body = np.frombuffer(data, dtype="<f8", offset=8)
    if body.size != 2 * size:
        raise ValueError(f"{path}: header says {size} amplitudes, body holds {body.size // 2}")
    return body.view("<c16").astype(complex)
