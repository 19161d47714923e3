"""Pauli-string Hamiltonians, reduced density matrices and ground energies.

Text format, one term per line::

    qubits: 3
    # comment
    -1.0 Z0 Z1
    0.5 X2
    -0.25          # identity term

Vectors use the same ordering as :mod:`sgvqe.statevector` (qubit 0 is the
most significant index bit).
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

log = logging.getLogger(__name__)

DENSE_LIMIT = 12
LANCZOS_LIMIT = 26
# diagonal caches larger than this (bytes) are rebuilt on every product
_CACHE_BUDGET = 512 * 2**20


@dataclass(frozen=True)
class PauliTerm:
    coefficient: float
    ops: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        ops = tuple(sorted((int(q), str(p).upper()) for q, p in self.ops))
        qubits = [q for q, _ in ops]
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"duplicate qubit in Pauli term {ops}")
        for q, p in ops:
            if p not in "XYZ" or len(p) != 1:
                raise ValueError(f"unknown Pauli {p!r}")
            if q < 0:
                raise ValueError(f"negative qubit index {q}")
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @classmethod
    def parse(cls, coefficient: float, word: str) -> "PauliTerm":
        """``PauliTerm.parse(-1.0, "Z0 Z1")``."""
        return cls(coefficient, tuple((int(w[1:]), w[0]) for w in word.split()))

    def label(self) -> str:
        return " ".join(f"{p}{q}" for q, p in self.ops)


@dataclass(frozen=True)
class PauliSum:
    """Real-weighted sum of Pauli strings in canonical form.

    Terms with identical operators are merged and exact zeros dropped, so
    two equal operators compare equal.
    """

    n_qubits: int
    terms: tuple[PauliTerm, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        merged: dict[tuple, float] = defaultdict(float)
        for t in self.terms:
            if t.ops and t.ops[-1][0] >= self.n_qubits:
                raise ValueError(f"term {t.label()} exceeds {self.n_qubits} qubits")
            merged[t.ops] += t.coefficient
        terms = tuple(
            PauliTerm(c, ops)
            for ops, c in sorted(merged.items(), key=lambda kv: (len(kv[0]), kv[0]))
            if c != 0.0
        )
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_dict(cls, n_qubits: int, terms: Mapping[str, float]) -> "PauliSum":
        """``PauliSum.from_dict(2, {"Z0 Z1": -1.0, "": 0.5})``."""
        return cls(n_qubits, tuple(PauliTerm.parse(c, w) for w, c in terms.items()))

    @classmethod
    def identity(cls, n_qubits: int, coefficient: float = 1.0) -> "PauliSum":
        return cls(n_qubits, (PauliTerm(coefficient),))

    def to_dict(self) -> dict[str, float]:
        return {t.label(): t.coefficient for t in self.terms}

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit counts differ")
        return PauliSum(self.n_qubits, self.terms + other.terms)

    def __mul__(self, scalar: float) -> "PauliSum":
        return PauliSum(self.n_qubits, tuple(PauliTerm(t.coefficient * scalar, t.ops) for t in self.terms))

    __rmul__ = __mul__

    def __len__(self) -> int:
        return len(self.terms)

    # -- text format -------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"qubits: {self.n_qubits}"]
        for t in self.terms:
            lines.append(f"{t.coefficient!r} {t.label()}".rstrip())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PauliSum":
        n_qubits = None
        terms = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.lower().startswith("qubits:"):
                try:
                    n_qubits = int(line.split(":", 1)[1])
                except ValueError:
                    raise ValueError(f"line {lineno}: bad qubit count {raw!r}") from None
                continue
            coef, _, rest = line.partition(" ")
            try:
                c = float(coef)
            except ValueError:
                raise ValueError(f"line {lineno}: malformed coefficient {coef!r}") from None
            try:
                term = PauliTerm.parse(c, rest)
            except (ValueError, IndexError) as exc:
                raise ValueError(f"line {lineno}: bad operator list {rest!r}: {exc}") from None
            terms.append((lineno, term))
        if n_qubits is None:
            raise ValueError("missing 'qubits: <n>' header")
        for lineno, term in terms:
            if term.ops and term.ops[-1][0] >= n_qubits:
                raise ValueError(
                    f"line {lineno}: qubit index {term.ops[-1][0]} >= declared {n_qubits}"
                )
        return cls(n_qubits, tuple(t for _, t in terms))

    # -- matrix-free action -----------------------------------------------

    def _groups(self) -> list[tuple[tuple[int, ...], list[PauliTerm]]]:
        groups: dict[tuple[int, ...], list[PauliTerm]] = defaultdict(list)
        for t in self.terms:
            flips = tuple(q for q, p in t.ops if p in "XY")
            groups[flips].append(t)
        return sorted(groups.items())

    def _diagonal(self, terms: Iterable[PauliTerm]) -> np.ndarray:
        n = self.n_qubits
        sign = np.array([1.0, -1.0])
        total = np.zeros((2,) * n, dtype=complex)
        for t in terms:
            phase = t.coefficient * (1j ** sum(p == "Y" for _, p in t.ops))
            d = np.full((1,) * n, phase)
            for q, p in t.ops:
                if p in "YZ":
                    shape = [1] * n
                    shape[q] = 2
                    d = d * sign.reshape(shape)
            total += d
        if not np.any(total.imag):
            total = total.real.copy()
        return total

    @cached_property
    def _cached(self):
        groups = self._groups()
        if len(groups) * 16 * 2**self.n_qubits > _CACHE_BUDGET:
            return None
        return [(flips, self._diagonal(terms)) for flips, terms in groups]

    @property
    def is_real(self) -> bool:
        """True when the matrix in the computational basis is real."""
        return all(sum(p == "Y" for _, p in t.ops) % 2 == 0 for t in self.terms)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """``H |v>`` without normalisation."""
        n = self.n_qubits
        if v.shape != (2**n,):
            raise ValueError(f"vector of shape {v.shape} does not match {n} qubits")
        t = v.reshape((2,) * n)
        out = np.zeros((2,) * n, dtype=np.result_type(v.dtype, complex if not self.is_real else float))
        cached = self._cached
        pairs = cached if cached is not None else (
            (flips, self._diagonal(terms)) for flips, terms in self._groups()
        )
        for flips, diag in pairs:
            w = diag * t
            out += np.flip(w, axis=flips) if flips else w
        return out.reshape(-1)

    def expectation(self, v: np.ndarray) -> float:
        return float(np.vdot(v, self.apply(v)).real)

    def to_matrix(self) -> np.ndarray:
        """Dense ``2**n x 2**n`` matrix."""
        n = self.n_qubits
        if n > DENSE_LIMIT:
            raise ValueError(f"dense matrix limited to {DENSE_LIMIT} qubits, got {n}")
        dim = 2**n
        idx = np.arange(dim)
        mat = np.zeros((dim, dim), dtype=float if self.is_real else complex)
        for flips, terms in self._groups():
            diag = self._diagonal(terms).reshape(-1)
            mask = sum(1 << (n - 1 - q) for q in flips)
            mat[idx ^ mask, idx] += diag
        return mat


def apply_pauli_sum(h: PauliSum, v: np.ndarray) -> np.ndarray:
    return h.apply(v)


class LanczosError(RuntimeError):
    """Lanczos failed to converge; ``estimate`` holds the best Ritz value."""

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


def ground_energy_dense(h: PauliSum) -> float:
    if h.n_qubits > DENSE_LIMIT:
        raise ValueError(f"dense eigensolve limited to {DENSE_LIMIT} qubits, got {h.n_qubits}")
    return float(np.linalg.eigvalsh(h.to_matrix())[0])


def ground_energy_lanczos(
    h: PauliSum,
    tol: float = 1e-9,
    max_iter: int = 500,
    seed: int = 0,
    krylov_dim: int = 120,
) -> float:
    """Lowest eigenvalue by matrix-free Lanczos.

    Full reorthogonalisation against the current Krylov basis; when the basis
    reaches ``krylov_dim`` vectors it restarts from the current Ritz vector.
    Converged when the Ritz residual ``|beta * s_last|`` drops below
    ``tol * max(1, |theta|)``. ``max_iter`` bounds the total number of
    products with ``h``.
    """
    n = h.n_qubits
    if n > LANCZOS_LIMIT:
        raise ValueError(f"Lanczos limited to {LANCZOS_LIMIT} qubits, got {n}")
    dim = 2**n
    if not h.terms:
        return 0.0
    rng = np.random.default_rng(seed)
    dtype = float if h.is_real else complex
    v = rng.standard_normal(dim)
    if dtype is complex:
        v = v + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    krylov_dim = max(2, min(krylov_dim, dim))

    n_matvec = 0
    best = np.inf
    while True:
        basis = np.empty((krylov_dim, dim), dtype=dtype)
        alphas, betas = [], []
        basis[0] = v
        theta, ritz = None, None
        for j in range(krylov_dim):
            w = h.apply(basis[j])
            n_matvec += 1
            if dtype is float:
                w = w.real
            alpha = float(np.vdot(basis[j], w).real)
            alphas.append(alpha)
            for _ in range(2):
                w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
            beta = float(np.linalg.norm(w))
            evals, evecs = _tridiagonal_eigh(alphas, betas)
            theta, s = evals[0], evecs[:, 0]
            best = min(best, theta)
            residual = abs(beta * s[-1])
            if residual <= tol * max(1.0, abs(theta)) or beta < 1e-14:
                return float(theta)
            if n_matvec >= max_iter:
                raise LanczosError(
                    f"Lanczos did not converge in {max_iter} products (residual {residual:.3e})",
                    float(best),
                )
            if j + 1 < krylov_dim:
                basis[j + 1] = w / beta
                betas.append(beta)
        ritz = s @ basis
        v = ritz / np.linalg.norm(ritz)
        log.debug("Lanczos restart after %d products, theta=%.12f", n_matvec, theta)


def _tridiagonal_eigh(alphas, betas):
    m = len(alphas)
    t = np.diag(alphas)
    if m > 1:
        off = np.asarray(betas[: m - 1])
        t += np.diag(off, 1) + np.diag(off, -1)
    return np.linalg.eigh(t)


def resolve_method(h: PauliSum, method: str = "auto") -> str:
    """``auto`` picks dense diagonalisation up to 10 qubits, Lanczos beyond."""
    if method == "auto":
        return "dense" if h.n_qubits <= 10 else "lanczos"
    if method not in ("dense", "lanczos"):
        raise ValueError(f"unknown eigensolver {method!r}")
    return method


def ground_energy(h: PauliSum, method: str = "auto", **kwargs) -> float:
    method = resolve_method(h, method)
    if method == "dense":
        return ground_energy_dense(h)
    return ground_energy_lanczos(h, **kwargs)


# -- density matrices --------------------------------------------------------


def partial_trace(state: np.ndarray, keep: Iterable[int]) -> np.ndarray:
    """Reduced density matrix on ``keep`` (ordered by ascending qubit index)."""
    size = state.shape[0]
    n = size.bit_length() - 1
    keep = sorted(set(int(q) for q in keep))
    if not keep:
        raise ValueError("keep set must be non-empty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"keep set {keep} invalid for {n} qubits")
    t = np.moveaxis(state.reshape((2,) * n), keep, range(len(keep)))
    m = t.reshape(2 ** len(keep), -1)
    return m @ m.conj().T


def purity(rho: np.ndarray) -> float:
    return float(np.sum(np.abs(rho) ** 2))


def mixed_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``|Tr(rho sigma)| / sqrt(Tr rho^2 Tr sigma^2)``: a normalised overlap,
    not the Uhlmann fidelity."""
    if rho.shape != sigma.shape:
        raise ValueError(f"density matrix shapes differ: {rho.shape} vs {sigma.shape}")
    overlap = abs(np.sum(rho * sigma.T))
    return float(overlap / np.sqrt(purity(rho) * purity(sigma)))


def check_density_matrix(rho: np.ndarray, atol: float = 1e-10) -> None:
    """Raise ``ValueError`` unless ``rho`` is Hermitian, unit-trace and PSD."""
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if not np.allclose(rho, rho.conj().T, atol=atol, rtol=0):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > atol:
        raise ValueError(f"trace {np.trace(rho)} != 1")
    if np.linalg.eigvalsh(rho)[0] < -1e-9:
        raise ValueError("density matrix has a negative eigenvalue")
