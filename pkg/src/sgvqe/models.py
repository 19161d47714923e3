"""Model Hamiltonians, all with open boundaries."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .lattice import LatticeSpec
from .pauli import PauliSum, PauliTerm


@dataclass(frozen=True)
class IsingParams:
    """``J`` sets the energy scale; ``coupling`` is gamma (1D) or g (lattices)."""

    J: float = 1.0
    coupling: float = 0.5

    def __post_init__(self):
        if self.J == 0:
            raise ValueError("J must be non-zero")


def ising_1d(n: int, params: IsingParams = IsingParams()) -> PauliSum:
    """``H = -J (sum Z_i Z_{i+1} + gamma sum X_i)``."""
    if n < 2:
        raise ValueError("1D Ising chain needs n >= 2")
    J, gamma = params.J, params.coupling
    terms = [PauliTerm(-J, ((i, "Z"), (i + 1, "Z"))) for i in range(n - 1)]
    terms += [PauliTerm(-J * gamma, ((i, "X"),)) for i in range(n)]
    return PauliSum(n, tuple(terms))


def xxz_1d(n: int, params: IsingParams = IsingParams()) -> PauliSum:
    """``H = -J sum (X_i X_{i+1} + Y_i Y_{i+1} + gamma Z_i Z_{i+1})``."""
    if n < 2:
        raise ValueError("XXZ chain needs n >= 2")
    J, gamma = params.J, params.coupling
    terms = []
    for i in range(n - 1):
        terms.append(PauliTerm(-J, ((i, "X"), (i + 1, "X"))))
        terms.append(PauliTerm(-J, ((i, "Y"), (i + 1, "Y"))))
        terms.append(PauliTerm(-J * gamma, ((i, "Z"), (i + 1, "Z"))))
    return PauliSum(n, tuple(terms))


def ising_lattice(spec: LatticeSpec, params: IsingParams = IsingParams()) -> PauliSum:
    """``H = -J sum_<ij> Z_i Z_j - g sum_j X_j`` on a 2D or 3D grid."""
    n = spec.n_vertices
    terms = [PauliTerm(-params.J, ((u, "Z"), (v, "Z"))) for u, v in spec.edges]
    terms += [PauliTerm(-params.coupling, ((j, "X"),)) for j in range(n)]
    return PauliSum(n, tuple(terms))


def load_pauli_file(path) -> PauliSum:
    text = Path(path).read_text()
    try:
        return PauliSum.from_text(text)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def save_pauli_file(h: PauliSum, path) -> None:
    Path(path).write_text(h.to_text())
