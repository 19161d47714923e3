"""Dense statevector simulation.

States are plain ``complex128`` numpy arrays of length ``2**n``. Qubit 0 is the
most significant bit of the basis-state index, so amplitude ``psi[i]`` belongs
to the bitstring ``format(i, f"0{n}b")`` read left to right as qubits
``0 .. n-1``. Every kernel below works on the ``(2,) * n`` tensor view of the
array, indexing one axis per qubit.

Rotation conventions: ``R_P(t) = exp(-i t P / 2)``; ``CR_P(t)`` applies
``R_P(t)`` to the target when the control is ``|1>``; ``PISWAP(t)`` acts on
``span{|01>, |10>}`` as ``[[cos t, i sin t], [i sin t, cos t]]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .pauli import PauliSum

ROTATIONS = ("RX", "RY", "RZ")
CONTROLLED_ROTATIONS = ("CRX", "CRY", "CRZ")
PARAMETERIZED = frozenset(ROTATIONS + CONTROLLED_ROTATIONS + ("PISWAP",))
FIXED = frozenset(("CNOT", "H"))
ARITY = {
    "RX": 1, "RY": 1, "RZ": 1, "H": 1,
    "CRX": 2, "CRY": 2, "CRZ": 2, "CNOT": 2, "PISWAP": 2,
}

_SQRT_HALF = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class Gate:
    """One gate instance: kind, qubits (control first) and parameter slot."""

    kind: str
    qubits: tuple[int, ...]
    param: int | None = None

    def __post_init__(self):
        if self.kind not in ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != ARITY[self.kind]:
            raise ValueError(f"{self.kind} takes {ARITY[self.kind]} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated qubit in {self.kind}{self.qubits}")
        if min(self.qubits) < 0:
            raise ValueError(f"negative qubit index in {self.kind}{self.qubits}")
        if self.kind in PARAMETERIZED and self.param is None:
            raise ValueError(f"{self.kind} requires a parameter slot")
        if self.kind in FIXED and self.param is not None:
            raise ValueError(f"{self.kind} takes no parameter")

    def to_text(self) -> str:
        words = [self.kind, *map(str, self.qubits)]
        if self.param is not None:
            words.append(f"p{self.param}")
        return " ".join(words)


@dataclass(frozen=True)
class Circuit:
    """An ordered gate list on ``n_qubits`` qubits.

    Parameter slots must be exactly ``0 .. n_params - 1``; several gates may
    share one slot.
    """

    n_qubits: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.n_qubits < 1:
            raise ValueError("a circuit needs at least one qubit")
        slots = set()
        for g in self.gates:
            if max(g.qubits) >= self.n_qubits:
                raise ValueError(f"gate {g.to_text()} out of range for {self.n_qubits} qubits")
            if g.param is not None:
                slots.add(g.param)
        if slots != set(range(len(slots))):
            raise ValueError("parameter slots must be exactly 0..n_params-1")
        object.__setattr__(self, "_n_params", len(slots))

    @property
    def n_params(self) -> int:
        return self._n_params

    def gate_count(self) -> int:
        return len(self.gates)

    def __len__(self) -> int:
        return len(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        """Run ``self`` then ``other``; ``other``'s slots are shifted past ours."""
        if other.n_qubits != self.n_qubits:
            raise ValueError("cannot concatenate circuits of different widths")
        shift = self.n_params
        moved = [
            g if g.param is None else Gate(g.kind, g.qubits, g.param + shift)
            for g in other.gates
        ]
        return Circuit(self.n_qubits, self.gates + tuple(moved))

    def to_text(self) -> str:
        lines = [f"qubits: {self.n_qubits}", f"params: {self.n_params}"]
        lines += [g.to_text() for g in self.gates]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        n_qubits = n_params = None
        gates = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("qubits:"):
                n_qubits = int(line.split(":", 1)[1])
                continue
            if line.startswith("params:"):
                n_params = int(line.split(":", 1)[1])
                continue
            words = line.split()
            try:
                param = None
                if words[-1].startswith("p"):
                    param = int(words.pop()[1:])
                gates.append(Gate(words[0], tuple(int(w) for w in words[1:]), param))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"line {lineno}: cannot parse gate {raw!r}: {exc}") from exc
        if n_qubits is None:
            raise ValueError("missing 'qubits:' header")
        circuit = cls(n_qubits, tuple(gates))
        if n_params is not None and n_params != circuit.n_params:
            raise ValueError(f"header declares {n_params} params, gates use {circuit.n_params}")
        return circuit


def zero_state(n_qubits: int) -> np.ndarray:
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[0] = 1.0
    return psi


def n_qubits_of(state: np.ndarray) -> int:
    size = state.shape[0]
    n = size.bit_length() - 1
    if size < 2 or 1 << n != size:
        raise ValueError(f"state length {size} is not a power of two >= 2")
    return n


@lru_cache(maxsize=None)
def _index(n: int, fixed: tuple[tuple[int, int], ...]) -> tuple:
    idx = [slice(None)] * n
    for q, bit in fixed:
        idx[q] = bit
    return tuple(idx)


def _apply_2x2(t, n, q, m, ctrl=None, diagonal=False):
    fix0 = ((q, 0),) if ctrl is None else ((ctrl, 1), (q, 0))
    fix1 = ((q, 1),) if ctrl is None else ((ctrl, 1), (q, 1))
    i0, i1 = _index(n, fix0), _index(n, fix1)
    if diagonal:
        t[i0] *= m[0]
        t[i1] *= m[1]
        return
    a0 = t[i0].copy()
    a1 = t[i1]
    t[i0] = m[0, 0] * a0 + m[0, 1] * a1
    t[i1] = m[1, 0] * a0 + m[1, 1] * a1


def _rotation(kind: str, theta: float):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    if kind == "X":
        return np.array([[c, -1j * s], [-1j * s, c]]), False
    if kind == "Y":
        return np.array([[c, -s], [s, c]], dtype=complex), False
    return np.array([np.exp(-0.5j * theta), np.exp(0.5j * theta)]), True


_HADAMARD = np.array([[_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, -_SQRT_HALF]], dtype=complex)


def _apply_inplace(t: np.ndarray, n: int, gate: Gate, theta: float | None) -> None:
    kind, qs = gate.kind, gate.qubits
    if kind in ROTATIONS:
        m, diag = _rotation(kind[1], theta)
        _apply_2x2(t, n, qs[0], m, diagonal=diag)
    elif kind in CONTROLLED_ROTATIONS:
        m, diag = _rotation(kind[2], theta)
        _apply_2x2(t, n, qs[1], m, ctrl=qs[0], diagonal=diag)
    elif kind == "H":
        _apply_2x2(t, n, qs[0], _HADAMARD)
    elif kind == "CNOT":
        c, q = qs
        i0 = _index(n, ((c, 1), (q, 0)))
        i1 = _index(n, ((c, 1), (q, 1)))
        tmp = t[i0].copy()
        t[i0] = t[i1]
        t[i1] = tmp
    elif kind == "PISWAP":
        a, b = qs
        i01 = _index(n, tuple(sorted(((a, 0), (b, 1)))))
        i10 = _index(n, tuple(sorted(((a, 1), (b, 0)))))
        c, s = np.cos(theta), 1j * np.sin(theta)
        x = t[i01].copy()
        y = t[i10]
        t[i01] = c * x + s * y
        t[i10] = s * x + c * y
    else:  # pragma: no cover - Gate validates kinds
        raise ValueError(kind)


def _check_theta(gate: Gate, theta) -> None:
    if gate.param is None and theta is not None:
        raise ValueError(f"{gate.kind} takes no angle")
    if gate.param is not None and theta is None:
        raise ValueError(f"{gate.kind} needs an angle")


def apply_gate(state: np.ndarray, gate: Gate, theta: float | None = None) -> np.ndarray:
    """Return ``U_gate(theta) |state>`` as a new array."""
    _check_theta(gate, theta)
    n = n_qubits_of(state)
    if max(gate.qubits) >= n:
        raise ValueError(f"gate {gate.to_text()} out of range for {n} qubits")
    out = np.array(state, dtype=complex)
    _apply_inplace(out.reshape((2,) * n), n, gate, theta)
    return out


def _check_params(circuit: Circuit, params) -> np.ndarray:
    params = np.asarray(params, dtype=float).reshape(-1)
    if params.shape[0] != circuit.n_params:
        raise ValueError(f"circuit has {circuit.n_params} parameters, got {params.shape[0]}")
    return params


def _check_initial(circuit: Circuit, initial) -> np.ndarray:
    if initial is None:
        return zero_state(circuit.n_qubits)
    if n_qubits_of(initial) != circuit.n_qubits:
        raise ValueError("initial state width does not match circuit")
    return np.array(initial, dtype=complex)


def run_circuit(circuit: Circuit, params: Sequence[float], initial: np.ndarray | None = None) -> np.ndarray:
    """Apply ``circuit`` to ``initial`` (default ``|0...0>``)."""
    params = _check_params(circuit, params)
    psi = _check_initial(circuit, initial)
    n = circuit.n_qubits
    t = psi.reshape((2,) * n)
    for g in circuit.gates:
        _apply_inplace(t, n, g, None if g.param is None else params[g.param])
    return psi


def inner_product(a: np.ndarray, b: np.ndarray) -> complex:
    """``<a|b>``."""
    if a.shape != b.shape:
        raise ValueError(f"state sizes differ: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def expectation(state: np.ndarray, observable: PauliSum) -> float:
    if observable.n_qubits != n_qubits_of(state):
        raise ValueError(
            f"observable acts on {observable.n_qubits} qubits, state has {n_qubits_of(state)}"
        )
    value = np.vdot(state, observable.apply(state))
    assert abs(value.imag) < 1e-10 * max(1.0, abs(value.real)), value
    return float(value.real)


def _generator_overlap(lam_t, psi_t, n, gate: Gate) -> complex:
    """``<lam| A |psi>`` for the generator ``A`` with ``U = exp(-i theta A)``."""
    kind, qs = gate.kind, gate.qubits
    if kind == "PISWAP":
        a, b = qs
        i01 = _index(n, tuple(sorted(((a, 0), (b, 1)))))
        i10 = _index(n, tuple(sorted(((a, 1), (b, 0)))))
        return -(np.vdot(lam_t[i01], psi_t[i10]) + np.vdot(lam_t[i10], psi_t[i01]))
    if kind in ROTATIONS:
        axis, q, ctrl = kind[1], qs[0], ()
    else:
        axis, q, ctrl = kind[2], qs[1], ((qs[0], 1),)
    i0 = _index(n, tuple(sorted(ctrl + ((q, 0),))))
    i1 = _index(n, tuple(sorted(ctrl + ((q, 1),))))
    if axis == "X":
        z = np.vdot(lam_t[i0], psi_t[i1]) + np.vdot(lam_t[i1], psi_t[i0])
    elif axis == "Y":
        z = -1j * np.vdot(lam_t[i0], psi_t[i1]) + 1j * np.vdot(lam_t[i1], psi_t[i0])
    else:
        z = np.vdot(lam_t[i0], psi_t[i0]) - np.vdot(lam_t[i1], psi_t[i1])
    return 0.5 * z


CotangentFn = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


def backprop(circuit: Circuit, params, cotangent: CotangentFn, initial=None) -> tuple[float, np.ndarray]:
    """Adjoint-mode gradient of a scalar function of the output state.

    ``cotangent(psi)`` must return ``(value, lam)`` such that the derivative
    of ``value`` along any state perturbation ``d psi`` is ``2 Re <lam|d psi>``
    (for an observable ``O`` this is ``lam = O psi``). One forward sweep plus
    one backward sweep that un-applies each gate to both vectors.
    """
    params = _check_params(circuit, params)
    n = circuit.n_qubits
    psi = run_circuit(circuit, params, initial)
    value, lam = cotangent(psi)
    lam = np.array(lam, dtype=complex)
    grad = np.zeros(circuit.n_params)
    psi_t = psi.reshape((2,) * n)
    lam_t = lam.reshape((2,) * n)
    for g in reversed(circuit.gates):
        if g.param is None:
            _apply_inplace(psi_t, n, g, None)
            _apply_inplace(lam_t, n, g, None)
            continue
        theta = params[g.param]
        grad[g.param] += 2.0 * _generator_overlap(lam_t, psi_t, n, g).imag
        _apply_inplace(psi_t, n, g, -theta)
        _apply_inplace(lam_t, n, g, -theta)
    return float(value), grad


def adjoint_gradient(
    circuit: Circuit, params, observable: PauliSum, initial=None
) -> tuple[float, np.ndarray]:
    """Energy ``<H>`` and its exact gradient with respect to every slot."""
    if observable.n_qubits != circuit.n_qubits:
        raise ValueError("observable width does not match circuit")

    def cotangent(psi):
        h_psi = observable.apply(psi)
        return float(np.vdot(psi, h_psi).real), h_psi

    return backprop(circuit, params, cotangent, initial)


def circuit_unitary(circuit: Circuit, params) -> np.ndarray:
    """Dense unitary, column by column. Only for small test circuits."""
    dim = 2**circuit.n_qubits
    cols = [run_circuit(circuit, params, np.eye(dim, dtype=complex)[:, j]) for j in range(dim)]
    return np.stack(cols, axis=1)
