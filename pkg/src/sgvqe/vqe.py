"""Objectives, optimizers and the minimum-gate layer scan."""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .ansatz import make_ansatz
from .lattice import LatticeSpec
from .pauli import PauliSum, ground_energy, mixed_fidelity, partial_trace, purity
from .statevector import Circuit, adjoint_gradient, backprop, run_circuit

log = logging.getLogger(__name__)

THRESHOLD_PERCENT = 0.1


def relative_error(energy: float, lambda_g: float) -> float:
    """``|(E - lambda_g) / lambda_g| * 100``, in percent."""
    if lambda_g == 0:
        raise ValueError("ground energy is zero; relative error is undefined")
    return abs((energy - lambda_g) / lambda_g) * 100.0


# -- objectives --------------------------------------------------------------


@dataclass(frozen=True)
class EnergyObjective:
    """Loss ``<psi(theta)|H|psi(theta)>``. With ``lambda_g`` the reported
    metric is the relative error in percent, otherwise the energy itself."""

    hamiltonian: PauliSum
    circuit: Circuit
    lambda_g: float | None = None

    kind = "energy"

    def __post_init__(self):
        if self.hamiltonian.n_qubits != self.circuit.n_qubits:
            raise ValueError("Hamiltonian and circuit widths differ")

    def evaluate(self, params) -> tuple[float, np.ndarray]:
        return adjoint_gradient(self.circuit, params, self.hamiltonian)

    def metric(self, loss: float) -> tuple[str, float]:
        if self.lambda_g is None:
            return "energy", loss
        return "epsilon_percent", relative_error(loss, self.lambda_g)

    def describe(self) -> dict:
        return {"kind": self.kind, "n_qubits": self.circuit.n_qubits, "n_terms": len(self.hamiltonian),
                "lambda_g": self.lambda_g}


@dataclass(frozen=True)
class PureFidelityObjective:
    """Loss ``1 - |<target|phi(theta)>|^2``."""

    target: np.ndarray
    circuit: Circuit

    kind = "pure_fidelity"

    def __post_init__(self):
        if self.target.shape != (2**self.circuit.n_qubits,):
            raise ValueError("target state and circuit widths differ")

    def evaluate(self, params) -> tuple[float, np.ndarray]:
        def cotangent(phi):
            overlap = np.vdot(self.target, phi)
            return 1.0 - abs(overlap) ** 2, -overlap * self.target

        return backprop(self.circuit, params, cotangent)

    def metric(self, loss: float) -> tuple[str, float]:
        return "fidelity", 1.0 - loss

    def describe(self) -> dict:
        return {"kind": self.kind, "n_qubits": self.circuit.n_qubits}


@dataclass(frozen=True)
class MixedFidelityObjective:
    """Loss ``1 - F(rho, sigma(theta))`` with ``sigma`` the circuit output
    reduced to ``keep`` and ``F`` the normalised trace overlap.

    ``gradient="adjoint"`` differentiates ``F`` exactly through the cotangent
    ``-(O (x) I)|phi>``; ``gradient="fd"`` uses central differences.
    """

    target: np.ndarray
    circuit: Circuit
    keep: tuple[int, ...]
    gradient: str = "adjoint"
    fd_step: float = 1e-6

    kind = "mixed_fidelity"

    def __post_init__(self):
        keep = tuple(sorted(int(q) for q in self.keep))
        object.__setattr__(self, "keep", keep)
        if self.target.shape != (2 ** len(keep),) * 2:
            raise ValueError("target density matrix does not match keep set")
        if keep[-1] >= self.circuit.n_qubits:
            raise ValueError("keep set exceeds circuit width")
        if self.gradient not in ("adjoint", "fd"):
            raise ValueError(f"unknown gradient mode {self.gradient!r}")
        object.__setattr__(self, "_target_purity", purity(self.target))

    def loss(self, params) -> float:
        phi = run_circuit(self.circuit, params)
        return 1.0 - mixed_fidelity(self.target, partial_trace(phi, self.keep))

    def _cotangent(self, phi):
        n = self.circuit.n_qubits
        k = len(self.keep)
        t = np.moveaxis(phi.reshape((2,) * n), self.keep, range(k))
        m = t.reshape(2**k, -1)
        sigma = m @ m.conj().T
        p_sigma = purity(sigma)
        overlap = float(np.sum(self.target * sigma.T).real)
        a = math.sqrt(self._target_purity)
        fid = overlap / (a * math.sqrt(p_sigma))
        op = self.target / (a * math.sqrt(p_sigma)) - overlap / (a * p_sigma**1.5) * sigma
        lam = -(op @ m).reshape(t.shape)
        lam = np.moveaxis(lam, range(k), self.keep).reshape(-1)
        return 1.0 - fid, lam

    def evaluate(self, params) -> tuple[float, np.ndarray]:
        if self.gradient == "adjoint":
            return backprop(self.circuit, params, self._cotangent)
        params = np.asarray(params, dtype=float)
        grad = np.empty_like(params)
        for i in range(params.size):
            step = np.zeros_like(params)
            step[i] = self.fd_step
            grad[i] = (self.loss(params + step) - self.loss(params - step)) / (2 * self.fd_step)
        return self.loss(params), grad

    def metric(self, loss: float) -> tuple[str, float]:
        return "fidelity", 1.0 - loss

    def describe(self) -> dict:
        return {"kind": self.kind, "n_qubits": self.circuit.n_qubits, "keep": list(self.keep),
                "gradient": self.gradient}


def evaluate(objective, params) -> tuple[float, np.ndarray]:
    return objective.evaluate(params)


# -- optimizers --------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "lbfgs"
    max_iter: int = 500
    learning_rate: float = 0.05
    tolerance: float = 1e-8
    seed: int = 0
    memory: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.method not in ("adam", "lbfgs"):
            raise ValueError(f"unknown optimizer {self.method!r}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


@dataclass
class RunRecord:
    """Everything needed to audit or replay one optimisation run."""

    config: dict
    seed: int
    trace: list[float]
    final_params: list[float]
    gate_count: int
    final_loss: float
    metric_name: str
    metric: float
    n_evals: int
    status: str
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self, timing: bool = False) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("wall_time")
        return d

    def to_json(self) -> str:
        """Timing-free JSON, byte-stable for a fixed seed."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls.from_dict(json.loads(text))


class _Counted:
    def __init__(self, objective):
        self.objective = objective
        self.n_evals = 0

    def __call__(self, x):
        self.n_evals += 1
        loss, grad = self.objective.evaluate(x)
        return float(loss), np.asarray(grad, dtype=float)


def initial_params(n_params: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-np.pi, np.pi, n_params)


def minimize(objective, opt: OptimizerConfig = OptimizerConfig(), params0=None) -> RunRecord:
    """Minimise ``objective`` from ``params0`` (default uniform in [-pi, pi))."""
    start = time.perf_counter()
    x0 = initial_params(objective.circuit.n_params, opt.seed) if params0 is None else np.array(params0, float)
    fn = _Counted(objective)
    runner = _adam if opt.method == "adam" else _lbfgs
    x, loss, trace, status = runner(fn, x0, opt)
    name, value = objective.metric(loss) if math.isfinite(loss) else (objective.metric(0.0)[0], math.nan)
    return RunRecord(
        config={"objective": objective.describe(), "optimizer": asdict(opt)},
        seed=opt.seed,
        trace=[float(v) for v in trace],
        final_params=[float(v) for v in x],
        gate_count=objective.circuit.gate_count(),
        final_loss=float(loss),
        metric_name=name,
        metric=float(value),
        n_evals=fn.n_evals,
        status=status,
        wall_time=time.perf_counter() - start,
    )


def _adam(fn, x, opt: OptimizerConfig):
    """Adam with bias correction; returns the best iterate seen."""
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    trace = []
    best_x, best_loss = x.copy(), math.inf
    status = "max_iter"
    for it in range(1, opt.max_iter + 1):
        loss, g = fn(x)
        if not (math.isfinite(loss) and np.all(np.isfinite(g))):
            log.warning("non-finite loss at iteration %d", it)
            return best_x, (best_loss if trace else math.nan), trace, "non-finite"
        trace.append(loss)
        if loss < best_loss:
            best_x, best_loss = x.copy(), loss
        if np.linalg.norm(g) < opt.tolerance:
            status = "converged"
            break
        m = opt.beta1 * m + (1 - opt.beta1) * g
        v = opt.beta2 * v + (1 - opt.beta2) * g * g
        m_hat = m / (1 - opt.beta1**it)
        v_hat = v / (1 - opt.beta2**it)
        x = x - opt.learning_rate * m_hat / (np.sqrt(v_hat) + opt.epsilon)
    return best_x, best_loss, trace, status


def _lbfgs(fn, x, opt: OptimizerConfig, c1: float = 1e-4, max_backtrack: int = 40):
    """L-BFGS two-loop recursion with backtracking Armijo line search.

    Stops when the gradient norm or an accepted step falls below
    ``opt.tolerance``. ``trace`` holds the loss after every accepted step, so
    it never increases.
    """
    loss, g = fn(x)
    if not math.isfinite(loss):
        return x, math.nan, [], "non-finite"
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    trace = []
    status = "max_iter"
    for _ in range(opt.max_iter):
        if np.linalg.norm(g) < opt.tolerance:
            status = "converged"
            break
        d = _two_loop(g, s_hist, y_hist)
        slope = float(g @ d)
        if slope >= 0:
            s_hist.clear()
            y_hist.clear()
            d = -g
            slope = -float(g @ g)
        alpha = 1.0 if s_hist else min(1.0, 1.0 / np.linalg.norm(g))
        accepted = False
        for _ in range(max_backtrack):
            x_new = x + alpha * d
            loss_new, g_new = fn(x_new)
            if math.isfinite(loss_new) and loss_new <= loss + c1 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            if s_hist:
                s_hist.clear()
                y_hist.clear()
                continue
            status = "line_search_failed"
            break
        s, y = x_new - x, g_new - g
        if float(s @ y) > 1e-12 * float(y @ y):
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > opt.memory:
                s_hist.pop(0)
                y_hist.pop(0)
        x, loss, g = x_new, loss_new, g_new
        trace.append(loss)
        if np.linalg.norm(s) < opt.tolerance:
            # backtracked to a negligible step: the loss is at its float floor
            status = "converged"
            break
    return x, loss, trace, status


def _two_loop(g, s_hist, y_hist):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / float(y @ s)
        a = rho * float(s @ q)
        alphas.append((rho, a))
        q -= a * y
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q


# -- layer scan ----------------------------------------------------------------


@dataclass(frozen=True)
class ScanRow:
    ansatz: str
    n_qubits: int
    L: int
    gates: int
    epsilon_percent: float
    reached: bool
    seed: int


CSV_HEADER = "ansatz,n_qubits,L,gates,epsilon_percent,reached,seed"


@dataclass
class ScanReport:
    lambda_g: float
    rows: list[ScanRow]
    records: list[list[RunRecord]]

    def summary(self) -> dict:
        finite = [r for r in self.rows if math.isfinite(r.epsilon_percent)]
        reached = [r for r in finite if r.reached]
        gates = [r.gates for r in finite]
        eps = [r.epsilon_percent for r in finite]
        return {
            "n_repeats": len(self.rows),
            "n_reached": len(reached),
            "gates_mean": _mean(gates),
            "gates_std": _std(gates),
            "epsilon_mean": _mean(eps),
            "epsilon_std": _std(eps),
            "epsilon_mean_reached": _mean([r.epsilon_percent for r in reached]),
        }

    def to_csv(self, header: bool = True) -> str:
        lines = [CSV_HEADER] if header else []
        for r in self.rows:
            lines.append(
                f"{r.ansatz},{r.n_qubits},{r.L},{r.gates},{r.epsilon_percent!r},{str(r.reached).lower()},{r.seed}"
            )
        return "\n".join(lines) + "\n"


def parse_scan_csv(text: str) -> list[ScanRow]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if lines[0] != CSV_HEADER:
        raise ValueError("unexpected CSV header")
    rows = []
    for ln in lines[1:]:
        a, n, L, gates, eps, reached, seed = ln.split(",")
        rows.append(ScanRow(a, int(n), int(L), int(gates), float(eps), reached == "true", int(seed)))
    return rows


def _mean(xs):
    return float(np.mean(xs)) if xs else math.nan


def _std(xs):
    return float(np.std(xs, ddof=1)) if len(xs) > 1 else math.nan


def derive_seeds(seed: int, layer: int) -> tuple[int, int]:
    """(gate-kind seed, parameter-init seed) for one repeat at one depth."""
    ansatz_ss, init_ss = np.random.SeedSequence([seed, layer]).spawn(2)
    return int(ansatz_ss.generate_state(1)[0]), int(init_ss.generate_state(1)[0])


def _scan_repeat(args):
    hamiltonian, family, L_max, threshold, opt, seed, bond, lattice, lambda_g = args
    n = hamiltonian.n_qubits
    records = []
    best = None
    for L in range(1, L_max + 1):
        ansatz_seed, init_seed = derive_seeds(seed, L)
        circuit = make_ansatz(family, n, L, ansatz_seed, bond=bond, lattice=lattice)
        obj = EnergyObjective(hamiltonian, circuit, lambda_g)
        run_opt = OptimizerConfig(**{**asdict(opt), "seed": init_seed})
        rec = minimize(obj, run_opt)
        records.append(rec)
        eps = rec.metric
        log.info("%s seed=%d L=%d gates=%d eps=%.4g%%", family, seed, L, rec.gate_count, eps)
        if math.isfinite(eps) and eps <= threshold:
            return ScanRow(family, n, L, rec.gate_count, eps, True, seed), records
        if best is None or (math.isfinite(rec.final_loss) and not rec.final_loss >= best[1].final_loss):
            best = (L, rec)
    L, rec = best
    return ScanRow(family, n, L, rec.gate_count, rec.metric, False, seed), records


def layer_scan(
    hamiltonian: PauliSum,
    family: str,
    L_max: int,
    threshold: float = THRESHOLD_PERCENT,
    opt: OptimizerConfig = OptimizerConfig(),
    n_repeats: int = 10,
    seed: int = 0,
    bond: int = 4,
    lattice: LatticeSpec | None = None,
    lambda_g: float | None = None,
    workers: int = 1,
) -> ScanReport:
    """Grow ``L`` from 1 until the relative error is within ``threshold``.

    Repeat ``r`` uses seed ``seed + r``. A repeat that never reaches the
    threshold reports its lowest-energy depth with ``reached=False``.
    """
    if lambda_g is None:
        lambda_g = ground_energy(hamiltonian)
    jobs = [
        (hamiltonian, family, L_max, threshold, opt, seed + r, bond, lattice, lambda_g)
        for r in range(n_repeats)
    ]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_scan_repeat, jobs))
    else:
        results = [_scan_repeat(j) for j in jobs]
    return ScanReport(lambda_g, [r for r, _ in results], [recs for _, recs in results])


def _fit_one(args):
    obj, opt = args
    return minimize(obj, opt)


def fit_targets(
    objectives: Sequence, opt: OptimizerConfig, workers: int = 1
) -> tuple[list[RunRecord], np.ndarray]:
    """Fit each reconstruction objective; returns records and the mean
    fidelity trace (shorter traces padded with their final value).

    Target ``i`` starts from the initial parameters of seed ``opt.seed + i``.
    """
    jobs = [(obj, OptimizerConfig(**{**asdict(opt), "seed": opt.seed + i})) for i, obj in enumerate(objectives)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            records = list(pool.map(_fit_one, jobs))
    else:
        records = [_fit_one(j) for j in jobs]
    length = max(len(r.trace) for r in records)
    fid = np.array([[1.0 - v for v in r.trace] + [1.0 - r.trace[-1]] * (length - len(r.trace))
                    for r in records])
    return records, fid.mean(axis=0)
