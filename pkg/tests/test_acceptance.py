"""Acceptance gate: one PASS/FAIL line per criterion at the required tolerances.

Set ``SGVQE_EXTENDED=1`` to also run the 15-qubit Ising layer scan.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import central_difference, circuit_matrix, random_circuit
from sgvqe.ansatz import check_line_cover, line_set_3d
from sgvqe.cli import main
from sgvqe.lattice import LatticeSpec
from sgvqe.models import IsingParams, ising_1d, ising_lattice, xxz_1d
from sgvqe.pauli import PauliSum, PauliTerm, ground_energy, ground_energy_dense, ground_energy_lanczos
from sgvqe.statevector import ARITY, adjoint_gradient, expectation, run_circuit
from sgvqe.vqe import OptimizerConfig, layer_scan

pytestmark = pytest.mark.acceptance


def random_observable(n, rng, n_terms=6):
    terms = []
    for _ in range(n_terms):
        support = rng.choice(n, rng.integers(1, min(n, 3) + 1), replace=False)
        terms.append(PauliTerm(float(rng.normal()), tuple((int(q), "XYZ"[rng.integers(3)]) for q in support)))
    return PauliSum(n, tuple(terms))


def test_c01_gradient_correctness(criterion):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst_rel, worst_abs, kinds = 0.0, 0.0, set()
    for _ in range(50):
        n = int(rng.integers(2, 7))
        c = random_circuit(n, int(rng.integers(1, 61)), rng)
        kinds |= {g.kind for g in c.gates}
        h = random_observable(n, rng)
        theta = rng.uniform(-np.pi, np.pi, c.n_params)
        _, g = adjoint_gradient(c, theta, h)
        ref = central_difference(lambda t: expectation(run_circuit(c, t), h), theta)
        small = np.abs(ref) < 1e-3
        if small.any():
            worst_abs = max(worst_abs, float(np.max(np.abs(g - ref)[small])))
        if (~small).any():
            worst_rel = max(worst_rel, float(np.max(np.abs(g - ref)[~small] / np.abs(ref)[~small])))
    elapsed = time.perf_counter() - start
    passed = worst_rel <= 1e-6 and worst_abs <= 1e-8 and kinds == set(ARITY) and elapsed < 60
    criterion(1, passed, f"50 circuits, max rel {worst_rel:.2e}, max abs {worst_abs:.2e}, "
              f"{len(kinds)}/{len(ARITY)} kinds, {elapsed:.1f}s")


def test_c02_simulator_oracle(criterion):
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 5))
        c = random_circuit(n, int(rng.integers(0, 40)), rng)
        theta = rng.uniform(-np.pi, np.pi, c.n_params)
        worst = max(worst, float(np.max(np.abs(run_circuit(c, theta) - circuit_matrix(c, theta)[:, 0]))))
    elapsed = time.perf_counter() - start
    criterion(2, worst <= 1e-12 and elapsed < 60, f"100 circuits, max amplitude error {worst:.2e}, {elapsed:.1f}s")


def test_c03_eigensolver_cross_check(criterion):
    start = time.perf_counter()
    cases = [ising_1d(n) for n in (4, 7, 10)] + [xxz_1d(n) for n in (4, 7, 10)]
    cases += [ising_lattice(LatticeSpec(d)) for d in ((2, 2), (2, 3), (3, 3), (2, 5))]
    worst = max(abs(ground_energy_dense(h) - ground_energy_lanczos(h)) for h in cases)
    elapsed = time.perf_counter() - start
    criterion(3, worst <= 1e-8 and elapsed < 60, f"{len(cases)} instances, max |dense - Lanczos| {worst:.2e}, "
              f"{elapsed:.1f}s")


def _reconstruct(tmp_path, argv):
    start = time.perf_counter()
    assert main(["-q", *argv, "--out", str(tmp_path)]) == 0
    return json.loads((tmp_path / "summary.json").read_text()), time.perf_counter() - start


def test_c04_pure_reconstruction(criterion, tmp_path):
    summary, elapsed = _reconstruct(tmp_path, ["reconstruct-pure", "--n", "8", "--bond", "4", "--layers", "10",
                                               "--count", "10", "--optimizer", "adam", "--iters", "1000",
                                               "--seed", "0"])
    f = summary["mean_fidelity"]
    criterion(4, f >= 0.98 and elapsed <= 900, f"n=8 R=4 L=10, {summary['gate_count']} gates, 10 targets, "
              f"mean fidelity {f:.5f} (min {summary['min_fidelity']:.5f}), {elapsed:.0f}s")


def test_c05_mixed_reconstruction(criterion, tmp_path):
    summary, elapsed = _reconstruct(tmp_path, ["reconstruct-mixed", "--n", "4", "--mixture", "10", "--bond", "2",
                                               "--layers", "10", "--count", "10", "--optimizer", "adam",
                                               "--iters", "500", "--seed", "0"])
    f = summary["mean_fidelity"]
    criterion(5, f >= 0.98 and elapsed <= 900, f"n=4 M=10 R=2 on {summary['total_qubits']} qubits, "
              f"{summary['gate_count']} gates, 10 targets, mean fidelity {f:.5f}, {elapsed:.0f}s")


def _scan(h, family, L_max, iters, lattice=None, n_repeats=5):
    start = time.perf_counter()
    rep = layer_scan(h, family, L_max, opt=OptimizerConfig("lbfgs", iters), n_repeats=n_repeats, seed=0,
                     bond=4, lattice=lattice, lambda_g=ground_energy(h))
    return rep, time.perf_counter() - start


def _eps(rep):
    return ", ".join(f"{r.epsilon_percent:.4f}" for r in rep.rows)


def test_c06_ising_1d(criterion):
    rep, elapsed = _scan(ising_1d(12, IsingParams(1.0, 0.5)), "sg", 10, 500)
    s = rep.summary()
    criterion(6, s["n_reached"] >= 4 and elapsed <= 1800,
              f"n=12 SG R=4: {s['n_reached']}/5 reached, gates {s['gates_mean']:.1f}±{s['gates_std']:.1f}, "
              f"eps% [{_eps(rep)}], {elapsed:.0f}s")


@pytest.mark.skipif(not os.environ.get("SGVQE_EXTENDED"), reason="set SGVQE_EXTENDED=1 for the 15-qubit run")
def test_c06_extended_ising_15(capsys):
    rep, elapsed = _scan(ising_1d(15), "sg", 10, 500, n_repeats=10)
    s = rep.summary()
    with capsys.disabled():
        print(f"\nextended n=15: {s['n_reached']}/10 reached, gates {s['gates_mean']:.1f}±{s['gates_std']:.1f}, "
              f"{elapsed:.0f}s")


def test_c07_ising_2d(criterion):
    spec = LatticeSpec((3, 4))
    rep, elapsed = _scan(ising_lattice(spec), "sg", 1, 500, lattice=spec)
    gates = {r.gates for r in rep.rows}
    reached = sum(r.reached for r in rep.rows)
    criterion(7, reached >= 3 and gates == {106} and elapsed <= 1800,
              f"3x4 SG R=4 L=1 ({gates.pop()} gates): {reached}/5 reached, eps% [{_eps(rep)}], {elapsed:.0f}s")


def test_c08_line_generation(criterion):
    start = time.perf_counter()
    counts = {}
    for dims in ((2, 2, 2), (2, 5, 2), (2, 6, 2)):
        spec = LatticeSpec(dims)
        lines = line_set_3d(spec)
        check_line_cover(spec, lines)
        counts["x".join(map(str, dims))] = len(lines)
    elapsed = time.perf_counter() - start
    criterion(8, counts == {"2x2x2": 4, "2x5x2": 3, "2x6x2": 3} and elapsed < 60,
              f"lines {counts}, full edge cover, {elapsed:.1f}s")


def test_c09_ising_3d(criterion):
    spec = LatticeSpec((2, 2, 2))
    rep, elapsed = _scan(ising_lattice(spec), "sg", 1, 300, lattice=spec)
    reached = sum(r.reached for r in rep.rows)
    criterion(9, reached >= 3 and elapsed <= 600,
              f"2x2x2 SG R=4 L=1 ({rep.rows[0].gates} gates): {reached}/5 reached, eps% [{_eps(rep)}], "
              f"{elapsed:.0f}s")


def test_c10_iqp_fails_on_xxz(criterion):
    rep, elapsed = _scan(xxz_1d(14), "iqp", 5, 1500)
    reached = sum(r.reached for r in rep.rows)
    criterion(10, reached == 0 and elapsed <= 1200,
              f"IQP on 14-qubit XXZ, L<=5: {reached}/5 reached, best eps% [{_eps(rep)}], {elapsed:.0f}s")


DETERMINISM_RUNS = {
    "vqe": ["vqe", "--model", "ising1d", "--n", "5", "--layers", "2", "--iters", "60", "--seed", "7"],
    "layer-scan": ["layer-scan", "--model", "xxz1d", "--n", "4", "--ansatz", "sg,he,ptg,iqp", "--lmax", "2",
                   "--repeats", "2", "--iters", "30", "--seed", "7"],
    "reconstruct-pure": ["reconstruct-pure", "--n", "4", "--bond", "2", "--layers", "2", "--count", "2",
                         "--iters", "40", "--seed", "7"],
    "reconstruct-mixed": ["reconstruct-mixed", "--n", "2", "--mixture", "2", "--bond", "2", "--layers", "2",
                          "--count", "2", "--iters", "30", "--seed", "7"],
    "eig": ["eig", "--model", "ising2d", "--dims", "2x3"],
    "lines": ["lines", "--dims", "2x3x2"],
}


def _primary_outputs(directory: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.name != "meta.json"}


def test_c11_cli_determinism(criterion, tmp_path, capsys):
    start = time.perf_counter()
    mismatched = []
    for name, argv in DETERMINISM_RUNS.items():
        outputs = []
        for attempt in range(2):
            out = tmp_path / f"{name}-{attempt}"
            extra = ["--out", str(out)]
            if name in ("vqe", "layer-scan", "eig"):
                extra += ["--cache-dir", str(tmp_path / f"cache-{attempt}")]
            assert main(["-q", *argv, *extra]) == 0
            stdout = capsys.readouterr().out
            outputs.append((stdout, _primary_outputs(out)))
        if outputs[0] != outputs[1] or not outputs[0][1]:
            mismatched.append(name)
    elapsed = time.perf_counter() - start
    criterion(11, not mismatched and elapsed < 300,
              f"{len(DETERMINISM_RUNS)} commands byte-identical on re-run"
              + (f", mismatched: {mismatched}" if mismatched else "") + f", {elapsed:.1f}s")
