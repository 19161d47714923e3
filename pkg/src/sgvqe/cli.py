"""Command-line driver.

Every subcommand reads defaults, then an optional JSON ``--config`` file,
then explicit flags, later sources winning. Primary outputs are written
without timestamps so a re-run with the same seed reproduces them byte for
byte; timings go to ``meta.json``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .ansatz import FAMILIES, check_line_cover, line_set_3d, make_ansatz, snake_lines_2d
from .lattice import LatticeSpec
from .models import IsingParams, ising_1d, ising_lattice, load_pauli_file, xxz_1d
from .pauli import LanczosError, PauliSum, ground_energy, resolve_method
from .targets import ancilla_count, mps_to_statevector, random_mixed_target, random_mps
from .vqe import (
    EnergyObjective,
    MixedFidelityObjective,
    OptimizerConfig,
    PureFidelityObjective,
    fit_targets,
    layer_scan,
    minimize,
)

log = logging.getLogger("sgvqe")

MODELS = ("ising1d", "xxz1d", "ising2d", "ising3d")

_COMMON = {"seed": 0, "out": "sgvqe-out", "parallel": 1}
_MODEL = {"model": None, "n": None, "dims": None, "j": 1.0, "coupling": 0.5, "hamiltonian_file": None,
          "method": "auto", "cache_dir": None}
_OPT = {"iters": 500, "lr": 0.05, "tolerance": 1e-8}
DEFAULTS = {
    "vqe": {**_COMMON, **_MODEL, **_OPT, "ansatz": "sg", "bond": 4, "layers": 1, "optimizer": "lbfgs",
            "dump_circuit": None},
    "layer-scan": {**_COMMON, **_MODEL, **_OPT, "ansatz": "sg", "bond": 4, "lmax": 10, "repeats": 10,
                   "optimizer": "lbfgs", "threshold": 0.1},
    "reconstruct-pure": {**_COMMON, **_OPT, "n": 8, "bond": 4, "layers": 10, "count": 20, "optimizer": "adam",
                         "iters": 1000},
    "reconstruct-mixed": {**_COMMON, **_OPT, "n": 4, "mixture": 10, "bond": 2, "layers": 10, "count": 20,
                          "optimizer": "adam", "iters": 500},
    "eig": {**_MODEL, "out": None},
    "lines": {"dims": None, "out": None},
}
_ALIASES = {"gamma": "coupling", "g": "coupling"}


class CliError(Exception):
    """Invalid configuration or a task that cannot run."""


# -- argument handling ---------------------------------------------------------


def _add_model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=MODELS)
    g.add_argument("--n", type=int, help="chain length for 1D models")
    g.add_argument("--dims", help="lattice dimensions, e.g. 3x4 or 2x2x2")
    g.add_argument("--j", type=float, help="coupling J (default 1)")
    g.add_argument("--gamma", "--g", dest="coupling", type=float, help="gamma (1D) or g (lattices)")
    g.add_argument("--hamiltonian-file", help="Pauli-sum text file instead of a built-in model")
    g.add_argument("--method", choices=("auto", "dense", "lanczos"), help="ground-energy solver")
    g.add_argument("--cache-dir", help="ground-energy cache (default $SGVQE_CACHE_DIR or ~/.cache/sgvqe)")


def _add_opt_flags(p):
    g = p.add_argument_group("optimizer")
    g.add_argument("--optimizer", choices=("adam", "lbfgs"))
    g.add_argument("--iters", type=int, help="maximum iterations per run")
    g.add_argument("--lr", type=float, help="Adam learning rate")
    g.add_argument("--tolerance", type=float, help="gradient-norm stopping tolerance")


def _add_common_flags(p, seeded=True):
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--out", help="output directory")
    if seeded:
        p.add_argument("--seed", type=int)
        p.add_argument("--parallel", type=int, help="worker processes for independent runs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgvqe", description="Sequentially generated circuits for VQE and "
                                     "state reconstruction.", argument_default=argparse.SUPPRESS)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vqe", help="one VQE run", argument_default=argparse.SUPPRESS)
    _add_common_flags(p)
    _add_model_flags(p)
    p.add_argument("--ansatz", choices=FAMILIES)
    p.add_argument("--bond", type=int, help="SG bond dimension R")
    p.add_argument("--layers", type=int, help="layers L")
    p.add_argument("--dump-circuit", help="write the circuit text to this path")
    _add_opt_flags(p)

    p = sub.add_parser("layer-scan", help="grow L until the relative error threshold is met",
                       argument_default=argparse.SUPPRESS)
    _add_common_flags(p)
    _add_model_flags(p)
    p.add_argument("--ansatz", help=f"comma-separated families from {','.join(FAMILIES)}")
    p.add_argument("--bond", type=int)
    p.add_argument("--lmax", type=int, help="largest L tried")
    p.add_argument("--repeats", type=int)
    p.add_argument("--threshold", type=float, help="relative error threshold in percent")
    _add_opt_flags(p)

    for name, extra in (("reconstruct-pure", False), ("reconstruct-mixed", True)):
        p = sub.add_parser(name, help=f"fit SG circuits to random {'mixed' if extra else 'MPS'} targets",
                           argument_default=argparse.SUPPRESS)
        _add_common_flags(p)
        p.add_argument("--n", type=int, help="target qubits")
        p.add_argument("--bond", type=int, help="target bond dimension R")
        if extra:
            p.add_argument("--mixture", type=int, help="mixture rank M")
        p.add_argument("--layers", type=int, help="layers per SG block")
        p.add_argument("--count", type=int, help="number of targets")
        _add_opt_flags(p)

    p = sub.add_parser("eig", help="ground energy of a model", argument_default=argparse.SUPPRESS)
    _add_common_flags(p, seeded=False)
    _add_model_flags(p)

    p = sub.add_parser("lines", help="print 2D snake lines or a 3D line cover", argument_default=argparse.SUPPRESS)
    _add_common_flags(p, seeded=False)
    p.add_argument("--dims", help="lattice dimensions")
    return parser


def resolve_settings(command: str, flags: dict) -> dict:
    """Merge defaults, the ``--config`` file and flags."""
    settings = dict(DEFAULTS[command])
    config_path = flags.pop("config", None)
    if config_path:
        try:
            raw = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {config_path}: {exc}") from None
        if not isinstance(raw, dict):
            raise CliError(f"{config_path}: top level must be an object")
        for key, value in raw.items():
            key = _ALIASES.get(key, key.replace("-", "_"))
            if key not in settings:
                raise CliError(f"{config_path}: unknown option {key!r} for {command}")
            settings[key] = value
    for key, value in flags.items():
        if key in settings:
            settings[key] = value
    return settings


# -- shared helpers ------------------------------------------------------------


def load_hamiltonian(s: dict) -> tuple[PauliSum, LatticeSpec | None]:
    """The Hamiltonian and, for lattice models, its geometry."""
    if s["hamiltonian_file"] and s["model"]:
        raise CliError("give either --model or --hamiltonian-file, not both")
    if s["hamiltonian_file"]:
        path = Path(s["hamiltonian_file"])
        if not path.exists():
            raise CliError(f"Hamiltonian file {path} does not exist")
        h = load_pauli_file(path)
        lattice = LatticeSpec.parse(s["dims"]) if s["dims"] else None
        if lattice is not None and lattice.n_vertices != h.n_qubits:
            raise CliError(f"--dims {lattice} does not match the file's {h.n_qubits} qubits")
        return h, lattice
    model = s["model"]
    if model is None:
        raise CliError("no Hamiltonian: pass --model or --hamiltonian-file")
    params = IsingParams(float(s["j"]), float(s["coupling"]))
    if model in ("ising1d", "xxz1d"):
        if s["n"] is None:
            raise CliError(f"--model {model} needs --n")
        build = ising_1d if model == "ising1d" else xxz_1d
        return build(int(s["n"]), params), None
    if not s["dims"]:
        raise CliError(f"--model {model} needs --dims")
    lattice = LatticeSpec.parse(s["dims"])
    if lattice.ndim != (2 if model == "ising2d" else 3):
        raise CliError(f"--model {model} needs {2 if model == 'ising2d' else 3} dimensions, got {lattice}")
    return ising_lattice(lattice, params), lattice


def _cache_dir(s: dict) -> Path:
    if s.get("cache_dir"):
        return Path(s["cache_dir"])
    if os.environ.get("SGVQE_CACHE_DIR"):
        return Path(os.environ["SGVQE_CACHE_DIR"])
    return Path.home() / ".cache" / "sgvqe"


def cached_ground_energy(h: PauliSum, s: dict) -> tuple[float, str]:
    """Ground energy, reusing a previous result for identical content."""
    method = resolve_method(h, s["method"])
    key = hashlib.sha256((h.to_text() + f"method: {method}\n").encode()).hexdigest()
    path = _cache_dir(s) / f"{key}.json"
    if path.exists():
        value = json.loads(path.read_text())["lambda_g"]
        log.info("ground-energy cache hit %s", path)
        return float(value), method
    value = ground_energy(h, method)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps({"lambda_g": value, "method": method, "n_qubits": h.n_qubits}))
    tmp.replace(path)
    log.info("ground energy %r computed with %s, cached at %s", value, method, path)
    return value, method


def _optimizer(s: dict, seed: int) -> OptimizerConfig:
    return OptimizerConfig(s["optimizer"], int(s["iters"]), float(s["lr"]), float(s["tolerance"]), seed)


def _out_dir(s: dict) -> Path:
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_meta(out: Path, command: str, s: dict, started: float, **extra) -> None:
    meta = {"command": command, "version": __version__, "settings": s, "wall_time": time.perf_counter() - started,
            "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"), **extra}
    (out / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True, default=str) + "\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


# -- commands --------------------------------------------------------------------


def cmd_vqe(s: dict) -> None:
    started = time.perf_counter()
    h, lattice = load_hamiltonian(s)
    lambda_g, _ = cached_ground_energy(h, s)
    if lambda_g == 0:
        raise CliError("ground energy is zero; relative error is undefined")
    circuit = make_ansatz(s["ansatz"], h.n_qubits, int(s["layers"]), int(s["seed"]), int(s["bond"]), lattice)
    if s["dump_circuit"]:
        Path(s["dump_circuit"]).write_text(circuit.to_text())
    record = minimize(EnergyObjective(h, circuit, lambda_g), _optimizer(s, int(s["seed"])))
    out = _out_dir(s)
    (out / "record.json").write_text(record.to_json() + "\n")
    _write_meta(out, "vqe", s, started, optimizer_wall_time=record.wall_time)
    print(f"energy={record.final_loss!r} lambda_g={lambda_g!r} epsilon={record.metric:.6g}% "
          f"gates={record.gate_count} status={record.status}")


def cmd_layer_scan(s: dict) -> None:
    started = time.perf_counter()
    h, lattice = load_hamiltonian(s)
    lambda_g, _ = cached_ground_energy(h, s)
    if lambda_g == 0:
        raise CliError("ground energy is zero; relative error is undefined")
    families = [f.strip() for f in str(s["ansatz"]).split(",") if f.strip()]
    bad = [f for f in families if f not in FAMILIES]
    if bad or not families:
        raise CliError(f"unknown ansatz families {bad}; choose from {FAMILIES}")
    out = _out_dir(s)
    csv_parts, summaries, records = [], {}, {}
    for i, family in enumerate(families):
        report = layer_scan(h, family, int(s["lmax"]), float(s["threshold"]), _optimizer(s, 0),
                            int(s["repeats"]), int(s["seed"]), int(s["bond"]), lattice, lambda_g,
                            int(s["parallel"]))
        csv_parts.append(report.to_csv(header=i == 0))
        summaries[family] = report.summary()
        records[family] = [[r.to_dict() for r in recs] for recs in report.records]
        m = summaries[family]
        print(f"{family}: gates={m['gates_mean']:.1f}±{m['gates_std']:.1f} "
              f"epsilon={m['epsilon_mean']:.4g}±{m['epsilon_std']:.4g}% "
              f"reached={m['n_reached']}/{m['n_repeats']}")
    (out / "scan.csv").write_text("".join(csv_parts))
    (out / "summary.json").write_text(_dump({"lambda_g": lambda_g, "families": summaries}))
    (out / "records.json").write_text(_dump(records))
    _write_meta(out, "layer-scan", s, started)


def _write_traces(out: Path, records, mean) -> None:
    length = len(mean)
    cols = []
    for r in records:
        fid = [1.0 - v for v in r.trace]
        cols.append(fid + [fid[-1]] * (length - len(fid)))
    lines = ["iteration,mean_fidelity," + ",".join(f"target_{i}" for i in range(len(records)))]
    for it in range(length):
        lines.append(",".join([str(it + 1), repr(float(mean[it]))] + [repr(c[it]) for c in cols]))
    (out / "traces.csv").write_text("\n".join(lines) + "\n")


def _reconstruct(s: dict, command: str, objectives, extra: dict, started: float) -> None:
    records, mean = fit_targets(objectives, _optimizer(s, int(s["seed"])), int(s["parallel"]))
    out = _out_dir(s)
    _write_traces(out, records, mean)
    (out / "records.json").write_text(_dump([r.to_dict() for r in records]))
    final = [r.metric for r in records]
    summary = {"mean_fidelity": float(np.mean(final)), "min_fidelity": float(np.min(final)),
               "gate_count": records[0].gate_count, **extra}
    (out / "summary.json").write_text(_dump(summary))
    _write_meta(out, command, s, started)
    print(f"targets={len(records)} mean_fidelity={summary['mean_fidelity']:.6f} "
          f"min_fidelity={summary['min_fidelity']:.6f} gates={summary['gate_count']}")


def cmd_reconstruct_pure(s: dict) -> None:
    started = time.perf_counter()
    n, bond, seed = int(s["n"]), int(s["bond"]), int(s["seed"])
    circuit = make_ansatz("sg", n, int(s["layers"]), seed, bond=max(bond, 2))
    targets = [mps_to_statevector(random_mps(n, bond, [seed, i])) for i in range(int(s["count"]))]
    _reconstruct(s, "reconstruct-pure", [PureFidelityObjective(t, circuit) for t in targets], {"n_qubits": n},
                 started)


def cmd_reconstruct_mixed(s: dict) -> None:
    started = time.perf_counter()
    n, bond, mixture, seed = int(s["n"]), int(s["bond"]), int(s["mixture"]), int(s["seed"])
    total = n + ancilla_count(mixture)
    # purification of a rank-M mixture of bond-R states needs bond up to M R
    sg_bond = max(2, min(mixture * bond, 2 ** (total - 1)))
    circuit = make_ansatz("sg", total, int(s["layers"]), seed, bond=sg_bond)
    keep = tuple(range(n))
    objectives = [MixedFidelityObjective(random_mixed_target(n, mixture, bond, [seed, i])[0], circuit, keep)
                  for i in range(int(s["count"]))]
    _reconstruct(s, "reconstruct-mixed", objectives, {"n_qubits": n, "total_qubits": total, "sg_bond": sg_bond},
                 started)


def cmd_eig(s: dict) -> None:
    h, _ = load_hamiltonian(s)
    value, method = cached_ground_energy(h, s)
    line = f"lambda_g={value!r} method={method} n_qubits={h.n_qubits}"
    if s["out"]:
        out = _out_dir(s)
        (out / "eig.json").write_text(_dump({"lambda_g": value, "method": method, "n_qubits": h.n_qubits}))
    print(line)


def cmd_lines(s: dict) -> None:
    if not s["dims"]:
        raise CliError("lines needs --dims")
    spec = LatticeSpec.parse(s["dims"])
    lines = list(snake_lines_2d(spec)) if spec.ndim == 2 else line_set_3d(spec)
    check_line_cover(spec, lines)
    text = "".join(" ".join(map(str, line)) + "\n" for line in lines)
    if s["out"]:
        (_out_dir(s) / "lines.txt").write_text(text)
    sys.stdout.write(text)


COMMANDS = {
    "vqe": cmd_vqe,
    "layer-scan": cmd_layer_scan,
    "reconstruct-pure": cmd_reconstruct_pure,
    "reconstruct-mixed": cmd_reconstruct_mixed,
    "eig": cmd_eig,
    "lines": cmd_lines,
}


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    quiet = args.pop("quiet", False)
    logging.basicConfig(level=logging.WARNING if quiet else logging.INFO, format="%(levelname)s %(message)s",
                        stream=sys.stderr, force=True)
    try:
        settings = resolve_settings(command, args)
        COMMANDS[command](settings)
    except (CliError, ValueError, OSError, LanczosError) as exc:
        print(f"sgvqe {command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
