"""Experiment harness: configure, run, and record the benchmark suites.

Four experiments: classical iteration scaling over matrix size, the two-qubit
molecular energy levels (game vs overlap-penalized baseline, exact and
finite-shot), the penalty-weight sweep for the baseline, and the theory-bound
diagnostics.  Results are plain CSV plus a manifest; plotting stays out of
process.

Exit codes: 0 success, 1 assertion or bound failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import ConfigError, EigenGamesError
from .eigengame_classical import GameConfig, angular_error, run_sequential
from .hamiltonian import (
    build_powerlaw_hamiltonian,
    bundled_h2_path,
    exact_eigendecomposition,
    load_pauli_sum,
    pauli_sum_to_matrix,
)
from .quantum_sim import ShotModel, random_layers_ansatz
from .quantumgame import SolverConfig, run_quantumgame, run_vqd
from .theory_diagnostics import (
    loglog_slope,
    measure_error_accumulation_classical,
    measure_error_accumulation_quantum,
    sampled_lipschitz_check,
)

SCHEMA_VERSION = 1

EXPERIMENTS = ("eigengame_scaling", "h2_levels", "vqd_beta_sweep", "diagnostics")

DEFAULTS: dict[str, dict] = {
    "eigengame_scaling": {
        "schema_version": SCHEMA_VERSION,
        "experiment": "eigengame_scaling",
        "sizes": [8, 16, 32, 64, 128],
        "seeds": [0, 1, 2, 3, 4],
        "num_players": 8,
        "exponent": 1.0,
        "grad_tolerance": 1e-3,
        "sigma": 1e-4,
        "max_iterations": 100_000,
    },
    "h2_levels": {
        "schema_version": SCHEMA_VERSION,
        "experiment": "h2_levels",
        "pauli_file": "",  # empty -> bundled two-qubit molecular file
        "num_levels": 4,
        "layers": 3,
        "rotations_per_layer": 3,
        "ansatz_seed": 11,
        "initial_state": "plus",
        "seeds": [0],
        "grad_tolerance": 1e-2,
        "max_iterations": 3000,
        "shots": 10_000,
        "beta": 0.1,
    },
    "vqd_beta_sweep": {
        "schema_version": SCHEMA_VERSION,
        "experiment": "vqd_beta_sweep",
        "pauli_file": "",
        "num_levels": 4,
        "layers": 3,
        "rotations_per_layer": 3,
        "ansatz_seed": 11,
        "initial_state": "plus",
        "seeds": [0],
        "grad_tolerance": 1e-2,
        "max_iterations": 1500,
        "shots": 10_000,
        "betas": [0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0],
    },
    "diagnostics": {
        "schema_version": SCHEMA_VERSION,
        "experiment": "diagnostics",
        "dim": 8,
        "seeds": [0],
        "lipschitz_samples": 1000,
        "epsilons": [1e-4, 1e-3, 1e-2],
        "smoke": 0,
    },
}

_LIST_KEYS = {"sizes", "seeds", "betas", "epsilons"}
_INT_KEYS = {
    "schema_version", "num_players", "max_iterations", "shots", "num_levels",
    "layers", "rotations_per_layer", "ansatz_seed", "dim", "lipschitz_samples", "smoke",
}
_FLOAT_KEYS = {"exponent", "grad_tolerance", "sigma", "beta"}


@dataclass(frozen=True)
class RunConfig:
    """Validated experiment settings plus their provenance hash."""

    experiment: str
    settings: dict
    config_hash: str

    def __getitem__(self, key):
        return self.settings[key]


def _parse_scalar(key: str, text: str):
    text = text.strip()
    if key in _LIST_KEYS:
        if not text:
            return []
        items = [t.strip() for t in text.split(",") if t.strip()]
        return [float(t) if key in ("betas", "epsilons") else int(t) for t in items]
    if key in _INT_KEYS:
        return int(text)
    if key in _FLOAT_KEYS:
        return float(text)
    return text


def parse_config_text(text: str) -> dict:
    """Parse the flat `key = value` format ('#' starts a comment line)."""
    settings: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        try:
            settings[key] = _parse_scalar(key, value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    return settings


def build_run_config(experiment: str, overrides: dict | None = None) -> RunConfig:
    """Merge overrides into the experiment defaults and validate."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
    settings = dict(DEFAULTS[experiment])
    for key, value in (overrides or {}).items():
        if key not in settings:
            raise ConfigError(f"unknown config key {key!r} for experiment {experiment}")
        settings[key] = value
    if settings["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version {settings['schema_version']} unsupported (expected {SCHEMA_VERSION})"
        )
    if settings["experiment"] != experiment:
        raise ConfigError(
            f"config file is for experiment {settings['experiment']!r}, command ran {experiment!r}"
        )
    _validate(experiment, settings)
    blob = "\n".join(f"{k}={settings[k]!r}" for k in sorted(settings))
    config_hash = hashlib.sha256(blob.encode()).hexdigest()[:12]
    return RunConfig(experiment=experiment, settings=settings, config_hash=config_hash)


def _validate(experiment: str, s: dict) -> None:
    if "seeds" in s and not s["seeds"]:
        raise ConfigError("seeds must not be empty")
    if experiment == "eigengame_scaling":
        if not s["sizes"]:
            raise ConfigError("sizes must not be empty")
        if any(n < s["num_players"] for n in s["sizes"]):
            raise ConfigError("every size must be at least num_players")
        if s["exponent"] <= 0 or s["grad_tolerance"] <= 0:
            raise ConfigError("exponent and grad_tolerance must be positive")
    if experiment in ("h2_levels", "vqd_beta_sweep"):
        path = _resolve_pauli_file(s)
        if not path.exists():
            raise ConfigError(f"pauli_file {path} does not exist")
        operator = load_pauli_sum(path)
        if not 1 <= s["num_levels"] <= 2**operator.num_qubits:
            raise ConfigError(
                f"num_levels must be in [1, {2**operator.num_qubits}] for {path.name}"
            )
        if s["layers"] < 1 or s["rotations_per_layer"] < 1:
            raise ConfigError("layers and rotations_per_layer must be positive")
        if s["max_iterations"] < 1 or s["shots"] < 1:
            raise ConfigError("max_iterations and shots must be positive")
    if experiment == "vqd_beta_sweep" and not s["betas"]:
        raise ConfigError("betas must not be empty")
    if experiment == "diagnostics":
        if s["dim"] < 4:
            raise ConfigError("diagnostics needs dim >= 4")
        if any(e <= 0 for e in s["epsilons"]):
            raise ConfigError("epsilons must be positive (gap floor guard)")


def _resolve_pauli_file(settings: dict) -> Path:
    name = settings.get("pauli_file", "")
    return Path(name) if name else bundled_h2_path()


def load_run_config(experiment: str, config_path: str | None, seed: int | None) -> RunConfig:
    overrides: dict = {}
    if config_path:
        overrides = parse_config_text(Path(config_path).read_text())
    if seed is not None:
        overrides["seeds"] = [seed]
    return build_run_config(experiment, overrides)


# ---------------------------------------------------------------------------
# Output plumbing
# ---------------------------------------------------------------------------

def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(x) if isinstance(x, float) else x for x in row])
    path.write_text(buffer.getvalue())


def _write_manifest(out: Path, cfg: RunConfig, extra_lines: Sequence[str] = ()) -> None:
    lines = [
        f"library_version: {__version__}",
        f"experiment: {cfg.experiment}",
        f"config_hash: {cfg.config_hash}",
        f"timestamp: {time.strftime('%Y-%m-%dT%H:%M:%S')}",
        "config:",
    ]
    lines += [f"  {k} = {cfg.settings[k]}" for k in sorted(cfg.settings)]
    lines += list(extra_lines)
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def cmd_bench_scaling(cfg: RunConfig, out: Path) -> int:
    """Iteration counts for the leading components, exact vs zeroth-order mode."""
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    ok = True
    for n in sorted(cfg["sizes"]):
        for mode in ("exact", "zeroth_order"):
            for seed in cfg["seeds"]:
                matrix, spectrum = build_powerlaw_hamiltonian(n, seed=seed, exponent=cfg["exponent"])
                game_cfg = GameConfig(
                    sigma=cfg["sigma"],
                    grad_tolerance=cfg["grad_tolerance"],
                    max_iterations_per_player=cfg["max_iterations"],
                    num_players=cfg["num_players"],
                )
                result = run_sequential(matrix, game_cfg, seed=seed, mode=mode, spectrum=spectrum)
                max_angle = max(
                    angular_error(p.vector, spectrum.eigenvector(p.index - 1).real)
                    for p in result.players
                )
                rows.append(
                    (n, mode, seed, result.total_iterations, max_angle,
                     int(result.all_converged), cfg.config_hash)
                )
                ok = ok and result.all_converged
    _write_csv(
        out / "results.csv",
        ["n", "mode", "seed", "total_iterations", "max_angular_error", "converged", "config_hash"],
        rows,
    )
    _write_manifest(out, cfg)
    return 0 if ok else 1


def _h2_setup(cfg: RunConfig):
    h = load_pauli_sum(_resolve_pauli_file(cfg.settings))
    spectrum = exact_eigendecomposition(pauli_sum_to_matrix(h))
    spec = random_layers_ansatz(
        num_qubits=h.num_qubits,
        num_layers=cfg["layers"],
        rotations_per_layer=cfg["rotations_per_layer"],
        seed=cfg["ansatz_seed"],
        initial_state=cfg["initial_state"],
    )
    return h, spectrum, spec


def _trajectory_rows(tag: str, noise: str, seed: int, result, shots_label, config_hash: str):
    rows = []
    cumulative = 0
    for player in result.players:
        for t in range(len(player.energy_history)):
            rows.append(
                (tag, noise, seed, player.index, t, cumulative + t,
                 player.energy_history[t], player.utility_history[t],
                 player.grad_norm_history[t], shots_label, config_hash)
            )
        cumulative += player.iterations_used
    return rows


def cmd_bench_h2(cfg: RunConfig, out: Path) -> int:
    """Energy-level trajectories on the bundled molecular operator, exact and 10k-shot."""
    out.mkdir(parents=True, exist_ok=True)
    h, spectrum, spec = _h2_setup(cfg)
    k = cfg["num_levels"]
    rows = []
    # Oracle reference levels, ascending (energy ordering).
    for level, value in enumerate(sorted(spectrum.eigenvalues)[:k], start=1):
        rows.append(("oracle", "exact", "", level, "", "", float(value), "", "", "exact",
                     cfg.config_hash))
    ok = True
    for noise, shots in (("noiseless", None), ("shots", cfg["shots"])):
        for seed in cfg["seeds"]:
            base = SolverConfig(
                max_iterations=cfg["max_iterations"],
                grad_tolerance=cfg["grad_tolerance"],
                shots=ShotModel(shots, rng_seed=seed),
                direction="minimize",
            )
            game = run_quantumgame(h, spec, base, k, seed=seed)
            rows += _trajectory_rows("quantumgame", noise, seed, game,
                                     shots or "exact", cfg.config_hash)
            vqd_cfg = replace(base, beta=cfg["beta"])
            vqd = run_vqd(h, spec, vqd_cfg, k, seed=seed)
            rows += _trajectory_rows("vqd", noise, seed, vqd, shots or "exact", cfg.config_hash)
            if noise == "noiseless":
                oracle = np.sort(spectrum.eigenvalues)[:k]
                ok = ok and bool(np.all(np.abs(np.sort(game.eigenvalues) - oracle) <= 2e-2))
    _write_csv(
        out / "results.csv",
        ["algorithm", "noise", "seed", "player", "iteration", "cumulative_iteration",
         "energy", "utility", "grad_norm", "shots", "config_hash"],
        rows,
    )
    _write_manifest(out, cfg, ["ansatz:"] + ["  " + line for line in spec.describe().splitlines()])
    return 0 if ok else 1


def cmd_bench_beta_sweep(cfg: RunConfig, out: Path) -> int:
    """Total iterations of the overlap-penalized baseline per penalty weight."""
    out.mkdir(parents=True, exist_ok=True)
    h, spectrum, spec = _h2_setup(cfg)
    k = cfg["num_levels"]
    oracle = np.sort(spectrum.eigenvalues)[:k]
    rows = []
    for beta in cfg["betas"]:
        for noise, shots in (("noiseless", None), ("shots", cfg["shots"])):
            for seed in cfg["seeds"]:
                solver_cfg = SolverConfig(
                    max_iterations=cfg["max_iterations"],
                    grad_tolerance=cfg["grad_tolerance"],
                    shots=ShotModel(shots, rng_seed=seed),
                    direction="minimize",
                    beta=float(beta),
                )
                result = run_vqd(h, spec, solver_cfg, k, seed=seed)
                max_err = float(np.max(np.abs(np.sort(result.eigenvalues) - oracle)))
                rows.append(
                    (float(beta), noise, seed, result.total_iterations, max_err,
                     int(result.all_converged), shots or "exact", cfg.config_hash)
                )
    _write_csv(
        out / "results.csv",
        ["beta", "noise", "seed", "total_iterations", "max_abs_energy_error",
         "all_converged", "shots", "config_hash"],
        rows,
    )
    _write_manifest(out, cfg, ["ansatz:"] + ["  " + line for line in spec.describe().splitlines()])
    return 0


def cmd_diagnostics(cfg: RunConfig, out: Path) -> int:
    """Run every bound-check suite; exit 0 only with zero violations."""
    out.mkdir(parents=True, exist_ok=True)
    smoke = bool(cfg["smoke"])
    seed = cfg["seeds"][0]
    dim = cfg["dim"]
    rows = []
    rows += sampled_lipschitz_check(
        dim=dim,
        num_samples=1 if smoke else cfg["lipschitz_samples"],
        seed=seed,
    )
    rows += measure_error_accumulation_classical(
        dim=dim,
        epsilons=cfg["epsilons"],
        seed=seed,
        samples_per_epsilon=1 if smoke else 20,
    )
    h = load_pauli_sum(bundled_h2_path())
    spec = random_layers_ansatz(2, 3, 3, seed=11)
    rows += measure_error_accumulation_quantum(
        h, spec, epsilons=cfg["epsilons"], seed=seed,
        samples_per_epsilon=1 if smoke else 5,
    )
    csv_rows = [
        (r.bound_name, r.parameters, r.bound_value, r.measured_value, "pass" if r.passed else "FAIL")
        for r in rows
    ]
    _write_csv(
        out / "results.csv",
        ["bound", "parameters", "bound_value", "measured_value", "status"],
        csv_rows,
    )
    _write_manifest(out, cfg)
    failures = [r for r in rows if not r.passed]
    for r in failures:
        print(f"BOUND VIOLATION {r.bound_name} [{r.parameters}]: "
              f"measured {r.measured_value} > bound {r.bound_value}", file=sys.stderr)
    # Slope sanity: the measured error must grow linearly in the perturbation.
    classical = [r for r in rows if r.bound_name == "error_accumulation_classical"]
    eps_means = {}
    for r in classical:
        eps = float(r.parameters.split("eps=")[1].split(" ")[0])
        eps_means.setdefault(eps, []).append(r.measured_value)
    if len(eps_means) >= 2:
        eps_sorted = sorted(eps_means)
        slope = loglog_slope(eps_sorted, [float(np.mean(eps_means[e])) for e in eps_sorted])
        print(f"error-vs-epsilon log-log slope: {slope:.3f}")
        if not 0.8 <= slope <= 1.2:
            print(f"SLOPE OUT OF BAND: {slope:.3f} not in [0.8, 1.2]", file=sys.stderr)
            return 1
    return 0 if not failures else 1


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

_COMMANDS = {
    "scaling": ("eigengame_scaling", cmd_bench_scaling),
    "h2": ("h2_levels", cmd_bench_h2),
    "beta-sweep": ("vqd_beta_sweep", cmd_bench_beta_sweep),
    "diagnostics": ("diagnostics", cmd_diagnostics),
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="eigengames-bench",
        description="Run the eigensolver benchmark experiments and emit CSV results.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override the seed list with one seed")
        p.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)

    experiment, runner = _COMMANDS[args.command]
    try:
        cfg = load_run_config(experiment, args.config, args.seed)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        return runner(cfg, Path(args.out))
    except EigenGamesError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
