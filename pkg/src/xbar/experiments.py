"""Experiment orchestration: each run writes CSV results plus a manifest.

Result files use a fixed float format so a rerun with the same config and
seed is byte-identical on the deterministic backends. The manifest echoes
the full config, its hash, and library versions.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .backends import IdealBackend, PhotonicBackend, make_backend
from .compiler import MatrixCompiler
from .config import RunConfig
from .crossbar import BACKWARD, FORWARD, CrossbarArray, path_loss_report
from .datasets import load_iris, load_mnist_subset
from .devices import MziDevice, PhaseShifter, sweep_spectrum
from .errors import ConfigError
from .lut import build_lut, lut_to_binary, lut_to_csv
from .nn import TrainingConfig, MlpRunner, train_iris, train_mnist
from .noise import NoiseConfig, make_rng, perturb, time_average
from .presets import (
    PRESET_BUILDERS,
    experimental_4x4,
    experimental_mzi,
    ideal_array,
    simulation_9x9,
)

FLOAT_FMT = ".17g"


def _fmt(value) -> str:
    return format(float(value), FLOAT_FMT)


def write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


def write_matrix_csv(path: Path, matrix: np.ndarray) -> None:
    with open(path, "w") as fh:
        for row in np.atleast_2d(matrix):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_manifest(out_dir: Path, config: RunConfig) -> None:
    manifest = {
        "experiment": config.experiment,
        "seed": config.seed,
        "config": config.to_dict(),
        "config_sha256": config.config_hash(),
        "versions": {
            "xbar": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_array(config: RunConfig) -> CrossbarArray:
    dev = config.devices
    if dev.preset == "experimental_4x4":
        return experimental_4x4(
            fabrication_sigma_nm=dev.fabrication_sigma_nm,
            seed=config.seed,
            variant=config.topology.variant,
        )
    if config.topology.variant != "symmetric":
        raise ConfigError("legacy_asymmetric topology is modeled for the 4x4 preset")
    if dev.preset == "simulation_9x9":
        return simulation_9x9()
    return ideal_array(dev.n)


def noise_config(config: RunConfig) -> NoiseConfig | None:
    if not config.noise.enabled:
        return None
    return NoiseConfig(relative_sigma=config.noise.relative_sigma, seed=config.seed)


# -- individual experiments ------------------------------------------------------


def run_characterize_devices(config: RunConfig, out_dir: Path) -> None:
    array = build_array(config)
    n = array.n
    rng = make_rng(config.seed, stream=7)
    # MZI fringes for both banks, optionally with fabricated random phases.
    for direction, bank in ((FORWARD, array.forward_mzis), (BACKWARD, array.backward_mzis)):
        for port, dev in enumerate(bank):
            if config.devices.random_mzi_phases:
                shifter = PhaseShifter(
                    power_per_pi_mw=dev.shifter.power_per_pi_mw,
                    initial_phase_rad=float(rng.uniform(0.0, 2.0 * np.pi)),
                    max_power_mw=dev.shifter.max_power_mw,
                )
                dev = MziDevice(
                    shifter=shifter,
                    extinction_ratio_db=dev.extinction_ratio_db,
                    excess_loss_db=dev.excess_loss_db,
                )
            powers = np.linspace(0.0, 2.0 * dev.shifter.power_per_pi_mw, 401)
            t = dev.transmittance(powers)
            write_csv(
                out_dir / f"mzi_{direction}_in{port + 1}.csv",
                "power_mw,transmittance",
                zip(powers, t),
            )
    # Ring spectra around the reference, no heater power applied.
    ref = array.channels.reference_nm
    summary = []
    for i in range(n):
        for j in range(n):
            ring = array.ring_grid.rings[i][j]
            wl, t_drop, t_through = sweep_spectrum(ring, ref - 3.3, ref + 3.3, 4001)
            write_csv(
                out_dir / f"ring_{i + 1}_{j + 1}.csv",
                "wavelength_nm,t_drop,t_through",
                zip(wl, t_drop, t_through),
            )
            summary.append(
                (
                    f"ring_{i + 1}_{j + 1}",
                    ring.fsr_nm(),
                    ring.quality_factor(),
                    ring.resonance_wavelength_nm(0.0),
                )
            )
    write_csv(
        out_dir / "ring_summary.csv",
        "device,fsr_nm,quality_factor,resonance_nm",
        summary,
    )


FIG5_PROGRAMS = {
    "identity": lambda n: np.eye(n),
    "anti_diagonal": lambda n: np.eye(n)[::-1],
    "cyclic_shift": lambda n: np.roll(np.eye(n), 1, axis=1),
}


def run_measure_matrix(config: RunConfig, out_dir: Path) -> None:
    array = build_array(config)
    compiler = MatrixCompiler(array)
    cfg_noise = noise_config(config)
    rng = make_rng(config.seed, stream=1)
    summary = []
    for name, make in FIG5_PROGRAMS.items():
        target = make(array.n)
        compiled = compiler.compile_unit(target)
        fwd = array.measure_matrix(compiled.heater_settings_mw, FORWARD)
        bwd = array.measure_matrix(compiled.heater_settings_mw, BACKWARD)
        if cfg_noise is not None:
            reps = config.noise.time_average
            fwd = time_average(lambda: perturb(fwd, cfg_noise, rng), reps)
            bwd = time_average(lambda: perturb(bwd, cfg_noise, rng), reps)
        write_matrix_csv(out_dir / f"{name}_forward.csv", fwd)
        write_matrix_csv(out_dir / f"{name}_backward.csv", bwd)
        dark = fwd[target < 0.5]
        summary.append(
            (
                name,
                np.abs(fwd.T - bwd).max(),
                10.0 * np.log10(max(dark.max(), 1e-30)),
                10.0 * np.log10(max(dark.mean(), 1e-30)),
            )
        )
    write_csv(
        out_dir / "summary.csv",
        "program,transpose_max_abs_diff,dark_max_db,dark_mean_db",
        summary,
    )


def _train_computer_mlp(config: RunConfig, train_x, train_y, test_x, test_y, seed: int):
    tc = TrainingConfig(
        optimizer="sgd",
        learning_rate=config.training.learning_rate,
        epochs=config.training.epochs,
        batch_size=config.training.batch_size,
        loss="mse",
        backend="ideal",
        seed=seed,
        hidden=config.training.hidden,
    )
    return train_iris(tc, train_x, train_y, test_x, test_y, IdealBackend())


def run_iris_inference(config: RunConfig, out_dir: Path) -> None:
    dataset = load_iris(config.datasets.iris_csv)
    train_x, train_y, test_x, test_y = dataset.split(config.seed)
    result = _train_computer_mlp(config, train_x, train_y, test_x, test_y, config.seed)
    array = build_array(config)
    backend = PhotonicBackend(
        array,
        noise=noise_config(config),
        time_average_count=config.noise.time_average,
    )
    runner = MlpRunner(result.model, backend)
    outputs = runner.forward(test_x.T)
    predictions = outputs.argmax(axis=0)
    circuit_acc = float((predictions == test_y).mean())
    write_csv(
        out_dir / "accuracies.csv",
        "backend,accuracy",
        [("ideal", result.final_accuracy), ("photonic", circuit_acc)],
    )
    write_csv(
        out_dir / "test_outputs.csv",
        "sample,label,prediction,out0,out1,out2",
        [
            (str(k), str(int(test_y[k])), str(int(predictions[k])), *outputs[:, k])
            for k in range(test_y.size)
        ],
    )
    write_csv(out_dir / "cost_history.csv", "epoch,value",
              list(enumerate(result.cost_history, start=1)))


def run_iris_train(config: RunConfig, out_dir: Path) -> None:
    dataset = load_iris(config.datasets.iris_csv)
    train_x, train_y, test_x, test_y = dataset.split(config.seed)
    array = build_array(config)
    accs = []
    for run in range(config.training.runs):
        seed = config.seed + run
        backend = make_backend(
            config.training.backend,
            array,
            noise=noise_config(config),
            time_average_count=config.noise.time_average,
        )
        tc = TrainingConfig(
            optimizer=config.training.optimizer,
            learning_rate=config.training.learning_rate,
            epochs=config.training.epochs,
            batch_size=config.training.batch_size,
            loss="mse",
            backend=config.training.backend,
            seed=seed,
            hidden=config.training.hidden,
        )
        result = train_iris(tc, train_x, train_y, test_x, test_y, backend)
        write_csv(
            out_dir / f"cost_history_run{run + 1}.csv",
            "epoch,value",
            list(enumerate(result.cost_history, start=1)),
        )
        accs.append((f"run{run + 1}", result.final_accuracy))
    write_csv(out_dir / "final_accuracies.csv", "run,accuracy", accs)


def run_mnist_train(config: RunConfig, out_dir: Path) -> None:
    if config.datasets.mnist_dir is None:
        raise ConfigError(
            "mnist-train requires datasets.mnist_dir pointing at the IDX files"
        )
    data = load_mnist_subset(
        config.datasets.mnist_dir,
        config.datasets.mnist_train,
        config.datasets.mnist_test,
    )
    array = build_array(config) if config.training.backend != "ideal" else None
    backend = make_backend(
        config.training.backend,
        array,
        noise=noise_config(config),
        time_average_count=config.noise.time_average,
    )
    tc = TrainingConfig(
        optimizer="adam",
        learning_rate=config.training.learning_rate,
        epochs=config.training.epochs,
        batch_size=config.training.batch_size,
        loss="cross_entropy",
        backend=config.training.backend,
        seed=config.seed,
    )
    result = train_mnist(
        tc, data.train_images, data.train_labels, data.test_images, data.test_labels, backend
    )
    write_csv(
        out_dir / "accuracy_history.csv",
        "epoch,value",
        list(enumerate(result.accuracy_history, start=1)),
    )
    write_csv(
        out_dir / "cost_history.csv",
        "epoch,value",
        list(enumerate(result.cost_history, start=1)),
    )
    with open(out_dir / "confusion.csv", "w") as fh:
        for row in result.confusion:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def run_sweep_scaling(config: RunConfig, out_dir: Path) -> None:
    """Crosstalk scaling: MVM error against the exact product versus ring Q."""
    from .presets import ring_for_q
    from .crossbar import build_symmetric

    rng = make_rng(config.seed, stream=3)
    rows = []
    for q in (1e4, 1e5, 3e5):
        array = build_symmetric(9, ring_template=ring_for_q(q, lossless=True))
        compiler = MatrixCompiler(array)
        errs = []
        for _ in range(20):
            w = rng.uniform(0.0, 1.0, (9, 9))
            compiled = compiler.compile_unit(w)
            x = rng.uniform(0.0, 1.0, 9)
            y = array.forward_mvm(x, compiled.heater_settings_mw)
            ref = w.T @ x
            errs.append(np.linalg.norm(y - ref) / np.linalg.norm(ref))
        rows.append((q, float(np.mean(errs)), float(np.max(errs))))
    write_csv(out_dir / "scaling.csv", "quality_factor,mean_rel_l2,max_rel_l2", rows)
    # Path-loss uniformity report for both variants.
    report = path_loss_report(build_array(config).topology)
    write_matrix_csv(out_dir / "path_loss_forward_db.csv", report[FORWARD])
    write_matrix_csv(out_dir / "path_loss_backward_db.csv", report[BACKWARD])
    # A Fig.-7(a)-style calibration table for the (1,1) element.
    lut_array = experimental_4x4()
    lut = build_lut(lut_array, 0, 0)
    lut_to_csv(lut, out_dir / "lut_element_1_1.csv")
    lut_to_binary(lut, out_dir / "lut_element_1_1.lut")


RUNNERS = {
    "characterize-devices": run_characterize_devices,
    "measure-matrix": run_measure_matrix,
    "iris-inference": run_iris_inference,
    "iris-train": run_iris_train,
    "mnist-train": run_mnist_train,
    "sweep-scaling": run_sweep_scaling,
}


def run_experiment(config: RunConfig) -> Path:
    """Execute one experiment; returns the artifact directory."""
    config.validate()
    out_dir = Path(config.out_dir) / config.experiment
    out_dir.mkdir(parents=True, exist_ok=True)
    RUNNERS[config.experiment](config, out_dir)
    write_manifest(out_dir, config)
    return out_dir
