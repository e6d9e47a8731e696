"""Experiment configuration and the simulate / identify / sweep pipeline."""

from __future__ import annotations

import json
import logging
import re
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import spectral
from .inverse import InverseConfig, ReconstructionReport, numerical_derivative, reconstruct
from .kernel import ExpSumKernel, UniformGrid, eval_kernel
from .measurement import NOISE_STREAMS, MeasurementSet, add_noise, downsample, read_signal, write_signal
from .signals import Signal

log = logging.getLogger(__name__)

TOY_TERMS = ((0.1, 0.5), (0.2, 2.0), (0.5, 3.0))

SIMULATION_FILES = ("K", "Yf", "y_xi", "y_eta", "truth_M", "truth_N", "g")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    kernel: tuple = TOY_TERMS
    T: float = 5.0
    fine_step: float = 1e-3
    rate: float = 10.0
    noise_level: float = 0.01
    noise_distribution: str = "uniform"
    seed: int = 0
    input_f: str = "one_minus_exp"
    n_max: int = 400
    n_error_tmin: float = 0.3
    inverse: InverseConfig = field(default_factory=InverseConfig)

    def __post_init__(self):
        try:
            kernel = ExpSumKernel(self.kernel)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"kernel: {exc}") from None
        object.__setattr__(self, "kernel", tuple(kernel.terms))
        if not self.T > 0:
            raise ConfigError(f"T: horizon must be positive, got {self.T!r}")
        if not self.rate > 0:
            raise ConfigError(f"rate: must be positive, got {self.rate!r}")
        if not self.fine_step > 0:
            raise ConfigError(f"fine_step: must be positive, got {self.fine_step!r}")
        ratio = (1.0 / self.rate) / self.fine_step
        if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
            raise ConfigError(f"fine_step: {self.fine_step!r} does not divide 1/rate = {1.0 / self.rate!r}")
        steps = self.T * self.rate
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise ConfigError(f"T: horizon {self.T!r} is not a whole number of measurement steps")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ConfigError(f"n_max: must be an integer >= 1, got {self.n_max!r}")
        if not self.noise_level >= 0:
            raise ConfigError(f"noise_level: must be non-negative, got {self.noise_level!r}")
        if self.noise_distribution not in ("uniform", "gaussian"):
            raise ConfigError(f"noise_distribution: unknown value {self.noise_distribution!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError(f"seed: must be a non-negative integer, got {self.seed!r}")
        if self.input_f not in spectral.INPUT_PROFILES and not self.input_f.startswith("file:"):
            raise ConfigError(
                f"input_f: expected one of {sorted(spectral.INPUT_PROFILES)} or 'file:<path>', got {self.input_f!r}"
            )

    @property
    def kernel_obj(self) -> ExpSumKernel:
        return ExpSumKernel(self.kernel)

    @property
    def fine_grid(self) -> UniformGrid:
        return UniformGrid.from_horizon(self.T, self.fine_step)

    @property
    def measurement_grid(self) -> UniformGrid:
        return UniformGrid.from_horizon(self.T, 1.0 / self.rate)

    def to_dict(self) -> dict:
        return {
            "kernel": [list(p) for p in self.kernel],
            "T": self.T,
            "fine_step": self.fine_step,
            "rate": self.rate,
            "noise_level": self.noise_level,
            "noise_distribution": self.noise_distribution,
            "seed": self.seed,
            "input_f": self.input_f,
            "n_max": self.n_max,
            "n_error_tmin": self.n_error_tmin,
            "inverse": self.inverse.to_dict(),
        }


def paper_config(**overrides) -> ExperimentConfig:
    """The toy experiment: three-exponential kernel on [0, 5], 10 samples per unit, 1% noise."""
    return replace(ExperimentConfig(), **overrides)


def _line_of(text: str, key: str) -> int | None:
    match = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, match.start()) + 1 if match else None


def load_config(path) -> ExperimentConfig:
    """Parse a JSON config; missing keys take the toy-experiment defaults."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    return config_from_dict(raw, text=text, source=str(path))


def config_from_dict(raw: dict, text: str = "", source: str = "<config>") -> ExperimentConfig:
    def fail(key, message):
        line = _line_of(text, key) if text else None
        where = f"{source}:{line}" if line else source
        raise ConfigError(f"{where}: {message}")

    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: config must be a JSON object")
    top_keys = set(ExperimentConfig.__dataclass_fields__) - {"inverse"}
    inv_keys = set(InverseConfig.__dataclass_fields__)
    for key in raw:
        if key not in top_keys and key != "inverse":
            fail(key, f"unknown key {key!r}")
    inv_raw = raw.get("inverse", {})
    if not isinstance(inv_raw, dict):
        fail("inverse", "'inverse' must be an object")
    for key in inv_raw:
        if key not in inv_keys:
            fail(key, f"unknown inverse key {key!r}")
    try:
        inverse = InverseConfig(**inv_raw)
    except (TypeError, ValueError) as exc:
        key = next((k for k in inv_raw if k in str(exc)), "inverse")
        fail(key, str(exc))
    kwargs = {k: v for k, v in raw.items() if k != "inverse"}
    if "kernel" in kwargs:
        kwargs["kernel"] = tuple(tuple(p) if isinstance(p, (list, tuple)) else p for p in kwargs["kernel"])
    try:
        return ExperimentConfig(inverse=inverse, **kwargs)
    except ConfigError as exc:
        key = str(exc).split(":", 1)[0]
        fail(key, str(exc))
    except (TypeError, ValueError) as exc:
        fail("kernel", str(exc))


# -- forward synthesis -------------------------------------------------------


@dataclass(frozen=True)
class Simulation:
    """Noiseless fine-grid signals for one kernel and input."""

    K: Signal
    Yf: Signal
    y_eta: Signal
    M: Signal
    N: Signal
    g: Signal


def _boundary_input(config: ExperimentConfig, grid: UniformGrid) -> spectral.BoundaryInput:
    if config.input_f.startswith("file:"):
        f = read_signal(config.input_f[len("file:"):])
        if not f.grid.same_as(grid):
            raise ConfigError("input_f: custom f samples must be on the fine grid")
        if abs(f.values[0]) > 1e-12:
            raise ConfigError("input_f: custom f must satisfy f(0) = 0")
        return spectral.BoundaryInput(numerical_derivative(f))
    return spectral.boundary_input(config.input_f, grid)


def run_forward(config: ExperimentConfig) -> Simulation:
    kernel = config.kernel_obj
    grid = config.fine_grid
    log.info("solving %d modes on %d fine steps", config.n_max, grid.count)
    modes = spectral.solve_modes_expsum(kernel, config.n_max, grid)
    K = spectral.compute_K(modes, config.n_max, kernel)
    M = spectral.primitive_signal(kernel, grid)
    bnd = _boundary_input(config, grid)
    Yf = spectral.flux_from_boundary(bnd, K, M)
    y_eta = spectral.flux_y_eta(spectral.ramp_coefficients(config.n_max), modes, kernel)
    N = Signal(grid, eval_kernel(kernel, grid.points))
    return Simulation(K=K, Yf=Yf, y_eta=y_eta, M=M, N=N, g=bnd.g)


def measure(sim: Simulation, config: ExperimentConfig, seed: int | None = None) -> MeasurementSet:
    seed = config.seed if seed is None else seed
    clean = {"K": sim.K, "Yf": sim.Yf, "y_xi": -sim.K, "y_eta": sim.y_eta}
    noisy = {}
    for name, fine in clean.items():
        coarse = downsample(fine, config.rate)
        noisy[name] = add_noise(
            coarse, config.noise_level, seed, NOISE_STREAMS[name], config.noise_distribution
        )
    return MeasurementSet(
        **noisy,
        noise_level=config.noise_level,
        seed=seed,
        input_descriptor=config.input_f,
    )


def write_simulation(sim: Simulation, meas: MeasurementSet, config: ExperimentConfig, out) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, s in meas.signals().items():
        files[name] = f"{name}.csv"
        write_signal(s, out / files[name])
    for name, s in (("truth_M", sim.M), ("truth_N", sim.N), ("g", sim.g)):
        files[name] = f"{name}.csv"
        write_signal(downsample(s, config.rate), out / files[name])
    meta = {
        "noise_level": meas.noise_level,
        "noise_distribution": config.noise_distribution,
        "seed": meas.seed,
        "input_f": meas.input_descriptor,
        "gamma": spectral.gamma_functional(spectral.ramp_coefficients(config.n_max)),
        "files": files,
    }
    (out / "measurement.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return files


def cmd_simulate(config: ExperimentConfig, out, sim: Simulation | None = None) -> dict:
    sim = run_forward(config) if sim is None else sim
    meas = measure(sim, config)
    return write_simulation(sim, meas, config, out)


# -- identification -----------------------------------------------------------


def _read_optional(directory: Path, name: str) -> Signal | None:
    path = directory / f"{name}.csv"
    return read_signal(path) if path.exists() else None


def cmd_identify(directory, config: ExperimentConfig, out=None) -> ReconstructionReport:
    """Identify from the files in ``directory``; outputs go to ``out`` (default: same place)."""
    directory = Path(directory)
    out = directory if out is None else Path(out)
    signals = {name: _read_optional(directory, name) for name in SIMULATION_FILES}
    meta_path = directory / "measurement.json"
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    g = signals["g"]
    if g is None and config.inverse.method != "two_initial" and not config.input_f.startswith("file:"):
        grid = next((s.grid for s in signals.values() if s is not None), None)
        if grid is not None:
            g = spectral.boundary_input(config.input_f, grid).g
    gamma = meta.get("gamma")
    if gamma is None:
        gamma = spectral.gamma_functional(spectral.ramp_coefficients(config.n_max))

    report = reconstruct(
        config.inverse,
        g=g,
        K=signals["K"],
        Yf=signals["Yf"],
        y_xi=signals["y_xi"],
        y_eta=signals["y_eta"],
        gamma=gamma,
        truth_M=signals["truth_M"],
        truth_N=signals["truth_N"],
        seed=meta.get("seed"),
        n_error_tmin=config.n_error_tmin,
    )
    write_report(report, signals["truth_M"], signals["truth_N"], out)
    return report


def _plot_table(path: Path, t, columns: dict) -> None:
    names = ["t", *columns]
    lines = [",".join(names)]
    for i, ti in enumerate(t):
        row = [f"{ti:.17g}"] + [
            "" if col is None else f"{col[i]:.17g}" for col in columns.values()
        ]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _num(x):
    return None if x is None else float(x)


def write_report(report: ReconstructionReport, truth_M: Signal | None, truth_N: Signal | None, out) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_signal(report.M_rec, out / "M_rec.csv")
    write_signal(report.N_rec, out / "N_rec.csv")
    t = report.M_rec.times
    _plot_table(
        out / "plot_M.csv",
        t,
        {
            "truth": None if truth_M is None else truth_M.values,
            "reconstruction": report.M_raw.values,
            "averaged": report.M_rec.values,
        },
    )
    _plot_table(
        out / "plot_N.csv",
        t,
        {
            "truth": None if truth_N is None else truth_N.values,
            "reconstruction": report.N_raw.values,
            "averaged": report.N_rec.values,
        },
    )
    doc = {
        "method": report.config.method,
        "config": report.config.to_dict(),
        "seed": report.seed,
        "rel_l2_M": _num(report.rel_l2_M),
        "rel_l2_N": _num(report.rel_l2_N),
        "files": {
            "M_rec": "M_rec.csv",
            "N_rec": "N_rec.csv",
            "plot_M": "plot_M.csv",
            "plot_N": "plot_N.csv",
        },
    }
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return doc


# -- pipeline ------------------------------------------------------------------


def cmd_pipeline(config: ExperimentConfig, out, sweep: int | None = None) -> dict:
    """Simulate then identify; with ``sweep`` repeat over consecutive seeds."""
    out = Path(out)
    sim = run_forward(config)
    if not sweep:
        cmd_simulate(config, out, sim=sim)
        report = cmd_identify(out, config)
        return {"seed": config.seed, "rel_l2_M": report.rel_l2_M, "rel_l2_N": report.rel_l2_N}

    rows = []
    for seed in range(config.seed, config.seed + sweep):
        run_config = replace(config, seed=seed)
        run_dir = out / f"seed_{seed}"
        cmd_simulate(run_config, run_dir, sim=sim)
        report = cmd_identify(run_dir, run_config)
        rows.append((seed, report.rel_l2_M, report.rel_l2_N))
    lines = ["seed,rel_l2_M,rel_l2_N"] + [f"{s},{m:.17g},{n:.17g}" for s, m, n in rows]
    (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    summary = {
        "runs": len(rows),
        "median_rel_l2_M": statistics.median(r[1] for r in rows),
        "median_rel_l2_N": statistics.median(r[2] for r in rows),
        "method": config.inverse.method,
        "noise_level": config.noise_level,
    }
    (out / "sweep_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary
