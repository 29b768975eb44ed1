"""
Analysis Runner Module
Batch commands: load a space, run an analysis, write a deterministic report
and its plot data
"""

import os
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .file_manager import FileManager
from .metric_space import Convention, Space, doubling_constant, mass_profile, regularity_fit
from .modulus_solver import annulus_check, annulus_family, p_modulus
from .mollifier import (default_t_grid, errors_nonincreasing, gehring_probe, mollify, uniform_rhi_probe,
                        weak_convergence_probe, default_test_set)
from .quasi_metrizer import STABLE, comparison_check, metrize, sa_verdict
from .settings_manager import SettingsManager, settings_manager as default_settings
from .space_builder import EXAMPLES, build_example, list_examples, random_weight
from .utils import ConfigError, NotDoublingError, ProgressTracker, is_unbounded
from .weight_classifier import DEFAULT_AP_GRID, classify

logger = logging.getLogger(__name__)

TOOL_NAME = "mms-weights"
COMMANDS = ("classify", "metrize", "mollify", "modulus", "examples", "suite")

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_FINDING = 2


@dataclass
class RunConfig:
    """One command invocation; None means "use the configured default" """
    command: str
    input: Optional[str] = None
    example: Optional[str] = None
    family: Optional[str] = None
    p_grid: Optional[List[float]] = None
    eps_grid: Optional[List[float]] = None
    t_grid: Optional[List[float]] = None
    r: Optional[float] = None
    tol: Optional[float] = None
    p: float = 1.0
    x0: Optional[int] = None
    restricted_chains: bool = False
    open_balls: bool = False
    scales: Optional[List[int]] = None
    out: Optional[str] = None
    seed: Optional[int] = None

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command '{self.command}' (expected one of {', '.join(COMMANDS)})")
        for name in ("p_grid", "eps_grid", "t_grid"):
            values = getattr(self, name)
            if values is not None and (not values or any(not v > 0 for v in values)):
                raise ConfigError(f"--{name.replace('_', '-')} values must be positive")
        if self.p_grid is not None and any(v < 1 for v in self.p_grid):
            raise ConfigError("--p-grid values must be >= 1")
        if not self.p >= 1:
            raise ConfigError(f"--p must be >= 1, got {self.p!r}")
        if self.r is not None and not self.r > 0:
            raise ConfigError(f"--r must be positive, got {self.r!r}")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError(f"--tol must be positive, got {self.tol!r}")
        if self.scales is not None and any(s < 2 for s in self.scales):
            raise ConfigError("--scales values must be >= 2")
        if self.input and self.example:
            raise ConfigError("--input and --example are mutually exclusive")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class CommandOutcome:
    exit_code: int
    report_path: Optional[str] = None
    plot_path: Optional[str] = None
    report: Dict[str, Any] = field(default_factory=dict)
    written: List[str] = field(default_factory=list)


class AnalysisRunner:
    """Chạy phân tích: mỗi lệnh một method"""

    def __init__(self, settings: Optional[SettingsManager] = None, file_manager: Optional[FileManager] = None):
        self.settings = settings or default_settings
        output = self.settings.get_section("output")
        self.file_manager = file_manager or FileManager(
            output.get("output_dir", "outputs"), int(output.get("space_digits", 17)),
            int(output.get("report_digits", 15)), float(self.settings.get("tolerances", "metric", 1e-9)))

    def run(self, config: RunConfig) -> CommandOutcome:
        config.validate()
        logger.info(f"Running command '{config.command}'")
        outcome = getattr(self, f"run_{config.command}")(config)
        logger.info(f"Command '{config.command}' finished with exit code {outcome.exit_code}")
        return outcome

    # ----------------------------------------------------------------- helpers

    def load(self, config: RunConfig, scale: Optional[int] = None) -> Tuple[Space, Optional[np.ndarray]]:
        if config.input:
            return self.file_manager.load_space(config.input)
        name = config.example or config.family
        if not name:
            raise ConfigError("give --input PATH or --example NAME")
        if scale is None and config.scales:
            scale = config.scales[0]
        space, weight = build_example(name, scale)
        if config.seed is not None and name.startswith("random"):
            weight = random_weight(space, config.seed, 10.0)
        return space, weight

    def _grid(self, values: Optional[List[float]], key: str) -> List[float]:
        return list(values) if values is not None else list(self.settings.get("grids", key))

    def _origin(self, space: Space, config: RunConfig) -> int:
        x0 = config.x0 if config.x0 is not None else space.meta.get("origin", 0)
        return space.check_point(x0)

    def space_summary(self, space: Space, weight: Optional[np.ndarray], convention: Convention) -> Dict[str, Any]:
        fit = regularity_fit(space, float(self.settings.get("regularity", "fit_radius_fraction", 0.125)))
        mu_doubling = doubling_constant(space, None, convention)
        return {
            "name": space.name,
            "n": space.n,
            "Q": space.Q,
            "diam": space.diam,
            "min_spacing": space.min_spacing,
            "weighted": weight is not None,
            "convention": convention.value,
            "mu_doubling": {"value": mu_doubling.value,
                            "witness": {"center": mu_doubling.witness[0], "radius": mu_doubling.witness[1]}},
            "regularity": {"c_A": fit.c_A, "Q_fit": fit.Q_fit, "sample_size": fit.sample_size,
                           "witness": {"center": fit.witness[0], "radius": fit.witness[1]}},
        }

    def _report(self, config: RunConfig, effective: Dict[str, Any], space: Optional[Dict[str, Any]],
                result: Dict[str, Any]) -> Dict[str, Any]:
        return {
            "tool": TOOL_NAME,
            "version": __version__,
            "command": config.command,
            "config": {"run": config.to_dict(), "effective": effective},
            "space": space,
            "result": result,
        }

    def _write(self, config: RunConfig, default_name: str, report: Dict[str, Any],
               curves: Dict[str, List[Tuple[float, float]]], exit_code: int) -> CommandOutcome:
        path = self.file_manager.resolve(config.out or f"{default_name}.json")
        self.file_manager.save_report(path, report)
        plot_path = os.path.splitext(path)[0] + ".tsv"
        self.file_manager.save_plot_data(plot_path, curves)
        return CommandOutcome(exit_code, path, plot_path, report, [path, plot_path])

    # ---------------------------------------------------------------- commands

    def run_classify(self, config: RunConfig) -> CommandOutcome:
        space, weight = self.load(config)
        convention = Convention.OPEN if config.open_balls else Convention.CLOSED
        tol = config.tol if config.tol is not None else float(self.settings.get("tolerances", "implication"))
        p_grid = self._grid(config.p_grid, "p_grid")
        eps_grid = self._grid(config.eps_grid, "eps_grid")
        ap_grid = list(self.settings.get("grids", "ap_grid", DEFAULT_AP_GRID))
        rhi_grid = config.eps_grid if config.eps_grid is not None else self._grid(None, "rhi_eps_grid")

        witness_tol = float(self.settings.get("tolerances", "witness", 1e-12))
        report = classify(space, weight, p_grid, eps_grid, ap_grid, rhi_grid, tol, witness_tol)
        result = report.to_dict()
        if convention is Convention.OPEN:
            nu_open = doubling_constant(space, weight, Convention.OPEN)
            result["nu_doubling_open"] = {"value": nu_open.value,
                                          "witness": {"center": nu_open.witness[0], "radius": nu_open.witness[1]}}
        effective = {"p_grid": p_grid, "eps_grid": eps_grid, "ap_grid": ap_grid, "rhi_grid": list(rhi_grid),
                     "tol": tol, "witness_tol": witness_tol}
        doc = self._report(config, effective, self.space_summary(space, weight, convention), result)
        exit_code = EXIT_FINDING if report.violations else EXIT_OK
        return self._write(config, f"classify-{space.name}", doc, report.curves(), exit_code)

    def run_metrize(self, config: RunConfig) -> CommandOutcome:
        space, weight = self.load(config)
        x0 = self._origin(space, config)
        metrization = metrize(space, weight)
        result: Dict[str, Any] = {"distortion": metrization.distortion,
                                  "witness": metrization.summary()["witness"]}
        if config.restricted_chains:
            restricted = metrize(space, weight, restricted=True)
            result["restricted"] = restricted.summary()
        try:
            comparison = comparison_check(space, weight)
            result["comparison"] = {"constant": comparison.constant,
                                    "witness": list(comparison.witness) if comparison.witness else None,
                                    "left_inequality_holds": comparison.left_inequality_holds,
                                    "nu_doubling": comparison.doubling}
        except NotDoublingError as e:
            result["comparison"] = {"error": str(e),
                                    "witness": {"center": e.witness[0], "radius": e.witness[1]}}
        profile = mass_profile(space, x0, weight)
        result["mass_profile"] = {"center": x0, "points": [[r, m] for r, m in profile]}
        convention = Convention.OPEN if config.open_balls else Convention.CLOSED
        doc = self._report(config, {"restricted_chains": config.restricted_chains, "x0": x0},
                           self.space_summary(space, weight, convention), result)
        return self._write(config, f"metrize-{space.name}", doc, {"mass_profile": profile}, EXIT_OK)

    def run_mollify(self, config: RunConfig) -> CommandOutcome:
        space, weight = self.load(config)
        opts = self.settings.get_section("mollify")
        t_grid = sorted(config.t_grid or default_t_grid(space), reverse=True)
        gehring_grid = config.eps_grid or self._grid(None, "gehring_eps_grid")
        region = default_test_set(space, float(opts.get("test_set_fraction", 0.25)))

        partition_tol = float(self.settings.get("tolerances", "partition", 1e-12))
        total = float(np.sum(space.weighted_masses(weight)))

        tracker = ProgressTracker(len(t_grid), label="mollify")
        scales = []
        for t in t_grid:
            mollified = mollify(space, weight, t)
            gehring = gehring_probe(space, mollified, gehring_grid, float(opts.get("gehring_factor", 10.0)))
            row = mollified.summary()
            row["partition_error"] = float(np.max(np.abs(np.asarray(mollified.phi.sum(axis=1)).ravel() - 1.0)))
            row["total_mass_error"] = abs(float(np.sum(mollified.omega_t * space.mu)) - total)
            row["partition_ok"] = (row["partition_error"] <= partition_tol
                                   and row["total_mass_error"] <= partition_tol * max(total, 1.0))
            if not row["partition_ok"]:
                logger.warning(f"Partition of unity off at t={t:.6g}: {row['partition_error']!r}")
            row["gehring"] = {"eps_star": gehring.eps_star, "constant": gehring.constant, "base": gehring.base,
                              "qualified": gehring.qualified, "curve": [[e, c] for e, c in gehring.curve]}
            scales.append(row)
            tracker.update(message=f"t={t:.6g}")
        tracker.complete("Mollification")

        weak = weak_convergence_probe(space, weight, t_grid, {"U": region},
                                      float(opts.get("convergence_floor", 1e-12)))
        errors = [row["relative_error"] for row in weak]
        rhi = uniform_rhi_probe(space, weight, t_grid, factor=float(opts.get("uniform_factor", 4.0)))
        result = {
            "scales": scales,
            "weak_convergence": {"rows": weak, "test_set": region.tolist(),
                                 "errors_nonincreasing": errors_nonincreasing(
                                     errors, float(opts.get("inversion_allowance", 0.1)))},
            "uniform_rhi": {"constants": [{"t": c.t, "constant": c.constant,
                                           "witness": list(c.witness) if c.witness else None}
                                          for c in rhi.constants],
                            "spread": rhi.spread, "uniform": rhi.uniform, "factor": rhi.factor,
                            "informative": rhi.informative, "note": rhi.note},
        }
        curves = {
            "weak_error": [(row["t"], row["relative_error"]) for row in weak],
            "uniform_rhi": [(c.t, c.constant) for c in rhi.constants],
            "gehring_eps_star": [(row["t"], row["gehring"]["eps_star"]) for row in scales],
        }
        effective = {"t_grid": t_grid, "gehring_eps_grid": list(gehring_grid), "partition_tol": partition_tol, **opts}
        doc = self._report(config, effective, self.space_summary(space, weight, Convention.CLOSED), result)
        return self._write(config, f"mollify-{space.name}", doc, curves, EXIT_OK)

    def run_modulus(self, config: RunConfig) -> CommandOutcome:
        space, weight = self.load(config)
        opts = self.settings.get_section("modulus")
        tol = config.tol if config.tol is not None else float(opts.get("tol", 1e-6))
        solver_options = {"max_cuts_per_round": int(opts.get("max_cuts_per_round", 32)),
                          "iteration_factor": int(opts.get("iteration_factor", 10))}
        x0 = self._origin(space, config)
        r = config.r if config.r is not None else space.diam / 8.0
        if config.p == 1.0:
            check = annulus_check(space, x0, r, tol, **solver_options)
            result, modulus = check.to_dict(), check.modulus
        else:
            modulus = p_modulus(space, annulus_family(space, x0, r), config.p, tol, **solver_options)
            result = {"x0": x0, "r": r, "modulus": {k: v for k, v in modulus.to_dict().items() if k != "rho"}}
        result["bracket_width"] = modulus.upper - modulus.lower
        effective = {"x0": x0, "r": r, "p": config.p, "tol": tol, **solver_options}
        doc = self._report(config, effective, self.space_summary(space, weight, Convention.CLOSED), result)
        curves = {"rho": [(float(i), float(v)) for i, v in enumerate(modulus.rho)]}
        return self._write(config, f"modulus-{space.name}", doc, curves, EXIT_OK)

    def run_examples(self, config: RunConfig) -> CommandOutcome:
        names = [config.example] if config.example else list_examples()
        directory = self.file_manager.ensure_dir(config.out or self.file_manager.output_dir)
        written = []
        for name in names:
            space, weight = self.load(RunConfig("examples", example=name, scales=config.scales, seed=config.seed))
            written.append(self.file_manager.save_space(os.path.join(directory, f"{name}.json"), space, weight))
        logger.info(f"Wrote {len(written)} example space files to {directory}")
        return CommandOutcome(EXIT_OK, written=written)

    def run_suite(self, config: RunConfig) -> CommandOutcome:
        name = config.family or config.example
        if not name:
            raise ConfigError("suite needs --family NAME")
        if name not in EXAMPLES:
            raise ConfigError(f"unknown family '{name}' (known: {', '.join(list_examples())})")
        base = EXAMPLES[name].default_scale
        scales = config.scales or [base, 2 * base - 1]
        if len(scales) < 2:
            raise ConfigError("suite needs at least two scales")
        opts = self.settings.get_section("strong")
        p_grid = self._grid(config.p_grid, "p_grid")
        family = [self.load(RunConfig("suite", example=name, seed=config.seed), scale) for scale in scales]
        report = sa_verdict(family, float(opts.get("stability_factor", 2.0)), float(opts.get("ap_exponent", 4.0)),
                            p_grid, config.restricted_chains, check_a1=EXAMPLES[name].a1_weight)
        result = report.to_dict()
        result["family"] = name
        curves = {"distortion": [(float(s.n), s.distortion) for s in report.scales]}
        if report.ap_stable is not None:
            curves["ap"] = [(float(s.n), s.ap) for s in report.scales]
        curves["a1"] = [(float(s.n), s.a1) for s in report.scales]
        finite = [s.distortion for s in report.scales if not is_unbounded(s.distortion)]
        logger.info(f"Suite '{name}' over scales {scales}: {report.verdict} ({len(finite)} finite distortions)")
        effective = {"family": name, "scales": scales, "p_grid": p_grid, "check_a1": EXAMPLES[name].a1_weight, **opts}
        doc = self._report(config, effective, None, result)
        clean = report.verdict == STABLE and report.ap_stable is not False and report.a1_stable is not False
        exit_code = EXIT_OK if clean else EXIT_FINDING
        return self._write(config, f"suite-{name}", doc, curves, exit_code)
