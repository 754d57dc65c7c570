"""
Experiment runner: loads an experiment file, runs one subcommand and writes
its JSON report and CSV tables.
"""

import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from skewdrift.analysis.classify import classify_drift
from skewdrift.cli.specs import (
    flux_field, parse_spec, scalar_field, skew_field, solenoidal_field, vanishing_field,
)
from skewdrift.config.settings import SCHEMA_VERSION, SUBCOMMANDS, config
from skewdrift.fem.fields import Functional, Layout, h1_seminorm, l2_error
from skewdrift.fem.io import write_field_csv, write_json, write_mesh_csv, write_table_csv
from skewdrift.fem.mesh import Domain, Mesh, build_mesh
from skewdrift.potentials.construct import (
    boundary_flux_residual, newtonian_potential, poincare_potential_ball, skew_from_stream,
    solenoidal_residual, stream_function_2d, weak_div_residual,
)
from skewdrift.solver.approximation import approximation_solution, truncate_skew
from skewdrift.truncation.lipschitz import (
    TruncationData, caccioppoli_replay, chebyshev_check, lipschitz_constant, lipschitz_truncation,
)
from skewdrift.utils.convergence import ConvergenceTracker
from skewdrift.utils.errors import ConfigError, NumericalError, SkewDriftError, ValidationError
from skewdrift.zhikov.example import nonuniqueness_report
from skewdrift.zhikov.harmonics import build_pair

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger("runner")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

CONSTRUCTIONS = ("stream", "poincare", "newtonian")


def exit_code(error: Optional[BaseException]) -> int:
    """Map a run outcome to the process exit code."""
    if error is None:
        return EXIT_OK
    if isinstance(error, (ConfigError, ValidationError)):
        return EXIT_VALIDATION
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_FAILURE


class ExperimentRunner:
    """Runs configured experiments and reports progress."""

    def __init__(self, status_callback: Callable[[str], None] = None):
        """
        Initialize the runner.

        Args:
            status_callback: Callback function for status updates
        """
        self.status_callback = status_callback or (lambda x: None)
        self.files: List[str] = []

    def _update_status(self, status: str) -> None:
        """Update status via callback."""
        if self.status_callback:
            self.status_callback(status)
        logger.info(status)

    @property
    def out_dir(self) -> Path:
        return Path(config.get("run", "out"))

    def _record(self, path: Path) -> None:
        self.files.append(path.name)

    def run(
        self,
        subcommand: str,
        config_path: str,
        out: Optional[str] = None,
        threads: Optional[int] = None,
        seed: Optional[int] = None,
        overrides: Optional[Dict[Tuple[str, str], Any]] = None,
    ) -> Tuple[bool, Optional[Dict[str, Any]], Optional[BaseException]]:
        """
        Run one experiment.

        Args:
            subcommand: One of solve, norms, potential, truncate, caccioppoli, zhikov
            config_path: Experiment file
            out: Output directory (overrides run.out)
            threads: Worker threads (overrides run.threads)
            seed: Seed of the random test functions (overrides run.seed)
            overrides: Further (section, key) -> value settings

        Returns:
            Tuple containing:
            - bool: True if the run succeeded
            - Optional[Dict[str, Any]]: The report payload if successful
            - Optional[BaseException]: The error otherwise
        """
        config.reset_to_defaults()
        self.files = []
        try:
            if subcommand not in SUBCOMMANDS:
                raise ConfigError(f"Unknown subcommand '{subcommand}'", [subcommand])
            config.load_config(config_path, subcommand)
            for (section, key), value in (overrides or {}).items():
                if value is not None:
                    config.set(section, key, value)
            if out is not None:
                config.set("run", "out", str(out))
            if threads is not None:
                config.set("run", "threads", threads)
            if seed is not None:
                config.set("run", "seed", seed)

            self._update_status(f"Running {subcommand} from {config_path}...")
            results = getattr(self, f"_run_{subcommand}")()
            payload = {
                "schema": SCHEMA_VERSION,
                "subcommand": subcommand,
                "config": config.resolved(),
                "results": results,
                "files": sorted(self.files),
            }
            path = write_json(payload, self.out_dir / f"{subcommand}_report.json")
            self._update_status(f"Report written to {path}")
            return True, payload, None
        except SkewDriftError as e:
            self._update_status(f"{subcommand} failed: {e}")
            return False, None, e
        except Exception as e:
            self._update_status(f"An unexpected error occurred: {e}")
            logger.exception("Unexpected error")
            return False, None, e

    # helpers

    def _mesh(self, section: str) -> Mesh:
        domain = config.get(section, "domain")
        if not domain:
            raise ConfigError(f"Missing required configuration keys: {section}.domain", [f"{section}.domain"])
        mesh = build_mesh(Domain.from_name(domain), config.get(section, "resolution"))
        self._update_status(f"Built {domain} mesh with {mesh.n_vertices} vertices and {mesh.n_cells} cells")
        return mesh

    def _spec(self, section: str, key: str):
        return parse_spec(config.get(section, key), f"{section}.{key}")

    def _schedule(self, section: str) -> List[float]:
        return config.get_floats(section, "schedule") or config.get_floats("solver", "schedule")

    def _functional(self, section: str, mesh: Mesh) -> Functional:
        density = self._spec(section, "f_density")
        flux_spec = parse_spec(config.get(section, "f_flux", "none"), f"{section}.f_flux")
        flux = None if flux_spec.is_zero else flux_field(flux_spec, mesh)
        if density.is_zero and flux is not None:
            return Functional(flux=flux)
        return Functional(density=scalar_field(density, mesh, Layout.CELL), flux=flux)

    def _write_field(self, field, name: str) -> None:
        self._record(write_field_csv(field, self.out_dir / name))

    def _write_mesh(self, mesh: Mesh, stem: str) -> None:
        for path in write_mesh_csv(mesh, self.out_dir, stem):
            self._record(path)

    def _write_table(self, rows, name: str, columns) -> None:
        self._record(write_table_csv(rows, self.out_dir / name, columns))

    # subcommands

    def _run_solve(self) -> Dict[str, Any]:
        mesh = self._mesh("solve")
        a_field = skew_field(self._spec("solve", "drift"), mesh)
        f = self._functional("solve", mesh)
        tracker = ConvergenceTracker()
        self._update_status("Solving along the truncation schedule...")
        report = approximation_solution(mesh, a_field, f, self._schedule("solve"), tracker=tracker)
        self._update_status(tracker.get_summary())

        results = report.to_dict()
        reference = config.get("solve", "reference")
        if reference == "poisson_ball":
            density = self._spec("solve", "f_density")
            if not mesh.domain.is_round or density.kind != "constant" or f.flux is not None:
                raise ValidationError("reference poisson_ball needs a round domain and a constant density")
            n = mesh.dimension
            scale = density.parameter / (2.0 * n)
            results["reference_l2_error"] = l2_error(report.u, lambda x: scale * (1.0 - (x ** 2).sum(axis=1)))
        elif reference != "none":
            raise ConfigError(f"Invalid value for solve.reference: '{reference}'", ["solve.reference"])

        self._write_mesh(mesh, "solve_mesh")
        self._write_field(report.u, "solve_u.csv")
        history = tracker.get_history_dict()
        rows = [
            {"level": level, "gradient_norm": norm,
             "increment": history["increments"][i - 1] if i > 0 else math.nan,
             "linear_residual": residuals[-1]}
            for i, (level, norm, residuals) in enumerate(
                zip(history["truncation_levels"], history["gradient_norms"], history["linear_residuals"]))
        ]
        self._write_table(rows, "solve_levels.csv", ["level", "gradient_norm", "increment", "linear_residual"])
        return results

    def _run_norms(self) -> Dict[str, Any]:
        mesh = self._mesh("norms")
        spec = self._spec("norms", "field")
        m = scalar_field(spec, mesh)
        refined = None
        if config.get("norms", "refine"):
            self._update_status("Sampling the field on the refined mesh...")
            refined = scalar_field(spec, build_mesh(mesh.domain, 2 * mesh.resolution))
        depth = config.get("norms", "bmo_max_depth") or None
        self._update_status("Classifying against the uniqueness criteria...")
        report = classify_drift(m, refined, bmo_max_depth=depth)
        self._update_status("\n" + report.table())

        self._write_field(m, "norms_field.csv")
        rows = [{"criterion": name, "value": report.quantities.get(name, math.nan), "verdict": verdict.value}
                for name, verdict in report.criteria.items()]
        self._write_table(rows, "norms_criteria.csv", ["criterion", "value", "verdict"])
        return report.to_dict()

    def _run_potential(self) -> Dict[str, Any]:
        mesh = self._mesh("potential")
        a = solenoidal_field(self._spec("potential", "field"), mesh)
        construction = config.get("potential", "construction")
        if construction not in CONSTRUCTIONS:
            raise ConfigError(
                f"Invalid value for potential.construction: '{construction}' (one of {', '.join(CONSTRUCTIONS)})",
                ["potential.construction"])
        self._update_status(f"Constructing the {construction} potential...")
        if construction == "stream":
            alpha = stream_function_2d(a)
            self._write_field(alpha, "potential_alpha.csv")
            a_field = skew_from_stream(alpha)
        elif construction == "poincare":
            a_field = poincare_potential_ball(a)
        else:
            a_field = newtonian_potential(a)

        self._write_field(a, "potential_drift.csv")
        self._write_field(a_field, "potential_A.csv")
        residual = weak_div_residual(a_field, a)
        self._update_status(f"Weak divergence residual {residual:.3e}")
        return {
            "construction": construction,
            "weak_div_residual": residual,
            "solenoidal_residual": solenoidal_residual(a),
            "boundary_flux_residual": boundary_flux_residual(a),
            "max_entry": a_field.max_entry(),
            "mesh_size": mesh.h,
        }

    def _run_truncate(self) -> Dict[str, Any]:
        mesh = self._mesh("truncate")
        u = vanishing_field(self._spec("truncate", "field"), mesh)
        constant = config.get("truncation", "lipschitz_c")
        data = TruncationData.of(u)
        levels = sorted(config.get_floats("truncate", "lambdas"))
        if not levels:
            raise ConfigError("truncate.lambdas is empty", ["truncate.lambdas"])
        rows = []
        for level in levels:
            self._update_status(f"Truncating at lambda={level:g}...")
            truncated = lipschitz_truncation(u, level, constant, data)
            good = data.good_set(level, constant)
            measure, bound = chebyshev_check(data.g, mesh, level)
            rows.append({
                "level": level,
                "good_fraction": float(good.mean()),
                "lipschitz": lipschitz_constant(truncated),
                "lipschitz_bound": constant * level,
                "increment": h1_seminorm(truncated - u),
                "bad_measure": measure,
                "chebyshev_bound": bound,
                "agrees_on_good_set": bool(np.array_equal(truncated.values[good], u.values[good])),
            })
            self._write_field(truncated, f"truncate_u_{level:g}.csv")
        self._write_field(u, "truncate_u.csv")
        columns = list(rows[0])
        self._write_table(rows, "truncate_levels.csv", columns)
        return {"constant": constant, "rows": rows}

    def _run_caccioppoli(self) -> Dict[str, Any]:
        mesh = self._mesh("caccioppoli")
        a_field = skew_field(self._spec("caccioppoli", "drift"), mesh)
        f = self._functional("caccioppoli", mesh)
        if f.flux is not None or (f.density is not None and np.any(f.density.values != 0.0)):
            raise ValidationError("caccioppoli replays solutions of the homogeneous problem; set f_density = 0")
        schedule = self._schedule("caccioppoli")
        field_spec = self._spec("caccioppoli", "field")
        results: Dict[str, Any] = {}
        if field_spec.is_zero:
            self._update_status("Solving the homogeneous problem for the replayed field...")
            report = approximation_solution(mesh, a_field, f, schedule, check_apriori=False)
            u = report.u
            bounded = truncate_skew(a_field, report.truncation_levels[-1])
            results["solve"] = report.to_dict()
        else:
            # injected field, replayed against the truncated drift at the top of the schedule
            u = vanishing_field(field_spec, mesh)
            bounded = truncate_skew(a_field, max(schedule))
        table = caccioppoli_replay(u, bounded, config.get_floats("caccioppoli", "lambdas"))
        self._update_status(f"Caccioppoli chain holds: {table.holds}")
        self._write_field(u, "caccioppoli_u.csv")
        self._write_table(table.row_dicts(), "caccioppoli_rows.csv", list(table.row_dicts()[0]))
        self._write_table(table.aggregates, "caccioppoli_aggregates.csv", ["epsilon", "lhs", "rhs", "residual", "holds"])
        results.update(table.to_dict())
        results["injected"] = not field_spec.is_zero
        return results

    def _run_zhikov(self) -> Dict[str, Any]:
        mesh = build_mesh(Domain.from_name("unit_ball"), config.get("zhikov", "resolution"))
        rho = config.get("zhikov", "rho")
        self._update_status(f"Building the example at resolution {mesh.resolution}, rho={rho:g}...")
        pair = build_pair()
        report = nonuniqueness_report(pair, mesh, rho, config.get_floats("zhikov", "schedule"))
        self._update_status(report.verdict())
        self._write_field(report.solve.u, "zhikov_approximation_u.csv")
        if report.norms is not None:
            rows = [{"criterion": name, "value": report.norms.quantities.get(name, math.nan),
                     "verdict": verdict.value} for name, verdict in report.norms.criteria.items()]
            self._write_table(rows, "zhikov_criteria.csv", ["criterion", "value", "verdict"])
        return report.to_dict()


def run(
    subcommand: str,
    config_path: str,
    out: Optional[str] = None,
    threads: Optional[int] = None,
    seed: Optional[int] = None,
    overrides: Optional[Dict[Tuple[str, str], Any]] = None,
    status_callback: Callable[[str], None] = None,
) -> int:
    """Run one experiment and return its exit code."""
    runner = ExperimentRunner(status_callback)
    _, _, error = runner.run(subcommand, config_path, out, threads, seed, overrides)
    return exit_code(error)
