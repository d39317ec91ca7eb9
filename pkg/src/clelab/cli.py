"""``clelab <command> --config <path> [--out <dir>] [--seed <n>]``"""
from __future__ import annotations

import argparse
import json
import logging
import math
import platform
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import algebra as alg_mod
from .config import COMMANDS, ConfigError, RunSpec, parse_config
from .dynamics import FlowState, StokesDrift, run, write_monitors_csv
from .presets import PresetError, build_field
from .spectral import (
    FieldError,
    Grid2D,
    l2_norm_sq,
    laplacian,
    random_bandlimited,
    velocity_from_stream,
    write_field_clf2,
)
from .stability import (
    StabilityError,
    apriori_check,
    c_functional,
    first_variation_gamma,
    make_shear_steady,
    ratio_bounds,
    second_variation,
    steady_residual,
    write_apriori_csv,
)

log = logging.getLogger("clelab")

EXIT_OK, EXIT_CHECKS_FAILED, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    comparison: str = "<"

    @property
    def passed(self) -> bool:
        if self.comparison == "<":
            return bool(self.value < self.tolerance)
        if self.comparison == "<=":
            return bool(self.value <= self.tolerance)
        if self.comparison == "==":
            return bool(self.value == self.tolerance)
        raise ValueError(self.comparison)

    def as_dict(self) -> dict:
        return {"name": self.name, "value": _json_float(self.value), "tolerance": self.tolerance,
                "comparison": self.comparison, "passed": self.passed}


def _json_float(x):
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _rel_drift(values) -> float:
    v = np.asarray(values, float)
    ref = abs(v[0])
    dev = float(np.abs(v - v[0]).max())
    if ref == 0:
        return 0.0 if dev == 0 else math.inf
    return dev / ref


# --- scenarios ------------------------------------------------------------------

def _inertia_matrix(choice, dim: int, preset_ok: tuple) -> np.ndarray | str:
    if isinstance(choice, list):
        if len(choice) != dim * dim:
            raise ConfigError(f"inertia has {len(choice)} entries, expected {dim * dim}")
        return np.asarray(choice, float).reshape(dim, dim)
    if choice not in preset_ok:
        raise ConfigError(f"inertia preset {choice!r} is not available here (use one of {preset_ok})")
    return choice


def _build_algebra(cfg, base_dir: Path):
    a = cfg.algebra
    spec = None
    if a.kind == "file":
        path = Path(a.file)
        alg, spec = alg_mod.load_algebra(path if path.is_absolute() else base_dir / path)
    elif a.kind == "so3":
        inertia = _inertia_matrix(a.inertia, 3, ("identity", "diag123"))
        if isinstance(inertia, str):
            inertia = np.eye(3) if inertia == "identity" else np.diag([1.0, 2.0, 3.0])
        alg = alg_mod.make_so3(inertia)
    else:
        alg = alg_mod.make_sine_algebra(a.n, _inertia_matrix(a.inertia, a.n * a.n - 1, ("identity", "laplacian")))
    if a.v_s is not None:
        spec = alg_mod.ShiftedCocycleSpec(np.asarray(a.v_s, float))
    if spec is None:
        spec = alg_mod.ShiftedCocycleSpec(np.eye(alg.dim)[-1])
    if spec.v_s.shape != (alg.dim,):
        raise ConfigError(f"v_s has length {spec.v_s.size}, algebra dim is {alg.dim}")
    return alg, spec


def _algebra_check(spec: RunSpec, out: Path, rng) -> tuple[list, dict]:
    p = spec.parameters
    alg, shift = _build_algebra(p, spec.base_dir)
    r = alg_mod.identity_sweep(alg, shift, rng, p.samples)
    tol = p.tolerance
    checks = [
        Check("jacobi_basis_max_residual", alg_mod.jacobi_residual(alg), alg.jacobi_tol, "<="),
        Check("jacobi_random_max_residual", r["jacobi"], tol),
        Check("cocycle_identity_max_residual", r["cocycle"], tol),
        Check("coboundary_max_residual", r["coboundary"], 1e-12),
        Check("b_identity_max_residual", r["b_identity"], 1e-12),
        Check("w_identity_max_residual", r["w_identity"], 1e-12),
        Check("formulation_equivalence_max_residual", r["formulation"], tol),
    ]
    ic = p.integrate
    v0 = np.asarray(ic.v0, float) if ic.v0 is not None else rng.standard_normal(alg.dim)
    if v0.shape != (alg.dim,):
        raise ConfigError(f"integrate.v0 has length {v0.size}, algebra dim is {alg.dim}")
    steps = int(round(ic.t_end / ic.dt))
    traj = alg_mod.integrate_extended(alg, shift, alg_mod.ExtendedVector(v0, ic.a), ic.dt, steps)
    a_dev = max(abs(s.a - ic.a) for s in traj.states)
    checks += [
        Check("central_coordinate_max_deviation", a_dev, 0.0, "=="),
        Check("energy_relative_drift", _rel_drift(traj.energies), p.energy_rtol),
    ]
    sub = alg_mod.Trajectory(traj.times[::ic.write_every], traj.states[::ic.write_every],
                             traj.energies[::ic.write_every])
    alg_mod.write_trajectory_csv(sub, out / "trajectory.csv")
    alg_mod.save_algebra(out / "algebra.toml", alg, shift)
    return checks, {"algebra": alg.name, "dim": alg.dim}


def _simulate(spec: RunSpec, out: Path, rng) -> tuple[list, dict]:
    p = spec.parameters
    grid = Grid2D(p.grid.nx, p.grid.ny)
    omega0 = build_field(grid, p.initial.as_dict(), rng, spec.base_dir)
    drift = StokesDrift(build_field(grid, p.drift.as_dict(), rng, spec.base_dir))
    result = run(FlowState(omega0), drift, p.dt, p.t_end, p.monitor_stride, tuple(p.casimir_powers))
    write_monitors_csv(result.records, out / "monitors.csv", p.casimir_powers)
    write_field_clf2(result.final.omega, out / "final_omega.clf2")
    recs = result.records
    checks = [Check("energy_relative_drift", _rel_drift([r.energy for r in recs]), p.energy_rtol)]
    for i, k in enumerate(p.casimir_powers):
        series = [r.casimirs[i] for r in recs]
        if k == 1:
            checks.append(Check("casimir_1_max_abs", float(np.abs(series).max()), 0.0, "=="))
        else:
            checks.append(Check(f"casimir_{k}_relative_drift", _rel_drift(series), p.casimir_rtol))
    return checks, {"max_cfl": result.max_cfl, "steps": result.steps, "records": len(recs)}


def _steady_verify(spec: RunSpec, out: Path, rng) -> tuple[list, dict]:
    p = spec.parameters
    grid = Grid2D(p.grid.nx, p.grid.ny)
    steady, drift = make_shear_steady(grid, p.steady.u_amp, p.steady.w_amp, p.steady.mode)
    res = steady_residual(steady, drift)
    c1, c2 = ratio_bounds(steady, drift)
    worst_var = worst_sand = 0.0
    min_d2k = math.inf
    for _ in range(p.samples):
        psi_t = random_bandlimited(grid, rng, p.test_kmax)
        h2 = math.sqrt(l2_norm_sq(psi_t) + l2_norm_sq(laplacian(psi_t)) + l2_norm_sq(laplacian(laplacian(psi_t))))
        worst_var = max(worst_var, abs(first_variation_gamma(steady, drift, None, psi_t)) / h2)
        g2 = l2_norm_sq(velocity_from_stream(psi_t))
        l2 = l2_norm_sq(laplacian(psi_t))
        two_c = 2.0 * c_functional(psi_t, steady, drift)
        worst_sand = max(worst_sand, (g2 + c1 * l2) - two_c, two_c - (g2 + c2 * l2))
        xi = velocity_from_stream(psi_t)
        bound = 0.5 * min(1.0, c1) * (l2_norm_sq(xi) + l2_norm_sq(laplacian(psi_t)))
        min_d2k = min(min_d2k, (second_variation(steady, drift, xi) - bound) / bound)
    checks = [
        Check("steady_residual", res, p.steady_tol),
        Check("ratio_c1_error", abs(c1 - steady.c1), 1e-10),
        Check("ratio_c2_error", abs(c2 - steady.c2), 1e-10),
        Check("first_variation_over_h2_max", worst_var, p.variation_tol, "<="),
        Check("sandwich_max_violation", worst_sand, 1e-9, "<="),
        Check("second_variation_relative_deficit", -min_d2k, 1e-12, "<="),
    ]
    report = {"c1": c1, "c2": c2, "steady_residual": res, "slope": steady.profile.slope}
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    return checks, report


def _stability_run(spec: RunSpec, out: Path, rng) -> tuple[list, dict]:
    p = spec.parameters
    grid = Grid2D(p.grid.nx, p.grid.ny)
    steady, drift = make_shear_steady(grid, p.steady.u_amp, p.steady.w_amp, p.steady.mode)
    psi_t0 = build_field(grid, p.perturbation.as_dict(), rng, spec.base_dir)
    report = apriori_check(steady, drift, psi_t0, p.dt, p.t_end, p.monitor_stride, p.tolerance)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    write_apriori_csv(report, out / "apriori.csv")
    excess = max(report.lhs) / report.rhs - 1.0 if report.rhs > 0 else (0.0 if max(report.lhs) == 0 else math.inf)
    checks = [
        Check("apriori_relative_excess", excess, p.tolerance, "<="),
        Check("gamma_relative_drift", report.gamma_drift, p.drift_tol),
        Check("c_relative_drift", report.c_drift, p.drift_tol),
    ]
    return checks, {"satisfied": report.satisfied, "c1": steady.c1, "c2": steady.c2,
                    "max_cfl": report.max_cfl}


SCENARIOS = {
    "algebra-check": _algebra_check,
    "simulate": _simulate,
    "steady-verify": _steady_verify,
    "stability-run": _stability_run,
}


def execute(spec: RunSpec) -> int:
    """Run a scenario, write its outputs and manifest; 0 iff all checks pass."""
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    start = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    manifest = {
        "command": spec.command,
        "config": spec.model_dump(mode="json", exclude={"base_dir"}),
        "version": __version__,
        "platform": {"python": platform.python_version(), "numpy": np.__version__},
        "start_time": start.isoformat(),
    }
    try:
        checks, info = SCENARIOS[spec.command](spec, out, rng)
        status = EXIT_OK if all(c.passed for c in checks) else EXIT_CHECKS_FAILED
        manifest["checks"] = [c.as_dict() for c in checks]
        manifest["info"] = {k: _json_float(v) if isinstance(v, float) else v for k, v in info.items()}
        failures = [c.name for c in checks if not c.passed]
    except (ConfigError, PresetError, FieldError, StabilityError, alg_mod.AlgebraError) as exc:
        status, failures = EXIT_CONFIG, [f"invalid scenario: {exc}"]
        manifest["checks"] = []
    except (RuntimeError, FloatingPointError, AssertionError) as exc:
        status, failures = EXIT_RUNTIME, [f"{type(exc).__name__}: {exc}"]
        manifest["checks"] = []
    manifest["end_time"] = datetime.now(timezone.utc).isoformat()
    manifest["wall_time_s"] = time.perf_counter() - t0
    manifest["failures"] = failures
    manifest["passed"] = status == EXIT_OK
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="clelab", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="TOML run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="seed for randomized sweeps")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = parse_config(args.config, args.command, seed=args.seed, output_dir=args.out)
    except ConfigError as exc:
        json.dump({"passed": False, "failures": str(exc).splitlines()}, sys.stderr, indent=2)
        sys.stderr.write("\n")
        return EXIT_CONFIG
    log.info("running %s -> %s", spec.command, spec.output_dir)
    status = execute(spec)
    manifest = json.loads((Path(spec.output_dir) / "manifest.json").read_text())
    stream = sys.stdout if status == EXIT_OK else sys.stderr
    json.dump({"passed": manifest["passed"], "failures": manifest["failures"],
               "checks": manifest["checks"]}, stream, indent=2)
    stream.write("\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
