"""Command-line driver: stationary construction, simulation and rate analysis.

Exit status: 0 success (including a nonexistence report), 1 runtime error,
2 usage error, 3 invalid configuration.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import (
    WeightSpec,
    certificate_campaign,
    energy_balance_residual,
    fit_decay,
    phi_potential,
    read_decay_csv,
    relative_energy,
    sup_norm_perturbation,
    weighted_norm,
    write_decay_csv,
)
from .config import ExperimentConfig, load_config, with_output_dir
from .errors import (
    BoundViolated,
    ConfigParseError,
    ConfigValidationError,
    EnvelopeViolated,
    MicropolarError,
    NonpositiveNorm,
    WindowTooSmall,
)
from .grid import Grid, trapezoid
from .model import ModelParams, derive_constants
from .solver import SimulationError, State, build_initial, run, write_snapshot_csv
from .stationary import (
    Regime,
    StationaryProfile,
    build_profile,
    classify,
    ode_residual,
    validate_decay,
    verify_transonic_bounds,
    write_profile_csv,
)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_INVALID = 0, 1, 2, 3

ENVELOPE_CAP = 10.0
MASS_DRIFT_TOL = 1e-6
EXPONENT_TOL = {Regime.SUPERSONIC: 0.3, Regime.TRANSONIC: 0.2}


class Report:
    def __init__(self):
        self.lines: list[str] = []
        self.results: dict[str, bool] = {}

    def note(self, text: str) -> None:
        self.lines.append(text)

    def result(self, name: str, ok: bool, value) -> None:
        v = f"{value:.6g}" if isinstance(value, float) else str(value)
        self.results[name] = bool(ok)
        self.lines.append(f"RESULT {name} {'PASS' if ok else 'FAIL'} {v}")

    @property
    def all_pass(self) -> bool:
        return all(self.results.values())

    def write(self, path: Path) -> None:
        path.write_text("\n".join(self.lines) + "\n")


def _theoretical(regime: Regime, theta: float) -> float:
    return theta / 2 if regime is Regime.SUPERSONIC else theta / 4


def _output_times(t_end: float, interval: float) -> np.ndarray:
    k = int(math.floor(t_end / interval * (1 + 1e-12)))
    ts = interval * np.arange(k + 1)
    if ts[-1] < t_end:
        ts = np.append(ts, t_end)
    return ts


def _stationary_stage(cfg: ExperimentConfig, out: Path, report: Report) -> StationaryProfile | None:
    p = cfg.params
    prob = classify(p)
    dc = derive_constants(p)
    report.note(f"M_plus = {dc.M_plus:.17g}")
    report.note(f"chi0 = {prob.chi0:.17g}")
    report.note("chi_c = none" if prob.chi_c is None else f"chi_c = {prob.chi_c:.17g}")
    report.note(f"regime = {prob.regime.value}")
    if cfg.regime != "auto":
        report.result("regime_hint", cfg.regime == prob.regime.value, prob.regime.value)
    if prob.regime is Regime.NONEXISTENT:
        why = "M_+ < 1" if dc.M_plus < 1 else "boundary velocity outside the admissible range"
        report.note(f"no stationary solution exists ({why}); nothing to simulate")
        report.result("classification", True, prob.regime.value)
        return None
    report.result("classification", True, prob.regime.value)

    profile = build_profile(p, n=cfg.grid.n, L=cfg.grid.L)
    report.note(f"L = {profile.grid.L:.17g}")
    report.note(f"n = {profile.grid.n}")
    report.note("far field: Dirichlet to the stationary profile at x = L")
    report.note(f"ode_residual = {ode_residual(profile):.6e}")
    try:
        env = validate_decay(profile)
    except EnvelopeViolated as exc:
        report.result("envelope", False, str(exc).replace(" ", "_"))
        write_profile_csv(profile, out / "profile.csv")
        return profile
    if env.xi0 is not None:
        profile = replace(profile, xi0_measured=env.xi0, envelope_consts=dict(env.C_by_order))
        report.note(f"xi0 = {env.xi0:.17g}")
        report.note(f"sigma = {env.sigma:.17g}")
        report.note(f"tail_fit_residual = {env.fit_residual:.6e}")
    else:
        profile = replace(profile, envelope_consts=dict(env.C_by_order))
        report.note(f"exponential_tail_residual = {env.exponential_residual:.6e}")
        report.note(f"algebraic_tail_residual = {env.algebraic_residual:.6e}")
    for k, c in env.C_by_order.items():
        report.note(f"envelope_C_k{k} = {c:.6g}")
    report.result("envelope", env.C <= ENVELOPE_CAP, env.C)
    if profile.regime is Regime.TRANSONIC and profile.chi0 >= 1.0:
        try:
            b = verify_transonic_bounds(profile)
            report.result("transonic_bounds", True, b.worst_margin)
        except BoundViolated as exc:
            report.result("transonic_bounds", False, exc.x)
    write_profile_csv(profile, out / "profile.csv")
    return profile


def _simulation_stage(cfg: ExperimentConfig, profile: StationaryProfile, out: Path, report: Report) -> None:
    p = cfg.params
    spec = cfg.perturbation.resolve(profile.grid.L)
    init = build_initial(profile, spec)
    for name, v in init.weighted_norms.items():
        report.note(f"initial_weighted_norm_{name} = {v:.6e}")
    ts = _output_times(cfg.run.t_end, cfg.run.snapshot_interval)
    kw = dict(output_times=ts, cfl=cfg.run.cfl, well_balanced=cfg.run.well_balanced)
    traj = run(init.state, cfg.run.t_end, profile, p, observer=lambda s: s, **kw)
    floor_traj = run(State.from_profile(profile), cfg.run.t_end, profile, p,
                     observer=lambda s: sup_norm_perturbation(s, profile), **kw)
    floor = float(floor_traj.records[-1])
    report.note(f"well_balanced = {str(cfg.run.well_balanced).lower()}")
    report.note(f"steps = {traj.steps}")
    report.note(f"stationarity_floor = {floor:.6e}")

    snapdir = out / "snapshots"
    snapdir.mkdir(parents=True, exist_ok=True)
    w0 = cfg.weights[0]
    sup, wnorm, energy = [], [], []
    for i, s in enumerate(traj.records):
        write_snapshot_csv(s, snapdir / f"snap_{i:05d}.csv")
        sup.append(sup_norm_perturbation(s, profile))
        pert = (s.rho - profile.rho_t, s.u - profile.u_t, s.omega - profile.omega_t)
        wnorm.append(math.sqrt(sum(weighted_norm(f, w0, s.grid) ** 2 for f in pert)))
        energy.append(relative_energy(s, profile, w0, p))
    sup = np.array(sup)

    if len(ts) >= 3:
        _, R = energy_balance_residual(ts, traj.records, profile, p, w0)
        report.note(f"energy_residual_max = {float(np.max(np.abs(R))):.6e}")
    report.result("mass_drift", abs(traj.mass.drift) <= MASS_DRIFT_TOL, abs(traj.mass.drift))

    fit = None
    if sup[0] == 0.0:
        # nothing to decay: the run measures the floor itself
        delta = derive_constants(p).delta_tilde
        report.result("stationarity_floor", float(sup.max()) <= 1e-2 * delta, float(sup.max()))
    else:
        fit = _fit_and_judge(ts, sup, cfg, profile.regime, report)
        if profile.regime is Regime.SUPERSONIC:
            report.result("final_ratio", sup[-1] < 0.1 * sup[0], float(sup[-1] / sup[0]))
        report.result("above_floor", sup[-1] > floor, float(sup[-1]))
    write_decay_csv(out / "decay.csv", ts, sup, wnorm, energy, fit)


def _fit_and_judge(ts, sup, cfg: ExperimentConfig, regime: Regime, report: Report):
    burn = cfg.run.effective_burn_in
    target = _theoretical(regime, cfg.perturbation.theta)
    try:
        fit = fit_decay(ts, sup, burn, target)
    except (WindowTooSmall, NonpositiveNorm) as exc:
        report.result("decay_exponent", False, type(exc).__name__)
        return None
    report.note(f"fit_window = [{fit.fit_window[0]:.6g}, {fit.fit_window[1]:.6g}]")
    report.note(f"fit_residual = {fit.fit_residual:.6e}")
    report.note(f"theoretical_exponent = {target:.6g}")
    report.result("decay_exponent", fit.passes(EXPONENT_TOL[regime]), fit.fitted_exponent)
    if regime is Regime.TRANSONIC:
        window = sup[np.asarray(ts) >= burn]
        report.result("monotone_decay", bool(np.all(np.diff(window) < 0)), float(np.max(np.diff(window))))
    return fit


def run_experiment(cfg: ExperimentConfig, simulate: bool = True) -> tuple[int, Report]:
    """Run the pipeline for ``cfg`` and write its artifacts into ``cfg.output_dir``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = Report()
    profile = _stationary_stage(cfg, out, report)
    if profile is not None and simulate:
        _simulation_stage(cfg, profile, out, report)
    report.write(out / "report.txt")
    return EXIT_OK, report


def rates(cfg: ExperimentConfig) -> Report:
    """Re-fit the decay exponent from an existing ``decay.csv``."""
    out = Path(cfg.output_dir)
    cols, _ = read_decay_csv(out / "decay.csv")
    regime = classify(cfg.params).regime
    report = Report()
    if regime is Regime.NONEXISTENT:
        report.note("no stationary solution exists; no rates to fit")
        return report
    _fit_and_judge(cols["t"], cols["sup_norm"], cfg, regime, report)
    report.write(out / "rates.txt")
    return report


def check_suite(seed: int) -> Report:
    """Randomized invariant checks; deterministic for a given seed."""
    from scipy.integrate import quad

    rng = np.random.default_rng(seed)
    report = Report()

    camp = certificate_campaign(rng, Grid(40.0, 2000), cases=1000)
    report.result("poincare_certificates", camp.violations == 0, camp.violations)

    worst = 0.0
    for gamma in (1.0, 1.4, 2.0):
        p = ModelParams(1, 1, 1, 1.0, gamma, 1, -1.5, -1.35, 0.05)
        for _ in range(50):
            r, rt = rng.uniform(0.25, 4.0, size=2)
            ref, _ = quad(lambda s: (p.pressure(s) - p.pressure(rt)) / s**2, rt, r, epsabs=1e-14, epsrel=1e-13)
            worst = max(worst, abs(phi_potential(r, rt, p) - ref))
    report.result("phi_quadrature", worst <= 1e-10, worst)

    t = np.linspace(0, 50, 101)
    k = rng.uniform(0.2, 3.0)
    fit = fit_decay(t, (1 + t) ** -k, 10.0)
    report.result("power_law_fit", abs(fit.fitted_exponent - k) < 1e-9 and fit.fit_residual < 1e-9,
                  abs(fit.fitted_exponent - k))

    g = Grid(10.0, 500)
    f = rng.normal(size=g.x.size)
    plain = math.sqrt(trapezoid(f * f, g.h))
    report.result("unweighted_norm_bitwise", weighted_norm(f, WeightSpec(0.0, 0.3), g) == plain, plain)
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="micropolar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext, need_cfg in (
        ("stationary", "build and validate the stationary profile", True),
        ("simulate", "full pipeline: profile, simulation, decay fit", True),
        ("rates", "re-fit decay exponents from an existing decay.csv", True),
        ("check", "run the randomized invariant suite", False),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=need_cfg, help="flat key = value config file")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.add_argument("--seed", type=int, default=0, help="seed for randomized suites")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK

    if args.command == "check":
        report = check_suite(args.seed)
        print("\n".join(report.lines))
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            report.write(Path(args.out) / "check.txt")
        return EXIT_OK if report.all_pass else EXIT_RUNTIME

    try:
        cfg = load_config(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (ConfigParseError, ConfigValidationError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.out:
        cfg = with_output_dir(cfg, args.out)

    try:
        if args.command == "rates":
            report = rates(cfg)
        else:
            _, report = run_experiment(cfg, simulate=args.command == "simulate")
    except (MicropolarError, SimulationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print("\n".join(report.lines))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
