"""Command-line orchestration: experiments, verification, result emission.

Subcommands: simulate, ou-diagnose, attractor-pullback, verify, convergence.
Exit codes: 0 success, 1 validation failure, 2 numerical error, 3 invariant
suite failure.  All numeric CSV fields use fixed 17-significant-digit decimal
formatting, so identical config + version gives bitwise-identical outputs;
wall-clock timings live only in the manifest.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, example_config, load_config
from .errors import ConfigurationError, NumericalError
from .evolution import (
    apply as chain_apply,
    build_chain,
    chain_matrix,
    cocycle_residual,
    contractivity_margin,
    decay_fit,
    operator_norm,
    span_grid,
)
from .noise import (
    NoiseSpectrum,
    WienerPath,
    sample_two_sided_path,
    restrict,
    wiener_shift,
)
from .operators import (
    DiffusionField,
    FractionalNormSpec,
    assemble_operator,
    evaluate_driver,
    fractional_apply,
    fractional_norm,
)
from .ou import (
    construct_initial,
    propagate,
    stationarity_residual,
    stationarity_residual_table,
    temperedness_diagnostic,
)
from .pathwise import (
    NonlinearitySpec,
    SemilinearProblem,
    corrector_integral,
    integrate_semilinear,
    nemytskii,
    observed_order,
)
from .attractor import (
    default_ensemble,
    integrate_v,
    pullback_estimate,
    transform_consistency,
)


def fmt(x: float) -> str:
    return f"{x:.17g}"


def map_ordered(fn, items, threads: int):
    """Apply fn over items with a thread pool, results in input order
    (deterministic aggregation survives parallelism)."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


class OutputSink:
    """Collects emitted files for the manifest; removes partial outputs
    (except logs) when a run fails."""

    def __init__(self, out_dir: Path, config_hash: str):
        self.out_dir = out_dir
        self.config_hash = config_hash
        self.files: list[str] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def write_text(self, name: str, text: str) -> Path:
        target = self.out_dir / name
        target.write_text(text)
        self.files.append(name)
        return target

    def write_csv(self, name: str, header: list[str], rows: list[list]) -> Path:
        lines = [f"# config_sha256={self.config_hash}", ",".join(header)]
        for row in rows:
            lines.append(
                ",".join(fmt(v) if isinstance(v, float) else str(v) for v in row)
            )
        return self.write_text(name, "\n".join(lines) + "\n")

    def write_json(self, name: str, payload) -> Path:
        return self.write_text(name, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def cleanup_partial(self) -> None:
        for name in self.files:
            if name.endswith(".log"):
                continue
            try:
                (self.out_dir / name).unlink()
            except OSError:
                pass

    def manifest(self, timings: dict, per_path_seeds: list[int]) -> None:
        payload = {
            "artifact_version": __version__,
            "config_sha256": self.config_hash,
            "outputs": sorted(self.files),
            "per_path_seeds": per_path_seeds,
            "timings_seconds": timings,
        }
        tmp = self.out_dir / "manifest.json.tmp"
        tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        tmp.replace(self.out_dir / "manifest.json")


def _path_window_for(cfg: RunConfig, t_lo: float, t_hi: float, seed: int):
    spectrum = cfg.spectrum()
    return sample_two_sided_path(spectrum, t_lo, t_hi, cfg.dt, seed)


def cmd_simulate(cfg: RunConfig, sink: OutputSink, threads: int) -> None:
    """Ensemble of semilinear trajectories; per-trajectory and summary CSVs."""
    problem = cfg.problem()
    m = cfg.galerkin_dim
    horizon = cfg.horizon
    t_lo = -cfg.driver_horizon if cfg.amp > 0 else 0.0
    seeds = [cfg.seed + i for i in range(cfg.n_paths)]

    def run_one(seed: int):
        path = _path_window_for(cfg, t_lo, horizon, seed)
        chain = build_chain(problem.field, path, span_grid(0.0, horizon, cfg.dt), m)
        return integrate_semilinear(problem, chain, path)

    trajectories = map_ordered(run_one, seeds, threads)
    spec_alpha = FractionalNormSpec(alpha=cfg.alpha)
    n_rec = min(tr.states.shape[0] for tr in trajectories)
    times = trajectories[0].times[:n_rec]
    first = trajectories[0]
    rows = []
    for k, t in enumerate(first.times):
        state = first.states[k]
        rows.append(
            [t, float(np.linalg.norm(state)), fractional_norm(state, spec_alpha)]
            + [float(v) for v in state[:8]]
        )
    header = ["t", "l2_norm", "alpha_norm"] + [f"mode_{i}" for i in range(1, 9)]
    sink.write_csv("trajectory_first.csv", header, rows)

    stack = np.stack([tr.states[:n_rec] for tr in trajectories])
    mean_norm = np.sqrt(np.einsum("pki,pki->pk", stack, stack)).mean(axis=0)
    var_modes = stack.var(axis=0, ddof=1)[:, :8]
    rows = [
        [float(times[k]), float(mean_norm[k])] + [float(v) for v in var_modes[k]]
        for k in range(n_rec)
    ]
    header = ["t", "mean_l2_norm"] + [f"var_mode_{i}" for i in range(1, 9)]
    sink.write_csv("ensemble_summary.csv", header, rows)
    blowups = [tr.blowup_time for tr in trajectories if tr.status == "blowup"]
    sink.write_json(
        "simulate_summary.json",
        {
            "n_paths": cfg.n_paths,
            "blowups": len(blowups),
            "first_blowup_time": blowups[0] if blowups else None,
        },
    )


def cmd_ou_diagnose(cfg: RunConfig, sink: OutputSink, threads: int) -> None:
    """Stationarity residual report (JSON) + temperedness table (CSV)."""
    field = cfg.field()
    m = cfg.galerkin_dim
    a = cfg.truncation_horizon
    horizon_t = cfg.temperedness_horizon
    cover = horizon_t + a + (cfg.driver_horizon if cfg.amp > 0 else 0.0)
    ts = [1.0, 2.0, 4.0]
    path = _path_window_for(cfg, -max(cover, a + cfg.driver_horizon + 8.0), 8.0, cfg.seed)
    entries = stationarity_residual_table(field, path, ts, ts, a, m)
    sink.write_json(
        "stationarity_residuals.json",
        {
            "entries": [
                {
                    "t": e.t,
                    "s": e.s,
                    "residual": e.residual,
                    "relative": e.relative,
                    "truncation_bound": e.truncation_bound,
                }
                for e in entries
            ],
            "note": "finite-horizon surrogate; residual measured on aligned grids",
        },
    )
    table = temperedness_diagnostic(
        field, path, cfg.beta, list(cfg.gammas), horizon_t, a, m
    )
    header = (
        ["t", "norm"]
        + [f"discounted_gamma_{g:g}" for g in table.gammas]
        + ["log_plus_over_t"]
    )
    rows = [
        [r.t, r.norm] + [float(d) for d in r.discounted] + [r.log_plus_over_t]
        for r in table.rows
    ]
    sink.write_csv("temperedness_table.csv", header, rows)
    sink.write_json(
        "temperedness_summary.json",
        {"slope_upper_half": table.slope, "beta": table.beta, "note": table.note},
    )


def cmd_attractor_pullback(cfg: RunConfig, sink: OutputSink, threads: int) -> None:
    """Pullback estimate: endpoint clouds, diameters, Hausdorff steps."""
    problem = cfg.problem()
    m = cfg.galerkin_dim
    max_t = max(cfg.horizons)
    cover = max_t + cfg.truncation_horizon + (
        cfg.driver_horizon if cfg.amp > 0 else 0.0
    )
    path = _path_window_for(cfg, -cover, 1.0, cfg.seed)
    n_random = max(cfg.ensemble_size - 17, 0)
    ensemble = default_ensemble(
        m, cfg.alpha, radius=cfg.ball_radius, n_random=n_random, seed=cfg.seed
    )[: cfg.ensemble_size]
    estimate = pullback_estimate(
        problem, path, list(cfg.horizons), ensemble, cfg.eta, m
    )
    rows = []
    for j, t_j in enumerate(estimate.horizons):
        cloud = estimate.endpoints[j]
        for i in range(cloud.shape[0]):
            rows.append([t_j, i] + [float(v) for v in cloud[i]])
    header = ["horizon", "member"] + [f"mode_{i}" for i in range(1, m + 1)]
    sink.write_csv("pullback_endpoints.csv", header, rows)
    sink.write_json(
        "pullback_summary.json",
        {
            "horizons": list(estimate.horizons),
            "diameters_alpha": estimate.diameters,
            "eta_norms": estimate.eta_norms,
            "hausdorff_steps": estimate.hausdorff_steps,
            "flagged_blowup": estimate.flagged,
            "note": estimate.note,
        },
    )


def cmd_convergence(cfg: RunConfig, sink: OutputSink, threads: int) -> None:
    """Dyadic strong self-convergence study with fitted orders."""
    m = cfg.galerkin_dim
    problem = cfg.problem()
    levels = cfg.levels
    base = cfg.dt
    fine_dt = base / 2 ** (levels + 2)
    cover_lo = -(cfg.driver_horizon if cfg.amp > 0 else 0.0)
    seeds = [cfg.seed + i for i in range(cfg.n_paths)]

    def run_one(seed: int):
        fine = sample_two_sided_path(cfg.spectrum(), cover_lo, cfg.horizon, fine_dt, seed)
        ref_chain = build_chain(
            problem.field, fine, span_grid(0.0, cfg.horizon, fine_dt), m
        )
        ref = integrate_semilinear(problem, ref_chain, fine)
        errs = []
        for lev in range(levels):
            dt_lev = base / 2 ** lev
            factor = int(round(dt_lev / fine_dt))
            coarse_path = restrict(fine, factor)
            chain = build_chain(
                problem.field, coarse_path, span_grid(0.0, cfg.horizon, dt_lev), m
            )
            coarse = integrate_semilinear(problem, chain, coarse_path)
            errs.append(
                float(np.linalg.norm(coarse.states[-1] - ref.states[-1]))
            )
        return errs

    all_errs = np.array(map_ordered(run_one, seeds, threads))
    rms = np.sqrt((all_errs ** 2).mean(axis=0))
    dts = [base / 2 ** lev for lev in range(levels)]
    order = observed_order(dts, list(rms)) if levels >= 2 else math.nan
    rows = [[dts[i], float(rms[i])] for i in range(levels)]
    sink.write_csv("convergence_errors.csv", ["dt", "rms_error"], rows)
    sink.write_json(
        "convergence_summary.json",
        {
            "fitted_strong_order": order,
            "reference_dt": fine_dt,
            "n_paths": cfg.n_paths,
        },
    )


# ---------------------------------------------------------------------------
# verify: the quick invariant suite


def _verify_checks(cfg: RunConfig) -> list[dict]:
    checks: list[dict] = []

    def record(name: str, value: float, tolerance: float, passed=None) -> None:
        ok = bool(value <= tolerance) if passed is None else bool(passed)
        checks.append(
            {
                "name": name,
                "value": float(value),
                "tolerance": float(tolerance),
                "passed": ok,
                "margin": float(value / tolerance) if tolerance > 0 else 0.0,
            }
        )

    m = 16
    dt = 2.0 ** -6
    spectrum = NoiseSpectrum(8, 1.0)
    field = DiffusionField()
    path = sample_two_sided_path(spectrum, -12.0, 2.0, dt, cfg.seed)

    # noise invariants
    record("noise_anchor_zero", float(np.abs(path.value_at(0)).max()), 0.0)
    sh = wiener_shift(path, 32)
    double = wiener_shift(sh, 16)
    direct = wiener_shift(path, 48)
    record(
        "noise_shift_group_bitwise",
        0.0 if np.array_equal(double.values, direct.values) else 1.0,
        0.0,
    )
    back = wiener_shift(sh, -32)
    record(
        "noise_shift_roundtrip_bitwise",
        0.0 if np.array_equal(back.values, path.values) else 1.0,
        0.0,
    )
    z1 = evaluate_driver(path, 0.5, field)
    z2 = evaluate_driver(wiener_shift(path, path.index_of(0.5)), 0.0, field)
    record("driver_shift_consistency", abs(z1 - z2), 0.0)

    # operator invariants
    op = assemble_operator(field, 0.25, path, m)
    scale = float(np.abs(op.matrix).max())
    record(
        "operator_symmetry",
        float(np.abs(op.matrix - op.matrix.T).max()),
        1e-12 * scale,
    )
    op_shifted = assemble_operator(
        field, 0.0, wiener_shift(path, path.index_of(0.25)), m
    )
    record(
        "operator_structural_stationarity",
        float(np.abs(op.matrix - op_shifted.matrix).max()),
        1e-12 * scale,
    )
    record(
        "operator_spectral_bound",
        op.max_eigenvalue,
        -field.poincare_rate * (1.0 - 1e-6),
    )
    vec = np.linspace(1.0, 2.0, m)
    once = fractional_apply(m, 0.3, fractional_apply(m, 0.4, vec))
    record(
        "fractional_composition",
        float(np.abs(once - fractional_apply(m, 0.7, vec)).max()),
        1e-10 * float(np.abs(once).max()),
    )

    # evolution invariants
    grid = span_grid(0.0, 1.0, dt)
    chain = build_chain(field, path, grid, m)
    v = np.linspace(1.0, 0.5, m)
    record(
        "evolution_identity",
        float(np.abs(chain_apply(chain, 0.5, 0.5, v) - v).max()),
        0.0,
    )
    left = chain_apply(chain, 1.0, 0.5, chain_apply(chain, 0.5, 0.25, v))
    right = chain_apply(chain, 1.0, 0.25, v)
    record(
        "evolution_composition_bitwise",
        0.0 if np.array_equal(left, right) else 1.0,
        0.0,
    )
    record("evolution_contractivity", -contractivity_margin(chain), 0.0)
    u_norm = operator_norm(chain_matrix(chain, 1.0, 0.0))
    record(
        "evolution_cocycle",
        cocycle_residual(field, path, 0.5, 0.5, dt, m),
        1e-10 * max(u_norm, 1e-30),
    )
    fit = decay_fit(chain, [(1.0, 0.5), (0.5, 0.25), (1.0, 0.0), (0.25, 0.25)])
    record("evolution_decay_envelope", fit.C_hat, 1.0 + 1e-9)

    # corrector closed-form oracle (deterministic ramp path, single mode)
    lam = field.delta * math.pi ** 2
    ramp_spec = NoiseSpectrum(1, 1.0)
    n_pts = int(round(1.0 / dt)) + 1
    ramp_base = (np.arange(n_pts) * dt).reshape(-1, 1)
    ramp_base.setflags(write=False)
    ramp = WienerPath(ramp_base, 0, dt, ramp_spec, 0)
    auto = DiffusionField(delta=field.delta, amp=0.0)
    ramp_chain = build_chain(auto, ramp, span_grid(0.0, 1.0, dt), 1)
    got = corrector_integral(ramp_chain, ramp, 0.0, 1.0)[0]
    exact = -(1.0 - math.exp(-lam) * (1.0 + lam)) / lam
    record("corrector_ramp_oracle", abs(got - exact), 10.0 * dt ** 2)

    # pathwise invariants
    problem = SemilinearProblem(
        field=field,
        nonlinearity=NonlinearitySpec.cubic_fisher(),
        forcing=None,
        sigma=0.0,
        u0=v,
    )
    tr = integrate_semilinear(problem, chain, path)
    v_direct = v.copy()
    for k in range(grid.n_steps):
        stage = v_direct + dt * nemytskii(NonlinearitySpec.cubic_fisher(), v_direct)
        v_direct = chain.steps[k] @ stage
    record(
        "pathwise_sigma_zero_reduction_bitwise",
        0.0 if np.array_equal(tr.states[-1], v_direct) else 1.0,
        0.0,
    )
    lin = SemilinearProblem(
        field=field,
        nonlinearity=NonlinearitySpec.zero(),
        forcing=None,
        sigma=1.0,
        u0=np.zeros(m),
    )
    base_tr = integrate_semilinear(lin, chain, path)
    scaled = SemilinearProblem(
        field=field,
        nonlinearity=NonlinearitySpec.zero(),
        forcing=None,
        sigma=2.5,
        u0=np.zeros(m),
    )
    scaled_tr = integrate_semilinear(scaled, chain, path)
    denom = float(np.abs(scaled_tr.states[-1]).max())
    record(
        "pathwise_noise_linearity",
        float(np.abs(scaled_tr.states[-1] - 2.5 * base_tr.states[-1]).max()),
        1e-12 * max(denom, 1e-30),
    )
    cubic = nemytskii(NonlinearitySpec.pure_cubic(), _unit_mode(m, 1) / math.sqrt(2.0))
    ratio_err = abs(cubic[0] / cubic[2] - (-3.0))
    record("nemytskii_cubic_projection", ratio_err, 1e-8)

    # ou invariants
    st = construct_initial(field, path, 4.0, m)
    traj = propagate(st, field, path, 1.0, m, beta=cfg.beta)
    record(
        "ou_initial_identity",
        float(np.abs(traj.states[0] - st.z0).max()),
        0.0,
    )
    resolved = DiffusionField(delta=1.0, amp=0.2)
    rp = sample_two_sided_path(NoiseSpectrum(4, 1.0), -16.0, 6.0, 2.0 ** -9, cfg.seed + 1)
    res = stationarity_residual(resolved, rp, 2.0, 1.0, 4.0, 4)
    z_norm = float(np.linalg.norm(st.z0))
    record("ou_stationarity_residual", res, 1e-8 * (1.0 + z_norm))

    # attractor invariants (tiny configuration)
    u0 = _unit_mode(m, 1)
    vt = integrate_v(field, NonlinearitySpec.pure_cubic(), None, 0.0, u0, chain, None)
    norms = vt.l2_norms()
    envelope = np.exp(-field.poincare_rate * vt.times * (1.0 - 1e-2)) * norms[0]
    record(
        "energy_decay_purecubic",
        float((norms - envelope).max()),
        0.0,
    )
    lin_prob = SemilinearProblem(
        field=field,
        nonlinearity=NonlinearitySpec.zero(),
        forcing=None,
        sigma=0.1,
        u0=u0,
    )
    disc = transform_consistency(lin_prob, path, 1.0, 4.0, m, n_checkpoints=4)
    record("transform_linear_consistency", disc, 1e-3)
    return checks


def _unit_mode(m: int, n: int) -> np.ndarray:
    out = np.zeros(m)
    out[n - 1] = 1.0
    return out


def _decay_envelope_rows(cfg: RunConfig) -> list[list]:
    """(t - s, ||U(t, s)||_2, C_hat e^{-lambda_hat (t-s)}) diagnostic rows."""
    field = DiffusionField()
    spectrum = NoiseSpectrum(8, 1.0)
    dt = 2.0 ** -6
    path = sample_two_sided_path(spectrum, -10.0, 1.0, dt, cfg.seed)
    chain = build_chain(field, path, span_grid(0.0, 1.0, dt), 16)
    pairs = [(k / 16.0, 0.0) for k in range(0, 17)]
    fit = decay_fit(chain, pairs)
    rows = []
    for (t, s) in pairs:
        norm = operator_norm(chain_matrix(chain, t, s))
        envelope = fit.C_hat * math.exp(-fit.lambda_hat * (t - s))
        rows.append([t - s, norm, envelope])
    return rows


def cmd_verify(cfg: RunConfig, sink: OutputSink, threads: int) -> int:
    checks = _verify_checks(cfg)
    failed = [c for c in checks if not c["passed"]]
    sink.write_csv(
        "decay_envelope.csv", ["t_minus_s", "norm", "envelope"], _decay_envelope_rows(cfg)
    )
    sink.write_json(
        "verify_report.json",
        {
            "artifact_version": __version__,
            "all_passed": not failed,
            "checks": checks,
        },
    )
    for c in checks:
        status = "pass" if c["passed"] else "FAIL"
        print(f"[{status}] {c['name']}: value={fmt(c['value'])} tol={fmt(c['tolerance'])}")
    return 0 if not failed else 3


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randattract",
        description=(
            "Pathwise simulation of stochastic reaction-diffusion equations with "
            "random non-autonomous generators"
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("simulate", "ensemble semilinear runs"),
        ("ou-diagnose", "stationarity and temperedness tables"),
        ("attractor-pullback", "pullback attractor estimate"),
        ("verify", "full invariant suite (exit 3 on any failure)"),
        ("convergence", "dyadic refinement study with fitted orders"),
        ("print-config", "print the default config file"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, default=None, help="config file path")
        p.add_argument(
            "--out",
            type=str,
            default=None,
            help="output directory (fallback: env RANDATTRACT_OUT, then ./randattract_out)",
        )
        p.add_argument(
            "--threads",
            type=int,
            default=os.cpu_count() or 1,
            help="worker threads for path ensembles",
        )
        p.add_argument("--seed", type=int, default=None, help="override noise.seed")
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "ou-diagnose": cmd_ou_diagnose,
    "attractor-pullback": cmd_attractor_pullback,
    "convergence": cmd_convergence,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "print-config":
        print(example_config(), end="")
        return 0
    try:
        overrides = {}
        if args.seed is not None:
            overrides[("noise", "seed")] = args.seed
        cfg = load_config(args.config, overrides)
    except (ConfigurationError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1

    out_dir = Path(
        args.out
        or os.environ.get("RANDATTRACT_OUT")
        or "randattract_out"
    ) / args.command
    sink = OutputSink(out_dir, cfg.config_hash())
    timings: dict[str, float] = {}
    started = time.perf_counter()
    try:
        if args.command == "verify":
            code = cmd_verify(cfg, sink, args.threads)
        else:
            _COMMANDS[args.command](cfg, sink, args.threads)
            code = 0
    except ConfigurationError as exc:
        sink.cleanup_partial()
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, FloatingPointError) as exc:
        sink.cleanup_partial()
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    timings["total"] = time.perf_counter() - started
    seeds = [cfg.seed + i for i in range(cfg.n_paths)]
    sink.manifest(timings, seeds)
    print(f"outputs in {out_dir}")
    return code


if __name__ == "__main__":
    sys.exit(main())
