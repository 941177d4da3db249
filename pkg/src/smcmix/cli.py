"""Config-driven command line: run experiments, print bound reports, run the
verification suite, and sweep a grid with per-point MSE.

Exit codes: 0 success, 1 verification failure, 2 config error, 3 runtime
degeneracy.  All randomness flows from the master seed (the --seed flag
overrides the config) and every emitted JSON document validates against the
schema files shipped under ``smcmix/schemas``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources

import jsonschema
import numpy as np

from . import bounds, oracle, sequences, smc
from .core import (
    DegenerateWeightsError,
    FiniteChain,
    RejectionSamplingError,
    TargetMixture,
)
from .kernels import KernelSpec

MAX_THEOREM_STEPS = 1e7  # from-theorem time budgets beyond this are refused


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 2."""


def _load_schema(name: str) -> dict:
    with resources.files("smcmix.schemas").joinpath(name).open() as fh:
        return json.load(fh)


def _validate(document: dict, schema_name: str, what: str):
    schema = _load_schema(schema_name)
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{what} failed schema validation ({schema_name}):"]
        for err in errors[:10]:
            path = "/".join(str(p) for p in err.absolute_path) or "<root>"
            lines.append(f"  at {path}: {err.message}")
        raise ConfigError("\n".join(lines))


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _validate(cfg, "config.schema.json", "config")
    return cfg


# ---------------------------------------------------------------------------
# Config -> domain objects
# ---------------------------------------------------------------------------


def _build_target(spec: dict):
    if spec["kind"] == "gaussian_mixture":
        means = spec["means"]
        d = len(means[0])
        covs = spec.get("covariances")
        if covs is None:
            covs = [np.eye(d)] * len(means)
        return TargetMixture.gaussian(spec["weights"], means, covs)
    return None  # finite ladders are built directly from the file


def _load_finite_ladder(path: str, time_budgets):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read finite ladder file: {exc}") from exc
    if doc.get("kind") != "finite_ladder" or "levels" not in doc:
        raise ConfigError("finite ladder file must have kind=finite_ladder and levels")
    pmfs, chains = [], []
    for i, level in enumerate(doc["levels"]):
        pmfs.append(np.asarray(level["pmf"], dtype=float))
        P = level.get("P")
        if P is None:
            if i > 0:
                raise ConfigError(f"level {i + 1} of the ladder file needs a matrix P")
            chains.append(None)
        else:
            try:
                chains.append(FiniteChain(P=np.asarray(P, dtype=float), pi=pmfs[-1]))
            except ValueError as exc:
                raise ConfigError(f"invalid chain at level {i + 1}: {exc}") from exc
    return sequences.build_finite_ladder(pmfs, chains, time_budgets)


def _resolve_time_budgets(policy: dict | None, n_levels: int, ladder=None):
    if policy is None or policy.get("mode") == "explicit":
        t = 1.0 if policy is None else policy["t"]
        return t if np.ndim(t) == 0 else list(t)
    # from_theorem: t_k = 2 C*_k gamma^7 using the ladder's analytic constants
    if ladder is None:
        raise ConfigError("from_theorem time policy needs an analytic ladder")
    gamma = ladder.gamma_bound
    budgets = []
    for level in ladder.levels:
        if level.lsi_constant_bound is None:
            raise ConfigError("from_theorem time policy: level has no log-Sobolev bound")
        budgets.append(2.0 * level.lsi_constant_bound * gamma ** 7)
    cap = policy.get("max_total_steps", MAX_THEOREM_STEPS)
    steps = sum(math.ceil(t / 0.05) for t in budgets) * 1.0
    if steps > cap:
        raise ConfigError(
            f"from_theorem budgets need ~{steps:.3g} kernel steps per particle "
            f"(cap {cap:.3g}); use explicit times or raise max_total_steps"
        )
    return budgets


def _build_ladder(exp: dict):
    target_spec = exp["target"]
    ladder_spec = exp["ladder"]
    policy = exp.get("time_policy")
    if target_spec["kind"] == "finite_ladder_file":
        if ladder_spec["kind"] != "from_file":
            raise ConfigError("finite ladder targets require ladder.kind = from_file")
        if policy is not None and policy.get("mode") == "from_theorem":
            raise ConfigError("from_theorem time policy needs an analytic ladder")
        t = 1.0 if policy is None else policy.get("t", 1.0)
        return _load_finite_ladder(target_spec["path"], t), None
    target = _build_target(target_spec)
    d = target.dim
    kern = exp.get("kernel")
    kernel = None
    if kern is not None:
        kernel = KernelSpec(
            kind=kern["kind"],
            step_size=kern.get("step_size", 0.05),
            proposal_scale=kern.get("proposal_scale", 1.0),
        )
    kind = ladder_spec["kind"]
    if kind == "from_file":
        raise ConfigError("ladder.kind = from_file requires a finite ladder target")
    if "betas" in ladder_spec:
        schedule = sequences.TemperingSchedule(
            betas=tuple(ladder_spec["betas"]), d=d, sigma=ladder_spec.get("sigma")
        )
    else:
        schedule = sequences.geometric_schedule(
            ladder_spec.get("n_levels", 10),
            ladder_spec.get("beta_min", 0.05),
            d,
            sigma=ladder_spec.get("sigma"),
        )
    build = (
        sequences.build_power_tempering if kind == "tempering"
        else sequences.build_gaussian_convolution
    )
    kwargs = {"kernel": kernel}
    if kind == "tempering":
        kwargs["conservative_gamma"] = ladder_spec.get("conservative_gamma", False)
    try:
        ladder = build(target, schedule, time_budget=1.0, **kwargs)
        budgets = _resolve_time_budgets(policy, ladder.n_levels, ladder)
        ladder = build(target, schedule, time_budget=budgets, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ladder, target


def _build_estimand(spec: dict, target):
    name = spec["name"]
    if name == "constant":
        value = spec.get("value", 1.0)
        return (lambda x: np.full(np.shape(x)[0], float(value))), None
    if name == "indicator_halfspace":
        coord = spec.get("coordinate", 0)
        thr = spec.get("threshold", 0.0)
        return (lambda x: (np.atleast_2d(x)[:, coord] > thr).astype(float)), None
    if name == "coordinate_mean":
        coord = spec.get("coordinate", 0)

        def f(x):
            x = np.asarray(x)
            return x.astype(float) if x.ndim == 1 else x[:, coord].astype(float)

        return f, None
    if name == "mode_indicator":
        idx = spec.get("mode_index", 0)

        def f(x):
            x = np.asarray(x)
            if x.ndim == 1:  # finite states: point indicator
                return (x == idx).astype(float)
            means = np.stack([g.mean for g in target.component_gaussians()])
            d2 = np.sum((x[:, None, :] - means[None, :, :]) ** 2, axis=2)
            return (np.argmin(d2, axis=1) == idx).astype(float)

        return f, None
    raise ConfigError(f"unknown estimand {name!r}")


def _exact_value(exp: dict, ladder, estimand):
    if "exact_value" in exp:
        return float(exp["exact_value"])
    last = ladder.levels[-1]
    if last.pmf is not None:
        values = estimand(np.arange(last.pmf.shape[0], dtype=np.int64))
        return float(last.pmf @ values)
    return None


def build_smc_config(exp: dict, seed_override=None):
    ladder, target = _build_ladder(exp)
    estimand, _ = _build_estimand(exp["estimand"], target)
    seed = exp["master_seed"] if seed_override is None else seed_override
    config = smc.SmcConfig(
        ladder=ladder,
        n_particles=exp["n_particles"],
        master_seed=int(seed),
        estimand=estimand,
        estimand_sup_bound=exp.get("estimand_sup_bound", 1.0),
    )
    return config, _exact_value(exp, ladder, estimand)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _replicate_worker(args):
    exp, index, seed = args
    config, _ = build_smc_config(exp, seed_override=seed)
    result = smc.run_smc(config)
    return index, result


def _run_all_replicates(exp: dict, master_seed: int, n_replicates: int, threads: int):
    tasks = [
        (exp, i, smc.replicate_seed(master_seed, i)) for i in range(n_replicates)
    ]
    if threads <= 1 or n_replicates == 1:
        outputs = [_replicate_worker(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(_replicate_worker, tasks))
    outputs.sort(key=lambda pair: pair[0])  # merge deterministically by index
    return [r for _, r in outputs]


def cmd_run(cfg: dict, out_dir: str, seed_override, threads: int) -> int:
    if "experiment" not in cfg:
        raise ConfigError("run needs an 'experiment' section")
    exp = cfg["experiment"]
    master_seed = int(exp["master_seed"] if seed_override is None else seed_override)
    n_rep = exp["replicates"]
    results = _run_all_replicates(exp, master_seed, n_rep, threads)
    config, exact = build_smc_config(exp, seed_override=master_seed)

    etas = np.array([r.eta_estimate for r in results])
    nus = [r.nu_estimate for r in results]
    doc = {
        "schema_version": 1,
        "master_seed": master_seed,
        "n_particles": exp["n_particles"],
        "n_levels": config.ladder.n_levels,
        "estimand": exp["estimand"],
        "replicates": [
            {
                "replicate": i,
                "seed": smc.replicate_seed(master_seed, i),
                "eta": float(r.eta_estimate),
                "nu": None if r.nu_estimate is None else float(r.nu_estimate),
                "ess_per_level": [float(v) for v in r.ess_per_level],
                "weight_sums_per_level": [float(v) for v in r.weight_sums_per_level],
                "normalized_weight_sums_per_level": (
                    None
                    if r.normalized_weight_sums_per_level is None
                    else [float(v) for v in r.normalized_weight_sums_per_level]
                ),
                "init_acceptance_rate": float(r.final_ensemble.init_acceptance_rate),
            }
            for i, r in enumerate(results)
        ],
        "summary": {
            "mean_eta": float(etas.mean()),
            "var_eta": float(etas.var(ddof=1)) if n_rep > 1 else 0.0,
            "mean_nu": (
                float(np.mean([v for v in nus])) if all(v is not None for v in nus) else None
            ),
            "mse": None if exact is None else float(np.mean((etas - exact) ** 2)),
            "exact_value": exact,
        },
    }
    _validate(doc, "run_result.schema.json", "run result")
    os.makedirs(out_dir, exist_ok=True)
    _write_json(os.path.join(out_dir, "run.json"), doc)
    with open(os.path.join(out_dir, "levels.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate", "level", "ess", "weight_sum", "wall_time"])
        for i, r in enumerate(results):
            for k, (ess, ws, wt) in enumerate(
                zip(r.ess_per_level, r.weight_sums_per_level, r.level_wall_times)
            ):
                writer.writerow([i, k + 2, f"{ess!r}", f"{ws!r}", f"{wt:.6f}"])
    with open(os.path.join(out_dir, "replicates.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate", "seed", "eta", "nu"])
        for i, r in enumerate(results):
            writer.writerow(
                [
                    i,
                    smc.replicate_seed(master_seed, i),
                    f"{r.eta_estimate!r}",
                    "" if r.nu_estimate is None else f"{r.nu_estimate!r}",
                ]
            )
    print(f"wrote {out_dir}/run.json, levels.csv, replicates.csv")
    return 0


_ASSUMPTION_KEYS = ("n", "M", "w_star", "gamma", "c_star")


def _derive_assumptions(cfg: dict) -> dict:
    """Fill n, M, w_star, gamma, c_star from the experiment's analytic ladder."""
    exp = cfg.get("experiment")
    if exp is None:
        raise ConfigError(
            "bounds section is incomplete and there is no experiment to derive from"
        )
    ladder, target = _build_ladder(exp)
    if target is None:
        raise ConfigError("cannot derive assumption constants from a finite ladder file")
    c_star = [lv.lsi_constant_bound for lv in ladder.levels]
    if any(c is None for c in c_star):
        raise ConfigError("ladder provides no log-Sobolev bound; supply c_star")
    betas = exp["ladder"].get("betas") or list(
        sequences.geometric_schedule(
            exp["ladder"].get("n_levels", 10), exp["ladder"].get("beta_min", 0.05),
            target.dim,
        ).betas
    )
    try:
        w_star = sequences.tempered_weight_lower_bound(target, betas=betas)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return {
        "n": ladder.n_levels,
        "M": target.n_components,
        "w_star": w_star,
        "gamma": ladder.gamma_bound,
        "c_star": c_star,
    }


def _assumption_params_from_config(cfg: dict) -> bounds.AssumptionParams:
    b = cfg["bounds"]
    derived = {}
    if any(key not in b for key in _ASSUMPTION_KEYS):
        derived = _derive_assumptions(cfg)
    merged = {**derived, **{k: b[k] for k in _ASSUMPTION_KEYS if k in b}}
    missing = [k for k in _ASSUMPTION_KEYS if k not in merged]
    if missing:
        raise ConfigError(f"bounds section missing {missing} and no ladder to derive them")
    c_star = merged["c_star"]
    if np.ndim(c_star) == 0:
        c_star = [float(c_star)]
    return bounds.AssumptionParams(
        n=int(merged["n"]),
        M=int(merged["M"]),
        w_star=float(merged["w_star"]),
        gamma=float(merged["gamma"]),
        c_star_per_level=tuple(float(c) for c in c_star),
        f_sup_bound=float(b["f_sup_bound"]),
        epsilon=float(b["epsilon"]),
        delta=float(b.get("delta", 0.1)),
        p=int(b.get("p", 4)),
    )


def _has_equal_covs(target) -> bool:
    gauss = target.component_gaussians()
    return all(np.allclose(g.cov, gauss[0].cov, atol=1e-12) for g in gauss)


def cmd_bounds(cfg: dict, out_dir, seed_override) -> int:
    if "bounds" not in cfg:
        raise ConfigError("bounds needs a 'bounds' section")
    b = cfg["bounds"]
    params = _assumption_params_from_config(cfg)
    try:
        if "convolution" in b:
            conv = b["convolution"]
            report = bounds.prescribe_convolution(
                params, conv["sigma"], conv["betas"], conv["d"], alpha=b.get("alpha")
            )
        else:
            report = bounds.prescribe_main(params, mode=b["mode"], alpha=b.get("alpha"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cap = b.get("feasibility_cap")
    doc = {"schema_version": 1, **report.to_dict()}
    doc["feasible"] = cap is None or report.prescribed_N <= cap
    doc["feasibility_cap"] = cap
    _validate(doc, "bound_report.schema.json", "bound report")
    print(json.dumps(doc, indent=2, sort_keys=True))
    print()
    print(format_bound_table(report, feasible=doc["feasible"], cap=cap))
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_json(os.path.join(out_dir, "bounds.json"), doc)
    if not doc["feasible"]:
        print(
            f"warning: prescribed N = {report.prescribed_N} exceeds the cap {cap:g}",
            file=sys.stderr,
        )
    return 0


def format_bound_table(report: bounds.BoundReport, feasible: bool = True, cap=None) -> str:
    rows = [
        ("theorem", report.which_theorem),
        ("gamma", f"{report.params.gamma:.6g}"),
        ("M", str(report.params.M)),
        ("w_star", f"{report.params.w_star:.6g}"),
        ("epsilon", f"{report.params.epsilon:.6g}"),
        ("alpha", f"{report.alpha:.6g}"),
        ("beta", f"{report.beta:.6g}"),
        ("theta(p,p/2)", f"{report.theta:.6g}"),
        ("c_hat", f"{report.c_hat:.6g}"),
        ("v_bar", f"{report.v_bar:.6g}"),
        ("N (variance branch)", f"{report.n_variance_branch:.6g}"),
        ("N (moment branch)", f"{report.n_moment_branch:.6g}"),
        ("prescribed N", str(report.prescribed_N)),
        ("complete-form N", f"{report.complete_N:.6g}"),
        ("t_k (simplified)", ", ".join(f"{t:.6g}" for t in report.prescribed_t_per_level)),
        ("t_k (complete)", ", ".join(f"{t:.6g}" for t in report.complete_t_per_level)),
    ]
    for p, dl in report.delta_table:
        rows.append((f"delta({p})", f"{dl:.6g}"))
    if cap is not None:
        rows.append(("feasible", str(feasible)))
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def cmd_verify(cfg: dict | None, out_dir, seed_override, args_suites) -> int:
    verify_cfg = (cfg or {}).get("verify", {}) if cfg else {}
    suites = args_suites or verify_cfg.get("suites")
    seed = int(seed_override if seed_override is not None else 0)
    scale = verify_cfg.get("trials_scale", 1.0)
    checks = []
    chain_file = verify_cfg.get("chain_file")
    if chain_file:
        checks.append(_chain_validation_check(chain_file))
    try:
        report = oracle.run_verification_suite(
            selectors=suites, seed=seed, trials_scale=scale
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    all_checks = tuple(checks) + report.checks
    report = oracle.VerificationReport(seed=seed, checks=all_checks)
    doc = report.to_dict()
    _validate(doc, "verify_report.schema.json", "verify report")
    print(json.dumps(doc, indent=2, sort_keys=True))
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_json(os.path.join(out_dir, "verify.json"), doc)
    if not report.all_passed:
        failed = [c.name for c in report.checks if not c.passed]
        print(f"FAILED checks: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def _chain_validation_check(path: str) -> oracle.CheckReport:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read chain file: {exc}") from exc
    try:
        FiniteChain(P=np.asarray(doc["P"], dtype=float), pi=doc.get("pi"))
    except (KeyError, ValueError) as exc:
        return oracle.CheckReport(
            name="chain_validation",
            passed=False,
            min_slack=-math.inf,
            n_trials=1,
            details={"error": str(exc), "path": path},
        )
    return oracle.CheckReport(
        name="chain_validation", passed=True, min_slack=0.0, n_trials=1,
        details={"path": path},
    )


def cmd_sweep(cfg: dict, out_dir: str, seed_override, threads: int) -> int:
    if "sweep" not in cfg or "experiment" not in cfg:
        raise ConfigError("sweep needs both 'sweep' and 'experiment' sections")
    sweep = cfg["sweep"]
    exp = cfg["experiment"]
    master_seed = int(exp["master_seed"] if seed_override is None else seed_override)
    base_config, exact = build_smc_config(exp, seed_override=master_seed)
    if exact is None:
        raise ConfigError("sweep needs exact_value in the experiment (or a finite target)")
    points = []
    for value in sweep["values"]:
        exp_point = json.loads(json.dumps(exp))  # deep copy
        if sweep["parameter"] == "n_particles":
            exp_point["n_particles"] = int(value)
        else:
            exp_point["time_policy"] = {"mode": "explicit", "t": float(value)}
        stats = _sweep_point(exp_point, master_seed, sweep["replicates"], exact, threads)
        points.append({"value": float(value), **stats})
    doc = {
        "schema_version": 1,
        "parameter": sweep["parameter"],
        "master_seed": master_seed,
        "exact_value": exact,
        "points": points,
    }
    _validate(doc, "sweep_result.schema.json", "sweep result")
    os.makedirs(out_dir, exist_ok=True)
    _write_json(os.path.join(out_dir, "sweep.json"), doc)
    with open(os.path.join(out_dir, "sweep.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["value", "mse", "mse_se", "variance", "variance_se", "bias_sq",
                  "bias_sq_se", "mean_eta", "n_replicates"]
        writer.writerow(header)
        for pt in points:
            writer.writerow([pt[h] for h in header])
    print(f"wrote {out_dir}/sweep.json, sweep.csv")
    return 0


def _sweep_point(exp: dict, master_seed: int, n_rep: int, exact: float, threads: int) -> dict:
    results = _run_all_replicates(exp, master_seed, n_rep, threads)
    etas = np.array([r.eta_estimate for r in results])
    return {
        "mse": float(np.mean((etas - exact) ** 2)),
        "variance": float(np.var(etas, ddof=1)),
        "bias_sq": float((etas.mean() - exact) ** 2),
        "mean_eta": float(etas.mean()),
        "mse_se": smc.jackknife_se(etas, lambda s: np.mean((s - exact) ** 2)),
        "variance_se": smc.jackknife_se(etas, lambda s: np.var(s, ddof=1)),
        "bias_sq_se": smc.jackknife_se(etas, lambda s: (np.mean(s) - exact) ** 2),
        "n_replicates": int(n_rep),
    }


def _write_json(path: str, doc: dict):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="smcmix",
        description="Sequential Monte Carlo for multimodal mixtures: "
        "run experiments, evaluate bound prescriptions, verify the theory "
        "on exact finite chains, and sweep parameter grids.",
    )
    parser.add_argument("--config", help="path to the JSON configuration")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker processes for replicates (default: all cores)")
    parser.add_argument("--out", default="out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", help="run the configured SMC experiment")
    sub.add_parser("bounds", help="evaluate and print the bound report")
    verify = sub.add_parser("verify", help="run the oracle verification suite")
    verify.add_argument("--suite", action="append", dest="suites",
                        help="check-name prefix to run (repeatable); default all")
    sub.add_parser("sweep", help="grid over N or t with per-point MSE")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config) if args.config else None
        if args.command == "run":
            if cfg is None:
                raise ConfigError("run requires --config")
            return cmd_run(cfg, args.out, args.seed, args.threads)
        if args.command == "bounds":
            if cfg is None:
                raise ConfigError("bounds requires --config")
            return cmd_bounds(cfg, args.out, args.seed)
        if args.command == "verify":
            return cmd_verify(cfg, args.out, args.seed, args.suites)
        if args.command == "sweep":
            if cfg is None:
                raise ConfigError("sweep requires --config")
            return cmd_sweep(cfg, args.out, args.seed, args.threads)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateWeightsError, RejectionSamplingError) as exc:
        print(f"runtime degeneracy: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
