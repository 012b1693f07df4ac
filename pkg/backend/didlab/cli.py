"""Command-line entry point: ``python -m didlab <command>``."""
import sys
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import click
import orjson
import pandas as pd
import structlog
from pydantic import BaseModel, ValidationError

from . import __version__
from .config import configure_logging, get_preset, get_settings, preset_names
from .econometrics import (
    corollary_t_variance,
    design_variances,
    draw_fixed_population,
    exact_finite_variance,
    nabla_curve,
    nabla_second_moment,
    paired_twfe_variance,
    prop1_variance_gap,
    propA1_t_variance,
    rejection_from_inflation,
    simulate_nested_micro,
    simulate_panel,
)
from .errors import ErrorCode, LabError
from .model import (
    ARSpec,
    CurvePreset,
    EstimatorTag,
    FactorModelSpec,
    GapInputs,
    MCConfig,
    PanelData,
    PlaceboPlan,
    PlaceboPreset,
    ReferenceDistribution,
    RunManifest,
    VarianceMethod,
)
from .modules.ingestionLayer import load_panel_csv, micro_to_csv, write_panel_csv
from .modules.preprocessingLayer import aggregate_micro
from .service import emit_tables, estimate_and_test, report_frame
from .service.tasks import calibrate_factor_variance, run_experiment, run_placebo, run_two_dimension_placebo

logger = structlog.get_logger(__name__)

FORMAT_CHOICE = click.Choice(["csv", "json"])


# --------------------------------------------------------------------------- helpers


def read_config_file(path: Optional[str]) -> Dict[str, Any]:
    """TOML or JSON config file as a dict (empty when no path is given)."""
    if path is None:
        return {}
    file = Path(path)
    if not file.is_file():
        raise LabError(ErrorCode.DATA_NOT_FOUND, f"config file {file} does not exist", {"path": str(file)})
    try:
        if file.suffix == ".toml":
            return tomllib.loads(file.read_text(encoding="utf-8"))
        return orjson.loads(file.read_bytes())
    except (tomllib.TOMLDecodeError, orjson.JSONDecodeError, UnicodeDecodeError) as e:
        raise LabError(ErrorCode.PARSE_ERROR, f"could not parse config {file}: {e}", {"path": str(file)}) from e


def merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Nested dict update; ``override`` wins."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def build(model: type, data: Dict[str, Any]) -> Any:
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise LabError(
            ErrorCode.INVALID_CONFIG,
            f"invalid {model.__name__}: {e.errors()[0]['msg']}",
            {"errors": e.error_count(), "location": list(map(str, e.errors()[0]["loc"]))},
        ) from e


def resolve(model: type, preset: Optional[BaseModel], config_path: Optional[str], flags: Dict[str, Any]) -> Any:
    """CLI flag > config file > preset default."""
    data = preset.model_dump(mode="json") if preset is not None else {}
    data = merge(data, read_config_file(config_path))
    data = merge(data, {k: v for k, v in flags.items() if v is not None})
    return build(model, data)


def manifest_path(subcommand: str, out: Optional[str]) -> Path:
    if out:
        target = Path(out)
        return target.with_name(f"{target.stem}.manifest.json")
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%f")
    return get_settings().run_dir / f"{subcommand.replace(' ', '-')}-{stamp}.manifest.json"


class RunRecorder:
    """Context manager that writes a RunManifest when the command ends, successfully or not."""

    def __init__(self, ctx: click.Context, subcommand: str, out: Optional[str] = None):
        root = ctx.find_root()
        self.manifest = RunManifest(subcommand=subcommand, argv=list((root.obj or {}).get("argv", [])), version=__version__)
        self.path = manifest_path(subcommand, out)

    def resolved(self, config: Any, seed: Optional[int] = None) -> None:
        self.manifest.resolved_config = config.model_dump(mode="json") if isinstance(config, BaseModel) else dict(config)
        self.manifest.seed = seed

    def output(self, paths: Iterable[Path]) -> None:
        self.manifest.outputs.extend(str(p) for p in paths)

    def __enter__(self) -> "RunRecorder":
        logger.info("run_started", subcommand=self.manifest.subcommand)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        self.manifest.finished_at = datetime.now(timezone.utc)
        if exc is None:
            self.manifest.status = "ok"
        else:
            self.manifest.status = "failed"
            if isinstance(exc, LabError):
                self.manifest.error = exc.to_dict()
            else:
                self.manifest.error = {"code": type(exc).__name__, "error": str(exc), "details": {}}
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_bytes(orjson.dumps(self.manifest.model_dump(mode="json"), option=orjson.OPT_INDENT_2))
        except OSError as e:
            logger.warning("manifest_not_written", path=str(self.path), error=str(e))
        logger.info("run_finished", subcommand=self.manifest.subcommand, status=self.manifest.status, manifest=str(self.path))
        return False


def echo_json(payload: Any) -> None:
    click.echo(orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY).decode())


def write_json(payload: Any, out: str) -> List[Path]:
    path = Path(out)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY))
    except OSError as e:
        raise LabError(ErrorCode.IO_ERROR, f"could not write {path}: {e}", {"path": str(path)}) from e
    return [path]


def load_group_panel(path: str) -> PanelData:
    loaded = load_panel_csv(path)
    return aggregate_micro(loaded) if not isinstance(loaded, PanelData) else loaded


def common_options(fn: Callable) -> Callable:
    decorators = [
        click.option("--seed", type=int, default=None, help="Master seed of every random stream."),
        click.option("--reps", type=click.IntRange(min=1), default=None, help="Number of replications."),
        click.option("--level", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=None, help="Nominal test level."),
        click.option("--workers", type=click.IntRange(min=1), default=None, help="Parallel workers (default: available cores)."),
        click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file; printed to stdout when omitted."),
        click.option("--format", "fmt", type=FORMAT_CHOICE, default=None, help="Output format (default: from the --out suffix)."),
    ]
    for decorator in reversed(decorators):
        fn = decorator(fn)
    return fn


# --------------------------------------------------------------------------- commands


@click.group(context_settings={"auto_envvar_prefix": "DIDLAB", "help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="didlab")
@click.pass_context
def cli(ctx: click.Context) -> None:
    """Differences-in-differences inference lab: simulate, estimate, audit."""
    ctx.ensure_object(dict)


@cli.command()
@click.option("--preset", type=click.Choice(preset_names()), default=None, help="Take the design from a preset.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="FactorModelSpec file (TOML or JSON).")
@click.option("--groups", "n_groups", type=click.IntRange(min=2), default=100, show_default=True, help="Number of groups N.")
@click.option("--periods", "n_periods", type=click.IntRange(min=2), default=2, show_default=True, help="Number of periods T.")
@click.option("--t-star", "t_star", type=int, multiple=True, help="Adoption period(s); repeat for staggered cohorts.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed of the simulated draw.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="CSV file to write the panel to.")
@click.pass_context
def simulate(ctx, preset, config_path, n_groups, n_periods, t_star, seed, out):
    """Draw one panel from a factor model and write it as CSV."""
    with RunRecorder(ctx, "simulate", out) as run:
        chosen = get_preset(preset) if preset else None
        if isinstance(chosen, PlaceboPreset):
            run.resolved(chosen.data, seed)
            run.output([micro_to_csv(simulate_nested_micro(chosen.data, seed), out)])
            return
        if isinstance(chosen, MCConfig) and chosen.dgp is not None:
            n_groups, n_periods = chosen.n_groups, chosen.n_periods
            if not t_star:
                t_star = chosen.t_star if isinstance(chosen.t_star, list) else [chosen.t_star]
            base = chosen.dgp
        elif chosen is not None:
            raise LabError(ErrorCode.INVALID_CONFIG, f"preset {preset!r} has no single data-generating process")
        else:
            base = None
        spec = resolve(FactorModelSpec, base, config_path, {})
        starts = list(t_star) if t_star else [1]
        starts_arg = starts[0] if len(starts) == 1 else starts
        run.resolved({"dgp": spec.model_dump(mode="json"), "N": n_groups, "T": n_periods, "t_star": starts}, seed)
        sim = simulate_panel(spec, n_groups, n_periods, starts_arg, seed)
        run.output([write_panel_csv(sim.panel, out)])


@cli.command()
@click.option("--data", "data_path", type=click.Path(dir_okay=False), required=True, help="Group or micro panel CSV.")
@click.option("--estimator", type=click.Choice([t.value for t in EstimatorTag]), default="twfe", show_default=True, help="Estimator.")
@click.option("--variance", "variance_method", type=click.Choice([m.value for m in VarianceMethod]), default="crve_group", show_default=True, help="Variance estimator.")
@click.option("--level", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=0.05, show_default=True, help="Nominal test level.")
@click.option("--reference", type=click.Choice([r.value for r in ReferenceDistribution]), default="t", show_default=True, help="Reference distribution of the t-test.")
@click.option("--horizon", type=click.IntRange(min=0), default=0, show_default=True, help="Long-difference horizon L.")
@click.option("--not-yet-treated", is_flag=True, help="Use not-yet-treated groups as comparisons.")
@click.option("--s", "s", type=int, default=None, help="Placebo period s (placebo_pre).")
@click.option("--base", type=int, default=None, help="Base period (placebo_pre).")
@click.option("--no-small-sample", is_flag=True, help="Drop the G/(G-1) and n/(n-1) factors.")
@click.option("--cluster-level", is_flag=True, help="Cluster the variance at the cluster column.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="JSON file; printed to stdout when omitted.")
@click.pass_context
def estimate(ctx, data_path, estimator, variance_method, level, reference, horizon, not_yet_treated, s, base, no_small_sample, cluster_level, out):
    """Estimate the effect on a panel CSV and test it against zero."""
    with RunRecorder(ctx, "estimate", out) as run:
        options = {"horizon": horizon, "not_yet_treated": not_yet_treated}
        if s is not None:
            options["s"] = s
        if base is not None:
            options["base"] = base
        run.resolved({"data": data_path, "estimator": estimator, "variance": variance_method, "level": level, "reference": reference, **options})
        p = load_group_panel(data_path)
        result = estimate_and_test(
            p, estimator, variance_method, level, reference, small_sample=not no_small_sample, cluster_level=cluster_level, **options
        )
        if out:
            run.output(write_json(result, out))
        else:
            echo_json(result)


@cli.command()
@click.option("--preset", type=click.Choice(preset_names()), default=None, help="Start from a shipped experiment.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="MCConfig file (TOML or JSON).")
@common_options
@click.pass_context
def mc(ctx, preset, config_path, seed, reps, level, workers, out, fmt):
    """Run a Monte Carlo experiment and emit its report."""
    with RunRecorder(ctx, "mc", out) as run:
        chosen = get_preset(preset) if preset else None
        if isinstance(chosen, CurvePreset):
            run.resolved(chosen)
            table = nabla_curve(chosen.rho_list, chosen.T_max)
            _emit(run, table, out, fmt)
            return
        if isinstance(chosen, PlaceboPreset):
            raise LabError(ErrorCode.INVALID_CONFIG, f"preset {preset!r} is a placebo audit; use the placebo command")
        cfg = resolve(MCConfig, chosen, config_path, {"seed": seed, "reps": reps, "level": level, "workers": workers})
        run.resolved(cfg, cfg.seed)
        report = run_experiment(cfg)
        _emit(run, report, out, fmt)


def _emit(run: RunRecorder, report: Any, out: Optional[str], fmt: Optional[str]) -> None:
    if out:
        run.output(emit_tables(report, out, fmt))
    elif (fmt or "json") == "json":
        payload = report.to_dict(orient="records") if isinstance(report, pd.DataFrame) else report.model_dump(mode="json")
        echo_json(payload)
    else:
        click.echo(report_frame(report).to_csv(index=False), nl=False)


@cli.command()
@click.option("--preset", type=click.Choice(preset_names()), default=None, help="Start from a shipped placebo audit.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="PlaceboPlan file (TOML or JSON).")
@click.option("--data", "data_path", type=click.Path(dir_okay=False), default=None, help="Panel CSV with a cluster column.")
@click.option("--surface", is_flag=True, help="Sweep period and cohort distances together.")
@common_options
@click.pass_context
def placebo(ctx, preset, config_path, data_path, surface, seed, reps, level, workers, out, fmt):
    """Randomized placebo audit of a panel (or of synthetic data from a preset)."""
    with RunRecorder(ctx, "placebo", out) as run:
        chosen = get_preset(preset) if preset else None
        if chosen is not None and not isinstance(chosen, PlaceboPreset):
            raise LabError(ErrorCode.INVALID_CONFIG, f"preset {preset!r} is not a placebo audit")
        flags = {"seed": seed, "reps_per_cell": reps, "level": level, "workers": workers, "source": data_path}
        plan = resolve(PlaceboPlan, chosen.plan if chosen else None, config_path, flags)
        surface = surface or bool(chosen and chosen.surface)
        run.resolved(plan, plan.seed)

        panel = None
        if plan.source is None and chosen is not None:
            panel = simulate_nested_micro(chosen.data, plan.seed)
        runner = run_two_dimension_placebo if surface else run_placebo
        _emit(run, runner(plan, panel), out, fmt)


@cli.command("nabla-curve")
@click.option("--rho", "rho_list", type=float, multiple=True, help="AR(1) coefficient; repeat for several curves.")
@click.option("--t-max", "T_max", type=click.IntRange(min=2), default=None, help="Largest (even) T of the grid.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file; printed to stdout when omitted.")
@click.option("--format", "fmt", type=FORMAT_CHOICE, default=None, help="Output format (default: from the --out suffix).")
@click.pass_context
def nabla_curve_cmd(ctx, rho_list, T_max, out, fmt):
    """Normalized E[(grad X)^2] against T, long format (rho, T, value)."""
    with RunRecorder(ctx, "nabla-curve", out) as run:
        flags = {"rho_list": list(rho_list) or None, "T_max": T_max}
        curve = resolve(CurvePreset, get_preset("fig-a1"), None, flags)
        run.resolved(curve)
        _emit(run, nabla_curve(curve.rho_list, curve.T_max), out, fmt)


@cli.command()
@click.option("--target", "targets", type=float, multiple=True, required=True, help="Main-test rejection rate to reach; repeatable.")
@click.option("--groups", "n_groups", type=click.IntRange(min=4), default=100, show_default=True, help="Number of groups.")
@click.option("--tol", type=click.FloatRange(min=0, min_open=True), default=0.005, show_default=True, help="Tolerance on the rejection rate.")
@common_options
@click.pass_context
def calibrate(ctx, targets, n_groups, tol, seed, reps, level, workers, out, fmt):
    """Arm-shock variance whose two-period main test rejects at each target rate."""
    with RunRecorder(ctx, "calibrate", out) as run:
        seed = 0 if seed is None else seed
        level = get_settings().default_level if level is None else level
        reps = reps or 10_000
        run.resolved({"targets": list(targets), "n_groups": n_groups, "tol": tol, "reps": reps, "level": level}, seed)
        result = {
            str(t): calibrate_factor_variance(t, seed=seed, level=level, n_groups=n_groups, reps=reps, tol=tol, workers=workers)
            for t in targets
        }
        if out:
            run.output(write_json(result, out))
        else:
            echo_json(result)


@cli.command()
@click.argument("manifest", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Redirect the replayed output here.")
@click.pass_context
def rerun(ctx, manifest, out):
    """Replay the command recorded in a run manifest."""
    path = Path(manifest)
    if not path.is_file():
        raise LabError(ErrorCode.DATA_NOT_FOUND, f"manifest {path} does not exist", {"path": str(path)})
    try:
        recorded = RunManifest.model_validate(orjson.loads(path.read_bytes()))
    except (orjson.JSONDecodeError, ValidationError) as e:
        raise LabError(ErrorCode.PARSE_ERROR, f"{path} is not a run manifest", {"path": str(path)}) from e
    argv = replace_option(recorded.argv, "--out", out) if out else list(recorded.argv)
    logger.info("rerun", manifest=str(path), argv=argv)
    ctx.exit(main(argv))


def replace_option(argv: Sequence[str], option: str, value: str) -> List[str]:
    args = list(argv)
    for i, arg in enumerate(args):
        if arg == option and i + 1 < len(args):
            args[i + 1] = value
            return args
        if arg.startswith(option + "="):
            args[i] = f"{option}={value}"
            return args
    return args + [option, value]


@cli.command()
@click.option("--host", default=None, help="Interface to bind (default from settings).")
@click.option("--port", type=int, default=None, help="Port to listen on (default from settings).")
def serve(host, port):
    """Serve the HTTP API."""
    from .server import create_app

    settings = get_settings()
    create_app().run(host=host or settings.api_host, port=port or settings.api_port)


# --------------------------------------------------------------------------- analytic


@cli.group()
def analytic():
    """Closed-form variances and rejection rates."""


def gap_options(fn: Callable) -> Callable:
    decorators = [
        click.option("--inputs", "inputs_path", type=click.Path(dir_okay=False), default=None, help="GapInputs file (TOML or JSON)."),
        click.option("--mu-gap", type=float, default=None, help="Loading-mean gap of a single factor."),
        click.option("--moment", type=float, default=None, help="E[(grad lambda)^2] of a single factor."),
        click.option("--sigma-eps2-treated", type=float, default=None, help="Variance of grad(eps) in the treated arm."),
        click.option("--sigma-eps2-control", type=float, default=None, help="Variance of grad(eps) in the control arm."),
        click.option("--c", "c", type=float, default=None, help="Treated share."),
    ]
    for decorator in reversed(decorators):
        fn = decorator(fn)
    return fn


def gap_inputs(inputs_path, mu_gap, moment, sigma_eps2_treated, sigma_eps2_control, c) -> GapInputs:
    flags = {
        "mu_gap": None if mu_gap is None else [mu_gap],
        "second_moment": None if moment is None else [[moment]],
        "sigma_eps2_treated": sigma_eps2_treated,
        "sigma_eps2_control": sigma_eps2_control,
        "c": c,
    }
    return resolve(GapInputs, None, inputs_path, flags)


def _analytic(ctx: click.Context, quantity: str, inputs: Dict[str, Any], compute: Callable[[], Any]) -> None:
    with RunRecorder(ctx, f"analytic {quantity}") as run:
        run.resolved(inputs)
        value = compute()
        if isinstance(value, BaseModel):
            echo_json(value.model_dump(mode="json"))
        else:
            click.echo(repr(float(value)))


@analytic.command()
@click.option("--rho", type=float, required=True, help="AR(1) coefficient.")
@click.option("--T", "T", type=int, required=True, help="Even number of periods.")
@click.option("--sigma-nu2", type=float, default=1.0, show_default=True, help="Innovation variance.")
@click.pass_context
def nabla(ctx, rho, T, sigma_nu2):
    """E[(grad X)^2] of a stationary AR(1)."""
    _analytic(ctx, "nabla", {"rho": rho, "T": T, "sigma_nu2": sigma_nu2}, lambda: nabla_second_moment(rho, T, sigma_nu2))


@analytic.command()
@gap_options
@click.pass_context
def gap(ctx, **options):
    """Asymptotic gap between var(alpha_hat) and the CRVE."""
    g = gap_inputs(**options)
    _analytic(ctx, "gap", g.model_dump(), lambda: prop1_variance_gap(g))


@analytic.command()
@gap_options
@click.pass_context
def corollary(ctx, **options):
    """Limit variance 1 + kappa of the CRVE t-statistic."""
    g = gap_inputs(**options)
    _analytic(ctx, "corollary", g.model_dump(), lambda: corollary_t_variance(g))


@analytic.command()
@gap_options
@click.option("--n1", type=int, required=True, help="Treated groups.")
@click.option("--n0", type=int, required=True, help="Control groups.")
@click.pass_context
def exact(ctx, n1, n0, **options):
    """Finite-sample variance of alpha_hat."""
    g = gap_inputs(**options)
    _analytic(ctx, "exact", {**g.model_dump(), "N1": n1, "N0": n0}, lambda: exact_finite_variance(g, n1, n0))


def paired_options(fn: Callable) -> Callable:
    decorators = [
        click.option("--sigma-lambda2", type=float, required=True, help="Variance of the treated pair shocks."),
        click.option("--sigma-delta2", type=float, required=True, help="Variance of the control pair shocks."),
        click.option("--sigma-eps2-1", type=float, default=1.0, show_default=True, help="Treated noise variance."),
        click.option("--sigma-eps2-0", type=float, default=1.0, show_default=True, help="Control noise variance."),
    ]
    for decorator in reversed(decorators):
        fn = decorator(fn)
    return fn


@analytic.command()
@paired_options
@click.option("--c", "c", type=float, default=0.5, show_default=True, help="Treated share.")
@click.pass_context
def propa1(ctx, sigma_lambda2, sigma_delta2, sigma_eps2_1, sigma_eps2_0, c):
    """Limit variance of the CRVE t-statistic with shocks shared in pairs."""
    inputs = {"sigma_lambda2": sigma_lambda2, "sigma_delta2": sigma_delta2, "sigma_eps2_1": sigma_eps2_1, "sigma_eps2_0": sigma_eps2_0, "c": c}
    _analytic(ctx, "propa1", inputs, lambda: propA1_t_variance(**inputs))


@analytic.command()
@paired_options
@click.option("--n1", type=int, required=True, help="Treated groups.")
@click.option("--n0", type=int, required=True, help="Control groups.")
@click.pass_context
def paired(ctx, sigma_lambda2, sigma_delta2, sigma_eps2_1, sigma_eps2_0, n1, n0):
    """Finite-sample TWFE variance with shocks shared in pairs."""
    inputs = {"sigma_lambda2": sigma_lambda2, "sigma_delta2": sigma_delta2, "sigma_eps2_1": sigma_eps2_1, "sigma_eps2_0": sigma_eps2_0}
    _analytic(ctx, "paired", {**inputs, "N1": n1, "N0": n0}, lambda: paired_twfe_variance(**inputs, N1=n1, N0=n0))


@analytic.command()
@click.option("--kappa", type=float, required=True, help="Variance inflation of the t-statistic.")
@click.option("--level", type=float, default=0.05, show_default=True, help="Nominal level.")
@click.pass_context
def rejection(ctx, kappa, level):
    """Rejection rate of a nominal test when t ~ N(0, 1 + kappa)."""
    _analytic(ctx, "rejection", {"kappa": kappa, "level": level}, lambda: rejection_from_inflation(kappa, level))


@analytic.command()
@click.option("--blocks", "n_blocks", type=int, default=20, show_default=True, help="Number of blocks F.")
@click.option("--block-size", type=int, default=10, show_default=True, help="Groups per block.")
@click.option("--periods", "n_periods", type=int, default=10, show_default=True, help="Number of periods T.")
@click.option("--t-star", "t_star", type=int, default=5, show_default=True, help="Adoption period.")
@click.option("--rho", type=float, default=0.5, show_default=True, help="AR(1) coefficient of the block shocks.")
@click.option("--sigma-nu2", type=float, default=1.0, show_default=True, help="Innovation variance of the block shocks.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed of the fixed population.")
@click.pass_context
def design(ctx, n_blocks, block_size, n_periods, t_star, rho, sigma_nu2, seed):
    """Randomization variances of block vs group assignment on one fixed population."""
    inputs = {"n_blocks": n_blocks, "block_size": block_size, "T": n_periods, "t_star": t_star, "rho": rho, "sigma_nu2": sigma_nu2, "seed": seed}

    def compute():
        pop = draw_fixed_population(n_blocks, block_size, n_periods, t_star, ARSpec(rho=rho, sigma_nu2=sigma_nu2), seed=seed)
        return design_variances(pop)

    _analytic(ctx, "design", inputs, compute)


# --------------------------------------------------------------------------- entry point


def _fail(code: str, message: str, exit_code: int) -> int:
    click.echo(orjson.dumps({"code": code, "error": message}).decode(), err=True)
    return exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code: 0 ok, 1 usage, 2 data, 3 numeric."""
    args = list(sys.argv[1:] if argv is None else argv)
    configure_logging()
    try:
        result = cli.main(args=args, prog_name="didlab", standalone_mode=False, obj={"argv": args})
    except LabError as e:
        logger.error("command_failed", code=e.code.value, error=e.message)
        return _fail(e.code.value, e.message, e.exit_code)
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        return 1
    return result if isinstance(result, int) else 0
