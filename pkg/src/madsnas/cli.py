"""Command-line entry point: macs, nas, hpo, tournament, bb-test, surrogate,
and report subcommands driven by a YAML configuration file with flag
overrides (flags win). Heavy imports stay inside the commands so cheap
subcommands (surrogate, bb-test) start fast."""

from __future__ import annotations

import json
import os
import sys

import click

from .errors import ConfigError, MadsnasError


@click.group()
def cli():
    """Constrained derivative-free search toolkit (MADS engine, MAC cost
    model, subprocess blackbox protocol)."""


# --------------------------------------------------------------------------
# config handling


def _load_yaml(path):
    import yaml

    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except Exception as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return data


def _check_keys(section, data, allowed):
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}")


def _engine_settings(cfg, budget, seed, min_frame_size, opportunistic, workers):
    _check_keys(
        "engine",
        cfg,
        ["max_evaluations", "min_frame_size", "seed", "opportunistic",
         "workers", "initial_search_points"],
    )
    settings = {
        "max_evaluations": cfg.get("max_evaluations", 200),
        "min_frame_size": cfg.get("min_frame_size", 1e-7),
        "seed": cfg.get("seed", 0),
        "opportunistic": cfg.get("opportunistic", True),
        "workers": cfg.get("workers", 1),
        "initial_search_points": cfg.get("initial_search_points", 0),
    }
    if budget is not None:
        settings["max_evaluations"] = budget
    if seed is not None:
        settings["seed"] = seed
    if min_frame_size is not None:
        settings["min_frame_size"] = min_frame_size
    if opportunistic is not None:
        settings["opportunistic"] = opportunistic
    if workers is not None:
        settings["workers"] = workers
    return settings


def _blackbox_config(cfg, command, timeout, seeds):
    from .protocol import BlackboxConfig, DEFAULT_TIMEOUT

    _check_keys("blackbox", cfg, ["command", "timeout", "seeds", "working_dir"])
    template = command or cfg.get("command")
    if not template:
        raise ConfigError("a blackbox command is required (config or --bb-command)")
    seed_list = seeds if seeds is not None else cfg.get("seeds", [0])
    return BlackboxConfig(
        command_template=template,
        timeout=timeout if timeout is not None else cfg.get("timeout", DEFAULT_TIMEOUT),
        seeds=tuple(seed_list),
        working_dir=cfg.get("working_dir"),
    )


def _prepare_outdir(path, echo):
    import yaml

    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "config_echo.yaml"), "w") as fh:
        yaml.safe_dump(echo, fh, sort_keys=True)


def _parse_seed_list(text):
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad seed list {text!r}") from exc


# --------------------------------------------------------------------------
# macs


@cli.command()
@click.option("--family", type=click.Choice(["resnet18", "senet18"]), required=True)
@click.option("--multipliers", default="1,1,1", show_default=True,
              help="depth,width,resolution scaling multipliers")
@click.option("--resolution", default=32, show_default=True, help="baseline input resolution")
@click.option("--classes", default=10, show_default=True, help="classifier output classes")
@click.option("--format", "fmt", type=click.Choice(["text", "csv"]), default="text",
              show_default=True)
def macs(family, multipliers, resolution, classes, fmt):
    """Per-layer MAC/parameter table for a scaled descriptor."""
    from . import archmodel

    try:
        parts = [float(tok) for tok in multipliers.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad --multipliers value: {exc}") from exc
    if len(parts) != 3:
        raise ConfigError("--multipliers needs exactly depth,width,resolution")
    base = archmodel.baseline(family, resolution, classes)
    scaled = archmodel.scale(base, archmodel.ScalingMultipliers(*parts))
    table = archmodel.layer_table(scaled)
    if fmt == "csv":
        click.echo("layer,out_channels,out_height,out_width,macs,params")
        for layer in table:
            c, h, w = layer.output_shape
            click.echo(f"{layer.name},{c},{h},{w},{layer.macs},{layer.params}")
    else:
        width = max(len(layer.name) for layer in table)
        for layer in table:
            c, h, w = layer.output_shape
            click.echo(
                f"{layer.name:<{width}}  {c:>4}x{h:>3}x{w:>3}  "
                f"macs={layer.macs:>12}  params={layer.params:>10}"
            )
    mac_ratio, param_ratio = archmodel.ratios(base, scaled)
    total_macs = sum(l.macs for l in table)
    total_params = sum(l.params for l in table)
    click.echo(
        f"total macs={total_macs} params={total_params} "
        f"mac_ratio={mac_ratio:.4f} param_ratio={param_ratio:.4f}"
    )


# --------------------------------------------------------------------------
# surrogate


@cli.command()
@click.option("--kind", type=click.Choice(["quadratic", "nas_accuracy", "hpo_accuracy",
                                           "constant", "failing"]), required=True)
@click.option("--spec", "spec_file", default=None, help="JSON file with surrogate parameters")
@click.argument("input_file")
@click.argument("seed", type=int)
def surrogate(kind, spec_file, input_file, seed):
    """Protocol-compliant analytic blackbox: reads a point file, prints its
    value, exits nonzero on configured failure."""
    from .surrogates import SurrogateFailure, SurrogateSpec, eval_surrogate

    params = {}
    noise = 0.0
    if spec_file:
        with open(spec_file) as fh:
            params = json.load(fh)
        noise = float(params.pop("noise_sigma", 0.0))
    with open(input_file) as fh:
        point = [float(tok) for tok in fh.read().split()]
    spec = SurrogateSpec(kind=kind, parameters=params, noise_sigma=noise)
    try:
        value = eval_surrogate(spec, point, seed)
    except SurrogateFailure as exc:
        click.echo(str(exc), err=True)
        raise SystemExit(1)
    click.echo(f"{value:.12g}")


# --------------------------------------------------------------------------
# bb-test


@cli.command(name="bb-test")
@click.option("--command", "command_template", required=True,
              help="command with {input} and optional {seed} placeholders")
@click.option("--point", default="0.5", show_default=True,
              help="space-separated canned point values")
@click.option("--timeout", default=60.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
def bb_test(command_template, point, timeout, seed):
    """Check a command against the blackbox contract with a canned point."""
    from .protocol import BlackboxConfig, check_protocol
    from .space import SearchSpace, VariableSpec

    try:
        values = [float(tok) for tok in point.split()]
    except ValueError as exc:
        raise ConfigError(f"bad --point value: {exc}") from exc
    if not values:
        raise ConfigError("--point must contain at least one value")
    space = SearchSpace(
        tuple(
            VariableSpec(f"x{i}", "continuous", lower=-1e12, upper=1e12, initial=v)
            for i, v in enumerate(values)
        )
    )
    cfg = BlackboxConfig(command_template=command_template, timeout=timeout, seeds=(seed,))
    ok, message = check_protocol(cfg, space, tuple(values))
    if not ok:
        click.echo(f"protocol FAILED: {message}", err=True)
        raise MadsnasError(message)
    click.echo(f"protocol OK ({message})")


# --------------------------------------------------------------------------
# nas


@cli.command()
@click.option("--config", "config_file", default=None, help="YAML configuration file")
@click.option("--family", type=click.Choice(["resnet18", "senet18"]), default=None)
@click.option("--epsilon", type=float, default=None, help="accuracy slack")
@click.option("--bb-command", default=None, help="blackbox command template")
@click.option("--bb-seeds", default=None, help="comma-separated blackbox seeds")
@click.option("--timeout", type=float, default=None, help="per-run blackbox timeout (s)")
@click.option("--budget", type=int, default=None, help="max blackbox evaluations")
@click.option("--seed", type=int, default=None, help="engine seed")
@click.option("--min-frame-size", type=float, default=None)
@click.option("--opportunistic/--no-opportunistic", default=None)
@click.option("--workers", type=int, default=None)
@click.option("--out", "output_dir", default=None, help="output directory")
def nas(config_file, family, epsilon, bb_command, bb_seeds, timeout, budget, seed,
        min_frame_size, opportunistic, workers, output_dir):
    """Minimize MAC count subject to accuracy >= measured baseline."""
    from .nas import NasProblem, run_nas

    cfg = _load_yaml(config_file) if config_file else {}
    _check_keys("nas config", cfg,
                ["family", "epsilon", "bounds", "blackbox", "engine", "output_dir"])
    family = family or cfg.get("family")
    if not family:
        raise ConfigError("a family is required (config or --family)")
    bounds_cfg = cfg.get("bounds", {})
    bounds = {name: tuple(pair) for name, pair in bounds_cfg.items()}
    blackbox = _blackbox_config(cfg.get("blackbox", {}), bb_command, timeout,
                                _parse_seed_list(bb_seeds) if bb_seeds else None)
    settings = _engine_settings(cfg.get("engine", {}), budget, seed, min_frame_size,
                                opportunistic, workers)
    outdir = output_dir or cfg.get("output_dir") or "nas_run"
    problem = NasProblem(
        family=family,
        blackbox=blackbox,
        multiplier_bounds=bounds,
        accuracy_slack=epsilon if epsilon is not None else cfg.get("epsilon", 0.0),
        workers=settings["workers"],
    )
    echo = {
        "subcommand": "nas",
        "family": family,
        "epsilon": problem.accuracy_slack,
        "bounds": {k: list(v) for k, v in problem.multiplier_bounds.items()},
        "blackbox": {"command": blackbox.command_template, "timeout": blackbox.timeout,
                     "seeds": list(blackbox.seeds)},
        "engine": settings,
    }
    _prepare_outdir(outdir, echo)
    engine_kwargs = {k: v for k, v in settings.items() if k != "workers"}
    report = run_nas(problem, **engine_kwargs)
    report.history.write_csv(os.path.join(outdir, "history.csv"))
    with open(os.path.join(outdir, "report.txt"), "w") as fh:
        fh.write(report.to_text() + "\n")
    d, w, r = report.best_multipliers
    click.echo(
        f"nas done: best multipliers d={d:.4g} w={w:.4g} r={r:.4g} "
        f"mac_ratio={report.mac_ratio:.4f} param_ratio={report.param_ratio:.4f} "
        f"accuracy={report.best_accuracy:.4g} evals={len(report.history)}"
    )


# --------------------------------------------------------------------------
# hpo


@cli.command()
@click.option("--config", "config_file", default=None, help="YAML configuration file")
@click.option("--bb-command", default=None, help="blackbox command template")
@click.option("--bb-seeds", default=None, help="comma-separated blackbox seeds")
@click.option("--timeout", type=float, default=None, help="per-run blackbox timeout (s)")
@click.option("--budget", type=int, default=None, help="max blackbox evaluations")
@click.option("--seed", type=int, default=None, help="engine seed")
@click.option("--min-frame-size", type=float, default=None)
@click.option("--opportunistic/--no-opportunistic", default=None)
@click.option("--workers", type=int, default=None)
@click.option("--out", "output_dir", default=None, help="output directory")
def hpo(config_file, bb_command, bb_seeds, timeout, budget, seed, min_frame_size,
        opportunistic, workers, output_dir):
    """Maximize blackbox accuracy over lr, weight decay, optimizer, batch."""
    from .hpo import run_hpo

    cfg = _load_yaml(config_file) if config_file else {}
    _check_keys("hpo config", cfg, ["blackbox", "engine", "output_dir"])
    blackbox = _blackbox_config(cfg.get("blackbox", {}), bb_command, timeout,
                                _parse_seed_list(bb_seeds) if bb_seeds else None)
    settings = _engine_settings(cfg.get("engine", {}), budget, seed, min_frame_size,
                                opportunistic, workers)
    outdir = output_dir or cfg.get("output_dir") or "hpo_run"
    echo = {
        "subcommand": "hpo",
        "blackbox": {"command": blackbox.command_template, "timeout": blackbox.timeout,
                     "seeds": list(blackbox.seeds)},
        "engine": settings,
    }
    _prepare_outdir(outdir, echo)
    report = run_hpo(blackbox, **settings)
    report.history.write_csv(os.path.join(outdir, "history.csv"))
    with open(os.path.join(outdir, "report.txt"), "w") as fh:
        fh.write(report.to_text() + "\n")
    click.echo(
        f"hpo done: lr={report.sampled_lr:.4g} (effective {report.effective_lr:.4g}) "
        f"wd={report.weight_decay:.4g} optimizer={report.optimizer} "
        f"batch={report.batch_size} accuracy={report.best_accuracy:.4g} "
        f"improvement={report.improvement:+.4g} evals={len(report.history)}"
    )


# --------------------------------------------------------------------------
# tournament


@cli.command()
@click.option("--config", "config_file", required=True, help="YAML configuration file")
@click.option("--top", "top_m", type=int, default=None, help="select the top m candidates")
@click.option("--workers", type=int, default=None)
@click.option("--out", "output_dir", default=None, help="output directory")
def tournament(config_file, top_m, workers, output_dir):
    """Rank candidate blackboxes by mean accuracy over shared seeds."""
    from .protocol import BlackboxConfig, DEFAULT_TIMEOUT
    from .tournament import Candidate, run_tournament, select_top

    cfg = _load_yaml(config_file)
    _check_keys("tournament config", cfg,
                ["candidates", "seeds", "top", "workers", "output_dir"])
    cand_cfgs = cfg.get("candidates") or []
    if not cand_cfgs:
        raise ConfigError("tournament needs at least one candidate")
    candidates = []
    for c in cand_cfgs:
        _check_keys("candidate", c, ["name", "command", "timeout"])
        if "name" not in c or "command" not in c:
            raise ConfigError("each candidate needs name and command")
        candidates.append(
            Candidate(
                name=c["name"],
                blackbox=BlackboxConfig(
                    command_template=c["command"],
                    timeout=c.get("timeout", DEFAULT_TIMEOUT),
                ),
            )
        )
    seeds = cfg.get("seeds", [0])
    workers = workers if workers is not None else cfg.get("workers", 1)
    outdir = output_dir or cfg.get("output_dir") or "tournament_run"
    echo = {"subcommand": "tournament", "seeds": list(seeds),
            "candidates": [c.name for c in candidates], "workers": workers}
    _prepare_outdir(outdir, echo)
    ranking = run_tournament(candidates, seeds, workers=workers)
    lines = ["rank,name,mean_accuracy,failures," +
             ",".join(f"seed_{s}" for s in seeds)]
    for i, entry in enumerate(ranking, start=1):
        mean = "" if entry.mean_accuracy is None else f"{entry.mean_accuracy:.6g}"
        per_seed = ",".join("" if v is None else f"{v:.6g}" for v in entry.per_seed)
        lines.append(f"{i},{entry.name},{mean},{entry.failures},{per_seed}")
    with open(os.path.join(outdir, "ranking.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    for i, entry in enumerate(ranking, start=1):
        mean = "n/a" if entry.mean_accuracy is None else f"{entry.mean_accuracy:.4f}"
        flag = f" ({entry.failures} failed runs)" if entry.failures else ""
        click.echo(f"{i:>3}  {entry.name:<24} mean={mean}{flag}")
    m = top_m if top_m is not None else cfg.get("top", min(2, len(candidates)))
    top = select_top(ranking, m)
    click.echo(f"tournament done: top {m} = {', '.join(top)}")


# --------------------------------------------------------------------------
# report


@cli.command()
@click.option("--dir", "run_dir", required=True, help="run directory to summarize")
def report(run_dir):
    """Summarize a previous nas/hpo run directory."""
    report_path = os.path.join(run_dir, "report.txt")
    history_path = os.path.join(run_dir, "history.csv")
    if not os.path.exists(report_path):
        raise ConfigError(f"no report.txt in {run_dir}")
    with open(report_path) as fh:
        click.echo(fh.read().rstrip())
    if os.path.exists(history_path):
        with open(history_path) as fh:
            rows = fh.read().strip().splitlines()
        click.echo(f"history: {max(0, len(rows) - 1)} evaluations in {history_path}")


# --------------------------------------------------------------------------


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except (ConfigError, click.UsageError, click.BadParameter) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except click.Abort:
        return 2
    except MadsnasError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except Exception as exc:  # runtime failure
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
