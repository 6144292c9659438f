"""Command line entry point ``hqv``.

Every subcommand resolves its settings as defaults, then command-line flags,
then the ``--config`` file (the file wins), prints the resolved settings to
stderr and writes a JSON summary to stdout.
"""
from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import chaos, harness, hermite, hou, increments, quadvar

MODULE_NAMES = {
    "hqv.chaos": "chaos_core",
    "hqv.hermite": "hermite_sim",
    "hqv.increments": "increments",
    "hqv.quadvar": "quadvar",
    "hqv.hou": "hou",
    "hqv.harness": "mc_harness",
    "hqv.cli": "cli",
}


class CliError(ValueError):
    pass


def _read_config_file(path: str | None, section: str) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise CliError(f"config file {path} does not exist")
    if p.suffix.lower() == ".toml":
        import tomli

        try:
            data = tomli.loads(p.read_text())
        except tomli.TOMLDecodeError as exc:
            raise CliError(f"{path}: {exc}") from None
    else:
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if section in data and isinstance(data[section], dict):
        data = {**{k: v for k, v in data.items() if not isinstance(v, dict)}, **data[section]}
    return {k.replace("-", "_"): v for k, v in data.items()}


def _resolve(ctx: click.Context, section: str, use_config_file: bool = True) -> dict:
    """Merge defaults, explicit flags and the config file, in that order."""
    root = ctx.find_root()
    merged = dict(root.params)
    flags = {}
    for c in (root, ctx):
        for name, value in c.params.items():
            src = c.get_parameter_source(name)
            if src is None or src.name == "DEFAULT":
                merged.setdefault(name, value)
            else:
                flags[name] = value
    merged.update({k: v for k, v in ctx.params.items() if k not in flags})
    merged.update(flags)
    if use_config_file:
        merged.update(_read_config_file(merged.get("config"), section))
    merged["subcommand"] = section
    click.echo("resolved configuration: " + json.dumps(merged, sort_keys=True, default=str), err=True)
    return merged


def _emit(summary: dict) -> None:
    click.echo(json.dumps(summary, sort_keys=True, default=_json_default))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def global_options(f):
    f = click.option("--verbose", "-v", is_flag=True, default=False, help="Progress messages on stderr.")(f)
    f = click.option("--workers", type=int, default=None, help="Worker processes (HQV_WORKERS wins).")(f)
    f = click.option("--config", "config", type=str, default=None, help="TOML or JSON file; overrides flags.")(f)
    f = click.option("--out", type=str, default=None, help="Output file.")(f)
    f = click.option("--seed", type=int, default=0, show_default=True, help="Master seed.")(f)
    return f


def scheme_options(f):
    f = click.option("--gamma", type=float, default=0.45, show_default=True)(f)
    f = click.option("--beta", type=float, default=0.5, show_default=True)(f)
    f = click.option("--N", "N", type=int, default=12, show_default=True, help="Dyadic resolution.")(f)
    return f


class HqvGroup(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (click.ClickException, click.exceptions.Exit, click.exceptions.Abort):
            raise
        except (ValueError, ArithmeticError, OSError) as exc:
            mod = MODULE_NAMES.get(type(exc).__module__, type(exc).__module__)
            click.echo(f"error [{mod}]: {exc}", err=True)
            ctx.exit(1)


@click.group(cls=HqvGroup)
@global_options
@click.pass_context
def main(ctx, **kw):
    """Hermite-process quadratic variations: simulation, estimation and checks."""


def _scheme(cfg) -> increments.DyadicScheme:
    return increments.DyadicScheme(int(cfg["N"]), float(cfg["beta"]), float(cfg["gamma"]))


@main.command()
@global_options
@click.option("--q", type=int, default=1, show_default=True)
@click.option("--hurst", type=float, default=0.7, show_default=True)
@click.option("--method", type=click.Choice(["exact", "chaos", "dmt"]), default="exact", show_default=True)
@click.option("--points-file", type=str, default=None, help="One time per line.")
@click.option("--dyadic", type=int, default=None, help="Sample at the anchors of resolution N.")
@click.option("--beta", type=float, default=0.5, show_default=True)
@click.option("--gamma", type=float, default=0.45, show_default=True)
@click.option("--cells-per-step", type=int, default=16, show_default=True, help="Chaos grid cells per 2^-N.")
@click.option("--dmt-n", type=int, default=None, help="DMT summands per unit time.")
@click.pass_context
def simulate(ctx, **kw):
    """Sample one path of the Hermite process."""
    cfg = _resolve(ctx, "simulate")
    params = hermite.HermiteParams(int(cfg["q"]), float(cfg["hurst"]))
    if cfg["points_file"]:
        pts = np.loadtxt(cfg["points_file"], ndmin=1)
        step = float(np.min(np.diff(np.unique(np.concatenate([[0.0], pts])))))
    elif cfg["dyadic"]:
        s = increments.DyadicScheme(int(cfg["dyadic"]), float(cfg["beta"]), float(cfg["gamma"]))
        pts = increments.required_times(s)
        step = s.step
    else:
        raise click.UsageError("give --points-file or --dyadic")
    method = cfg["method"]
    if method == "exact":
        if params.q != 1:
            raise CliError("the exact sampler is for q = 1")
        path = hermite.sample_gaussian_exact(pts, params.H, int(cfg["seed"]))
    elif method == "chaos":
        width = step / int(cfg["cells_per_step"])
        right = math.ceil(float(np.max(pts)) / width) * width
        grid = hermite.chaos_grid(right, width, hermite.default_truncation(params))
        path = hermite.sample_chaos(grid, params, pts, int(cfg["seed"]))
    else:
        n = int(cfg["dmt_n"] or max(2**12, int(round(4 / step))))
        path = hermite.sample_dmt(hermite.DmtConfig(n, params.H, params.q), params, pts, int(cfg["seed"]))
    out = cfg["out"] or "path.csv"
    path.to_csv(out)
    _emit({"out": out, "method": path.method, "points": int(path.times.size), "metadata": path.metadata})


def _load_path(cfg) -> hermite.SamplePath:
    if not cfg.get("path_file"):
        raise click.UsageError("--path-file is required")
    params = None
    if cfg.get("hurst") is not None:
        params = hermite.HermiteParams(int(cfg.get("q") or 1), float(cfg["hurst"]))
    return hermite.read_path_csv(cfg["path_file"], params)


@main.command(name="increments")
@global_options
@click.option("--path-file", type=str, default=None)
@scheme_options
@click.option("--restricted/--unrestricted", default=True, show_default=True)
@click.pass_context
def increments_cmd(ctx, **kw):
    """Extract the selected increments of a path file."""
    cfg = _resolve(ctx, "increments")
    path = _load_path(cfg)
    incs = increments.extract_increments(path, _scheme(cfg), bool(cfg["restricted"]))
    out = cfg["out"] or "increments.csv"
    incs.to_csv(out)
    _emit({"out": out, "cardinality": incs.cardinality, "deltas": incs.deltas})


@main.command(name="quadvar")
@global_options
@click.option("--path-file", type=str, default=None)
@scheme_options
@click.option("--hurst", type=float, required=True)
@click.option("--q", type=int, default=1)
@click.pass_context
def quadvar_cmd(ctx, **kw):
    """Centred quadratic variation of a path file (Hurst index known)."""
    cfg = _resolve(ctx, "quadvar")
    incs = increments.extract_increments(_load_path(cfg), _scheme(cfg))
    res = quadvar.quadratic_variation(incs, float(cfg["hurst"]))
    _emit(res.as_dict())


@main.command()
@global_options
@click.option("--path-file", type=str, default=None)
@scheme_options
@click.option("--hurst", type=float, default=None, help="True H, for the studentized deviation.")
@click.option("--q", type=int, default=1)
@click.pass_context
def estimate(ctx, **kw):
    """Hurst estimate from the selected increments of a path file."""
    cfg = _resolve(ctx, "estimate")
    if not cfg.get("path_file"):
        raise click.UsageError("--path-file is required")
    path = hermite.read_path_csv(cfg["path_file"])
    incs = increments.extract_increments(path, _scheme(cfg))
    h_true = cfg.get("hurst")
    res = quadvar.estimator(incs, None if h_true is None else float(h_true))
    _emit(res.as_dict())


@main.command(name="hou")
@global_options
@click.option("--q", type=int, default=1)
@click.option("--hurst", type=float, default=0.7, show_default=True)
@scheme_options
@click.option("--reps", type=int, default=500, show_default=True)
@click.pass_context
def hou_cmd(ctx, **kw):
    """Langevin solutions: estimator and drift remainders at one resolution."""
    cfg = _resolve(ctx, "hou")
    ecfg = harness.config_from_dict(
        {
            "kind": "hou",
            "q": int(cfg["q"]),
            "hurst": float(cfg["hurst"]),
            "beta": float(cfg["beta"]),
            "gamma": float(cfg["gamma"]),
            "sweep": [int(cfg["N"])],
            "replications": int(cfg["reps"]),
            "seed": int(cfg["seed"]),
            "workers": cfg.get("workers"),
        }
    )
    report = harness.run_experiment(ecfg)
    out = cfg["out"] or "hou_report.json"
    harness.persist_report(report, out)
    _emit({"out": out, "rows": report.rows})


@main.command()
@global_options
@click.pass_context
def experiment(ctx, **kw):
    """Run the experiment described by --config and persist its report."""
    cfg = _resolve(ctx, "experiment", use_config_file=False)
    if not cfg.get("config"):
        raise click.UsageError("experiment needs --config FILE")
    data = _read_config_file(cfg["config"], "experiment")
    for key in ("seed", "workers", "out"):
        src = ctx.get_parameter_source(key)
        if src is not None and src.name != "DEFAULT" and key not in data:
            data["output" if key == "out" else key] = cfg[key]
    ecfg = harness.config_from_dict(data)
    click.echo("resolved experiment: " + ecfg.model_dump_json(), err=True)
    report = harness.run_experiment(ecfg)
    out = ecfg.output or cfg.get("out") or f"{ecfg.kind}_report.json"
    files = harness.persist_report(report, out)
    _emit({"out": [str(f) for f in files], "summary": report.summary, "rows": report.rows})


@main.command()
@global_options
@click.argument("kind", type=click.Choice(["isometry", "product", "normalizing", "sigma2"]))
@click.option("--q", type=int, default=2, show_default=True)
@click.option("--cells", type=int, default=4, show_default=True)
@click.option("--trials", type=int, default=100_000, show_default=True)
@click.option("--hurst", type=float, default=0.7, show_default=True)
@click.pass_context
def oracle(ctx, **kw):
    """Exact-versus-Monte-Carlo self checks."""
    cfg = _resolve(ctx, "oracle")
    kind, q, cells, trials = cfg["kind"], int(cfg["q"]), int(cfg["cells"]), int(cfg["trials"])
    rng = np.random.default_rng(int(cfg["seed"]))
    if kind == "isometry":
        grid = chaos.Grid(0.0, 1.0, cells)
        f = chaos.StepKernel(rng.standard_normal((cells,) * q), grid)
        g = chaos.StepKernel(rng.standard_normal((cells,) * q), grid)
        exact = chaos.wick_expectation(f, g)
        formula = math.factorial(q) * chaos.inner(chaos.symmetrize(f), chaos.symmetrize(g))
        noise = chaos.draw_noise(grid, rng, size=trials)
        prod = chaos.multiple_integral(f, noise) * chaos.multiple_integral(g, noise)
        mc, se = float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(trials))
        exact_dev = abs(exact - formula)
        ok = exact_dev <= 1e-10 * max(1.0, abs(formula)) and abs(mc - exact) <= 4 * se
        line = (
            f"{'PASS' if ok else 'FAIL'} isometry q={q} cells={cells}: exact {exact:.6g}, "
            f"pairing-vs-formula deviation {exact_dev:.3e}, Monte Carlo deviation {mc - exact:.3e} (4 SE = {4 * se:.3e})"
        )
        summary = {"exact": exact, "formula": formula, "mc": mc, "se": se}
    elif kind == "product":
        grid = chaos.Grid(0.0, 1.0, cells)
        f = chaos.StepKernel(rng.standard_normal((cells,) * q), grid)
        g = chaos.StepKernel(rng.standard_normal((cells,) * q), grid)
        rep = chaos.product_formula_check(f, g, trials, rng, diagonal="drop")
        ok, line = rep.passed, rep.line()
        summary = {"mean_deviation": rep.mean_deviation, "se": rep.standard_error, "allowance": rep.diagonal_allowance}
    elif kind == "normalizing":
        params = hermite.HermiteParams(q, float(cfg["hurst"]))
        c1 = hermite.normalizing_constant(params, 16)
        c2 = hermite.normalizing_constant(params, 32)
        ok = abs(c1 - c2) <= 1e-4 * c2
        line = f"{'PASS' if ok else 'FAIL'} normalizing constant q={q} H={params.H}: {c2:.10g}, doubling change {abs(c1 - c2):.3e}"
        summary = {"c": c2, "change": abs(c1 - c2)}
    else:
        params = hermite.HermiteParams(q, float(cfg["hurst"]))
        a = quadvar.asymptotic_variance(params, "mc", trials, np.random.SeedSequence(int(cfg["seed"]), spawn_key=(0,)), "dmt")
        b = quadvar.asymptotic_variance(params, "mc", trials, np.random.SeedSequence(int(cfg["seed"]), spawn_key=(1,)), "chaos")
        joint = 4 * math.hypot(a.standard_error, b.standard_error)
        ok = abs(a.value - b.value) <= joint
        line = (
            f"{'PASS' if ok else 'FAIL'} sigma^2 q={q} H={params.H}: dmt {a.value:.4f} +/- {a.standard_error:.4f}, "
            f"chaos {b.value:.4f} +/- {b.standard_error:.4f}"
        )
        summary = {"dmt": a.value, "dmt_se": a.standard_error, "chaos": b.value, "chaos_se": b.standard_error}
    click.echo(line, err=True)
    _emit({"oracle": kind, "status": "PASS" if ok else "FAIL", "line": line, **summary})
    if not ok:
        ctx.exit(1)


if __name__ == "__main__":  # pragma: no cover
    main()
