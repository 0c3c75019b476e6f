"""Command-line front end.

Every command resolves its configuration as defaults < config file < flags,
validates it, runs, and writes its outputs plus ``manifest.json`` into
``--out``. Errors print a single line ``ERROR <CODE> <text>``.

Exit codes: 0 ok, 1 computation failure, 2 usage error, 3 acceptance failure.
"""

from __future__ import annotations

import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from . import acceptance, analytic, classify as classify_mod, exponents, halfspace, io, sphere_ode, transforms
from ._validation import ProblemParams
from .exceptions import DomainError, QLSingError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ACCEPT = 0, 1, 2, 3


class UsageProblem(Exception):
    pass


def read_config(path) -> dict:
    """Flat ``key = value`` file, ``#`` comments, UTF-8."""
    cfg = {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageProblem(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        cfg["format_" if key == "format" else key] = value
    return cfg


def _resolve(ctx_params: dict, defaults: dict) -> dict:
    """Merge defaults, the config file and explicit flags (flags win)."""
    cfg = read_config(ctx_params["config"]) if ctx_params.get("config") else {}
    out = dict(defaults)
    for key, value in cfg.items():
        if key not in defaults:
            raise UsageProblem(f"unknown config key {key!r}")
        out[key] = value
    for key, value in ctx_params.items():
        if key == "config" or value is None:
            continue
        out[key] = value
    return out


def _as(cfg, key, kind):
    value = cfg.get(key)
    if value is None:
        return None
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise UsageProblem(f"--{key}: cannot interpret {value!r} as {kind.__name__}") from None


def parse_grid(text: str):
    try:
        a, b = str(text).lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise UsageProblem(f"--grid expects WxH, got {text!r}") from None


def parse_values(text, kind=float) -> list:
    """``a:b:step`` (inclusive) or comma-separated values."""
    text = str(text).strip()
    if ":" in text:
        try:
            a, b, step = (float(s) for s in text.split(":"))
        except ValueError:
            raise UsageProblem(f"bad range {text!r}; expected a:b:step") from None
        if step <= 0 or b < a:
            raise UsageProblem(f"bad range {text!r}")
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        vals = [round(a + i * step, 12) for i in range(n)]
    else:
        try:
            vals = [float(s) for s in text.split(",") if s.strip()]
        except ValueError:
            raise UsageProblem(f"bad value list {text!r}") from None
    if kind is int:
        if any(v != int(v) for v in vals):
            raise UsageProblem(f"expected integers in {text!r}")
        vals = [int(v) for v in vals]
    return vals


def _out_dir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _params(cfg, need_q=True) -> ProblemParams:
    N = _as(cfg, "N", int)
    q = _as(cfg, "q", float)
    if N is None or (need_q and q is None):
        raise UsageProblem("--N and --q are required")
    p = _as(cfg, "p", float)
    A = _as(cfg, "A", float)
    k = _as(cfg, "k", float)
    return ProblemParams(N=N, q=q, p=p, A=1.0 if A is None else A, k=1.0 if k is None else k)


def _emit(obj):
    click.echo(io.dumps(obj))


def common_options(fn):
    opts = [
        click.option("--out", default=None, help="output directory"),
        click.option("--format", "format_", type=click.Choice(["csv", "json"]), default=None),
        click.option("--config", default=None, type=click.Path(dir_okay=False), help="key = value file"),
        click.option("--seed", default=None, type=int),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


COMMON_DEFAULTS = {"out": "out", "format_": "json", "seed": 0}


def _run(command, ctx_params, defaults, body):
    """Resolve config, run ``body(cfg, out)`` and write the manifest."""
    cfg = _resolve(ctx_params, COMMON_DEFAULTS | defaults)
    out = _out_dir(cfg)
    config = {k.rstrip("_"): v for k, v in cfg.items()}
    t0 = time.perf_counter()
    try:
        outputs, code = body(cfg, out)
    except (QLSingError, UsageProblem) as exc:
        code = getattr(exc, "code", "USAGE")
        io.write_manifest(out, command, config, [], f"error {code}", {"message": str(exc)})
        raise
    status = {EXIT_OK: "ok", EXIT_ACCEPT: "acceptance_failure"}.get(code, "failed")
    io.write_manifest(out, command, config, outputs, status, {"runtime_s": time.perf_counter() - t0})
    return code


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="log progress to stderr")
def cli(verbose):
    """Boundary singularities of the absorbed N-Laplacian."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@cli.command("exponents")
@click.option("--N", "N", type=int)
@click.option("--q", type=float)
@click.option("--p", type=float)
@common_options
def cmd_exponents(**kw):
    """Closed-form exponent table."""

    def body(cfg, out):
        P = _params(cfg)
        table = exponents.exponent_table(P)
        _emit(table)
        if cfg["format_"] == "csv":
            d = table.as_dict()
            path = out / "exponents.csv"
            with path.open("w", encoding="utf-8") as fh:
                fh.write("name,value\n")
                for key, v in d.items():
                    fh.write(f"{key},{'' if v is None else (io.fmt17(v) if isinstance(v, float) else v)}\n")
        else:
            path = io.write_json(out / "exponents.json", {"params": {"N": P.N, "q": P.q, "p": P.p},
                                                           "table": table})
        return [path], EXIT_OK

    return _run("exponents", kw, {"N": None, "q": None, "p": None}, body)


@cli.command("profile")
@click.option("--N", "N", type=int)
@click.option("--q", type=float)
@click.option("--A", "A", type=float)
@click.option("--M", "M", type=int, help="spherical grid nodes")
@click.option("--tol", type=float, help="boundary tolerance")
@common_options
def cmd_profile(**kw):
    """Positive hemisphere profile of the absorption problem."""

    def body(cfg, out):
        P = _params(cfg)
        settings = sphere_ode.ShootSettings(tol_boundary=_as(cfg, "tol", float))
        prof = sphere_ode.solve_profile(P, sphere_ode.SphericalGrid(_as(cfg, "M", int)), settings)
        csv_path = io.profile_to_csv(prof, out / "profile.csv")
        summary = {"N": P.N, "q": P.q, "A": P.A, "beta": prof.beta, "omega0": prof.lambda0,
                   "residual_norm": prof.residual_norm, "boundary_value": prof.boundary_value,
                   "M": prof.M, "iterations": prof.iterations}
        _emit(summary)
        js = io.write_json(out / "profile.json", summary)
        return [csv_path, js], EXIT_OK

    return _run("profile", kw, {"N": None, "q": None, "A": None, "M": 2001, "tol": 1e-8}, body)


@cli.command("spectral")
@click.option("--p", type=float)
@click.option("--N", "N", type=int)
@click.option("--M", "M", type=int)
@click.option("--tol", type=float)
@common_options
def cmd_spectral(**kw):
    """Exponent and profile of the p-harmonic spectral problem."""

    def body(cfg, out):
        p, N = _as(cfg, "p", float), _as(cfg, "N", int)
        if p is None or N is None:
            raise UsageProblem("--p and --N are required")
        settings = sphere_ode.ShootSettings(tol_boundary=_as(cfg, "tol", float))
        beta, prof = sphere_ode.solve_spectral(p, N, sphere_ode.SphericalGrid(_as(cfg, "M", int)), settings)
        csv_path = io.profile_to_csv(prof, out / "spectral.csv")
        summary = {"p": p, "N": N, "beta": beta, "lambda": prof.lam, "residual_norm": prof.residual_norm,
                   "M": prof.M}
        _emit(summary)
        return [csv_path, io.write_json(out / "spectral.json", summary)], EXIT_OK

    return _run("spectral", kw, {"p": None, "N": None, "M": 2001, "tol": 1e-8}, body)


def _solve_report(fld, P):
    return {"params": {"N": P.N, "q": P.q, "A": P.A, "k": fld.k},
            "grid": {"eps": fld.grid.eps, "R_out": fld.grid.R_out, "n_t": fld.grid.n_t, "n_phi": fld.grid.n_phi},
            "iters": fld.iters, "final_update_norm": fld.final_update_norm, "residual_norm": fld.residual_norm,
            "supersolution_violation": halfspace.supersolution_bound_violation(fld),
            "bounds": halfspace.bound_diagnostics(fld, P)}


@cli.command("solve")
@click.option("--N", "N", type=int)
@click.option("--q", type=float)
@click.option("--A", "A", type=float)
@click.option("--k", type=float)
@click.option("--eps", type=float)
@click.option("--R", "R", type=float)
@click.option("--grid", type=str, help="n_t x n_phi, e.g. 257x129")
@click.option("--tol", type=float, help="Newton update tolerance")
@common_options
def cmd_solve(**kw):
    """Weak-singularity solve on a half-space sector."""

    def body(cfg, out):
        P = _params(cfg)
        n_t, n_phi = parse_grid(cfg["grid"])
        grid = halfspace.SectorGrid(_as(cfg, "eps", float), _as(cfg, "R", float), n_t, n_phi)
        settings = halfspace.SolveSettings(tol_update=_as(cfg, "tol", float))
        fld = halfspace.solve_field(P, grid, halfspace.weak_k(P.finite_k()), settings)
        csv_path = io.field_to_csv(fld, out / "field.csv")
        report = _solve_report(fld, P)
        _emit(report)
        return [csv_path, io.write_json(out / "report.json", report)], EXIT_OK

    return _run("solve", kw, {"N": None, "q": None, "A": None, "k": 1.0, "eps": 1e-3, "R": 1.0,
                              "grid": "257x129", "tol": 1e-11}, body)


@cli.command("removability")
@click.option("--N", "N", type=int)
@click.option("--q", type=float)
@click.option("--k", type=float)
@click.option("--eps", type=float, help="largest inner radius")
@click.option("--halvings", type=int)
@click.option("--probe", type=float)
@click.option("--R", "R", type=float)
@click.option("--dt", type=float, help="t-spacing")
@click.option("--nphi", type=int)
@common_options
def cmd_removability(**kw):
    """Probe maxima as the inner radius shrinks."""

    def body(cfg, out):
        P = _params(cfg)
        eps0, n = _as(cfg, "eps", float), _as(cfg, "halvings", int)
        eps = [eps0 / 2**i for i in range(n + 1)]
        rep = halfspace.removability_experiment(P, eps, _as(cfg, "probe", float), R_out=_as(cfg, "R", float),
                                                dt=_as(cfg, "dt", float), n_phi=_as(cfg, "nphi", int))
        _emit(rep)
        return [io.write_json(out / "removability.json", rep)], EXIT_OK

    return _run("removability", kw, {"N": None, "q": None, "k": 1.0, "eps": 1e-2, "halvings": 4,
                                     "probe": 0.1, "R": 1.0, "dt": 0.01, "nphi": 65}, body)


@cli.command("classify")
@click.option("--field", "field_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--N", "N", type=int)
@click.option("--q", type=float)
@click.option("--window", type=str, help="r_lo,r_hi")
@common_options
def cmd_classify(**kw):
    """Classify a field CSV (columns t, r, phi, u)."""

    def body(cfg, out):
        if not cfg.get("field_path"):
            raise UsageProblem("--field is required")
        P = _params(cfg)
        fld = io.read_field_csv(cfg["field_path"], P)
        window = None
        if cfg.get("window"):
            window = parse_values(cfg["window"])
            if len(window) != 2:
                raise UsageProblem("--window expects r_lo,r_hi")
        res = classify_mod.classify(fld, P, window)
        _emit(res)
        return [io.write_json(out / "classification.json", res)], EXIT_OK

    return _run("classify", kw, {"field_path": None, "N": None, "q": None, "window": None}, body)


def _sweep_point(task, point):
    """One sweep point; never raises so the sweep keeps partial results."""
    N, q, k, eps = point
    rec = {"N": N, "q": q, "k": k, "eps": eps}
    try:
        P = ProblemParams(N=N, q=q, k=k)
        if task == "exponents":
            rec["result"] = exponents.exponent_table(P).as_dict()
        elif task == "profile":
            prof = sphere_ode.solve_profile(P)
            rec["result"] = {"omega0": prof.lambda0, "residual_norm": prof.residual_norm}
        elif task == "solve":
            fld = halfspace.solve_field(P, halfspace.SectorGrid(eps, 1.0, 129, 65))
            rec["result"] = {"max_at_0.1": fld.max_at(0.1), "iters": fld.iters,
                             "residual_norm": fld.residual_norm}
        rec["status"] = "ok"
    except QLSingError as exc:
        rec["status"] = f"error {exc.code}"
        rec["message"] = str(exc)
    return rec


@cli.command("sweep")
@click.option("--N", "N", type=str)
@click.option("--q", type=str)
@click.option("--k", type=str)
@click.option("--eps", type=str)
@click.option("--task", type=click.Choice(["exponents", "profile", "solve"]), default=None)
@click.option("--jobs", type=int)
@common_options
def cmd_sweep(**kw):
    """Run a task over the grid of (N, q, k, eps) values; ranges are a:b:step."""

    def body(cfg, out):
        Ns = parse_values(cfg["N"], int)
        qs = parse_values(cfg["q"])
        ks = parse_values(cfg["k"])
        es = parse_values(cfg["eps"])
        jobs = _as(cfg, "jobs", int)
        if jobs < 1:
            raise UsageProblem("--jobs must be >= 1")
        points = [(N, q, k, e) for N in Ns for q in qs for k in ks for e in es]
        task = cfg["task"]
        if jobs == 1:
            records = [_sweep_point(task, p) for p in points]
        else:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                records = list(ex.map(_sweep_point, [task] * len(points), points))
        for i, r in enumerate(records):
            r["index"] = i
        if cfg["format_"] == "csv":
            cols = ["index", "N", "q", "k", "eps", "status"]
            path = out / "sweep.csv"
            with path.open("w", encoding="utf-8") as fh:
                fh.write(",".join(cols) + "\n")
                for r in records:
                    fh.write(",".join(io.fmt17(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols) + "\n")
            paths = [path, io.write_json(out / "sweep.json", {"task": task, "records": records})]
        else:
            paths = [io.write_json(out / "sweep.json", {"task": task, "records": records})]
        click.echo(f"{len(records)} records, {sum(r['status'] == 'ok' for r in records)} ok")
        failed = any(r["status"] != "ok" for r in records)
        return paths, EXIT_FAIL if failed else EXIT_OK

    return _run("sweep", kw, {"N": "2", "q": "2", "k": "1", "eps": "1e-3", "task": "exponents", "jobs": 1}, body)


@cli.command("verify")
@click.argument("target", required=False, type=click.Choice(["suite", "subsolution", "ellipticity"]))
@click.option("--suite", type=click.Choice(["all"] + list(acceptance.SUITES)), default=None)
@click.option("--N", "N", type=int)
@click.option("--q", type=float)
@click.option("--p", type=float)
@click.option("--alpha", type=float)
@click.option("--k", type=float)
@click.option("--chart", type=str, help='"flat" or "e1,e2:c; ..."')
@click.option("--tube", type=float)
@click.option("--samples", type=int)
@common_options
def cmd_verify(**kw):
    """Acceptance suite (default), or a subsolution / ellipticity report."""

    def body(cfg, out):
        target = cfg.get("target") or "suite"
        if target == "subsolution":
            P = _params(cfg)
            alpha = _as(cfg, "alpha", float)
            if alpha is None:
                alpha = 0.5 * analytic.alpha_bound(P) if math.isfinite(analytic.alpha_bound(P)) else 0.5
            spec = analytic.SubsolutionSpec(_as(cfg, "k", float) or 1.0, alpha)
            rep = {"N": P.N, "q": P.q, "alpha": alpha, "alpha_bound": analytic.alpha_bound(P)}
            rep |= analytic.find_R(spec, P)
            _emit(rep)
            return [io.write_json(out / "subsolution.json", rep)], EXIT_OK
        if target == "ellipticity":
            N = _as(cfg, "N", int)
            p = _as(cfg, "p", float) or float(N)
            chart = transforms.BoundaryChart.from_string(cfg["chart"], N, _as(cfg, "tube", float))
            rep = transforms.ellipticity_scan(chart, p, _as(cfg, "samples", int), seed=_as(cfg, "seed", int))
            d = rep.as_dict() | {"N": N, "p": p, "chart": cfg["chart"]}
            _emit(d)
            return [io.write_json(out / "ellipticity.json", d)], EXIT_OK
        results = acceptance.run_suite(cfg["suite"])
        for r in results:
            click.echo(r.line())
        path = io.write_json(out / "verify.json", {"suite": cfg["suite"], "criteria": results})
        ok = all(r.passed for r in results)
        return [path], EXIT_OK if ok else EXIT_ACCEPT

    return _run("verify", kw, {"target": None, "suite": "all", "N": 2, "q": None, "p": None, "alpha": None,
                               "k": None, "chart": "flat", "tube": 0.1, "samples": 200}, body)


def main(argv=None) -> int:
    try:
        code = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.NoArgsIsHelpError as exc:
        click.echo(exc.ctx.get_help() if exc.ctx else str(exc))
        return EXIT_USAGE
    except click.UsageError as exc:
        click.echo(f"ERROR USAGE {exc.format_message()}", err=True)
        return EXIT_USAGE
    except UsageProblem as exc:
        click.echo(f"ERROR USAGE {exc}", err=True)
        return EXIT_USAGE
    except DomainError as exc:
        click.echo(f"ERROR {exc.code} {exc}", err=True)
        return EXIT_USAGE
    except QLSingError as exc:
        click.echo(f"ERROR {exc.code} {exc}", err=True)
        return EXIT_FAIL
    except click.exceptions.Abort:
        click.echo("ERROR ABORTED interrupted", err=True)
        return EXIT_FAIL
    except (OSError, ValueError) as exc:
        click.echo(f"ERROR IO {exc}", err=True)
        return EXIT_FAIL
    if isinstance(code, int):
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
