"""Thin command-line client for the estimation service.

Every command builds a request, posts it to the service, and formats the
response; no numerics happen here.  By default the service runs in-process,
so the CLI works standalone; ``--server`` points it at a remote instance.
Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

import base64
import json
import os
import sys
import time
from pathlib import Path

import click
import httpx

EXIT_INPUT = 2
EXIT_NUMERICAL = 3

_SWEEP_HEADER = ["tau", "bayes_error", "stderr", "method", "levels_total"]
_FIG1_HEADER = ["tau", "exact", "hdr", "stderr", "rel_err"]


def _default_threads() -> int:
    env = os.environ.get("BAYES_BOUND_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=3600.0)
    import warnings

    with warnings.catch_warnings():
        # starlette's testclient deprecation notice subclasses UserWarning
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service.app import create_app

    return TestClient(create_app(), raise_server_exceptions=False)


def _post(server: str | None, path: str, payload: dict) -> dict:
    try:
        with _client(server) as client:
            resp = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        click.echo(f"error: cannot reach service: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    if resp.status_code == 200:
        return resp.json()
    try:
        body = resp.json()
        detail = body.get("detail", resp.text)
        kind = body.get("kind", "input")
    except ValueError:
        detail, kind = resp.text, "input"
    click.echo(f"error: {detail}", err=True)
    sys.exit(EXIT_NUMERICAL if kind == "numerical" else EXIT_INPUT)


def _model_payload(path: str) -> dict:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        click.echo(f"error: cannot read model file: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    return {"gcm_base64": base64.b64encode(blob).decode("ascii")}


def _fmt(x: float | None) -> str:
    if x is None:
        return "-inf"
    return repr(float(x))


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def _write_csv(path: str | None, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_g17(v) if isinstance(v, float) else str(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path is None:
        click.echo(text, nl=False)
    else:
        Path(path).write_bytes(text.encode("ascii"))


def _hdr_options(f):
    opts = [
        click.option("--n-per-level", default=512, show_default=True, help="samples per nesting level"),
        click.option("--rho", default=0.5, show_default=True, help="target conditional probability per level"),
        click.option("--repeats", default=8, show_default=True, help="independent splitting runs"),
        click.option("--max-levels", default=200, show_default=True, help="nesting level cap"),
        click.option("--thin", default=None, type=int, help="chain steps between retained draws (default: dimension)"),
        click.option("--burnin", default=None, type=int, help="chain steps after re-seeding (default: 4x dimension)"),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _hdr_dict(n_per_level, rho, repeats, max_levels, thin, burnin) -> dict:
    return {
        "n_per_level": n_per_level,
        "rho": rho,
        "repeats": repeats,
        "max_levels": max_levels,
        "thin": thin,
        "burnin": burnin,
    }


@click.group()
@click.option("--server", default=None, envvar="BAYES_BOUND_SERVER",
              help="service URL; by default the service runs in-process")
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Optimal-error estimation for Gaussian class-conditional models."""
    ctx.obj = server


@main.command()
@click.argument("model_path", type=str)
@click.option("--tau", default=1.0, show_default=True)
@_hdr_options
@click.option("--seed", default=0, show_default=True)
@click.option("--threads", default=None, type=int,
              help="worker count [default: BAYES_BOUND_THREADS or all cores]")
@click.pass_obj
def compute(server, model_path, tau, n_per_level, rho, repeats, max_levels,
            thin, burnin, seed, threads):
    """Estimate the optimal error of a model at one temperature."""
    body = _post(server, "/v1/compute", {
        "model": _model_payload(model_path),
        "tau": tau,
        "hdr": _hdr_dict(n_per_level, rho, repeats, max_levels, thin, burnin),
        "seed": seed,
        "threads": threads or _default_threads(),
    })
    click.echo(f"tau {_fmt(body['tau'])}")
    click.echo(f"method {body['method']}")
    click.echo(f"bayes_error {_fmt(body['error'])} stderr {_fmt(body['stderr'])}")
    for k, cls in enumerate(body["per_class"]):
        levels = sum(cls["levels"])
        click.echo(
            f"class {k}: p {_fmt(cls['p'])} stderr {_fmt(cls['stderr'])} "
            f"levels {levels} degenerate {cls['degenerate_steps']}"
        )
    if body.get("closed_form") is not None:
        click.echo(
            f"closed_form {_fmt(body['closed_form'])} "
            f"discrepancy {_fmt(body['discrepancy'])}"
        )


@main.command()
@click.argument("model_path", type=str)
@click.option("--tau-min", required=True, type=float)
@click.option("--tau-max", required=True, type=float)
@click.option("--steps", default=10, show_default=True)
@click.option("--linear", is_flag=True, help="linear grid instead of geometric")
@click.option("--out", default=None, type=str, help="CSV path (default: stdout)")
@_hdr_options
@click.option("--seed", default=0, show_default=True)
@click.option("--threads", default=None, type=int)
@click.pass_obj
def sweep(server, model_path, tau_min, tau_max, steps, linear, out,
          n_per_level, rho, repeats, max_levels, thin, burnin, seed, threads):
    """Error estimates over a temperature grid, written as CSV."""
    body = _post(server, "/v1/sweep", {
        "model": _model_payload(model_path),
        "tau_min": tau_min,
        "tau_max": tau_max,
        "steps": steps,
        "grid": "linear" if linear else "geometric",
        "hdr": _hdr_dict(n_per_level, rho, repeats, max_levels, thin, burnin),
        "seed": seed,
        "threads": threads or _default_threads(),
    })
    rows = [
        [r["tau"], r["bayes_error"], r["stderr"], r["method"], r["levels_total"]]
        for r in body["rows"]
    ]
    _write_csv(out, _SWEEP_HEADER, rows)
    for warning in body["warnings"]:
        click.echo(f"warning: {warning}", err=True)


@main.command()
@click.argument("model_path", type=str)
@click.option("--target", required=True, type=float, help="error level to hit")
@click.option("--tau-lo", required=True, type=float)
@click.option("--tau-hi", required=True, type=float)
@click.option("--tol", default=0.01, show_default=True, help="relative bracket tolerance")
@click.option("--tol-eps", default=0.0, show_default=True, help="absolute error tolerance")
@_hdr_options
@click.option("--seed", default=0, show_default=True)
@click.option("--threads", default=None, type=int)
@click.pass_obj
def invert(server, model_path, target, tau_lo, tau_hi, tol, tol_eps,
           n_per_level, rho, repeats, max_levels, thin, burnin, seed, threads):
    """Find the temperature whose error matches the target."""
    body = _post(server, "/v1/invert", {
        "model": _model_payload(model_path),
        "target": target,
        "tau_lo": tau_lo,
        "tau_hi": tau_hi,
        "tol": tol,
        "tol_eps": tol_eps,
        "hdr": _hdr_dict(n_per_level, rho, repeats, max_levels, thin, burnin),
        "seed": seed,
        "threads": threads or _default_threads(),
    })
    est = body["estimate"]
    click.echo(f"tau_star {_fmt(body['tau_star'])}")
    click.echo(
        f"achieved {_fmt(est['error'])} stderr {_fmt(est['stderr'])} "
        f"target {_fmt(target)} evaluations {body['evaluations']}"
    )
    for warning in body["warnings"]:
        click.echo(f"warning: {warning}", err=True)


@main.command("one-vs-all")
@click.argument("model_path", type=str)
@click.option("--class", "class_index", required=True, type=int)
@click.option("--tau", default=1.0, show_default=True)
@click.option("--samples", default=1_000_000, show_default=True)
@click.option("--weight-mode", default="balanced", show_default=True,
              type=click.Choice(["balanced", "natural"]))
@click.option("--seed", default=0, show_default=True)
@click.pass_obj
def one_vs_all(server, model_path, class_index, tau, samples, weight_mode, seed):
    """Error of separating one class from the mixture of the rest."""
    body = _post(server, "/v1/one-vs-all", {
        "model": _model_payload(model_path),
        "class_index": class_index,
        "tau": tau,
        "samples": samples,
        "weight_mode": weight_mode,
        "seed": seed,
    })
    click.echo(
        f"one_vs_all class {body['class_index']} error {_fmt(body['error'])} "
        f"stderr {_fmt(body['stderr'])} samples {body['samples']} "
        f"weight_mode {body['weight_mode']}"
    )


@main.command("validate-fig1")
@click.option("--dim", default=784, show_default=True)
@click.option("--taus", default="0.5,1,2,4", show_default=True,
              help="comma-separated temperatures")
@click.option("--out", default=None, type=str, help="CSV path (default: stdout)")
@_hdr_options
@click.option("--seed", default=0, show_default=True)
@click.option("--threads", default=None, type=int)
@click.pass_obj
def validate_fig1(server, dim, taus, out, n_per_level, rho, repeats, max_levels,
                  thin, burnin, seed, threads):
    """Splitting estimate vs closed form on the two-class unit-vector benchmark."""
    try:
        tau_list = [float(t) for t in taus.split(",") if t.strip()]
    except ValueError:
        click.echo("error: --taus must be comma-separated numbers", err=True)
        sys.exit(EXIT_INPUT)
    started = time.monotonic()
    body = _post(server, "/v1/validate-fig1", {
        "dim": dim,
        "taus": tau_list,
        "hdr": _hdr_dict(n_per_level, rho, repeats, max_levels, thin, burnin),
        "seed": seed,
        "threads": threads or _default_threads(),
    })
    elapsed = time.monotonic() - started
    rows = [
        [r["tau"], r["exact"], r["hdr"], r["stderr"], r["rel_err"]]
        for r in body["rows"]
    ]
    _write_csv(out, _FIG1_HEADER, rows)
    status = "PASS" if body["passed"] else "FAIL"
    click.echo(f"{status} max_rel_err {_fmt(max(r['rel_err'] for r in body['rows']))} "
               f"elapsed {elapsed:.1f}s", err=(out is None))
    if not body["passed"]:
        sys.exit(EXIT_NUMERICAL)


@main.command("flow-invariance")
@click.argument("model_path", type=str)
@click.option("--flow", "flow_path", default=None, type=str, help="flow JSON file")
@click.option("--random-flow", "random_seed", default=None, type=int,
              help="seed for a generated flow instead of a file")
@click.option("--layers", default=6, show_default=True, help="layers of the generated flow")
@click.option("--additive", is_flag=True, help="generated flow without log-scales")
@click.option("--tau", default=1.0, show_default=True)
@click.option("--samples", default=1_000_000, show_default=True)
@_hdr_options
@click.option("--seed", default=0, show_default=True)
@click.option("--threads", default=None, type=int)
@click.pass_obj
def flow_invariance(server, model_path, flow_path, random_seed, layers, additive,
                    tau, samples, n_per_level, rho, repeats, max_levels, thin,
                    burnin, seed, threads):
    """Check that the transformed-space error matches the base-space error."""
    if (flow_path is None) == (random_seed is None):
        click.echo("error: provide exactly one of --flow or --random-flow", err=True)
        sys.exit(EXIT_INPUT)
    if flow_path is not None:
        try:
            flow_payload = {"inline": json.loads(Path(flow_path).read_text())}
        except (OSError, json.JSONDecodeError) as exc:
            click.echo(f"error: cannot read flow file: {exc}", err=True)
            sys.exit(EXIT_INPUT)
    else:
        flow_payload = {
            "random_seed": random_seed,
            "random_layers": layers,
            "affine": not additive,
        }
    body = _post(server, "/v1/flow-invariance", {
        "model": _model_payload(model_path),
        "flow": flow_payload,
        "tau": tau,
        "samples": samples,
        "hdr": _hdr_dict(n_per_level, rho, repeats, max_levels, thin, burnin),
        "seed": seed,
        "threads": threads or _default_threads(),
    })
    click.echo(
        f"x_space_mc {_fmt(body['error_x_space'])} stderr {_fmt(body['stderr_x_space'])}"
    )
    click.echo(f"base_hdr {_fmt(body['error_base'])} stderr {_fmt(body['stderr_base'])}")
    click.echo(
        f"difference {_fmt(body['difference'])} combined_stderr "
        f"{_fmt(body['combined_stderr'])}"
    )
    click.echo("PASS" if body["passed"] else "FAIL")
    if not body["passed"]:
        sys.exit(EXIT_NUMERICAL)


@main.command("gen-synthetic")
@click.option("--classes", required=True, type=int)
@click.option("--dim", required=True, type=int)
@click.option("--mean-scheme", default="unit-sphere", show_default=True,
              type=click.Choice(["unit-sphere", "simplex"]))
@click.option("--cov-scale", default=1.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=str)
@click.pass_obj
def gen_synthetic(server, classes, dim, mean_scheme, cov_scale, seed, out):
    """Write a synthetic model file."""
    body = _post(server, "/v1/gen-synthetic", {
        "classes": classes,
        "dim": dim,
        "mean_scheme": mean_scheme,
        "cov_scale": cov_scale,
        "seed": seed,
    })
    Path(out).write_bytes(base64.b64decode(body["gcm_base64"]))
    click.echo(f"wrote {out} (classes {classes}, dim {dim}, scheme {mean_scheme})")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the estimation service."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
