"""Command-line client.

Every subcommand builds a request for the HTTP service and posts it; with
no ``--server`` the service app runs in process, so the CLI works without
a deployment.  A key=value config file can back any flag; explicitly
passed flags win.
"""

from __future__ import annotations

import json

import click


def _load_config(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise click.ClickException(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_config(ctx: click.Context, config: str | None, values: dict) -> dict:
    """Fill values still at their defaults from the config file."""
    if config is None:
        return values
    parsed = _load_config(config)
    params = {p.name: p for p in ctx.command.params}
    for key, raw in parsed.items():
        if key not in values or key not in params:
            continue
        if ctx.get_parameter_source(key) == click.core.ParameterSource.DEFAULT:
            if isinstance(params[key].type, click.types.BoolParamType) or params[key].is_flag:
                values[key] = raw.lower() in ("1", "true", "yes", "on")
            else:
                values[key] = params[key].type.convert(raw, params[key], ctx)
    return values


def _post(server: str | None, path: str, payload: dict) -> dict:
    if server:
        import httpx

        with httpx.Client(base_url=server, timeout=None) as client:
            resp = client.post(path, json=payload)
    else:
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # test-client import warns upstream
            from fastapi.testclient import TestClient

        from .service import app

        with TestClient(app) as client:
            resp = client.post(path, json=payload)
    if resp.status_code != 200:
        raise click.ClickException(f"{path} returned {resp.status_code}: {resp.text}")
    return resp.json()


def _floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _ints(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _problem_payload(values: dict) -> dict:
    return {
        "problem": values["problem"],
        "dataset": values["dataset"],
        "has_header": values["has_header"],
        "n_samples": values["n_samples"],
        "n_features": values["n_features"],
        "n_classes": values["n_classes"],
        "label_noise": values["label_noise"],
        "data_seed": values["data_seed"],
        "batch": values["batch"],
        "minmax": values["minmax"],
        "train_fraction": values["train_fraction"],
        "split_seed": values["split_seed"],
        "subsample": values["subsample"],
    }


def _problem_options(fn):
    opts = [
        click.option("--dataset", default="synthetic", show_default=True,
                     help="CSV path or 'synthetic'."),
        click.option("--problem", type=click.Choice(["logistic", "ls"]),
                     default="logistic", show_default=True),
        click.option("--has-header", is_flag=True, help="Skip the first CSV line."),
        click.option("--n-samples", type=int, default=2000, show_default=True),
        click.option("--n-features", type=int, default=20, show_default=True),
        click.option("--n-classes", type=int, default=5, show_default=True),
        click.option("--label-noise", type=float, default=0.1, show_default=True),
        click.option("--data-seed", type=int, default=0, show_default=True),
        click.option("--batch", type=int, default=10, show_default=True,
                     help="Mini-batch group size; groups are the sum components."),
        click.option("--minmax/--no-minmax", default=True, show_default=True),
        click.option("--train-fraction", type=float, default=0.8, show_default=True),
        click.option("--split-seed", type=int, default=0, show_default=True),
        click.option("--subsample", type=int, default=None,
                     help="Keep only the first N rows of a CSV dataset."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@click.group()
@click.option("--server", default=None, envvar="ADALVR_SERVER",
              help="Base URL of a running service; default runs in process.")
@click.pass_context
def main(ctx, server):
    """Benchmark and verify adaptive variance-reduced finite-sum solvers."""
    ctx.obj = {"server": server}


@main.command("run")
@_problem_options
@click.option("--algos", default="adasaga_diag,saga", show_default=True,
              help="Comma list of algorithm names.")
@click.option("--ltilde", default="0.001,0.01,0.1,1,10,100", show_default=True,
              help="Comma list of step parameters; eta = 1/ltilde.")
@click.option("--epochs", type=float, default=10.0, show_default=True)
@click.option("--seeds", default="0", show_default=True, help="Comma list of seeds.")
@click.option("--p", type=float, default=None, help="Anchor refresh probability.")
@click.option("--project", is_flag=True)
@click.option("--box-halfwidth", type=float, default=None)
@click.option("--stride", type=int, default=None,
              help="Checkpoint stride in gradients; default one epoch.")
@click.option("--gamma", type=float, default=0.9, show_default=True)
@click.option("--beta1", type=float, default=0.9, show_default=True)
@click.option("--beta2", type=float, default=0.999, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default="results.csv",
              show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None,
              help="key=value file backing any flag.")
@click.pass_context
def run_cmd(ctx, config, **values):
    """Grid sweep over algorithms and step parameters; writes the CSV."""
    values = _apply_config(ctx, config, values)
    payload = {
        "problem": _problem_payload(values),
        "algorithms": [a.strip() for a in values["algos"].split(",") if a.strip()],
        "ltilde": _floats(values["ltilde"]),
        "epochs": values["epochs"],
        "seeds": _ints(values["seeds"]),
        "p": values["p"],
        "projection": values["project"],
        "box_halfwidth": values["box_halfwidth"],
        "checkpoint_grads": values["stride"],
        "gamma": values["gamma"],
        "beta1": values["beta1"],
        "beta2": values["beta2"],
        "workers": values["workers"],
    }
    data = _post(ctx.obj["server"], "/grid", payload)
    with open(values["out"], "w", encoding="utf-8", newline="") as fh:
        fh.write(data["csv"])
    click.echo(f"wrote {data['n_rows']} rows to {values['out']}")


@main.command("solve")
@_problem_options
@click.option("--algo", default="adasaga_diag", show_default=True)
@click.option("--ltilde", type=float, default=1.0, show_default=True)
@click.option("--epochs", type=float, default=10.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--p", type=float, default=None)
@click.option("--project", is_flag=True)
@click.option("--box-halfwidth", type=float, default=None)
@click.option("--stride", type=int, default=None)
@click.option("--gamma", type=float, default=0.9, show_default=True)
@click.option("--beta1", type=float, default=0.9, show_default=True)
@click.option("--beta2", type=float, default=0.999, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Optional checkpoint CSV.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def solve_cmd(ctx, config, **values):
    """Run one algorithm at one step parameter and report the outcome."""
    values = _apply_config(ctx, config, values)
    payload = {
        "problem": _problem_payload(values),
        "algorithm": values["algo"],
        "ltilde": values["ltilde"],
        "epochs": values["epochs"],
        "seed": values["seed"],
        "p": values["p"],
        "projection": values["project"],
        "box_halfwidth": values["box_halfwidth"],
        "checkpoint_grads": values["stride"],
        "gamma": values["gamma"],
        "beta1": values["beta1"],
        "beta2": values["beta2"],
    }
    data = _post(ctx.obj["server"], "/solve", payload)
    if values["out"]:
        with open(values["out"], "w", encoding="utf-8", newline="") as fh:
            fh.write(data["csv"])
    status = "diverged" if data["diverged"] else "ok"
    click.echo(
        f"{values['algo']} ltilde={values['ltilde']}: f={data['final_objective']:.6e} "
        f"gradients={data['gradients']} [{status}]"
    )
    if data["final_balanced_accuracy"] is not None:
        click.echo(f"balanced accuracy: {data['final_balanced_accuracy']:.4f}")


@main.command("reference")
@_problem_options
@click.option("--tol", type=float, default=1e-9, show_default=True)
@click.option("--max-iter", type=int, default=5000, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the minimizer as JSON.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def reference_cmd(ctx, config, **values):
    """Compute a high-accuracy minimizer of the train objective."""
    values = _apply_config(ctx, config, values)
    payload = {
        "problem": _problem_payload(values),
        "tol": values["tol"],
        "max_iter": values["max_iter"],
    }
    data = _post(ctx.obj["server"], "/reference", payload)
    click.echo(f"f* = {data['f']:.12e}  ||grad|| = {data['grad_norm']:.3e}")
    if values["out"]:
        with open(values["out"], "w", encoding="utf-8") as fh:
            json.dump(data, fh)
        click.echo(f"wrote minimizer to {values['out']}")


@main.command("verify")
@click.option("--runs", type=int, default=48, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--t-max", type=int, default=200, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the full report as JSON.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def verify_cmd(ctx, config, **values):
    """Run the randomized inequality suite and print one line per check."""
    values = _apply_config(ctx, config, values)
    payload = {"seed": values["seed"], "runs": values["runs"], "t_max": values["t_max"]}
    data = _post(ctx.obj["server"], "/verify", payload)
    for rep in data["reports"]:
        mark = "pass" if rep["passed"] else "FAIL"
        click.echo(
            f"[{mark}] {rep['lemma']}: lhs={rep['lhs']:.6e} rhs={rep['rhs']:.6e} "
            f"({rep['context']})"
        )
    if values["out"]:
        with open(values["out"], "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2)
    n_fail = sum(not rep["passed"] for rep in data["reports"])
    click.echo(f"{len(data['reports']) - n_fail}/{len(data['reports'])} checks passed")
    if not data["all_passed"]:
        raise SystemExit(1)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve_cmd(host, port):
    """Start the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
