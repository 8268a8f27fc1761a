"""Command-line front end: explain, simulate, evaluate.

Every run writes its outputs plus one manifest.json into --out and nothing
anywhere else. Exit codes: 0 ok, 2 bad config/arguments, 3 estimator
failure, 4 bridge failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .coalitions import member_indices, nontrivial_coalitions, popcounts
from .data import Dataset, load_csv
from .errors import BridgeError, CondshapError, ConfigError, DataError
from .estimators import parse_estimator_spec
from .explain import explain_instances
from .metrics import mse_v
from .models import GamMoreModel, LinearModel
from .sim import (
    fit_model_from_spec,
    parse_experiment_toml,
    run_experiment,
    write_long_csv,
    write_summary_csv,
)

EPILOG = """\
estimator specs (method[:regressor[:backend]][:key=value ...]):
  independence            draw completions from the training marginal
  empirical[:bw=B:neighbors=N]
                          kernel-weighted nearest neighbors on coalition columns
  gaussian-mc[:K=N]       sample a fitted multivariate Gaussian conditional
  separate:ols|ridge-basis|knn|bridge:<backend>
                          one regression per coalition (alias: ols-separate)
  surrogate-aug:ols|ridge-basis|knn[:budget=B]
                          one surrogate on masked augmented rows
  surrogate-aug-coal:...  as above, one surrogate per coalition size
  surrogate-direct:bridge:<backend>
                          missing-value-capable remote model, no augmentation
  options: K, neighbors, k, ens, budget (ints); bw, lambda (floats)

model specs:
  gam-more                built-in nonlinear response (M=8)
  linear:b0,b1,...,bM     fixed linear model
  ols | ridge-basis[:lambda=L] | knn[:k=K]
                          fitted to the --data CSV (needs --target)
  bridge:<backend>[:ens=N]
                          fitted remotely over the sidecar bridge
"""


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _fmt(x: float) -> str:
    return repr(float(x))


class _Stages:
    """Wall-clock per stage, reported in the manifest only."""

    def __init__(self):
        self.runtimes: dict[str, float] = {}
        self._t0 = None
        self._name = None

    def start(self, name: str):
        self._name, self._t0 = name, time.perf_counter()

    def stop(self):
        if self._name is not None:
            self.runtimes[self._name] = time.perf_counter() - self._t0
            self._name = None


def write_manifest(
    out: Path,
    command: str,
    config: str | None,
    seed: int,
    runtimes: dict,
    outputs: dict,
    started_at: str,
    errors: list | None = None,
) -> None:
    import json

    doc = {
        "schema_version": 1,
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "started_at": started_at,
        "finished_at": _utc_now(),
        "stage_runtimes_seconds": {k: round(v, 6) for k, v in runtimes.items()},
        "outputs": outputs,
    }
    if errors:
        doc["errors"] = errors
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _needs_bridge(*spec_texts: str) -> bool:
    return any("bridge" in (t or "") for t in spec_texts)


def _make_pool(args, *spec_texts: str):
    if not (_needs_bridge(*spec_texts) or getattr(args, "bridge", None)):
        return None
    from .bridge import BridgeSessionPool

    return BridgeSessionPool(cmd=getattr(args, "bridge", None), size=max(1, args.jobs))


def _build_model(text: str, train: Dataset, pool):
    text = text.strip()
    if text == "gam-more":
        if train.m != 8:
            raise ConfigError(f"gam-more is defined for 8 features, data has {train.m}")
        return GamMoreModel()
    if text.startswith("linear:"):
        coeffs = [float(v) for v in text[len("linear:") :].split(",")]
        if len(coeffs) != train.m + 1:
            raise ConfigError(f"linear model needs {train.m + 1} coefficients")
        return LinearModel(coeffs[0], np.asarray(coeffs[1:]))
    if train.y is None:
        raise ConfigError(f"model {text!r} must be fitted; pass --target to name the label column")
    return fit_model_from_spec(text, train.X, train.y, pool)


def _load_instances(args, train: Dataset) -> np.ndarray:
    categorical = tuple(args.categorical or ())
    target = args.target if args.target else None
    with open(args.instances, encoding="utf-8") as fh:
        header = fh.readline()
    has_target = target is not None and target in [h.strip() for h in header.split(",")]
    ds = load_csv(args.instances, target=target if has_target else None, categorical=categorical)
    if ds.feature_names != train.feature_names:
        raise DataError(
            f"instance columns {list(ds.feature_names)} do not match "
            f"training columns {list(train.feature_names)}"
        )
    return ds.X


def _dump_coalitions(path, values: np.ndarray, feature_names) -> str:
    m = len(feature_names)
    masks = np.arange(values.shape[1])
    sizes = popcounts(masks)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("instance_id,mask,size,members,v\n")
        for i in range(values.shape[0]):
            for mask in masks:
                members = "|".join(feature_names[j] for j in member_indices(int(mask), m))
                fh.write(f"{i},{mask},{sizes[mask]},{members},{_fmt(values[i, mask])}\n")
    return "instance_id,mask,size,members,v"


def cmd_explain(args) -> int:
    out = _out_dir(args)
    started = _utc_now()
    stages = _Stages()
    pool = _make_pool(args, args.model, args.estimator)
    try:
        stages.start("load_data")
        train = load_csv(args.data, target=args.target, categorical=tuple(args.categorical or ()))
        X_star = _load_instances(args, train)
        stages.stop()

        stages.start("fit_model")
        model = _build_model(args.model, train, pool)
        stages.stop()

        stages.start("estimate")
        estimator = parse_estimator_spec(args.estimator, bridge_pool=pool)
        result = explain_instances(
            train, model, estimator, X_star, master_seed=args.seed, jobs=args.jobs
        )
        stages.stop()

        stages.start("write")
        header = (
            "instance_id,phi0,"
            + ",".join(f"phi_{j + 1}" for j in range(result.m))
            + ",efficiency_residual"
        )
        residuals = result.efficiency_residuals()
        with open(out / "explanations.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header + "\n")
            for i in range(result.n):
                phis = ",".join(_fmt(p) for p in result.phis[i])
                fh.write(f"{i},{_fmt(result.phi0)},{phis},{_fmt(residuals[i])}\n")
        outputs = {"explanations.csv": header}
        if args.dump_coalitions:
            outputs["coalitions.csv"] = _dump_coalitions(
                out / "coalitions.csv", result.values, train.feature_names
            )
        stages.stop()
        write_manifest(out, "explain", None, args.seed, stages.runtimes, outputs, started)
        return 0
    finally:
        if pool is not None:
            pool.close()


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    started = _utc_now()
    stages = _Stages()
    stages.start("config")
    config = parse_experiment_toml(Path(args.config).read_text(encoding="utf-8"))
    if args.seed is not None:
        config = _replace(config, seed=args.seed)
    if args.rho:
        config = _replace(config, rho_grid=tuple(args.rho))
    if args.jobs != 1:
        config = _replace(config, jobs=args.jobs)
    stages.stop()

    pool = _make_pool(args, config.model, *config.estimators)
    try:
        stages.start("experiment")
        result = run_experiment(config, bridge_pool=pool)
        stages.stop()

        stages.start("write")
        write_long_csv(result, out / "results_long.csv")
        write_summary_csv(result, out / "summary.csv")
        stages.stop()

        errors = [
            {"estimator": c.estimator, "rho": c.rho, "error": c.error}
            for c in result.cells
            if c.error is not None
        ]
        runtimes = {**stages.runtimes, **result.stage_runtimes}
        write_manifest(
            out, "simulate", str(args.config), config.seed, runtimes,
            {
                "results_long.csv": "estimator,rho,instance,mae",
                "summary.csv": "estimator,rho,mean_mae,mse_v",
            },
            started,
            errors=errors,
        )
        for err in errors:
            print(
                f"estimator {err['estimator']!r} failed at rho={err['rho']}: {err['error']}",
                file=sys.stderr,
            )
        return 3 if errors else 0
    finally:
        if pool is not None:
            pool.close()


def cmd_evaluate(args) -> int:
    out = _out_dir(args)
    started = _utc_now()
    stages = _Stages()
    pool = _make_pool(args, args.model, *args.estimator)
    try:
        stages.start("load_data")
        train = load_csv(args.data, target=args.target, categorical=tuple(args.categorical or ()))
        X_star = _load_instances(args, train) if args.instances else train.X
        stages.stop()

        stages.start("fit_model")
        model = _build_model(args.model, train, pool)
        stages.stop()

        masks = nontrivial_coalitions(train.m)
        f_star = model.predict(X_star)
        rows = []
        for spec_text in args.estimator:
            stages.start(f"estimate[{spec_text}]")
            estimator = parse_estimator_spec(spec_text, bridge_pool=pool)
            prepared = estimator.prepare(train, model, args.seed)
            v_hat = prepared.contribute_batch(X_star, np.arange(X_star.shape[0]), masks)
            score = mse_v(f_star, v_hat)
            stages.stop()
            rows.append((spec_text, score, stages.runtimes[f"estimate[{spec_text}]"]))

        stages.start("write")
        with open(out / "evaluation.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("estimator,mse_v,time\n")
            for spec_text, score, seconds in rows:
                fh.write(f"{spec_text},{_fmt(score)},{seconds:.3f}\n")
        stages.stop()
        write_manifest(
            out, "evaluate", None, args.seed, stages.runtimes,
            {"evaluation.csv": "estimator,mse_v,time"}, started,
        )
        return 0
    finally:
        if pool is not None:
            pool.close()


def _replace(config, **kw):
    from dataclasses import replace

    return replace(config, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="condshap",
        description="Conditional Shapley values by exact coalition enumeration.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"condshap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        p.add_argument("--jobs", type=int, default=1, help="max parallel workers")
        p.add_argument("--bridge", help="sidecar command or tcp://host:port")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("explain", help="attribute model predictions for instances")
    p.add_argument("--data", required=True, help="training CSV (header row required)")
    p.add_argument("--instances", required=True, help="CSV of rows to explain")
    p.add_argument("--model", required=True, help="model spec (see epilog)")
    p.add_argument("--estimator", required=True, help="estimator spec (see epilog)")
    p.add_argument("--target", help="label column in --data")
    p.add_argument("--categorical", action="append", help="one-hot encode this column")
    p.add_argument(
        "--dump-coalitions", action="store_true", help="write per-coalition v to coalitions.csv"
    )
    common(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("simulate", help="run the synthetic-data experiment grid")
    p.add_argument("--config", required=True, help="TOML experiment config")
    p.add_argument("--rho", type=float, action="append", help="restrict the rho grid")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--jobs", type=int, default=1, help="max parallel workers")
    p.add_argument("--bridge", help="sidecar command or tcp://host:port")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="score estimators by coalition-value MSE")
    p.add_argument("--data", required=True, help="training CSV (header row required)")
    p.add_argument("--instances", help="CSV of rows to score on (default: training rows)")
    p.add_argument("--model", required=True, help="model spec (see epilog)")
    p.add_argument(
        "--estimator", required=True, action="append", help="estimator spec (repeatable)"
    )
    p.add_argument("--target", help="label column in --data")
    p.add_argument("--categorical", action="append", help="one-hot encode this column")
    common(p)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BridgeError as exc:
        print(f"bridge error: {exc}", file=sys.stderr)
        return 4
    except CondshapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
