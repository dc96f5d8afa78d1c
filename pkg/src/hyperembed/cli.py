"""Command-line entry point: ``hyperembed simulate|fit|predict|eval|repro``.

Every run writes a JSON manifest next to its main output. Exit codes: 0 on
success, 2 for argument errors, 3 for data errors, 4 for numeric failures.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io
from .augment import augment_and_refit, tune_delta
from .metrics import evaluate
from .model import ModelConfig, hyper_logits, pairwise_sum, sigmoid
from .optim import FitError, TuningError, fit_variant, tune_lambda, variant_config
from .simgen import EstimationError, GenerationError, GenSpec, make_splits
from .studies import METHODS, format_table, run_study, summarize

log = logging.getLogger("hyperembed")

EXIT_OK, EXIT_ARGS, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class ArgumentFailure(Exception):
    pass


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("HYPEREMBED_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ArgumentFailure(f"HYPEREMBED_SEED must be an integer, got {env!r}")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(path, command, args, config=None, seed=None, inputs=(), outputs=(),
                    extra=None, started=None):
    manifest = {
        "subcommand": command,
        "arguments": {k: v for k, v in vars(args).items() if k != "func"},
        "config": asdict(config) if config is not None else None,
        "seed": seed,
        "inputs": {str(p): _sha256(p) for p in inputs if p and Path(p).exists()},
        "outputs": {str(p): _sha256(p) for p in outputs if Path(p).exists()},
        "wall_clock_seconds": None if started is None else round(time.perf_counter() - started, 3),
    }
    if extra:
        manifest.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def _config(args, seed):
    return ModelConfig(r=args.rank, beta=args.beta, lam=args.lam).with_(
        seed=seed, max_iter=args.max_iters, tol=args.tol, threads=args.threads)


# --- simulate ---------------------------------------------------------------

def cmd_simulate(args):
    started = time.perf_counter()
    seed = _seed(args)
    fields = {}
    if args.missing_rate is not None:
        if args.study != 2:
            raise ArgumentFailure("--missing-rate applies to study 2 only")
        fields["missing_rate"] = args.missing_rate
    spec = GenSpec(study=args.study, n=args.n, seed=seed, rho=args.rho, rho_obs=args.rho_obs, **fields)
    bundle = make_splits(spec)
    out = io.ensure_dir(args.out)
    written = []
    for name in ("train", "valid", "test"):
        p = out / f"{name}_pairs.txt"
        io.save_pairs(p, getattr(bundle, f"{name}_pair"))
        h = out / f"{name}_hyper.txt"
        io.save_hyper(h, getattr(bundle, f"{name}_hyper"))
        written += [p, h]
    for name, values in (("test_pairs.truth", bundle.test_pair_truth),
                         ("test_hyper.truth", bundle.test_hyper_truth),
                         ("valid_hyper.truth", bundle.valid_hyper_truth)):
        io.save_truth(out / name, values)
        written.append(out / name)
    info = {k: v for k, v in bundle.info.items()}
    _write_manifest(out / "manifest.json", "simulate", args, seed=seed, outputs=written,
                    extra={"spec": asdict(spec), "measured": info}, started=started)
    print(f"wrote {len(written)} files to {out}")
    for key in ("rho_measured", "rho_obs_measured"):
        if key in info:
            print(f"{key} = {info[key]:.3f}")
    return EXIT_OK


# --- fit --------------------------------------------------------------------

def _load_optional(loader, path):
    return loader(path) if path else None


def cmd_fit(args):
    started = time.perf_counter()
    seed = _seed(args)
    method = args.method.upper().replace("AUGJLE", "AugJLE")
    pairs = _load_optional(io.load_pairs, args.pairs)
    hyper = _load_optional(io.load_hyper, args.hyper)
    valid_pairs = _load_optional(io.load_pairs, args.valid_pairs)
    valid_hyper = _load_optional(io.load_hyper, args.valid_hyper)
    if method in ("PLE", "JLE", "AugJLE") and pairs is None:
        raise ArgumentFailure(f"fit {args.method} needs --pairs")
    if method == "HLE" and hyper is None:
        raise ArgumentFailure("fit hle needs --hyper")
    if method == "JLE" and pairs is None and hyper is None:
        raise ArgumentFailure("fit jle needs --pairs or --hyper")
    sizes = {o.n for o in (pairs, hyper) if o is not None}
    if len(sizes) > 1:
        raise ValueError(f"pair and hyper files disagree on n: {sorted(sizes)}")
    if (args.lambda_grid or args.delta_grid) and valid_pairs is None and valid_hyper is None:
        raise ArgumentFailure("grid search needs --valid-pairs and/or --valid-hyper")

    config = _config(args, seed)
    extra = {}
    kind = "JLE" if method == "AugJLE" else method
    if args.lambda_grid:
        lam, table = tune_lambda(args.lambda_grid, pairs, hyper, valid_pairs, valid_hyper,
                                 config, kind)
        config = config.with_(lam=lam)
        extra["lambda_table"] = {repr(k): v for k, v in table.items()}
        print(f"selected lambda = {lam:g}")
    cfg = variant_config(kind, config)
    m = hyper.m if hyper is not None and len(hyper) else None
    model_path = Path(args.out)
    try:
        if method == "AugJLE":
            delta = args.delta
            if args.delta_grid:
                delta, table = tune_delta(args.delta_grid, pairs, hyper, valid_pairs, valid_hyper,
                                          config)
                extra["delta_table"] = {repr(k): v for k, v in table.items()}
                print(f"selected delta = {delta:g}")
            Z, augmented, report = augment_and_refit(pairs, hyper, config, delta)
            extra["delta"] = delta
            extra["augmented"] = {"count": len(augmented), "links": int(augmented.y.sum())}
            m = m or 3
        else:
            Z, report = fit_variant(kind, pairs, hyper, config)
    except FitError as exc:
        if exc.Z is not None:
            failed = model_path.with_name(model_path.name + ".failed")
            io.save_model(failed, exc.Z, cfg, m)
            log.error("partial model saved to %s", failed)
        raise
    io.save_model(model_path, Z, cfg, m)
    extra["fit"] = {"iterations": report.iterations, "final_loss": report.losses[-1],
                    "grad_norm": report.grad_norm, "converged": report.converged}
    _write_manifest(model_path.with_name(model_path.name + ".manifest.json"), "fit", args,
                    config=cfg, seed=seed, inputs=[args.pairs, args.hyper, args.valid_pairs,
                                                   args.valid_hyper],
                    outputs=[model_path], extra=extra, started=started)
    print(f"{method}: {report.iterations} iterations, final loss {report.losses[-1]:.6g}")
    return EXIT_OK


# --- predict ----------------------------------------------------------------

def _load_query(path, n):
    """Whitespace-separated node indices, one pair or tuple per line."""
    rows = []
    width = None
    for no, text in io._lines(path):
        nodes = []
        for tok in text.split():
            try:
                nodes.append(int(tok))
            except ValueError:
                raise io.ParseError(path, no, f"node {tok!r} is not an integer") from None
        if width is None:
            width = len(nodes)
        if len(nodes) != width:
            raise io.ParseError(path, no, f"row has {len(nodes)} nodes, expected {width}")
        if len(set(nodes)) != len(nodes):
            raise io.ParseError(path, no, "repeated node in a query row")
        bad = [v for v in nodes if v < 0 or v >= n]
        if bad:
            raise io.ParseError(path, no, f"node index {bad[0]} outside [0, {n})")
        rows.append(nodes)
    if not rows:
        raise io.ParseError(path, 0, "no query rows")
    return np.array(rows, dtype=np.int64)


def cmd_predict(args):
    started = time.perf_counter()
    Z, config, meta = io.load_model(args.model, with_meta=True)
    queries = _load_query(args.query, len(Z))
    m = queries.shape[1]
    if m < 2:
        raise ArgumentFailure("query rows need at least two nodes")
    if args.generalized:
        scores = sigmoid(pairwise_sum(Z, queries))
    elif m == 2:
        scores = sigmoid(np.einsum("ek,ek->e", Z[queries[:, 0]], Z[queries[:, 1]]))
    else:
        trained = meta.get("m", 3)
        if m != trained:
            raise ArgumentFailure(f"model was trained on {trained}-order hyperlinks; "
                                  f"use --generalized for {m}-node queries")
        scores = sigmoid(hyper_logits(Z, queries, config.beta, config.concordance))
    out = Path(args.out)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("nodes,score\n")
        for row, s in zip(queries.tolist(), scores.tolist()):
            fh.write(" ".join(map(str, row)) + f",{s!r}\n")
    _write_manifest(out.with_name(out.name + ".manifest.json"), "predict", args, config=config,
                    inputs=[args.model, args.query], outputs=[out], started=started)
    print(f"scored {len(scores)} rows")
    return EXIT_OK


# --- eval -------------------------------------------------------------------

def cmd_eval(args):
    started = time.perf_counter()
    Z, config = io.load_model(args.model)
    pairs = _load_optional(io.load_pairs, args.pairs)
    hyper = _load_optional(io.load_hyper, args.hyper)
    if pairs is None and hyper is None:
        raise ArgumentFailure("eval needs --pairs and/or --hyper")
    pair_truth = _load_optional(io.load_truth, args.pair_truth)
    hyper_truth = _load_optional(io.load_truth, args.hyper_truth)
    report = evaluate(Z, config, pairs, hyper, pair_truth, hyper_truth)
    out = Path(args.out)
    io.save_report(out, report)
    for name, msg in sorted(report.errors.items()):
        print(f"{name}: {msg}", file=sys.stderr)
    _write_manifest(out.with_name(out.name + ".manifest.json"), "eval", args, config=config,
                    inputs=[args.model, args.pairs, args.hyper, args.pair_truth, args.hyper_truth],
                    outputs=[out], started=started)
    for name in report.names():
        print(f"{name:12s} auc={report.auc[name]:.4f} n={report.count[name]}")
    return EXIT_OK


# --- repro ------------------------------------------------------------------

def cmd_repro(args):
    started = time.perf_counter()
    if args.replicates < 1:
        raise ArgumentFailure("--replicates must be >= 1")
    seed = _seed(args)
    seeds = [seed + k for k in range(args.replicates)]
    fields = {}
    if args.study == 3:
        fields.update(rho=args.rho, rho_obs=args.rho_obs)
    if args.missing_rate is not None:
        if args.study != 2:
            raise ArgumentFailure("--missing-rate applies to study 2 only")
        fields["missing_rate"] = args.missing_rate
    methods = [m for m in METHODS if args.study != 1 or m != "AugJLE"]
    config = ModelConfig(r=args.rank, beta=args.beta).with_(
        max_iter=args.max_iters, tol=args.tol, threads=args.threads)
    reps = run_study(args.study, args.n, seeds, methods, config,
                     lambda_grid=args.lambda_grid, delta_grid=args.delta_grid, **fields)
    summary = summarize(reps)
    table = format_table(summary, methods, show_sd=args.replicates > 1)
    print(table)
    failures = {f"seed {r.spec.seed} {m}": e for r in reps for m, e in r.errors.items()}
    for key, msg in failures.items():
        print(f"failed: {key}: {msg}", file=sys.stderr)
    out = io.ensure_dir(args.out)
    csv_path = out / "summary.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("method,set,mean_auc,sd_auc,replicates\n")
        for (method, name), (mean, sd, count) in sorted(summary.items()):
            sd_text = "" if not np.isfinite(sd) else repr(sd)
            fh.write(f"{method},{name},{mean!r},{sd_text},{count}\n")
    (out / "summary.txt").write_text(table + "\n", encoding="utf-8")
    per_rep = [{"seed": r.spec.seed, "info": r.info,
                "methods": {m: {"lambda": res.lam, "delta": res.delta, "augmented": res.augmented,
                                "auc": res.report.auc} for m, res in r.results.items()}}
               for r in reps]
    _write_manifest(out / "manifest.json", "repro", args, config=config, seed=seed,
                    outputs=[csv_path], extra={"replicates": per_rep, "failures": failures},
                    started=started)
    if not any(r.results for r in reps):
        return EXIT_NUMERIC
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def _fit_flags(p, with_lambda=True):
    p.add_argument("--rank", type=int, default=5)
    p.add_argument("--beta", type=float, default=3.0)
    if with_lambda:
        p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None,
                   help="random seed (default: $HYPEREMBED_SEED, else 0)")
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--threads", type=int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(prog="hyperembed",
                                     description="Joint embedding of pairwise links and hyperlinks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a study network and its splits")
    p.add_argument("--study", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--rho-obs", type=float, default=0.0)
    p.add_argument("--missing-rate", type=float, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit an embedding and save the model")
    p.add_argument("method", choices=("ple", "hle", "jle", "augjle"), type=str.lower)
    p.add_argument("--pairs")
    p.add_argument("--hyper")
    p.add_argument("--valid-pairs")
    p.add_argument("--valid-hyper")
    p.add_argument("--out", required=True, help="model file")
    _fit_flags(p)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--lambda-grid", type=_floats, default=None)
    p.add_argument("--delta-grid", type=_floats, default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="score pairs or tuples with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--query", required=True, help="one pair or tuple of node indices per line")
    p.add_argument("--generalized", action="store_true",
                   help="score any m >= 2 from pairwise inner products only")
    p.add_argument("--out", required=True, help="scores CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="AUC report for a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--pairs")
    p.add_argument("--hyper")
    p.add_argument("--pair-truth")
    p.add_argument("--hyper-truth")
    p.add_argument("--out", required=True, help="report CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("repro", help="replicate a simulation study")
    p.add_argument("--study", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--replicates", type=int, default=5)
    p.add_argument("--rho", type=float, default=0.85)
    p.add_argument("--rho-obs", type=float, default=0.35)
    p.add_argument("--missing-rate", type=float, default=None)
    p.add_argument("--lambda-grid", type=_floats, default=[3e-5, 1e-4, 3e-4, 1e-3])
    p.add_argument("--delta-grid", type=_floats, default=[0.05, 0.1, 0.2])
    p.add_argument("--out", required=True, help="output directory")
    _fit_flags(p, with_lambda=False)
    p.set_defaults(func=cmd_repro, max_iters=3000)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_ARGS
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ArgumentFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (FitError, TuningError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (io.ParseError, GenerationError, EstimationError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
