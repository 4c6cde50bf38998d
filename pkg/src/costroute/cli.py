"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 invalid input data, 3 infeasible
budget or degenerate statistic. Primary output goes to ``--out`` (written
atomically) or stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import estimator as est_mod
from . import evaluation, imgmetrics, pool as pool_mod, router, synth
from .errors import DegenerateError, InfeasibleError, ValidationError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e.strerror}") from e


def _write_atomic(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        _write_atomic(Path(args.out), text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def _load_pool(args):
    return pool_mod.load_pool(_read(args.pool))


def _load_split(args, pool):
    data = pool_mod.load_dataset(_read(args.data), pool)
    return data.split(None if args.split == "all" else args.split)


def _load_estimator(path: str):
    return est_mod.estimator_from_json(_read(path))


# --------------------------------------------------------------------------
# subcommand handlers

def cmd_pool_validate(args):
    p = _load_pool(args)
    _emit(args, json.dumps({"ok": True, "models": len(p), "ids": list(p.ids),
                            "costs": p.costs.tolist()}) + "\n")


def cmd_featurize(args):
    out = []
    for lineno, line in enumerate(_read(args.data).decode("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValidationError(f"line {lineno}: {e}") from e
        if not isinstance(obj.get("text"), str):
            raise ValidationError(f"line {lineno}: record has no 'text' to featurize")
        obj["features"] = pool_mod.featurize_prompt(obj["text"], args.dim).tolist()
        out.append(json.dumps(obj) + "\n")
    _emit(args, "".join(out))


def cmd_train_knn(args):
    p = _load_pool(args)
    train = _load_split(args, p)
    if len(train) == 0:
        raise ValidationError("empty training split")
    scaler = pool_mod.fit_scaler(train.label_matrix())
    index = est_mod.knn_build(train, args.k, scaler)
    _emit(args, est_mod.estimator_to_json(index) + "\n")


def cmd_train_mlp(args):
    p = _load_pool(args)
    train = _load_split(args, p)
    if len(train) == 0:
        raise ValidationError("empty training split")
    scaler = pool_mod.fit_scaler(train.label_matrix())
    model = est_mod.mlp_init(train.d, args.hidden, len(p), args.seed, scaler=scaler, model_order=p.ids)
    model = est_mod.mlp_train(model, train, scaler, args.epochs, args.lr, args.batch, args.seed)
    print(f"loss: initial {model.history[0]:.6f} final-epoch {model.history[-1]:.6f}", file=sys.stderr)
    _emit(args, est_mod.estimator_to_json(model) + "\n")


def _estimates(args, p, data) -> np.ndarray:
    if args.estimator == "oracle":
        return router.oracle_estimates(data)
    est = _load_estimator(args.estimator)
    router.check_model_order(est, p)
    return est_mod.predict_matrix(est, data.features())


def cmd_route(args):
    p = _load_pool(args)
    data = _load_split(args, p)
    cfg = router.RouterConfig(args.lam)
    decisions = router.decisions_from_estimates(data, p, _estimates(args, p, data), cfg.lam)
    _emit(args, router.decisions_to_jsonl(decisions))


def cmd_calibrate(args):
    p = _load_pool(args)
    if args.budget < p.costs.min():
        raise InfeasibleError(f"infeasible budget {args.budget}: cheapest model costs {p.costs.min()}")
    data = _load_split(args, p)
    est = _estimates(args, p, data)
    lam = router.calibrate_from_estimates(est, p.costs, args.budget, args.tol)
    idx, _ = router.route_matrix(est, p.costs, lam)
    avg_cost = router.ordered_mean(p.costs[idx])
    _emit(args, json.dumps({"lambda": lam, "avg_cost": avg_cost, "budget": args.budget}) + "\n")


def cmd_sweep(args):
    p = _load_pool(args)
    data = _load_split(args, p)
    if args.lambdas:
        grid = evaluation.parse_lambda_grid(args.lambdas, include_zero=not args.no_zero)
    else:
        grid = evaluation.default_lambda_grid(p.costs, include_zero=not args.no_zero)
    curve = evaluation.curve_from_estimates(_estimates(args, p, data), data, p, grid)
    _emit(args, curve.to_csv(p.ids))


def cmd_eval_qnc(args):
    curve = evaluation.curve_from_csv(_read(args.curve).decode("utf-8"))
    pct = evaluation.qnc(curve, args.ref_cost, args.ref_quality)
    _emit(args, json.dumps({"qnc_percent": pct, "reachable": pct is not None}) + "\n")


def cmd_eval_rates(args):
    p = _load_pool(args)
    decisions = router.decisions_from_jsonl(_read(args.decisions))
    _emit(args, json.dumps(evaluation.selection_rates(decisions, p)) + "\n")


def _samples(value: str) -> list[float]:
    text = _read(value[1:]).decode("utf-8") if value.startswith("@") else value.replace(",", " ")
    try:
        return [float(v) for v in text.split()]
    except ValueError as e:
        raise ValidationError(f"bad sample list: {e}") from e


def cmd_eval_ttest(args):
    res = evaluation.welch_ttest(_samples(args.a), _samples(args.b))
    _emit(args, json.dumps({"t": res.t, "dof": res.dof, "p": res.p,
                            "significant": res.p < args.alpha, "alpha": args.alpha}) + "\n")


def cmd_sharpness(args):
    lines = []
    for path in args.images:
        img = imgmetrics.read_netpbm(_read(path))
        lines.append(json.dumps({"path": path, "sharpness": imgmetrics.sharpness(img)}) + "\n")
    _emit(args, "".join(lines))


def cmd_synth_gen(args):
    spec = synth.load_synth_spec(_read(args.spec)) if args.spec else synth.bundled_spec()
    data, truth = synth.generate_synth_dataset(spec, args.seed)
    if not args.out:
        sys.stdout.write(data.to_jsonl())
        return
    out = Path(args.out)
    _write_atomic(out / "pool.json", (spec.pool.to_json() + "\n").encode())
    _write_atomic(out / "data.jsonl", data.to_jsonl().encode())
    _write_atomic(out / "truth.json", (truth.to_json() + "\n").encode())


def cmd_synth_frontier(args):
    p = _load_pool(args)
    data = _load_split(args, p)
    _emit(args, synth.frontier_to_csv(synth.brute_force_frontier(data, p)))


# --------------------------------------------------------------------------
# parser

def _common(sp, *, data=True, split="test", out=True):
    sp.add_argument("--pool", required=True, help="pool JSON")
    if data:
        sp.add_argument("--data", required=True, help="dataset JSONL")
        sp.add_argument("--split", default=split, choices=("train", "val", "test", "all"))
    if out:
        sp.add_argument("--out", help="output path (default: stdout)")


def _estimator_arg(sp):
    sp.add_argument("--estimator", required=True,
                    help="trained estimator file, or 'oracle' to use the scaled true labels")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="costroute", description="Cost-aware routing over a pool of generators.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pool_p = sub.add_parser("pool", help="pool utilities")
    pool_sub = pool_p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    sp = pool_sub.add_parser("validate", help="check a pool JSON document")
    _common(sp, data=False)
    sp.set_defaults(func=cmd_pool_validate)

    sp = sub.add_parser("featurize", help="fill 'features' from 'text' with hashed trigrams")
    sp.add_argument("--data", required=True)
    sp.add_argument("--dim", type=int, default=64)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_featurize)

    train_p = sub.add_parser("train", help="fit a quality estimator")
    train_sub = train_p.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    sp = train_sub.add_parser("knn", help="exact k-nearest-neighbour estimator")
    _common(sp, split="train")
    sp.add_argument("--k", type=int, default=100)
    sp.set_defaults(func=cmd_train_knn)
    sp = train_sub.add_parser("mlp", help="one-hidden-layer MLP with one sigmoid head per model")
    _common(sp, split="train")
    sp.add_argument("--hidden", type=int, default=32)
    sp.add_argument("--epochs", type=int, default=50)
    sp.add_argument("--lr", type=float, default=0.5)
    sp.add_argument("--batch", type=int, default=32)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_train_mlp)

    sp = sub.add_parser("route", help="route each prompt at a fixed lambda (decisions JSONL)")
    _common(sp)
    _estimator_arg(sp)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.set_defaults(func=cmd_route)

    sp = sub.add_parser("calibrate", help="smallest lambda meeting an average-cost budget")
    _common(sp)
    _estimator_arg(sp)
    sp.add_argument("--budget", type=float, required=True)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("sweep", help="deferral curve CSV over a lambda grid")
    _common(sp)
    _estimator_arg(sp)
    sp.add_argument("--lambdas", help="log:<lo>:<hi>:<n> or a comma list (default: automatic grid)")
    sp.add_argument("--no-zero", action="store_true", help="do not prepend lambda=0")
    sp.set_defaults(func=cmd_sweep)

    eval_p = sub.add_parser("eval", help="curve and decision statistics")
    eval_sub = eval_p.add_subparsers(dest="stat", required=True, parser_class=_Parser)
    sp = eval_sub.add_parser("qnc", help="quality-neutral cost against a reference model")
    sp.add_argument("--curve", required=True)
    sp.add_argument("--ref-cost", type=float, required=True)
    sp.add_argument("--ref-quality", type=float, required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval_qnc)
    sp = eval_sub.add_parser("rates", help="selection rate per pool model")
    sp.add_argument("--pool", required=True)
    sp.add_argument("--decisions", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval_rates)
    sp = eval_sub.add_parser("ttest", help="Welch's t-test; samples as comma lists or @file")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval_ttest)

    sp = sub.add_parser("sharpness", help="sharpness of binary P5/P6 images")
    sp.add_argument("images", nargs="+")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sharpness)

    synth_p = sub.add_parser("synth", help="synthetic instances")
    synth_sub = synth_p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    sp = synth_sub.add_parser("gen", help="generate pool.json, data.jsonl and truth.json")
    sp.add_argument("--spec", help="SynthSpec JSON (default: bundled two-cluster spec)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="output directory (default: dataset JSONL on stdout)")
    sp.set_defaults(func=cmd_synth_gen)
    sp = synth_sub.add_parser("frontier", help="exhaustive non-dominated (cost, quality) set")
    _common(sp)
    sp.set_defaults(func=cmd_synth_frontier)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        args.func(args)
    except (InfeasibleError, DegenerateError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
