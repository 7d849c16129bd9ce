"""Command-line entry point: ``gamgroup <command> [flags]``.

Every command takes ``--seed`` and ``--out``. ``--out`` is either a file
name carrying the command's main extension (secondary outputs are written
next to it as ``<stem>_<name>.<ext>`` and the manifest as
``<stem>.manifest.json``) or a directory that receives the outputs under
their default names plus ``manifest.json``. Outputs are staged to temporary
files and moved into place only when the command succeeds.
"""

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path

import gamgroup
from gamgroup import baselines, bench, evaluation, synthetic
from gamgroup.data import FeatureGroup, all_features_group, load_csv, load_groups, write_csv
from gamgroup.importance import group_importance, importance_report, total_importance
from gamgroup.model import GamModel
from gamgroup.train import TrainConfig, train


class CliError(Exception):
    pass


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _atomic_write(path, text):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


class Outputs:
    """Stage output files and publish them together with a manifest."""

    def __init__(self, out, primary, ext):
        out = Path(out)
        self.primary = primary
        if out.suffix == ext and not out.is_dir():
            self.dir, self.stem, self.file_mode = out.parent, out.stem, True
            self.manifest = self.dir / f"{self.stem}.manifest.json"
        else:
            self.dir, self.stem, self.file_mode = out, primary, False
            self.manifest = self.dir / "manifest.json"
        self.staged = []  # (tmp path, final path)

    def _final(self, name, ext):
        if not self.file_mode:
            return self.dir / f"{name}{ext}"
        if name == self.primary:
            return self.dir / f"{self.stem}{ext}"
        return self.dir / f"{self.stem}_{name}{ext}"

    def _stage(self, name, ext):
        self.dir.mkdir(parents=True, exist_ok=True)
        final = self._final(name, ext)
        fd, tmp = tempfile.mkstemp(dir=self.dir, prefix=f".{final.name}.", suffix=".tmp")
        os.close(fd)
        self.staged.append((Path(tmp), final))
        return Path(tmp)

    def text(self, name, ext, content):
        self._stage(name, ext).write_text(content, encoding="utf-8")

    def via(self, name, ext, writer):
        writer(self._stage(name, ext))

    def discard(self):
        for tmp, _ in self.staged:
            tmp.unlink(missing_ok=True)
        self.staged = []

    def commit(self, manifest):
        placed = []
        try:
            for tmp, final in self.staged:
                os.replace(tmp, final)
                placed.append(final)
            manifest["outputs"] = [str(p) for p in placed]
            _atomic_write(self.manifest, json.dumps(manifest, indent=1, sort_keys=True) + "\n")
        except BaseException:
            for p in placed:
                p.unlink(missing_ok=True)
            self.discard()
            raise
        return placed


# ---------------------------------------------------------------------------
# Shared flag groups


def _add_train_flags(p):
    g = p.add_argument_group("training")
    g.add_argument("--bins", type=int, default=256, help="max bins per feature (default 256)")
    g.add_argument("--pair-bins", type=int, default=32)
    g.add_argument("--learning-rate", type=float, default=0.05)
    g.add_argument("--rounds", type=int, default=2000)
    g.add_argument("--patience", type=int, default=50)
    g.add_argument("--validation-fraction", type=float, default=0.15)
    g.add_argument("--pairs", default="", help="comma-separated a:b feature pairs")


def _train_config(args):
    pairs = []
    for item in filter(None, (s.strip() for s in args.pairs.split(","))):
        a, sep, b = item.partition(":")
        if not sep or not a or not b:
            raise CliError(f"bad pair {item!r}; expected a:b")
        pairs.append((a, b))
    return TrainConfig(
        learning_rate=args.learning_rate,
        rounds=args.rounds,
        patience=args.patience,
        validation_fraction=args.validation_fraction,
        max_bins=args.bins,
        max_pair_bins=args.pair_bins,
        pairs=tuple(pairs),
        seed=args.seed,
    )


def _add_data_flags(p, target_required=True):
    p.add_argument("--data", required=True, help="CSV file")
    p.add_argument("--target", required=target_required, help="binary target column")
    p.add_argument("--subject", default=None, help="subject id column")
    p.add_argument("--weight", default=None, help="sample weight column")


def _load_data(args, inputs):
    inputs.append(args.data)
    return load_csv(args.data, args.target, args.subject, args.weight)


def _load_model(path, inputs):
    inputs.append(path)
    try:
        return GamModel.load(path)
    except OSError as e:
        raise CliError(f"cannot read model {path}: {e.strerror}") from None
    except (ValueError, KeyError, TypeError) as e:
        raise CliError(f"{path}: not a valid model file ({e})") from None


def _load_groups(path, dataset, inputs):
    if not path:
        return []
    inputs.append(path)
    return load_groups(path, dataset)


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CliError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    return [int(v) for v in _floats(text)]


# ---------------------------------------------------------------------------
# Commands. Each returns a message for stdout (or None).


def cmd_synth(args, out, inputs):
    cfg = synthetic.SynthConfig(args.variant, args.n, args.seed, args.b, args.eps, args.negate)
    ds = synthetic.generate(cfg)
    out.via("data", ".csv", lambda p: write_csv(ds, p))


def cmd_train(args, out, inputs):
    ds = _load_data(args, inputs)
    model = train(ds, _train_config(args))
    out.text("model", ".json", model.to_json())


def cmd_importance(args, out, inputs):
    ds = _load_data(args, inputs)
    model = _load_model(args.model, inputs)
    groups = _load_groups(args.groups, ds, inputs)
    report = importance_report(model, ds, groups, args.include_pairs)
    out.text("report", ".json", report.to_json())
    out.text("report", ".csv", report.to_csv())


def cmd_gpi(args, out, inputs):
    ds = _load_data(args, inputs)
    model = _load_model(args.model, inputs)
    groups = _load_groups(args.groups, ds, inputs) or [all_features_group(model.feature_names)]
    results = [
        baselines.grouped_permutation_importance(model, ds, g, args.metric, args.repeats, args.seed)
        for g in groups
    ]
    out.text("gpi", ".json", json.dumps([r.to_dict() for r in results], indent=1) + "\n")
    out.text("gpi", ".csv", baselines.gpi_to_csv(results))


def cmd_sweep(args, out, inputs):
    base = synthetic.SynthConfig(args.variant, args.n, args.seed, 0.5, args.eps)
    b_values = _floats(args.b) if args.b else list(synthetic.DEFAULT_B_GRID)
    if args.variant == "conflicting_correlated" and not args.b:
        b_values = [b for b in b_values if b > 0]
    rows = synthetic.correlation_sweep(base, b_values, _train_config(args))
    out.text("sweep", ".csv", synthetic.sweep_to_csv(rows))


def cmd_select(args, out, inputs):
    ds = _load_data(args, inputs)
    units = _load_groups(args.groups, ds, inputs)
    if not units:
        units = [FeatureGroup(n, (n,)) for n in ds.feature_names]
    cfg = _train_config(args)
    budget = args.budget if args.budget is not None else len(units)
    selection = baselines.greedy_forward_selection(ds, units, budget, args.objective, cfg, args.seed, args.k_folds)
    out.text("selection", ".csv", baselines.selection_to_csv(selection))
    out.text("selection", ".json", baselines.selection_to_json(selection))
    if args.curves:
        model = train(ds, cfg)
        report = importance_report(model, ds, units)
        by_name = {u.name: u for u in units}
        ranked = [by_name[n] for n in report.ranking]
        cumulative = evaluation.cumulative_importance_curve(model, ds, ranked)
        lines = ["m,unit,importance"] + [f"{m},{ranked[m - 1].name},{v!r}" for m, v in cumulative]
        out.text("cumulative", ".csv", "\n".join(lines) + "\n")
        topk = evaluation.top_k_groups_curve(ds, ranked, cfg, args.k_folds, args.seed)
        out.text("topk", ".csv", evaluation.curve_to_csv(topk))


def cmd_cv(args, out, inputs):
    ds = _load_data(args, inputs)
    rep = evaluation.cv_evaluate(ds, _train_config(args), args.k, args.seed)
    out.text("cv", ".json", rep.to_json())
    out.text("cv", ".csv", rep.to_csv())
    return f"auc {rep.mean['auc']:.4f} +/- {rep.sem['auc']:.4f}"


def cmd_bench(args, out, inputs):
    if args.data:
        if not args.model:
            raise CliError("--data needs --model")
        ds = _load_data(args, inputs)
        model = _load_model(args.model, inputs)
    else:
        ds = synthetic.generate_wide(args.n, args.features, args.seed)
        model = train(ds, TrainConfig(rounds=args.rounds, validation_fraction=0.0, seed=args.seed))
    if args.group == "all":
        group = model.feature_names
    else:
        group = tuple(s.strip() for s in args.group.split(",") if s.strip())
        FeatureGroup("bench", group).validate(model.feature_names)
    ours, gpi, speedup = bench.run_bench(ds, model, group, args.repeats, args.timing_runs, args.metric, args.seed)
    records = [ours, gpi]
    if args.scaling:
        res = bench.scaling_probe(model, ds, _ints(args.scaling_n), _ints(args.scaling_k), args.timing_runs)
        records += list(res.n_records) + list(res.k_records)
    # a group scoring above the full model is possible in principle; report it
    i_g, i_all = group_importance(model, ds, group), total_importance(model, ds)
    if i_g > i_all:
        print(f"note: group importance {i_g!r} exceeds total {i_all!r}", file=sys.stderr)
    out.text("bench", ".csv", bench.records_to_csv(records))
    msg = f"speedup {speedup:.2f}x (gpi {gpi.seconds:.4f}s / ours {ours.seconds:.4f}s)"
    if args.scaling:
        msg += f"\nn slope {res.n_slope:.3f} (R2 {res.n_r2:.4f}); k slope {res.k_slope:.3f} (R2 {res.k_r2:.4f})"
    return msg


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="gamgroup", description="Group importance for additive models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {gamgroup.__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, fn, primary, ext, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help=f"output {ext} file or directory")
        p.set_defaults(fn=fn, primary=primary, ext=ext)
        return p

    p = command("synth", cmd_synth, "data", ".csv", "generate a synthetic dataset")
    p.add_argument("--variant", required=True)
    p.add_argument("--n", type=int, default=synthetic.DEFAULT_N)
    p.add_argument("--b", type=float, default=2.0)
    p.add_argument("--eps", type=float, default=2.0)
    p.add_argument("--negate", action="store_true")

    p = command("train", cmd_train, "model", ".json", "train an additive model")
    _add_data_flags(p)
    _add_train_flags(p)

    p = command("importance", cmd_importance, "report", ".json", "feature and group importances")
    _add_data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--groups", default=None, help="JSON file {name: [features]}")
    p.add_argument("--include-pairs", action="store_true")

    p = command("gpi", cmd_gpi, "gpi", ".json", "grouped permutation importance")
    _add_data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--groups", default=None)
    p.add_argument("--metric", choices=("auc", "logloss"), default="auc")
    p.add_argument("--repeats", type=int, default=10)

    p = command("sweep", cmd_sweep, "sweep", ".csv", "importance across correlation levels")
    p.add_argument("--variant", default="conflicting_correlated")
    p.add_argument("--n", type=int, default=synthetic.DEFAULT_N)
    p.add_argument("--b", default="", help="comma-separated offset bounds")
    p.add_argument("--eps", type=float, default=2.0)
    _add_train_flags(p)

    p = command("select", cmd_select, "selection", ".csv", "greedy selection and selection curves")
    _add_data_flags(p)
    p.add_argument("--groups", default=None, help="units; default one per feature")
    p.add_argument("--objective", choices=("group_importance", "cv_auc"), default="group_importance")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--k-folds", type=int, default=5)
    p.add_argument("--no-curves", dest="curves", action="store_false", help="skip top-k and cumulative curves")
    _add_train_flags(p)

    p = command("cv", cmd_cv, "cv", ".json", "k-fold cross-validation")
    _add_data_flags(p)
    p.add_argument("--k", type=int, default=5)
    _add_train_flags(p)

    p = command("bench", cmd_bench, "bench", ".csv", "runtime of group importance against GPI")
    p.add_argument("--data", default=None)
    p.add_argument("--target", default="y")
    p.add_argument("--subject", default=None)
    p.add_argument("--weight", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--features", type=int, default=20)
    p.add_argument("--rounds", type=int, default=30, help="boosting rounds for the synthetic model")
    p.add_argument("--group", default="all", help="'all' or comma-separated feature names")
    p.add_argument("--metric", choices=("auc", "logloss"), default="auc")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--timing-runs", type=int, default=5)
    p.add_argument("--scaling", action="store_true", help="also run the n and k scaling probe")
    p.add_argument("--scaling-n", default="100000,200000,400000,800000")
    p.add_argument("--scaling-k", default="2,4,8,16")
    return parser


def _config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("fn", "primary", "ext")}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    out = Outputs(args.out, args.primary, args.ext)
    inputs = []
    try:
        message = args.fn(args, out, inputs)
        manifest = {
            "command": args.command,
            "argv": argv,
            "config": _config(args),
            "seed": args.seed,
            "version": gamgroup.__version__,
            "inputs": {str(p): _sha256(p) for p in inputs},
            "started_at": started.isoformat(),
            "wall_time_seconds": time.perf_counter() - t0,
        }
        out.commit(manifest)
    except (CliError, ValueError, KeyError, OSError) as e:
        out.discard()
        text = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"gamgroup {args.command}: error: {text}", file=sys.stderr)
        return 1
    except BaseException:
        out.discard()
        raise
    if message:
        print(message)
    return 0


if __name__ == "__main__":
    sys.exit(main())
