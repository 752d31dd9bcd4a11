"""Command-line interface: ``hope train | exemplars | evaluate | embed | plot``.

Every flag can also come from a plain-text ``key = value`` configuration file
passed with ``--config``; keys are flag names without the leading dashes
(``batch-size`` or ``batch_size``). Command-line flags win over the file.

Exit codes: 1 configuration error, 2 data error, 3 numerical failure. Errors
print one line to stderr of the form
``hope: error code=<n> kind=<config|data|numeric> reason=<text>``.

``HOPE_NUM_THREADS`` sets the default BLAS thread count.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    DataError,
    load_delimited,
    load_idx,
    make_synthetic,
    preprocess,
    preprocessing_descriptor,
)
from .evaluation import evaluate_embeddings
from .exemplars import EMBEDDING, INPUT, kmeans_exemplars
from .model import VARIANTS, embed, init_model
from .optimizer import (
    FLETCHER_REEVES,
    PR_PLUS,
    LineSearchConfig,
    NumericalError,
    TrainConfig,
    train_embedding,
    train_joint,
)
from .plotting import exemplar_grid_pgm, scatter_svg, trace_svg
from .serialize import FormatError, load_exemplars, load_model, save_exemplars, save_model

log = logging.getLogger("hope_embed")

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3
THREADS_ENV = "HOPE_NUM_THREADS"


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# --------------------------------------------------------------------------
# argument groups


def _add_data_args(p, prefix):
    g = p.add_argument_group(f"{prefix} data")
    g.add_argument(f"--{prefix}-images", help="IDX image file (magic 0x803)")
    g.add_argument(f"--{prefix}-labels", help="IDX label file (magic 0x801)")
    g.add_argument(f"--{prefix}-data", help="delimited text: label then feature values per row")
    g.add_argument(f"--{prefix}-synthetic", choices=("gaussians", "circles", "xor"))
    g.add_argument(f"--{prefix}-synthetic-params", default="",
                   help="comma-separated key=value generator parameters")
    g.add_argument(f"--{prefix}-synthetic-seed", type=int, default=None)
    g.add_argument(f"--{prefix}-limit", type=int, default=None, help="keep only the first N samples")


def _add_train_args(p):
    g = p.add_argument_group("optimizer")
    g.add_argument("--batch-size", type=int, default=1000)
    g.add_argument("--cg-iters", type=int, default=3, help="CG iterations per minibatch")
    g.add_argument("--max-epochs", type=int, default=50)
    g.add_argument("--cg-variant", choices=(PR_PLUS, FLETCHER_REEVES), default=PR_PLUS)
    g.add_argument("--initial-step", type=float, default=1.0)
    g.add_argument("--backtrack", type=float, default=0.5)
    g.add_argument("--c1", type=float, default=1e-4)
    g.add_argument("--max-evals", type=int, default=20)
    g.add_argument("--warmup-epochs", type=int, default=5, help="alternating epochs before joint updates")
    g.add_argument("--patience", type=int, default=10)
    g.add_argument("--validation-fraction", type=float, default=0.1)
    g.add_argument("--k", type=int, default=5)


def build_parser():
    p = _Parser(prog="hope", description="Supervised high-order parametric embedding")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out-dir", default=".")
        sp.add_argument("--threads", type=int, default=int(os.environ.get(THREADS_ENV, "0") or 0),
                        help=f"BLAS threads (default ${THREADS_ENV}, 0 = library default)")
        sp.add_argument("-v", "--verbose", action="store_true")

    t = sub.add_parser("train", help="train a HOPE or S-HOPE embedding")
    common(t)
    _add_data_args(t, "train")
    t.add_argument("--variant", choices=VARIANTS, default="shope")
    t.add_argument("--order", type=int, default=2)
    t.add_argument("--factors", type=int, default=100)
    t.add_argument("--units", type=int, default=100)
    t.add_argument("--embed-dim", type=int, default=2)
    _add_train_args(t)

    e = sub.add_parser("exemplars", help="learn exemplars by k-means or joint optimization")
    common(e)
    _add_data_args(e, "train")
    e.add_argument("--model")
    e.add_argument("--method", choices=("kmeans-input", "kmeans-embed", "joint"), default="kmeans-input")
    e.add_argument("--per-class", type=int, default=2)
    e.add_argument("--init", choices=("kmeans-input", "kmeans-embed"), default="kmeans-input",
                   help="initialization for --method joint")
    e.add_argument("--restarts", type=int, default=5)
    _add_train_args(e)

    v = sub.add_parser("evaluate", help="kNN error against training and/or exemplar references")
    common(v)
    _add_data_args(v, "train")
    _add_data_args(v, "test")
    v.add_argument("--model")
    v.add_argument("--exemplars")
    v.add_argument("--k", type=int, default=5)
    v.add_argument("--repeats", type=int, default=3, help="timing repetitions (fastest kept)")

    m = sub.add_parser("embed", help="write n x h embedding coordinates as CSV")
    common(m)
    _add_data_args(m, "data")
    m.add_argument("--model")
    m.add_argument("--output", default="embedding.csv")

    q = sub.add_parser("plot", help="2-D scatter SVG of an embedding with exemplar overlay")
    common(q)
    _add_data_args(q, "data")
    q.add_argument("--model")
    q.add_argument("--embedding", help="CSV written by `hope embed` (instead of data + model)")
    q.add_argument("--exemplars")
    q.add_argument("--output", default="embedding.svg")
    q.add_argument("--exemplar-images", help="also write exemplars as a PGM image grid")
    q.add_argument("--title")
    return p


def read_config(path) -> dict:
    text = Path(path).read_text()
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string("[hope]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return {k.replace("-", "_"): v for k, v in cp["hope"].items()}


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise ConfigError("no command given (train, exemplars, evaluate, embed, plot)")
    if getattr(args, "config", None):
        try:
            cfg = read_config(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
        sp = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        sp.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _train_config(args) -> TrainConfig:
    cfg = TrainConfig(
        batch_size=args.batch_size, cg_iters_per_batch=args.cg_iters, max_epochs=args.max_epochs,
        cg_variant=args.cg_variant,
        line_search=LineSearchConfig(args.initial_step, args.backtrack, args.c1, args.max_evals),
        warmup_epochs_alternating=args.warmup_epochs, seed=args.seed,
        validation_fraction=args.validation_fraction, patience=args.patience, k=args.k,
    )
    try:
        return cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# --------------------------------------------------------------------------
# data sources


def _parse_params(text):
    params = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in item:
            raise ConfigError(f"synthetic parameter {item!r} is not key=value")
        key, val = (s.strip() for s in item.split("=", 1))
        if ":" in val:
            params[key] = tuple(float(v) for v in val.split(":"))
        else:
            num = float(val)
            params[key] = int(num) if num.is_integer() and "." not in val else num
    return params


def git_blob_hash(path) -> str:
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def load_source(args, prefix, label_values=None, seed_offset=0):
    """Build a dataset from one group of data flags.

    Returns ``(dataset, preprocessing descriptor, input paths)`` or None when
    no source was given for ``prefix``.
    """
    get = lambda name: getattr(args, f"{prefix}_{name}")  # noqa: E731
    limit = get("limit")
    if get("synthetic"):
        params = _parse_params(get("synthetic_params"))
        seed = get("synthetic_seed")
        seed = args.seed + seed_offset if seed is None else seed
        try:
            data = make_synthetic(get("synthetic"), seed, **params)
        except TypeError as exc:
            raise ConfigError(f"bad synthetic parameters: {exc}") from None
        desc = {"scheme": "none", "synthetic": get("synthetic"), "params": get("synthetic_params"),
                "seed": seed, "label_values": list(data.label_values)}
        if limit:
            data = data.subset(np.arange(min(limit, data.n)))
        return data, desc, []
    if get("images") or get("labels"):
        if not (get("images") and get("labels")):
            raise DataError(f"--{prefix}-images and --{prefix}-labels must be given together")
        paths = [get("images"), get("labels")]
        raw = load_idx(*paths)
    elif get("data"):
        paths = [get("data")]
        raw = load_delimited(paths[0])
    else:
        return None
    if limit:
        raw.pixels, raw.labels = raw.pixels[:limit], raw.labels[:limit]
    data = preprocess(raw, label_values=label_values)
    return data, preprocessing_descriptor(raw, data), paths


def _require(source, what):
    if source is None:
        raise DataError(f"no {what} given")
    return source


def _as_model_input(data, model):
    if data.input_dim != model.input_dim:
        raise DataError(f"data has input dimension {data.input_dim}, model expects {model.input_dim}")
    return data


def _load_model(path):
    if not path:
        raise ConfigError("--model is required for this command")
    return load_model(path)


# --------------------------------------------------------------------------
# manifests and outputs


class Run:
    """Collects inputs/outputs of one command and writes its manifest."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.out_dir = Path(args.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.inputs = {}
        self.outputs = []
        self.started = datetime.now(timezone.utc).isoformat()

    def add_inputs(self, paths):
        for p in paths:
            if p:
                self.inputs[str(p)] = git_blob_hash(p)

    def out(self, name) -> Path:
        path = self.out_dir / name
        self.outputs.append(str(path))
        return path

    def write_manifest(self):
        snapshot = {k: v for k, v in vars(self.args).items() if k not in ("config",)}
        manifest = {
            "command": self.args.command,
            "argv": self.argv,
            "config": snapshot,
            "config_file": self.args.config,
            "seed": self.args.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "version": __version__,
            "started_at": self.started,
            "finished_at": datetime.now(timezone.utc).isoformat(),
        }
        path = self.out_dir / f"manifest-{self.args.command}.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
        return path


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_trace(run, trace, stem):
    rows = trace.to_rows()
    write_csv(run.out(f"{stem}.csv"), ["epoch", "mean_batch_loss", "val_error", "wall_time"],
              [[r["epoch"], repr(r["mean_batch_loss"]), repr(r["val_error"]), f"{r['wall_time']:.3f}"]
               for r in rows])
    if rows:
        trace_svg(run.out(f"{stem}.svg"), rows)


# --------------------------------------------------------------------------
# commands


def cmd_train(args, run):
    data, desc, paths = _require(load_source(args, "train"), "training data (--train-*)")
    run.add_inputs(paths)
    config = _train_config(args)
    if min(args.order, args.factors, args.embed_dim) < 1 or (args.variant == "shope" and args.units < 1):
        raise ConfigError("order, factors, units and embed-dim must be positive")
    model = init_model(args.variant, args.order, data.input_dim, args.embed_dim,
                       args.factors, args.units, seed=args.seed)
    model.preprocessing = desc
    model, trace = train_embedding(model, data, config)
    save_model(run.out("model.json"), model)
    write_trace(run, trace, "trace")
    print(f"trained {model.variant} O={model.order} F={model.num_factors}: best epoch "
          f"{trace.best_epoch} validation {config.k}NN error {trace.best_val_error:.6f}")


def cmd_exemplars(args, run):
    model = None
    if args.method != "kmeans-input":
        model = _load_model(args.model)
        run.add_inputs([args.model])
    labels = model.preprocessing.get("label_values") if model else None
    data, desc, paths = _require(load_source(args, "train", labels), "training data (--train-*)")
    run.add_inputs(paths)
    if model is not None:
        _as_model_input(data, model)
    if args.per_class < 1:
        raise ConfigError("--per-class must be positive")
    first = args.init if args.method == "joint" else args.method
    space = INPUT if first == "kmeans-input" else EMBEDDING
    ex = kmeans_exemplars(data, args.per_class, args.seed, space, model, args.restarts)
    if args.method == "joint":
        config = _train_config(args)
        model, ex, trace = train_joint(model, data, ex, config)
        save_model(run.out("model-joint.json"), model)
        write_trace(run, trace, "trace-joint")
        print(f"joint training: best epoch {trace.best_epoch} validation error vs exemplars "
              f"{trace.best_val_error:.6f}")
    save_exemplars(run.out("exemplars.json"), ex, model.preprocessing if model else desc)
    if exemplar_grid_pgm(run.out_dir / "exemplars.pgm", ex.E, ex.labels):
        run.outputs.append(str(run.out_dir / "exemplars.pgm"))
    print(f"wrote {ex.size} exemplars ({ex.per_class} per class) with method {args.method}")


def cmd_evaluate(args, run):
    model = _load_model(args.model)
    run.add_inputs([args.model])
    labels = model.preprocessing.get("label_values")
    test, _, paths = _require(load_source(args, "test", labels, seed_offset=1), "test data (--test-*)")
    run.add_inputs(paths)
    _as_model_input(test, model)
    test_emb = embed(model, test.X)
    reports = {}
    refs = load_source(args, "train", labels)
    if refs is not None:
        train, _, paths = refs
        run.add_inputs(paths)
        _as_model_input(train, model)
        reports["full"] = evaluate_embeddings(test_emb, test.labels, embed(model, train.X),
                                              train.labels, args.k, args.repeats)
    if args.exemplars:
        ex = load_exemplars(args.exemplars)
        run.add_inputs([args.exemplars])
        reports["exemplars"] = evaluate_embeddings(test_emb, test.labels, embed(model, ex.E),
                                                   ex.labels, min(args.k, ex.size), args.repeats)
    if not reports:
        raise DataError("no references: give --train-* data and/or --exemplars")
    lines = [r.summary_line(name) for name, r in reports.items()]
    if len(reports) == 2:
        ratio = reports["full"].mean_query_time / reports["exemplars"].mean_query_time
        lines.append(f"speedup: full/exemplar query time ratio={ratio:.3f}")
    for name, r in reports.items():
        run.out(f"eval-{name}.json").write_text(r.to_json() + "\n")
    run.out("eval.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))


def cmd_embed(args, run):
    model = _load_model(args.model)
    run.add_inputs([args.model])
    data, _, paths = _require(load_source(args, "data", model.preprocessing.get("label_values")),
                              "data (--data-*)")
    run.add_inputs(paths)
    Y = embed(model, _as_model_input(data, model).X)
    original = data.original_labels()
    write_csv(run.out(args.output), [f"y{s + 1}" for s in range(Y.shape[1])] + ["label"],
              [[repr(float(v)) for v in row] + [lab] for row, lab in zip(Y, original)])
    print(f"wrote {Y.shape[0]} x {Y.shape[1]} embedding to {run.out_dir / args.output}")


def _read_embedding_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-1] != "label":
        raise DataError(f"{path}: expected a header ending in 'label'")
    body = rows[1:]
    if not body:
        raise DataError(f"{path}: no rows")
    Y = np.array([[float(v) for v in r[:-1]] for r in body])
    raw = [r[-1] for r in body]
    names = sorted(set(raw), key=lambda v: (len(v), v))
    lookup = {v: i + 1 for i, v in enumerate(names)}
    return Y, np.array([lookup[v] for v in raw]), names


def cmd_plot(args, run):
    model = None
    if args.model:
        model = load_model(args.model)
        run.add_inputs([args.model])
    if args.embedding:
        run.add_inputs([args.embedding])
        Y, labels, names = _read_embedding_csv(args.embedding)
    else:
        if model is None:
            raise ConfigError("plot needs --embedding, or --model with --data-* inputs")
        data, _, paths = _require(load_source(args, "data", model.preprocessing.get("label_values")),
                                  "data (--data-*) or --embedding")
        run.add_inputs(paths)
        Y = embed(model, _as_model_input(data, model).X)
        labels, names = data.labels, data.label_values
    if Y.shape[1] != 2:
        raise ConfigError(f"plots are 2-D only; embedding has dimension {Y.shape[1]}")
    ex_Y = None
    if args.exemplars:
        ex = load_exemplars(args.exemplars)
        run.add_inputs([args.exemplars])
        if model is None:
            raise ConfigError("--exemplars needs --model to embed them")
        ex_Y = embed(model, ex.E)
        if args.exemplar_images and not exemplar_grid_pgm(run.out(args.exemplar_images), ex.E, ex.labels):
            run.outputs.pop()
            print("exemplar images skipped: input dimension is not a square image")
    scatter_svg(run.out(args.output), Y, labels, ex_Y, names, args.title)
    print(f"wrote {run.out_dir / args.output}")


COMMANDS = {
    "train": cmd_train,
    "exemplars": cmd_exemplars,
    "evaluate": cmd_evaluate,
    "embed": cmd_embed,
    "plot": cmd_plot,
}


def _fail(code, kind, reason):
    reason = " ".join(str(reason).split())
    print(f"hope: error code={code} kind={kind} reason={reason}", file=sys.stderr)
    return code


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        run = Run(args, argv)
        if args.threads > 0:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                COMMANDS[args.command](args, run)
        else:
            COMMANDS[args.command](args, run)
        run.write_manifest()
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except (DataError, FormatError, OSError) as exc:
        return _fail(EXIT_DATA, "data", exc)
    except NumericalError as exc:
        return _fail(EXIT_NUMERIC, "numeric", exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
