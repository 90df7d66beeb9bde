"""Command-line entry point: ``extremesim {train,eval,gradcheck,oracle-compare,make-synthetic}``.

Configuration is a plain ``key = value`` file (``#`` starts a comment),
overridable with ``--set key=value``. Every key has a default and unknown
keys are rejected. Precedence: defaults, then the preset, then the file,
then ``--set``.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys

import numpy as np

from .checks import gradcheck, oracle_compare
from .data import build_imputation, load_dataset, make_split, write_interactions
from .errors import (
    CheckFailure,
    ConfigError,
    DataError,
    DimensionError,
    ExtremeSimError,
    LineSearchError,
    NumericError,
    SizeGuardError,
)
from .evaluation import map_at_k_embeddings, write_trace
from .losses import LossKind
from .net import TowerSpec, TwoTower, forward_batch, load_checkpoint, save_checkpoint
from .objective import ProblemData, objective
from .optim import METHODS, CGConfig, LineSearchConfig, SgConfig, TrainConfig, run
from .synthetic import ML1M_SHAPE, planted_interactions, random_instance

log = logging.getLogger("extremesim")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4, 5


def _hidden(text):
    text = text.strip()
    if not text:
        return ()
    return tuple(int(t) for t in text.split(","))


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _log2(text):
    # "-inf" turns the term off (omega = 0)
    return float(text)


def _opt_float(text):
    t = text.strip().lower()
    return None if t in ("", "auto", "none") else float(text)


def _str(text):
    return text.strip()


# key -> (parser, default as text)
SCHEMA = {
    "preset": (_str, ""),
    "dataset.train": (_str, ""),
    "dataset.test": (_str, ""),
    "imputation": (_str, "constant"),
    "imputation.p_path": (_str, ""),
    "imputation.q_path": (_str, ""),
    "model.hidden": (_hidden, "256,256"),
    "model.k": (int, "128"),
    "loss": (_str, "logistic"),
    "omega_log2": (_log2, "0"),
    "lambda_log2": (_log2, "0"),
    "method": (_str, "Newton"),
    "sg.rho": (float, "0.01"),
    "sg.alpha": (float, "0.1"),
    "sg.step_size": (_opt_float, "auto"),
    "sg.steps_per_pass": (int, "0"),
    "ls.eta": (float, "1e-4"),
    "ls.max_steps": (int, "60"),
    "cg.xi": (float, "0.1"),
    "cg.max_iters": (int, "30"),
    "adagrad.mu": (float, "1e-8"),
    "seed": (int, "0"),
    "max_passes": (int, "10"),
    "max_time_s": (float, "inf"),
    "trace.path": (_str, "trace.csv"),
    "checkpoint.path": (_str, ""),
    "eval.map_every": (int, "1"),
    "eval.exclude_train": (_bool, "true"),
    "workers": (int, "0"),
    "check.m": (int, "0"),
    "check.n": (int, "0"),
    "check.k": (int, "0"),
    "check.nnz": (int, "-1"),
    "check.hidden": (_str, ""),
    "check.instances": (int, "3"),
}

PRESETS = {
    "ml1m": {"omega_log2": "-4", "lambda_log2": "2"},
}


def parse_config_text(text, source="<config>"):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def build_config(path=None, overrides=()):
    """Resolve the typed configuration dictionary."""
    raw = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                raw.update(parse_config_text(fh.read(), path))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    text = {k: d for k, (_, d) in SCHEMA.items()}
    preset = raw.get("preset", "")
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; known: {', '.join(PRESETS)}")
        text.update(PRESETS[preset])
    text.update(raw)
    cfg = {}
    for k, (parse, _) in SCHEMA.items():
        try:
            cfg[k] = parse(text[k])
        except ValueError as exc:
            raise ConfigError(f"bad value for {k}: {text[k]!r} ({exc})") from None
    if cfg["method"] not in METHODS:
        raise ConfigError(f"method must be one of {', '.join(METHODS)}")
    try:
        LossKind(cfg["loss"])
    except ValueError:
        raise ConfigError(f"loss must be 'logistic' or 'squared', got {cfg['loss']!r}") from None
    return cfg


def train_config(cfg):
    try:
        return TrainConfig(
            max_passes=cfg["max_passes"],
            max_time_s=cfg["max_time_s"],
            seed=cfg["seed"],
            mu=cfg["adagrad.mu"],
            steps_per_pass=cfg["sg.steps_per_pass"],
            line_search=LineSearchConfig(eta=cfg["ls.eta"], max_steps=cfg["ls.max_steps"]),
            cg=CGConfig(xi=cfg["cg.xi"], max_iters=cfg["cg.max_iters"]),
            sg=SgConfig(rho=cfg["sg.rho"], alpha=cfg["sg.alpha"], step_size=cfg["sg.step_size"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _need_file(cfg, key):
    path = cfg[key]
    if not path:
        raise ConfigError(f"{key} is not set")
    if not os.path.exists(path):
        raise ConfigError(f"{key}: no such file {path!r}")
    return path


def _load_data(cfg):
    train_path = _need_file(cfg, "dataset.train")
    test_path = _need_file(cfg, "dataset.test") if cfg["dataset.test"] else None
    return load_dataset(train_path, test_path)


def problem_from_config(cfg, train, model=None):
    m, n = train.shape
    k = cfg["model.k"]
    if model is None:
        model = TwoTower(TowerSpec(m, cfg["model.hidden"], k), TowerSpec(n, cfg["model.hidden"], k))
    pt, qt = build_imputation(
        cfg["imputation"], model.k, m, n, cfg["imputation.p_path"] or None, cfg["imputation.q_path"] or None
    )
    return ProblemData(
        observed=train,
        model=model,
        left_features=np.arange(m),
        right_features=np.arange(n),
        a=np.ones(m),
        b=np.ones(n),
        p_tilde=pt,
        q_tilde=qt,
        omega=2.0 ** cfg["omega_log2"],
        lam=2.0 ** cfg["lambda_log2"],
        loss=cfg["loss"],
    )


def map_evaluator(data, test, exclude_train):
    exclude = data.observed if exclude_train else None

    def evaluate(theta):
        left, right = data.model.split(theta)
        P, _ = forward_batch(left, data.left_features)
        Q, _ = forward_batch(right, data.right_features)
        return map_at_k_embeddings(P, Q, test, 5, exclude)

    return evaluate


@contextlib.contextmanager
def _thread_limit(workers):
    if workers > 0:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=workers):
            yield
    else:
        yield


def cmd_train(cfg):
    bundle = _load_data(cfg)
    data = problem_from_config(cfg, bundle.train)
    evaluate = None
    if cfg["eval.map_every"] > 0 and bundle.test.nnz > 0:
        evaluate = map_evaluator(data, bundle.test, cfg["eval.exclude_train"])
    with _thread_limit(cfg["workers"]):
        result = run(cfg["method"], data, train_config(cfg), evaluate=evaluate, map_every=cfg["eval.map_every"])
    write_trace(result.records, cfg["trace.path"])
    if cfg["checkpoint.path"]:
        save_checkpoint(cfg["checkpoint.path"], data.model, result.theta, {"method": cfg["method"]})
    print(
        f"{cfg['method']}: {len(result.records)} records, L0={result.initial_objective:.10g}, "
        f"L={result.records[-1].objective if result.records else result.initial_objective:.10g}, "
        f"stop={result.stop_reason}, trace={cfg['trace.path']}"
    )
    if result.stop_reason == "line_search":
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_eval(cfg):
    bundle = _load_data(cfg)
    model, theta, _ = load_checkpoint(_need_file(cfg, "checkpoint.path"))
    if (model.left.input_dim, model.right.input_dim) != bundle.train.shape:
        raise DataError("checkpoint towers do not match the dataset size")
    data = problem_from_config(cfg, bundle.train, model)
    value, _ = objective(theta, data)
    print(f"objective {value:.17g}")
    if bundle.test.nnz > 0:
        score = map_evaluator(data, bundle.test, cfg["eval.exclude_train"])(theta)
        print(f"map_at_5 {score:.17g}")
    return EXIT_OK


def _check_instances(cfg):
    hidden = _hidden(cfg["check.hidden"]) if cfg["check.hidden"] else None
    omega = 2.0 ** cfg["omega_log2"]
    lam = 2.0 ** cfg["lambda_log2"]
    for t in range(cfg["check.instances"]):
        yield random_instance(
            cfg["seed"] + t,
            m=cfg["check.m"] or None,
            n=cfg["check.n"] or None,
            k=cfg["check.k"] or None,
            hidden=hidden,
            nnz=cfg["check.nnz"] if cfg["check.nnz"] >= 0 else None,
            omega=omega,
            lam=lam,
            loss=cfg["loss"],
        )


def _report(title, reports):
    ok = True
    for t, rep in enumerate(reports):
        print(f"{title} instance {t}")
        for line in rep.lines():
            print("  " + line)
        ok &= rep.passed
    print("PASS" if ok else "FAIL")
    if not ok:
        raise CheckFailure(f"{title} exceeded its tolerance")
    return EXIT_OK


def cmd_gradcheck(cfg, corrupt=0.0):
    rng = np.random.default_rng(cfg["seed"])
    reports = [gradcheck(theta, data, rng, corrupt) for data, theta in _check_instances(cfg)]
    return _report("gradcheck", reports)


def cmd_oracle_compare(cfg):
    rng = np.random.default_rng(cfg["seed"])
    reports = [oracle_compare(theta, data, rng) for data, theta in _check_instances(cfg)]
    return _report("oracle-compare", reports)


def cmd_make_synthetic(args):
    if args.preset == "ml1m":
        m, n = ML1M_SHAPE
        total = args.nnz or 575_300
    else:
        if not (args.m and args.n and args.nnz):
            raise ConfigError("--m, --n and --nnz are required without a preset")
        m, n, total = args.m, args.n, args.nnz
    pairs = planted_interactions(m, n, total, args.seed)
    train, test = make_split(pairs, args.ratio, args.seed + 1)
    os.makedirs(args.out, exist_ok=True)
    write_interactions(os.path.join(args.out, "train.txt"), train, "planted synthetic train split")
    write_interactions(os.path.join(args.out, "test.txt"), test, "planted synthetic test split")
    print(f"wrote {train.nnz} train and {test.nnz} test pairs over {m} x {n} to {args.out}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="extremesim", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-q", "--quiet", action="store_true", help="only print the final summary")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "train": "fit a model and write a CSV trace",
        "eval": "MAP@5 of a checkpoint on the test split",
        "gradcheck": "finite-difference and VJP/JVP duality checks",
        "oracle-compare": "fast kernels against the brute-force references",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("-c", "--config", help="key = value configuration file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        if name == "gradcheck":
            # negative-control hook: perturb the analytic gradient
            sp.add_argument("--corrupt-gradient", type=float, default=0.0, help=argparse.SUPPRESS)
    sp = sub.add_parser("make-synthetic", parents=[common], help="write a planted train/test split")
    sp.add_argument("--out", required=True)
    sp.add_argument("--preset", choices=["ml1m"], default=None)
    sp.add_argument("--m", type=int, default=0)
    sp.add_argument("--n", type=int, default=0)
    sp.add_argument("--nnz", type=int, default=0)
    sp.add_argument("--ratio", type=float, default=0.9)
    sp.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(message)s",
        stream=sys.stdout,
        force=True,
    )
    try:
        if args.command == "make-synthetic":
            return cmd_make_synthetic(args)
        cfg = build_config(args.config, args.set)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg)
        if args.command == "gradcheck":
            return cmd_gradcheck(cfg, args.corrupt_gradient)
        return cmd_oracle_compare(cfg)
    except (ConfigError, SizeGuardError, DimensionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, LineSearchError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except ExtremeSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
