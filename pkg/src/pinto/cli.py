"""Command-line entry point: ``pinto {train,evaluate,oracle,gradcheck,timing}``.

Exit codes: 0 ok, 2 invalid config, 3 divergence, 4 checkpoint/problem
mismatch, 5 oracle failure, 6 gradient-check failure.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import io
import json
import os
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_MISMATCH, EXIT_ORACLE, EXIT_GRADCHECK = 0, 2, 3, 4, 5, 6
OUTPUT_ROOT_ENV = "PINTO_OUTPUT_ROOT"

RUN_KEYS = ("name", "output_dir")
DICT_SECTIONS = {"arch": "arch", "family": "family", "problem": "problem_params"}


class CliError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


# -- experiment config files ------------------------------------------------------------


@dataclasses.dataclass
class ExperimentConfig:
    name: str
    output_dir: str | None
    train: object  # TrainConfig

    def output_path(self) -> Path:
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
        if self.output_dir:
            p = Path(self.output_dir)
            return p if p.is_absolute() else root / p
        return root / self.name


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw.strip()


def bundled_configs() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("pinto.configs").iterdir() if p.name.endswith(".cfg"))


def _config_text(path_or_name: str) -> tuple[str, str]:
    p = Path(path_or_name)
    if p.is_file():
        return p.read_text(), p.stem
    name = path_or_name[:-4] if path_or_name.endswith(".cfg") else path_or_name
    if p.suffix in ("", ".cfg") and name in bundled_configs():
        return resources.files("pinto.configs").joinpath(name + ".cfg").read_text(), name
    raise CliError(f"config file not found: {path_or_name}", EXIT_CONFIG)


def parse_config(text: str, default_name: str = "run") -> ExperimentConfig:
    from .training.train import TrainConfig

    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise CliError(f"cannot parse config: {e}", EXIT_CONFIG) from None
    allowed = {"run", "train", *DICT_SECTIONS}
    extra = set(cp.sections()) - allowed
    if extra:
        raise CliError(f"unknown config sections: {sorted(extra)}", EXIT_CONFIG)
    run = dict(cp["run"]) if cp.has_section("run") else {}
    bad = set(run) - set(RUN_KEYS)
    if bad:
        raise CliError(f"unknown keys in [run]: {sorted(bad)}", EXIT_CONFIG)
    d = {k: _parse_value(v) for k, v in cp["train"].items()} if cp.has_section("train") else {}
    for sec, key in DICT_SECTIONS.items():
        if cp.has_section(sec):
            if key in d:
                raise CliError(f"{key} given both in [train] and [{sec}]", EXIT_CONFIG)
            d[key] = {k: _parse_value(v) for k, v in cp[sec].items()}
    try:
        tc = TrainConfig.from_dict(d)
        tc.validate()
        tc = tc.resolved()
    except (TypeError, ValueError, KeyError) as e:
        raise CliError(f"invalid config: {e}", EXIT_CONFIG) from None
    return ExperimentConfig(run.get("name", default_name), run.get("output_dir") or None, tc)


def load_config(path_or_name: str) -> ExperimentConfig:
    text, stem = _config_text(path_or_name)
    return parse_config(text, stem)


def resolved_config(exp: ExperimentConfig) -> str:
    """Fully resolved INI text; parsing it again gives the same experiment."""
    d = exp.train.to_dict()
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["run"] = {"name": exp.name, **({"output_dir": exp.output_dir} if exp.output_dir else {})}
    cp["train"] = {k: json.dumps(v) for k, v in d.items() if k not in DICT_SECTIONS.values()}
    cp["arch"] = {k: json.dumps(v) for k, v in d["arch"].items()}
    cp["family"] = {k: json.dumps(v) for k, v in d["family"].items()}
    cp["problem"] = {k: json.dumps(v) for k, v in d["problem_params"].items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# -- shared helpers ---------------------------------------------------------------------------


def _load_checkpoint(path):
    from .training.checkpoint import Checkpoint, CheckpointError
    from .training.train import model_from_checkpoint

    try:
        ck = Checkpoint.load(path)
    except FileNotFoundError:
        raise CliError(f"checkpoint not found: {path}", EXIT_CONFIG) from None
    except CheckpointError as e:
        raise CliError(str(e), EXIT_MISMATCH) from None
    if "train" not in ck.config:
        raise CliError("checkpoint carries no experiment config echo", EXIT_MISMATCH)
    try:
        cfg, model = model_from_checkpoint(ck)
    except (TypeError, ValueError) as e:
        raise CliError(f"checkpoint does not match its architecture: {e}", EXIT_MISMATCH) from None
    return ck, cfg, model


def parse_grid(problem, spec: str | None) -> dict:
    from .problems.base import uniform_axes

    if spec in (None, "", "desk", "paper"):
        return problem.eval_axes(spec or "desk")
    try:
        counts = [int(v) for v in spec.lower().split("x")]
        return uniform_axes(problem, counts)
    except ValueError as e:
        raise CliError(f"bad grid {spec!r}: {e}", EXIT_CONFIG) from None


def _floats(spec: str | None) -> list[float]:
    if not spec:
        return []
    try:
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"bad number list {spec!r}", EXIT_CONFIG) from None


# -- commands ---------------------------------------------------------------------------------


def cmd_train(args) -> int:
    from .training.checkpoint import Checkpoint
    from .training.train import DivergenceError, train

    exp = load_config(args.config)
    if args.epochs is not None:
        exp.train.epochs = args.epochs
    out = Path(args.output) if args.output else exp.output_path()
    echo = resolved_config(exp)
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved.cfg").write_text(echo)
    print(echo.rstrip())
    print(f"# output: {out}")
    resume = Checkpoint.load(args.resume) if args.resume else None
    every = max(1, exp.train.epochs // 20)

    def log(epoch, row, elapsed):
        if not args.quiet and (epoch % every == 0 or epoch == exp.train.epochs):
            print(f"epoch {epoch:6d}  loss {row[1]:.4e}  physics {row[2]:.4e}  boundary {row[3]:.4e}  "
                  f"lr {row[4]:.2e}  {elapsed:7.1f}s", flush=True)

    try:
        train(exp.train, out_dir=out, resume=resume, log=log)
    except DivergenceError as e:
        print(f"error: {e}; last good checkpoint: {out / 'last_good.ckpt'}", file=sys.stderr)
        return EXIT_DIVERGENCE
    print(f"wrote {out / 'final.ckpt'} and {out / 'history.csv'}")
    return EXIT_OK


def _select_conditions(family, spec: str):
    everything = family.all()
    if spec in ("all", ""):
        return everything
    if spec in ("seen", "unseen"):
        return [c for c in everything if c.split == spec]
    ids = [s.strip() for s in spec.split(",")]
    by_id = {c.id: c for c in everything}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise CliError(f"unknown condition ids {missing}; available: {sorted(by_id)}", EXIT_CONFIG)
    return [by_id[i] for i in ids]


def cmd_evaluate(args) -> int:
    from .metrics.evaluate import evaluate_model
    from .training.train import conditions_for

    ck, cfg, model = _load_checkpoint(args.checkpoint)
    if args.problem and args.problem != cfg.problem:
        raise CliError(f"checkpoint was trained on {cfg.problem!r}, not {args.problem!r}", EXIT_MISMATCH)
    problem, family = conditions_for(cfg)
    conds = _select_conditions(family, args.conditions)
    axes = parse_grid(problem, args.grid)
    report, _ = evaluate_model(model, problem, conds, axes, seq_len=cfg.seq_len, seq_seed=cfg.sampling_seed)
    times = _floats(args.times)
    if times and "t" not in problem.coords:
        raise CliError(f"problem {problem.name!r} is steady; --times does not apply", EXIT_CONFIG)
    for tv in times:
        sub, _ = evaluate_model(model, problem, conds, {**axes, "t": np.array([tv])},
                                seq_len=cfg.seq_len, seq_seed=cfg.sampling_seed)
        for row in sub.rows:
            row.time = tv
            report.rows.append(row)
    out = Path(args.output) if args.output else Path(args.checkpoint).parent
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(report.to_csv())
    table = report.table()
    (out / "metrics.txt").write_text(table + "\n")
    print(table)
    print(f"wrote {out / 'metrics.csv'}")
    return EXIT_OK


def parse_condition(problem, spec: str):
    """``Re=40``, ``lid_velocity=1.5``, ``value=0.5`` or ``seed=3,index=0`` for random families."""
    from .problems.conditions import Condition, ConditionFamily

    try:
        kv = {k.strip(): float(v) for k, v in (item.split("=") for item in spec.split(",") if item.strip())}
    except ValueError:
        raise CliError(f"bad condition spec {spec!r}", EXIT_CONFIG) from None
    kind = problem.family_kind
    if kind in ("sinusoidal", "grf"):
        extra = set(kv) - {"seed", "index", "N", "n_max"}
        if extra or "index" not in kv:
            raise CliError(f"{kind} conditions take seed=..,index=.. (got {spec!r})", EXIT_CONFIG)
        index = int(kv.pop("index"))
        fam = ConditionFamily(kind, seed=int(kv.pop("seed", 0)), n_seen=index + 1, n_unseen=0,
                              **{k: int(v) for k, v in kv.items()})
        return fam.seen()[index]
    name = {"reynolds": "Re", "lid": "lid_velocity", "constant": "value"}[kind]
    if set(kv) != {name}:
        raise CliError(f"{problem.name} conditions take {name}=<value> (got {spec!r})", EXIT_CONFIG)
    return Condition(f"{kind}-{kv[name]:g}", kind, {name: kv[name]}, "unseen")


def cmd_oracle(args) -> int:
    from .problems.base import get_problem
    from .problems.burgers_fd import InstabilityError
    from .problems.cavity import ConvergenceError

    try:
        problem = get_problem(args.problem)
    except ValueError as e:
        raise CliError(str(e), EXIT_CONFIG) from None
    cond = parse_condition(problem, args.condition)
    axes = parse_grid(problem, args.grid)
    try:
        field = problem.reference(cond, axes)
    except (ConvergenceError, InstabilityError, FloatingPointError) as e:
        raise CliError(f"oracle failed: {e}", EXIT_ORACLE) from None
    out = Path(args.out)
    if not out.is_absolute() and OUTPUT_ROOT_ENV in os.environ:
        out = Path(os.environ[OUTPUT_ROOT_ENV]) / out
    out.parent.mkdir(parents=True, exist_ok=True)
    field.save_csv(out)
    print(f"wrote {out} ({field.provenance}, condition {cond.id}, "
          f"grid {'x'.join(str(len(a)) for a in axes.values())})")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .gradcheck import run_gradcheck

    problems = tuple(p.strip() for p in args.problems.split(",") if p.strip())
    report = run_gradcheck(size=args.size, seed=args.seed, tolerance=args.tolerance, problems=problems)
    print(report.table())
    return EXIT_OK if report.passed else EXIT_GRADCHECK


def cmd_timing(args) -> int:
    from .metrics.evaluate import predict_field
    from .training.train import conditions_for

    ck, cfg, model = _load_checkpoint(args.checkpoint)
    problem, family = conditions_for(cfg)
    cond = family.all()[0]
    axes = parse_grid(problem, args.grid)
    predict_field(model, problem, cond, axes, cfg.seq_len, cfg.sampling_seed)  # warm-up
    times = []
    for _ in range(args.passes):
        t0 = time.perf_counter()
        predict_field(model, problem, cond, axes, cfg.seq_len, cfg.sampling_seed)
        times.append(1e3 * (time.perf_counter() - t0))
    n = int(np.prod([len(a) for a in axes.values()]))
    grid = "x".join(str(len(a)) for a in axes.values())
    print(f"{problem.name}: grid {grid} ({n} points), {args.passes} passes: "
          f"mean {np.mean(times):.2f} ms, std {np.std(times):.2f} ms (informational, hardware dependent)")
    return EXIT_OK


# -- entry point --------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pinto", description="Physics-informed transformer neural operator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train from a config file or bundled config name")
    p.add_argument("config")
    p.add_argument("--output", help="output directory (default: $PINTO_OUTPUT_ROOT/<run name>)")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.add_argument("--epochs", type=int, help="override the configured epoch count")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="metrics of a checkpoint against the oracle")
    p.add_argument("checkpoint")
    p.add_argument("--problem", help="expected problem name (checked against the checkpoint)")
    p.add_argument("--conditions", default="all", help="all | seen | unseen | comma-separated ids")
    p.add_argument("--grid", default="desk", help="desk | paper | NxM[xK]")
    p.add_argument("--times", help="extra comma-separated time slices, may extrapolate")
    p.add_argument("--output", help="directory for metrics.csv (default: next to the checkpoint)")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("oracle", help="write a reference field as CSV")
    p.add_argument("problem")
    p.add_argument("--condition", required=True, help="e.g. Re=40, lid_velocity=1.5, seed=0,index=3")
    p.add_argument("--grid", default="desk")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("gradcheck", help="analytic derivatives vs finite differences")
    p.add_argument("--size", type=int, default=2, help="embedding width of the tiny model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--problems", default="advection,burgers,kovasznay,beltrami,lid")
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("timing", help="mean inference time over repeated forward passes")
    p.add_argument("checkpoint")
    p.add_argument("--grid", default="desk", help="desk | paper | NxM[xK], e.g. 1024x100")
    p.add_argument("--passes", type=int, default=10)
    p.set_defaults(fn=cmd_timing)

    p = sub.add_parser("configs", help="list bundled configs")
    p.set_defaults(fn=lambda a: print("\n".join(bundled_configs())) or EXIT_OK)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    try:
        return int(args.fn(args))
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
