"""Command-line entry point.

Subcommands: `run` one batch, `compare` the three-agent comparison (with an
SVG figure), `gradcheck` the analytic-vs-numeric meta-gradient check, and
`oracle` the dynamic-programming value tables for the expert echo GVFs.
Every command is deterministic given --base_seed. Exit codes: 0 success,
1 runtime failure, 2 config error.
"""

import argparse
import os
import sys

from .chart import write_comparison_svg
from .experiment import (ConfigError, format_summary, make_config,
                         run_batch, write_batch_outputs)
from .gvf import dp_oracle, expert_echo_gvfs, log_transform
from .meta import gradient_check
from .monsoon import MonsoonWorld

GRADCHECK_TOL = 1e-4

# Flat key -> parser for the config file; order matches dumped configs.
CONFIG_TYPES = {
    "agent": str, "total_steps": int, "train_steps": int, "eval_steps": int,
    "epsilon": float, "alpha_control": float, "alpha_gvfs": float,
    "alpha_pi": float, "alpha_c": float, "lambda": float, "gamma_c": float,
    "t_max": float, "memsize": int, "n_trials": int, "base_seed": int,
    "unroll_next_features": str, "out_dir": str,
}


def _dest(key):
    return "l2_lambda" if key == "lambda" else key


def parse_config_file(path):
    """Flat `key = value` file; unknown keys are rejected."""
    values = {}
    try:
        lines = open(path).readlines()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}")
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        if key not in CONFIG_TYPES:
            raise ConfigError(f"{key}: unknown config key ({path}:{lineno})")
        try:
            values[key] = CONFIG_TYPES[key](val)
        except ValueError:
            raise ConfigError(
                f"{key}: cannot parse {val!r} as {CONFIG_TYPES[key].__name__}")
    return values


def build_config(file_values, args, allow_agent_flag=True):
    """Per-kind defaults, then config file values, then CLI overrides."""
    merged = dict(file_values)
    for key in CONFIG_TYPES:
        if key == "agent" and not allow_agent_flag:
            continue
        value = getattr(args, _dest(key), None)
        if value is not None:
            merged[key] = value
    agent = merged.pop("agent", None)
    if agent is None:
        raise ConfigError("agent: missing (set it in the config file or with --agent)")
    if "lambda" in merged:
        merged["l2_lambda"] = merged.pop("lambda")
    return make_config(agent, **merged)


def _add_override_flags(parser, with_agent=True):
    if with_agent:
        parser.add_argument("--agent", choices=("obs-only", "expert", "meta"))
    for key, typ in CONFIG_TYPES.items():
        if key in ("agent", "out_dir"):
            continue
        parser.add_argument(f"--{key}", dest=_dest(key), type=typ)
    parser.add_argument("--out_dir", "--out", dest="out_dir")
    parser.add_argument("--trials-parallel", dest="trials_parallel", type=int,
                        default=1, metavar="N",
                        help="number of worker processes for trials")


def cmd_run(args):
    values = parse_config_file(args.config) if args.config else {}
    cfg = build_config(values, args)
    summary = run_batch(cfg, workers=args.trials_parallel)
    write_batch_outputs(cfg.out_dir, summary, cfg)
    print(format_summary(summary))
    return 0


def cmd_compare(args):
    if args.configs and len(args.configs) != 3:
        raise ConfigError(f"compare needs zero or three config paths, got {len(args.configs)}")
    if args.configs:
        configs = [build_config(parse_config_file(p), args, allow_agent_flag=False)
                   for p in args.configs]
    else:
        configs = [build_config({"agent": kind}, args, allow_agent_flag=False)
                   for kind in ("obs-only", "expert", "meta")]
    out_dir = args.out_dir or configs[0].out_dir
    os.makedirs(out_dir, exist_ok=True)

    entries = []
    rows = []
    failed = False
    for i, cfg in enumerate(configs):
        label = cfg.agent if [c.agent for c in configs].count(cfg.agent) == 1 \
            else f"{cfg.agent}-{i}"
        try:
            summary = run_batch(cfg, workers=args.trials_parallel)
        except RuntimeError as err:
            print(f"batch {label} failed: {err}", file=sys.stderr)
            failed = True
            continue
        write_batch_outputs(out_dir, summary, cfg, prefix=f"{label}_")
        entries.append((label, summary.eval_mean, summary.eval_se))
        rows.append(f"{label},{summary.n_trials},{summary.eval_mean!r},{summary.eval_se!r}")
        print(format_summary(summary))
        print()
    with open(os.path.join(out_dir, "comparison.csv"), "w", newline="") as f:
        f.write("config,n_trials,eval_mean,eval_se\n")
        f.write("".join(row + "\n" for row in rows))
    if entries:
        write_comparison_svg(os.path.join(out_dir, "comparison.svg"), entries)
    return 1 if failed else 0


def cmd_gradcheck(args):
    worst = gradient_check(args.n, seed=args.seed)
    print(f"max relative error over {args.n} contexts: {worst:.3e} "
          f"(tolerance {GRADCHECK_TOL:.0e})")
    return 0 if worst <= GRADCHECK_TOL else 1


def cmd_oracle(args):
    del args
    gamma = 0.9
    print("Expert echo GVF values per hidden phase (dynamic programming)")
    print(f"{'':14s}  phase0   phase1   phase2   phase3")
    for name, spec in zip(("growth", "no-growth"), expert_echo_gvfs()):
        values = dp_oracle(MonsoonWorld, spec.policy, spec.cumulant, gamma=gamma)
        transformed = [log_transform(v, gamma=gamma) for v in values]
        print(f"{name:14s}  " + "  ".join(f"{v:7.4f}" for v in values))
        print(f"{'  transformed':14s}  " + "  ".join(f"{t:7.4f}" for t in transformed))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="metagvf",
        description="Monsoon World experiments with learned and expert GVF features.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one batch of trials")
    p_run.add_argument("--config", help="flat key = value config file")
    _add_override_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run the three-agent comparison")
    p_cmp.add_argument("configs", nargs="*", help="zero or three config files")
    _add_override_flags(p_cmp, with_agent=False)
    p_cmp.set_defaults(func=cmd_compare)

    p_grad = sub.add_parser("gradcheck", help="meta-gradient finite-difference check")
    p_grad.add_argument("n", nargs="?", type=int, default=100)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.set_defaults(func=cmd_gradcheck)

    p_oracle = sub.add_parser("oracle", help="print the echo-GVF value tables")
    p_oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (RuntimeError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
