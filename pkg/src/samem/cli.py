"""``samem`` command-line entry point.

Every subcommand also accepts ``--config FILE`` with ``key=value`` lines
(keys are flag names, dashes or underscores); explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from samem import __version__
from samem.core import SaMemConfig
from samem.cot_forge import (
    DATASET_VERSION,
    EXTENDED_HEDGING_TERMS,
    DEFAULT_HEDGING_TERMS,
    HttpAnnotator,
    TemplateAnnotator,
    forge,
    read_trajectories,
    write_dataset,
)
from samem.harness import generate_synthetic, replay
from samem.maintenance import FusionWeights
from samem.nav_eval import ActionKinematics, compute_sr_spl, judge_episode, read_records
from samem.oracles import OracleDivergence
from samem.trace import VERSION as TRACE_VERSION
from samem.trace import TraceFormatError, read_trace, write_trace

log = logging.getLogger("samem")

FORMATS_EPILOG = (
    f"formats: trace binary SAMEMTR1 version {TRACE_VERSION}; "
    f"CoT dataset JSONL version {DATASET_VERSION} "
    "(instruction, history, current, cot.{perception,target_env,env_action}, actions); "
    "episode records JSONL (actions, start, targets, geodesic)"
)

POLICIES = [("remove", "temporal"), ("remove", "relevance"), ("fuse", "temporal"), ("fuse", "relevance")]
VARIANTS = ["inst-only", "inst-cur"]


def _add_samem_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("memory")
    g.add_argument("--m-max", type=int, default=8, help="max historical frames before maintenance (default 8)")
    g.add_argument("--k", type=int, default=30, help="token budget per historical frame (default 30)")
    g.add_argument("--op", choices=["remove", "fuse"], default="fuse", help="maintenance operation (default fuse)")
    g.add_argument("--criterion", choices=["temporal", "relevance"], default="relevance",
                   help="maintenance criterion (default relevance)")
    g.add_argument("--compression", choices=VARIANTS, default="inst-cur",
                   help="frame compression scoring (default inst-cur)")
    g.add_argument("--w-txt", type=float, default=0.3, help="instruction weight (default 0.3)")
    g.add_argument("--w-adj", type=float, default=0.4, help="adjacency weight (default 0.4)")
    g.add_argument("--w-cur", type=float, default=0.3, help="current-frame weight (default 0.3)")


def _config_from(args, op=None, criterion=None, variant=None) -> SaMemConfig:
    return SaMemConfig.build(
        m_max=args.m_max,
        budget_k=args.k,
        variant=variant or args.compression,
        operation=op or args.op,
        criterion=criterion or args.criterion,
        weights=FusionWeights(args.w_txt, args.w_adj, args.w_cur),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="samem", description="Similarity-aware frame memory tools.",
                                     epilog=FORMATS_EPILOG)
    parser.add_argument("--version", action="version", version=f"samem {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_, description=help_, epilog=FORMATS_EPILOG)
        p.add_argument("--config", type=Path, help="key=value overlay file; explicit flags win")
        return p

    p = add("generate", "write a deterministic synthetic trace")
    p.add_argument("--seed", type=int, default=0, help="SplitMix64 seed (default 0)")
    p.add_argument("--n-frames", type=int, default=20, help="frames (default 20)")
    p.add_argument("--dim", type=int, default=16, help="token dimension (default 16)")
    p.add_argument("--tokens", type=int, default=64, help="tokens per frame (default 64)")
    p.add_argument("--instruction-tokens", type=int, default=4, help="instruction tokens (default 4)")
    p.add_argument("--drift", type=float, default=0.1, help="random-walk step in [0,1] (default 0.1)")
    p.add_argument("--relevant-fraction", type=float, default=0.25,
                   help="fraction of planted instruction-relevant tokens (default 0.25)")
    p.add_argument("--out", type=Path, required=True, help="output trace path")
    p.set_defaults(func=cmd_generate)

    p = add("replay", "replay the memory over a trace")
    p.add_argument("trace", type=Path)
    _add_samem_flags(p)
    p.add_argument("--oracle", action="store_true", help="cross-check every decision by brute force")
    p.add_argument("--metrics-out", type=Path, help="JSONL of step reports then a metrics record (default: none)")
    p.add_argument("--csv", type=Path, help="per-step CSV for plotting (default: none)")
    p.set_defaults(func=cmd_replay)

    p = add("ablate", "run the 4 maintenance policies x 2 compression strategies over traces")
    p.add_argument("traces", type=Path, nargs="*")
    _add_samem_flags(p)
    p.add_argument("--synthetic-seeds", type=int, default=0,
                   help="also generate this many planted-relevance traces, seeds 0..N-1 (default 0)")
    p.add_argument("--seed", type=int, default=0, help="offset added to synthetic seeds (default 0)")
    p.add_argument("--matrix", action="store_true", help="print the human-readable matrix as well as JSONL")
    p.add_argument("--out", type=Path, help="write JSONL cells here instead of stdout (default: stdout)")
    p.set_defaults(func=cmd_ablate)

    p = add("forge", "build and curate a CoT dataset from expert trajectories")
    p.add_argument("trajectories", type=Path, help="JSONL: frames, actions, instruction, target")
    p.add_argument("--seed", type=int, default=0, help="sampling seed (default 0)")
    p.add_argument("--annotator", choices=["template", "http"], default="template", help="(default template)")
    p.add_argument("--endpoint", help="annotation service URL for --annotator http")
    p.add_argument("--timeout", type=float, default=30.0, help="per-request timeout in s (default 30)")
    p.add_argument("--retries", type=int, default=2, help="retries per sample (default 2)")
    p.add_argument("--concurrency", type=int, default=4, help="concurrent annotation requests (default 4)")
    p.add_argument("--hedging", choices=["default", "extended"], default="default",
                   help="hedging term list (default: indicate/might/may/imply + inflections)")
    p.add_argument("--extra-term", action="append", default=[], help="additional hedging term (repeatable)")
    p.add_argument("--out", type=Path, required=True, help="output dataset JSONL")
    p.set_defaults(func=cmd_forge)

    p = add("eval", "compute SR and SPL over episode records")
    p.add_argument("records", type=Path)
    p.add_argument("--step-size", type=float, default=0.25, help="metres per MOVE_FORWARD (default 0.25)")
    p.add_argument("--turn-angle", type=float, default=30.0, help="degrees per turn (default 30)")
    p.add_argument("--success-distance", type=float, default=1.0, help="metres (default 1.0)")
    p.add_argument("--no-require-stop", action="store_true", help="count success without an explicit STOP")
    p.add_argument("--geodesic-success", action="store_true",
                   help="reserved: judge success by geodesic distance (needs a navmesh; not available)")
    p.set_defaults(func=cmd_eval)
    return parser


def _read_overlay(path: Path) -> dict[str, str]:
    out = {}
    for n, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().lstrip("-").replace("-", "_")] = v.strip()
    return out


def _apply_overlay(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    choices = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in choices), None)
    if known.config is None or command is None:
        return parser.parse_args(argv)
    subparser = choices[command]
    by_dest = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in _read_overlay(known.config).items():
        action = by_dest.get(key)
        if action is None or key in ("help", "config", "func"):
            raise ValueError(f"unknown config key {key!r} for {command}")
        if action.nargs == 0:
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        elif isinstance(action, argparse._AppendAction):
            defaults[key] = [v.strip() for v in value.split(",") if v.strip()]
        else:
            defaults[key] = (action.type or str)(value)
            if action.choices and defaults[key] not in action.choices:
                raise ValueError(f"config {key}={value!r} not in {list(action.choices)}")
        action.required = False
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def cmd_generate(args) -> int:
    trace = generate_synthetic(args.seed, args.n_frames, args.tokens, args.dim, args.drift,
                               args.relevant_fraction, args.instruction_tokens)
    write_trace(trace, args.out)
    print(json.dumps({"out": str(args.out), "frames": len(trace.frames), "dim": trace.dim, "seed": args.seed}))
    return 0


def cmd_replay(args) -> int:
    trace = read_trace(args.trace)
    cfg = _config_from(args)
    result = replay(trace, cfg, oracle_mode=args.oracle)
    m = result.metrics
    if args.metrics_out:
        with open(args.metrics_out, "w", encoding="utf-8") as fh:
            for rep in result.reports:
                fh.write(json.dumps({"type": "step", **rep.as_dict()}) + "\n")
            fh.write(json.dumps({"type": "metrics", **m.as_dict()}) + "\n")
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "frames", "tokens", "inst_cosine", "cur_cosine", "action"])
            for rep, ic, cc, tok in zip(result.reports, m.inst_cosine, m.cur_cosine, m.tokens):
                act = rep.maintenance_action
                w.writerow([rep.step_index, rep.frames_after, tok, f"{ic:.9f}", f"{cc:.9f}",
                            "" if act is None else f"{act['kind']}:{act['index']}"])
    print(json.dumps({
        "steps": len(result.reports),
        "frames": len(result.memory),
        "total_tokens": m.total_tokens,
        "compression_ratio": m.compression_ratio,
        "mean_inst_cosine": m.mean_inst_cosine,
        "mean_cur_cosine": m.mean_cur_cosine,
        "oracle_checks": result.oracle_checks,
        "divergences": 0,
    }))
    return 0


def ablation_matrix(traces, args) -> list[dict]:
    """One cell per (policy, compression variant), averaged over ``traces``."""
    cells = []
    for op, crit in POLICIES:
        for variant in VARIANTS:
            cfg = _config_from(args, op, crit, variant)
            ms = [replay(t, cfg).metrics for t in traces]
            cells.append({
                "policy": f"{op}+{crit}",
                "compression": variant,
                "traces": len(ms),
                "mean_inst_cosine": sum(x.mean_inst_cosine for x in ms) / len(ms),
                "mean_cur_cosine": sum(x.mean_cur_cosine for x in ms) / len(ms),
                "compression_ratio": sum(x.compression_ratio for x in ms) / len(ms),
            })
    return cells


def format_matrix(cells: list[dict], key: str = "mean_inst_cosine") -> str:
    rows = [f"{'policy':<18}" + "".join(f"{v:>12}" for v in VARIANTS)]
    for op, crit in POLICIES:
        label = f"{op}+{crit}"
        vals = {c["compression"]: c[key] for c in cells if c["policy"] == label}
        rows.append(f"{label:<18}" + "".join(f"{vals[v]:>12.6f}" for v in VARIANTS))
    return "\n".join(rows)


def cmd_ablate(args) -> int:
    traces = [read_trace(p) for p in args.traces]
    traces += [generate_synthetic(args.seed + s, 24, 64, 16, 0.3, 0.25) for s in range(args.synthetic_seeds)]
    if not traces:
        raise ValueError("no traces given (pass paths or --synthetic-seeds)")
    cells = ablation_matrix(traces, args)
    text = "".join(json.dumps(c) + "\n" for c in cells)
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.matrix:
        print(format_matrix(cells), file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_forge(args) -> int:
    terms = list(EXTENDED_HEDGING_TERMS if args.hedging == "extended" else DEFAULT_HEDGING_TERMS) + args.extra_term
    if args.annotator == "http":
        if not args.endpoint:
            raise ValueError("--annotator http needs --endpoint")
        annotator = HttpAnnotator(args.endpoint, timeout=args.timeout, retries=args.retries)
    else:
        annotator = TemplateAnnotator()
    result = forge(read_trajectories(args.trajectories), args.seed, annotator, terms, args.concurrency)
    write_dataset(result["kept"], args.out)
    print(json.dumps({
        "kept": len(result["kept"]),
        "discarded": [{"current": s.current, "reason": r} for s, r in result["discarded"]],
        "unannotated": [{"current": s.current, "reason": r} for s, r in result["unannotated"]],
        "skipped": result["skipped"],
        "out": str(args.out),
    }))
    return 0


def cmd_eval(args) -> int:
    if args.geodesic_success:
        raise ValueError("--geodesic-success is reserved; geodesic distances to targets are not available")
    kin = ActionKinematics(args.step_size, args.turn_angle, args.success_distance, not args.no_require_stop)
    judged = [judge_episode(r, kin) for r in read_records(args.records)]
    sr, spl = compute_sr_spl(judged)
    print(json.dumps({"episodes": len(judged), "SR": sr, "SPL": spl}))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_overlay(parser, argv)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except OracleDivergence as exc:
        print(f"samem: oracle divergence: {exc}", file=sys.stderr)
        return 1
    except (TraceFormatError, ValueError, OSError, KeyError) as exc:
        print(f"samem: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
