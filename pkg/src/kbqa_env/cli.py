"""Command-line entry point: ``kbqa-env <command> ...``.

Summaries go to stdout as JSON; logs go to stderr.  Exit codes: 0 success,
1 domain error (bad input data, parse failures), 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .episode import EnvConfig, Episode, run_episode
from .errors import KbqaError
from .expression import extract_actions, parse_sexpr
from .grpo import GrpoConfig, group_advantages
from .kb import evaluate, load_triples
from .policies import gold_actions, gold_replay_policy, random_policy, remote_chat_policy
from .reward import RewardWeights, read_gold, total_reward
from .rrcg import RrcgConfig
from .rrs import RrsConfig, build_reference_prompt, emit_sft_records, filter_trajectory, write_jsonl
from .sparql import execute_remote, to_sparql

log = logging.getLogger("kbqa_env")


class DomainError(Exception):
    pass


def _read_jsonl(path):
    rows = []
    try:
        with open(path, encoding="utf-8") as fh:
            for no, line in enumerate(fh, 1):
                if line.strip():
                    try:
                        rows.append(json.loads(line))
                    except json.JSONDecodeError as e:
                        raise DomainError(f"{path}:{no}: invalid JSON ({e})") from None
    except OSError as e:
        raise DomainError(f"cannot read {path}: {e}") from None
    return rows


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8") as fh:
        for ln in lines:
            fh.write(ln + "\n")


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=False))


def _load_gold(path):
    try:
        return read_gold(path)
    except OSError as e:
        raise DomainError(f"cannot read {path}: {e}") from None
    except ValueError as e:
        raise DomainError(str(e)) from None


# -- commands -------------------------------------------------------------

def cmd_compile(args):
    tree = parse_sexpr(args.sexpr)
    if args.actions:
        for a in extract_actions(tree):
            print(a.render())
    else:
        print(to_sparql(tree, iri_prefix=args.iri_prefix))
    return 0


def cmd_eval(args):
    tree = parse_sexpr(args.sexpr)
    if args.endpoint:
        res = execute_remote(args.endpoint, to_sparql(tree, iri_prefix=args.iri_prefix),
                             timeout=args.timeout, iri_prefix=args.iri_prefix)
    else:
        kb = load_triples(Path(args.kb))
        res = evaluate(kb, tree)
    _print_json({"kind": res.kind, "answers": res.answers()})
    return 0


def _make_policy_factory(name, kb, seed, sampling):
    if name == "gold":
        return lambda rec: gold_replay_policy(rec, kb)
    if name == "random":
        return lambda rec: random_policy(rec, kb, seed=seed)
    if name == "remote" or name.startswith("remote:"):
        url = name.partition(":")[2] or os.environ.get("KBQA_ENDPOINT")
        if not url:
            raise DomainError("--policy remote needs a URL (remote:URL) or KBQA_ENDPOINT")
        return lambda rec: remote_chat_policy(url, sampling)
    raise DomainError(f"unknown policy {name!r}")


def cmd_run(args):
    kb = load_triples(Path(args.kb))
    records = _load_gold(args.dataset)
    cfg = EnvConfig(
        max_turns=args.max_turns,
        obs_top_k=args.obs_top_k,
        rrcg=RrcgConfig(args.tau_high, args.tau_low, args.top_k),
    )
    sampling = GrpoConfig(temperature=args.temperature, top_p=args.top_p)
    factory = _make_policy_factory(args.policy, kb, args.seed, sampling)

    def one(rec):
        try:
            refs = gold_actions(rec)[1] if args.reference else None
            return run_episode(factory(rec), kb, rec, cfg, refs)
        except KbqaError as e:
            log.error("%s: %s", rec.qid, e)
            return Episode(kb, rec, cfg).finish("PolicyFailure", f"{type(e).__name__}: {e}")

    if args.workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            trajs = list(pool.map(one, records))
    else:
        trajs = [one(r) for r in records]

    if args.out:
        _write_lines(args.out, (t.to_json() for t in trajs))
    rrs_cfg = RrsConfig()
    accepted = sum(filter_trajectory(t.transcript, r.answers, rrs_cfg).accepted
                   for t, r in zip(trajs, records))
    n = len(trajs)
    reasons = {}
    for t in trajs:
        reasons[t.terminal_reason] = reasons.get(t.terminal_reason, 0) + 1
    _print_json({
        "total": n,
        "mean_f1": sum(t.reward.f1 for t in trajs) / n if n else 0.0,
        "mean_reward": sum(t.reward.total for t in trajs) / n if n else 0.0,
        "accepted": accepted,
        "acceptance_rate": accepted / n if n else 0.0,
        "terminal_reasons": dict(sorted(reasons.items())),
        "malformed_kb_lines": kb.report.skipped,
    })
    return 0


def _trajectory_rows(path, gold_by_qid):
    rows = _read_jsonl(path)
    for i, row in enumerate(rows, 1):
        for key in ("qid", "transcript", "prompt"):
            if key not in row:
                raise DomainError(f"{path}:{i}: trajectory lacks {key!r}")
        if row["qid"] not in gold_by_qid:
            raise DomainError(f"{path}:{i}: qid {row['qid']!r} not in gold file")
    return rows


def cmd_score(args):
    gold = {r.qid: r for r in _load_gold(args.gold)}
    rows = _trajectory_rows(args.input, gold)
    out = []
    for row in rows:
        rb = total_reward(row["transcript"], gold[row["qid"]].answers)
        out.append({"qid": row["qid"], **rb.to_dict()})
    if args.out:
        _write_lines(args.out, (json.dumps(o) for o in out))
    n = len(out)
    _print_json({
        "total": n,
        "mean_f1": sum(o["f1"] for o in out) / n if n else 0.0,
        "mean_reward": sum(o["total"] for o in out) / n if n else 0.0,
    })
    return 0


def cmd_advantages(args):
    rows = _read_jsonl(args.input)
    out = []
    for i, row in enumerate(rows, 1):
        rewards = row.get("rewards")
        if not isinstance(rewards, list) or not rewards:
            raise DomainError(f"{args.input}:{i}: 'rewards' must be a non-empty list")
        out.append({**row, "advantages": [float(a) for a in group_advantages(rewards)]})
    lines = [json.dumps(o) for o in out]
    if args.out:
        _write_lines(args.out, lines)
    else:
        for ln in lines:
            print(ln)
    return 0


def cmd_rrs_build(args):
    records = _load_gold(args.dataset)
    lines = []
    for rec in records:
        actions = gold_actions(rec)[1]
        prompt = build_reference_prompt(rec.question, rec.topic_entities, actions)
        lines.append(json.dumps({
            "qid": rec.qid,
            "prompt": prompt,
            "reference_actions": [a.render() for a in actions],
        }))
    _write_lines(args.out, lines)
    _print_json({"total": len(lines)})
    return 0


def cmd_rrs_filter(args):
    gold = {r.qid: r for r in _load_gold(args.gold)}
    rows = _trajectory_rows(args.input, gold)
    cfg = RrsConfig(args.accept_f1, not args.no_format_requirement)
    w = RewardWeights()
    accepted, metas = [], []
    rejected = {"f1": 0, "format": 0}
    for row in rows:
        res = filter_trajectory(row["transcript"], gold[row["qid"]].answers, cfg, w)
        if res.accepted:
            accepted.append((row["prompt"], row["transcript"]))
            metas.append({"qid": row["qid"], "f1": res.breakdown.f1, "reward": res.breakdown.to_dict()})
        else:
            rejected[res.reason] += 1
    write_jsonl(emit_sft_records(accepted, metas), args.out)
    n = len(rows)
    _print_json({
        "accepted": len(accepted),
        "total": n,
        "acceptance_rate": len(accepted) / n if n else 0.0,
        "rejected": rejected,
    })
    return 0


# -- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kbqa-env", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    p.add_argument("--config", help="key=value file supplying defaults for the command's flags")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="S-expression to SPARQL or to action lines")
    c.add_argument("sexpr")
    mode = c.add_mutually_exclusive_group(required=True)
    mode.add_argument("--sparql", action="store_true")
    mode.add_argument("--actions", action="store_true")
    c.add_argument("--iri-prefix", default="")
    c.set_defaults(func=cmd_compile)

    e = sub.add_parser("eval", help="evaluate an S-expression on a triple file or endpoint")
    e.add_argument("sexpr")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--kb")
    src.add_argument("--endpoint")
    e.add_argument("--iri-prefix", default="")
    e.add_argument("--timeout", type=float, default=30.0)
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("run", help="run episodes over a dataset")
    r.add_argument("--kb", required=True)
    r.add_argument("--dataset", required=True)
    r.add_argument("--policy", default="gold", help="gold | random | remote[:URL]")
    r.add_argument("--out")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--max-turns", type=int, default=10)
    r.add_argument("--obs-top-k", type=int, default=10)
    r.add_argument("--tau-high", type=float, default=0.95)
    r.add_argument("--tau-low", type=float, default=0.3)
    r.add_argument("--top-k", type=int, default=5)
    r.add_argument("--temperature", type=float, default=1.0)
    r.add_argument("--top-p", type=float, default=0.99)
    r.add_argument("--reference", action="store_true",
                   help="reference-conditioned rollout: gold actions in the prompt and per-turn hints")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("score", help="recompute rewards for a trajectory file")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--gold", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_score)

    a = sub.add_parser("advantages", aliases=["score-advantages"],
                       help="group-centred advantages for JSONL rows with a 'rewards' list")
    a.add_argument("--in", dest="input", required=True)
    a.add_argument("--out")
    a.set_defaults(func=cmd_advantages)

    b = sub.add_parser("rrs-build", help="reference-conditioned prompts from gold S-expressions")
    b.add_argument("--dataset", required=True)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_rrs_build)

    f = sub.add_parser("rrs-filter", aliases=["rrs"], help="filter trajectories into SFT records")
    f.add_argument("--in", dest="input", required=True)
    f.add_argument("--gold", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--accept-f1", type=float, default=0.9)
    f.add_argument("--no-format-requirement", action="store_true")
    f.set_defaults(func=cmd_rrs_filter)
    return p


def _config_tokens(path):
    """Turn ``key=value`` lines into ``--key value`` tokens."""
    tokens = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise DomainError(f"{path}: expected key=value, got {line!r}")
            flag = "--" + key.strip().replace("_", "-")
            value = value.strip()
            if value.lower() in ("true", "yes", "on"):
                tokens.append(flag)
            elif value.lower() not in ("false", "no", "off"):
                tokens.extend([flag, value])
    return tokens


def _splice_config(argv):
    """Insert config-file flags right after the subcommand so explicit flags win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return argv
    tokens = _config_tokens(known.config)
    for i, tok in enumerate(rest):
        if not tok.startswith("-"):
            return rest[: i + 1] + tokens + rest[i + 1:]
    return rest + tokens


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _splice_config(argv)
    except (OSError, DomainError) as e:
        print(f"kbqa-env: {e}", file=sys.stderr)
        return 2
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (KbqaError, DomainError, ValueError) as e:
        print(f"kbqa-env: error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"kbqa-env: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
