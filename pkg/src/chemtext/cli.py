"""``chemtext`` command-line interface.

Subcommands:

- ``build-dataset``: equal-mix task JSONL files into one balanced corpus
- ``evaluate``: score a predictions JSONL file for one task
- ``canonicalize``: canonical SMILES for each stdin line
- ``fingerprint``: set-bit indices for each stdin line
- ``similarity``: Tanimoto between two SMILES arguments
- ``merge-demo``: run the cross-attention merge on matrix files and print
  the output plus a gradient-check report

Exit codes are stable: 0 success, 1 usage error, 2 data error, 3 internal
error. Output is line-oriented except for evaluation reports, which are
canonical JSON. The environment variable ``CHEMTEXT_THREADS`` caps worker
parallelism (0 = auto); the current pipelines run sequentially, which
satisfies any cap.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import IO, Sequence

import numpy as np

from chemtext.dataset import (
    RecordError,
    TaskKind,
    equal_mix,
    read_records,
    write_records,
)
from chemtext.errors import ChemtextError
from chemtext.fingerprints import (
    key_fingerprint,
    morgan_fingerprint,
    path_fingerprint,
    tanimoto,
)
from chemtext.harness import (
    FingerprintConfig,
    LookupOracle,
    PredictionPair,
    eval_pairs,
    report_to_json,
)
from chemtext.merge import (
    CombineMode,
    MergeParams,
    bidirectional_merge,
    cross_attend,
    grad_check,
    hierarchical_merge,
    load_matrix,
    random_params,
    save_matrix,
)
from chemtext.smiles import CanonError, LexError, ParseError, canonical_smiles, parse_smiles
from chemtext.smiles.valence import validate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def worker_cap() -> int:
    """Parsed CHEMTEXT_THREADS value (0 = auto); invalid values fall back to
    auto with a warning."""
    raw = os.environ.get("CHEMTEXT_THREADS", "0")
    try:
        cap = int(raw)
        if cap < 0:
            raise ValueError
    except ValueError:
        print(f"warning: ignoring invalid CHEMTEXT_THREADS={raw!r}", file=sys.stderr)
        return 0
    return cap


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="chemtext",
        description="Chemistry/text dataset building, SMILES tools and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    build = sub.add_parser("build-dataset", help="equal-mix task files into one corpus")
    build.add_argument(
        "--task-file", action="append", required=True, metavar="KIND=PATH",
        help="task stream as kind=path; repeatable",
    )
    build.add_argument("--per-task", type=int, required=True)
    build.add_argument("--seed", type=int, required=True)
    build.add_argument("--out", required=True)
    build.add_argument("--quiet", action="store_true")
    build.set_defaults(func=cmd_build_dataset)

    ev = sub.add_parser("evaluate", help="score a predictions JSONL file")
    ev.add_argument("--task", required=True, choices=[t.value for t in TaskKind])
    ev.add_argument("--predictions", required=True)
    ev.add_argument("--oracle", help="forward oracle spec, e.g. lookup:PATH")
    ev.add_argument("--fp-bits", type=int, default=2048)
    ev.add_argument("--fp-radius", type=int, default=2)
    ev.add_argument("--quiet", action="store_true")
    ev.set_defaults(func=cmd_evaluate)

    canon = sub.add_parser("canonicalize", help="canonical SMILES per stdin line")
    canon.set_defaults(func=cmd_canonicalize)

    fp = sub.add_parser("fingerprint", help="set-bit indices per stdin line")
    fp.add_argument("--scheme", required=True, choices=["morgan", "path", "keys"])
    fp.add_argument("--bits", type=int, default=2048)
    fp.add_argument("--radius", type=int, default=2)
    fp.add_argument("--max-len", type=int, default=7)
    fp.add_argument("--key-table", help="custom key table file (keys scheme)")
    fp.set_defaults(func=cmd_fingerprint)

    sim = sub.add_parser("similarity", help="Tanimoto between two SMILES")
    sim.add_argument("smiles_a")
    sim.add_argument("smiles_b")
    sim.add_argument("--scheme", default="morgan", choices=["morgan", "path", "keys"])
    sim.add_argument("--bits", type=int, default=2048)
    sim.add_argument("--radius", type=int, default=2)
    sim.add_argument("--max-len", type=int, default=7)
    sim.set_defaults(func=cmd_similarity)

    demo = sub.add_parser("merge-demo", help="cross-attention merge demo")
    demo.add_argument("--base", required=True, help="base-domain matrix file")
    demo.add_argument("--adapt", required=True, help="adaptation-domain matrix file")
    demo.add_argument("--params", required=True, help="JSON parameter file")
    demo.add_argument("--grad-epsilon", type=float, default=1e-5)
    demo.set_defaults(func=cmd_merge_demo)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    worker_cap()
    try:
        return args.func(args)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ChemtextError, OSError, json.JSONDecodeError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except Exception as err:  # pragma: no cover - defensive
        print(f"internal error: {err!r}", file=sys.stderr)
        return EXIT_INTERNAL


# -- subcommands ----------------------------------------------------------------


def cmd_build_dataset(args) -> int:
    streams = {}
    for spec in args.task_file:
        kind_name, sep, path = spec.partition("=")
        if not sep:
            raise _UsageError(f"--task-file needs KIND=PATH, got {spec!r}")
        try:
            kind = TaskKind(kind_name)
        except ValueError:
            raise _UsageError(f"unknown task kind {kind_name!r}") from None
        with open(path, "r", encoding="utf-8") as fp:
            records = read_records(fp)
        for record in records:
            if record.task is not kind:
                raise RecordError(
                    f"{path}: stream declared {kind.value} but holds {record.task.value}"
                )
        streams[kind] = records
    mixed = equal_mix(streams, per_task=args.per_task, seed=args.seed)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fp:
        write_records(fp, mixed)
    for task in TaskKind:
        if task in streams:
            count = sum(1 for r in mixed if r.task is task)
            print(f"{task.value}\t{count}")
    if not args.quiet:
        print(f"wrote {len(mixed)} records to {args.out}", file=sys.stderr)
    return EXIT_OK


def _read_prediction_pairs(path: str, task: TaskKind) -> list[PredictionPair]:
    pairs: list[PredictionPair] = []
    with open(path, "r", encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                print(f"{path}:{lineno}: bad JSON", file=sys.stderr)
                raise RecordError(f"bad JSON at line {lineno}: {exc}") from None
            if not isinstance(obj, dict):
                print(f"{path}:{lineno}: not an object", file=sys.stderr)
                raise RecordError(f"line {lineno}: not an object")
            missing = [k for k in ("id", "task", "prediction", "reference") if k not in obj]
            if missing:
                print(f"{path}:{lineno}: missing {missing}", file=sys.stderr)
                raise RecordError(f"line {lineno}: missing fields {missing}")
            try:
                pair_task = TaskKind(obj["task"])
            except ValueError:
                print(f"{path}:{lineno}: unknown task", file=sys.stderr)
                raise RecordError(f"line {lineno}: unknown task {obj['task']!r}") from None
            pairs.append(
                PredictionPair(
                    task=pair_task,
                    prediction=str(obj["prediction"]),
                    reference=str(obj["reference"]),
                    id=str(obj["id"]),
                )
            )
    return pairs


def _load_oracle(spec: str) -> LookupOracle:
    scheme, sep, path = spec.partition(":")
    if not sep or scheme != "lookup":
        raise _UsageError(f"unsupported oracle spec {spec!r}; expected lookup:PATH")
    table: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "precursors" not in obj or "product" not in obj:
                raise RecordError(
                    f"{path}:{lineno}: oracle entries need precursors and product"
                )
            table[str(obj["precursors"])] = str(obj["product"])
    return LookupOracle(table)


def cmd_evaluate(args) -> int:
    task = TaskKind(args.task)
    if task is TaskKind.RETRO and not args.oracle:
        raise _UsageError("retro evaluation requires --oracle lookup:PATH")
    oracle = _load_oracle(args.oracle) if args.oracle else None
    pairs = _read_prediction_pairs(args.predictions, task)
    config = FingerprintConfig(radius=args.fp_radius, nbits=args.fp_bits)
    report = eval_pairs(pairs, task, oracle=oracle, fp_config=config)
    print(report_to_json(report))
    if not args.quiet:
        print(f"evaluated {report.n_total} pairs", file=sys.stderr)
    return EXIT_OK


def _stdin_lines(stream: IO[str]) -> list[str]:
    return [line.strip() for line in stream if line.strip()]


def cmd_canonicalize(args) -> int:
    lines = _stdin_lines(sys.stdin)
    invalid = 0
    for line in lines:
        try:
            print(canonical_smiles(line))
        except (LexError, ParseError, CanonError) as err:
            invalid += 1
            print(f"INVALID {err}")
    if lines and invalid == len(lines):
        return EXIT_DATA
    return EXIT_OK


def cmd_fingerprint(args) -> int:
    key_table = None
    if args.key_table:
        from chemtext.fingerprints import load_key_table

        with open(args.key_table, "r", encoding="utf-8") as fp:
            key_table = load_key_table(fp)
    lines = _stdin_lines(sys.stdin)
    invalid = 0
    for line in lines:
        try:
            mol = parse_smiles(line)
            result = validate(mol)
            if not result.valid:
                raise CanonError("; ".join(result.reasons))
            if args.scheme == "morgan":
                fp = morgan_fingerprint(mol, args.radius, args.bits)
            elif args.scheme == "path":
                fp = path_fingerprint(mol, args.max_len, args.bits)
            else:
                fp = key_fingerprint(mol, key_table)
            print(" ".join(str(b) for b in sorted(fp.bits)))
        except (LexError, ParseError, CanonError) as err:
            invalid += 1
            print(f"INVALID {err}")
    if lines and invalid == len(lines):
        return EXIT_DATA
    return EXIT_OK


def cmd_similarity(args) -> int:
    def fingerprint(smiles: str):
        mol = parse_smiles(smiles)
        if args.scheme == "morgan":
            return morgan_fingerprint(mol, args.radius, args.bits)
        if args.scheme == "path":
            return path_fingerprint(mol, args.max_len, args.bits)
        return key_fingerprint(mol)

    value = tanimoto(fingerprint(args.smiles_a), fingerprint(args.smiles_b))
    print(f"{value:.6f}")
    return EXIT_OK


def cmd_merge_demo(args) -> int:
    with open(args.base, "r", encoding="utf-8") as fp:
        h_t = load_matrix(fp)
    with open(args.adapt, "r", encoding="utf-8") as fp:
        h_m = load_matrix(fp)
    with open(args.params, "r", encoding="utf-8") as fp:
        spec = json.load(fp)
    params = _params_from_spec(spec, h_t.shape[1], h_m.shape[1])
    if params.combine is CombineMode.BASE_ONLY:
        op_id = "hierarchical_merge" if params.depth > 1 else "cross_attend"
        output = (
            hierarchical_merge(h_t, h_m, params)
            if params.depth > 1
            else cross_attend(h_t, h_m, params)
        )
    else:
        op_id = "bidirectional_merge"
        output = bidirectional_merge(h_t, h_m, params)
    save_matrix(sys.stdout, output)
    report = grad_check(op_id, h_t, h_m, params, epsilon=args.grad_epsilon)
    print(
        f"grad_check op={op_id} max_rel_error={report.max_rel_error:.3e} "
        f"params={report.params_checked} epsilon={report.epsilon:g}"
    )
    return EXIT_OK


def _params_from_spec(spec: dict, h_t_width: int, h_m_width: int) -> MergeParams:
    combine = CombineMode(spec.get("combine", "base_only"))
    depth = int(spec.get("depth", 1))
    d = int(spec["d"])
    explicit = {name: spec[name] for name in ("w_q", "w_k", "w_v", "w_c") if name in spec}
    if {"w_q", "w_k", "w_v"} <= set(explicit):
        return MergeParams(
            w_q=np.array(explicit["w_q"], dtype=float),
            w_k=np.array(explicit["w_k"], dtype=float),
            w_v=np.array(explicit["w_v"], dtype=float),
            depth=depth,
            combine=combine,
            w_c=np.array(explicit["w_c"], dtype=float) if "w_c" in explicit else None,
        )
    if "seed" not in spec:
        raise RecordError("params file needs either w_q/w_k/w_v or a seed")
    return random_params(
        h_t=h_t_width, h_m=h_m_width, d=d,
        seed=int(spec["seed"]), depth=depth, combine=combine,
    )


if __name__ == "__main__":
    sys.exit(main())
