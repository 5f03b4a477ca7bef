"""Command-line front end.

Exit status contract: 0 for a positive verdict or plain success, 1 for a
negative verdict, 2 for usage, parse/validation, resource errors, or an
engine disagreement under ``check --engine both``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ContractError
from .syntax import Behaviour, contract, dual, gen_random, render
from .product import sync_traces
from .compliance import (
    check_skp,
    check_strong,
    derivation_to_json,
    derive,
    verdict_to_json,
)
from .preorder import subbehaviour
from .registry import ContractStore, make_http_server

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_ERROR = 2


def _load(path: str) -> Behaviour:
    return contract(Path(path).read_text(encoding="utf-8"))


def _emit(doc: dict, as_json: bool, human: str) -> None:
    if as_json:
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(human)


def _witness_lines(verdict) -> list[str]:
    doc = verdict.witness_json()
    if doc is None:
        return []
    if doc["kind"] == "stuck":
        lines = ["witness: stuck run"]
        for st in doc["steps"]:
            action = f" {st['action']}" if st["action"] else ""
            lines.append(f"  {st['kind']}{action} -> {st['client']} || {st['server']}")
        return lines
    lines = ["witness: skip-only loop"]
    for part in ("stem", "cycle"):
        lines.append(f"  {part}:")
        for st in doc[part]:
            action = f" {st['action']}" if st["action"] else ""
            lines.append(f"    {st['kind']}{action} -> {st['client']} || {st['server']}")
    return lines


def _cmd_check(args) -> int:
    client = _load(args.client)
    server = _load(args.server)
    if args.mode == "strong":
        verdict = check_strong(client, server)
        rules = 0
        agreement = None
    else:
        verdict = None
        rules = 0
        agreement = None
        if args.engine in ("graph", "both"):
            verdict = check_skp(client, server)
        if args.engine in ("derive", "both"):
            tree = derive(client, server)
            rules = tree.rule_count()
            if args.emit_derivation:
                Path(args.emit_derivation).write_text(
                    json.dumps(derivation_to_json(tree), indent=2), encoding="utf-8"
                )
            if args.engine == "derive":
                verdict = check_skp(client, server)  # witness/stats come from the graph
                agreement = verdict.compliant == tree.ok
            else:
                agreement = verdict.compliant == tree.ok
            if not agreement:
                print(
                    "engine disagreement: graph says "
                    f"{'compliant' if verdict.compliant else 'noncompliant'}, "
                    f"derivation says {'success' if tree.ok else 'failure'}",
                    file=sys.stderr,
                )
                return EXIT_ERROR
    doc = verdict_to_json(verdict, rules=rules)
    doc["mode"] = args.mode
    lines = [f"{'compliant' if verdict.compliant else 'noncompliant'} ({args.mode} mode)"]
    if args.witness and not verdict.compliant:
        lines.extend(_witness_lines(verdict))
    _emit(doc, args.json, "\n".join(lines))
    return EXIT_OK if verdict.compliant else EXIT_NEGATIVE


def _cmd_subtype(args) -> int:
    lo = _load(args.sub)
    hi = _load(args.super)
    verdict = subbehaviour(lo, hi)
    if verdict.is_sub:
        _emit(verdict.to_json(), args.json, "sub")
        return EXIT_OK
    human = f"notsub\ncounterexample client: {render(verdict.counterexample)}"
    _emit(verdict.to_json(), args.json, human)
    return EXIT_NEGATIVE


def _cmd_dual(args) -> int:
    term = _load(args.file)
    print(render(dual(term)))
    return EXIT_OK


def _cmd_normalize(args) -> int:
    term = _load(args.file)
    print(render(term))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    client = _load(args.client)
    server = _load(args.server)
    result = sync_traces(client, server, bound=args.max_steps)
    for trace in sorted(result, key=str):
        print(str(trace))
    return EXIT_OK


def _cmd_gen(args) -> int:
    term = gen_random(args.seed, args.size, args.alphabet)
    print(render(term))
    return EXIT_OK


def _cmd_registry(args) -> int:
    if args.registry_cmd == "serve":
        store = ContractStore(args.store)
        server = make_http_server(store, host=args.host, port=args.port)
        print(f"registry listening on {args.host}:{args.port} (store: {args.store})")
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.server_close()
        return EXIT_OK
    if args.registry_cmd == "add":
        store = ContractStore(args.store)
        record = store.register(args.name, Path(args.file).read_text(encoding="utf-8"))
        print(json.dumps(record.to_json()))
        return EXIT_OK
    if args.registry_cmd == "query":
        store = ContractStore(args.store)
        matches = store.query(
            Path(args.client).read_text(encoding="utf-8"), scan=args.scan
        )
        print(json.dumps({"matches": [{"id": r.id, "name": r.name} for r in matches]}))
        return EXIT_OK
    raise AssertionError("unreachable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sessionkit",
        description="Check, compare and store client/server session contracts.",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("check", help="decide compliance of a client with a server")
    p.add_argument("--client", required=True)
    p.add_argument("--server", required=True)
    p.add_argument("--mode", choices=("skp", "strong"), default="skp")
    p.add_argument("--engine", choices=("graph", "derive", "both"), default="graph")
    p.add_argument("--emit-derivation", metavar="PATH")
    p.add_argument("--witness", action="store_true", help="print the failure witness")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("subtype", help="decide server substitutability")
    p.add_argument("--sub", required=True)
    p.add_argument("--super", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_subtype)

    p = sub.add_parser("dual", help="print the dual contract")
    p.add_argument("file")
    p.set_defaults(func=_cmd_dual)

    p = sub.add_parser("normalize", help="print the canonical form")
    p.add_argument("file")
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("simulate", help="print bounded synchronization traces")
    p.add_argument("--client", required=True)
    p.add_argument("--server", required=True)
    p.add_argument("--max-steps", type=int, default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("gen", help="generate a random contract")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--size", type=int, default=4, help="maximum nesting depth")
    p.add_argument("--alphabet", type=int, default=3, help="number of action names")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("registry", help="contract repository")
    rsub = p.add_subparsers(dest="registry_cmd", required=True)
    ps = rsub.add_parser("serve", help="run the HTTP registry")
    ps.add_argument("--port", type=int, default=8080)
    ps.add_argument("--host", default="127.0.0.1")
    ps.add_argument("--store", required=True)
    ps.set_defaults(func=_cmd_registry)
    pa = rsub.add_parser("add", help="register a contract file")
    pa.add_argument("--store", required=True)
    pa.add_argument("--name", required=True)
    pa.add_argument("file")
    pa.set_defaults(func=_cmd_registry)
    pq = rsub.add_parser("query", help="query stored contracts for a client file")
    pq.add_argument("--store", required=True)
    pq.add_argument("--scan", action="store_true", help="bypass the preorder index")
    pq.add_argument("client")
    pq.set_defaults(func=_cmd_registry)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
