"""Command line entry point, ``pir``.

Indices on the command line and in JSON output are 1-based.  Every JSON
artifact carries ``"schema": 1``.  Artifacts are a pure function of the
arguments and ``--seed``; run metadata with wall-clock times goes into a
separate manifest (``<out>.manifest.json`` when ``--out`` is given).

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import sys

import numpy as np

from . import __version__
from .bits import as_bits, bits_to_str, load_database, random_bits
from .bounds import FORMULAS, TABLE_COLUMNS, bound_table, evaluate
from .codes import CORRUPTION_MODELS, code_to_dict, load_code, local_decode_trial, pir_to_code, smoothness_profile
from .errors import PirError
from .schemes import SCHEMES, audit_privacy, get_scheme, run_protocol
from .superposed import BooleanFunction, qdecode

log = logging.getLogger("pirldc")

SCHEMA = 1


def _index(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("indices are 1-based")
    return value - 1


def _bits(text: str) -> np.ndarray:
    if not text or set(text) - {"0", "1"}:
        raise argparse.ArgumentTypeError(f"expected a bit string, got {text!r}")
    return as_bits(text)


def _params(text: str) -> dict:
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise argparse.ArgumentTypeError(f"expected k=v, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _fresh_seed() -> int:
    return int(np.random.SeedSequence().entropy % (1 << 63))


# --------------------------------------------------------------------------
# input helpers


def _database(args, n: int | None = None) -> np.ndarray:
    if args.x is not None:
        return args.x
    if args.db is not None:
        return load_database(args.db, n)
    if n is None:
        raise PirError("give --x, --db or --n")
    return random_bits(args.rng, n)


def _scheme_and_db(args):
    x = _database(args, args.n)
    if args.n is not None and len(x) != args.n:
        raise PirError(f"database has {len(x)} bits but --n is {args.n}")
    scheme = get_scheme(args.scheme, len(x))
    return scheme, scheme.database(x), x


def _randomness(args, bits: int) -> np.ndarray:
    r = args.randomness if args.randomness is not None else random_bits(args.rng, bits)
    if len(r) != bits:
        raise PirError(f"--randomness needs {bits} bits, got {len(r)}")
    return r


# --------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> dict:
    scheme, db, x = _scheme_and_db(args)
    r = _randomness(args, scheme.randomness_bits)
    tr = run_protocol(scheme, db, args.index, r)
    return {
        "scheme": scheme.name,
        "n": scheme.n,
        "t": scheme.t,
        "ell": scheme.ell,
        "b": scheme.b,
        "correct": tr.output == int(x[args.index]),
        "transcript": tr.to_dict(),
    }


def cmd_audit(args) -> dict:
    scheme = get_scheme(args.scheme, args.n)
    if args.i_a is not None or args.i_b is not None:
        if args.i_a is None or args.i_b is None:
            raise PirError("--i-a and --i-b go together")
        pairs = [(args.i_a, args.i_b)]
    else:
        pairs = [(0, j) for j in range(1, scheme.n)]
    servers = [args.server] if args.server is not None else [0, 1]
    rows = []
    worst = 0
    for s in servers:
        for a, b in pairs:
            tvd = audit_privacy(scheme, s, a, b)
            worst = max(worst, tvd)
            rows.append({"server": s, "i_a": a + 1, "i_b": b + 1, "tvd": str(tvd)})
    return {"scheme": scheme.name, "n": scheme.n, "max_tvd": str(worst), "private": worst == 0, "pairs": rows}


def cmd_codegen(args) -> dict:
    code, decoder = pir_to_code(get_scheme(args.scheme, args.n))
    out = code_to_dict(code, decoder)
    out["c_star"] = smoothness_profile(decoder).c_star
    return out


def _load_code(args):
    if args.code is not None:
        return load_code(args.code)
    if args.scheme is None or args.n is None:
        raise PirError("give --code or --scheme with --n")
    return pir_to_code(get_scheme(args.scheme, args.n))


def cmd_ldc_trial(args) -> dict:
    code, decoder = _load_code(args)
    x = args.x if args.x is not None else random_bits(args.rng, code.n)
    if len(x) != code.n:
        raise PirError(f"--x needs {code.n} bits")
    indices = [args.index] if args.index is not None else list(range(code.n))
    rows = []
    for i in indices:
        if not 0 <= i < code.n:
            raise PirError(f"index {i + 1} outside 1..{code.n}")
        rate = local_decode_trial(code, decoder, x, i, args.delta, args.model, args.trials, args.rng)
        rows.append({"index": i + 1, "success": rate})
    return {
        "n": code.n,
        "m": code.m,
        "delta": args.delta,
        "model": args.model,
        "trials": args.trials,
        "x": bits_to_str(x),
        "results": rows,
        "min_success": min(r["success"] for r in rows),
    }


def _b_bits(text: str, b: int, flag: str) -> int:
    if len(text) != b or set(text) - {"0", "1"}:
        raise PirError(f"{flag} must be a {b}-bit string, got {text!r}")
    return int(text, 2)


def cmd_qdecode(args) -> dict:
    f = BooleanFunction.from_hex(args.f, args.b)
    report = qdecode(f, _b_bits(args.a0, args.b, "--a0"), _b_bits(args.a1, args.b, "--a1"))
    return report.to_dict()


def cmd_reduce(args) -> dict:
    from .reduction import QuantumDecoder, quantum_query_histogram, rac_multi_copy

    code, decoder = _load_code(args)
    x = args.x if args.x is not None else random_bits(args.rng, code.n)
    if len(x) != code.n:
        raise PirError(f"--x needs {code.n} bits")
    i = args.index
    if not 0 <= i < code.n:
        raise PirError(f"index {i + 1} outside 1..{code.n}")
    qd = QuantumDecoder(decoder, code, x)
    out = {"n": code.n, "m": code.m, "ell": code.ell, "b": decoder.b, "index": i + 1, "x": bits_to_str(x)}
    if args.r is not None:
        if not 0 <= args.r < decoder.R:
            raise PirError(f"--r must lie in 0..{decoder.R - 1}")
        runs = [qd.run(i, args.r)]
    else:
        runs = [qd.run(i, r) for r in range(decoder.R)]
    out["runs"] = [{**q.to_dict(), "predicted": q.predicted(decoder.b)} for q in runs]
    avg = qd.run_all(i)
    out["quantum_success"] = avg.success
    out["quantum_smoothness"] = float(code.m * quantum_query_histogram(decoder, i).max())
    if args.all_r or args.r is None:
        mc = rac_multi_copy(code, decoder, x, i, args.copies)
        out["sieve"] = mc.sieve.to_dict()
        out["multi_copy"] = mc.to_dict()
    return out


def cmd_bound(args) -> dict:
    report = evaluate(args.formula, args.params)
    out = report.to_dict()
    if args.formula == "cor53":
        out["exponent"] = report.result
    return out


def cmd_bound_table(args):
    rows = bound_table()
    if args.json:
        return {"rows": rows}
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in TABLE_COLUMNS})
    return buf.getvalue()


def cmd_serve(args):
    from .net import PirServer, ServerConfig, parse_endpoint

    host, port = parse_endpoint(args.listen)
    server = PirServer.from_config(ServerConfig(args.scheme, args.db, host, port, args.n))

    async def main():
        await server.start(host, port)
        h, p = server.address
        print(f"listening on {h}:{p} scheme={server.scheme.name} n={server.scheme.n}", file=sys.stderr, flush=True)
        await server._server.serve_forever()

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
    return None


def cmd_get(args) -> dict:
    from .net import PirClient

    async def go():
        async with PirClient([args.s0, args.s1], args.scheme) as client:
            scheme = client.scheme
            r = _randomness(args, scheme.randomness_bits)
            return scheme, await client.retrieve(args.index, r)

    scheme, tr = asyncio.run(go())
    return {"scheme": scheme.name, "n": scheme.n, "bit": tr.output, "transcript": tr.to_dict()}


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="seed for all randomness (default: fresh, recorded)")
    common.add_argument("--json", action="store_true", help="JSON output for commands that default to CSV")
    common.add_argument("--out", help="write the artifact here instead of stdout")

    parser = argparse.ArgumentParser(prog="pir", description="Two-server PIR schemes, smooth codes and their bounds.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    def scheme_args(p, required=True):
        p.add_argument("--scheme", choices=sorted(SCHEMES), required=required)
        p.add_argument("--n", type=int)

    def db_args(p):
        p.add_argument("--db", help="database file (text or packed bits)")
        p.add_argument("--x", type=_bits, help="database as a bit string")

    p = add("run", cmd_run, "run one protocol instance locally")
    scheme_args(p)
    db_args(p)
    p.add_argument("--index", type=_index, required=True)
    p.add_argument("--randomness", type=_bits)

    p = add("audit", cmd_audit, "exact privacy audit of the query distributions")
    scheme_args(p)
    p.add_argument("--server", type=int, choices=(0, 1))
    p.add_argument("--i-a", type=_index)
    p.add_argument("--i-b", type=_index)

    p = add("codegen", cmd_codegen, "write the smooth code derived from a scheme")
    scheme_args(p)

    p = add("ldc-trial", cmd_ldc_trial, "local decoding under corruption")
    p.add_argument("--code")
    scheme_args(p, required=False)
    p.add_argument("--x", type=_bits)
    p.add_argument("--index", type=_index)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--model", choices=CORRUPTION_MODELS, default="random")
    p.add_argument("--trials", type=int, default=1000)

    p = add("qdecode", cmd_qdecode, "decode f(a0, a1) from one superposed copy")
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--f", required=True, help="truth table in hex, bit k = f at index w*2^b + a")
    p.add_argument("--a0", required=True)
    p.add_argument("--a1", required=True)

    p = add("reduce", cmd_reduce, "one-query quantum decoder and random access code sieve")
    p.add_argument("--code")
    scheme_args(p, required=False)
    p.add_argument("--x", type=_bits)
    p.add_argument("--index", type=_index, required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--r", type=int, help="a single randomness value, 0-based")
    group.add_argument("--all-r", action="store_true")
    p.add_argument("--copies", type=int)

    p = add("bound", cmd_bound, "evaluate a lower-bound formula")
    p.add_argument("--formula", choices=FORMULAS, required=True)
    p.add_argument("--params", type=_params, default={})

    add("bound-table", cmd_bound_table, "CSV sweep of all bound formulas")

    p = add("serve", cmd_serve, "run a server")
    p.add_argument("--scheme", choices=sorted(SCHEMES), required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--n", type=int, help="bit count, needed for packed-bit database files")
    p.add_argument("--listen", default="127.0.0.1:0")

    p = add("get", cmd_get, "retrieve one bit from two servers")
    p.add_argument("--index", type=_index, required=True)
    p.add_argument("--s0", required=True)
    p.add_argument("--s1", required=True)
    p.add_argument("--scheme", choices=sorted(SCHEMES))
    p.add_argument("--randomness", type=_bits)
    return parser


def render(result) -> str:
    if isinstance(result, str):
        return result
    return json.dumps({"schema": SCHEMA, **result}, indent=2, sort_keys=False) + "\n"


def _manifest(args, argv, seed, text: str, started: str) -> dict:
    params = {k: (bits_to_str(v) if isinstance(v, np.ndarray) else v) for k, v in vars(args).items() if k not in ("func", "rng")}
    return {
        "schema": SCHEMA,
        "subcommand": args.command,
        "argv": list(argv),
        "parameters": params,
        "seed": seed,
        "version": __version__,
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "output_sha256": hashlib.sha256(text.encode()).hexdigest(),
    }


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    logging.basicConfig(level=logging.WARNING, format="pir: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    seed = args.seed if args.seed is not None else _fresh_seed()
    args.rng = np.random.default_rng(seed)
    try:
        result = args.func(args)
    except PirError as exc:
        print(f"pir {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"pir {args.command}: error: {exc}", file=sys.stderr)
        return 1
    if result is None:
        return 0
    if isinstance(result, dict) and args.command in ("run", "ldc-trial", "reduce", "get"):
        result = {**result, "seed": seed}
    text = render(result)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        with open(args.out + ".manifest.json", "w", encoding="utf-8") as fh:
            json.dump(_manifest(args, argv, seed, text, started), fh, indent=2)
            fh.write("\n")
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
