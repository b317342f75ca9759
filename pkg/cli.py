#!/usr/bin/env python3
"""
Z-Channel Toolkit command line
Validate codes, count free points, bound and search F-optimal codes, build and check
two-stage feedback schemes, and reproduce the published tables
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from artifact_store import ArtifactStore
from config import Budget, load_settings
from fsearch import exact_search, heuristic_search, nested_family, tradeoff_table
from lpbound import BoundStatus, LayerRule, f_upper_bound, size_bound
from reproduction import ALL_TABLES, reproduce
from twostage import (SymmetricProfile, build_symmetric, count_messages, decode, dp_optimize,
                      encode, general_optimize, load_scheme, save_scheme, verify_exhaustive)
from zcore import (Word, ZChannelError, free_points, read_code, validate_code, weight_distribution,
                   word_to_string, write_code)

logger = logging.getLogger(__name__)


def emit(args, text: str, payload: Optional[Dict[str, Any]] = None, tsv: Optional[str] = None):
    """Write the report in the requested format to standard output"""
    if args.format == 'json' and payload is not None:
        sys.stdout.write(json.dumps(payload, indent=2) + '\n')
    elif args.format == 'tsv' and tsv is not None:
        sys.stdout.write(tsv)
    else:
        sys.stdout.write(text if text.endswith('\n') else text + '\n')


def store_for(args) -> ArtifactStore:
    return ArtifactStore(args.cache_dir) if args.cache_dir else ArtifactStore()


def cmd_validate(args) -> int:
    code = read_code(args.code_file)
    report = validate_code(code)
    mark = '✅' if report.valid else '❌'
    payload = {'n': code.n, 'M': code.size, 'valid': report.valid, 'min_distance': report.min_distance,
               'violating_pair': [word_to_string(w, code.n) for w in report.violating_pair]
               if report.violating_pair else None}
    emit(args, f"{mark} ({code.n},{code.size}) code: {report.describe(code.n)}", payload,
         f"{code.n}\t{code.size}\t{int(report.valid)}\t{report.min_distance}\n")
    return 0 if report.valid else 1


def cmd_free_points(args) -> int:
    code = read_code(args.code_file)
    fp = free_points(code)
    points = [word_to_string(p, code.n) for p in fp.sorted_points()]
    text = f"F = {fp.count} for the ({code.n},{code.size}) code, weight distribution {weight_distribution(code)}"
    if points:
        text += '\n' + '\n'.join(points)
    emit(args, text, {'n': code.n, 'M': code.size, 'F': fp.count, 'points': points},
         ''.join(p + '\n' for p in points))
    return 0


def cmd_bound(args) -> int:
    layer_rule = LayerRule(args.layer_rule)
    budget = Budget.parse(args.budget)
    store = store_for(args)
    oracle = store.oracle()
    if args.feasible:
        result = size_bound(args.n, args.t, oracle, budget, layer_rule)
        payload = {'n': args.n, 't': args.t, 'max_size': result.upper, 'complete': result.complete,
                   'distribution': list(result.distribution) if result.distribution else None}
        emit(args, f"M <= {result.upper} for n={args.n}, t={args.t}"
             + ('' if result.complete else ' (search cut by budget)'),
             payload, f"{args.n}\t{args.t}\t{result.upper}\t{int(result.complete)}\n")
        return 0
    if args.m is None:
        raise ZChannelError("bound needs --m unless --feasible is given")
    result = f_upper_bound(args.n, args.m, args.t, oracle, budget, layer_rule)
    if result.status is not BoundStatus.INCOMPLETE and args.t == 1 and layer_rule is LayerRule.SOUND:
        store.save_bound(result)
    store.flush()
    value = result.value if result.value is not None else result.status.value
    lines = [f"F_bar({args.n},{args.m},{args.t}) = {value}"]
    lines.extend(f"  optimal distribution {d}" for d in result.optimal_distributions)
    if args.trace:
        lines.extend(f"  {s.label}: {s.lhs} <= {s.rhs} (slack {s.slack})" for s in result.constraint_trace)
    payload = {'n': args.n, 'M': args.m, 't': args.t, 'status': result.status.value, 'F_bar': result.value,
               'optimal_distributions': [list(d.z) for d in result.optimal_distributions]}
    emit(args, '\n'.join(lines), payload, result.to_tsv())
    return 0


def cmd_cw(args) -> int:
    store = store_for(args)
    result = store.oracle().result(args.n, args.d, args.w)
    store.flush()
    kind = 'exact' if result.exact else 'bounds'
    emit(args, f"A({args.n},{args.d},{args.w}): {result.lower} <= A <= {result.upper} ({kind})",
         {'n': args.n, 'd': args.d, 'w': args.w, 'lower': result.lower, 'upper': result.upper,
          'exact': result.exact},
         f"{args.n}\t{args.d}\t{args.w}\t{result.lower}\t{result.upper}\t{int(result.exact)}\n")
    return 0


def cmd_search(args) -> int:
    settings = load_settings()
    store = store_for(args)
    if args.mode == 'exact':
        if args.m is None:
            raise ZChannelError("exact search needs --m")
        result = exact_search(args.n, args.m, 1, Budget.parse(args.budget) if args.budget else settings.exact_budget,
                              store.oracle())
        code = result.code
        summary = f"({args.n},{args.m}) {result.status.value}: F = {result.free_points}"
    elif args.mode == 'nested':
        family = nested_family(args.n, 1, Budget.parse(args.budget) if args.budget else settings.nested_budget,
                               oracle=store.oracle())
        code = family.chain[-1]
        summary = f"n={args.n} nested family {family.status.value}: F by size " + \
                  ', '.join(f"{m + 1}:{f}" for m, f in enumerate(family.free_points()))
        short = family.shortfalls()
        if short:
            summary += "\n❌ prefixes below the direct search: " + \
                       ', '.join(f"{M}:{F}<{exact_F}" for M, (F, exact_F) in short.items())
    else:
        if args.seed is None:
            raise ZChannelError("heuristic search needs an explicit --seed")
        result = heuristic_search(args.n, 1, args.target,
                                  Budget.parse(args.budget) if args.budget else settings.heuristic_budget, args.seed)
        store.save_heuristic(result)
        code = result.code
        summary = f"n={args.n} local search: size {code.size}, F = {result.free_points}"
        if args.target is not None:
            summary += f" (target {args.target} {'met' if code.size >= args.target else 'missed'})"
    store.flush()

    if code is None:
        emit(args, summary, {'summary': summary, 'code': None}, '')
        return 1
    if args.out:
        write_code(code, args.out)
    emit(args, summary + ('' if args.out else '\n' + '\n'.join(code.as_strings())),
         {'summary': summary, 'n': code.n, 'M': code.size, 'code': code.as_strings()},
         ''.join(w + '\n' for w in code.as_strings()))
    return 0


def cmd_tradeoff(args) -> int:
    store = store_for(args)
    budget = Budget.parse(args.budget) if args.budget else load_settings().exact_budget
    table = tradeoff_table(args.n, 1, budget, args.method, store=store)
    store.flush()
    rows = [(M, table.rows[M].F, table.rows[M].status.value) for M in table.sizes()]
    text = f"n={args.n} trade-off table\n" + '\n'.join(f"  M={M:<4d} F={F:<5d} {s}" for M, F, s in rows)
    emit(args, text, {'n': args.n, 'rows': [{'M': M, 'F': F, 'status': s} for M, F, s in rows]},
         'M\tF\tstatus\n' + ''.join(f"{M}\t{F}\t{s}\n" for M, F, s in rows))
    return 0


def _tables_for(store: ArtifactStore, n: int) -> Dict:
    tables = store.tradeoff_tables(range(1, n))
    for n2 in range(1, min(n, load_settings().table_build_max_n + 1)):
        if n2 not in tables:
            tables[n2] = tradeoff_table(n2, store=store)
    return tables


def cmd_twostage(args) -> int:
    store = store_for(args)
    if args.action == 'build':
        sizes = [int(s) for s in args.sizes.split(',')]
        table = store.load_tradeoff(args.n2) if store.has_tradeoff(args.n2) else tradeoff_table(args.n2, store=store)
        scheme = build_symmetric(SymmetricProfile.from_sizes(args.n1, args.n2, sizes, table), table)
        return _finish_scheme(args, scheme, store)
    if args.action == 'optimize':
        tables = _tables_for(store, args.n)
        if args.symmetric:
            dp = dp_optimize(args.n, 1, tables)
            scheme = build_symmetric(dp.profile, tables[dp.n2])
        else:
            if args.seed is None:
                raise ZChannelError("general optimization needs an explicit --seed")
            budget = Budget.parse(args.budget) if args.budget else load_settings().optimize_budget
            scheme = general_optimize(args.n, 1, tables, budget, args.seed, args.method)
        return _finish_scheme(args, scheme, store)

    scheme = load_scheme(args.scheme) if args.scheme.exists() else store.load_scheme(str(args.scheme))
    if args.action == 'encode':
        first, second = encode(scheme, args.message, Word.parse(args.feedback))
        emit(args, f"first {first}, second {second}",
             {'message': args.message, 'first': str(first), 'second': str(second)}, f"{first}\t{second}\n")
        return 0
    if args.action == 'decode':
        m = decode(scheme, Word.parse(args.word))
        emit(args, f"message {m}", {'word': args.word, 'message': m}, f"{m}\n")
        return 0
    report = verify_exhaustive(scheme, jobs=load_settings().jobs)
    mark = '✅' if report.passed else '❌'
    text = f"{mark} {count_messages(scheme)} messages, {report.cases} cases, {report.failures} failures"
    if report.first_failure:
        text += f"\n  first failure: {report.first_failure}"
    emit(args, text, report.to_dict(), f"{report.cases}\t{report.failures}\t{report.first_failure or ''}\n")
    return 0 if report.passed else 1


def _finish_scheme(args, scheme, store: ArtifactStore) -> int:
    report = verify_exhaustive(scheme, jobs=load_settings().jobs)
    if args.out:
        save_scheme(scheme, args.out)
    if args.name:
        store.save_scheme(scheme, args.name)
    mark = '✅' if report.passed else '❌'
    emit(args, f"{mark} {scheme.n1}+{scheme.n2} scheme with {count_messages(scheme)} messages"
               + (f" saved to {args.out}" if args.out else ''),
         {'n1': scheme.n1, 'n2': scheme.n2, 'messages': count_messages(scheme), 'verification': report.to_dict()},
         f"{scheme.n1}\t{scheme.n2}\t{count_messages(scheme)}\t{int(report.passed)}\n")
    return 0 if report.passed else 1


def cmd_reproduce(args) -> int:
    if args.seed is None:
        raise ZChannelError("reproduce runs seeded searches and needs an explicit --seed")
    scope = [s.strip() for s in args.tables.split(',') if s.strip()]
    budget = Budget.parse(args.budget) if args.budget is not None else Budget(seconds=600.0)
    report = reproduce(scope, budget, store_for(args), args.seed)
    emit(args, report.to_text(), json.loads(report.to_json()), report.to_tsv())
    return report.exit_code


def cmd_cache(args) -> int:
    store = store_for(args)
    if args.build_cw is not None:
        max_n = args.build_cw if args.build_cw > 0 else store.settings.cw_cache_max_n
        store.cw_cache.build(max_n=max_n, oracle=store.oracle())
        logger.info(f"Constant-weight cache built up to n={max_n}")
    names = store.listing()
    text = f"{store.root}: {len(names)} artifact(s)" + ''.join(f"\n  {name}" for name in names)
    emit(args, text, {'root': str(store.root), 'artifacts': names}, ''.join(name + '\n' for name in names))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='zchan', description="Z-channel codes and two-stage feedback schemes")
    parser.add_argument('--format', choices=['text', 'tsv', 'json'], default='text')
    parser.add_argument('--cache-dir', default=None, help="overrides ZCHAN_CACHE_DIR")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', action='store_true')
    verbosity.add_argument('--quiet', action='store_true')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('validate', help="check a zcode file")
    p.add_argument('code_file', type=Path)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser('free-points', help="list free points of a zcode file")
    p.add_argument('code_file', type=Path)
    p.set_defaults(func=cmd_free_points)

    p = sub.add_parser('bound', help="free-point upper bound")
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--m', type=int)
    p.add_argument('--t', type=int, default=1)
    p.add_argument('--layer-rule', choices=[m.value for m in LayerRule], default=LayerRule.SOUND.value)
    p.add_argument('--feasible', action='store_true', help="largest size the constraint system admits")
    p.add_argument('--trace', action='store_true', help="print the slack of every constraint")
    p.add_argument('--budget')
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser('cw', help="constant-weight code bounds A(n,d,w)")
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--d', type=int, default=4)
    p.add_argument('--w', type=int, required=True)
    p.set_defaults(func=cmd_cw)

    p = sub.add_parser('search', help="find codes")
    p.add_argument('mode', choices=['exact', 'nested', 'heuristic'])
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--m', type=int)
    p.add_argument('--target', type=int)
    p.add_argument('--budget')
    p.add_argument('--seed', type=int)
    p.add_argument('--out', type=Path)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser('tradeoff', help="maximal free points for every size")
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--method', choices=['auto', 'naive', 'exact', 'nested'], default='auto')
    p.add_argument('--budget')
    p.set_defaults(func=cmd_tradeoff)

    p = sub.add_parser('twostage', help="one-feedback transmission schemes")
    p.add_argument('action', choices=['build', 'optimize', 'encode', 'decode', 'verify'])
    p.add_argument('--n', type=int)
    p.add_argument('--n1', type=int)
    p.add_argument('--n2', type=int)
    p.add_argument('--sizes', help="per-weight sizes M_0,...,M_n1")
    p.add_argument('--symmetric', action='store_true')
    p.add_argument('--method', choices=['local', 'mip', 'both'], default='both')
    p.add_argument('--scheme', type=Path, help="scheme file, or the name of a cached scheme")
    p.add_argument('--message', type=int)
    p.add_argument('--feedback')
    p.add_argument('--word')
    p.add_argument('--budget')
    p.add_argument('--seed', type=int)
    p.add_argument('--out', type=Path)
    p.add_argument('--name', help="also keep the scheme in the cache under this name")
    p.set_defaults(func=cmd_twostage)

    p = sub.add_parser('cache', help="list cached artifacts")
    p.add_argument('--build-cw', type=int, nargs='?', const=0, default=None, metavar='MAX_N',
                   help="fill cw_cache.tsv up to MAX_N (default from settings)")
    p.set_defaults(func=cmd_cache)

    p = sub.add_parser('reproduce', help="recompute the published tables")
    p.add_argument('--tables', default=','.join(ALL_TABLES))
    p.add_argument('--budget')
    p.add_argument('--seed', type=int)
    p.set_defaults(func=cmd_reproduce)
    return parser


REQUIRED_OPTIONS = {
    ('twostage', 'build'): ['n1', 'n2', 'sizes'],
    ('twostage', 'optimize'): ['n'],
    ('twostage', 'encode'): ['scheme', 'message', 'feedback'],
    ('twostage', 'decode'): ['scheme', 'word'],
    ('twostage', 'verify'): ['scheme'],
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s', stream=sys.stderr)

    needed = REQUIRED_OPTIONS.get((args.command, getattr(args, 'action', None)), [])
    missing = [f"--{name}" for name in needed if getattr(args, name) is None]
    if missing:
        parser.error(f"{args.command} {args.action} needs {', '.join(missing)}")

    try:
        return args.func(args)
    except ZChannelError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"❌ {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
