"""Command-line front end.

Verbs::

    secrecybc validate --spec SPEC
    secrecybc region --spec SPEC --experiment EXP --out TABLE
    secrecybc simulate --spec SPEC --experiment EXP --out TABLE
    secrecybc export-plotdata --in TABLE --kind {region,simulate} --out LONG [--figure PNG]

Exit codes: 0 success, 1 validation failure, 2 parse error, 3 budget
refusal, 4 numerical inconsistency.  Tables are tab-separated with a header
row; every float is written with 9 significant digits.
"""

import argparse
import math
import os
import sys
import tempfile

import numpy as np

from . import rng as _rng
from .documents import (
    load_channel,
    load_experiment,
    parse_chain,
    parse_optimizer,
    read_text,
)
from .equivocation import (
    all_subsets,
    exact_equivocation,
    mc_equivocation,
    message_rates,
    normalize_subset,
    wiretapper_subcode_error,
)
from .errors import DocumentError, SecrecyError, ValidationError
from .region import (
    maximize_weighted_sum,
    randomization_rates,
    rate_tuple,
    simplex_weights,
    trace_boundary,
)
from .wiretap_sim import DEFAULT_BUDGET, CodeParams, generate_codebooks, run_replicate

DELIM = "\t"


def fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v == 0:
        return "0"
    return f"{v:.9g}"


def render_table(header, rows):
    lines = [DELIM.join(header)]
    lines += [DELIM.join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _atomic(path, write):
    """Call ``write(tmp_path)`` then move the result over ``path``."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.splitext(path)[1])
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text(path, text):
    def w(tmp):
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)

    _atomic(path, w)


def _load_spec(path):
    spec, diags = load_channel(path)
    if diags:
        raise ValidationError(f"{path}: invalid channel spec", diags)
    return spec


def _load_exp(args, modes):
    exp = load_experiment(args.experiment)
    if exp["mode"] not in modes:
        raise DocumentError(f"{args.experiment}: mode {exp['mode']!r} does not fit this command (expected {' or '.join(modes)})")
    if args.seed is not None:
        exp["seed"] = args.seed
    if args.budget_cap is not None:
        exp["budget_cap"] = args.budget_cap
    if exp["budget_cap"] is None:
        exp["budget_cap"] = DEFAULT_BUDGET
    return exp


def cmd_validate(args):
    _, diags = load_channel(args.spec)
    for d in diags:
        print(f"{args.spec}: {d}", file=sys.stderr)
    return 1 if diags else 0


def cmd_region(args):
    spec = _load_spec(args.spec)
    exp = _load_exp(args, ("region",))
    opts = parse_optimizer(exp["optimizer"], exp["seed"], args.threads)
    K = spec.k_receivers
    weights = exp.get("weights") or simplex_weights(K, exp["weight_steps"])
    samples = trace_boundary(spec, weights, opts)
    header = [f"w_{k}" for k in range(1, K + 1)]
    header += [f"R_{k}" for k in range(1, K + 1)]
    header += [f"Rp_{k}" for k in range(1, K + 1)]
    header += ["value"]
    rows = []
    for s in samples:
        rp = randomization_rates(s.chain, spec, exp["tau"])
        rows.append(list(s.weights) + list(s.rates) + list(rp) + [s.value])
    write_text(args.out, render_table(header, rows))
    return 0


def _subset_name(S):
    return "-".join(str(k) for k in S)


def _simulation_setup(spec, exp, threads):
    if "chain" in exp:
        chain = parse_chain(exp["chain"])
        bad = chain.problems()
        if bad:
            raise ValidationError("invalid chain", bad)
    else:
        opts = parse_optimizer(exp["optimizer"], exp["seed"], threads)
        chain = maximize_weighted_sum(spec, exp["chain_weights"], opts).chain
    K = spec.k_receivers
    if chain.k_layers != K or chain.sizes[0] != spec.x_size:
        raise ValidationError(f"chain has {chain.k_layers} layers over |X| = {chain.sizes[0]}; spec needs {K} layers over |X| = {spec.x_size}")
    if "R" in exp:
        R, Rp = exp["R"], exp["R_prime"]
        if len(R) != K or len(Rp) != K:
            raise ValidationError(f"rates.R and rates.R_prime need {K} entries")
    else:
        s = exp["rate_scale"]
        R = [s * r for r in rate_tuple(chain, spec)]
        Rp = [s * r for r in randomization_rates(chain, spec, exp["tau"])]
    return chain, R, Rp


def cmd_simulate(args):
    spec = _load_spec(args.spec)
    exp = _load_exp(args, ("simulate", "equivocation"))
    K = spec.k_receivers
    chain, R, Rp = _simulation_setup(spec, exp, args.threads)
    seed, cap = exp["seed"], exp["budget_cap"]
    plist = [CodeParams(n, R, Rp, seed=seed, budget_cap=cap) for n in exp["n"]]
    for p in plist:
        p.check_budget()

    do_pe = exp["mode"] == "simulate"
    eq = exp.get("equivocation")
    subsets = []
    if eq is not None:
        subsets = [normalize_subset(s, K) for s in (eq["subsets"] or all_subsets(K))]
    wt = exp["wiretap_trials"]
    ks = range(1, K + 1)

    header = ["n", "replicate"] + [f"L_{k}" for k in ks] + [f"Lp_{k}" for k in ks]
    if do_pe:
        header += [f"pe_{k}" for k in ks] + [f"pe_se_{k}" for k in ks]
    for S in subsets:
        name = _subset_name(S)
        header += [f"re_{name}", f"gap_{name}", f"re_se_{name}"]
    if wt:
        header += [f"lambda_{k}" for k in ks]

    rows = []
    for p in plist:
        ref = message_rates(p)
        for m in range(exp["codebooks"]):
            row = [p.n, m] + list(p.message_counts) + list(p.subcode_sizes)
            if do_pe:
                T = exp["trials"]
                errs = run_replicate(spec, chain, p, T, m, exp["decoder"], exp["epsilon"])
                pe = [e / T for e in errs]
                row += pe + [math.sqrt(q * (1 - q) / T) for q in pe]
            if subsets or wt:
                book = generate_codebooks(chain, p, m)
            for si, S in enumerate(subsets):
                if eq["method"] == "exact":
                    val, se = exact_equivocation(book, spec, S, cap), 0.0
                else:
                    gen = _rng.substream(seed, _rng.EQUIVOCATION, p.n, m, si)
                    est = mc_equivocation(book, spec, S, eq["samples"], gen)
                    val, se = est.value, est.stderr
                gap = sum(ref[k - 1] for k in S) - val
                row += [val, gap, se]
            if wt:
                for k in ks:
                    gen = _rng.substream(seed, _rng.WIRETAP, p.n, m, k)
                    row.append(wiretapper_subcode_error(book, spec, k, wt, gen).mean_error)
            rows.append(row)
    write_text(args.out, render_table(header, rows))
    return 0


def read_table(path):
    lines = read_text(path).splitlines()
    if not lines:
        raise DocumentError(f"{path}: empty table")
    header = lines[0].split(DELIM)
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(DELIM)
        if len(cells) != len(header):
            raise DocumentError(f"{path} line {i}: {len(cells)} cells, header has {len(header)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise DocumentError(f"{path} line {i}: non-numeric cell") from None
    return header, np.array(rows).reshape(len(rows), len(header))


def region_long(header, data):
    """``(R_k, weight index, R_k)`` and ``(Rp_k, weight index, Rp_k)`` rows."""
    if not header or header[0] != "w_1" or "value" not in header:
        raise DocumentError("schema mismatch: not a region table (expected w_1 ... value columns)")
    cols = [c for c in header if c.startswith("R_") or c.startswith("Rp_")]
    out = []
    for c in cols:
        j = header.index(c)
        out += [(c, i, data[i, j]) for i in range(data.shape[0])]
    return out


def simulate_long(header, data):
    """Median over replicates of every pe/gap/lambda column, against ``n``."""
    if header[:2] != ["n", "replicate"]:
        raise DocumentError("schema mismatch: not a simulate table (expected n, replicate columns)")
    cols = [c for c in header if c.startswith(("pe_", "gap_", "lambda_")) and not c.startswith("pe_se_")]
    ns = sorted(set(data[:, 0].tolist()))
    out = []
    for c in cols:
        j = header.index(c)
        for n in ns:
            sel = data[:, 0] == n
            out.append((c, int(n), float(np.median(data[sel, j]))))
    return out


def cmd_export(args):
    header, data = read_table(args.inp)
    long = region_long(header, data) if args.kind == "region" else simulate_long(header, data)
    write_text(args.out, render_table(["series", "x", "y"], long))
    if args.figure:
        from .plotting import plot_series

        xlabel = "weight index" if args.kind == "region" else "n"
        _atomic(args.figure, lambda tmp: plot_series(long, tmp, xlabel=xlabel, ylabel="bits per use" if args.kind == "region" else "median"))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="secrecybc", description="Secrecy rate regions and random-coding simulations for degraded broadcast channels with a wiretapper.")
    sub = ap.add_subparsers(dest="verb", required=True)

    v = sub.add_parser("validate", help="check a channel spec document")
    v.add_argument("--spec", required=True)
    v.set_defaults(func=cmd_validate)

    for name, func, help_ in (
        ("region", cmd_region, "trace the secrecy rate region boundary"),
        ("simulate", cmd_simulate, "error and equivocation simulation"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--spec", required=True)
        p.add_argument("--experiment", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, help="overrides the document seed")
        p.add_argument("--budget-cap", type=int, dest="budget_cap")
        p.add_argument("--threads", type=int, default=1)
        p.set_defaults(func=func)

    e = sub.add_parser("export-plotdata", help="reshape a result table to (series, x, y) rows")
    e.add_argument("--in", required=True, dest="inp")
    e.add_argument("--kind", required=True, choices=("region", "simulate"))
    e.add_argument("--out", required=True)
    e.add_argument("--figure", help="also render a PNG")
    e.set_defaults(func=cmd_export)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except SecrecyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for d in getattr(exc, "diagnostics", ()):
            print(f"  {d}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
