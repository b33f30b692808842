"""``theonlab`` command line: catalog, sampling, density estimates, property tests, experiments.

Exit codes: 0 pass or estimate, 1 reject, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Dict, List, Optional, Sequence

from . import testlab as tl
from .experiments import REGISTRY, ExperimentError, ExperimentSpec, run_experiment
from .logic import FormulaSyntaxError, InterpretationError
from .relational import BudgetExceeded, ModelFormatError, dump_model, parse_model
from .theon import catalog as cat
from .theon.core import TheonError, load_theon
from .theon.expr import ExprError
from .theon.sampling import estimate_density, sample_models

EXIT_OK, EXIT_REJECT, EXIT_USAGE = 0, 1, 2

_INPUT_ERRORS = (cat.CatalogError, ModelFormatError, ExperimentError, TheonError, ExprError, FormulaSyntaxError,
                 InterpretationError, BudgetExceeded, FileNotFoundError, IsADirectoryError, ValueError)


class UsageError(Exception):
    pass


def _count(text: str) -> int:
    """Sample budgets accept ``2e7`` as well as ``20000000``."""
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a count: {text!r}") from None
    if v != int(v) or v < 1:
        raise argparse.ArgumentTypeError(f"not a positive integer: {text!r}")
    return int(v)


def resolve_seed(flag: Optional[int]) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("THEONLAB_SEED")
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"THEONLAB_SEED must be an integer, got {env!r}") from None


def load_theon_ref(ref: str):
    """A catalog reference ``name:k=v,...`` or a path to a theon JSON file."""
    if ref.endswith(".json") or os.path.sep in ref:
        return load_theon(ref)
    return cat.build_theon(ref)


def _sets(text: str) -> List[tuple]:
    """``"1,2;2,3"`` -> ``[(1, 2), (2, 3)]``."""
    out = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        try:
            out.append(tuple(int(v) for v in chunk.split(",")))
        except ValueError:
            raise UsageError(f"bad vertex set {chunk!r}") from None
    if not out:
        raise UsageError("empty list of vertex sets")
    return out


def _emit(report: dict) -> None:
    sys.stdout.write(json.dumps(report, sort_keys=True) + "\n")


def _base_report(command, params, seed, n_samples) -> dict:
    return {"schema": 1, "command": command, "params": params, "seed": seed, "n_samples": n_samples,
            "estimates": [], "oracle": [], "statistic": None, "p_value": None, "decision": "estimate"}


# --- subcommands ----------------------------------------------------------------

def cmd_list(args) -> int:
    data = cat.listing()
    data["experiments"] = [{"name": e.name, "params": ",".join(f"{k}={d}" for k, _, d in e.params),
                            "summary": e.summary} for e in REGISTRY.values()]
    if args.json:
        _emit(data)
        return EXIT_OK
    out = ["theories:"] + [f"  {n}" for n in data["theories"]]
    for section in ("theons", "interpretations", "experiments"):
        out.append(f"{section}:")
        for e in data[section]:
            sig = f"[{e['params']}]" if e["params"] else ""
            out.append(f"  {e['name']}{sig}  {e['summary']}")
    print("\n".join(out))
    return EXIT_OK


def cmd_sample(args) -> int:
    t = load_theon_ref(args.theon)
    seed = resolve_seed(args.seed)
    models = sample_models(t, args.n, args.count, seed)
    if args.json:
        _emit({"schema": 1, "command": "sample", "params": {"theon": args.theon, "n": args.n, "count": args.count},
               "seed": seed, "models": [dump_model(m) for m in models]})
    else:
        print("\n".join(dump_model(m) for m in models), end="")
    return EXIT_OK


def cmd_density(args) -> int:
    t = load_theon_ref(args.theon)
    seed = resolve_seed(args.seed)
    with open(args.model) as fh:
        m = parse_model(fh.read(), t.sig)
    lab, unl = estimate_density(t, m, args.samples, seed, threads=args.threads)
    r = _base_report("density", {"theon": args.theon, "model": args.model, "n": m.n}, seed, args.samples)
    r["estimates"] = [{"name": "labeled", "value": lab.value, "stderr": lab.stderr},
                      {"name": "unlabeled", "value": unl.value, "stderr": unl.stderr}]
    _emit(r)
    return EXIT_OK


PROPERTIES = ("independence", "rank", "weak-independence", "locality", "symmetric-locality", "clique-disc", "disc",
              "coupleability")


def _run_property(args, t, seed) -> tl.TestReport:
    prop, lvl = args.property, args.level
    kw = {"threads": args.threads}
    if prop in ("independence", "rank"):
        if lvl is None:
            raise UsageError(f"--level is required for {prop}")
        f = tl.independence_probe if prop == "independence" else tl.rank_probe
        return f(t, lvl, args.trials, seed, **kw)
    n = args.samples
    if prop == "weak-independence":
        if lvl is None:
            raise UsageError("--level is required for weak-independence")
        m = args.m if args.m is not None else max(t.max_arity, lvl + 1)
        return tl.weak_independence_test(t, lvl, m, n, bins=args.bins, seed=seed, alpha=args.alpha, **kw)
    if prop in ("locality", "symmetric-locality"):
        if not args.sets:
            raise UsageError(f"--sets is required for {prop}")
        mode = "labeled" if prop == "locality" else "symmetric"
        return tl.locality_test(t, _sets(args.sets), mode, n, seed, args.alpha, **kw)
    if prop == "clique-disc":
        if lvl is None:
            raise UsageError("--level is required for clique-disc")
        return tl.clique_disc_test(t, lvl, probes=args.probes, inner_samples=args.inner, seed=seed, n_samples=n,
                                   alpha=args.alpha, **kw)
    if prop == "disc":
        if not args.antichain:
            raise UsageError("--antichain is required for disc")
        return tl.disc_test(t, _sets(args.antichain), n, seed, edge=args.edge, **kw)
    return tl.coupleability_falsifier(t, n, args.max_size, seed, **kw)


def cmd_test(args) -> int:
    t = load_theon_ref(args.theon)
    seed = resolve_seed(args.seed)
    rep = _run_property(args, t, seed)
    params = {k: getattr(args, k) for k in ("property", "theon", "level", "m", "sets", "antichain", "trials",
                                            "bins", "alpha", "probes", "inner", "max_size", "edge")}
    n = args.trials if args.property in ("independence", "rank") else args.samples
    r = _base_report("test", {k: v for k, v in params.items() if v is not None}, seed, n)
    r.update(estimates=rep.estimates, statistic=rep.statistic, p_value=rep.p_value, decision=rep.decision,
             details={"test": rep.test, "config": rep.config, "evidence": rep.evidence, "details": rep.details})
    _emit(tl._clean(r))
    return EXIT_REJECT if rep.decision == "reject" else EXIT_OK


def _extra_params(extra: Sequence[str]) -> Dict[str, str]:
    """``--ell 1 --p 0.3`` or ``--ell=1`` -> ``{"ell": "1", "p": "0.3"}``."""
    out, i = {}, 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise UsageError(f"unexpected argument {tok!r}")
        key, eq, val = tok[2:].partition("=")
        if not eq:
            if i + 1 >= len(extra):
                raise UsageError(f"missing value for {tok}")
            val = extra[i + 1]
            i += 1
        out[key.replace("-", "_")] = val
        i += 1
    return out


def cmd_run(args, extra) -> int:
    if args.experiment not in REGISTRY:
        raise UsageError(f"unknown experiment {args.experiment!r}; known: {', '.join(REGISTRY)}")
    spec = ExperimentSpec(args.experiment, _extra_params(extra), seed=resolve_seed(args.seed), samples=args.samples,
                          threads=args.threads, alpha=args.alpha)
    r = run_experiment(spec)
    _emit(r)
    return EXIT_REJECT if r["decision"] == "reject" else EXIT_OK


# --- parser ----------------------------------------------------------------------

def _common(p, samples_default=100_000):
    p.add_argument("--seed", type=int, default=None, help="master seed (else $THEONLAB_SEED, else 0)")
    p.add_argument("--threads", type=int, default=None, help="worker threads; results do not depend on it")
    p.add_argument("--samples", type=_count, default=samples_default, help="Monte Carlo budget, e.g. 1e6")
    p.add_argument("--json", action="store_true", help="reports are always JSON; accepted for symmetry")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="theonlab", description="Sample theons and probe quasirandomness properties.")
    sub = ap.add_subparsers(dest="cmd", metavar="{list,sample,density,test,run}")
    sub.required = True

    p = sub.add_parser("list", help="catalog of theories, theons, interpretations and experiments")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("sample", help="print sampled models on [n]")
    p.add_argument("--theon", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("density", help="labelled and unlabelled density of a model file")
    p.add_argument("--theon", required=True)
    p.add_argument("--model", required=True)
    _common(p, 1_000_000)

    p = sub.add_parser("test", help="run one property falsifier")
    p.add_argument("--property", required=True, choices=PROPERTIES)
    p.add_argument("--theon", required=True)
    p.add_argument("--level", type=int, default=None, help="ell (or r for rank)")
    p.add_argument("--m", type=int, default=None, help="model size for weak-independence")
    p.add_argument("--sets", default=None, help='vertex sets, e.g. "1,2;2,3"')
    p.add_argument("--antichain", default=None, help='antichain for disc, e.g. "1,2"')
    p.add_argument("--edge", default="E")
    p.add_argument("--trials", type=_count, default=10_000)
    p.add_argument("--bins", type=int, default=4)
    p.add_argument("--probes", type=int, default=50)
    p.add_argument("--inner", type=_count, default=4000)
    p.add_argument("--max-size", dest="max_size", type=int, default=3)
    p.add_argument("--alpha", type=float, default=0.001)
    _common(p)

    p = sub.add_parser("run", help="run a registered experiment; extra --key value pairs are its parameters")
    p.add_argument("experiment")
    p.add_argument("--alpha", type=float, default=0.001)
    _common(p, None)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args, extra = ap.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if extra and args.cmd != "run":
        ap.print_usage(sys.stderr)
        print(f"theonlab: error: unrecognized arguments: {' '.join(extra)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.cmd == "list":
            return cmd_list(args)
        if args.cmd == "sample":
            return cmd_sample(args)
        if args.cmd == "density":
            return cmd_density(args)
        if args.cmd == "test":
            return cmd_test(args)
        return cmd_run(args, extra)
    except UsageError as exc:
        print(f"theonlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _INPUT_ERRORS as exc:
        print(f"theonlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
