"""Reproducible experiment runner.

Configs are flat ``key = value`` text files with dotted keys, e.g.::

    experiment = attack
    scheme.name = hash-and-sign
    scheme.k = 1
    scheme.ell = 6
    scheme.n = 8
    attack.profile = corollary
    trials = 200
    seed = 1

Usage::

    otslab run cfg.txt [--seed S] [--jobs J] [--out PATH] [--format json|csv]
    otslab sweep cfg.txt --axis scheme.k --values 1,2 [--out PATH]

Exit codes: 0 on completion (whatever the attack outcome), 2 on a config
error or unknown scheme, 3 when the exact sampler runs out of capacity
and no fallback is configured.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from fractions import Fraction

from .combinatorics import (
    cross_intersecting_check,
    family_bound_search,
    half_binom,
    max_family_construct,
    max_family_exhaustive,
)
from .forge.core import CapacityError, default_params, imperfect_params
from .game import (
    ForgeAdversary,
    GameStats,
    NullAdversary,
    ReplayAdversary,
    _play,
    brute_force_family,
    hybrid_experiments,
)
from .oracle import IdealCipher, RandomPermutation
from .primitives import hardness_grid
from .runner import chunked, map_trials, trial_seed, wilson
from .schemes import completeness_check, make_scheme

EXPERIMENTS = ("attack", "hybrid", "game", "lemma-search", "primitives", "scheme-demo")
PROFILES = ("corollary", "custom", "imperfect", "cipher", "permutation")
DEFAULTS = {"trials": "100", "seed": "0", "jobs": "1", "batch": "100"}


class ConfigError(ValueError):
    pass


class UnknownScheme(ConfigError):
    pass


# -- config ----------------------------------------------------------------------


def parse_config(text: str) -> dict[str, str]:
    cfg: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"line {lineno}: expected key = value")
        cfg[key.strip()] = value.strip()
    return cfg


def load_config(path: str) -> dict[str, str]:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc


def _int(cfg, key, default=None, lo=None):
    raw = cfg.get(key, DEFAULTS.get(key, default))
    if raw is None:
        raise ConfigError(f"missing {key}")
    try:
        val = int(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {raw!r}") from None
    if lo is not None and val < lo:
        raise ConfigError(f"{key} must be >= {lo}")
    return val


def _ints(cfg, key, default):
    raw = cfg.get(key)
    if raw is None:
        return default
    try:
        return tuple(int(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{key} must be a comma-separated list of integers") from None


def _fraction(cfg, key):
    try:
        return Fraction(cfg[key])
    except KeyError:
        raise ConfigError(f"missing {key}") from None
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{key} must be a number or fraction") from None


def build_scheme(cfg):
    params = {k[len("scheme."):]: v for k, v in cfg.items() if k.startswith("scheme.")}
    name = params.pop("name", None)
    if name is None:
        raise ConfigError("missing scheme.name")
    try:
        return make_scheme(name, **params)
    except KeyError as exc:
        if exc.args and str(exc.args[0]).startswith("unknown scheme"):
            raise UnknownScheme(exc.args[0]) from None
        raise ConfigError(f"scheme {name!r} needs parameter {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(f"bad scheme parameters: {exc}") from None


def scheme_params(cfg) -> dict:
    return {k[len("scheme."):]: v for k, v in sorted(cfg.items()) if k.startswith("scheme.") and k != "scheme.name"}


def attack_params(cfg, scheme):
    profile = cfg.get("attack.profile", "corollary")
    if profile not in PROFILES:
        raise ConfigError(f"attack.profile must be one of {', '.join(PROFILES)}")
    overrides = {}
    if "attack.backend" in cfg:
        if cfg["attack.backend"] not in ("exact", "mc", "auto"):
            raise ConfigError("attack.backend must be exact, mc or auto")
        overrides["backend"] = cfg["attack.backend"]
    for key in ("branch_cap", "mc_samples", "rejection_budget"):
        if f"attack.{key}" in cfg:
            overrides[key] = _int(cfg, f"attack.{key}", lo=1)
    kind = scheme.oracle_kind
    try:
        if profile == "imperfect":
            if not scheme.randomized_verifier:
                raise ConfigError("the imperfect profile needs a randomized verifier")
            return imperfect_params(
                scheme,
                max_N=_int(cfg, "attack.max_N", 32, lo=2),
                max_verify_runs=_int(cfg, "attack.max_verify_runs", 100, lo=1),
                max_test_runs=_int(cfg, "attack.max_test_runs", 1000, lo=1),
                **overrides,
            )
        if profile == "cipher":
            if not isinstance(kind, IdealCipher):
                raise ConfigError("the cipher profile needs scheme.primitive = ic")
            return None
        if profile == "permutation":
            if not isinstance(kind, RandomPermutation):
                raise ConfigError("the permutation profile needs scheme.primitive = rp")
            return None
        if isinstance(kind, (IdealCipher, RandomPermutation)):
            raise ConfigError(f"use the cipher or permutation profile for a {kind.name} scheme")
        if profile == "custom":
            return default_params(
                scheme, profile="custom", lam=_fraction(cfg, "attack.lambda"), delta=_fraction(cfg, "attack.delta"), **overrides
            )
        return default_params(scheme, **overrides)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def _params_record(params) -> dict:
    if params is None:
        return {}
    return {
        "q": params.q,
        "n": params.n,
        "N": params.N,
        "lambda": str(params.lam),
        "delta": str(params.delta),
        "epsilon": str(params.epsilon),
        "M": params.M,
        "queryBound": params.query_bound,
        "backend": params.backend,
        "profile": params.profile,
        "caps": [list(c) for c in params.caps],
    }


# -- experiments -----------------------------------------------------------------


def _result(cfg, experiment, scheme_name, params, trials, successes, max_queries, seed, extra=None):
    lo, hi = wilson(successes, trials)
    rate = successes / trials if trials else 0.0
    out = {
        "experiment": experiment,
        "scheme": scheme_name,
        "params": params,
        "trials": trials,
        "successes": successes,
        "rate": rate,
        "successRate": rate,
        "ci95": [lo, hi],
        "maxQueries": max_queries,
        "seed": seed,
        "wallTimeMs": None,
    }
    if extra:
        out.update(extra)
    return out


def _say(log, text):
    if log is not None:
        print(text, file=log)


def _game_trials(scheme, adversary, trials, seed, jobs, batch, budget, log):
    seeds = [trial_seed(seed, i, "game") for i in range(trials)]
    results = []
    for chunk in chunked(seeds, batch):
        results.extend(map_trials(_play, [(scheme, adversary, s, budget) for s in chunk], jobs))
        done = len(results)
        wins = sum(r.success for r in results)
        _say(log, f"[{done}/{trials}] successes={wins} rate={wins / done:.4f}")
    return GameStats.from_results(results)


def run_attack(cfg, seed, jobs, log):
    scheme = build_scheme(cfg)
    params = attack_params(cfg, scheme)
    trials = _int(cfg, "trials", lo=1)
    stats = _game_trials(scheme, ForgeAdversary(params), trials, seed, jobs, _int(cfg, "batch", lo=1), None, log)
    rec = _params_record(params)
    rec["scheme"] = scheme_params(cfg)
    rec["q"] = scheme.budgets.total
    extra = {"violations": stats.violations}
    if params is not None:
        extra["withinQueryBound"] = stats.max_queries <= params.query_bound
    return _result(cfg, "attack", scheme.name, rec, trials, stats.successes, stats.max_queries, seed, extra)


_ADVERSARIES = {"null": NullAdversary, "replay": ReplayAdversary}


def run_game(cfg, seed, jobs, log):
    scheme = build_scheme(cfg)
    trials = _int(cfg, "trials", lo=1)
    name = cfg.get("game.adversary", "brute-force")
    budget = None
    T = None
    if name == "forge":
        adversary = ForgeAdversary(attack_params(cfg, scheme))
    elif name in _ADVERSARIES:
        adversary = _ADVERSARIES[name]()
    elif name == "brute-force":
        T = _int(cfg, "game.T", lo=0)
        try:
            adversary = brute_force_family(scheme)(T)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        budget = T
    else:
        raise ConfigError(f"unknown adversary {name!r}")
    stats = _game_trials(scheme, adversary, trials, seed, jobs, _int(cfg, "batch", lo=1), budget, log)
    rec = {"scheme": scheme_params(cfg), "q": scheme.budgets.total, "adversary": name, "T": T}
    extra = {"violations": stats.violations, "truncated": stats.truncated}
    return _result(cfg, "game", scheme.name, rec, trials, stats.successes, stats.max_queries, seed, extra)


def run_hybrid(cfg, seed, jobs, log):
    scheme = build_scheme(cfg)
    params = attack_params(cfg, scheme)
    if params is None or params.profile == "imperfect":
        raise ConfigError("hybrid experiments use the corollary or custom profile")
    trials = _int(cfg, "trials", lo=1)
    hybrids = _ints(cfg, "hybrid.indices", (0, 1, 2, 3))
    if not hybrids or any(h not in (0, 1, 2, 3) for h in hybrids):
        raise ConfigError("hybrid.indices must list values from 0..3")
    full = cfg.get("hybrid.full", "0") in ("1", "true", "yes")
    reports = hybrid_experiments(scheme, hybrids, params, trials, seed, jobs, full)
    for h in hybrids:
        _say(log, f"[H{h}] trials={trials} freq_E={reports[h].freq_E:.4f} freq_B={reports[h].freq_B:.4f}")
    rec = _params_record(params)
    rec["scheme"] = scheme_params(cfg)
    rec["hybrids"] = list(hybrids)
    head = reports[hybrids[0]]
    detail = {
        f"H{h}": {"freqE": r.freq_E, "freqB": r.freq_B, "E": r.counts["E"], "B": r.counts["B"]}
        for h, r in sorted(reports.items())
    }
    if 0 in reports and 1 in reports:
        detail["couplingMismatches"] = sum(a != b for a, b in zip(reports[0].indicators, reports[1].indicators))
    max_q = max((r.step4_distinct for rep in reports.values() for r in rep.records), default=0)
    return _result(cfg, "hybrid", scheme.name, rec, trials, head.counts["E"], max_q, seed, {"hybrids": detail})


def run_lemma_search(cfg, seed, jobs, log):
    q = _int(cfg, "lemma.q", lo=1)
    mode = cfg.get("lemma.mode", "random")
    bound = half_binom(q)
    if mode == "exhaustive":
        if q > 3:
            raise ConfigError("exhaustive search is limited to q <= 3")
        best, trials, violations = max_family_exhaustive(q), 1, 0
    elif mode == "construct":
        fam = max_family_construct(q)
        check = cross_intersecting_check(fam)
        best, trials, violations = len(fam.pairs), 1, int(not check.ok)
    elif mode == "random":
        if q > 6:
            raise ConfigError("random search is limited to q <= 6")
        trials = _int(cfg, "trials", lo=1)
        res = family_bound_search(q, trials, seed)
        best, violations = res.best_K, int(res.violated)
    else:
        raise ConfigError("lemma.mode must be exhaustive, construct or random")
    _say(log, f"[lemma q={q} mode={mode}] best K={best} bound={bound}")
    rec = {"q": q, "mode": mode, "bound": bound}
    extra = {"bestK": best, "violations": violations}
    # a success is a search that stays within the bound
    return _result(cfg, "lemma-search", "", rec, 1, int(not violations and best <= bound), 0, seed, extra)


def run_primitives(cfg, seed, jobs, log):
    trials = _int(cfg, "trials", lo=1)
    ells = _ints(cfg, "primitives.ells", (8, 12))
    budgets = _ints(cfg, "primitives.budgets", (0, 4, 16))
    try:
        grid = hardness_grid(trials, seed, ells=ells, budgets=budgets)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cells = []
    for r in grid:
        _say(log, f"[{r.kind} ell={r.ell} T={r.T}] value={r.value:.5f} bound={r.bound:.5f} within={r.within}")
        cells.append({"kind": r.kind, "ell": r.ell, "T": r.T, "value": r.value, "bound": r.bound, "within": r.within})
    rec = {"ells": list(ells), "budgets": list(budgets), "trialsPerCell": trials}
    ok = sum(c["within"] for c in cells)
    return _result(cfg, "primitives", "", rec, len(cells), ok, max(budgets, default=0), seed, {"grid": cells})


def run_scheme_demo(cfg, seed, jobs, log):
    scheme = build_scheme(cfg)
    trials = _int(cfg, "trials", lo=1)
    res = completeness_check(scheme, trials, seed)
    passed = trials if res.passed else res.counterexample["trial"]
    _say(log, f"[completeness] {scheme.name} passed={res.passed} trials={trials}")
    rec = {"scheme": scheme_params(cfg), "q": scheme.budgets.total, "descriptor": scheme.descriptor().strip()}
    extra = {"complete": res.passed}
    if hasattr(scheme, "security_report"):
        extra["security"] = scheme.security_report()
    return _result(cfg, "scheme-demo", scheme.name, rec, trials, passed, scheme.budgets.total, seed, extra)


RUNNERS = {
    "attack": run_attack,
    "hybrid": run_hybrid,
    "game": run_game,
    "lemma-search": run_lemma_search,
    "primitives": run_primitives,
    "scheme-demo": run_scheme_demo,
}


def execute(cfg: dict, seed: int | None = None, jobs: int | None = None, log=None, record_time: bool = False) -> dict:
    """Run the experiment described by ``cfg`` and return its result record."""
    experiment = cfg.get("experiment")
    if experiment not in RUNNERS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
    seed = _int(cfg, "seed", lo=0) if seed is None else seed
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    jobs = _int(cfg, "jobs", lo=1) if jobs is None else max(1, jobs)
    start = time.perf_counter()
    result = RUNNERS[experiment](cfg, seed, jobs, log)
    if record_time:
        result["wallTimeMs"] = round((time.perf_counter() - start) * 1000, 3)
    return result


# -- output ----------------------------------------------------------------------

CSV_FIELDS = ["experiment", "scheme", "q", "trials", "successes", "rate", "lo95", "hi95", "maxQueries", "seed", "wallTimeMs"]


def _csv_row(result: dict) -> dict:
    params = result["params"]
    return {
        "experiment": result["experiment"],
        "scheme": result["scheme"],
        "q": params.get("q", ""),
        "trials": result["trials"],
        "successes": result["successes"],
        "rate": f"{result['rate']:.6f}",
        "lo95": f"{result['ci95'][0]:.6f}",
        "hi95": f"{result['ci95'][1]:.6f}",
        "maxQueries": result["maxQueries"],
        "seed": result["seed"],
        "wallTimeMs": "" if result["wallTimeMs"] is None else result["wallTimeMs"],
    }


def render(results: list[dict], fmt: str, axis: str | None = None, values=None) -> str:
    if fmt == "json":
        body = results[0] if axis is None else {"axis": axis, "rows": [dict(r, axisValue=v) for r, v in zip(results, values)]}
        return json.dumps(body, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    fields = (["axis", "value"] if axis else []) + CSV_FIELDS
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for i, r in enumerate(results):
        row = _csv_row(r)
        if axis:
            row["axis"], row["value"] = axis, values[i]
        w.writerow(row)
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="otslab", description="One-time signature attack experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("--out")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--record-time", action="store_true", help="fill wallTimeMs (breaks byte-identical reruns)")
    common.add_argument("--quiet", action="store_true", help="suppress per-batch summary lines")
    sub.add_parser("run", parents=[common], help="run one experiment")
    sw = sub.add_parser("sweep", parents=[common], help="run one experiment per value of a numeric key")
    sw.add_argument("--axis", required=True)
    sw.add_argument("--values", required=True)
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    log = None if args.quiet else sys.stderr
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            result = execute(cfg, args.seed, args.jobs, log, args.record_time)
            text = render([result], args.format or "json")
        else:
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            if not values:
                raise ConfigError("--values is empty")
            for v in values:
                try:
                    float(Fraction(v))
                except (ValueError, ZeroDivisionError):
                    raise ConfigError(f"sweep axis {args.axis} needs numeric values, got {v!r}") from None
            results = []
            for v in values:
                _say(log, f"== {args.axis} = {v}")
                results.append(execute(dict(cfg, **{args.axis: v}), args.seed, args.jobs, log, args.record_time))
            text = render(results, args.format or "csv", args.axis, values)
    except UnknownScheme as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"error: sampler capacity exceeded: {exc}", file=sys.stderr)
        return 3
    _emit(text, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
