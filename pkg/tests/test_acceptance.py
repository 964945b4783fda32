"""Acceptance suite: twelve desk-scale checks, one PASS/FAIL line each.

Run under pytest (``pytest tests/test_acceptance.py -s``) or directly
(``python3 tests/test_acceptance.py``) to print the summary lines.
"""

from __future__ import annotations

import functools
import json
import math
import random
import sys
import time
from collections import Counter
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from helpers import attack_state  # noqa: E402
from otslab import cli  # noqa: E402
from otslab.combinatorics import (  # noqa: E402
    cross_intersecting_check,
    family_bound_search,
    half_binom,
    max_family_construct,
    max_family_exhaustive,
)
from otslab.bits import Bits  # noqa: E402
from otslab.forge.bruteforce import brute_force_posterior  # noqa: E402
from otslab.forge.core import default_params, imperfect_params  # noqa: E402
from otslab.forge.exact import conditional_transcripts_exact  # noqa: E402
from otslab.forge.montecarlo import conditional_samples_mc  # noqa: E402
from otslab.game import (  # noqa: E402
    CollisionAdversary,
    ForgeAdversary,
    hybrid_experiments,
    imperfect_experiment,
    run_forgery_game,
)
from otslab.oracle import Plain  # noqa: E402
from otslab.primitives import hardness_grid  # noqa: E402
from otslab.schemes import AntichainScheme, CoinFlipScheme, HashAndSignScheme, LamportScheme, completeness_check  # noqa: E402

SEED = 20240601


def sigma(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n)


def report(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    capman = _CAPTURE.get("capsys")
    if capman is not None:
        with capman.disabled():
            print(line)
    else:
        print(line)


_CAPTURE: dict = {}


@pytest.fixture(autouse=True)
def _uncaptured(capsys):
    _CAPTURE["capsys"] = capsys
    yield
    _CAPTURE.pop("capsys", None)


# -- shared runs -----------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def headline_attack():
    scheme = HashAndSignScheme(1, 6, 8)
    params = default_params(scheme)
    start = time.perf_counter()
    stats = run_forgery_game(scheme, ForgeAdversary(params), 200, SEED)
    return scheme, params, stats, time.perf_counter() - start


# -- criteria --------------------------------------------------------------------


def criterion_1():
    _, params, stats, elapsed = headline_attack()
    n = stats.trials
    guarantee = 1 - float(params.lam + params.delta)
    floor = max(guarantee - 3 * sigma(guarantee, n), 0.90 - 3 * sigma(0.90, n))
    ok = stats.rate >= floor and elapsed < 120
    return ok, f"success {stats.successes}/{n} = {stats.rate:.3f} >= {floor:.3f}; {elapsed:.1f}s (< 120s)"


def criterion_2():
    _, params, stats, _ = headline_attack()
    worst = max(r.queries for r in stats.results)
    over = sum(r.queries > params.query_bound for r in stats.results)
    return over == 0, f"max distinct queries {worst} <= M+qN = {params.query_bound}; {over} trials over"


def criterion_3():
    scheme = HashAndSignScheme(2, 6, 8)
    params = default_params(scheme)
    start = time.perf_counter()
    rep = hybrid_experiments(scheme, (3,), params, 500, SEED)[3]
    elapsed = time.perf_counter() - start
    lam = float(params.lam)
    floor = 1 - lam - 3 * sigma(1 - lam, 500)
    ok = rep.freq_E >= floor and elapsed < 120
    return ok, f"H3 freq(union E) = {rep.freq_E:.3f} >= {floor:.3f} (lambda = {params.lam}); {elapsed:.1f}s"


def criterion_4():
    scheme = HashAndSignScheme(1, 6, 8)
    reps = hybrid_experiments(scheme, (0, 1), default_params(scheme), 200, SEED)
    mismatches = sum(a != b for a, b in zip(reps[0].indicators, reps[1].indicators))
    return mismatches == 0, f"{mismatches} of 200 coupled H0/H1 indicators differ (freq {reps[0].freq_E:.3f})"


def criterion_5():
    scheme = HashAndSignScheme(1, 4, 8)
    params = default_params(scheme)
    n = 1000
    reps = hybrid_experiments(scheme, (1, 2), params, n, SEED)
    p1, p2 = reps[1].freq_E, reps[2].freq_E
    b = reps[2].freq_B
    two_delta = 2 * float(params.delta)
    gap_tol = two_delta + 3 * math.sqrt(sigma(p1, n) ** 2 + sigma(p2, n) ** 2 + 0.25 / n)
    b_tol = two_delta + 3 * sigma(min(two_delta, 1.0), n)
    ok = abs(p1 - p2) <= gap_tol and b <= b_tol
    return ok, f"|H1 - H2| = {abs(p1 - p2):.3f} <= {gap_tol:.3f}; freq_B(H2) = {b:.3f} <= {b_tol:.3f}"


def criterion_6():
    start = time.perf_counter()
    scheme = LamportScheme(1, 2)
    mismatches = 0
    states = 0
    for seed in range(40):
        _, _, _, kn = attack_state(scheme, SEED + seed)
        ws = conditional_transcripts_exact(scheme, kn)
        marg, tapes = brute_force_posterior(scheme, kn, [2, 2], [2])
        states += 1
        for v in range(4):
            q = Plain(Bits(v, 2))
            if not kn.knows(q) and ws.marginal(q) != marg.get(q, 0):
                mismatches += 1
        mismatches += ws.tape_distribution() != tapes
    _, _, _, kn = attack_state(scheme, SEED)
    exact = conditional_transcripts_exact(scheme, kn).tape_distribution()
    count = 10_000
    samples = conditional_samples_mc(scheme, kn, count, 50 * count, SEED)
    emp = Counter(tuple(t.tape) for t in samples)
    support = set(emp) | set(exact)
    tv = sum(abs(emp.get(x, 0) / count - float(exact.get(x, 0))) for x in support) / 2
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and tv <= 0.05 and elapsed < 60
    return ok, f"exact vs brute force: {mismatches} mismatches over {states} states; MC TV = {tv:.4f} <= 0.05; {elapsed:.1f}s"


def criterion_7():
    ex2, ex3 = max_family_exhaustive(2), max_family_exhaustive(3)
    built = {}
    for q in (2, 4, 6):
        fam = max_family_construct(q)
        built[q] = fam.K == half_binom(q) and cross_intersecting_check(fam).ok
    search = family_bound_search(4, 100_000, SEED)
    ok = ex2 == 2 and ex3 == 3 and all(built.values()) and search.best_K <= 6
    return ok, f"exhaustive K = {ex2}, {ex3}; construction ok {built}; random search best K = {search.best_K} <= 6"


def criterion_8():
    scheme = AntichainScheme(6, 8)
    complete = completeness_check(scheme, 1000, SEED)
    scale = scheme.ap.security_scale
    parts, ok = [], complete.passed
    n = 1000
    for T in (1, 4, 8):
        st = run_forgery_game(scheme, CollisionAdversary(T), n, SEED + T, budget=T)
        bound = min(1.0, 5 * T / scale)
        tol = bound + 3 * sigma(bound, n)
        ok = ok and st.rate <= tol
        parts.append(f"T={T}: {st.rate:.3f} <= {tol:.3f}")
    return ok, f"completeness {complete.passed} (k=6, 1000 trials); " + "; ".join(parts)


def criterion_9():
    perm = HashAndSignScheme(1, 8, 8, "rp")
    st_p = run_forgery_game(perm, ForgeAdversary(), 200, SEED)
    ciph = HashAndSignScheme(1, 6, 10, "ic")
    st_c = run_forgery_game(ciph, ForgeAdversary(), 100, SEED)
    fp = 0.85 - 3 * sigma(0.85, 200)
    fc = 0.5 - 3 * sigma(0.5, 100)
    ok = st_p.rate >= fp and st_c.rate >= fc
    return ok, f"permutation {st_p.rate:.3f} >= {fp:.3f}; cipher {st_c.rate:.3f} >= {fc:.3f}"


def criterion_10():
    scheme = CoinFlipScheme(1, 6, 8)
    params = imperfect_params(scheme)
    rows = imperfect_experiment(scheme, params, 50, SEED, checks=1000)
    good = sum(ok and acc >= 0.7 for ok, acc in rows)
    worst = min(acc for _, acc in rows)
    caps = ", ".join(f"{name}: {full} -> {used}" for name, full, used in params.caps)
    return good >= 45, f"{good}/50 forgeries accepted >= 0.7 of 1000 verifications (min {worst:.3f}); caps {caps}"


def criterion_11():
    grid = hardness_grid(20_000, SEED)
    bad = [f"{r.kind} ell={r.ell} T={r.T}" for r in grid if not r.within]
    worst = max(r.value - r.bound - 3 * r.sigma for r in grid)
    return not bad, f"{len(grid) - len(bad)}/{len(grid)} grid cells within bound + 3 sigma (max excess {worst:+.4f}) {bad or ''}"


_DETERMINISM_CONFIGS = {
    "attack": "experiment = attack\nscheme.name = hash-and-sign\nscheme.k = 1\nscheme.ell = 6\nscheme.n = 8\ntrials = 200\n",
    "hybrid": "experiment = hybrid\nscheme.name = hash-and-sign\nscheme.k = 1\nscheme.ell = 4\nscheme.n = 8\ntrials = 100\n",
    "lemma": "experiment = lemma-search\nlemma.q = 4\ntrials = 2000\n",
    "primitives": "experiment = primitives\ntrials = 2000\n",
}


def criterion_12(tmp: Path):
    same = {}
    for name, text in _DETERMINISM_CONFIGS.items():
        cfg = tmp / f"{name}.cfg"
        cfg.write_text(text + f"seed = {SEED}\n")
        outs = []
        for jobs in (1, 2):
            out = tmp / f"{name}-{jobs}.json"
            code = cli.main(["run", str(cfg), "--jobs", str(jobs), "--out", str(out), "--quiet"])
            outs.append(out.read_bytes() if code == 0 else None)
        same[name] = outs[0] is not None and outs[0] == outs[1]
        json.loads(outs[0])
    return all(same.values()), f"byte-identical at jobs 1 and 2: {same}"


# -- pytest entry points ---------------------------------------------------------


def _check(number, result):
    ok, detail = result
    report(number, ok, detail)
    assert ok, detail


def test_criterion_01_attack_success():
    _check(1, criterion_1())


def test_criterion_02_query_accounting():
    _check(2, criterion_2())


def test_criterion_03_h3_usefulness():
    _check(3, criterion_3())


def test_criterion_04_h0_h1_coupling():
    _check(4, criterion_4())


def test_criterion_05_h1_h2_distance():
    _check(5, criterion_5())


def test_criterion_06_sampler_equivalence():
    _check(6, criterion_6())


def test_criterion_07_set_pair_bound():
    _check(7, criterion_7())


def test_criterion_08_antichain_scheme():
    _check(8, criterion_8())


def test_criterion_09_cipher_and_permutation():
    _check(9, criterion_9())


def test_criterion_10_imperfect_completeness():
    _check(10, criterion_10())


def test_criterion_11_primitive_games():
    _check(11, criterion_11())


def test_criterion_12_determinism(tmp_path):
    _check(12, criterion_12(tmp_path))


if __name__ == "__main__":
    import tempfile

    failures = 0
    for i, fn in enumerate(
        [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
         criterion_7, criterion_8, criterion_9, criterion_10, criterion_11], 1
    ):
        ok, detail = fn()
        report(i, ok, detail)
        failures += not ok
    with tempfile.TemporaryDirectory() as d:
        ok, detail = criterion_12(Path(d))
        report(12, ok, detail)
        failures += not ok
    sys.exit(1 if failures else 0)
