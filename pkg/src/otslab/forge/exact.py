"""Exact conditional distribution of the first transcript given the adversary's knowledge.

The enumerator replays ``Gen`` and ``Sign(alpha0)`` with symbolic tape reads
and symbolic fresh answers. A replay ends in one of four ways:

* some code inspects a symbol (:class:`NeedValue`), and the replay branches
  over its concrete values;
* the returned key or signature is matched against the known ones, which
  binds symbols (and the replay restarts with the bindings);
* a contradiction (the branch has probability zero);
* a leaf, in which tape reads used only as query inputs stay symbolic
  ("generic"). A leaf stands for the event that every generic read avoids
  an exclusion set and generic reads of equal length are pairwise
  distinct; children cover the complementary values. Its weight is the
  exact probability of that event times the probability of the answers.

Verification of ``(VK, alpha0, sigma0)`` is not replayed: its inputs are
known to the adversary, so its queries and answers are part of the
knowledge already.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, replace
from fractions import Fraction

from ..bits import AnswerSymbol, Bits, NeedValue, Symbol, TapeSymbol
from ..oracle import (
    BACKWARD,
    FORWARD,
    Cipher,
    IdealCipher,
    Merged,
    Plain,
    RandomFunction,
    answer_length,
    check_query,
    query_sort_key,
)
from .core import CapacityError, GuessedTranscript, Knowledge

ONE = Fraction(1)
PLAIN_TAG = ("P",)


class _Dead(Exception):
    pass


class _Restart(Exception):
    def __init__(self, item):
        self.item = item


def _make_query(tag: tuple, value: Bits, direction: str):
    if tag[0] == "P":
        return Plain(value)
    return Cipher(tag[1], value, direction)


def _is_generic_key(key) -> bool:
    return isinstance(key, tuple) and key and key[0] == "g"


def falling(n: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= n - i
    return out


# -- items -------------------------------------------------------------------


@dataclass(frozen=True)
class _Item:
    tape: dict  # read index -> Bits, or ("alias", index)
    excl: dict  # read index -> frozenset of excluded values
    sep: frozenset  # pairs of read indices known to differ
    answers: dict  # answer key -> Bits
    unified: frozenset  # answer keys bound by matching the key or signature


def _root(tape: dict, idx: int):
    b = tape.get(idx)
    while isinstance(b, tuple):
        idx = b[1]
        b = tape.get(idx)
    return idx, b


def _transfer(answers: dict, unified: frozenset, old_root: int, new_key_fn, known: dict):
    """Re-key bindings of generic queries on ``old_root``; returns None on a clash."""
    answers = dict(answers)
    unified = set(unified)
    for key in [k for k in answers if _is_generic_key(k) and k[2] == old_root]:
        val = answers.pop(key)
        was_unified = key in unified
        unified.discard(key)
        new = new_key_fn(key)
        if not _is_generic_key(new) and new in known:
            if known[new] != val:
                return None
            continue
        cur = answers.get(new)
        if cur is not None and cur != val:
            return None
        answers[new] = val
        if was_unified:
            unified.add(new)
    return answers, frozenset(unified)


def _bind_tape(item: _Item, idx: int, value: Bits, known: dict):
    r, b = _root(item.tape, idx)
    if b is not None:
        return item if b == value else None
    if value.value in item.excl.get(r, ()):
        return None
    tape = dict(item.tape)
    tape[r] = value
    excl = dict(item.excl)
    for pair in item.sep:
        if r in pair:
            (s,) = pair - {r}
            s_root, sb = _root(tape, s)
            if sb is not None:
                if sb == value:
                    return None
            else:
                excl[s_root] = excl.get(s_root, frozenset()) | {value.value}
    moved = _transfer(item.answers, item.unified, r, lambda k: _make_query(k[1], value, k[3]), known)
    if moved is None:
        return None
    return replace(item, tape=tape, excl=excl, answers=moved[0], unified=moved[1])


def _bind_answer(item: _Item, key, value: Bits, unified: bool):
    cur = item.answers.get(key)
    if cur is not None:
        return item if cur == value else None
    answers = dict(item.answers)
    answers[key] = value
    return replace(item, answers=answers, unified=item.unified | {key} if unified else item.unified)


def _alias(item: _Item, b: int, a: int, known: dict):
    """The event ``read b == read a`` for two unbound generic reads."""
    tape = dict(item.tape)
    tape[b] = ("alias", a)
    excl = dict(item.excl)
    excl[a] = excl.get(a, frozenset()) | excl.pop(b, frozenset())
    sep = set()
    for pair in item.sep:
        if b in pair:
            (s,) = pair - {b}
            if s == a:
                return None
            sep.add(frozenset((a, s)))
        else:
            sep.add(pair)
    moved = _transfer(item.answers, item.unified, b, lambda k: ("g", k[1], a, k[3]), known)
    if moved is None:
        return None
    return _Item(tape, excl, frozenset(sep), moved[0], moved[1])


# -- one replay --------------------------------------------------------------


class _Pair:
    __slots__ = ("x", "y", "learned")

    def __init__(self, x, y, learned):
        self.x = x
        self.y = y
        self.learned = learned


class _SymTape:
    def __init__(self, rp: "_Replay"):
        self.rp = rp

    def read(self, n: int):
        rp = self.rp
        idx = len(rp.reads)
        rp.reads.append(n)
        r, b = _root(rp.item.tape, idx)
        if b is not None:
            if b.length != n:
                raise RuntimeError("tape read lengths must not depend on oracle answers")
            return b
        sym = rp.syms.get(r)
        if sym is None:
            sym = rp.syms[r] = TapeSymbol(n, r)
        if sym.length != n:
            raise RuntimeError("aliased tape reads differ in length")
        return sym


class _Replay:
    def __init__(self, en: "_Enumerator", item: _Item):
        self.en = en
        self.item = item
        self.reads: list[int] = []
        self.syms: dict[int, TapeSymbol] = {}
        self.asked: dict = {}  # key -> answer object, in first-ask order
        self.fresh: set = set()  # keys whose answers were not learned
        self.phase_of: dict = {}
        self.families: dict = {}  # (tag, L) -> list[_Pair]
        self.inputs: dict = {}  # (tag, L, direction) -> {value: answer object}
        self.generic: dict = {}  # root -> set of (tag, direction)
        self.entries: list = []  # (phase, key)
        self.phase = "gen"

    # queries
    def ask(self, q):
        en = self.en
        if isinstance(q, Merged):
            if isinstance(q.key, Symbol):
                raise NeedValue(q.key)
            return self._table_query(q, answer_length(en.kind, q))
        if isinstance(q, Plain):
            x = q.input
            if isinstance(en.kind, IdealCipher):
                check_query(en.kind, q)
            if isinstance(en.kind, RandomFunction):
                if isinstance(x, AnswerSymbol):
                    raise NeedValue(x)
                if isinstance(x, TapeSymbol):
                    return self._table_query(("g", PLAIN_TAG, x.ident, FORWARD), en.kind.ell, x)
                return self._table_query(q, en.kind.ell)
            return self._perm_query(PLAIN_TAG, x, FORWARD)
        if isinstance(q, Cipher):
            if not isinstance(en.kind, IdealCipher):
                check_query(en.kind, q)
            if isinstance(q.key, Symbol):
                raise NeedValue(q.key)
            if q.input.length != en.kind.block:
                check_query(en.kind, Cipher(q.key, Bits(0, q.input.length), q.direction))
            return self._perm_query(("C", q.key), q.input, q.direction)
        raise TypeError(f"not a query: {q!r}")

    def _record(self, key, answer, fresh: bool):
        if key not in self.asked:
            self.asked[key] = answer
            self.phase_of[key] = self.phase
            if fresh:
                self.fresh.add(key)
        self.entries.append((self.phase, key))

    def _table_query(self, key, length: int, sym: TapeSymbol | None = None):
        a = self.asked.get(key)
        if a is not None:
            self.entries.append((self.phase, key))
            return a
        known = self.en.known
        if sym is None and key in known:
            a = known[key]
            self._record(key, a, False)
        else:
            a = self.item.answers.get(key)
            if a is None:
                a = AnswerSymbol(length, key)
            self._record(key, a, True)
        if sym is not None:
            self.generic.setdefault(sym.ident, set()).add((PLAIN_TAG, FORWARD))
        elif isinstance(key, Plain):
            self.inputs.setdefault((PLAIN_TAG, key.input.length, FORWARD), {})[key.input.value] = a
        return a

    def _perm_query(self, tag: tuple, u, d: str):
        length = u.length
        pairs = self.families.setdefault((tag, length), [])
        side_in = 0 if d == FORWARD else 1
        concrete = isinstance(u, Bits)
        key = _make_query(tag, u, d) if concrete else None
        for p in pairs:
            s = p.y if side_in else p.x
            if s is u or (concrete and isinstance(s, Bits) and s == u):
                a = p.x if side_in else p.y
                if key is None:
                    key = ("g", tag, u.ident, d) if isinstance(u, TapeSymbol) else None
                if key is not None:
                    self._record(key, a, False)
                return a
        for p in pairs:
            s = p.y if side_in else p.x
            if isinstance(s, AnswerSymbol):
                raise NeedValue(s)
        if isinstance(u, AnswerSymbol):
            raise NeedValue(u)
        known = self.en.known
        if concrete and key in known:
            a = known[key]
            learned = True
            self._record(key, a, False)
        else:
            learned = False
            if not concrete:
                key = ("g", tag, u.ident, d)
                self.generic.setdefault(u.ident, set()).add((tag, d))
            a = self.item.answers.get(key)
            if a is None:
                a = AnswerSymbol(length, key)
            self._record(key, a, True)
        x, y = (u, a) if d == FORWARD else (a, u)
        pairs.append(_Pair(x, y, learned))
        if isinstance(x, Bits):
            self.inputs.setdefault((tag, length, FORWARD), {})[x.value] = y
        if isinstance(y, Bits):
            self.inputs.setdefault((tag, length, BACKWARD), {})[y.value] = x
        return a

    def _drive(self, proc):
        try:
            q = next(proc)
            while True:
                q = proc.send(self.ask(q))
        except StopIteration as stop:
            return stop.value

    # matching outputs against the knowledge
    def _match(self, value, known, tape_binds, ans_binds):
        if isinstance(known, tuple):
            if not isinstance(value, tuple) or len(value) != len(known):
                raise _Dead
            for v, k in zip(value, known):
                self._match(v, k, tape_binds, ans_binds)
            return
        if isinstance(value, Bits):
            if value != known:
                raise _Dead
        elif isinstance(value, TapeSymbol):
            if value.length != known.length:
                raise _Dead
            tape_binds.append((value.ident, known))
        elif isinstance(value, AnswerSymbol):
            if value.length != known.length:
                raise _Dead
            ans_binds.append((value.ident, known))
        else:
            raise _Dead

    def _unify(self, value, known):
        tape_binds, ans_binds = [], []
        self._match(value, known, tape_binds, ans_binds)
        if not tape_binds and not ans_binds:
            return
        item = self.item
        for key, val in ans_binds:
            item = _bind_answer(item, key, val, True)
            if item is None:
                raise _Dead
        for idx, val in tape_binds:
            item = _bind_tape(item, idx, val, self.en.known)
            if item is None:
                raise _Dead
        raise _Restart(item)

    def run(self):
        en = self.en
        self.phase = "gen"
        keys = self._drive(en.scheme.gen(_SymTape(self)))
        self._unify(keys.vk, en.knowledge.vk)
        self.phase = "sign"
        sig = self._drive(en.scheme.sign(keys.sk, en.knowledge.alpha0))
        self._unify(sig, en.knowledge.sigma0)

    # leaf helpers
    def candidates(self, root: int) -> set:
        """Concrete values a generic read must be split against."""
        length = self.syms[root].length
        out: set = set()
        for tag, d in self.generic.get(root, ()):
            out.update(self.inputs.get((tag, length, d), {}).keys())
            out.update(self.en.learned_index.get((tag, length, d), {}).keys())
        return out

    def answer_of(self, tag, length, d, value):
        a = self.inputs.get((tag, length, d), {}).get(value)
        if a is None:
            a = self.en.learned_index.get((tag, length, d), {}).get(value)
        return a


# -- counting injective assignments -------------------------------------------


def constrained_count(sets: list, edges: list, universe: int) -> int:
    """Assignments ``x_i not in sets[i]`` with ``x_i != x_j`` along every edge.

    Inclusion-exclusion over edge subsets: each subset merges its
    endpoints, and a merged block picks one value outside the union of
    its members' sets.
    """
    m = len(sets)
    if len(edges) > 16:
        raise CapacityError("too many distinctness constraints for exact counting")
    total = 0
    for mask in range(1 << len(edges)):
        parent = list(range(m))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        chosen = 0
        for e, (i, j) in enumerate(edges):
            if mask >> e & 1:
                chosen += 1
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
        blocks: dict = {}
        for i in range(m):
            blocks.setdefault(find(i), set()).update(sets[i])
        term = 1
        for union in blocks.values():
            term *= universe - len(union)
            if term == 0:
                break
        total += -term if chosen & 1 else term
    return total


# -- leaves and the weighted set ------------------------------------------------


@dataclass
class _Group:
    length: int
    roots: list
    sets: list
    edges: list
    count: int

    def fixed_count(self, root: int, value: int) -> int:
        i = self.roots.index(root)
        others = [j for j in range(len(self.roots)) if j != i]
        remap = {j: k for k, j in enumerate(others)}
        neighbours = {b if a == i else a for a, b in self.edges if i in (a, b)}
        sets = [self.sets[j] | {value} if j in neighbours else self.sets[j] for j in others]
        edges = [(remap[a], remap[b]) for a, b in self.edges if i not in (a, b)]
        return constrained_count(sets, edges, 1 << self.length)


@dataclass
class Leaf:
    item: _Item
    replay: _Replay
    weight: Fraction
    groups: dict  # length -> _Group

    def root_probability(self, root: int, value: int) -> Fraction:
        g = self.groups[self.replay.syms[root].length]
        if value in g.sets[g.roots.index(root)]:
            return Fraction(0)
        return Fraction(g.fixed_count(root, value), g.count)


class WeightedTranscriptSet:
    """Leaves with exact weights, plus exact per-query marginals."""

    def __init__(self, enumerator: "_Enumerator", leaves: list, nodes: int):
        self.en = enumerator
        self.leaves = leaves
        self.nodes = nodes
        self.total = sum((leaf.weight for leaf in leaves), Fraction(0))
        if self.total == 0:
            raise ValueError("the knowledge is inconsistent with every transcript")
        self._concrete: dict = {}
        self._spread: dict = {}  # (tag, L, d) -> [rho, {value: correction}]
        for leaf in leaves:
            self._accumulate(leaf)

    @property
    def items(self) -> list:
        return [(leaf, leaf.weight / self.total) for leaf in self.leaves]

    def _accumulate(self, leaf: Leaf) -> None:
        rp = leaf.replay
        w = leaf.weight
        known = self.en.known
        for key in rp.asked:
            if _is_generic_key(key):
                continue
            if key not in known:
                self._concrete[key] = self._concrete.get(key, 0) + w
        for root, templates in rp.generic.items():
            r, b = _root(leaf.item.tape, root)
            if b is not None or r != root:
                continue
            g = leaf.groups[rp.syms[root].length]
            i = g.roots.index(root)
            union = set().union(*g.sets) if g.sets else set()
            fresh_value = next(v for v in range(1 << g.length) if v not in union) if len(union) < (1 << g.length) else None
            p_fresh = Fraction(g.fixed_count(root, fresh_value), g.count) if fresh_value is not None else Fraction(0)
            for tag, d in templates:
                entry = self._spread.setdefault((tag, g.length, d), [Fraction(0), {}])
                entry[0] += w * p_fresh
                corr = entry[1]
                for v in union:
                    p = Fraction(0) if v in g.sets[i] else Fraction(g.fixed_count(root, v), g.count)
                    corr[v] = corr.get(v, 0) + w * (p - p_fresh)

    def marginal(self, q) -> Fraction:
        """Probability that ``q`` is asked by Gen or Sign(alpha0) under the conditional distribution."""
        m = self._concrete.get(q, Fraction(0))
        tk = _template_key(q)
        if tk is not None and tk in self._spread:
            rho, corr = self._spread[tk]
            m += rho + corr.get(q.input.value, 0)
        return m / self.total

    def heavy_query(self, epsilon: Fraction, knowledge: Knowledge):
        """The first unlearned query (canonical order) with marginal at least ``epsilon``."""
        threshold = Fraction(epsilon) * self.total
        best = None
        for q, m in self._concrete.items():
            if knowledge.knows(q):
                continue
            tk = _template_key(q)
            if tk is not None and tk in self._spread:
                rho, corr = self._spread[tk]
                m = m + rho + corr.get(q.input.value, 0)
            if m >= threshold and (best is None or query_sort_key(q) < query_sort_key(best)):
                best = q
        for (tag, length, d), (rho, corr) in self._spread.items():
            if rho >= threshold:
                values = itertools.count()
            else:
                values = iter(sorted(v for v, c in corr.items() if rho + c >= threshold))
            for v in values:
                if v >= 1 << length:
                    break
                q = _make_query(tag, Bits(v, length), d)
                if knowledge.knows(q):
                    continue
                m = rho + corr.get(v, 0) + self._concrete.get(q, 0)
                if m >= threshold:
                    if best is None or query_sort_key(q) < query_sort_key(best):
                        best = q
                    break
        return best

    # sampling
    def _pick(self, rng: random.Random) -> Leaf:
        den = 1
        for leaf in self.leaves:
            den = den * leaf.weight.denominator // math.gcd(den, leaf.weight.denominator)
        nums = [leaf.weight.numerator * (den // leaf.weight.denominator) for leaf in self.leaves]
        u = rng.randrange(sum(nums))
        for leaf, n in zip(self.leaves, nums):
            if u < n:
                return leaf
            u -= n
        raise AssertionError("unreachable")

    def sample(self, rng: random.Random) -> GuessedTranscript:
        return self.en.realize(self._pick(rng), rng)

    def tape_distribution(self, limit: int = 1 << 16) -> dict:
        """Exact distribution of the full tuple of Gen tape reads (small domains only)."""
        out: dict = {}
        for leaf in self.leaves:
            for reads, p in self.en.expand_tapes(leaf, limit):
                out[reads] = out.get(reads, 0) + p * leaf.weight / self.total
        return out


def _template_key(q):
    if isinstance(q, Plain):
        return (PLAIN_TAG, q.input.length, FORWARD)
    if isinstance(q, Cipher):
        return (("C", q.key), q.input.length, q.direction)
    return None


# -- the enumerator --------------------------------------------------------------


class _TableOracle:
    """Answers from a fixed table; used to replay a realized transcript."""

    def __init__(self, kind, table: dict):
        self.kind = kind
        self.table = table
        self.entries: list = []
        self.phase = ""

    def query(self, q, phase=""):
        a = self.table[q]
        self.entries.append((phase, q, a))
        return a


class _Enumerator:
    def __init__(self, scheme, knowledge: Knowledge, branch_cap: int):
        self.scheme = scheme
        self.kind = scheme.oracle_kind
        self.knowledge = knowledge
        self.known = knowledge.table
        self.branch_cap = branch_cap
        self.learned_index: dict = {}
        self.learned_x: dict = {}
        self.learned_y: dict = {}
        for q, a in self.known.items():
            if isinstance(q, Plain):
                tag, d = PLAIN_TAG, FORWARD
            elif isinstance(q, Cipher):
                tag, d = ("C", q.key), q.direction
            else:
                continue
            self.learned_index.setdefault((tag, q.input.length, d), {})[q.input.value] = a
            if d == FORWARD:
                self.learned_x.setdefault((tag, q.input.length), set()).add(q.input.value)
                self.learned_y.setdefault((tag, q.input.length), set()).add(a.value)

    def enumerate(self) -> WeightedTranscriptSet:
        stack = [_Item({}, {}, frozenset(), {}, frozenset())]
        leaves: list = []
        nodes = 0
        while stack:
            item = stack.pop()
            nodes += 1
            if nodes > self.branch_cap:
                raise CapacityError(f"exact enumeration exceeded {self.branch_cap} replays")
            rp = _Replay(self, item)
            try:
                rp.run()
            except NeedValue as need:
                stack.extend(reversed(self._branch(item, need.symbol)))
                continue
            except _Restart as restart:
                stack.append(restart.item)
                continue
            except _Dead:
                continue
            self._finish(item, rp, stack, leaves)
        return WeightedTranscriptSet(self, leaves, nodes)

    def _branch(self, item: _Item, sym: Symbol) -> list:
        if isinstance(sym, TapeSymbol):
            excluded = item.excl.get(sym.ident, frozenset())
            size = (1 << sym.length) - len(excluded)
            if size > self.branch_cap:
                raise CapacityError(f"branching over {size} values of a {sym.length}-bit tape read")
            out = []
            for v in range(1 << sym.length):
                if v in excluded:
                    continue
                child = _bind_tape(item, sym.ident, Bits(v, sym.length), self.known)
                if child is not None:
                    out.append(child)
            return out
        key = sym.ident
        if isinstance(key, Merged):
            n = key.input_length
            size = math.factorial(1 << n)
            if size > self.branch_cap:
                raise CapacityError(f"branching over {size} whole-table answers")
            values = []
            for perm in itertools.permutations(range(1 << n)):
                v = 0
                for e in perm:
                    v = (v << n) | e
                values.append(Bits(v, sym.length))
        else:
            if (1 << sym.length) > self.branch_cap:
                raise CapacityError(f"branching over a {sym.length}-bit answer")
            values = [Bits(v, sym.length) for v in range(1 << sym.length)]
        out = []
        for val in values:
            child = _bind_answer(item, key, val, False)
            if child is not None:
                out.append(child)
        return out

    def _finish(self, item: _Item, rp: _Replay, stack: list, leaves: list) -> None:
        generic = sorted(r for r in rp.generic if _root(item.tape, r) == (r, None))
        by_len: dict = {}
        for r in generic:
            by_len.setdefault(rp.syms[r].length, []).append(r)
        for roots in by_len.values():
            for a, b in itertools.combinations(roots, 2):
                pair = frozenset((a, b))
                if pair in item.sep:
                    continue
                if not self._alias_pruned(item, rp, a, b):
                    child = _alias(item, b, a, self.known)
                    if child is not None:
                        stack.append(child)
                item = replace(item, sep=item.sep | {pair})
        for r in generic:
            excluded = item.excl.get(r, frozenset())
            new = rp.candidates(r) - excluded
            if not new:
                continue
            length = rp.syms[r].length
            for v in sorted(new, reverse=True):
                if self._bind_pruned(item, rp, r, v):
                    continue
                child = _bind_tape(item, r, Bits(v, length), self.known)
                if child is not None:
                    stack.append(child)
            excl = dict(item.excl)
            excl[r] = excluded | new
            item = replace(item, excl=excl)
        weight, groups = self._weight(item, rp)
        if weight:
            rp.item = item
            leaves.append(Leaf(item, rp, weight, groups))

    def _bound_by_match(self, item: _Item, key):
        return item.answers.get(key) if key in item.unified else None

    def _bind_pruned(self, item: _Item, rp: _Replay, r: int, v: int) -> bool:
        """True if binding generic read ``r`` to ``v`` certainly contradicts a matched answer."""
        length = rp.syms[r].length
        for tag, d in rp.generic.get(r, ()):
            target = self._bound_by_match(item, ("g", tag, r, d))
            if target is None:
                continue
            other = rp.answer_of(tag, length, d, v)
            if isinstance(other, Bits) and other != target:
                return True
            if isinstance(other, AnswerSymbol):
                bound = self._bound_by_match(item, other.ident)
                if bound is not None and bound != target:
                    return True
        return False

    def _alias_pruned(self, item: _Item, rp: _Replay, a: int, b: int) -> bool:
        for tag, d in rp.generic.get(a, set()) & rp.generic.get(b, set()):
            ta = self._bound_by_match(item, ("g", tag, a, d))
            tb = self._bound_by_match(item, ("g", tag, b, d))
            if ta is not None and tb is not None and ta != tb:
                return True
        return False

    def _groups(self, item: _Item, rp: _Replay) -> tuple[Fraction, dict]:
        w = ONE
        unbound: dict = {}
        for idx, length in enumerate(rp.reads):
            r, b = _root(item.tape, idx)
            if b is not None or r != idx:
                w /= 1 << length
            else:
                unbound.setdefault(length, []).append(idx)
        groups = {}
        for length, roots in unbound.items():
            pos = {r: i for i, r in enumerate(roots)}
            sets = [frozenset(item.excl.get(r, ())) for r in roots]
            edges = sorted(
                tuple(sorted((pos[a], pos[b])))
                for a, b in (tuple(p) for p in item.sep)
                if a in pos and b in pos
            )
            count = constrained_count(sets, edges, 1 << length)
            groups[length] = _Group(length, roots, sets, edges, count)
            w *= Fraction(count, (1 << length) ** len(roots))
        return w, groups

    def _weight(self, item: _Item, rp: _Replay) -> tuple[Fraction, dict]:
        w, groups = self._groups(item, rp)
        if w == 0:
            return w, groups
        kind = self.kind
        for key in rp.fresh:
            a = rp.asked[key]
            if not isinstance(a, Bits):
                continue
            if isinstance(key, Merged):
                w /= math.factorial(1 << key.input_length)
            elif isinstance(kind, RandomFunction):
                w /= 1 << a.length
        if isinstance(kind, RandomFunction):
            return w, groups
        for fam, pairs in rp.families.items():
            length = fam[1]
            lx = self.learned_x.get(fam, set())
            ly = self.learned_y.get(fam, set())
            xs, ys = set(), set()
            determined = unknown = 0
            for p in pairs:
                if p.learned:
                    continue
                for val, seen, learned in ((p.x, xs, lx), (p.y, ys, ly)):
                    if isinstance(val, Bits):
                        if val.value in seen or val.value in learned:
                            return Fraction(0), groups
                        seen.add(val.value)
                if isinstance(p.x, Bits) and isinstance(p.y, Bits):
                    determined += 1
                elif isinstance(p.x, AnswerSymbol) or isinstance(p.y, AnswerSymbol):
                    unknown += 1
                else:
                    determined += 1
            free = (1 << length) - len(lx)
            if free - determined < unknown:
                return Fraction(0), groups
            w /= falling(free, determined)
        return w, groups

    # realizing a leaf as a concrete transcript
    def _assign_roots(self, leaf: Leaf, rng: random.Random) -> dict:
        values = {}
        for g in leaf.groups.values():
            size = 1 << g.length
            for _ in range(100000):
                trial = []
                for s in g.sets:
                    if len(s) * 2 < size:
                        while True:
                            v = rng.randrange(size)
                            if v not in s:
                                break
                    else:
                        free = [v for v in range(size) if v not in s]
                        v = free[rng.randrange(len(free))]
                    trial.append(v)
                if all(trial[a] != trial[b] for a, b in g.edges):
                    break
            else:
                raise RuntimeError("could not sample distinct generic values")
            for r, v in zip(g.roots, trial):
                values[r] = Bits(v, g.length)
        return values

    def _resolve_reads(self, leaf: Leaf, values: dict) -> list:
        out = []
        for idx in range(len(leaf.replay.reads)):
            r, b = _root(leaf.item.tape, idx)
            out.append(b if b is not None else values[r])
        return out

    def realize(self, leaf: Leaf, rng: random.Random, values: dict | None = None) -> GuessedTranscript:
        rp = leaf.replay
        if values is None:
            values = self._assign_roots(leaf, rng)
        reads = self._resolve_reads(leaf, values)
        resolved: dict = {}

        def val(obj):
            if isinstance(obj, Bits):
                return obj
            if isinstance(obj, TapeSymbol):
                r, b = _root(leaf.item.tape, obj.ident)
                return b if b is not None else values[r]
            return resolved.get(obj.ident)

        table: dict = {}
        kind = self.kind
        # answers of random-function and whole-table queries
        for key, a in rp.asked.items():
            if _is_generic_key(key) and not isinstance(kind, RandomFunction):
                continue
            if isinstance(key, Cipher) or (isinstance(key, Plain) and not isinstance(kind, RandomFunction)):
                continue
            if isinstance(a, AnswerSymbol):
                if isinstance(key, Merged):
                    perm = list(range(1 << key.input_length))
                    rng.shuffle(perm)
                    v = 0
                    for e in perm:
                        v = (v << key.input_length) | e
                    resolved[key] = Bits(v, a.length)
                else:
                    resolved[key] = Bits(rng.getrandbits(a.length), a.length)
            q = _make_query(key[1], val(TapeSymbol(0, key[2])), key[3]) if _is_generic_key(key) else key
            table[q] = val(a)
        # permutation families: sample unknown sides without replacement
        for (tag, length), pairs in rp.families.items():
            used_x = set(self.learned_x.get((tag, length), set()))
            used_y = set(self.learned_y.get((tag, length), set()))
            for p in pairs:
                for obj, used in ((p.x, used_x), (p.y, used_y)):
                    if not isinstance(obj, AnswerSymbol):
                        v = val(obj)
                        if v is not None:
                            used.add(v.value)
            for p in pairs:
                for obj, used in ((p.x, used_x), (p.y, used_y)):
                    if isinstance(obj, AnswerSymbol) and obj.ident not in resolved:
                        size = 1 << length
                        if len(used) * 2 < size:
                            while True:
                                v = rng.randrange(size)
                                if v not in used:
                                    break
                        else:
                            free = [v for v in range(size) if v not in used]
                            v = free[rng.randrange(len(free))]
                        used.add(v)
                        resolved[obj.ident] = Bits(v, length)
                x, y = val(p.x), val(p.y)
                table[_make_query(tag, x, FORWARD)] = y
                if tag[0] == "C":
                    table[_make_query(tag, y, BACKWARD)] = x
        full = dict(self.known)
        full.update(table)
        oracle = _TableOracle(kind, full)
        from ..oracle import FixedTape, run

        keys = run(self.scheme.gen(FixedTape(reads)), oracle, "gen")
        sig = run(self.scheme.sign(keys.sk, self.knowledge.alpha0), oracle, "sign")
        if keys.vk != self.knowledge.vk or sig != self.knowledge.sigma0:
            raise AssertionError("realized transcript does not reproduce the key and signature")
        entries = oracle.entries
        guessed = {q: a for _, q, a in entries if q not in self.known}
        return GuessedTranscript(reads, entries, keys, sig, guessed)

    def expand_tapes(self, leaf: Leaf, limit: int):
        """All concrete tapes of a leaf, each with its share of the leaf's weight."""
        groups = list(leaf.groups.values())
        total = 1
        for g in groups:
            total *= g.count
        if total > limit:
            raise CapacityError("too many concrete tapes to expand")
        per_group = []
        for g in groups:
            size = 1 << g.length
            options = []
            for combo in itertools.product(range(size), repeat=len(g.roots)):
                if any(v in s for v, s in zip(combo, g.sets)):
                    continue
                if any(combo[a] == combo[b] for a, b in g.edges):
                    continue
                options.append({r: Bits(v, g.length) for r, v in zip(g.roots, combo)})
            per_group.append(options)
        share = Fraction(1, total)
        for choice in itertools.product(*per_group):
            values = {}
            for part in choice:
                values.update(part)
            yield tuple(self._resolve_reads(leaf, values)), share


def conditional_transcripts_exact(scheme, knowledge: Knowledge, branch_cap: int = 20000) -> WeightedTranscriptSet:
    """Exact weighted representation of the transcript distribution given ``knowledge``."""
    return _Enumerator(scheme, knowledge, branch_cap).enumerate()
