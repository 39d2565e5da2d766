"""Term algebra: the little language of routing strategies.

A term is an immutable tree over two sorts.  Build terms construct a
solution from nothing (INSERT, LDS, DO, FORALL); Optimize terms improve
an existing one (CHAIN, TREE, LNS, LOOP, THEN).  Terms are parsed from
and printed to a stable text form, carry a static cost estimate in
expected insertions, and are interpreted against an instance by `run`.
`invent` samples random well-sorted terms near a cost goal and `diet`
truncates oversized trees.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, fields

from .ejection import chain_optimize, tree_optimize
from .lds import LdsParams, lds_build, lds_generate
from .lns import lns_optimize
from .localopt import insert_build
from .solution import Solution, objective


class Term:
    """Marker base; concrete terms are frozen dataclasses below."""
    __slots__ = ()


def _check_int(t, name, lo, hi=None):
    v = getattr(t, name)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ValueError(f"{type(t).__name__}.{name} must be an integer")
    if v < lo or (hi is not None and v > hi):
        span = f">= {lo}" if hi is None else f"in {lo}..{hi}"
        raise ValueError(f"{type(t).__name__}.{name} must be {span}, got {v}")


@dataclass(frozen=True)
class Insert(Term):
    i: int

    def __post_init__(self):
        _check_int(self, "i", 0, 4)


@dataclass(frozen=True)
class Lds(Term):
    i: int
    n: int
    l: int

    def __post_init__(self):
        _check_int(self, "i", 0, 4)
        _check_int(self, "n", 0)
        _check_int(self, "l", 0)


@dataclass(frozen=True)
class Do(Term):
    build: Term
    opt: Term

    def __post_init__(self):
        if not is_build(self.build):
            raise ValueError("DO first argument must build")
        if not is_optimize(self.opt):
            raise ValueError("DO second argument must optimize")


@dataclass(frozen=True)
class Forall(Term):
    lds: Term
    opt: Term

    def __post_init__(self):
        if not isinstance(self.lds, Lds):
            raise ValueError("FORALL first argument must be an LDS")
        if not is_optimize(self.opt):
            raise ValueError("FORALL second argument must optimize")


@dataclass(frozen=True)
class Chain(Term):
    n: int
    m: int

    def __post_init__(self):
        _check_int(self, "n", 1)
        _check_int(self, "m", 1, 2)


@dataclass(frozen=True)
class Tree(Term):
    n: int
    m: int
    k: int = 2

    def __post_init__(self):
        _check_int(self, "n", 1)
        _check_int(self, "m", 1, 2)
        _check_int(self, "k", 0)


@dataclass(frozen=True)
class Lns(Term):
    n: int
    h: int
    build: Term

    def __post_init__(self):
        _check_int(self, "n", 0)
        _check_int(self, "h", 1)
        if not is_build(self.build):
            raise ValueError("LNS third argument must build")


@dataclass(frozen=True)
class Loop(Term):
    n: int
    opt: Term

    def __post_init__(self):
        _check_int(self, "n", 1)
        if not is_optimize(self.opt):
            raise ValueError("LOOP second argument must optimize")


@dataclass(frozen=True)
class Then(Term):
    first: Term
    second: Term

    def __post_init__(self):
        if not (is_optimize(self.first) and is_optimize(self.second)):
            raise ValueError("THEN arguments must optimize")


def is_build(t) -> bool:
    return isinstance(t, (Insert, Lds, Do, Forall))


def is_optimize(t) -> bool:
    return isinstance(t, (Chain, Tree, Lns, Loop, Then))


def subterms(t: Term):
    """The term's child terms, in field order."""
    return tuple(v for f in fields(t)
                 if isinstance(v := getattr(t, f.name), Term))


def term_size(t: Term) -> int:
    return 1 + sum(term_size(c) for c in subterms(t))


def term_depth(t: Term) -> int:
    kids = subterms(t)
    return 1 + max(map(term_depth, kids)) if kids else 0


# ---------------------------------------------------------------- parsing

class TermError(ValueError):
    """Malformed term text or ill-sorted tree, with a position."""

    def __init__(self, message, pos=None):
        if pos is not None:
            message = f"{message} (at position {pos})"
        super().__init__(message)
        self.pos = pos


def _tokenize(text):
    toks = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "(),":
            toks.append((ch, ch, i))
            i += 1
        elif ch.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            toks.append(("int", int(text[i:j]), i))
            i = j
        elif ch.isalpha():
            j = i
            while j < len(text) and text[j].isalpha():
                j += 1
            toks.append(("name", text[i:j].upper(), i))
            i = j
        else:
            raise TermError(f"unexpected character {ch!r}", i)
    toks.append(("end", None, len(text)))
    return toks


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.toks[self.k]

    def eat(self, kind):
        tok = self.toks[self.k]
        if tok[0] != kind:
            raise TermError(f"expected {kind!r}, found {tok[1]!r}", tok[2])
        self.k += 1
        return tok

    def args(self):
        self.eat("(")
        out = [self.value()]
        while self.peek()[0] == ",":
            self.eat(",")
            out.append(self.value())
        self.eat(")")
        return out

    def value(self):
        kind, val, pos = self.peek()
        if kind == "int":
            self.eat("int")
            return val
        return self.term()

    def term(self):
        kind, name, pos = self.peek()
        if kind != "name":
            raise TermError(f"expected an operator name, found {name!r}", pos)
        self.eat("name")
        args = self.args()
        try:
            return self.build_node(name, args, pos)
        except TermError:
            raise
        except ValueError as exc:
            raise TermError(str(exc), pos) from None

    def build_node(self, name, args, pos):
        def ints(k):
            if len(args) != k or any(isinstance(a, Term) for a in args):
                raise TermError(
                    f"{name} expects {k} integer arguments", pos)
            return args

        if name == "INSERT":
            return Insert(*ints(1))
        if name == "LDS":
            return Lds(*ints(3))
        if name == "DO":
            if len(args) != 2:
                raise TermError("DO expects 2 arguments", pos)
            return Do(*self._terms(args, pos, name))
        if name == "FORALL":
            if len(args) != 2:
                raise TermError("FORALL expects 2 arguments", pos)
            return Forall(*self._terms(args, pos, name))
        if name == "CHAIN":
            return Chain(*ints(2))
        if name == "TREE":
            if len(args) == 2:
                args = args + [2]
            return Tree(*ints(3))
        if name == "LNS":
            if len(args) != 3 or not isinstance(args[2], Term):
                raise TermError(
                    "LNS expects (count, determinism, build term)", pos)
            if isinstance(args[0], Term) or isinstance(args[1], Term):
                raise TermError(
                    "LNS expects (count, determinism, build term)", pos)
            return Lns(args[0], args[1], args[2])
        if name == "LOOP":
            if len(args) != 2 or isinstance(args[0], Term) \
                    or not isinstance(args[1], Term):
                raise TermError("LOOP expects (count, optimize term)", pos)
            return Loop(args[0], args[1])
        if name == "THEN":
            if len(args) < 2:
                raise TermError("THEN expects at least 2 arguments", pos)
            kids = self._terms(args, pos, name)
            out = kids[-1]
            for child in reversed(kids[:-1]):
                out = Then(child, out)
            return out
        raise TermError(f"unknown operator {name}", pos)

    @staticmethod
    def _terms(args, pos, name):
        if any(not isinstance(a, Term) for a in args):
            raise TermError(f"{name} expects term arguments", pos)
        return args


def parse_term(text: str) -> Term:
    p = _Parser(text)
    t = p.term()
    p.eat("end")
    return t


def print_term(t: Term) -> str:
    """Canonical text; variadic THEN is flattened along the right spine."""
    if isinstance(t, Insert):
        return f"INSERT({t.i})"
    if isinstance(t, Lds):
        return f"LDS({t.i},{t.n},{t.l})"
    if isinstance(t, Do):
        return f"DO({print_term(t.build)},{print_term(t.opt)})"
    if isinstance(t, Forall):
        return f"FORALL({print_term(t.lds)},{print_term(t.opt)})"
    if isinstance(t, Chain):
        return f"CHAIN({t.n},{t.m})"
    if isinstance(t, Tree):
        return f"TREE({t.n},{t.m},{t.k})"
    if isinstance(t, Lns):
        return f"LNS({t.n},{t.h},{print_term(t.build)})"
    if isinstance(t, Loop):
        return f"LOOP({t.n},{print_term(t.opt)})"
    if isinstance(t, Then):
        parts = [t.first]
        node = t.second
        while isinstance(node, Then):
            parts.append(node.first)
            node = node.second
        parts.append(node)
        return "THEN(" + ",".join(print_term(p) for p in parts) + ")"
    raise TypeError(f"not a term: {t!r}")


# ----------------------------------------------------------- complexity

def estimate_complexity(t: Term) -> int:
    """Static cost guess in insertions; crude on purpose, but positive."""
    if isinstance(t, Insert):
        return 1000
    if isinstance(t, Lds):
        return (6000 if t.i == 4 else 1000) * (2 ** t.n)
    if isinstance(t, (Do, Forall)):
        a, b = subterms(t)
        return estimate_complexity(a) + estimate_complexity(b)
    if isinstance(t, Chain):
        return 1500 * t.n
    if isinstance(t, Tree):
        return 600 * t.n * (2 ** t.k)
    if isinstance(t, Lns):
        return max(1, t.n * estimate_complexity(t.build) // 100)
    if isinstance(t, Loop):
        return t.n * estimate_complexity(t.opt)
    if isinstance(t, Then):
        return estimate_complexity(t.first) + estimate_complexity(t.second)
    raise TypeError(f"not a term: {t!r}")


# -------------------------------------------------------------- running

@dataclass
class RunReport:
    solution: Solution
    value: float
    insertions_used: int
    wall_time: float


def _build(t: Term, inst, ctx, start):
    if isinstance(t, Insert):
        return insert_build(inst, ctx, t.i, start=start)
    if isinstance(t, Lds):
        return lds_build(inst, ctx, LdsParams(t.i, t.n, float(t.l)),
                         start=start)
    if isinstance(t, Do):
        sol = _build(t.build, inst, ctx, start)
        return _optimize(t.opt, inst, sol, ctx)
    if isinstance(t, Forall):
        p = LdsParams(t.lds.i, t.lds.n, float(t.lds.l))
        return lds_generate(inst, ctx, p,
                            lambda s: _optimize(t.opt, inst, s, ctx),
                            start=start)
    raise TypeError(f"not a build term: {t!r}")


def _optimize(t: Term, inst, sol, ctx):
    if isinstance(t, Chain):
        return chain_optimize(inst, sol, ctx, t.n, t.m)
    if isinstance(t, Tree):
        return tree_optimize(inst, sol, ctx, t.n, t.m, t.k)
    if isinstance(t, Lns):
        def rebuild(inst2, partial, ctx2, _t=t.build):
            return _build(_t, inst2, ctx2, partial)
        return lns_optimize(inst, sol, ctx, t.n, float(t.h), rebuild)
    if isinstance(t, Loop):
        for _ in range(t.n):
            sol = _optimize(t.opt, inst, sol, ctx)
        return sol
    if isinstance(t, Then):
        sol = _optimize(t.first, inst, sol, ctx)
        return _optimize(t.second, inst, sol, ctx)
    raise TypeError(f"not an optimize term: {t!r}")


def run(t: Term, inst, ctx, base: Solution | None = None) -> RunReport:
    """Interpret a term; `base` is required for Optimize terms, never
    mutated, and optional for Build terms (construction then continues
    from it)."""
    t0 = time.perf_counter()
    ticks0 = ctx.insertion_counter
    if is_build(t):
        sol = _build(t, inst, ctx, base.clone() if base is not None else None)
    elif is_optimize(t):
        if base is None:
            raise ValueError("an optimize term needs a base solution")
        sol = _optimize(t, inst, base.clone(), ctx)
    else:
        raise TypeError(f"not a term: {t!r}")
    return RunReport(sol, objective(inst, sol, ctx),
                     ctx.insertion_counter - ticks0,
                     time.perf_counter() - t0)


# ------------------------------------------------------------ invention

BUILD = "Build"
OPTIMIZE = "Optimize"

# root-class weights; composite classes decay with depth so recursion
# terminates with probability 1
_BUILD_ROOTS = (("INSERT", 15, False), ("LDS", 35, False),
                ("DO", 40, True), ("FORALL", 10, True))
_OPT_ROOTS = (("CHAIN", 20, False), ("TREE", 15, False),
              ("LNS", 30, True), ("LOOP", 20, True), ("THEN", 15, True))
_DECAY = 0.55


def _pick(table, depth, rng):
    weights = [w * (_DECAY ** depth) if deep else w
               for _, w, deep in table]
    x = rng.random() * sum(weights)
    for (name, _, _), w in zip(table, weights):
        x -= w
        if x < 0:
            return name
    return table[-1][0]


def _invent_any(sort, rng, depth):
    if sort == BUILD:
        name = _pick(_BUILD_ROOTS, depth, rng)
        if name == "INSERT":
            return Insert(rng.randint(0, 4))
        if name == "LDS":
            return _invent_lds(rng)
        if name == "DO":
            return Do(_invent_any(BUILD, rng, depth + 1),
                      _invent_any(OPTIMIZE, rng, depth + 1))
        return Forall(_invent_lds(rng), _invent_any(OPTIMIZE, rng, depth + 1))
    name = _pick(_OPT_ROOTS, depth, rng)
    if name == "CHAIN":
        return Chain(rng.randint(1, 100), rng.randint(1, 2))
    if name == "TREE":
        return Tree(rng.randint(1, 100), rng.randint(1, 2), rng.randint(0, 4))
    if name == "LNS":
        return Lns(rng.randint(2, 15), rng.randint(1, 30),
                   _invent_any(BUILD, rng, depth + 1))
    if name == "LOOP":
        return Loop(rng.randint(1, 100), _invent_any(OPTIMIZE, rng, depth + 1))
    return Then(_invent_any(OPTIMIZE, rng, depth + 1),
                _invent_any(OPTIMIZE, rng, depth + 1))


def _invent_lds(rng):
    return Lds(rng.randint(0, 4), rng.randint(0, 8), rng.randint(0, 1000))


def _window(goal):
    return goal // 2, goal + goal // 2


def _fallback(sort, goal):
    """Deterministic construction landing inside the goal window."""
    lo, hi = _window(goal)
    if sort == BUILD:
        for n in range(0, 40):
            if lo <= 1000 * 2 ** n <= hi:
                return Lds(3, n, 100)
        return Insert(3)  # unreachable for goal >= 1000
    c = min(100, max(1, round(goal / 1500)))
    r = max(1, round(goal / (1500 * c)))
    return Loop(r, Chain(c, 2))


def invent(sort: str, goal: int, rng) -> Term:
    """Random well-sorted term with estimated cost near `goal`.

    Rejection-samples up to 50 candidates for an estimate within
    [goal/2, 3*goal/2], then falls back to arithmetic construction.
    """
    if sort not in (BUILD, OPTIMIZE):
        raise ValueError(f"unknown sort {sort!r}")
    if goal < 1000:
        raise ValueError("complexity goal must be at least 1000")
    lo, hi = _window(goal)
    for _ in range(50):
        t = _invent_any(sort, rng, 0)
        if lo <= estimate_complexity(t) <= hi:
            return t
    return _fallback(sort, goal)


# ----------------------------------------------------------------- diet

def _leaf_for(slot_is_lds, build_sorted):
    if slot_is_lds:
        return Lds(3, 0, 100)
    return Insert(3) if build_sorted else Chain(1, 1)


def _truncate(t, d, strict_lds=False):
    if not subterms(t):
        return t  # leaves never grow by replacement
    if d <= 0:
        return _leaf_for(strict_lds, is_build(t))
    if isinstance(t, Do):
        return Do(_truncate(t.build, d - 1), _truncate(t.opt, d - 1))
    if isinstance(t, Forall):
        return Forall(_truncate(t.lds, d - 1, strict_lds=True),
                      _truncate(t.opt, d - 1))
    if isinstance(t, Lns):
        return Lns(t.n, t.h, _truncate(t.build, d - 1))
    if isinstance(t, Loop):
        return Loop(t.n, _truncate(t.opt, d - 1))
    if isinstance(t, Then):
        return Then(_truncate(t.first, d - 1), _truncate(t.second, d - 1))
    raise TypeError(f"not a term: {t!r}")


def diet(t: Term, size_bound: int) -> Term:
    """Truncate sub-terms beyond a uniform depth until the size fits.

    Pruned build slots become INSERT(3) (an LDS leaf where the grammar
    demands one) and optimize slots become CHAIN(1,1).
    """
    if size_bound < 1:
        raise ValueError("size bound must be at least 1")
    if term_size(t) <= size_bound:
        return t
    for d in range(term_depth(t), -1, -1):
        cut = _truncate(t, d)
        if term_size(cut) <= size_bound:
            return cut
    return _truncate(t, 0)
