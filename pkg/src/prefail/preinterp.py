"""Pre-interpretation algebra.

A pre-interpretation over a domain of size n assigns, for every functor
f/k, a total function from domain-element k-tuples to domain elements.
During search the assignment is partial; completion, term evaluation and
domain permutations live here.  Domain elements are anonymous ordinals
0..n-1, printed ``d0..d(n-1)``; only their isomorphism class matters.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

from .syntax import Compound, FunctorSymbol, Term, Var

__all__ = [
    "Component",
    "PreInterpretation",
    "PartialPreInterpretation",
    "Undetermined",
    "apply_permutation",
    "permute_components",
    "all_permutations",
    "format_preinterp",
    "parse_preinterp",
    "format_element",
]


def format_element(d: int) -> str:
    return f"d{d}"


@dataclass(frozen=True)
class Component:
    """One table entry: functor applied to domain inputs yields output."""

    functor: FunctorSymbol
    inputs: tuple
    output: int

    def __str__(self):
        if self.inputs:
            ins = ",".join(format_element(d) for d in self.inputs)
            return f"{self.functor.name}({ins}) = {format_element(self.output)}"
        return f"{self.functor.name} = {format_element(self.output)}"


class PartialPreInterpretation(Exception):
    """A total pre-interpretation was required but a component is missing."""

    def __init__(self, functor: FunctorSymbol, inputs: tuple):
        super().__init__(f"missing component {functor.name}{inputs!r}")
        self.functor = functor
        self.inputs = inputs


@dataclass(frozen=True)
class Undetermined:
    """Evaluation hit a missing component; names the first one needed."""

    functor: FunctorSymbol
    inputs: tuple


class PreInterpretation:
    """A functional, possibly partial assignment of components."""

    def __init__(self, n: int, table: Optional[dict] = None):
        if n < 1:
            raise ValueError("domain size must be at least 1")
        self.n = n
        self.table = dict(table) if table else {}
        for (f, inputs), out in self.table.items():
            if len(inputs) != f.arity or not (0 <= out < n):
                raise ValueError(f"bad component {f}{inputs} = {out}")
            if any(not (0 <= d < n) for d in inputs):
                raise ValueError(f"bad component inputs {f}{inputs}")
        self._eval_cache: dict = {}

    def lookup(self, functor: FunctorSymbol, inputs: tuple) -> Optional[int]:
        return self.table.get((functor, inputs))

    def components(self) -> Iterable[Component]:
        for (f, inputs), out in self.table.items():
            yield Component(f, inputs, out)

    def is_total(self, functors: Iterable[FunctorSymbol]) -> bool:
        return all(
            (f, inputs) in self.table
            for f in functors
            for inputs in itertools.product(range(self.n), repeat=f.arity)
        )

    def complete(self, functors: Iterable[FunctorSymbol]) -> "PreInterpretation":
        """Fill every missing component with d0; deterministic."""
        table = dict(self.table)
        for f in functors:
            for inputs in itertools.product(range(self.n), repeat=f.arity):
                table.setdefault((f, inputs), 0)
        return PreInterpretation(self.n, table)

    def eval_term(self, t: Term):
        """Bottom-up value of a ground term, or the first missing component."""
        if isinstance(t, Var):
            raise ValueError("eval_term requires a ground term")
        hit = self._eval_cache.get(t)
        if hit is not None:
            return hit
        values = []
        for a in t.args:
            v = self.eval_term(a)
            if isinstance(v, Undetermined):
                return v
            values.append(v)
        inputs = tuple(values)
        out = self.table.get((t.functor, inputs))
        result = Undetermined(t.functor, inputs) if out is None else out
        if not isinstance(result, Undetermined):
            self._eval_cache[t] = result
        return result

    def __eq__(self, other):
        return (
            isinstance(other, PreInterpretation)
            and self.n == other.n
            and self.table == other.table
        )

    def __hash__(self):
        return hash((self.n, frozenset(self.table.items())))

    def __repr__(self):
        return f"PreInterpretation(n={self.n}, {len(self.table)} components)"


def apply_permutation(j: PreInterpretation, pi: tuple) -> PreInterpretation:
    """Image of j under a domain bijection: (f, x̄→y) becomes (f, πx̄→πy)."""
    if sorted(pi) != list(range(j.n)):
        raise ValueError(f"{pi} is not a permutation of 0..{j.n - 1}")
    table = {}
    for (f, inputs), out in j.table.items():
        table[(f, tuple(pi[d] for d in inputs))] = pi[out]
    return PreInterpretation(j.n, table)


def permute_components(components: Iterable[Component], pi: tuple) -> frozenset:
    return frozenset(
        Component(c.functor, tuple(pi[d] for d in c.inputs), pi[c.output])
        for c in components
    )


def all_permutations(n: int):
    return itertools.permutations(range(n))


def format_preinterp(j: PreInterpretation) -> str:
    """Certificate text: a domain header then one sorted line per component."""
    lines = sorted(str(c) for c in j.components())
    return "\n".join([f"domain {j.n}"] + lines) + "\n"


def parse_preinterp(text: str) -> PreInterpretation:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("domain "):
        raise ValueError("missing 'domain <n>' header")
    n = int(lines[0].split()[1])
    table = {}
    for ln in lines[1:]:
        lhs, rhs = ln.split("=")
        lhs, rhs = lhs.strip(), rhs.strip()
        if not rhs.startswith("d"):
            raise ValueError(f"bad component line {ln!r}")
        out = int(rhs[1:])
        if "(" in lhs:
            name, rest = lhs.split("(", 1)
            args = rest.rstrip(")").split(",")
            inputs = tuple(int(a.strip()[1:]) for a in args if a.strip())
        else:
            name, inputs = lhs, ()
        f = FunctorSymbol(name.strip(), len(inputs))
        key = (f, inputs)
        if key in table and table[key] != out:
            raise ValueError(f"conflicting entries for {f}")
        table[key] = out
    return PreInterpretation(n, table)
