"""Quantified integer programs with polyhedral uncertainty.

An instance is a game: variables are set in index order, blocks of existential
variables are chosen by a minimizing player and blocks of universal variables by
a maximizing player whose moves must keep the universal system ``A_A x <= b_A``
satisfiable.  A complete play either violates ``A_E x <= b_E`` (the existential
player loses) or costs ``c x``.

All instance data is exact (:class:`fractions.Fraction`).  Integer-scaled numpy
copies used by the solvers live in :class:`InstanceArrays`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, total_ordering
from typing import Iterable, Mapping, Sequence

import numpy as np

EXISTS = "E"
FORALL = "A"

Partial = Sequence["int | None"]


class InstanceError(ValueError):
    """Raised when an instance violates its structural rules."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


@dataclass(frozen=True)
class Block:
    quantifier: str
    start: int
    stop: int

    @property
    def size(self) -> int:
        return self.stop - self.start

    def __iter__(self):
        return iter(range(self.start, self.stop))


@dataclass(frozen=True)
class Row:
    """Sparse row ``sum coeff_j x_j <= rhs`` with sorted, nonzero entries."""

    coeffs: tuple[tuple[int, Fraction], ...]
    rhs: Fraction

    @classmethod
    def make(cls, coeffs: Mapping[int, object] | Iterable[tuple[int, object]], rhs) -> "Row":
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        merged: dict[int, Fraction] = {}
        for j, a in items:
            merged[int(j)] = merged.get(int(j), Fraction(0)) + Fraction(a)
        return cls(tuple(sorted((j, a) for j, a in merged.items() if a != 0)), Fraction(rhs))

    def activity(self, x: Sequence[int]) -> Fraction:
        return sum((a * x[j] for j, a in self.coeffs), Fraction(0))


@total_ordering
@dataclass(frozen=True)
class Payoff:
    """Outcome of a play: ``LOSS`` (existential constraint violated) or a finite cost.

    ``LOSS`` compares greater than every finite payoff.
    """

    value: Fraction | None

    @property
    def is_loss(self) -> bool:
        return self.value is None

    def __lt__(self, other: "Payoff") -> bool:
        if self.value is None:
            return False
        if other.value is None:
            return True
        return self.value < other.value

    def __repr__(self) -> str:
        return "LOSS" if self.value is None else f"Finite({self.value})"


LOSS = Payoff(None)


def finite(value) -> Payoff:
    return Payoff(Fraction(value))


@dataclass(frozen=True)
class QipInstance:
    num_vars: int
    objective: tuple[Fraction, ...]
    exist_rows: tuple[Row, ...]
    univ_rows: tuple[Row, ...]
    lower: tuple[int, ...]
    upper: tuple[int, ...]
    blocks: tuple[Block, ...]

    @classmethod
    def build(
        cls,
        blocks: Sequence[tuple[str, int]],
        objective: Mapping[int, object] | Sequence[object] = (),
        exist_rows: Iterable[tuple[Mapping[int, object], object]] = (),
        univ_rows: Iterable[tuple[Mapping[int, object], object]] = (),
        bounds: Mapping[int, tuple[int, int]] | None = None,
    ) -> "QipInstance":
        """Convenience constructor from ``(quantifier, size)`` pairs and sparse rows.

        Raises :class:`InstanceError` if the result fails :func:`validate_instance`.
        """
        out_blocks = []
        start = 0
        for q, size in blocks:
            out_blocks.append(Block(q, start, start + size))
            start += size
        n = start
        if isinstance(objective, Mapping):
            c = [Fraction(0)] * n
            for j, v in objective.items():
                c[j] = Fraction(v)
        else:
            c = [Fraction(v) for v in objective] or [Fraction(0)] * n
        lower = [0] * n
        upper = [1] * n
        for j, (lo, hi) in (bounds or {}).items():
            lower[j], upper[j] = int(lo), int(hi)
        inst = cls(
            num_vars=n,
            objective=tuple(c),
            exist_rows=tuple(Row.make(r, b) for r, b in exist_rows),
            univ_rows=tuple(Row.make(r, b) for r, b in univ_rows),
            lower=tuple(lower),
            upper=tuple(upper),
            blocks=tuple(out_blocks),
        )
        report = validate_instance(inst)
        if report:
            raise InstanceError(report)
        return inst

    @cached_property
    def quantifiers(self) -> tuple[str, ...]:
        q = [EXISTS] * self.num_vars
        for b in self.blocks:
            for j in b:
                q[j] = b.quantifier
        return tuple(q)

    @cached_property
    def block_of(self) -> tuple[int, ...]:
        out = [0] * self.num_vars
        for i, b in enumerate(self.blocks):
            for j in b:
                out[j] = i
        return tuple(out)

    @cached_property
    def universal_vars(self) -> tuple[int, ...]:
        return tuple(j for j in range(self.num_vars) if self.quantifiers[j] == FORALL)

    @cached_property
    def existential_vars(self) -> tuple[int, ...]:
        return tuple(j for j in range(self.num_vars) if self.quantifiers[j] == EXISTS)

    @property
    def is_binary(self) -> bool:
        return all(lo == 0 and hi == 1 for lo, hi in zip(self.lower, self.upper))

    @cached_property
    def arrays(self) -> "InstanceArrays":
        return InstanceArrays(self)

    @cached_property
    def universal_system(self):
        from .uncertainty import UniversalSystem

        return UniversalSystem(self)

    def with_exist_rows(self, rows: Iterable[Row]) -> "QipInstance":
        return QipInstance(
            self.num_vars, self.objective, tuple(rows), self.univ_rows,
            self.lower, self.upper, self.blocks,
        )


def _row_scale(row: Row) -> int:
    den = [a.denominator for _, a in row.coeffs] + [row.rhs.denominator]
    return math.lcm(*den)


class InstanceArrays:
    """Integer-scaled and float views of an instance.

    Every row is multiplied by the lcm of its denominators so that activities
    are computed exactly in int64; the objective is scaled by ``obj_scale``.
    """

    def __init__(self, inst: QipInstance):
        n = inst.num_vars
        self.n = n
        self.lower = np.array(inst.lower, dtype=np.int64)
        self.upper = np.array(inst.upper, dtype=np.int64)
        self.is_universal = np.array([q == FORALL for q in inst.quantifiers], dtype=bool)
        self.block_of = np.array(inst.block_of, dtype=np.int64)

        m = len(inst.exist_rows)
        self.A_int = np.zeros((m, n), dtype=np.int64)
        self.b_int = np.zeros(m, dtype=np.int64)
        self.A = np.zeros((m, n))
        self.b = np.zeros(m)
        for i, row in enumerate(inst.exist_rows):
            s = _row_scale(row)
            for j, a in row.coeffs:
                self.A_int[i, j] = int(a * s)
                self.A[i, j] = float(a)
            self.b_int[i] = int(row.rhs * s)
            self.b[i] = float(row.rhs)
        self.pos = np.where(self.A_int > 0, self.A_int, 0)
        self.neg = np.where(self.A_int < 0, self.A_int, 0)

        self.obj_scale = math.lcm(*(c.denominator for c in inst.objective)) if n else 1
        self.c_int = np.array([int(c * self.obj_scale) for c in inst.objective], dtype=np.int64)
        self.c = np.array([float(c) for c in inst.objective])

    def min_activity(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Smallest attainable row activity (scaled ints) over the box ``[lo, hi]``."""
        return self.pos @ lo + self.neg @ hi

    def objective_value(self, x: np.ndarray) -> Fraction:
        return Fraction(int(self.c_int @ x), self.obj_scale)


def validate_instance(inst: QipInstance) -> list[str]:
    """Return a list of structural violations; empty iff the instance is well formed."""
    report: list[str] = []
    n = inst.num_vars
    if len(inst.objective) != n:
        report.append(f"objective has {len(inst.objective)} entries, expected {n}")
    if len(inst.lower) != n or len(inst.upper) != n:
        report.append(f"bounds must have {n} entries")
    for j, (lo, hi) in enumerate(zip(inst.lower, inst.upper)):
        if lo > hi:
            report.append(f"x{j + 1}: lower bound {lo} exceeds upper bound {hi}")

    blocks = inst.blocks
    if not blocks:
        report.append("no blocks")
    else:
        if blocks[0].quantifier != EXISTS:
            report.append("first block must be existential")
        if blocks[-1].quantifier != EXISTS:
            report.append("last block must be existential")
        pos = 0
        for i, b in enumerate(blocks):
            if b.quantifier not in (EXISTS, FORALL):
                report.append(f"block {i + 1}: unknown quantifier {b.quantifier!r}")
            if b.start != pos:
                report.append(f"block {i + 1} starts at {b.start + 1}, expected {pos + 1}")
            if b.size < 0 or (b.size == 0 and i != len(blocks) - 1):
                report.append(f"block {i + 1} is empty")
            if i and b.quantifier == blocks[i - 1].quantifier:
                report.append(f"blocks {i} and {i + 1} share quantifier {b.quantifier}")
            pos = b.stop
        if pos != n:
            report.append(f"blocks cover {pos} variables, expected {n}")
    if report:
        return report

    for kind, rows in (("EXISTS", inst.exist_rows), ("FORALL", inst.univ_rows)):
        for i, row in enumerate(rows):
            for j, _ in row.coeffs:
                if not 0 <= j < n:
                    report.append(f"{kind} row {i + 1}: variable index {j + 1} out of range")
    if report:
        return report

    for i, row in enumerate(inst.univ_rows):
        for j, _ in row.coeffs:
            if inst.quantifiers[j] == EXISTS:
                report.append(f"FORALL row {i + 1}: nonzero coefficient on existential x{j + 1}")
    if not report and not inst.universal_system.extendible({}):
        report.append("empty uncertainty set")
    return report


def evaluate_play(inst: QipInstance, play: Sequence[int]) -> Payoff:
    """Payoff of a complete play: ``LOSS`` iff some existential row is violated."""
    if len(play) != inst.num_vars:
        raise ValueError(f"play has {len(play)} entries, expected {inst.num_vars}")
    x = [int(v) for v in play]
    for j, v in enumerate(x):
        if not inst.lower[j] <= v <= inst.upper[j]:
            raise ValueError(f"x{j + 1} = {v} outside [{inst.lower[j]}, {inst.upper[j]}]")
    for row in inst.exist_rows:
        if row.activity(x) > row.rhs:
            return LOSS
    return Payoff(sum((c * v for c, v in zip(inst.objective, x)), Fraction(0)))


def is_legal_universal(inst: QipInstance, partial: Partial, var: int, value: int) -> bool:
    """Whether the universal player may set ``x[var] = value`` after ``partial``.

    Legal means some integer completion of every still-unassigned universal
    variable satisfies the universal system.
    """
    if inst.quantifiers[var] != FORALL:
        raise ValueError(f"x{var + 1} is not universal")
    if not inst.lower[var] <= value <= inst.upper[var]:
        return False
    fixed = {j: int(partial[j]) for j in inst.universal_vars if partial[j] is not None}
    if var in fixed:
        raise ValueError(f"x{var + 1} is already assigned")
    fixed[var] = int(value)
    return inst.universal_system.extendible(fixed)


# ---------------------------------------------------------------------------
# text format


def _fmt(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _terms(items: Iterable[tuple[int, Fraction]]) -> str:
    return " ".join(f"{j + 1}:{_fmt(a)}" for j, a in items)


def write_instance(inst: QipInstance) -> str:
    lines = [f"NVARS {inst.num_vars}"]
    lines.append("BLOCKS " + " ".join(f"{b.size}:{b.quantifier}" for b in inst.blocks))
    lines.append(("OBJ " + _terms((j, c) for j, c in enumerate(inst.objective) if c)).rstrip())
    bounds = [
        f"{j + 1}:{lo}:{hi}"
        for j, (lo, hi) in enumerate(zip(inst.lower, inst.upper))
        if (lo, hi) != (0, 1)
    ]
    if bounds:
        lines.append("BOUNDS " + " ".join(bounds))
    for kind, rows in (("EXISTS", inst.exist_rows), ("FORALL", inst.univ_rows)):
        for row in rows:
            body = _terms(row.coeffs)
            lines.append(f"{kind} {body} <= {_fmt(row.rhs)}" if body else f"{kind} <= {_fmt(row.rhs)}")
    return "\n".join(lines) + "\n"


def _parse_frac(tok: str, lineno: int) -> Fraction:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(lineno, f"bad rational {tok!r}") from None


def _parse_index(tok: str, n: int, lineno: int) -> int:
    try:
        j = int(tok)
    except ValueError:
        raise ParseError(lineno, f"bad variable index {tok!r}") from None
    if not 1 <= j <= n:
        raise ParseError(lineno, f"variable index {j} outside 1..{n}")
    return j - 1


def _parse_terms(toks: list[str], n: int, lineno: int) -> dict[int, Fraction]:
    out: dict[int, Fraction] = {}
    for tok in toks:
        parts = tok.split(":")
        if len(parts) != 2:
            raise ParseError(lineno, f"expected j:coeff, got {tok!r}")
        j = _parse_index(parts[0], n, lineno)
        if j in out:
            raise ParseError(lineno, f"duplicate variable {j + 1}")
        out[j] = _parse_frac(parts[1], lineno)
    return out


def parse_instance(text: str) -> QipInstance:
    n: int | None = None
    blocks: list[tuple[str, int]] | None = None
    objective: dict[int, Fraction] = {}
    bounds: dict[int, tuple[int, int]] = {}
    rows: dict[str, list[tuple[dict[int, Fraction], Fraction]]] = {"EXISTS": [], "FORALL": []}

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *toks = line.split()
        key = key.upper()
        if key == "NVARS":
            if n is not None:
                raise ParseError(lineno, "NVARS given twice")
            if len(toks) != 1 or not toks[0].isdigit():
                raise ParseError(lineno, "NVARS expects one nonnegative integer")
            n = int(toks[0])
            continue
        if n is None:
            raise ParseError(lineno, f"{key} before NVARS")
        if key == "BLOCKS":
            blocks = []
            for tok in toks:
                size, _, q = tok.partition(":")
                q = q.upper()
                if not size.isdigit() or q not in (EXISTS, FORALL):
                    raise ParseError(lineno, f"expected size:E or size:A, got {tok!r}")
                blocks.append((q, int(size)))
            total = sum(s for _, s in blocks)
            if total != n:
                raise ParseError(lineno, f"blocks cover {total} variables, expected {n}")
        elif key == "OBJ":
            for j, a in _parse_terms(toks, n, lineno).items():
                if j in objective:
                    raise ParseError(lineno, f"duplicate objective entry for variable {j + 1}")
                objective[j] = a
        elif key == "BOUNDS":
            for tok in toks:
                parts = tok.split(":")
                if len(parts) != 3:
                    raise ParseError(lineno, f"expected j:l:u, got {tok!r}")
                j = _parse_index(parts[0], n, lineno)
                try:
                    bounds[j] = (int(parts[1]), int(parts[2]))
                except ValueError:
                    raise ParseError(lineno, f"bounds must be integers, got {tok!r}") from None
        elif key in rows:
            if len(toks) < 2 or toks[-2] != "<=":
                raise ParseError(lineno, f"{key} row must end with '<= rhs'")
            coeffs = _parse_terms(toks[:-2], n, lineno)
            rows[key].append((coeffs, _parse_frac(toks[-1], lineno)))
        else:
            raise ParseError(lineno, f"unknown keyword {key}")

    if n is None:
        raise ParseError(0, "missing NVARS")
    if blocks is None:
        raise ParseError(0, "missing BLOCKS")
    return QipInstance.build(blocks, objective, rows["EXISTS"], rows["FORALL"], bounds)


def golden_game() -> QipInstance:
    """The four-variable binary instance ``E x1 A x2 E x3 A x4`` with optimum -1."""
    return QipInstance.build(
        [(EXISTS, 1), (FORALL, 1), (EXISTS, 1), (FORALL, 1), (EXISTS, 0)],
        objective=[-2, 1, -1, -1],
        exist_rows=[
            ({0: 1, 1: 1, 2: 1, 3: 1}, 3),
            ({1: -1, 2: -1, 3: 1}, 0),
        ],
    )
