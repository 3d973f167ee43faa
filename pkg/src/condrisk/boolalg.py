"""Finite complete Boolean algebra over the conditioning blocks.

The algebra is the powerset of the atom indices ``1..m``; atom ``j`` stands
for the j-th block of the sub-sigma-algebra.  Elements are immutable value
objects, so they can serve as memoization keys elsewhere.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Sequence

from .errors import CondriskError


class AlgebraMismatchError(CondriskError):
    """Operands belong to different algebras."""


class PartitionError(CondriskError):
    """A list of elements fails to be a partition of unity."""


class NotDisjointError(PartitionError):
    pass


class NotCoveringError(PartitionError):
    pass


class BooleanAlgebra:
    """Powerset algebra on atoms ``1..m``."""

    __slots__ = ("atom_count", "_zero", "_one")

    def __init__(self, atom_count: int):
        if not isinstance(atom_count, int) or atom_count < 1:
            raise ValueError("atom_count must be a positive integer")
        self.atom_count = atom_count
        self._zero = BoolElem(self, ())
        self._one = BoolElem(self, range(1, atom_count + 1))

    @property
    def zero(self) -> "BoolElem":
        return self._zero

    @property
    def one(self) -> "BoolElem":
        return self._one

    def element(self, atoms: Iterable[int]) -> "BoolElem":
        return BoolElem(self, atoms)

    def atom(self, index: int) -> "BoolElem":
        return BoolElem(self, (index,))

    def atom_elements(self) -> tuple:
        return tuple(self.atom(i) for i in range(1, self.atom_count + 1))

    def elements(self) -> Iterator["BoolElem"]:
        """All ``2^m`` elements, in mask order.  Intended for small ``m``."""
        universe = range(1, self.atom_count + 1)
        for mask in range(1 << self.atom_count):
            yield BoolElem(self, (i for i in universe if mask >> (i - 1) & 1))

    def __repr__(self):
        return f"BooleanAlgebra(atoms={self.atom_count})"


class BoolElem:
    """Element of a finite Boolean algebra: a subset of the atom indices."""

    __slots__ = ("algebra", "atoms", "_hash")

    def __init__(self, algebra: BooleanAlgebra, atoms: Iterable[int]):
        atoms = frozenset(atoms)
        for a in atoms:
            if not isinstance(a, int) or not 1 <= a <= algebra.atom_count:
                raise ValueError(f"atom index {a!r} outside 1..{algebra.atom_count}")
        object.__setattr__(self, "algebra", algebra)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "_hash", hash((id(algebra), atoms)))

    def __setattr__(self, name, value):
        raise AttributeError("BoolElem is immutable")

    def _same(self, other: "BoolElem") -> None:
        if not isinstance(other, BoolElem):
            raise TypeError(f"expected BoolElem, got {type(other).__name__}")
        if other.algebra is not self.algebra:
            raise AlgebraMismatchError("elements come from different algebras")

    # lattice operations
    def meet(self, other: "BoolElem") -> "BoolElem":
        self._same(other)
        return BoolElem(self.algebra, self.atoms & other.atoms)

    def join(self, other: "BoolElem") -> "BoolElem":
        self._same(other)
        return BoolElem(self.algebra, self.atoms | other.atoms)

    def complement(self) -> "BoolElem":
        return BoolElem(self.algebra, self.algebra.one.atoms - self.atoms)

    def implies(self, other: "BoolElem") -> "BoolElem":
        # a => b is a^c v b
        self._same(other)
        return self.complement().join(other)

    __and__ = meet
    __or__ = join
    __invert__ = complement

    def __le__(self, other: "BoolElem") -> bool:
        self._same(other)
        return self.atoms <= other.atoms

    def __ge__(self, other: "BoolElem") -> bool:
        self._same(other)
        return self.atoms >= other.atoms

    @property
    def is_zero(self) -> bool:
        return not self.atoms

    @property
    def is_one(self) -> bool:
        return len(self.atoms) == self.algebra.atom_count

    def __eq__(self, other):
        return (
            isinstance(other, BoolElem)
            and other.algebra is self.algebra
            and other.atoms == self.atoms
        )

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        inner = ",".join(str(a) for a in sorted(self.atoms))
        return "{" + inner + "}"


def lattice_ops(a: BoolElem, b: BoolElem | None, op: str) -> BoolElem:
    """Dispatch form of the lattice operations (``b`` ignored for complement)."""
    if op == "meet":
        return a.meet(b)
    if op == "join":
        return a.join(b)
    if op == "complement":
        return a.complement()
    if op == "implies":
        return a.implies(b)
    raise ValueError(f"unknown lattice operation {op!r}")


class PartitionOfUnity:
    """Pairwise disjoint elements whose join is the unity; zero parts dropped."""

    __slots__ = ("parts",)

    def __init__(self, parts: Sequence[BoolElem]):
        parts = tuple(parts)
        if not parts:
            raise ValueError("a partition needs at least one element")
        algebra = parts[0].algebra
        kept = []
        seen: frozenset = frozenset()
        for p in parts:
            parts[0]._same(p)
            if p.is_zero:
                continue
            if seen & p.atoms:
                raise NotDisjointError(f"parts overlap on atoms {sorted(seen & p.atoms)}")
            seen = seen | p.atoms
            kept.append(p)
        if seen != algebra.one.atoms:
            missing = sorted(algebra.one.atoms - seen)
            raise NotCoveringError(f"parts do not cover atoms {missing}")
        object.__setattr__(self, "parts", tuple(kept))

    def __setattr__(self, name, value):
        raise AttributeError("PartitionOfUnity is immutable")

    @property
    def algebra(self) -> BooleanAlgebra:
        return self.parts[0].algebra

    def __iter__(self):
        return iter(self.parts)

    def __len__(self):
        return len(self.parts)

    def __repr__(self):
        return f"PartitionOfUnity({list(self.parts)!r})"


def partition_validate(parts: Sequence[BoolElem]) -> PartitionOfUnity:
    """Normalize a list of elements into a partition of unity, or raise."""
    return PartitionOfUnity(parts)


def iter_partitions(algebra: BooleanAlgebra) -> Iterator[PartitionOfUnity]:
    """All set partitions of the atoms, each as a partition of unity."""

    def rec(atoms: list) -> Iterator[list]:
        if not atoms:
            yield []
            return
        head, rest = atoms[0], atoms[1:]
        for sub in rec(rest):
            yield [[head]] + sub
            for i in range(len(sub)):
                yield sub[:i] + [[head] + sub[i]] + sub[i + 1 :]

    for groups in rec(list(range(1, algebra.atom_count + 1))):
        yield PartitionOfUnity([algebra.element(g) for g in groups])
