"""SMILES parser: token sequence to molecular graph.

The parser resolves branches and ring closures into an explicit atom/bond
graph and assigns implicit hydrogen counts from the default valence table at
finalize time. Aromaticity is taken syntactically from lowercase notation; no
ring perception or kekulization is performed.

Bracket atoms support the standard field order
``[isotope? symbol chirality? Hcount? charge? :map?]``; atom maps are accepted
and ignored. Ring-closure labels are reusable once closed, and closures may
span ``.`` separators (so ``C1.C1`` parses to ethane written as two dot
fragments).

Bond stereo markers ``/`` and ``\\`` and the chirality tags ``@``/``@@`` are
preserved as annotations. A bond's ``stereo`` field is oriented: ``up`` means
the bond was written ``/`` when traversing from ``a`` to ``b``; the same bond
read in the other direction is ``down``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Sequence

from chemtext.errors import ChemtextError
from chemtext.smiles.tokenize import Token, TokenKind, ring_label, tokenize

# Lowercase symbols allowed as aromatic atoms inside brackets.
AROMATIC_BRACKET = frozenset({"b", "c", "n", "o", "p", "s", "se", "as"})

BOND_ORDER = {"-": 1, "=": 2, "#": 3}


class ParseError(ChemtextError):
    """Structurally invalid SMILES (unbalanced branches, bad rings, ...)."""


@dataclass(frozen=True)
class Atom:
    """One atom of the graph.

    ``hydrogens`` is the resolved total hydrogen count: the explicit count for
    bracket atoms, the valence-table implicit count otherwise. ``None`` is
    only legal while a molecule is under construction.
    """

    symbol: str
    aromatic: bool = False
    charge: int = 0
    isotope: int | None = None
    hydrogens: int | None = None
    chirality: str | None = None


@dataclass(frozen=True)
class Bond:
    """Bond between atom indices ``a`` and ``b``.

    ``order`` is 1, 2 or 3; aromatic bonds carry ``order == 1`` plus the
    ``aromatic`` flag. ``stereo`` is ``None``, ``"up"`` or ``"down"``,
    oriented from ``a`` to ``b``.
    """

    a: int
    b: int
    order: int = 1
    aromatic: bool = False
    stereo: str | None = None


@dataclass(frozen=True)
class Molecule:
    """Immutable molecular graph."""

    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    fragment_count: int = 1

    @classmethod
    def from_atoms_bonds(
        cls,
        atoms: Iterable[Atom],
        bonds: Iterable[Bond],
        fragment_count: int | None = None,
    ) -> "Molecule":
        """Build a molecule, resolving implicit hydrogens and checking
        structural invariants (valid distinct endpoints, no duplicate bonds,
        aromatic bonds only between aromatic atoms)."""
        from chemtext.smiles.valence import implicit_hydrogen_count

        atom_list = list(atoms)
        bond_list = list(bonds)
        n = len(atom_list)
        seen_pairs: set[tuple[int, int]] = set()
        incident: list[list[tuple[int, bool]]] = [[] for _ in range(n)]
        for bond in bond_list:
            if not (0 <= bond.a < n and 0 <= bond.b < n):
                raise ParseError(f"bond endpoint out of range: {bond}")
            if bond.a == bond.b:
                raise ParseError(f"bond endpoints must be distinct: {bond}")
            pair = (min(bond.a, bond.b), max(bond.a, bond.b))
            if pair in seen_pairs:
                raise ParseError(f"duplicate bond between atoms {pair}")
            seen_pairs.add(pair)
            if bond.aromatic and not (
                atom_list[bond.a].aromatic and atom_list[bond.b].aromatic
            ):
                raise ParseError(
                    f"aromatic bond between non-aromatic atoms {pair}"
                )
            incident[bond.a].append((bond.order, bond.aromatic))
            incident[bond.b].append((bond.order, bond.aromatic))
        resolved: list[Atom] = []
        for i, atom in enumerate(atom_list):
            if atom.hydrogens is None:
                h = implicit_hydrogen_count(atom.symbol, atom.aromatic, incident[i])
                atom = replace(atom, hydrogens=h)
            resolved.append(atom)
        if fragment_count is None:
            fragment_count = max(1, _component_count(n, bond_list))
        return cls(tuple(resolved), tuple(bond_list), fragment_count)

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per atom: tuple of ``(neighbor index, bond index)`` pairs."""
        adj: list[list[tuple[int, int]]] = [[] for _ in self.atoms]
        for bi, bond in enumerate(self.bonds):
            adj[bond.a].append((bond.b, bi))
            adj[bond.b].append((bond.a, bi))
        return tuple(tuple(entries) for entries in adj)

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    @cached_property
    def ring_bond_indices(self) -> frozenset[int]:
        """Indices of bonds that lie on a cycle (non-bridge edges)."""
        return _non_bridge_edges(len(self.atoms), self.bonds)

    @cached_property
    def ring_atom_indices(self) -> frozenset[int]:
        atoms: set[int] = set()
        for bi in self.ring_bond_indices:
            atoms.add(self.bonds[bi].a)
            atoms.add(self.bonds[bi].b)
        return frozenset(atoms)

    def ring_bond_count(self, i: int) -> int:
        return sum(1 for _, bi in self.adjacency[i] if bi in self.ring_bond_indices)


def _component_count(n_atoms: int, bonds: Sequence[Bond]) -> int:
    parent = list(range(n_atoms))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for bond in bonds:
        ra, rb = find(bond.a), find(bond.b)
        if ra != rb:
            parent[ra] = rb
    return len({find(i) for i in range(n_atoms)})


def _non_bridge_edges(n_atoms: int, bonds: Sequence[Bond]) -> frozenset[int]:
    """Bridge detection via iterative DFS low-links; returns ring bonds."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n_atoms)]
    for bi, bond in enumerate(bonds):
        adj[bond.a].append((bond.b, bi))
        adj[bond.b].append((bond.a, bi))
    disc = [-1] * n_atoms
    low = [0] * n_atoms
    bridges: set[int] = set()
    timer = 0
    for root in range(n_atoms):
        if disc[root] >= 0:
            continue
        stack: list[tuple[int, int, int]] = [(root, -1, 0)]
        while stack:
            node, via_bond, ptr = stack[-1]
            if ptr == 0:
                disc[node] = low[node] = timer
                timer += 1
            if ptr < len(adj[node]):
                stack[-1] = (node, via_bond, ptr + 1)
                nxt, bi = adj[node][ptr]
                if bi == via_bond:
                    continue
                if disc[nxt] >= 0:
                    low[node] = min(low[node], disc[nxt])
                else:
                    stack.append((nxt, bi, 0))
            else:
                stack.pop()
                if stack:
                    parent_node = stack[-1][0]
                    low[parent_node] = min(low[parent_node], low[node])
                    if low[node] > disc[parent_node]:
                        bridges.add(via_bond)
    return frozenset(set(range(len(bonds))) - bridges)


@dataclass
class _PendingBond:
    order: int | None = None
    aromatic: bool | None = None  # True only for an explicit ':'
    stereo: str | None = None


class _Parser:
    def __init__(self, tokens: Sequence[Token]) -> None:
        self.tokens = tokens
        self.atoms: list[Atom] = []
        self.bonds: list[Bond] = []
        self.bond_pairs: set[tuple[int, int]] = set()
        self.prev: int | None = None
        self.pending: _PendingBond | None = None
        self.branch_stack: list[int] = []
        # label -> (atom index, pending bond at the opening site)
        self.open_rings: dict[int, tuple[int, _PendingBond | None]] = {}
        self.fragment_count = 1

    def parse(self) -> Molecule:
        if not self.tokens:
            raise ParseError("empty SMILES")
        for token in self.tokens:
            kind = token.kind
            if kind in (TokenKind.ATOM_ORGANIC, TokenKind.ATOM_BRACKET):
                self._on_atom(token)
            elif kind is TokenKind.BOND:
                self._on_bond(token)
            elif kind is TokenKind.RING_CLOSURE:
                self._on_ring(token)
            elif kind is TokenKind.BRANCH_OPEN:
                self._on_branch_open(token)
            elif kind is TokenKind.BRANCH_CLOSE:
                self._on_branch_close(token)
            else:
                self._on_dot(token)
        if self.pending is not None:
            raise ParseError("bond symbol with no following atom at end of input")
        if self.open_rings:
            labels = ", ".join(str(k) for k in sorted(self.open_rings))
            raise ParseError(f"unclosed ring label(s): {labels}")
        if self.branch_stack:
            raise ParseError("unclosed branch at end of input")
        if self.prev is None:
            raise ParseError("dangling dot at end of input")
        return Molecule.from_atoms_bonds(
            self.atoms, self.bonds, fragment_count=self.fragment_count
        )

    # -- token handlers -------------------------------------------------

    def _on_atom(self, token: Token) -> None:
        if token.kind is TokenKind.ATOM_ORGANIC:
            # hydrogens stay None here; Molecule.from_atoms_bonds resolves them
            text = token.text
            if text.islower():
                atom = Atom(symbol=text.upper(), aromatic=True)
            else:
                atom = Atom(symbol=text, aromatic=False)
        else:
            atom = _parse_bracket(token)
        index = len(self.atoms)
        self.atoms.append(atom)
        if self.prev is not None:
            self._add_bond(self.prev, index, self.pending)
        self.pending = None
        self.prev = index

    def _on_bond(self, token: Token) -> None:
        if self.pending is not None:
            raise ParseError(f"two bond symbols in a row at position {token.position}")
        if self.prev is None:
            raise ParseError(f"bond symbol with no preceding atom at position {token.position}")
        ch = token.text
        pending = _PendingBond()
        if ch == ":":
            pending.aromatic = True
            pending.order = 1
        elif ch in "/\\":
            pending.order = 1
            pending.stereo = "up" if ch == "/" else "down"
        else:
            pending.order = BOND_ORDER[ch]
        self.pending = pending

    def _on_ring(self, token: Token) -> None:
        if self.prev is None:
            raise ParseError(f"ring closure with no preceding atom at position {token.position}")
        label = ring_label(token)
        if label in self.open_rings:
            other, opening = self.open_rings.pop(label)
            if other == self.prev:
                raise ParseError(f"ring label {label} closes onto its own atom")
            self._close_ring(other, self.prev, opening, self.pending, label)
        else:
            self.open_rings[label] = (self.prev, self.pending)
        self.pending = None

    def _close_ring(
        self,
        a: int,
        b: int,
        opening: _PendingBond | None,
        closing: _PendingBond | None,
        label: int,
    ) -> None:
        order_a = opening.order if opening else None
        order_b = closing.order if closing else None
        arom_a = opening.aromatic if opening else None
        arom_b = closing.aromatic if closing else None
        if order_a is not None and order_b is not None:
            same_arom = bool(arom_a) == bool(arom_b)
            if order_a != order_b or not same_arom:
                raise ParseError(f"conflicting bond symbols on ring label {label}")
        order = order_a if order_a is not None else order_b
        explicit_aromatic = bool(arom_a) or bool(arom_b)
        stereo: str | None = None
        # Stereo is oriented from a to b. A marker written at the closing
        # site describes the b->a direction and is flipped.
        stereo_a = opening.stereo if opening else None
        stereo_b = closing.stereo if closing else None
        if stereo_b is not None:
            stereo_b = "down" if stereo_b == "up" else "up"
        if stereo_a is not None and stereo_b is not None and stereo_a != stereo_b:
            raise ParseError(f"conflicting stereo markers on ring label {label}")
        stereo = stereo_a if stereo_a is not None else stereo_b
        self._append_bond(a, b, order, explicit_aromatic, stereo)

    def _add_bond(self, a: int, b: int, pending: _PendingBond | None) -> None:
        order = pending.order if pending else None
        explicit_aromatic = bool(pending.aromatic) if pending else False
        stereo = pending.stereo if pending else None
        self._append_bond(a, b, order, explicit_aromatic, stereo)

    def _append_bond(
        self,
        a: int,
        b: int,
        order: int | None,
        explicit_aromatic: bool,
        stereo: str | None,
    ) -> None:
        pair = (min(a, b), max(a, b))
        if pair in self.bond_pairs:
            raise ParseError(f"duplicate bond between atoms {pair}")
        aromatic = explicit_aromatic
        if order is None:
            if self.atoms[a].aromatic and self.atoms[b].aromatic:
                aromatic = True
            order = 1
        if aromatic and not (self.atoms[a].aromatic and self.atoms[b].aromatic):
            raise ParseError(f"aromatic bond between non-aromatic atoms {pair}")
        if stereo is not None and (order != 1 or aromatic):
            raise ParseError("stereo marker on a non-single bond")
        self.bond_pairs.add(pair)
        self.bonds.append(Bond(a=a, b=b, order=order, aromatic=aromatic, stereo=stereo))

    def _on_branch_open(self, token: Token) -> None:
        if self.prev is None:
            raise ParseError(f"branch with no root atom at position {token.position}")
        if self.pending is not None:
            raise ParseError(f"bond symbol before branch at position {token.position}")
        self.branch_stack.append(self.prev)

    def _on_branch_close(self, token: Token) -> None:
        if not self.branch_stack:
            raise ParseError(f"unbalanced ')' at position {token.position}")
        if self.pending is not None:
            raise ParseError(f"dangling bond inside branch at position {token.position}")
        root = self.branch_stack.pop()
        if self.prev == root:
            raise ParseError(f"empty branch at position {token.position}")
        self.prev = root

    def _on_dot(self, token: Token) -> None:
        if self.branch_stack:
            raise ParseError(f"dot inside branch at position {token.position}")
        if self.pending is not None:
            raise ParseError(f"bond symbol before dot at position {token.position}")
        if self.prev is None:
            raise ParseError(f"dangling dot at position {token.position}")
        self.prev = None
        self.fragment_count += 1


def _parse_bracket(token: Token) -> Atom:
    inner = token.text[1:-1]
    pos = token.position
    i = 0
    n = len(inner)

    def fail(msg: str) -> ParseError:
        return ParseError(f"{msg} in bracket atom {token.text!r} at position {pos}")

    isotope: int | None = None
    start = i
    while i < n and inner[i].isdigit():
        i += 1
    if i > start:
        isotope = int(inner[start:i])

    aromatic = False
    if len(inner[i : i + 2]) == 2 and inner[i : i + 2] in ("se", "as"):
        symbol = inner[i : i + 2].capitalize()
        aromatic = True
        i += 2
    elif i < n and inner[i].islower():
        if inner[i] not in AROMATIC_BRACKET:
            raise fail(f"unknown aromatic symbol {inner[i]!r}")
        symbol = inner[i].upper()
        aromatic = True
        i += 1
    elif i < n and inner[i].isupper():
        symbol = inner[i]
        i += 1
        if i < n and inner[i].islower():
            symbol += inner[i]
            i += 1
    else:
        raise fail("expected element symbol")

    chirality: str | None = None
    if i < n and inner[i] == "@":
        i += 1
        if i < n and inner[i] == "@":
            chirality = "@@"
            i += 1
        else:
            chirality = "@"

    hydrogens = 0
    if i < n and inner[i] == "H":
        i += 1
        start = i
        while i < n and inner[i].isdigit():
            i += 1
        hydrogens = int(inner[start:i]) if i > start else 1

    charge = 0
    if i < n and inner[i] in "+-":
        sign = 1 if inner[i] == "+" else -1
        ch = inner[i]
        run = 0
        while i < n and inner[i] == ch:
            run += 1
            i += 1
        start = i
        while i < n and inner[i].isdigit():
            i += 1
        if i > start:
            if run > 1:
                raise fail("charge combines repeated signs with digits")
            charge = sign * int(inner[start:i])
        else:
            charge = sign * run

    if i < n and inner[i] == ":":
        # atom map label: accepted and ignored
        i += 1
        start = i
        while i < n and inner[i].isdigit():
            i += 1
        if i == start:
            raise fail("expected digits after ':'")

    if i != n:
        raise fail(f"unexpected {inner[i:]!r}")
    return Atom(
        symbol=symbol,
        aromatic=aromatic,
        charge=charge,
        isotope=isotope,
        hydrogens=hydrogens,
        chirality=chirality,
    )


def parse(tokens: Sequence[Token]) -> Molecule:
    """Parse a token sequence (from :func:`chemtext.smiles.tokenize.tokenize`)
    into a :class:`Molecule`.

    Raises:
        ParseError: on unbalanced branches, reused-unclosed or conflicting
            ring labels, bond symbols with no following atom, or dangling
            dots.
    """
    return _Parser(tokens).parse()


def parse_smiles(smiles: str) -> Molecule:
    """Tokenize and parse in one step."""
    return parse(tokenize(smiles))
