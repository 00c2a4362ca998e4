"""Substructure key tables and their pattern mini-language.

A key table file has one key per line::

    id<TAB>count_threshold<TAB>pattern

with ``#`` comments and blank lines ignored (UTF-8). The shipped table
``data/structure-keys-v1.keys`` holds 166 keys approximating the classic
166-bit key set with patterns expressible in this grammar.

Pattern grammar (rooted tree, SMILES-flavored)::

    pattern := atom tail
    tail    := ( "(" bond pattern ")" )* ( bond pattern )?
    atom    := class [ "[" attr ("," attr)* "]" ]
    class   := element symbol | "*" (any) | "X" (halogen) | "Q" (hetero, not C)
    bond    := "-" | "=" | "#" | ":" | "~"
    attr    := "ar" | "al"
             | ("chg" | "rb" | "H" | "deg") ("=" | ">=" | "<=") integer

``ar``/``al`` constrain aromaticity; ``chg`` is formal charge, ``rb`` the
number of incident ring bonds, ``H`` the total hydrogen count, ``deg`` the
heavy-atom degree. ``~`` matches any bond; ``-`` matches only plain single
bonds (not aromatic).

Matching embeds the pattern tree injectively (distinct pattern nodes map to
distinct atoms). The match count is the number of distinct atom SETS
supporting an embedding, so a symmetric pattern like ``O-C-O`` counts each
acetal site once.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable

from chemtext.errors import ChemtextError
from chemtext.smiles.parse import Molecule

_HALOGENS = frozenset({"F", "Cl", "Br", "I"})
_ATTR_RE = re.compile(r"(chg|rb|H|deg)(>=|<=|=)([+-]?\d+)")


class KeyTableError(ChemtextError):
    """Malformed key table file or pattern."""


@dataclass(frozen=True)
class PatternAtom:
    element: str | None  # None for "*"; "X"/"Q" become class_
    class_: str | None   # "X" or "Q"
    aromatic: bool | None
    constraints: tuple[tuple[str, str, int], ...]  # (field, op, value)


@dataclass(frozen=True)
class PatternNode:
    atom: PatternAtom
    # (bond char, child) pairs
    children: tuple[tuple[str, "PatternNode"], ...]


@dataclass(frozen=True)
class KeyDefinition:
    """One key: 1-based id, minimum match count, compiled pattern."""

    id: int
    count_threshold: int
    pattern: PatternNode
    source: str


def parse_pattern(text: str) -> PatternNode:
    """Compile a pattern string; raises KeyTableError on grammar errors."""
    node, pos = _parse_pattern(text, 0)
    if pos != len(text):
        raise KeyTableError(f"trailing characters in pattern {text!r}")
    return node


def _parse_pattern(text: str, pos: int) -> tuple[PatternNode, int]:
    atom, pos = _parse_atom(text, pos)
    children: list[tuple[str, PatternNode]] = []
    while pos < len(text) and text[pos] == "(":
        if pos + 1 >= len(text) or text[pos + 1] not in "-=#:~":
            raise KeyTableError(f"expected bond after '(' in {text!r}")
        bond = text[pos + 1]
        child, pos = _parse_pattern(text, pos + 2)
        if pos >= len(text) or text[pos] != ")":
            raise KeyTableError(f"missing ')' in pattern {text!r}")
        pos += 1
        children.append((bond, child))
    if pos < len(text) and text[pos] in "-=#:~":
        bond = text[pos]
        child, pos = _parse_pattern(text, pos + 1)
        children.append((bond, child))
    return PatternNode(atom=atom, children=tuple(children)), pos


def _parse_atom(text: str, pos: int) -> tuple[PatternAtom, int]:
    if pos >= len(text):
        raise KeyTableError(f"expected atom at end of pattern {text!r}")
    ch = text[pos]
    element: str | None = None
    class_: str | None = None
    if ch == "*":
        pos += 1
    elif ch in ("X", "Q"):
        class_ = ch
        pos += 1
    elif ch.isupper():
        element = ch
        pos += 1
        if pos < len(text) and text[pos].islower():
            element += text[pos]
            pos += 1
    else:
        raise KeyTableError(f"bad atom class at position {pos} in {text!r}")
    aromatic: bool | None = None
    constraints: list[tuple[str, str, int]] = []
    if pos < len(text) and text[pos] == "[":
        end = text.find("]", pos)
        if end < 0:
            raise KeyTableError(f"unterminated attribute list in {text!r}")
        for raw in text[pos + 1 : end].split(","):
            raw = raw.strip()
            if raw == "ar":
                aromatic = True
            elif raw == "al":
                aromatic = False
            else:
                m = _ATTR_RE.fullmatch(raw)
                if not m:
                    raise KeyTableError(f"bad attribute {raw!r} in {text!r}")
                constraints.append((m.group(1), m.group(2), int(m.group(3))))
        pos = end + 1
    return (
        PatternAtom(
            element=element,
            class_=class_,
            aromatic=aromatic,
            constraints=tuple(constraints),
        ),
        pos,
    )


def load_key_table(lines: Iterable[str]) -> list[KeyDefinition]:
    """Parse a key table from text lines; validates unique positive ids,
    positive thresholds and pattern syntax."""
    table: list[KeyDefinition] = []
    seen_ids: set[int] = set()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        # '#' is the triple-bond character, so only whole-line comments
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise KeyTableError(f"line {lineno}: expected id<TAB>threshold<TAB>pattern")
        try:
            key_id = int(parts[0])
            threshold = int(parts[1])
        except ValueError as exc:
            raise KeyTableError(f"line {lineno}: {exc}") from exc
        if key_id < 1:
            raise KeyTableError(f"line {lineno}: id must be >= 1")
        if key_id in seen_ids:
            raise KeyTableError(f"line {lineno}: duplicate id {key_id}")
        if threshold < 1:
            raise KeyTableError(f"line {lineno}: threshold must be >= 1")
        seen_ids.add(key_id)
        try:
            pattern = parse_pattern(parts[2])
        except KeyTableError as exc:
            raise KeyTableError(f"line {lineno}: {exc}") from exc
        table.append(
            KeyDefinition(id=key_id, count_threshold=threshold, pattern=pattern,
                          source=parts[2])
        )
    if not table:
        raise KeyTableError("key table must be non-empty")
    return table


_DEFAULT_TABLE: list[KeyDefinition] | None = None


def default_key_table() -> list[KeyDefinition]:
    """The shipped 166-entry table (cached)."""
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        text = (
            resources.files("chemtext.fingerprints")
            .joinpath("data/structure-keys-v1.keys")
            .read_text(encoding="utf-8")
        )
        _DEFAULT_TABLE = load_key_table(text.splitlines())
    return _DEFAULT_TABLE


# -- matching -----------------------------------------------------------------


def _pattern_elements(node: PatternNode, out: list[str]) -> None:
    if node.atom.element is not None:
        out.append(node.atom.element)
    for _, child in node.children:
        _pattern_elements(child, out)


def _atom_matches(mol: Molecule, i: int, patom: PatternAtom) -> bool:
    atom = mol.atoms[i]
    if patom.element is not None and atom.symbol != patom.element:
        return False
    if patom.class_ == "X" and atom.symbol not in _HALOGENS:
        return False
    if patom.class_ == "Q" and atom.symbol in ("C", "H"):
        return False
    if patom.aromatic is not None and atom.aromatic != patom.aromatic:
        return False
    for field, op, value in patom.constraints:
        if field == "chg":
            have = atom.charge
        elif field == "rb":
            have = mol.ring_bond_count(i)
        elif field == "H":
            have = atom.hydrogens or 0
        else:  # deg
            have = mol.degree(i)
        if op == "=" and have != value:
            return False
        if op == ">=" and have < value:
            return False
        if op == "<=" and have > value:
            return False
    return True


def _bond_matches(mol: Molecule, bond_index: int, spec: str) -> bool:
    bond = mol.bonds[bond_index]
    if spec == "~":
        return True
    if spec == ":":
        return bond.aromatic
    if bond.aromatic:
        return False
    return bond.order == {"-": 1, "=": 2, "#": 3}[spec]


def count_matches(mol: Molecule, pattern: PatternNode, limit: int | None = None) -> int:
    """Number of distinct atom sets supporting an embedding of ``pattern``.

    ``limit`` allows early exit once that many distinct sets are found
    (thresholds only need "at least k").
    """
    needed: list[str] = []
    _pattern_elements(pattern, needed)
    if needed:
        present = {a.symbol for a in mol.atoms}
        if any(symbol not in present for symbol in needed):
            return 0
    found: set[frozenset[int]] = set()

    def stop() -> bool:
        return limit is not None and len(found) >= limit

    def embed(obligations: tuple, used: set[int]) -> bool:
        """Each obligation is (node, mapped atom, next child index). Returns
        True once ``limit`` distinct embeddings were recorded."""
        if not obligations:
            found.add(frozenset(used))
            return stop()
        node, atom_index, child_pos = obligations[-1]
        if child_pos == len(node.children):
            return embed(obligations[:-1], used)
        bond_spec, child = node.children[child_pos]
        advanced = obligations[:-1] + ((node, atom_index, child_pos + 1),)
        for neighbor, bond_index in mol.adjacency[atom_index]:
            if neighbor in used:
                continue
            if not _bond_matches(mol, bond_index, bond_spec):
                continue
            if not _atom_matches(mol, neighbor, child.atom):
                continue
            used.add(neighbor)
            done = embed(advanced + ((child, neighbor, 0),), used)
            used.discard(neighbor)
            if done:
                return True
        return False

    for root in range(len(mol.atoms)):
        if not _atom_matches(mol, root, pattern.atom):
            continue
        if embed(((pattern, root, 0),), {root}):
            break
    return len(found)


def matches(mol: Molecule, pattern: PatternNode) -> bool:
    return count_matches(mol, pattern, limit=1) >= 1
