"""Molecular bit fingerprints and Tanimoto similarity.

Three schemes back the corpus-level fingerprint-similarity metrics:

- ``morgan``: circular environments up to a radius, one bit per hashed
  environment (folded modulo ``nbits``)
- ``path``: linear simple paths of 1..max_len bonds, hashed on the
  lexicographically smaller of the forward/reverse element+bond encodings
- ``keys``: a fixed table of substructure questions, one bit per key
  (see :mod:`chemtext.fingerprints.keys`)

No bit-for-bit parity with any external toolkit is claimed; the schemes are
pinned by the hashing and encoding rules in this module so fingerprints are
stable across platforms and releases. The hash is 64-bit FNV-1a over the
UTF-8 serialization spelled out in each function.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from chemtext.errors import ChemtextError
from chemtext.fingerprints.keys import (
    KeyDefinition,
    KeyTableError,
    count_matches,
    default_key_table,
    load_key_table,
    parse_pattern,
)
from chemtext.smiles.parse import Molecule
from chemtext.smiles.valence import validate

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

# Simple-path enumeration is exponential in principle; valence bounds keep
# real molecules tame, but unknown bracket elements have unchecked degree.
_MAX_PATHS_WALKED = 500_000


class FingerprintError(ChemtextError):
    """Fingerprint requested for an invalid molecule."""


class SchemeMismatchError(ChemtextError):
    """Tanimoto between fingerprints of different scheme or width."""


@dataclass(frozen=True)
class BitFingerprint:
    """Fixed-width bit vector tagged with its scheme.

    Two fingerprints are comparable only if both ``scheme`` and ``nbits``
    match. ``bits`` holds the set bit indices, all < ``nbits``.
    """

    scheme: str
    nbits: int
    bits: frozenset[int]

    def __post_init__(self) -> None:
        if self.nbits <= 0:
            raise ValueError("nbits must be positive")
        if any(b < 0 or b >= self.nbits for b in self.bits):
            raise ValueError("bit index out of range")


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a, the fixed fingerprint hash."""
    value = _FNV_OFFSET
    for byte in data:
        value ^= byte
        value = (value * _FNV_PRIME) & _MASK64
    return value


def _require_valid(mol: Molecule) -> None:
    result = validate(mol)
    if not result.valid:
        raise FingerprintError("; ".join(result.reasons))


def _atom_seed(mol: Molecule, i: int) -> str:
    a = mol.atoms[i]
    return (
        f"{a.symbol}|{int(a.aromatic)}|{a.charge}|{a.isotope or 0}"
        f"|{mol.degree(i)}|{a.hydrogens or 0}"
    )


def morgan_fingerprint(mol: Molecule, radius: int = 2, nbits: int = 2048) -> BitFingerprint:
    """Circular fingerprint.

    Layer 0 hashes the atom invariant string
    ``symbol|aromatic|charge|isotope|degree|hcount``; layer r hashes
    ``E|<own layer r-1 hash>|<sorted (bond code, neighbor layer r-1 hash)
    pairs>``. Every (atom, layer) hash sets bit ``hash % nbits``.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    _require_valid(mol)
    n = len(mol.atoms)
    current = [fnv1a64(f"A|{_atom_seed(mol, i)}".encode()) for i in range(n)]
    bits = {h % nbits for h in current}
    for _ in range(radius):
        nxt: list[int] = []
        for i in range(n):
            parts = sorted(
                (_bond_code_text(mol, bi), current[j]) for j, bi in mol.adjacency[i]
            )
            payload = f"E|{current[i]:016x}|" + "|".join(
                f"{code}:{h:016x}" for code, h in parts
            )
            nxt.append(fnv1a64(payload.encode()))
        current = nxt
        bits.update(h % nbits for h in current)
    return BitFingerprint(scheme="morgan", nbits=nbits, bits=frozenset(bits))


def _bond_code_text(mol: Molecule, bond_index: int) -> str:
    bond = mol.bonds[bond_index]
    return ":" if bond.aromatic else str(bond.order)


def path_fingerprint(mol: Molecule, max_len: int = 7, nbits: int = 2048) -> BitFingerprint:
    """Linear-path fingerprint.

    Enumerates simple paths of 1..max_len bonds. Each path is encoded as
    alternating atom and bond codes (aromatic atoms lowercase); the
    lexicographically smaller of the forward and reverse renderings is
    hashed. Longer ``max_len`` yields a superset of bits.
    """
    if max_len < 1:
        raise ValueError("max_len must be positive")
    _require_valid(mol)
    atom_code = [
        a.symbol.lower() if a.aromatic else a.symbol for a in mol.atoms
    ]
    bond_text = {bi: _path_bond_text(mol, bi) for bi in range(len(mol.bonds))}
    encodings: set[str] = set()
    walked = 0

    def walk(path_atoms: list[int], path_bonds: list[int]) -> None:
        nonlocal walked
        if path_bonds:
            walked += 1
            if walked > _MAX_PATHS_WALKED:
                raise FingerprintError("path enumeration budget exceeded")
            forward = _render_path(path_atoms, path_bonds, atom_code, bond_text)
            backward = _render_path(path_atoms[::-1], path_bonds[::-1], atom_code, bond_text)
            encodings.add(min(forward, backward))
        if len(path_bonds) == max_len:
            return
        tail = path_atoms[-1]
        on_path = set(path_atoms)
        for nxt, bi in mol.adjacency[tail]:
            if nxt in on_path:
                continue
            path_atoms.append(nxt)
            path_bonds.append(bi)
            walk(path_atoms, path_bonds)
            path_atoms.pop()
            path_bonds.pop()

    for start in range(len(mol.atoms)):
        walk([start], [])
    bits = frozenset(fnv1a64(e.encode()) % nbits for e in encodings)
    return BitFingerprint(scheme="path", nbits=nbits, bits=bits)


def _path_bond_text(mol: Molecule, bond_index: int) -> str:
    bond = mol.bonds[bond_index]
    if bond.aromatic:
        return ":"
    return {1: "-", 2: "=", 3: "#"}[bond.order]


def _render_path(atoms: list[int], bonds: list[int], atom_code, bond_text) -> str:
    parts = [atom_code[atoms[0]]]
    for atom, bond in zip(atoms[1:], bonds):
        parts.append(bond_text[bond])
        parts.append(atom_code[atom])
    return "".join(parts)


def key_fingerprint(
    mol: Molecule, key_table: Sequence[KeyDefinition] | None = None
) -> BitFingerprint:
    """Substructure-key fingerprint: bit ``id - 1`` is set iff the pattern
    matches at least its count threshold. With ``key_table`` omitted the
    shipped 166-entry table is used."""
    if key_table is None:
        key_table = default_key_table()
    table = list(key_table)
    if not table:
        raise KeyTableError("key table must be non-empty")
    _require_valid(mol)
    nbits = max(key.id for key in table)
    bits: set[int] = set()
    for key in table:
        if count_matches(mol, key.pattern, limit=key.count_threshold) >= key.count_threshold:
            bits.add(key.id - 1)
    return BitFingerprint(scheme="keys", nbits=nbits, bits=frozenset(bits))


def tanimoto(a: BitFingerprint, b: BitFingerprint) -> float:
    """|A intersect B| / |A union B|; 0.0 when both sets are empty (the 0/0
    case is pinned to zero, matching common toolkit behavior)."""
    if a.scheme != b.scheme or a.nbits != b.nbits:
        raise SchemeMismatchError(
            f"cannot compare {a.scheme}/{a.nbits} with {b.scheme}/{b.nbits}"
        )
    union = len(a.bits | b.bits)
    if union == 0:
        return 0.0
    return len(a.bits & b.bits) / union


__all__ = [
    "BitFingerprint",
    "FingerprintError",
    "KeyDefinition",
    "KeyTableError",
    "SchemeMismatchError",
    "default_key_table",
    "fnv1a64",
    "key_fingerprint",
    "load_key_table",
    "morgan_fingerprint",
    "parse_pattern",
    "path_fingerprint",
    "tanimoto",
]
