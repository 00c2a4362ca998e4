"""SMILES tokenizing, parsing, validation and canonicalization."""

from chemtext.smiles.canon import CanonError, canonical_smiles, canonicalize, random_smiles
from chemtext.smiles.parse import (
    Atom,
    Bond,
    Molecule,
    ParseError,
    parse,
    parse_smiles,
)
from chemtext.smiles.tokenize import LexError, Token, TokenKind, tokenize
from chemtext.smiles.valence import (
    DEFAULT_VALENCES,
    ValidityResult,
    implicit_hydrogen_count,
    validate,
    validate_smiles,
)

__all__ = [
    "Atom",
    "Bond",
    "CanonError",
    "DEFAULT_VALENCES",
    "LexError",
    "Molecule",
    "ParseError",
    "Token",
    "TokenKind",
    "ValidityResult",
    "canonical_smiles",
    "canonicalize",
    "implicit_hydrogen_count",
    "parse",
    "parse_smiles",
    "random_smiles",
    "tokenize",
    "validate",
    "validate_smiles",
]
