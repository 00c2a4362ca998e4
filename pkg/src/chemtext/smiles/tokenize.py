"""SMILES tokenizer.

Splits a SMILES string into a flat token sequence for the parser:

- organic-subset atoms: B, C, N, O, P, S, F, Cl, Br, I (Cl/Br consume two
  characters) and the aromatic forms b, c, n, o, p, s
- bracket atoms: everything from ``[`` to the matching ``]`` is one token
- bond symbols: ``- = # :`` plus the directional markers ``/`` and ``\\``
- ring closures: a single digit 0-9 or a two-digit ``%nn`` label
- branches ``(`` ``)`` and the fragment separator ``.``

Tokenization is purely lexical: bracket contents and structural balance are
checked later by the parser, so e.g. ``"C(C"`` tokenizes fine and only fails
to parse.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from chemtext.errors import ChemtextError

ORGANIC_ONE_LETTER = frozenset("BCNOPSFI")
ORGANIC_TWO_LETTER = ("Cl", "Br")
AROMATIC_ORGANIC = frozenset("bcnops")
BOND_CHARS = frozenset("-=#:/\\")


class LexError(ChemtextError):
    """Character outside the SMILES alphabet or an unterminated bracket atom."""

    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} (position {position})")
        self.position = position


class TokenKind(enum.Enum):
    ATOM_ORGANIC = "atom-organic"
    ATOM_BRACKET = "atom-bracket"
    BOND = "bond"
    RING_CLOSURE = "ring-closure"
    BRANCH_OPEN = "branch-open"
    BRANCH_CLOSE = "branch-close"
    DOT = "dot"


@dataclass(frozen=True)
class Token:
    """One lexical token.

    ``text`` is the exact matched substring, so concatenating ``text`` over a
    token sequence reproduces the input. ``position`` is the 0-based offset of
    the first character.
    """

    kind: TokenKind
    text: str
    position: int


def tokenize(smiles: str) -> list[Token]:
    """Tokenize a SMILES string.

    Raises:
        LexError: on a character outside the SMILES alphabet or an
            unterminated bracket atom. The reported position always lies
            inside the input string.
    """
    tokens: list[Token] = []
    i = 0
    n = len(smiles)
    while i < n:
        ch = smiles[i]
        if ch == "[":
            end = smiles.find("]", i + 1)
            if end < 0:
                raise LexError("unterminated bracket atom", i)
            tokens.append(Token(TokenKind.ATOM_BRACKET, smiles[i : end + 1], i))
            i = end + 1
        elif smiles[i : i + 2] in ORGANIC_TWO_LETTER:
            tokens.append(Token(TokenKind.ATOM_ORGANIC, smiles[i : i + 2], i))
            i += 2
        elif ch in ORGANIC_ONE_LETTER or ch in AROMATIC_ORGANIC:
            tokens.append(Token(TokenKind.ATOM_ORGANIC, ch, i))
            i += 1
        elif ch in BOND_CHARS:
            tokens.append(Token(TokenKind.BOND, ch, i))
            i += 1
        elif ch.isdigit() and ch.isascii():
            tokens.append(Token(TokenKind.RING_CLOSURE, ch, i))
            i += 1
        elif ch == "%":
            pair = smiles[i + 1 : i + 3]
            if len(pair) != 2 or not (pair.isdigit() and pair.isascii()):
                raise LexError("expected two digits after '%'", i)
            tokens.append(Token(TokenKind.RING_CLOSURE, smiles[i : i + 3], i))
            i += 3
        elif ch == "(":
            tokens.append(Token(TokenKind.BRANCH_OPEN, ch, i))
            i += 1
        elif ch == ")":
            tokens.append(Token(TokenKind.BRANCH_CLOSE, ch, i))
            i += 1
        elif ch == ".":
            tokens.append(Token(TokenKind.DOT, ch, i))
            i += 1
        else:
            raise LexError(f"character {ch!r} outside the SMILES alphabet", i)
    return tokens


def ring_label(token: Token) -> int:
    """Numeric label of a ring-closure token (``7`` -> 7, ``%12`` -> 12)."""
    if token.kind is not TokenKind.RING_CLOSURE:
        raise ValueError(f"not a ring-closure token: {token!r}")
    text = token.text
    return int(text[1:]) if text.startswith("%") else int(text)
