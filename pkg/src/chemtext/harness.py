"""Per-task evaluation pipelines.

Each ``eval_*`` function consumes aligned :class:`PredictionPair` lists for a
single task and produces a :class:`MetricReport`. All aggregations are
commutative reductions, so shuffling the pairs never changes a value.

Task conventions:

- mol2text: BLEU-2/4, ROUGE-1/2/L and METEOR-lite over word tokens.
- text2mol: character-level BLEU over the raw SMILES strings, exact-match
  accuracy under canonical-SMILES equality (an invalid prediction counts as
  incorrect), mean Levenshtein over raw strings, mean Tanimoto over the
  keys/path/morgan fingerprints restricted to pairs where BOTH sides are
  valid (skipped pairs are counted and reported), and validity
  (valid predictions / total).
- forward: top-1 accuracy under canonical-SMILES equality.
- retro: roundtrip accuracy through a ForwardOracle: the predicted
  precursors are fed to the oracle and the regenerated product must match
  the reference product canonically; oracle failures count as incorrect.
- para2actions: BLEU-4 over word tokens plus exact-string accuracy after
  whitespace normalization.

Reports serialize to canonical JSON (sorted keys, metric values with six
fractional digits) via :func:`report_to_json`.

:func:`frechet_distance` is the generic Gaussian-fit distance used by
feature-based corpus metrics; callers supply the feature vectors (a learned
chemistry feature extractor is out of scope here) and label the result with
their feature source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from chemtext.dataset import TaskKind
from chemtext.errors import ChemtextError
from chemtext.fingerprints import (
    KeyDefinition,
    key_fingerprint,
    morgan_fingerprint,
    path_fingerprint,
    tanimoto,
)
from chemtext.smiles import CanonError, LexError, Molecule, ParseError, parse_smiles, validate
from chemtext.smiles.canon import canonicalize
from chemtext.smiles.tokenize import tokenize as smiles_tokenize
from chemtext.textmetrics import (
    EmptyCorpusError,
    MetricValue,
    TokenizedText,
    bleu,
    char_tokenize,
    levenshtein,
    meteor_lite,
    rouge_l,
    rouge_n,
    word_tokenize,
)

__all__ = [
    "DimensionMismatchError",
    "FingerprintConfig",
    "ForwardOracle",
    "IllConditionedError",
    "LookupOracle",
    "MetricReport",
    "MixedTasksError",
    "OracleError",
    "PredictionPair",
    "eval_forward",
    "eval_mol2text",
    "eval_pairs",
    "eval_para2actions",
    "eval_retro",
    "eval_text2mol",
    "frechet_distance",
    "report_to_json",
    "smiles_bleu_tokenize",
]


class MixedTasksError(ChemtextError):
    """A pair list mixes tasks or does not match the requested task."""


class OracleError(ChemtextError):
    """A ForwardOracle could not produce a product."""


class DimensionMismatchError(ChemtextError):
    """Feature sets of different dimensionality."""


class IllConditionedError(ChemtextError):
    """Covariance estimation is under-determined or numerically broken."""


@dataclass(frozen=True)
class PredictionPair:
    """One model output against its reference."""

    task: TaskKind
    prediction: str
    reference: str
    id: str = ""


@dataclass(frozen=True)
class FingerprintConfig:
    """Parameters for the text2mol fingerprint metrics."""

    radius: int = 2
    nbits: int = 2048
    path_max_len: int = 7
    key_table: tuple[KeyDefinition, ...] | None = None


@dataclass(frozen=True)
class MetricReport:
    """Metrics plus tallies for one task evaluation."""

    task: TaskKind
    metrics: dict[str, MetricValue]
    n_total: int
    n_valid_pred: int = 0
    n_skipped: int = 0
    skip_reasons: dict[str, int] = field(default_factory=dict)
    omitted_metrics: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n_valid_pred > self.n_total:
            raise ValueError("n_valid_pred cannot exceed n_total")

    def value(self, name: str) -> float:
        return self.metrics[name].value


class ForwardOracle(Protocol):
    """Single-operation interface standing in for a forward-reaction model.

    ``supports_concurrent_calls`` declares whether the harness may call
    ``predict_product`` from several workers; the shipped harness is
    sequential either way, which trivially honors a False value.
    """

    supports_concurrent_calls: bool

    def predict_product(self, precursors: str) -> str:
        """Product SMILES for dot-joined precursors; raises OracleError on
        failure. Must be deterministic for a given input."""
        ...


class LookupOracle:
    """ForwardOracle backed by a precursors -> product table.

    Keys are normalized to canonical SMILES when possible, so any atom
    ordering of the same precursor set hits the same entry.
    """

    supports_concurrent_calls = True

    def __init__(self, table: dict[str, str]) -> None:
        self._table: dict[str, str] = {}
        for precursors, product in table.items():
            self._table[self._normalize(precursors)] = product

    @staticmethod
    def _normalize(smiles: str) -> str:
        try:
            return canonicalize(parse_smiles(smiles))
        except (LexError, ParseError, CanonError):
            return smiles

    def predict_product(self, precursors: str) -> str:
        key = self._normalize(precursors)
        if key not in self._table:
            raise OracleError(f"no product known for precursors {precursors!r}")
        return self._table[key]


def _check_task(pairs: Sequence[PredictionPair], task: TaskKind) -> None:
    if not pairs:
        raise EmptyCorpusError("no prediction pairs")
    bad = [p.task for p in pairs if p.task is not task]
    if bad:
        raise MixedTasksError(
            f"expected only {task.value} pairs, found {bad[0].value}"
        )


def smiles_bleu_tokenize(smiles: str) -> TokenizedText:
    """SMILES-token-level tokenization for the text2mol BLEU; falls back to
    characters when the string does not tokenize."""
    try:
        tokens = tuple(t.text for t in smiles_tokenize(smiles))
    except LexError:
        return char_tokenize(smiles)
    if not tokens:
        return char_tokenize(smiles)
    return TokenizedText(tokens=tokens, source=smiles)


def _parse_valid(smiles: str) -> Molecule | None:
    try:
        mol = parse_smiles(smiles)
    except (LexError, ParseError):
        return None
    return mol if validate(mol).valid else None


def _canonical_or_none(smiles: str) -> str | None:
    mol = _parse_valid(smiles)
    return canonicalize(mol) if mol is not None else None


def eval_mol2text(pairs: Sequence[PredictionPair]) -> MetricReport:
    """Molecular captioning: the six word-level text metrics."""
    _check_task(pairs, TaskKind.MOL2TEXT)
    cands = [word_tokenize(p.prediction) for p in pairs]
    refs = [word_tokenize(p.reference) for p in pairs]
    metrics = {
        "bleu2": bleu(cands, refs, 2),
        "bleu4": bleu(cands, refs, 4),
        "rouge1": rouge_n(cands, refs, 1),
        "rouge2": rouge_n(cands, refs, 2),
        "rougeL": rouge_l(cands, refs),
        "meteor_lite": meteor_lite(cands, refs),
    }
    return MetricReport(task=TaskKind.MOL2TEXT, metrics=metrics, n_total=len(pairs))


def eval_text2mol(
    pairs: Sequence[PredictionPair],
    fp_config: FingerprintConfig | None = None,
    bleu_tokenizer: Callable[[str], "TokenizedText"] = char_tokenize,
) -> MetricReport:
    """Text-conditional de novo generation: SMILES-side metrics.

    ``bleu_tokenizer`` defaults to character-level tokenization of the raw
    strings; pass :func:`smiles_bleu_tokenize` for SMILES-token BLEU
    instead.
    """
    _check_task(pairs, TaskKind.TEXT2MOL)
    config = fp_config or FingerprintConfig()
    cands = [bleu_tokenizer(p.prediction) for p in pairs]
    refs = [bleu_tokenizer(p.reference) for p in pairs]
    char_bleu = bleu(cands, refs, 4)
    metrics: dict[str, MetricValue] = {
        "bleu": MetricValue("bleu", char_bleu.value, char_bleu.support)
    }

    exact = 0
    n_valid = 0
    lev_total = 0
    fts_sums = {"maccs_fts": 0.0, "rdk_fts": 0.0, "morgan_fts": 0.0}
    fts_support = 0
    for pair in pairs:
        lev_total += levenshtein(pair.prediction, pair.reference)
        pred_mol = _parse_valid(pair.prediction)
        ref_mol = _parse_valid(pair.reference)
        if pred_mol is not None:
            n_valid += 1
        if pred_mol is not None and ref_mol is not None:
            if canonicalize(pred_mol) == canonicalize(ref_mol):
                exact += 1
            fts_sums["maccs_fts"] += tanimoto(
                key_fingerprint(pred_mol, config.key_table),
                key_fingerprint(ref_mol, config.key_table),
            )
            fts_sums["rdk_fts"] += tanimoto(
                path_fingerprint(pred_mol, config.path_max_len, config.nbits),
                path_fingerprint(ref_mol, config.path_max_len, config.nbits),
            )
            fts_sums["morgan_fts"] += tanimoto(
                morgan_fingerprint(pred_mol, config.radius, config.nbits),
                morgan_fingerprint(ref_mol, config.radius, config.nbits),
            )
            fts_support += 1

    n = len(pairs)
    metrics["accuracy"] = MetricValue("accuracy", exact / n, n)
    metrics["levenshtein"] = MetricValue("levenshtein", lev_total / n, n)
    metrics["validity"] = MetricValue("validity", n_valid / n, n)
    omitted: dict[str, str] = {}
    if fts_support:
        for name, total in fts_sums.items():
            metrics[name] = MetricValue(name, total / fts_support, fts_support)
    else:
        for name in fts_sums:
            omitted[name] = "no pair with both sides valid"
    skipped = n - fts_support
    return MetricReport(
        task=TaskKind.TEXT2MOL,
        metrics=metrics,
        n_total=n,
        n_valid_pred=n_valid,
        n_skipped=skipped,
        skip_reasons={"invalid_smiles_side": skipped} if skipped else {},
        omitted_metrics=omitted,
    )


def eval_forward(pairs: Sequence[PredictionPair]) -> MetricReport:
    """Forward reaction prediction: top-1 canonical-equality accuracy."""
    _check_task(pairs, TaskKind.FORWARD)
    exact = 0
    n_valid = 0
    for pair in pairs:
        pred = _canonical_or_none(pair.prediction)
        if pred is not None:
            n_valid += 1
        if pred is not None and pred == _canonical_or_none(pair.reference):
            exact += 1
    n = len(pairs)
    metrics = {"accuracy": MetricValue("accuracy", exact / n, n)}
    return MetricReport(
        task=TaskKind.FORWARD, metrics=metrics, n_total=n, n_valid_pred=n_valid
    )


def eval_retro(pairs: Sequence[PredictionPair], oracle: ForwardOracle) -> MetricReport:
    """Retrosynthesis roundtrip accuracy.

    The prediction holds the proposed precursors, the reference the true
    product. A pair scores when oracle(predicted precursors) regenerates the
    reference product under canonical equality.
    """
    _check_task(pairs, TaskKind.RETRO)
    hits = 0
    n_valid = 0
    failures = 0
    for pair in pairs:
        if _parse_valid(pair.prediction) is not None:
            n_valid += 1
        try:
            product = oracle.predict_product(pair.prediction)
        except OracleError:
            failures += 1
            continue
        regenerated = _canonical_or_none(product)
        if regenerated is not None and regenerated == _canonical_or_none(pair.reference):
            hits += 1
    n = len(pairs)
    metrics = {"roundtrip_accuracy": MetricValue("roundtrip_accuracy", hits / n, n)}
    return MetricReport(
        task=TaskKind.RETRO,
        metrics=metrics,
        n_total=n,
        n_valid_pred=n_valid,
        skip_reasons={"oracle_failure": failures} if failures else {},
    )


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def eval_para2actions(pairs: Sequence[PredictionPair]) -> MetricReport:
    """Paragraph-to-actions: BLEU-4 plus normalized exact-match accuracy."""
    _check_task(pairs, TaskKind.PARA2ACTIONS)
    cands = [word_tokenize(p.prediction) for p in pairs]
    refs = [word_tokenize(p.reference) for p in pairs]
    exact = sum(
        1 for p in pairs if _normalize_ws(p.prediction) == _normalize_ws(p.reference)
    )
    n = len(pairs)
    metrics = {
        "bleu4": bleu(cands, refs, 4),
        "accuracy": MetricValue("accuracy", exact / n, n),
    }
    return MetricReport(task=TaskKind.PARA2ACTIONS, metrics=metrics, n_total=n)


def eval_pairs(
    pairs: Sequence[PredictionPair],
    task: TaskKind,
    oracle: ForwardOracle | None = None,
    fp_config: FingerprintConfig | None = None,
) -> MetricReport:
    """Dispatch to the task-specific evaluator."""
    if task is TaskKind.MOL2TEXT:
        return eval_mol2text(pairs)
    if task is TaskKind.TEXT2MOL:
        return eval_text2mol(pairs, fp_config)
    if task is TaskKind.FORWARD:
        return eval_forward(pairs)
    if task is TaskKind.PARA2ACTIONS:
        return eval_para2actions(pairs)
    if oracle is None:
        raise OracleError("retro evaluation requires a ForwardOracle")
    return eval_retro(pairs, oracle)


# -- canonical JSON report ----------------------------------------------------


def _json_escape(text: str) -> str:
    out = ['"']
    for ch in text:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def _json_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.6f}"
    if isinstance(value, str):
        return _json_escape(value)
    if isinstance(value, dict):
        parts = [
            f"{_json_escape(str(k))}: {_json_value(v)}" for k, v in sorted(value.items())
        ]
        return "{" + ", ".join(parts) + "}"
    raise TypeError(f"unsupported report value {value!r}")


def report_to_json(report: MetricReport) -> str:
    """Canonical JSON: sorted keys at every level, metric values as decimal
    numbers with exactly six fractional digits, counts as integers."""
    payload = {
        "counts": {
            "n_skipped": report.n_skipped,
            "n_total": report.n_total,
            "n_valid_pred": report.n_valid_pred,
        },
        "metrics": {name: mv.value for name, mv in report.metrics.items()},
        "omitted": dict(report.omitted_metrics),
        "skip_reasons": dict(report.skip_reasons),
        "supports": {name: mv.support for name, mv in report.metrics.items()},
        "task": report.task.value,
    }
    return _json_value(payload)


# -- generic Frechet distance --------------------------------------------------


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(matrix)
    if np.any(eigvals < -1e-8):
        raise IllConditionedError(
            f"matrix has negative eigenvalue {eigvals.min():.3e}"
        )
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def frechet_distance(features_a, features_b, *, ridge: float = 0.0) -> float:
    """||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)) between Gaussians
    fitted to two feature collections (sample covariance, ddof=1).

    The cross term uses the symmetrized product
    ``S1^(1/2) S2 S1^(1/2)`` whose square root comes from a symmetric
    eigendecomposition; eigenvalues below -1e-8 raise IllConditionedError,
    tiny negatives are clamped to zero. Each set needs at least d+1 vectors
    unless ``ridge`` > 0, which adds ``ridge * I`` to both covariances.
    """
    a = np.asarray(features_a, dtype=np.float64)
    b = np.asarray(features_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionMismatchError("feature sets must be 2-D (n, d) arrays")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatchError(
            f"feature dimensions differ: {a.shape[1]} vs {b.shape[1]}"
        )
    d = a.shape[1]
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    if ridge == 0.0 and (a.shape[0] < d + 1 or b.shape[0] < d + 1):
        raise IllConditionedError(
            f"need at least d+1 = {d + 1} vectors per set (or enable ridge)"
        )
    mu_a = a.mean(axis=0)
    mu_b = b.mean(axis=0)
    sigma_a = np.atleast_2d(np.cov(a, rowvar=False)) + ridge * np.eye(d)
    sigma_b = np.atleast_2d(np.cov(b, rowvar=False)) + ridge * np.eye(d)
    root_a = _psd_sqrt(sigma_a)
    cross = _psd_sqrt(root_a @ sigma_b @ root_a)
    value = float(
        np.sum((mu_a - mu_b) ** 2)
        + np.trace(sigma_a)
        + np.trace(sigma_b)
        - 2.0 * np.trace(cross)
    )
    if not math.isfinite(value):
        raise IllConditionedError("non-finite distance")
    return max(value, 0.0)
