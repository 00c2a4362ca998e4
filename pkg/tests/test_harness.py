import json
import random

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from chemtext.dataset import TaskKind
from chemtext.harness import (
    DimensionMismatchError,
    FingerprintConfig,
    IllConditionedError,
    LookupOracle,
    MixedTasksError,
    OracleError,
    PredictionPair,
    eval_forward,
    eval_mol2text,
    eval_pairs,
    eval_para2actions,
    eval_retro,
    eval_text2mol,
    frechet_distance,
    report_to_json,
)
from chemtext.textmetrics import (
    EmptyCorpusError,
    bleu,
    meteor_lite,
    rouge_l,
    rouge_n,
    word_tokenize,
)


def pairs_for(task, rows):
    return [
        PredictionPair(task=task, prediction=p, reference=r, id=str(i))
        for i, (p, r) in enumerate(rows)
    ]


# -- mol2text -----------------------------------------------------------------


def test_mol2text_perfect_predictions():
    rows = [("an alcohol with two carbons", "an alcohol with two carbons")] * 3
    report = eval_mol2text(pairs_for(TaskKind.MOL2TEXT, rows))
    for name in ("bleu2", "bleu4", "rouge1", "rouge2", "rougeL"):
        assert report.value(name) == pytest.approx(1.0), name
    assert set(report.metrics) == {
        "bleu2", "bleu4", "rouge1", "rouge2", "rougeL", "meteor_lite",
    }


def test_mol2text_empty_corpus():
    with pytest.raises(EmptyCorpusError):
        eval_mol2text([])


def test_mol2text_composes_with_standalone_metrics():
    rows = [
        ("the molecule is an acid", "the molecule is a strong acid"),
        ("a blue dye", "a red dye"),
        ("it is a fatty acid", "it is a fatty acid found in plants"),
        ("aromatic ring compound", "an aromatic compound"),
        ("sugar", "a sugar"),
    ]
    report = eval_mol2text(pairs_for(TaskKind.MOL2TEXT, rows))
    cands = [word_tokenize(p) for p, _ in rows]
    refs = [word_tokenize(r) for _, r in rows]
    assert report.value("bleu2") == pytest.approx(bleu(cands, refs, 2).value)
    assert report.value("bleu4") == pytest.approx(bleu(cands, refs, 4).value)
    assert report.value("rouge1") == pytest.approx(rouge_n(cands, refs, 1).value)
    assert report.value("rouge2") == pytest.approx(rouge_n(cands, refs, 2).value)
    assert report.value("rougeL") == pytest.approx(rouge_l(cands, refs).value)
    assert report.value("meteor_lite") == pytest.approx(meteor_lite(cands, refs).value)


def test_mixed_tasks_rejected():
    bad = pairs_for(TaskKind.MOL2TEXT, [("a", "a")]) + pairs_for(
        TaskKind.TEXT2MOL, [("C", "C")]
    )
    with pytest.raises(MixedTasksError):
        eval_mol2text(bad)


# -- text2mol -----------------------------------------------------------------


def test_text2mol_perfect():
    rows = [("CCO", "CCO"), ("c1ccccc1", "c1ccccc1")]
    report = eval_text2mol(pairs_for(TaskKind.TEXT2MOL, rows))
    assert report.value("accuracy") == 1.0
    assert report.value("validity") == 1.0
    assert report.value("levenshtein") == 0.0
    for name in ("maccs_fts", "rdk_fts", "morgan_fts"):
        assert report.value(name) == pytest.approx(1.0)
    assert report.n_skipped == 0


def test_text2mol_all_unparseable():
    rows = [("C(", "CCO"), ("C(", "CC")]
    report = eval_text2mol(pairs_for(TaskKind.TEXT2MOL, rows))
    assert report.value("validity") == 0.0
    assert report.value("accuracy") == 0.0
    assert report.n_valid_pred == 0
    assert "maccs_fts" not in report.metrics
    assert report.omitted_metrics["maccs_fts"] == "no pair with both sides valid"
    assert report.n_skipped == 2


def test_text2mol_mixed_counting():
    rows = [
        ("CCO", "CCO"),        # exact match (canonical)
        ("CCN", "CCO"),        # valid non-match
        ("C(", "CCO"),         # invalid
        ("xx", "CCO"),         # invalid
    ]
    report = eval_text2mol(pairs_for(TaskKind.TEXT2MOL, rows))
    assert report.value("accuracy") == 0.25
    assert report.value("validity") == 0.5
    assert report.metrics["maccs_fts"].support == 2
    assert report.n_skipped == 2
    assert report.skip_reasons == {"invalid_smiles_side": 2}


def test_text2mol_canonical_equality_not_string_equality():
    rows = [("OCC", "CCO")]
    report = eval_text2mol(pairs_for(TaskKind.TEXT2MOL, rows))
    assert report.value("accuracy") == 1.0
    assert report.value("levenshtein") > 0


def test_text2mol_accuracy_le_validity():
    rng = random.Random(4)
    choices = ["CCO", "CCN", "C(", "c1ccccc1", "not smiles", "CC(=O)O"]
    rows = [(rng.choice(choices), rng.choice(choices[:3])) for _ in range(40)]
    report = eval_text2mol(pairs_for(TaskKind.TEXT2MOL, rows))
    assert report.value("accuracy") <= report.value("validity")


@given(st.lists(st.text(max_size=15), min_size=1, max_size=4))
@settings(max_examples=60, deadline=None)
def test_text2mol_total_on_arbitrary_predictions(preds):
    # model outputs can be any string; the evaluator must never raise
    rows = [(p, "CCO") for p in preds]
    report = eval_text2mol(pairs_for(TaskKind.TEXT2MOL, rows))
    assert 0.0 <= report.value("validity") <= 1.0
    assert report.value("accuracy") <= report.value("validity")


def test_text2mol_fp_config_respected():
    rows = [("CCO", "CCC")]
    small = eval_text2mol(
        pairs_for(TaskKind.TEXT2MOL, rows), FingerprintConfig(radius=0, nbits=64)
    )
    default = eval_text2mol(pairs_for(TaskKind.TEXT2MOL, rows))
    assert small.value("morgan_fts") != default.value("morgan_fts")


def test_text2mol_bleu_tokenizer_override():
    from chemtext.harness import smiles_bleu_tokenize

    assert smiles_bleu_tokenize("CCl").tokens == ("C", "Cl")
    assert smiles_bleu_tokenize("C\x00").tokens == ("C", "\x00")  # fallback
    rows = [("ClCC", "CCCl"), ("CBr", "CBr")]
    chars = eval_text2mol(pairs_for(TaskKind.TEXT2MOL, rows))
    smi_tok = eval_text2mol(
        pairs_for(TaskKind.TEXT2MOL, rows), bleu_tokenizer=smiles_bleu_tokenize
    )
    assert chars.value("bleu") != smi_tok.value("bleu")
    # non-BLEU metrics unaffected by the tokenizer choice
    assert chars.value("accuracy") == smi_tok.value("accuracy")


# -- forward ------------------------------------------------------------------


def test_forward_accuracy():
    rows = [("CCO", "CCO"), ("OCC", "CCO"), ("C(", "CC"), ("CC", "CCC")]
    report = eval_forward(pairs_for(TaskKind.FORWARD, rows))
    # exact, reordered-correct, invalid, wrong
    assert report.value("accuracy") == 0.5


def test_forward_half_invalid():
    rows = [("CCO", "CCO"), ("C(", "CCO")]
    report = eval_forward(pairs_for(TaskKind.FORWARD, rows))
    assert report.value("accuracy") == 0.5


# -- retro --------------------------------------------------------------------


def test_retro_lookup_oracle_full_coverage():
    rows = [("CC.O", "CCO"), ("CBr.N", "CN")]
    oracle = LookupOracle({"CC.O": "CCO", "CBr.N": "CN"})
    report = eval_retro(pairs_for(TaskKind.RETRO, rows), oracle)
    assert report.value("roundtrip_accuracy") == 1.0


def test_retro_constant_oracle_zero():
    class ConstantOracle:
        supports_concurrent_calls = True

        def predict_product(self, precursors: str) -> str:
            return "C"

    rows = [("CC.O", "CCO"), ("CBr.N", "CN")]
    report = eval_retro(pairs_for(TaskKind.RETRO, rows), ConstantOracle())
    assert report.value("roundtrip_accuracy") == 0.0


def test_retro_partial_lookup():
    rows = [("CC.O", "CCO"), ("CBr.N", "CN"), ("CI.O", "CO")]
    oracle = LookupOracle({"CC.O": "CCO", "CBr.N": "CN"})
    report = eval_retro(pairs_for(TaskKind.RETRO, rows), oracle)
    assert report.value("roundtrip_accuracy") == pytest.approx(2 / 3)
    assert report.skip_reasons == {"oracle_failure": 1}


def test_lookup_oracle_canonical_keys():
    oracle = LookupOracle({"CC.O": "CCO"})
    assert oracle.predict_product("O.CC") == "CCO"
    with pytest.raises(OracleError):
        oracle.predict_product("CN")


def test_eval_pairs_retro_requires_oracle():
    rows = [("CC.O", "CCO")]
    with pytest.raises(OracleError):
        eval_pairs(pairs_for(TaskKind.RETRO, rows), TaskKind.RETRO)


# -- para2actions -------------------------------------------------------------


def test_para2actions_exact():
    rows = [("ADD water; STIR.", "ADD water; STIR.")] * 2
    report = eval_para2actions(pairs_for(TaskKind.PARA2ACTIONS, rows))
    assert report.value("accuracy") == 1.0
    assert report.value("bleu4") == pytest.approx(1.0)


def test_para2actions_whitespace_normalized():
    rows = [("ADD  water;  STIR.", "ADD water; STIR.")]
    report = eval_para2actions(pairs_for(TaskKind.PARA2ACTIONS, rows))
    assert report.value("accuracy") == 1.0


def test_para2actions_counting():
    rows = [("a", "a"), ("b", "b"), ("c", "c"), ("d", "x")]
    report = eval_para2actions(pairs_for(TaskKind.PARA2ACTIONS, rows))
    assert report.value("accuracy") == 0.75


def test_para2actions_all_different():
    rows = [("alpha", "beta"), ("gamma", "delta")]
    report = eval_para2actions(pairs_for(TaskKind.PARA2ACTIONS, rows))
    assert report.value("accuracy") == 0.0


# -- reports ------------------------------------------------------------------


def test_report_json_canonical():
    rows = [("CCO", "CCO"), ("C(", "CC")]
    report = eval_text2mol(pairs_for(TaskKind.TEXT2MOL, rows))
    text = report_to_json(report)
    payload = json.loads(text)
    assert payload["task"] == "text2mol"
    assert payload["counts"] == {"n_skipped": 1, "n_total": 2, "n_valid_pred": 1}
    assert payload["metrics"]["accuracy"] == 0.5
    # six fractional digits and sorted keys, stable across runs
    assert '"accuracy": 0.500000' in text
    assert list(payload["metrics"]) == sorted(payload["metrics"])
    assert text == report_to_json(eval_text2mol(pairs_for(TaskKind.TEXT2MOL, rows)))


def test_report_order_independence():
    rows = [("CCO", "CCO"), ("CCN", "CCO"), ("C(", "CC"), ("CCC", "CCC")]
    pairs = pairs_for(TaskKind.TEXT2MOL, rows)
    front = eval_text2mol(pairs)
    back = eval_text2mol(list(reversed(pairs)))
    assert report_to_json(front) == report_to_json(back)


# -- frechet ------------------------------------------------------------------


def test_frechet_identical_sets():
    rng = np.random.default_rng(0)
    feats = rng.normal(size=(20, 4))
    assert frechet_distance(feats, feats) <= 1e-8


def test_frechet_one_dimensional_analytic():
    a = np.array([[-1.0], [1.0]])
    b = np.array([[0.0], [2.0]])
    assert frechet_distance(a, b) == pytest.approx(1.0, abs=1e-9)


def test_frechet_symmetry():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(30, 3))
    b = rng.normal(loc=0.5, size=(25, 3))
    assert frechet_distance(a, b) == pytest.approx(frechet_distance(b, a), abs=1e-8)


def test_frechet_against_independent_eigensolver():
    rng = np.random.default_rng(2)
    for _ in range(10):
        a = rng.normal(size=(40, 3))
        b = rng.normal(loc=rng.normal(size=3), size=(35, 3))
        got = frechet_distance(a, b)
        mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
        sa = np.cov(a, rowvar=False)
        sb = np.cov(b, rowvar=False)
        cross = scipy.linalg.sqrtm(sa @ sb)
        want = float(
            np.sum((mu_a - mu_b) ** 2)
            + np.trace(sa + sb - 2.0 * np.real(cross))
        )
        assert got == pytest.approx(want, abs=1e-6)


def test_frechet_errors():
    rng = np.random.default_rng(3)
    with pytest.raises(DimensionMismatchError):
        frechet_distance(rng.normal(size=(10, 3)), rng.normal(size=(10, 4)))
    with pytest.raises(IllConditionedError):
        frechet_distance(rng.normal(size=(3, 5)), rng.normal(size=(10, 5)))
    # ridge rescues the under-determined case
    value = frechet_distance(
        rng.normal(size=(3, 5)), rng.normal(size=(10, 5)), ridge=1e-6
    )
    assert value >= 0.0
