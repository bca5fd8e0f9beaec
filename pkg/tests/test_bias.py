import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from oracles import random_orthogonal
from pnka.bias import (
    cosine_word_scores,
    direct_cosine_baseline,
    direction,
    group_score_distributions,
    omega_summary,
    pnka_word_scores,
    projection_changes,
    projection_magnitude,
    sembias_frequencies,
    sembias_predict,
    sembias_scores,
    sembias_wordlist,
)
from pnka.data import EmbeddingTable, SemBiasInstance
from pnka.errors import DataError, ShapeError


def _table(rng, words, d=6):
    return EmbeddingTable(tuple(words), rng.standard_normal((len(words), d)))


WORDS = ["he", "she", "king", "queen", "nurse", "doctor", "cup", "lid", "dog", "cat"]
GROUPS = ["definition"] * 4 + ["stereotype"] * 2 + ["neutral"] * 4


def test_direction_and_projection():
    t = EmbeddingTable.from_dict({"he": [1.0, 2.0], "she": [0.0, 1.0], "w": [3.0, -1.0]})
    g = direction(t)
    assert_allclose(g.vector, [1.0, 1.0])
    assert g.anchor_words == ("he", "she")
    assert projection_magnitude(t.vector("w"), g) == 2.0
    assert projection_magnitude([-3.0, -4.0], g) == 7.0
    with pytest.raises(ShapeError):
        projection_magnitude([1.0, 2.0, 3.0], g)
    t0 = EmbeddingTable.from_dict({"he": [1.0], "she": [1.0]})
    with pytest.raises(DataError):
        direction(t0)
    with pytest.raises(DataError):
        direction(t, "him", "she")


def test_omega_zero_for_identical_tables(rng):
    base = _table(rng, WORDS)
    changes = projection_changes(base, base, WORDS[2:])
    assert all(c.omega == 0.0 for c in changes)


def test_omega_under_scaling(rng):
    # Scaling every vector by a multiplies both g and w by a, so p grows by a^2.
    base = _table(rng, WORDS)
    changes = projection_changes(base, base.scaled(3.0), WORDS[2:])
    assert_allclose([c.omega for c in changes], 8.0, rtol=1e-12)


def test_omega_shared_direction(rng):
    base = _table(rng, WORDS)
    var = base.scaled(2.0)
    shared = projection_changes(base, var, ["nurse"], shared_direction=True)
    assert shared[0].omega == pytest.approx(1.0, rel=1e-12)


def test_omega_undefined_when_base_projection_is_zero():
    base = EmbeddingTable.from_dict({"he": [1.0, 0.0], "she": [0.0, 0.0], "x": [0.0, 5.0]})
    var = EmbeddingTable.from_dict({"he": [1.0, 0.0], "she": [0.0, 0.0], "x": [1.0, 5.0]})
    (c,) = projection_changes(base, var, ["x"])
    assert c.p_base == 0.0 and c.p_variant == 1.0
    assert not c.defined and math.isnan(c.omega)
    summary = omega_summary([c], ["x"], ["neutral"])
    assert summary["neutral"]["count"] == 0 and summary["neutral"]["mean"] is None


def test_rotation_pnka_one_cosine_low(rng):
    base = _table(rng, WORDS, d=8)
    var = base.transformed(random_orthogonal(8, rng))
    dist = group_score_distributions(base, var, WORDS, GROUPS)
    for g in ("definition", "stereotype", "neutral"):
        assert abs(dist[g].mean - 1.0) <= 1e-12
    cos = cosine_word_scores(base, var, WORDS).scores
    assert np.mean(cos < 0.99) >= 0.9
    direct = direct_cosine_baseline(base, var, WORDS, GROUPS)
    assert direct["neutral"].mean < 0.99


def test_identity_variant_gives_pnka_one(rng):
    base = _table(rng, WORDS)
    s = pnka_word_scores(base, base, WORDS).scores
    assert np.max(np.abs(s - 1.0)) <= 1e-12


def test_pnka_handles_different_dimensionality(rng):
    base = _table(rng, WORDS, d=4)
    wide = EmbeddingTable(base.vocabulary, np.hstack([base.vectors, np.zeros((len(WORDS), 3))]) @ random_orthogonal(7, rng))
    assert_allclose(pnka_word_scores(base, wide, WORDS).scores, 1.0, atol=1e-9)
    with pytest.raises(ShapeError):
        cosine_word_scores(base, wide, WORDS)


def test_context_mode(rng):
    base = _table(rng, WORDS)
    var = EmbeddingTable(base.vocabulary, base.vectors + 0.5 * rng.standard_normal(base.vectors.shape))
    scored = ["king", "nurse", "cup"]
    ctx = pnka_word_scores(base, var, scored, context=WORDS)
    assert len(ctx) == 3
    # Scores equal the full-vocabulary run restricted to the scored words.
    order = scored + [w for w in WORDS if w not in scored]
    full = pnka_word_scores(base, var, order)
    assert_allclose(ctx.scores, full.scores[:3], rtol=0, atol=1e-15)
    plain = pnka_word_scores(base, var, scored)
    assert not np.allclose(plain.scores, ctx.scores)


def _sembias_table():
    # gender direction he - she = (1, 0, 0)
    return EmbeddingTable.from_dict(
        {
            "he": [1.0, 0.0, 0.0],
            "she": [0.0, 0.0, 0.0],
            "king": [1.0, 1.0, 0.0],
            "queen": [0.0, 1.0, 0.0],  # king - queen = (1, 0, 0): cos 1
            "doctor": [0.5, 0.0, 1.0],
            "nurse": [0.0, 0.0, 0.0],  # (0.5, 0, 1): cos 0.447
            "dog": [0.0, 1.0, 0.0],
            "cat": [0.0, 0.0, 1.0],  # (0, 1, -1): cos 0
            "cup": [2.0, 2.0, 2.0],
            "lid": [2.0, 2.0, 2.0],  # zero difference: cos 0
        }
    )


def test_sembias_scores_and_prediction():
    t = _sembias_table()
    inst = SemBiasInstance((("king", "queen"), ("doctor", "nurse"), ("dog", "cat"), ("cup", "lid")))
    assert_allclose(sembias_scores(t, inst), [1.0, 0.5 / math.sqrt(1.25), 0.0, 0.0])
    assert sembias_predict(t, inst) == "definition"
    flipped = SemBiasInstance((("queen", "king"), ("doctor", "nurse"), ("dog", "cat"), ("cup", "lid")))
    assert sembias_predict(t, flipped) == "stereotype"


def test_sembias_tie_goes_to_earlier_pair():
    t = _sembias_table()
    inst = SemBiasInstance((("king", "queen"), ("king", "queen"), ("dog", "cat"), ("cup", "lid")))
    assert sembias_predict(t, inst) == "definition"
    custom = SemBiasInstance(
        (("dog", "cat"), ("cup", "lid"), ("king", "queen"), ("king", "queen")),
        tags=("neutral", "neutral", "stereotype", "definition"),
    )
    assert sembias_predict(t, custom) == "stereotype"


def test_sembias_frequencies_and_skips():
    t = _sembias_table()
    a = SemBiasInstance((("king", "queen"), ("doctor", "nurse"), ("dog", "cat"), ("cup", "lid")))
    b = SemBiasInstance((("queen", "king"), ("doctor", "nurse"), ("dog", "cat"), ("cup", "lid")))
    oov = SemBiasInstance((("prince", "princess"), ("doctor", "nurse"), ("dog", "cat"), ("cup", "lid")))
    with pytest.warns(UserWarning, match="skipped 1"):
        f = sembias_frequencies(t, [a, a, b, oov])
    assert (f.definition, f.stereotype, f.neutral) == pytest.approx((200 / 3, 100 / 3, 0.0))
    assert f.n_scored == 3 and f.n_skipped == 1
    with pytest.raises(DataError), pytest.warns(UserWarning):
        sembias_frequencies(t, [oov])


def test_sembias_instance_validation():
    with pytest.raises(DataError):
        SemBiasInstance((("a", "b"),) * 3)
    with pytest.raises(DataError):
        SemBiasInstance((("a", "b"),) * 4, tags=("definition",) * 4)


def test_sembias_wordlist_first_tag_wins():
    a = SemBiasInstance((("he", "she"), ("doctor", "nurse"), ("dog", "cat"), ("cup", "lid")))
    b = SemBiasInstance((("king", "queen"), ("doctor", "she"), ("cup", "saucer"), ("x", "y")))
    words, groups = sembias_wordlist([a, b])
    lookup = dict(zip(words, groups.values))
    assert lookup["she"] == "definition"
    assert lookup["cup"] == "neutral"
    assert len(words) == len(set(words))


def test_group_lengths_checked(rng):
    base = _table(rng, WORDS)
    with pytest.raises(ShapeError):
        group_score_distributions(base, base, WORDS, GROUPS[:-1])
