import numpy as np
import pytest

from ingtag.corpus import Label, phrase_from_tokens
from ingtag.features import (
    ALL_TAGS,
    EmbeddingError,
    EmbeddingTable,
    PosEmbeddingTable,
    embed_token,
    encode_phrase,
    load_embeddings,
    pos_tag,
)


def write_vectors(path, rows):
    path.write_text("".join(w + " " + " ".join(repr(float(x)) for x in v) + "\n" for w, v in rows))


def read_independently(path):
    out = {}
    for line in open(path):
        parts = line.split()
        out[parts[0]] = [float(x) for x in parts[1:]]
    return out


@pytest.fixture
def vec_file(tmp_path):
    rng = np.random.default_rng(5)
    rows = [(w, rng.normal(size=300)) for w in ("salt", "pepper", "cup")]
    p = tmp_path / "vec.txt"
    write_vectors(p, rows)
    return p


class TestLoadEmbeddings:
    def test_three_frozen_rows(self, vec_file):
        t = load_embeddings(vec_file, 300)
        assert len(t) == 3
        assert not t.pretrained.requires_grad
        assert t.pretrained.shape == (3, 300)

    def test_values_match_independent_parser(self, vec_file):
        t = load_embeddings(vec_file, 300)
        ref = read_independently(vec_file)
        np.testing.assert_array_equal(t.lookup("salt"), np.array(ref["salt"]))

    def test_short_line_names_line(self, tmp_path):
        p = tmp_path / "bad.txt"
        write_vectors(p, [("salt", np.ones(300)), ("cup", np.ones(299))])
        with pytest.raises(EmbeddingError, match=":2:"):
            load_embeddings(p, 300)

    def test_lenient_skips_and_reports(self, tmp_path):
        p = tmp_path / "bad.txt"
        write_vectors(p, [("salt", np.ones(4)), ("cup", np.ones(3)), ("egg", np.ones(4))])
        t = load_embeddings(p, 4, strict=False)
        assert len(t) == 2 and t.skipped == [2]

    def test_header_and_keep_filter(self, tmp_path):
        p = tmp_path / "w2v.txt"
        p.write_text("3 2\nSalt 1 2\npepper 3 4\nsalt 9 9\n")
        t = load_embeddings(p, 2, keep={"salt"})
        assert list(t.pretrained_index) == ["salt"]
        np.testing.assert_array_equal(t.lookup("salt"), [1.0, 2.0])

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_embeddings(tmp_path / "nope.txt", 300)


class TestEmbedToken:
    def test_in_vocab_is_frozen_row(self, vec_file):
        t = load_embeddings(vec_file, 300)
        np.testing.assert_array_equal(embed_token(t, "Salt"), t.pretrained.data[t.pretrained_index["salt"]])
        assert not t.is_trainable("salt")

    def test_oov_stable_and_trainable(self, vec_file):
        t = load_embeddings(vec_file, 300)
        a = embed_token(t, "saffron")
        b = embed_token(t, "saffron")
        assert np.array_equal(a, b) and a.tobytes() == b.tobytes()
        assert t.is_trainable("saffron")
        assert len(t.oov_index) == 1

    def test_oov_independent_of_creation_order(self):
        t1, t2 = EmbeddingTable(8, seed=3), EmbeddingTable(8, seed=3)
        embed_token(t1, "a")
        v1 = embed_token(t1, "b")
        v2 = embed_token(t2, "b")
        np.testing.assert_array_equal(v1, v2)

    def test_oov_range_property(self):
        t = EmbeddingTable(300, seed=11)
        vals = np.stack([embed_token(t, f"tok{i}") for i in range(1000)])
        assert vals.min() >= -0.05 and vals.max() <= 0.05
        # uniform draws: both halves of the interval get used
        assert vals.min() < -0.049 and vals.max() > 0.049

    def test_frozen_table_maps_unknown_to_zero(self):
        t = EmbeddingTable(4)
        t.frozen = True
        np.testing.assert_array_equal(embed_token(t, "new"), np.zeros(4))
        assert len(t.oov_index) == 0


class TestPosTag:
    def test_rule_table(self):
        assert pos_tag(["1", "garlic", "clove"]) == ["CD", "NN", "NN"]

    def test_comma(self):
        assert pos_tag([","]) == [","]

    def test_ly_suffix(self):
        assert pos_tag(["freshly"]) == ["RB"]

    @pytest.mark.parametrize("tok,tag", [
        ("1/2", "CD"), ("2.5", "CD"), ("1-1/2", "CD"), ("½", "CD"),
        ("whisked", "VBN"), ("simmering", "VBG"), ("zucchini", "NN"),
        ("of", "IN"), ("cups", "NNS"), ("large", "JJ"), ("(", "("), ("&", "CC"),
        ("@@", "UNK"),
    ])
    def test_rules(self, tok, tag):
        assert pos_tag([tok]) == [tag]

    def test_deterministic_and_total(self):
        toks = ["2", "Large", "eggs", ",", "beaten", "lightly", "@"]
        tags = pos_tag(toks)
        assert tags == pos_tag(toks)
        assert len(tags) == len(toks)
        assert all(t in ALL_TAGS for t in tags)


class TestEncodePhrase:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.emb = EmbeddingTable(300, seed=1)
        self.words = ["1", "garlic", "clove", ",", "crushed"]
        self.emb.set_pretrained(self.words[:3], rng.normal(size=(3, 300)))
        self.phrase = phrase_from_tokens(self.words, gold=[Label.NAME] * 5)

    def test_zero_pos_equals_word_vectors(self):
        pos = PosEmbeddingTable(300)
        out = encode_phrase(self.phrase, self.emb, pos)
        expect = np.stack([embed_token(self.emb, w) for w in self.words])
        np.testing.assert_array_equal(out.data, expect)

    def test_shape(self):
        out = encode_phrase(self.phrase, self.emb, PosEmbeddingTable(300))
        assert out.shape == (5, 300)

    def test_single_token_sum(self):
        pos = PosEmbeddingTable(300)
        pos.vectors.data = np.random.default_rng(2).normal(size=pos.vectors.shape)
        ph = phrase_from_tokens(["garlic"], gold=[Label.NAME])
        out = encode_phrase(ph, self.emb, pos)
        w = self.emb.pretrained.data[self.emb.pretrained_index["garlic"]]
        p = pos["NN"]
        np.testing.assert_array_equal(out.data[0], np.array([a + b for a, b in zip(w, p)]))

    def test_linear_in_pos_row(self):
        pos = PosEmbeddingTable(300)
        pos.vectors.data = np.random.default_rng(3).normal(size=pos.vectors.shape)
        base = encode_phrase(self.phrase, self.emb, PosEmbeddingTable(300)).data
        one = encode_phrase(self.phrase, self.emb, pos).data - base
        pos.vectors.data *= 2.5
        scaled = encode_phrase(self.phrase, self.emb, pos).data - base
        np.testing.assert_allclose(scaled, 2.5 * one, rtol=1e-12, atol=1e-12)

    def test_empty_phrase(self):
        with pytest.raises(ValueError):
            encode_phrase(phrase_from_tokens([]), self.emb, PosEmbeddingTable(300))
