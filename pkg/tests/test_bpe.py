import pytest

from t2meval.errors import DataError
from t2meval.mobert.bpe import (
    CLS,
    MOTION_START,
    PAD,
    SPECIAL_TOKENS,
    TEXT_START,
    UNK,
    BpeVocab,
    train_bpe,
)


class TestTraining:
    def test_first_merge_is_most_frequent_pair(self):
        vocab = train_bpe(["aaab"], target_size=10)
        # 'aa' occurs twice in 'aaab', 'ab' once
        assert vocab.merges[0] == ("a", "a")

    def test_stops_when_no_pair_repeats(self):
        vocab = train_bpe(["ab", "cd"], target_size=100)
        assert vocab.size < 100

    def test_respects_target_size(self):
        corpus = ["the quick brown fox jumps over the lazy dog"] * 5
        vocab = train_bpe(corpus, target_size=40)
        assert vocab.size <= 40

    def test_empty_corpus_rejected(self):
        with pytest.raises(DataError):
            train_bpe([], target_size=10)
        with pytest.raises(DataError):
            train_bpe(["   "], target_size=10)

    def test_specials_have_reserved_dense_ids(self):
        vocab = train_bpe(["hello world"], target_size=30)
        for i, tok in enumerate(SPECIAL_TOKENS):
            assert vocab.token_to_id[tok] == i
        assert (PAD, CLS, TEXT_START, MOTION_START, UNK) == (0, 1, 2, 3, 4)
        ids = sorted(vocab.token_to_id.values())
        assert ids == list(range(vocab.size))


class TestEncodeDecode:
    def test_empty_string(self):
        vocab = train_bpe(["abc"], target_size=20)
        assert vocab.encode("") == []

    def test_no_unk_on_training_corpus(self):
        corpus = ["a person walks north", "a person runs south east", "someone jumps"]
        vocab = train_bpe(corpus, target_size=60)
        for line in corpus:
            assert UNK not in vocab.encode(line)

    def test_unseen_characters_become_unk(self):
        vocab = train_bpe(["abc abc"], target_size=20)
        assert UNK in vocab.encode("xyz")

    def test_roundtrip_modulo_whitespace(self):
        corpus = ["a person walks north", "the person  turns   around"]
        vocab = train_bpe(corpus, target_size=80)
        for line in corpus:
            decoded = vocab.decode(vocab.encode(line))
            assert decoded == " ".join(line.split())

    def test_lowercases_input(self):
        vocab = train_bpe(["walk"], target_size=20)
        assert vocab.encode("WALK") == vocab.encode("walk")

    def test_merges_apply_in_priority_order(self):
        vocab = train_bpe(["aaab aaab aaab"], target_size=12)
        ids = vocab.encode("aaab")
        assert len(ids) < 4  # some merge fired
        assert vocab.decode(ids) == "aaab"


class TestSerialization:
    def test_json_roundtrip(self, tmp_path):
        vocab = train_bpe(["a person walks", "a person runs"], target_size=50)
        path = tmp_path / "vocab.json"
        vocab.save(path)
        loaded = BpeVocab.load(path)
        assert loaded.merges == vocab.merges
        assert loaded.token_to_id == vocab.token_to_id
        text = "a person walks"
        assert loaded.encode(text) == vocab.encode(text)

    def test_dict_roundtrip(self):
        vocab = train_bpe(["hello world"], target_size=30)
        clone = BpeVocab.from_dict(vocab.to_dict())
        assert clone.encode("hello world") == vocab.encode("hello world")
