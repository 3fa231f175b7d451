"""Byte-pair-encoding text tokenizer with reserved special tokens.

Merges never cross word boundaries; each word's final character carries
an end-of-word marker so decoding restores (normalized) whitespace.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import DataError

PAD, CLS, TEXT_START, MOTION_START, UNK = 0, 1, 2, 3, 4
SPECIAL_TOKENS = ("<pad>", "<cls>", "<text>", "<motion>", "<unk>")
EOW = "</w>"
DEFAULT_VOCAB_SIZE = 2000


def _word_symbols(word: str) -> tuple[str, ...]:
    chars = list(word)
    chars[-1] += EOW
    return tuple(chars)


@dataclass
class BpeVocab:
    """Ordered merge rules plus the dense token table (specials at 0..4)."""

    merges: list[tuple[str, str]]
    token_to_id: dict[str, int]
    _ranks: dict[tuple[str, str], int] = field(init=False, repr=False)
    _id_to_token: dict[int, str] = field(init=False, repr=False)

    def __post_init__(self):
        self._ranks = {pair: i for i, pair in enumerate(self.merges)}
        self._id_to_token = {i: t for t, i in self.token_to_id.items()}

    @property
    def size(self) -> int:
        return len(self.token_to_id)

    def _encode_word(self, word: str) -> list[int]:
        symbols = list(_word_symbols(word))
        while len(symbols) >= 2:
            pairs = list(zip(symbols, symbols[1:]))
            best = min(pairs, key=lambda p: self._ranks.get(p, float("inf")))
            if best not in self._ranks:
                break
            merged, i = [], 0
            while i < len(symbols):
                if i + 1 < len(symbols) and (symbols[i], symbols[i + 1]) == best:
                    merged.append(symbols[i] + symbols[i + 1])
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            symbols = merged
        return [self.token_to_id.get(s, UNK) for s in symbols]

    def encode(self, text: str) -> list[int]:
        """Tokenize lowercased text; empty input yields no tokens."""
        ids: list[int] = []
        for word in text.lower().split():
            ids.extend(self._encode_word(word))
        return ids

    def decode(self, ids: list[int]) -> str:
        parts = []
        for i in ids:
            tok = self._id_to_token.get(i)
            if tok is None or tok in SPECIAL_TOKENS:
                continue
            parts.append(tok)
        return "".join(parts).replace(EOW, " ").strip()

    def save(self, path: str | Path) -> None:
        payload = {"merges": [list(p) for p in self.merges], "tokens": self.token_to_id}
        Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "BpeVocab":
        payload = json.loads(Path(path).read_text())
        merges = [tuple(p) for p in payload["merges"]]
        return cls(merges=merges, token_to_id={t: int(i) for t, i in payload["tokens"].items()})

    @classmethod
    def from_dict(cls, payload: dict) -> "BpeVocab":
        return cls(
            merges=[tuple(p) for p in payload["merges"]],
            token_to_id={t: int(i) for t, i in payload["tokens"].items()},
        )

    def to_dict(self) -> dict:
        return {"merges": [list(p) for p in self.merges], "tokens": dict(self.token_to_id)}


def train_bpe(corpus: list[str], target_size: int = DEFAULT_VOCAB_SIZE) -> BpeVocab:
    """Greedy highest-frequency pair merging over the lowercased corpus.

    Stops at `target_size` tokens (specials included) or when no pair
    occurs at least twice. Ties pick the lexicographically first pair.
    """
    if not corpus or not any(s.strip() for s in corpus):
        raise DataError("cannot train BPE on an empty corpus")

    word_freq: dict[tuple[str, ...], int] = {}
    for line in corpus:
        for word in line.lower().split():
            sym = _word_symbols(word)
            word_freq[sym] = word_freq.get(sym, 0) + 1

    alphabet = sorted({s for word in word_freq for s in word})
    tokens = list(SPECIAL_TOKENS) + alphabet
    if len(tokens) > target_size:
        raise DataError(
            f"target size {target_size} is below the base alphabet ({len(tokens)} tokens)"
        )

    merges: list[tuple[str, str]] = []
    vocab = {t: i for i, t in enumerate(tokens)}
    while len(vocab) < target_size:
        counts: dict[tuple[str, str], int] = {}
        for word, freq in word_freq.items():
            for pair in zip(word, word[1:]):
                counts[pair] = counts.get(pair, 0) + freq
        if not counts:
            break
        best = min(counts, key=lambda p: (-counts[p], p))
        if counts[best] < 2:
            break
        merges.append(best)
        new_token = best[0] + best[1]
        vocab[new_token] = len(vocab)
        updated: dict[tuple[str, ...], int] = {}
        for word, freq in word_freq.items():
            merged, i = [], 0
            while i < len(word):
                if i + 1 < len(word) and (word[i], word[i + 1]) == best:
                    merged.append(new_token)
                    i += 2
                else:
                    merged.append(word[i])
                    i += 1
            key = tuple(merged)
            updated[key] = updated.get(key, 0) + freq
        word_freq = updated
    return BpeVocab(merges=merges, token_to_id=vocab)
