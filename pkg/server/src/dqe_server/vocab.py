"""Whitespace word vocabulary shared by all roles.

Tokenization is lowercase whitespace splitting; downstream answer
comparison normalizes case anyway, and a tiny word-level model keeps
smoke training fast and fully deterministic.
"""

from __future__ import annotations

import json
import os
from collections import Counter
from typing import Iterable

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<pad>", "<bos>", "<eos>", "<unk>")
NO_ANSWER = "<noanswer>"


def tokenize(text: str) -> list[str]:
    return text.lower().split()


class Vocab:
    def __init__(self, tokens: list[str]):
        self.id_to_token = list(SPECIALS) + tokens
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}

    def __len__(self) -> int:
        return len(self.id_to_token)

    @classmethod
    def build(cls, texts: Iterable[str], max_size: int = 2000) -> "Vocab":
        counts: Counter[str] = Counter()
        for text in texts:
            counts.update(tokenize(text))
        counts[NO_ANSWER] += 1  # always representable
        budget = max_size - len(SPECIALS)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:budget]
        return cls([tok for tok, _ in ranked])

    def encode(self, text: str, max_len: int) -> list[int]:
        ids = [self.token_to_id.get(tok, UNK) for tok in tokenize(text)][: max_len - 1]
        return ids + [EOS]

    def decode(self, ids: Iterable[int]) -> str:
        tokens = []
        for i in ids:
            if i in (PAD, BOS, UNK):
                continue
            if i == EOS:
                break
            tokens.append(self.id_to_token[i])
        return " ".join(tokens)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.id_to_token[len(SPECIALS):], fh, ensure_ascii=False)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Vocab":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))
