"""Trainable stand-in text encoder: learned token embeddings, sinusoidal
positions, and one self-attention layer. The model only depends on the
EncoderOutput contract, so a bigger pretrained encoder can be plugged in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor
from .corpus import parse_number_token

PAD, UNK, SEP, NUM = "<pad>", "<unk>", "<sep>", "<num>"


class Vocab:
    """Whitespace-token vocabulary. Tokens that parse as numbers collapse to
    a shared <num> id; everything unseen maps to <unk>."""

    def __init__(self, tokens: list[str]):
        specials = [PAD, UNK, SEP, NUM]
        uniq = sorted({self._norm(t) for t in tokens} - set(specials))
        self._itos = specials + uniq
        self._stoi = {t: i for i, t in enumerate(self._itos)}

    @staticmethod
    def _norm(tok: str) -> str:
        if parse_number_token(tok) is not None:
            return NUM
        return tok.lower()

    def __len__(self):
        return len(self._itos)

    def encode(self, tokens: list[str]) -> np.ndarray:
        unk = self._stoi[UNK]
        return np.array([self._stoi.get(self._norm(t), unk) for t in tokens],
                        dtype=np.int64)

    @property
    def sep_id(self) -> int:
        return self._stoi[SEP]

    def to_list(self) -> list[str]:
        return list(self._itos)

    @classmethod
    def from_list(cls, itos: list[str]) -> "Vocab":
        v = cls.__new__(cls)
        v._itos = list(itos)
        v._stoi = {t: i for i, t in enumerate(itos)}
        return v


@dataclass
class EncoderOutput:
    """Per-instance contextual encodings consumed by attention and policy."""
    P: list[Tensor]        # per program step: m x d passage encodings
    Q: list[Tensor]        # per program step: n_k x d span-argument encodings
    joint: Tensor          # d: summary of the passage-query pair
    query_enc: Tensor      # d
    root_enc: Tensor       # d


class Encoder(nn.Module):
    def __init__(self, vocab_size: int, d: int, rng: np.random.Generator):
        self.d = d
        self.emb = nn.uniform_init(rng, (vocab_size, d), d)
        self.layer = nn.SelfAttentionLayer(d, rng)
        self._pos_cache: dict[int, np.ndarray] = {}

    def _positions(self, m: int) -> np.ndarray:
        pos = self._pos_cache.get(m)
        if pos is None:
            pos = nn.sinusoidal_positions(m, self.d)
            self._pos_cache[m] = pos
        return pos

    def _encode_ids(self, ids: np.ndarray, dropout=0.0, rng=None, training=False) -> Tensor:
        x = ad.gather(self.emb, ids) + self._positions(len(ids))
        return self.layer(x, dropout, rng, training)

    def encode_pair(self, passage_ids: np.ndarray, other_ids: np.ndarray,
                    sep_id: int, dropout=0.0, rng=None, training=False):
        """Jointly encode [passage ; <sep> ; other]; returns the passage rows
        and the other-sequence rows of the shared contextual encoding."""
        ids = np.concatenate([passage_ids, [sep_id], other_ids])
        h = self._encode_ids(ids, dropout, rng, training)
        m = len(passage_ids)
        return h[:m], h[m + 1:]
