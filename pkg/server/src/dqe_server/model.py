"""Small encoder-decoder transformer for text-to-text fine-tuning.

Sized for commodity CPUs: smoke training (100 examples, 1 epoch) takes
seconds. Greedy decoding keeps serving deterministic.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn

from dqe_server.vocab import BOS, EOS, PAD


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    nhead: int = 4
    num_layers: int = 2
    dim_feedforward: int = 128
    dropout: float = 0.1
    max_len: int = 160

    def to_dict(self) -> dict:
        return asdict(self)


class Seq2Seq(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.token_embedding = nn.Embedding(cfg.vocab_size, cfg.d_model, padding_idx=PAD)
        self.position_embedding = nn.Embedding(cfg.max_len, cfg.d_model)
        self.transformer = nn.Transformer(
            d_model=cfg.d_model,
            nhead=cfg.nhead,
            num_encoder_layers=cfg.num_layers,
            num_decoder_layers=cfg.num_layers,
            dim_feedforward=cfg.dim_feedforward,
            dropout=cfg.dropout,
            batch_first=True,
        )
        # keep the encoder on the plain-tensor path; the nested-tensor
        # fast path is a moving prototype
        self.transformer.encoder.use_nested_tensor = False
        self.lm_head = nn.Linear(cfg.d_model, cfg.vocab_size)

    def _embed(self, ids: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.size(1), device=ids.device).unsqueeze(0)
        return self.token_embedding(ids) + self.position_embedding(positions)

    def forward(self, src: torch.Tensor, tgt_in: torch.Tensor) -> torch.Tensor:
        causal = nn.Transformer.generate_square_subsequent_mask(tgt_in.size(1), dtype=torch.bool)
        hidden = self.transformer(
            self._embed(src),
            self._embed(tgt_in),
            tgt_mask=causal,
            src_key_padding_mask=src.eq(PAD),
            tgt_key_padding_mask=tgt_in.eq(PAD),
            memory_key_padding_mask=src.eq(PAD),
        )
        return self.lm_head(hidden)

    @torch.no_grad()
    def greedy_decode(self, src_ids: list[int], max_new_tokens: int = 24) -> tuple[list[int], float]:
        """Returns generated ids (without BOS/EOS) and the mean log
        probability of the chosen tokens."""
        self.eval()
        src = torch.tensor([src_ids or [EOS]], dtype=torch.long)
        generated = [BOS]
        log_probs: list[float] = []
        for _ in range(max_new_tokens):
            logits = self.forward(src, torch.tensor([generated], dtype=torch.long))
            step = torch.log_softmax(logits[0, -1], dim=-1)
            next_id = int(step.argmax())
            log_probs.append(float(step[next_id]))
            if next_id == EOS:
                break
            generated.append(next_id)
        mean_log_prob = sum(log_probs) / len(log_probs)
        return generated[1:], mean_log_prob

    @torch.no_grad()
    def encode_mean(self, src_ids: list[int]) -> list[float]:
        """Mean-pooled encoder states; the embedding capability."""
        self.eval()
        src = torch.tensor([src_ids or [EOS]], dtype=torch.long)
        memory = self.transformer.encoder(self._embed(src), src_key_padding_mask=src.eq(PAD))
        vector = memory[0].mean(dim=0)
        values = [float(x) for x in vector]
        if all(v == 0.0 for v in values):
            values[0] = 1.0
        return values
