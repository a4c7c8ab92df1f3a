"""Attention-based text aligner.

A recurrent ASR-style decoder steps over phoneme positions (teacher forced)
and attends over encoded mel frames. The alignment returned for downstream
use is the frame-wise attention over phonemes (each column sums to 1); the
phoneme logits drive the sequence-to-sequence objective.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import LRELU_SLOPE
from .config import ModelConfig, NetsError


class TextAligner(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        d = config.aligner_dim
        self.vocab_size = config.vocab_size
        self.mel_convs = nn.ModuleList(
            [
                nn.Conv1d(config.n_mels, d, 5, padding=2),
                nn.Conv1d(d, d, 5, padding=2),
            ]
        )
        self.mel_lstm = nn.LSTM(d, d // 2, batch_first=True, bidirectional=True)
        self.embedding = nn.Embedding(config.vocab_size, d)
        self.bos = nn.Parameter(torch.zeros(d))
        self.cell = nn.LSTMCell(2 * d, d)
        self.query_proj = nn.Linear(d, d)
        self.memory_proj = nn.Linear(d, d)
        self.score = nn.Linear(d, 1)
        self.classifier = nn.Linear(2 * d, config.vocab_size)

    def encode_mel(self, mel: torch.Tensor) -> torch.Tensor:
        """mel: [n_mels x T] -> memory [T x d]."""
        x = mel.unsqueeze(0)
        for conv in self.mel_convs:
            x = F.leaky_relu(conv(x), LRELU_SLOPE)
        out, _ = self.mel_lstm(x.transpose(1, 2))
        return out.squeeze(0)  # [T, d]

    def forward(self, mel: torch.Tensor, ids: torch.Tensor):
        """Teacher-forced pass.

        Returns (soft alignment weights [N x T] with unit column sums,
        phoneme logits [N x vocab]).
        """
        if ids.ndim != 1 or ids.numel() < 1:
            raise NetsError("phoneme id sequence must be a non-empty vector")
        if torch.any(ids < 0) or torch.any(ids >= self.vocab_size):
            raise NetsError("phoneme id out of vocabulary")
        memory = self.encode_mel(mel)  # [T, d]
        t_frames = memory.shape[0]
        proj_mem = self.memory_proj(memory)  # [T, d]
        n = ids.numel()
        d = self.bos.shape[0]

        h = memory.new_zeros(1, d)
        c = memory.new_zeros(1, d)
        context = memory.new_zeros(d)
        prev = self.bos
        scores = []
        logits = []
        for i in range(n):
            h, c = self.cell(torch.cat([prev, context]).unsqueeze(0), (h, c))
            query = h.squeeze(0)
            e = self.score(torch.tanh(self.query_proj(query) + proj_mem)).squeeze(-1)
            scores.append(e)
            attn = torch.softmax(e, dim=0)  # over frames, for the ASR context
            context = attn @ memory
            logits.append(self.classifier(torch.cat([query, context])))
            prev = self.embedding(ids[i])
        score_mat = torch.stack(scores)  # [N, T]
        soft = torch.softmax(score_mat, dim=0)  # columns over phonemes sum to 1
        return soft, torch.stack(logits)
