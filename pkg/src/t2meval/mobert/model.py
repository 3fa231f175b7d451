"""The multimodal transformer evaluator: frame/chunk motion encoders, a
BERT-style encoder over the merged text+motion sequence, and the
alignment prediction head.

The default configuration reproduces the reference architecture exactly
(embedding 2000x256, frame MLP 263-384-384, chunk MLP 5376-5376-1792-
1024-256, three 256-wide encoder layers with 1024 feed-forward, head
256-128-128-1). All widths are parametric so tests can run reduced
models.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ConfigError, LengthError, NumericalError, ShapeError
from ..motion import MotionFeatures, chunk
from .bpe import CLS, MOTION_START, PAD, TEXT_START

CHECKPOINT_MAGIC = b"T2MEVBRT"


@dataclass(frozen=True)
class MoBertConfig:
    d_model: int = 256
    vocab_size: int = 2000
    max_context: int = 64
    n_layers: int = 3
    ff_dim: int = 1024
    n_heads: int = 4
    frame_dim: int = 263
    frame_hidden: int = 384
    chunk_len: int = 14
    chunk_overlap: int = 4
    chunk_mlp_dims: tuple[int, ...] = (5376, 5376, 1792, 1024, 256)
    dropout_encoder: float = 0.2
    dropout_transformer: float = 0.1
    head_dims: tuple[int, ...] = (256, 128, 128, 1)
    groupnorm_groups: int = 8
    wide_groupnorm_groups: int = 14

    def __post_init__(self):
        if self.chunk_mlp_dims[0] != self.frame_hidden * self.chunk_len:
            raise ConfigError(
                f"chunk MLP input {self.chunk_mlp_dims[0]} != frame_hidden*chunk_len "
                f"({self.frame_hidden}*{self.chunk_len})"
            )
        if self.chunk_mlp_dims[-1] != self.d_model:
            raise ConfigError("chunk MLP must end at d_model")
        if self.head_dims[0] != self.d_model or self.head_dims[-1] != 1:
            raise ConfigError("alignment head must run d_model -> ... -> 1")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by {self.n_heads} heads")
        if self.chunk_len <= self.chunk_overlap:
            raise ConfigError("chunk_len must exceed chunk_overlap")
        for width in self.chunk_mlp_dims[2:] + self.head_dims[1:-1] + (self.frame_hidden,):
            if width % self.groupnorm_groups != 0:
                raise ConfigError(f"group count {self.groupnorm_groups} does not divide width {width}")
        if self.chunk_mlp_dims[1] % self.wide_groupnorm_groups != 0:
            raise ConfigError(
                f"wide group count {self.wide_groupnorm_groups} does not divide "
                f"{self.chunk_mlp_dims[1]}"
            )


def _mlp(dims: tuple[int, ...], dropout: float, groups: list[int]) -> nn.Sequential:
    layers: list[nn.Module] = []
    for i, (d_in, d_out) in enumerate(zip(dims, dims[1:])):
        layers.append(nn.Linear(d_in, d_out))
        layers.append(nn.GroupNorm(groups[i], d_out))
        layers.append(nn.SELU())
        layers.append(nn.Dropout(p=dropout))
    return nn.Sequential(*layers)


class SelfAttention(nn.Module):
    """Multi-head scaled dot-product self-attention with key padding."""

    def __init__(self, d_model: int, n_heads: int, dropout: float):
        super().__init__()
        self.n_heads = n_heads
        self.head_dim = d_model // n_heads
        self.in_proj = nn.Linear(d_model, 3 * d_model)
        self.out_proj = nn.Linear(d_model, d_model)
        self.dropout = nn.Dropout(p=dropout)

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        b, l, d = x.shape
        qkv = self.in_proj(x).reshape(b, l, 3, self.n_heads, self.head_dim)
        q, k, v = (qkv[:, :, i].transpose(1, 2) for i in range(3))  # (b, h, l, hd)
        scores = q @ k.transpose(-2, -1) / (self.head_dim ** 0.5)
        scores = scores.masked_fill(pad_mask[:, None, None, :], float("-inf"))
        weights = self.dropout(torch.softmax(scores, dim=-1))
        out = (weights @ v).transpose(1, 2).reshape(b, l, d)
        return self.out_proj(out)


class EncoderLayer(nn.Module):
    """Post-norm transformer encoder block (attention, then feed-forward)."""

    def __init__(self, d_model: int, ff_dim: int, n_heads: int, dropout: float):
        super().__init__()
        self.self_attn = SelfAttention(d_model, n_heads, dropout)
        self.linear1 = nn.Linear(d_model, ff_dim)
        self.dropout = nn.Dropout(p=dropout)
        self.linear2 = nn.Linear(ff_dim, d_model)
        self.norm1 = nn.LayerNorm(d_model)
        self.norm2 = nn.LayerNorm(d_model)
        self.dropout1 = nn.Dropout(p=dropout)
        self.dropout2 = nn.Dropout(p=dropout)

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        x = self.norm1(x + self.dropout1(self.self_attn(x, pad_mask)))
        ff = self.linear2(self.dropout(F.relu(self.linear1(x))))
        return self.norm2(x + self.dropout2(ff))


@dataclass
class AssembledSequence:
    """One transformer input: embedded states, padding mask, span indices."""

    states: torch.Tensor       # (max_context, d_model)
    pad_mask: torch.Tensor     # (max_context,) True at PAD positions
    text_span: tuple[int, int]    # [start, end) of text content tokens
    motion_span: tuple[int, int]  # [start, end) of motion chunk tokens
    length: int = field(default=0)


class MoBertModel(nn.Module):
    def __init__(self, config: MoBertConfig):
        super().__init__()
        self.config = config
        self.word_embs = nn.Embedding(config.vocab_size, config.d_model)
        self.pos_embs = nn.Embedding(config.max_context, config.d_model)
        self.seg_embs = nn.Embedding(2, config.d_model)
        g = config.groupnorm_groups
        self.frame_encoder = _mlp(
            (config.frame_dim, config.frame_hidden, config.frame_hidden),
            config.dropout_encoder, [g, g],
        )
        chunk_groups = [config.wide_groupnorm_groups] + [g] * (len(config.chunk_mlp_dims) - 2)
        self.chunk_encoder = _mlp(config.chunk_mlp_dims, config.dropout_encoder, chunk_groups)
        self.layers = nn.ModuleList(
            EncoderLayer(config.d_model, config.ff_dim, config.n_heads, config.dropout_transformer)
            for _ in range(config.n_layers)
        )
        head_layers: list[nn.Module] = []
        for d_in, d_out in zip(config.head_dims, config.head_dims[1:-1]):
            head_layers += [
                nn.Linear(d_in, d_out),
                nn.GroupNorm(g, d_out),
                nn.SELU(),
                nn.Dropout(p=config.dropout_encoder),
            ]
        head_layers.append(nn.Linear(config.head_dims[-2], config.head_dims[-1]))
        self.alignment_pred_head = nn.Sequential(*head_layers)

    @property
    def dtype(self) -> torch.dtype:
        return self.word_embs.weight.dtype

    def encode_motion_tokens(self, features: MotionFeatures) -> torch.Tensor:
        """One d_model embedding per overlapping feature chunk."""
        if features.values.shape[1] != self.config.frame_dim:
            raise ShapeError(
                f"feature dim {features.values.shape[1]} != expected {self.config.frame_dim}"
            )
        windows = chunk(features, self.config.chunk_len, self.config.chunk_overlap).chunks
        return self.encode_motion_windows(torch.as_tensor(windows, dtype=self.dtype))

    def encode_motion_windows(self, windows: torch.Tensor) -> torch.Tensor:
        """Encode pre-chunked windows of shape (C, chunk_len, frame_dim)."""
        c, length, dim = windows.shape
        if dim != self.config.frame_dim or length != self.config.chunk_len:
            raise ShapeError(f"windows must be (C, {self.config.chunk_len}, {self.config.frame_dim})")
        frames = self.frame_encoder(windows.reshape(c * length, dim))
        flat = frames.reshape(c, length * self.config.frame_hidden)
        return self.chunk_encoder(flat)

    def forward(self, states: torch.Tensor, pad_mask: torch.Tensor) -> dict:
        """Run the encoder stack and alignment head.

        Returns output embeddings for every position, the CLS outputs,
        logits, and alignment probabilities.
        """
        x = states
        for i, layer in enumerate(self.layers):
            x = layer(x, pad_mask)
            if not torch.isfinite(x[~pad_mask]).all():
                raise NumericalError(f"non-finite activation leaving encoder layer {i}")
        cls_out = x[:, 0, :]
        logits = self.alignment_pred_head(cls_out).squeeze(-1)
        if not torch.isfinite(logits).all():
            raise NumericalError("non-finite activation in the alignment head")
        return {
            "outputs": x,
            "cls": cls_out,
            "logits": logits,
            "probabilities": torch.sigmoid(logits),
        }


def clip_text_ids(text_ids: list[int], n_chunks: int, max_context: int) -> list[int]:
    """Truncate a description from the right to fit the context budget."""
    budget = max_context - 3 - n_chunks
    if budget < 0:
        raise LengthError(f"{n_chunks} chunks cannot fit a context of {max_context}")
    return list(text_ids[:budget])


def assemble_sequence(
    model: MoBertModel, text_ids: list[int], chunk_embs: torch.Tensor
) -> AssembledSequence:
    """Merge text tokens and motion chunk embeddings into one padded
    transformer input: [CLS, TEXT_START, text..., MOTION_START, chunks...,
    PAD...], with learned positional and segment embeddings added.
    """
    cfg = model.config
    n_text, n_chunks = len(text_ids), chunk_embs.shape[0]
    length = 3 + n_text + n_chunks
    if length > cfg.max_context:
        raise LengthError(
            f"sequence of {length} exceeds max context {cfg.max_context}; clip inputs first"
        )
    device = chunk_embs.device
    ids = torch.full((cfg.max_context,), PAD, dtype=torch.long, device=device)
    ids[0] = CLS
    ids[1] = TEXT_START
    if n_text:
        ids[2:2 + n_text] = torch.as_tensor(text_ids, dtype=torch.long, device=device)
    ids[2 + n_text] = MOTION_START
    states = model.word_embs(ids)
    motion_start = 3 + n_text
    states = torch.cat(
        [states[:motion_start], chunk_embs, states[motion_start + n_chunks:]], dim=0
    )
    positions = torch.arange(cfg.max_context, device=device)
    segments = torch.zeros(cfg.max_context, dtype=torch.long, device=device)
    segments[2 + n_text:motion_start + n_chunks] = 1
    states = states + model.pos_embs(positions) + model.seg_embs(segments)
    pad_mask = torch.zeros(cfg.max_context, dtype=torch.bool, device=device)
    pad_mask[length:] = True
    return AssembledSequence(
        states=states,
        pad_mask=pad_mask,
        text_span=(2, 2 + n_text),
        motion_span=(motion_start, motion_start + n_chunks),
        length=length,
    )


def batch_forward(model: MoBertModel, assembled: list[AssembledSequence]) -> dict:
    states = torch.stack([a.states for a in assembled])
    masks = torch.stack([a.pad_mask for a in assembled])
    return model(states, masks)


def save_checkpoint(
    model: MoBertModel, path, vocab=None
) -> None:
    """Self-describing binary checkpoint: magic, JSON header with the
    config (and vocab when given), then named float32 tensors."""
    header = {"config": asdict(model.config)}
    if vocab is not None:
        header["vocab"] = vocab.to_dict()
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    state = model.state_dict()
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", len(header_bytes)))
    buf.write(header_bytes)
    names = sorted(state)
    buf.write(struct.pack("<I", len(names)))
    for name in names:
        tensor = state[name].detach().cpu().to(torch.float32).numpy()
        encoded = name.encode("utf-8")
        buf.write(struct.pack("<H", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<B", tensor.ndim))
        for dim in tensor.shape:
            buf.write(struct.pack("<I", dim))
        buf.write(tensor.astype("<f4").tobytes(order="C"))
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path):
    """Restore a checkpoint; returns (model, vocab-or-None)."""
    from .bpe import BpeVocab

    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ConfigError(f"{path}: not a MoBERT checkpoint")
    offset = 8
    (header_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    header = json.loads(raw[offset:offset + header_len].decode("utf-8"))
    offset += header_len
    cfg_dict = dict(header["config"])
    for key in ("chunk_mlp_dims", "head_dims"):
        cfg_dict[key] = tuple(cfg_dict[key])
    config = MoBertConfig(**cfg_dict)
    model = MoBertModel(config)
    (n_tensors,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    state = {}
    for _ in range(n_tensors):
        (name_len,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        name = raw[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", raw, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, offset)
        offset += 4 * ndim
        count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape(shape)
        offset += count * 4
        state[name] = torch.from_numpy(arr.copy())
    model.load_state_dict(state)
    vocab = BpeVocab.from_dict(header["vocab"]) if "vocab" in header else None
    return model, vocab
