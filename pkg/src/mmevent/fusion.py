"""Cross-modality feature fusion.

The adapter is one post-norm transformer block driven by cross attention:
multi-head attention of a query vector over the other modality's CLS
matrix, residual + layer norm, feed-forward, residual + layer norm, then
a task-specific linear projection. All parameters except the four task
projections are shared across tasks.

`CosineFusion` replaces the block for the reduced configuration: scores
are cosine similarities, normalized and used as convex-combination
weights over the context rows.
"""

import math
from dataclasses import dataclass

import torch
from torch import nn

from .errors import ContractError

TASKS = ("text-mention", "text-argument", "visual-mention", "visual-argument")


@dataclass(frozen=True)
class FusionContext:
    """Key/value rows (CLS encodings of the other modality) with provenance."""

    keys_values: torch.Tensor  # [n, d]
    source_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if self.keys_values.ndim != 2 or self.keys_values.shape[0] < 1:
            raise ContractError("fusion context must be a non-empty [n, d] matrix")
        if self.source_ids and len(self.source_ids) != self.keys_values.shape[0]:
            raise ContractError("source_ids length must match context rows")


class CrossAttentionAdapter(nn.Module):
    def __init__(self, d: int, n_heads: int = 8, d_ff: int | None = None,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        if d % n_heads != 0:
            raise ContractError(f"d={d} not divisible by n_heads={n_heads}")
        self.d = d
        self.n_heads = n_heads
        self.head_dim = d // n_heads
        d_ff = d_ff or 4 * d

        kw = {"dtype": dtype}
        self.q_proj = nn.Linear(d, d, **kw)
        self.k_proj = nn.Linear(d, d, **kw)
        self.v_proj = nn.Linear(d, d, **kw)
        self.out_proj = nn.Linear(d, d, **kw)
        self.ln_attn = nn.LayerNorm(d, **kw)
        self.ln_ff = nn.LayerNorm(d, **kw)
        self.ff = nn.Sequential(
            nn.Linear(d, d_ff, **kw), nn.GELU(), nn.Linear(d_ff, d, **kw)
        )
        self.task_proj = nn.ModuleDict({t: nn.Linear(d, d, **kw) for t in TASKS})
        # Task projections start near identity so early training with one
        # frozen encoder stays stable.
        with torch.no_grad():
            for proj in self.task_proj.values():
                proj.weight.copy_(
                    torch.eye(d, dtype=dtype) + 0.02 * torch.randn(d, d, dtype=dtype)
                )
                proj.bias.zero_()

    def shared_parameters(self):
        """Named parameters outside the task projections."""
        return [
            (name, p)
            for name, p in self.named_parameters()
            if not name.startswith("task_proj.")
        ]

    def _heads(self, x: torch.Tensor) -> torch.Tensor:
        # [..., d] -> [..., H, head_dim]
        return x.reshape(*x.shape[:-1], self.n_heads, self.head_dim)

    def attention(self, q: torch.Tensor, ctx: FusionContext):
        """Scaled dot-product cross attention.

        `q` is [d] or [B, d]; returns (weights, attended) where weights is
        [H, n] / [B, H, n] and attended matches the rank of `q`.
        """
        squeeze = q.ndim == 1
        if squeeze:
            q = q.unsqueeze(0)
        kv = ctx.keys_values
        if q.shape[-1] != self.d or kv.shape[-1] != self.d:
            raise ContractError("query/context dimension mismatch")

        qh = self._heads(self.q_proj(q))          # [B, H, hd]
        kh = self._heads(self.k_proj(kv))         # [n, H, hd]
        vh = self._heads(self.v_proj(kv))         # [n, H, hd]
        logits = torch.einsum("bhd,nhd->bhn", qh, kh) / math.sqrt(self.head_dim)
        weights = torch.softmax(logits, dim=-1)   # [B, H, n]
        attended = torch.einsum("bhn,nhd->bhd", weights, vh)
        out = self.out_proj(attended.reshape(q.shape[0], self.d))
        if squeeze:
            return weights.squeeze(0), out.squeeze(0)
        return weights, out

    def forward(self, q: torch.Tensor, ctx: FusionContext, task: str) -> torch.Tensor:
        if task not in self.task_proj:
            raise ContractError(f"unknown task {task!r}")
        _, attended = self.attention(q, ctx)
        z = self.ln_attn(attended + q)
        fused = self.ln_ff(self.ff(z) + z)
        return self.task_proj[task](fused)


def attention_weights(
    q: torch.Tensor, ctx: FusionContext, adapter: CrossAttentionAdapter
) -> torch.Tensor:
    """Per-head attention rows for inspection; each row sums to 1."""
    weights, _ = adapter.attention(q, ctx)
    return weights


class CosineFusion(nn.Module):
    """Parameter-free fusion: softmax over cosine similarities."""

    def __init__(self, d: int, **_ignored):
        super().__init__()
        self.d = d

    def shared_parameters(self):
        return []

    def attention(self, q: torch.Tensor, ctx: FusionContext):
        squeeze = q.ndim == 1
        if squeeze:
            q = q.unsqueeze(0)
        kv = ctx.keys_values
        qn = q / q.norm(dim=-1, keepdim=True).clamp_min(1e-12)
        kn = kv / kv.norm(dim=-1, keepdim=True).clamp_min(1e-12)
        sims = qn @ kn.T                            # [B, n]
        weights = torch.softmax(sims, dim=-1)
        out = weights @ kv
        if squeeze:
            return weights.squeeze(0), out.squeeze(0)
        return weights, out

    def forward(self, q: torch.Tensor, ctx: FusionContext, task: str) -> torch.Tensor:
        _, out = self.attention(q, ctx)
        return out


def build_fusion(mode: str, d: int, n_heads: int = 8, d_ff: int | None = None,
                 dtype: torch.dtype = torch.float32):
    if mode == "adapter":
        return CrossAttentionAdapter(d, n_heads=n_heads, d_ff=d_ff, dtype=dtype)
    if mode == "cosine":
        return CosineFusion(d)
    if mode == "none":
        return None
    raise ContractError(f"unknown fusion mode {mode!r}")
