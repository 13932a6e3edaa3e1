"""Base-model construction and a minimal LoRA implementation.

LoRA adapters (frozen base weight W, trainable low-rank A/B with alpha/r
scaling) are applied to the attention projections. Only adapter tensors
train; only adapter tensors are saved between stages.
"""

from __future__ import annotations

import math
from pathlib import Path

import torch
from torch import nn

from .tokenizer import ByteTokenizer

DEFAULT_TARGETS = ("q_proj", "k_proj", "v_proj", "o_proj")

# Registry of offline base models buildable from config alone. All are far
# below the 100M-parameter budget and pair with the byte tokenizer.
_TINY_REGISTRY = {
    "tiny-llama-64": dict(hidden_size=64, intermediate_size=128, num_hidden_layers=2, num_attention_heads=4),
    "tiny-llama-128": dict(hidden_size=128, intermediate_size=256, num_hidden_layers=2, num_attention_heads=4),
}


def build_base_model(identifier: str, seed: int = 0):
    """Instantiate the base model. Registry names build offline from config;
    anything else is treated as a transformers checkpoint path or hub id."""
    from transformers import AutoModelForCausalLM, LlamaConfig, LlamaForCausalLM

    if identifier in _TINY_REGISTRY:
        torch.manual_seed(seed)
        config = LlamaConfig(
            vocab_size=ByteTokenizer.vocab_size,
            max_position_embeddings=1024,
            num_key_value_heads=_TINY_REGISTRY[identifier]["num_attention_heads"],
            **_TINY_REGISTRY[identifier],
        )
        return LlamaForCausalLM(config)
    return AutoModelForCausalLM.from_pretrained(identifier)


class LoRALinear(nn.Module):
    """y = W x + (alpha / r) * B(A(x)) with W frozen and B zero-initialized."""

    def __init__(self, base: nn.Linear, rank: int, alpha: float):
        super().__init__()
        self.base = base
        self.rank = rank
        self.alpha = alpha
        self.scaling = alpha / rank
        self.lora_a = nn.Parameter(torch.empty(rank, base.in_features))
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))
        nn.init.kaiming_uniform_(self.lora_a, a=math.sqrt(5))
        self.base.weight.requires_grad_(False)
        if self.base.bias is not None:
            self.base.bias.requires_grad_(False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + self.scaling * (x @ self.lora_a.T @ self.lora_b.T)

    def merge_into_base(self) -> nn.Linear:
        with torch.no_grad():
            self.base.weight += self.scaling * (self.lora_b @ self.lora_a)
        return self.base


def apply_lora(
    model: nn.Module, rank: int, alpha: float, targets: tuple[str, ...] = DEFAULT_TARGETS
) -> list[str]:
    """Freeze the whole model and swap target linears for LoRA wrappers."""
    for p in model.parameters():
        p.requires_grad_(False)
    adapted = []
    for name, module in list(model.named_modules()):
        leaf = name.rsplit(".", 1)[-1]
        if leaf in targets and isinstance(module, nn.Linear):
            parent = model.get_submodule(name.rsplit(".", 1)[0]) if "." in name else model
            parent._modules[leaf] = LoRALinear(module, rank, alpha)
            adapted.append(name)
    if not adapted:
        raise ValueError(f"no target modules {targets} found to adapt")
    return adapted


def merge_lora(model: nn.Module) -> None:
    """Fold every adapter into its base weight and drop the wrapper."""
    for name, module in list(model.named_modules()):
        if isinstance(module, LoRALinear):
            leaf = name.rsplit(".", 1)[-1]
            parent = model.get_submodule(name.rsplit(".", 1)[0]) if "." in name else model
            parent._modules[leaf] = module.merge_into_base()


def lora_parameters(model: nn.Module):
    return [p for p in model.parameters() if p.requires_grad]


def lora_state_dict(model: nn.Module) -> dict[str, torch.Tensor]:
    return {
        k: v.detach().clone()
        for k, v in model.state_dict().items()
        if "lora_a" in k or "lora_b" in k
    }


def load_lora_state(model: nn.Module, state: dict[str, torch.Tensor]) -> None:
    missing = [k for k in state if k not in dict(model.named_parameters())]
    if missing:
        raise ValueError(f"adapter state does not fit this model: {missing[:3]}")
    model.load_state_dict(state, strict=False)


def save_checkpoint(model: nn.Module, path: str | Path, meta: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save({"meta": meta, "lora": lora_state_dict(model)}, path)


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, torch.Tensor]]:
    payload = torch.load(path, map_location="cpu")
    return payload["meta"], payload["lora"]
