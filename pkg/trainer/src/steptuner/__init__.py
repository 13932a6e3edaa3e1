"""Two-stage LoRA supervised fine-tuning over emitted tuning JSONL."""

from .data import SchemaError, TuningExample, check_stage_kind, detect_kind, load_stage_file
from .modeling import LoRALinear, apply_lora, build_base_model, lora_state_dict, merge_lora
from .tokenizer import ByteTokenizer
from .training import (
    StageOrderError,
    StageResult,
    TrainSpec,
    encode_example,
    train_stage2_only,
    train_two_stage,
)

__version__ = "0.1.0"
