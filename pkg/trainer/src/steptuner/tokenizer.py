"""Byte-level tokenizer: ids 0-255 are raw UTF-8 bytes, then BOS/EOS/PAD.

Needs no vocabulary files or network, and round-trips any text exactly.
"""

from __future__ import annotations


class ByteTokenizer:
    BOS = 256
    EOS = 257
    PAD = 258

    vocab_size = 259

    def encode(self, text: str) -> list[int]:
        return list(text.encode("utf-8"))

    def decode(self, ids: list[int]) -> str:
        return bytes(i for i in ids if i < 256).decode("utf-8", errors="replace")
