"""Builder for a tiny local base model.

Real runs pass a pretrained encoder identifier to the bridge; tests and
offline environments need something loadable without a model hub.  This
writes a randomly initialized miniature BERT plus a character-level
WordPiece tokenizer to a directory that ``from_pretrained`` accepts.  Every
word longer than one character splits into several pieces, so first-subword
label alignment is exercised for real.
"""
from __future__ import annotations

import string
from pathlib import Path

import torch
from transformers import BertConfig, BertModel, BertTokenizerFast
from transformers.utils import logging as hf_logging

hf_logging.set_verbosity_error()
hf_logging.disable_progress_bar()

SPECIALS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")
DEFAULT_CHARSET = string.ascii_lowercase + string.digits + "$_"


def build_tiny_base_model(
    path: str | Path,
    hidden_size: int = 32,
    layers: int = 2,
    heads: int = 2,
    seed: int = 12345,
    charset: str = DEFAULT_CHARSET,
) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    chars = list(dict.fromkeys(charset))
    vocab = list(SPECIALS) + chars + ["##" + c for c in chars]
    vocab_file = out / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    tokenizer = BertTokenizerFast(str(vocab_file), do_lower_case=False)
    tokenizer.save_pretrained(out)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=hidden_size,
        num_hidden_layers=layers,
        num_attention_heads=heads,
        intermediate_size=hidden_size * 2,
        max_position_embeddings=512,
    )
    torch.manual_seed(seed)
    BertModel(config).save_pretrained(out)
    return out
