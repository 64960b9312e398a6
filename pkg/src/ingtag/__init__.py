"""Ingredient phrase tagging with a self-attention token classifier."""

from .corpus import Label, Phrase, Token, load_corpus, phrase_from_text, tokenize
from .model import Hyper, ModelParams, classify_tokens, forward, parse, structure

__all__ = [
    "Hyper",
    "Label",
    "ModelParams",
    "Phrase",
    "Token",
    "classify_tokens",
    "forward",
    "load_corpus",
    "parse",
    "phrase_from_text",
    "structure",
    "tokenize",
]
__version__ = "0.1.0"
