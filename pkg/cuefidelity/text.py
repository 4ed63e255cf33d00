"""
Utterance normalisation shared by the lexicon matcher and the trainable models.

Cleaned text is lower-cased, has sentence punctuation removed, keeps apostrophes
that sit between two word characters ("let's", "i'm") and uses single spaces only.
Filler tokens such as "mhm" are kept.
"""

import re
from typing import List

_CURLY_APOSTROPHES = str.maketrans({"’": "'", "‘": "'"})
_PUNCTUATION = re.compile(r"[.,?!;:\"“”…]")
_LOOSE_APOSTROPHE = re.compile(r"(?<!\w)'|'(?!\w)")
_WHITESPACE = re.compile(r"\s+")


def clean_text(raw: str) -> str:
    text = raw.translate(_CURLY_APOSTROPHES).lower()
    text = _PUNCTUATION.sub(" ", text)
    text = _LOOSE_APOSTROPHE.sub(" ", text)

    return _WHITESPACE.sub(" ", text).strip()


def tokenize(text: str) -> List[str]:
    if not text:
        return []

    return text.split(" ")
