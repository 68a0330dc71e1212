"""
Seeded template corpus over a fixed 30-word vocabulary

Small enough for the toy preset to memorise; each sentence carries one or two
triplets whose sentiment follows the opinion word.
"""

from typing import Dict, List, Sequence, Tuple

import numpy as np

from .corpus import Sentence, Span, Triplet
from .literals import Sentiment


ASPECTS = ("food", "service", "staff", "screen", "battery", "price")
OPINIONS: Dict[Sentiment, Tuple[str, ...]] = {
    Sentiment.POS: ("great", "delicious", "friendly", "bright"),
    Sentiment.NEG: ("slow", "rude", "awful", "expensive"),
    Sentiment.NEU: ("okay", "average"),
}
FILLERS = ("the", "was", "is", "and", "but", "very", "really", ",", ".", "too", "so", "quite", "also", "overall")
INTENSIFIERS = ("very", "really", "too", "so", "quite")

SYNTHETIC_VOCABULARY: Tuple[str, ...] = (
    *ASPECTS,
    *(word for words in OPINIONS.values() for word in words),
    *FILLERS,
)

# "{a}"/"{o}" slots are the first triplet, "{a2}"/"{o2}" the second, "{i}" an intensifier.
TEMPLATES: Tuple[str, ...] = (
    "the {a} was {o} .",
    "the {a} is {i} {o} .",
    "overall the {a} was {o} .",
    "the {a} was {o} , but the {a2} was {o2} .",
    "the {a} is {o} and the {a2} is also {o2} .",
    "{o} {a} but {i} {o2} {a2} .",
)

_OPINION_SENTIMENT = {word: sentiment for sentiment, words in OPINIONS.items() for word in words}


def _fill(template: str, slots: Dict[str, str]) -> Tuple[Tuple[str, ...], List[Triplet]]:
    tokens: List[str] = []
    positions: Dict[str, int] = {}
    for piece in template.split(" "):
        if piece.startswith("{") and piece.endswith("}"):
            name = piece[1:-1]
            positions[name] = len(tokens)
            tokens.append(slots[name])
        else:
            tokens.append(piece)
    triplets = []
    for aspect, opinion in (("a", "o"), ("a2", "o2")):
        if aspect in positions:
            triplets.append(Triplet(
                aspect=Span(positions[aspect], positions[aspect]),
                opinion=Span(positions[opinion], positions[opinion]),
                sentiment=_OPINION_SENTIMENT[slots[opinion]],
            ))
    return tuple(tokens), triplets


def _pick(rng: np.random.Generator, words: Sequence[str]) -> str:
    return words[int(rng.integers(len(words)))]


def synthetic_corpus(n: int = 16, seed: int = 0, prefix: str = "synthetic") -> List[Sentence]:
    """
    Generate ``n`` sentences deterministically from ``seed``

    Ids are ``<prefix>-<i>``. Two-triplet templates always use two distinct aspects.
    """
    rng = np.random.default_rng(seed)
    opinion_words = [word for words in OPINIONS.values() for word in words]
    sentences = []
    for i in range(n):
        template = TEMPLATES[int(rng.integers(len(TEMPLATES)))]
        first, second = rng.choice(len(ASPECTS), size=2, replace=False)
        slots = {
            "a": ASPECTS[int(first)],
            "a2": ASPECTS[int(second)],
            "o": _pick(rng, opinion_words),
            "o2": _pick(rng, opinion_words),
            "i": _pick(rng, INTENSIFIERS),
        }
        tokens, triplets = _fill(template, slots)
        sentences.append(Sentence(id=f"{prefix}-{i}", tokens=tokens, gold=tuple(triplets)))
    return sentences
