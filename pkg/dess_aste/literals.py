from typing import Literal
from enum import Enum


PresetName = Literal[
    "paper-main",
    "table1-base",
    "table1-large",
    "table1-xxlarge",
    "table3",
    "table3-large",
    "table3-xxlarge",
    "toy",
    "trial-0",
    "trial-1",
    "trial-2",
]
EncoderShape = Literal["v3-base", "v3-large", "v2-xxlarge", "toy"]
DatasetName = Literal["14lap", "14res", "15res", "16res"]
SplitName = Literal["train", "dev", "test"]
KlDirection = Literal["sem_to_syn", "syn_to_sem"]


class Sentiment(Enum):
    POS = "POS"
    NEU = "NEU"
    NEG = "NEG"


class EntityLabel(Enum):
    # Order is the argmax tie-break order.
    NONE = 0
    ASPECT = 1
    OPINION = 2


class PairLabel(Enum):
    INVALID = 0
    POS = 1
    NEU = 2
    NEG = 3

    @classmethod
    def from_sentiment(cls, sentiment: Sentiment) -> "PairLabel":
        return cls[sentiment.value]

    def to_sentiment(self) -> Sentiment:
        if self is PairLabel.INVALID:
            raise ValueError("INVALID has no sentiment")
        return Sentiment(self.name)
