"""
ASTE corpus ingestion

Parses ASTE-Data-V2 style files (``tokens####[([i,...], [j,...], 'POS'), ...]``)
into immutable Sentence records, loads train/dev/test splits with optional
dependency-head sidecars, builds a word vocabulary and encodes token ids.
"""

import ast
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import ParseError, ProtocolFault, ValidationError
from .literals import Sentiment, SplitName
from .logging_utils import log_event


logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SEPARATOR = "####"
ROOT = -1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1
DEFAULT_MAX_LEN = 128


@dataclass(frozen=True, order=True)
class Span:
    """Inclusive word-index extent"""
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < self.start:
            raise ValidationError(f"invalid span ({self.start}, {self.end})")

    @property
    def width(self) -> int:
        return self.end - self.start + 1

    def overlaps(self, other: "Span") -> bool:
        return self.start <= other.end and other.start <= self.end

    def indices(self) -> List[int]:
        return list(range(self.start, self.end + 1))

    def as_list(self) -> List[int]:
        return [self.start, self.end]


@dataclass(frozen=True)
class Triplet:
    aspect: Span
    opinion: Span
    sentiment: Sentiment

    def __post_init__(self) -> None:
        if self.aspect.overlaps(self.opinion):
            raise ValidationError(f"aspect {self.aspect} overlaps opinion {self.opinion}")

    def sort_key(self) -> Tuple[int, int, int, int, str]:
        return (self.aspect.start, self.aspect.end, self.opinion.start, self.opinion.end, self.sentiment.value)

    def within(self, length: int) -> bool:
        return self.aspect.end < length and self.opinion.end < length

    def to_json(self) -> Dict[str, object]:
        return {
            "aspect": self.aspect.as_list(),
            "opinion": self.opinion.as_list(),
            "sentiment": self.sentiment.value,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, object]) -> "Triplet":
        try:
            return cls(
                aspect=Span(*data["aspect"]),
                opinion=Span(*data["opinion"]),
                sentiment=Sentiment(data["sentiment"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed triplet record {data!r}: {exc}") from exc


@dataclass(frozen=True)
class Sentence:
    """One review sentence with its gold triplets (file order, duplicates removed)"""
    id: str
    tokens: Tuple[str, ...]
    gold: Tuple[Triplet, ...] = ()
    dep_heads: Optional[Tuple[int, ...]] = None

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValidationError(f"sentence {self.id!r} has no tokens")
        n = len(self.tokens)
        if self.dep_heads is not None:
            validate_heads(self.dep_heads, n)
        for triplet in self.gold:
            if not triplet.within(n):
                raise ValidationError(f"triplet {triplet} out of bounds for {n} tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def gold_set(self) -> frozenset:
        return frozenset(self.gold)

    def text(self, span: Span) -> str:
        return " ".join(self.tokens[span.start:span.end + 1])

    def truncate(self, max_len: int) -> Tuple["Sentence", int]:
        """Cut to max_len tokens; returns the cut sentence and the number of dropped triplets."""
        if len(self.tokens) <= max_len:
            return self, 0
        kept = tuple(t for t in self.gold if t.within(max_len))
        heads = None
        if self.dep_heads is not None:
            heads = tuple(h if h < max_len else ROOT for h in self.dep_heads[:max_len])
        cut = replace(self, tokens=self.tokens[:max_len], gold=kept, dep_heads=heads)
        return cut, len(self.gold) - len(kept)


@dataclass(frozen=True)
class DatasetSplit:
    train: List[Sentence]
    dev: List[Sentence]
    test: List[Sentence]

    def __post_init__(self) -> None:
        self.check_isolation()

    def check_isolation(self) -> None:
        """Raise ProtocolFault when a dev or test sentence id also appears in train"""
        train_ids = {s.id for s in self.train}
        for name in ("dev", "test"):
            leaked = sorted(train_ids & {s.id for s in getattr(self, name)})
            if leaked:
                raise ProtocolFault(f"{len(leaked)} {name} sentence ids also in train", examples=leaked[:5])


@dataclass(frozen=True)
class DatasetStats:
    num_sentences: int
    num_triplets: int
    pos: int
    neu: int
    neg: int

    def to_json(self) -> Dict[str, int]:
        return {
            "sentences": self.num_sentences,
            "triplets": self.num_triplets,
            "pos": self.pos,
            "neu": self.neu,
            "neg": self.neg,
        }


@dataclass(frozen=True)
class Vocab:
    """Dense token ids; PAD=0 and UNK=1 are reserved"""
    tokens: Tuple[str, ...]
    min_freq: int = 1
    index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.tokens[:2] != (PAD_TOKEN, UNK_TOKEN):
            raise ValidationError("vocab must start with PAD and UNK")
        index = {token: i for i, token in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise ValidationError("vocab tokens must be unique")
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id_of(self, token: str) -> int:
        return self.index.get(token, UNK_ID)


@dataclass(frozen=True)
class EncodedSentence:
    sentence: Sentence
    ids: List[int]
    dropped_triplets: int = 0


def validate_heads(heads: Sequence[int], length: int) -> None:
    if len(heads) != length:
        raise ValidationError(f"dep_heads has {len(heads)} entries for {length} tokens")
    for i, head in enumerate(heads):
        if head == ROOT:
            continue
        if not 0 <= head < length or head == i:
            raise ValidationError(f"invalid head {head} for token {i}")


def _byte_offset(text: str, char_index: int) -> int:
    return len(text[:char_index].encode("utf-8"))


def _index_run(value: object, length: int, role: str) -> Span:
    if not isinstance(value, list) or not value:
        raise ValidationError(f"{role} indices must be a non-empty list")
    if not all(isinstance(i, int) and not isinstance(i, bool) for i in value):
        raise ValidationError(f"{role} indices must be integers")
    if value != list(range(value[0], value[0] + len(value))):
        raise ValidationError(f"{role} indices {value} are not contiguous")
    if value[0] < 0 or value[-1] >= length:
        raise ValidationError(f"{role} indices {value} out of range for {length} tokens")
    return Span(value[0], value[-1])


def parse_aste_line(line: str, sentence_id: str = "") -> Sentence:
    """
    Parse one ``tokens####[triplets]`` line

    Args:
        line: Raw line; trailing newline is ignored
        sentence_id: Id given to the resulting sentence

    Returns:
        Sentence with gold triplets in file order

    Raises:
        ParseError: Grammar violation, with the byte offset where it was detected
        ValidationError: Non-contiguous or out-of-range indices
    """
    raw = line.rstrip("\r\n")
    sep = raw.find(SEPARATOR)
    if sep < 0:
        raise ParseError("missing '####' separator", offset=len(raw.encode("utf-8")))

    text = raw[:sep].rstrip()
    if not text:
        raise ParseError("empty sentence", offset=0)
    tokens = text.split(" ")
    position = 0
    for token in tokens:
        if token == "":
            raise ParseError("empty token (tokens are separated by single spaces)", offset=_byte_offset(raw, position))
        position += len(token) + 1

    annotation = raw[sep + len(SEPARATOR):]
    lead = len(annotation) - len(annotation.lstrip())
    base = sep + len(SEPARATOR) + lead
    try:
        value = ast.literal_eval(annotation.strip())
    except SyntaxError as exc:
        column = max((exc.offset or 1) - 1, 0)
        raise ParseError(f"malformed triplet list: {exc.msg}", offset=_byte_offset(raw, base + column)) from exc
    except ValueError as exc:
        raise ParseError(f"malformed triplet list: {exc}", offset=_byte_offset(raw, base)) from exc

    if not isinstance(value, list):
        raise ParseError("triplet list must be a list", offset=_byte_offset(raw, base))

    triplets: List[Triplet] = []
    for item in value:
        if not isinstance(item, tuple) or len(item) != 3:
            raise ParseError("each triplet must be a 3-tuple", offset=_byte_offset(raw, base))
        aspect_ids, opinion_ids, tag = item
        if tag not in Sentiment.__members__:
            raise ParseError(f"unknown sentiment tag {tag!r}", offset=_byte_offset(raw, base))
        triplet = Triplet(
            aspect=_index_run(aspect_ids, len(tokens), "aspect"),
            opinion=_index_run(opinion_ids, len(tokens), "opinion"),
            sentiment=Sentiment[tag],
        )
        if triplet not in triplets:
            triplets.append(triplet)

    return Sentence(id=sentence_id, tokens=tuple(tokens), gold=tuple(triplets))


def serialize_sentence(sentence: Sentence) -> str:
    """Canonical ASTE line for a sentence (no trailing newline)."""
    annotation = [(t.aspect.indices(), t.opinion.indices(), t.sentiment.value) for t in sentence.gold]
    return " ".join(sentence.tokens) + SEPARATOR + repr(annotation)


def load_heads_file(path: PathLike) -> List[Optional[Tuple[int, ...]]]:
    """Dependency sidecar: one line of space-separated heads per sentence, -1 for root."""
    heads: List[Optional[Tuple[int, ...]]] = []
    with open(path, "r", encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                heads.append(None)
                continue
            try:
                heads.append(tuple(int(h) for h in stripped.split()))
            except ValueError as exc:
                raise ValidationError(f"non-integer head: {exc}", path=str(path), line_number=number) from exc
    return heads


def load_file(path: PathLike, split: SplitName, heads_path: Optional[PathLike] = None) -> List[Sentence]:
    """
    Load one ASTE file; ids are ``<split>-<line-number>``

    Raises:
        ParseError / ValidationError: annotated with the file and the 1-based line number
    """
    heads = load_heads_file(heads_path) if heads_path is not None else None
    sentences: List[Sentence] = []
    skipped = 0
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()

    if heads is not None and len(heads) != len(lines):
        raise ValidationError(
            f"heads sidecar has {len(heads)} lines for {len(lines)} data lines", path=str(heads_path)
        )

    for number, line in enumerate(lines, start=1):
        if not line.strip():
            skipped += 1
            continue
        try:
            sentence = parse_aste_line(line, sentence_id=f"{split}-{number}")
            if heads is not None and heads[number - 1] is not None:
                sentence = replace(sentence, dep_heads=heads[number - 1])
        except ParseError as exc:
            raise ParseError(exc.message, offset=exc.offset, path=str(path), line_number=number) from exc
        except ValidationError as exc:
            raise ValidationError(exc.message, path=str(path), line_number=number) from exc
        sentences.append(sentence)

    log_event(logger, "corpus_loaded", split=split, path=str(path), sentences=len(sentences), blank_lines=skipped)
    return sentences


def load_split(
    train_path: PathLike,
    dev_path: PathLike,
    test_path: PathLike,
    heads: Optional[Mapping[str, PathLike]] = None,
) -> DatasetSplit:
    """Load the three partitions; files are read in parallel and merged in train/dev/test order."""
    heads = heads or {}
    jobs = [("train", train_path), ("dev", dev_path), ("test", test_path)]
    with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
        loaded = list(pool.map(lambda job: load_file(job[1], job[0], heads.get(job[0])), jobs))
    return DatasetSplit(train=loaded[0], dev=loaded[1], test=loaded[2])


def dataset_stats(sentences: Iterable[Sentence]) -> DatasetStats:
    counts: Counter = Counter()
    num_sentences = 0
    for sentence in sentences:
        num_sentences += 1
        counts.update(t.sentiment for t in sentence.gold)
    return DatasetStats(
        num_sentences=num_sentences,
        num_triplets=sum(counts.values()),
        pos=counts[Sentiment.POS],
        neu=counts[Sentiment.NEU],
        neg=counts[Sentiment.NEG],
    )


def build_vocab(sentences: Iterable[Sentence], min_freq: int = 1) -> Vocab:
    """Ids ordered by frequency (descending) then lexicographically."""
    if min_freq < 1:
        raise ValidationError(f"min_freq must be >= 1, got {min_freq}")
    counts = Counter(token for sentence in sentences for token in sentence.tokens)
    for reserved in (PAD_TOKEN, UNK_TOKEN):
        counts.pop(reserved, None)
    ordered = sorted((t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t))
    return Vocab(tokens=(PAD_TOKEN, UNK_TOKEN, *ordered), min_freq=min_freq)


def encode_tokens(vocab: Vocab, sentence: Sentence, max_len: int = DEFAULT_MAX_LEN) -> EncodedSentence:
    """
    Map tokens to ids, truncating to max_len

    Gold triplets that touch a truncated position are dropped and counted
    (``dropped_triplets``); a warning event is logged when that happens.
    Padding is left to the batcher.
    """
    if max_len < 1:
        raise ValidationError(f"max_len must be >= 1, got {max_len}")
    cut, dropped = sentence.truncate(max_len)
    if dropped:
        log_event(logger, "triplets_truncated", logging.WARNING, sentence=sentence.id, dropped=dropped, max_len=max_len)
    return EncodedSentence(sentence=cut, ids=[vocab.id_of(t) for t in cut.tokens], dropped_triplets=dropped)
