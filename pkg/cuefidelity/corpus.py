"""
Transcripts, gold examples and corpora: parsing, cleaning, gold-corpus construction,
none-cue balancing, stratified splits and length statistics.
"""

import logging
import math
import random
from collections import Counter
from fractions import Fraction
from pathlib import Path
from statistics import fmean
from typing import (
    Callable,
    Dict,
    Iterable,
    List,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
    Union,
)

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .agreement import AnnotationSet
from .exceptions import FormatError, InvalidInput
from .labels import DISCIPLINE_ORDER, LABEL_ORDER, CueLabel, Discipline, SplitTag
from .text import clean_text, tokenize
from .utils import read_text

logger = logging.getLogger(__name__)

ABSENT = "-"
TRANSCRIPT_HEADER = "#session="
TRANSCRIPT_SUFFIXES = (".tsv", ".txt")

T = TypeVar("T")


class Utterance(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int = Field(ge=0)
    text: str
    speaker: Optional[str] = None
    start_ms: Optional[int] = Field(default=None, ge=0)
    end_ms: Optional[int] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def check_timestamps(self) -> "Utterance":
        if (
            self.start_ms is not None
            and self.end_ms is not None
            and self.end_ms < self.start_ms
        ):
            raise ValueError(
                f"end_ms ({self.end_ms}) precedes start_ms ({self.start_ms})"
            )
        return self

    @property
    def duration_ms(self) -> Optional[int]:
        if self.start_ms is None or self.end_ms is None:
            return None
        return self.end_ms - self.start_ms


class Transcript(BaseModel):
    model_config = ConfigDict(frozen=True)

    session_id: str = Field(min_length=1)
    discipline: Discipline
    utterances: Tuple[Utterance, ...] = ()

    @model_validator(mode="after")
    def check_indices(self) -> "Transcript":
        for position, utterance in enumerate(self.utterances):
            if utterance.index != position:
                raise ValueError(
                    "utterance indices must run 0..n-1; "
                    f"found {utterance.index} at position {position}"
                )
        return self


class GoldExample(BaseModel):
    model_config = ConfigDict(frozen=True)

    example_id: str = Field(min_length=1)
    text: str
    label: CueLabel
    discipline: Discipline
    session_id: str

    @model_validator(mode="after")
    def check_clean(self) -> "GoldExample":
        if clean_text(self.text) != self.text:
            raise ValueError(f"text of {self.example_id} is not in cleaned form")
        if any(char in self.example_id for char in "\t\n"):
            raise ValueError("example_id must not contain tabs or newlines")
        return self


class Corpus(BaseModel):
    model_config = ConfigDict(frozen=True)

    examples: Tuple[GoldExample, ...] = ()
    split_tag: SplitTag = SplitTag.UNSPLIT
    warnings: Tuple[str, ...] = ()

    @model_validator(mode="after")
    def check_unique_ids(self) -> "Corpus":
        counts = Counter(example.example_id for example in self.examples)
        duplicates = [example_id for example_id, count in counts.items() if count > 1]
        if duplicates:
            raise ValueError(f"duplicate example_id values: {', '.join(duplicates)}")
        return self

    def __len__(self) -> int:
        return len(self.examples)

    def label_counts(self) -> Dict[CueLabel, int]:
        counts = Counter(example.label for example in self.examples)
        return {label: counts.get(label, 0) for label in LABEL_ORDER}

    def labels(self) -> List[CueLabel]:
        return [example.label for example in self.examples]


class LengthStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    count: int
    min_words: int
    max_words: int
    mean_words: float
    quantiles: Dict[float, int]


def utterance_id(session_id: str, index: int) -> str:
    return f"{session_id}:{index}"


def _parse_header(line: str) -> Tuple[str, Discipline]:
    if not line.startswith("#"):
        raise FormatError(
            "Missing header '#session=<id> discipline=<OT|PT|SLP>'", line=1
        )

    values = {}
    for part in line[1:].split():
        if "=" not in part:
            raise FormatError(f"Malformed header item '{part}'", line=1, field="header")
        key, value = part.split("=", maxsplit=1)
        values[key] = value

    for key in ("session", "discipline"):
        if not values.get(key):
            raise FormatError(f"Header is missing '{key}='", line=1, field=key)

    return values["session"], Discipline.parse(values["discipline"])


def _optional_ms(value: str, number: int, field: str) -> Optional[int]:
    if value == ABSENT:
        return None
    try:
        parsed = int(value)
    except ValueError:
        raise FormatError(
            f"'{value}' is not an integer or '-'", line=number, field=field
        )
    if parsed < 0:
        raise FormatError(f"'{value}' is negative", line=number, field=field)
    return parsed


def parse_transcript(document: str) -> Transcript:
    lines = document.splitlines()
    if not lines:
        raise FormatError("Empty transcript document", line=1)

    session_id, discipline = _parse_header(lines[0])
    utterances: List[Utterance] = []

    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue

        fields = line.split("\t", maxsplit=4)
        if len(fields) != 5:
            raise FormatError(
                "Expected 5 tab-separated fields "
                "(idx, start_ms, end_ms, speaker, text), "
                f"found {len(fields)}",
                line=number,
            )

        index, start, end, speaker, text = fields
        try:
            parsed_index = int(index)
        except ValueError:
            raise FormatError(f"'{index}' is not an integer", line=number, field="idx")
        if parsed_index != len(utterances):
            raise FormatError(
                f"Expected utterance index {len(utterances)}, found {parsed_index}",
                line=number,
                field="idx",
            )

        try:
            utterances.append(
                Utterance(
                    index=parsed_index,
                    text=text,
                    speaker=None if speaker == ABSENT else speaker,
                    start_ms=_optional_ms(start, number, "start_ms"),
                    end_ms=_optional_ms(end, number, "end_ms"),
                )
            )
        except ValidationError as error:
            raise InvalidInput(
                f"line {number}: {error.errors()[0]['msg']}"
            )

    return Transcript(
        session_id=session_id, discipline=discipline, utterances=tuple(utterances)
    )


def render_transcript(transcript: Transcript) -> str:
    lines = [
        f"{TRANSCRIPT_HEADER}{transcript.session_id} "
        f"discipline={transcript.discipline.value}"
    ]
    for utterance in transcript.utterances:
        lines.append(
            "\t".join(
                [
                    str(utterance.index),
                    ABSENT if utterance.start_ms is None else str(utterance.start_ms),
                    ABSENT if utterance.end_ms is None else str(utterance.end_ms),
                    utterance.speaker or ABSENT,
                    utterance.text,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def clean_transcript(transcript: Transcript) -> Transcript:
    return transcript.model_copy(
        update={
            "utterances": tuple(
                utterance.model_copy(update={"text": clean_text(utterance.text)})
                for utterance in transcript.utterances
            )
        }
    )


def load_transcripts(directory: Union[str, Path]) -> List[Transcript]:
    paths = sorted(
        path
        for path in Path(directory).iterdir()
        if path.is_file() and path.suffix in TRANSCRIPT_SUFFIXES
    )

    transcripts = []
    for path in paths:
        try:
            transcripts.append(parse_transcript(read_text(path)))
        except (FormatError, InvalidInput) as error:
            error.message = f"{path.name}: {error.message}"
            raise

    sessions = Counter(transcript.session_id for transcript in transcripts)
    repeated = [session for session, count in sessions.items() if count > 1]
    if repeated:
        raise InvalidInput(f"Session '{repeated[0]}' appears in more than one file")

    logger.info("Loaded %d transcripts from %s", len(transcripts), directory)
    return transcripts


def _index_transcripts(transcripts: Sequence[Transcript]) -> Dict[str, Transcript]:
    return {transcript.session_id: transcript for transcript in transcripts}


def _resolve_annotation(
    by_session: Dict[str, Transcript], annotation_set: AnnotationSet
) -> Transcript:
    transcript = by_session.get(annotation_set.doc_id)
    if transcript is None:
        raise InvalidInput(
            f"Annotations of {annotation_set.annotator_id} reference unknown document "
            f"'{annotation_set.doc_id}'"
        )
    return transcript


def build_gold_corpus(
    transcripts: Sequence[Transcript], annotations: Sequence[AnnotationSet]
) -> Corpus:
    """
    One cleaned example per Guided or Directed annotation. Annotations labelled NONE
    only mark their utterance as belonging to the none-pool.
    """

    by_session = _index_transcripts(transcripts)
    examples: Dict[str, GoldExample] = {}

    for annotation_set in annotations:
        transcript = _resolve_annotation(by_session, annotation_set)

        for annotation in annotation_set.annotations:
            where = (
                f"{annotation_set.doc_id}/{annotation_set.annotator_id} "
                f"utterance {annotation.utterance_index} "
                f"span {annotation.char_start}-{annotation.char_end}"
            )
            if annotation.utterance_index >= len(transcript.utterances):
                raise InvalidInput(f"Annotation {where}: no such utterance")

            utterance = transcript.utterances[annotation.utterance_index]
            if annotation.char_end > len(utterance.text):
                raise InvalidInput(
                    f"Annotation {where}: span exceeds utterance length "
                    f"{len(utterance.text)}"
                )

            if annotation.label is CueLabel.NONE:
                continue

            text = clean_text(
                utterance.text[annotation.char_start : annotation.char_end]
            )
            if not text:
                raise InvalidInput(f"Annotation {where}: span is empty after cleaning")

            example = GoldExample(
                example_id=(
                    f"{transcript.session_id}:{annotation.utterance_index}:"
                    f"{annotation.char_start}-{annotation.char_end}"
                ),
                text=text,
                label=annotation.label,
                discipline=transcript.discipline,
                session_id=transcript.session_id,
            )

            previous = examples.get(example.example_id)
            if previous is not None and previous.label != example.label:
                raise InvalidInput(
                    f"Annotation {where}: conflicting labels {previous.label.value} "
                    f"and {example.label.value}; merge the annotators' sets with "
                    "consensus first"
                )
            examples[example.example_id] = example

    logger.info("Built gold corpus with %d cue examples", len(examples))
    return Corpus(examples=tuple(examples.values()))


def collect_none_pool(
    transcripts: Sequence[Transcript], annotations: Sequence[AnnotationSet]
) -> List[GoldExample]:
    """
    Every non-empty utterance without a Guided or Directed annotation, labelled NONE.
    """

    by_session = _index_transcripts(transcripts)
    cued = set()
    for annotation_set in annotations:
        _resolve_annotation(by_session, annotation_set)
        for annotation in annotation_set.annotations:
            if annotation.label is not CueLabel.NONE:
                cued.add((annotation_set.doc_id, annotation.utterance_index))

    pool = []
    for transcript in transcripts:
        for utterance in transcript.utterances:
            if (transcript.session_id, utterance.index) in cued:
                continue
            text = clean_text(utterance.text)
            if not text:
                continue
            pool.append(
                GoldExample(
                    example_id=utterance_id(transcript.session_id, utterance.index),
                    text=text,
                    label=CueLabel.NONE,
                    discipline=transcript.discipline,
                    session_id=transcript.session_id,
                )
            )
    return pool


def balance_with_none(
    cued: Corpus, none_pool: Sequence[GoldExample], seed: int
) -> Corpus:
    """
    Adds k none examples drawn uniformly without replacement from the pool, with
    k = max(count(Guided), count(Directed)).
    """

    stray = [e.example_id for e in cued.examples if e.label is CueLabel.NONE]
    if stray:
        raise InvalidInput(
            "The cue corpus must hold only Guided/Directed examples; "
            f"found NONE in {stray[0]}"
        )

    counts = cued.label_counts()
    target = max(counts[CueLabel.GUIDED], counts[CueLabel.DIRECTED])

    warnings = list(cued.warnings)
    if len(none_pool) < target:
        message = (
            f"None-pool holds {len(none_pool)} utterances but {target} are needed; "
            "using the whole pool"
        )
        logger.warning(message)
        warnings.append(message)
        sampled = list(none_pool)
    else:
        sampled = random.Random(seed).sample(list(none_pool), target)

    nones = [example.model_copy(update={"label": CueLabel.NONE}) for example in sampled]

    return Corpus(
        examples=cued.examples + tuple(nones),
        split_tag=cued.split_tag,
        warnings=tuple(warnings),
    )


def _train_count(size: int, train_fraction: float) -> int:
    share = Fraction(train_fraction).limit_denominator(10**6)
    return int(share * size + Fraction(1, 2))


def _stratified_split(
    items: Sequence[T],
    discipline_of: Callable[[T], Discipline],
    key_of: Callable[[T], str],
    train_fraction: float,
    seed: int,
) -> Tuple[List[T], List[T]]:
    if not 0 < train_fraction < 1:
        raise InvalidInput(f"train_fraction must lie in (0, 1), got {train_fraction}")

    rng = random.Random(seed)
    train: List[T] = []
    validation: List[T] = []

    for discipline in DISCIPLINE_ORDER:
        group = sorted(
            (item for item in items if discipline_of(item) is discipline), key=key_of
        )
        if not group:
            continue

        rng.shuffle(group)
        cut = _train_count(len(group), train_fraction)
        train.extend(group[:cut])
        validation.extend(group[cut:])

        logger.debug(
            "Split %s: %d train, %d validation", discipline.value, cut, len(group) - cut
        )

    return train, validation


def split_corpus(
    docs: Sequence[Transcript], train_fraction: float, seed: int
) -> Tuple[List[Transcript], List[Transcript]]:
    """
    Per-discipline stratified document split, deterministic in seed.
    """

    return _stratified_split(
        docs,
        lambda transcript: transcript.discipline,
        lambda transcript: transcript.session_id,
        train_fraction,
        seed,
    )


def group_sessions(
    corpus: Corpus,
) -> List[Tuple[Discipline, str, List[GoldExample]]]:
    sessions: Dict[Tuple[Discipline, str], List[GoldExample]] = {}
    for example in corpus.examples:
        key = (example.discipline, example.session_id)
        sessions.setdefault(key, []).append(example)
    return [
        (discipline, session, items)
        for (discipline, session), items in sessions.items()
    ]


def split_examples(
    corpus: Corpus, train_fraction: float, seed: int
) -> Tuple[Corpus, Corpus]:
    """
    Session-level split of a corpus: its examples are grouped into documents by
    (discipline, session_id) and the documents are split like transcripts.
    """

    train_sessions, validation_sessions = _stratified_split(
        group_sessions(corpus),
        lambda session: session[0],
        lambda session: session[1],
        train_fraction,
        seed,
    )

    def _collect(sessions: Iterable[Tuple[Discipline, str, List[GoldExample]]]):
        chosen = {(discipline, session) for discipline, session, _ in sessions}
        return tuple(
            example
            for example in corpus.examples
            if (example.discipline, example.session_id) in chosen
        )

    return (
        Corpus(examples=_collect(train_sessions), split_tag=SplitTag.TRAIN),
        Corpus(examples=_collect(validation_sessions), split_tag=SplitTag.VALIDATION),
    )


def length_stats(corpus: Corpus, quantiles: Sequence[float]) -> LengthStats:
    """
    Word-count statistics. Quantile q is the smallest count w such that at least
    ceil(q * n) examples have at most w words.
    """

    if not corpus.examples:
        raise InvalidInput("Cannot compute length statistics of an empty corpus")

    counts = sorted(len(tokenize(example.text)) for example in corpus.examples)
    size = len(counts)

    reported = {}
    for quantile in quantiles:
        if not 0 <= quantile <= 1:
            raise InvalidInput(f"Quantile {quantile} is outside [0, 1]")
        needed = math.ceil(Fraction(quantile).limit_denominator(10**6) * size)
        reported[quantile] = counts[max(needed, 1) - 1]

    return LengthStats(
        count=size,
        min_words=counts[0],
        max_words=counts[-1],
        mean_words=fmean(counts),
        quantiles=reported,
    )


def read_corpus(source: str, split_tag: SplitTag = SplitTag.UNSPLIT) -> Corpus:
    examples = []
    for number, line in enumerate(source.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue

        fields = line.split("\t", maxsplit=4)
        if len(fields) != 5:
            raise FormatError(
                "Expected 5 tab-separated fields "
                "(example_id, label, discipline, session_id, text), "
                f"found {len(fields)}",
                line=number,
            )

        example_id, label, discipline, session_id, text = fields
        try:
            cue_label = CueLabel.parse(label)
        except InvalidInput as error:
            raise FormatError(error.message, line=number, field="label")
        try:
            discipline_value = Discipline.parse(discipline)
        except InvalidInput as error:
            raise FormatError(error.message, line=number, field="discipline")

        try:
            examples.append(
                GoldExample(
                    example_id=example_id,
                    text=text,
                    label=cue_label,
                    discipline=discipline_value,
                    session_id=session_id,
                )
            )
        except ValidationError as error:
            raise FormatError(error.errors()[0]["msg"], line=number, field="text")

    try:
        return Corpus(examples=tuple(examples), split_tag=split_tag)
    except ValidationError as error:
        raise InvalidInput(error.errors()[0]["msg"])


def render_corpus(corpus: Corpus) -> str:
    return "".join(
        "\t".join(
            [
                example.example_id,
                example.label.value,
                example.discipline.value,
                example.session_id,
                example.text,
            ]
        )
        + "\n"
        for example in corpus.examples
    )
