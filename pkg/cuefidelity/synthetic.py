"""
Synthetic labelled corpora instantiated from lexicon entries, for desk-scale testing
without access to clinical transcripts.
"""

import logging
import random
from typing import Dict, List, Mapping, Sequence, Tuple

from .corpus import Corpus, GoldExample
from .exceptions import InvalidInput
from .labels import DISCIPLINE_ORDER, LABEL_ORDER, CueLabel
from .lexicon import CompiledLexicon, LexiconEntry, compile_lexicon

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 50

# Everyday rehabilitation-session words. Words that appear in the lexicon are
# filtered out before use, so filler never creates or breaks a trigger by itself.
FILLER_VOCABULARY: Tuple[str, ...] = (
    "again", "all", "bag", "ball", "basket", "bathroom", "bed", "bit", "box",
    "button", "card", "careful", "chair", "clock", "coffee", "cup", "door",
    "first", "foot", "good", "great", "grocery", "hand", "kitchen", "later",
    "laundry", "left", "list", "little", "morning", "next", "nice", "now",
    "number", "okay", "one", "page", "phone", "picture", "pill", "plate",
    "right", "sentence", "shirt", "shoe", "sink", "slowly", "so", "sock",
    "spoon", "stairs", "step", "table", "the", "there", "three", "today",
    "together", "towel", "two", "um", "walker", "water", "word", "yeah",
)


def _lexicon_vocabulary(entries: Sequence[LexiconEntry]) -> List[str]:
    return sorted(
        {
            token
            for entry in entries
            for sequence in entry.pattern.expand()
            for token in sequence
        }
    )


def _filler(
    rng: random.Random, filler: Sequence[str], low: int, high: int
) -> List[str]:
    return [rng.choice(filler) for _ in range(rng.randint(low, high))]


class _Generator:
    def __init__(
        self,
        entries: Sequence[LexiconEntry],
        lexicon: CompiledLexicon,
        rng: random.Random,
    ):
        self.lexicon = lexicon
        self.rng = rng
        self.trigger_vocabulary = _lexicon_vocabulary(entries)
        triggers = set(self.trigger_vocabulary)
        self.filler = [word for word in FILLER_VOCABULARY if word not in triggers]
        if not self.filler:
            raise InvalidInput(
                "The lexicon covers every filler word; cannot build texts"
            )

        self.sequences = {entry.entry_id: entry.pattern.expand() for entry in entries}
        self.by_label: Dict[CueLabel, List[LexiconEntry]] = {
            label: [entry for entry in entries if entry.label is label]
            for label in LABEL_ORDER
        }
        self.turns: Dict[CueLabel, int] = {label: 0 for label in LABEL_ORDER}

    def cue(self, label: CueLabel) -> List[str]:
        """
        Instantiates entries of the label in turn; a candidate is kept only when the
        lexicon's top match carries the label and the source entry matches.
        """

        candidates = self.by_label[label]
        if not candidates:
            raise InvalidInput(f"The lexicon has no {label.value} entry to instantiate")

        for _ in range(MAX_ATTEMPTS):
            entry = candidates[self.turns[label] % len(candidates)]
            self.turns[label] += 1

            prefix = [] if entry.anchored else _filler(self.rng, self.filler, 0, 3)
            body = list(self.rng.choice(self.sequences[entry.entry_id]))
            tokens = prefix + body + _filler(self.rng, self.filler, 1, 6)

            matches = self.lexicon.match(tokens)
            if (
                matches
                and matches[0].label is label
                and any(match.entry_id == entry.entry_id for match in matches)
            ):
                return tokens

        raise InvalidInput(
            f"Could not instantiate a {label.value} example from the lexicon after "
            f"{MAX_ATTEMPTS} attempts; its entries are always outranked"
        )

    def distractor(self) -> List[str]:
        """
        Ordinary dialogue: filler words with the occasional lexicon word away from the
        utterance start, matching no entry.
        """

        for _ in range(MAX_ATTEMPTS):
            tokens = _filler(self.rng, self.filler, 3, 10)
            if self.rng.random() < 0.5:
                position = self.rng.randint(1, len(tokens))
                tokens.insert(position, self.rng.choice(self.trigger_vocabulary))

            if not self.lexicon.match(tokens):
                return tokens

        raise InvalidInput(
            "Could not build a distractor sentence that matches no entry"
        )

    def add_noise(self, tokens: List[str], noise_rate: float) -> List[str]:
        substitutions = int(noise_rate * len(tokens) + 0.5)
        if not substitutions:
            return tokens

        vocabulary = self.filler + self.trigger_vocabulary
        noisy = list(tokens)
        for position in self.rng.sample(range(len(tokens)), substitutions):
            noisy[position] = self.rng.choice(vocabulary)
        return noisy


def parse_counts(value: str) -> Dict[CueLabel, int]:
    """
    Parses "G:50,D:50,N:50" (or full label names) into per-label counts.
    """

    shorthands = {label.value[0]: label for label in LABEL_ORDER}
    counts: Dict[CueLabel, int] = {}

    for part in value.split(","):
        if ":" not in part:
            raise InvalidInput(f"Malformed count '{part}'; expected LABEL:N")
        name, number = (piece.strip() for piece in part.split(":", maxsplit=1))
        label = shorthands.get(name) or CueLabel.parse(name)
        try:
            counts[label] = int(number)
        except ValueError:
            raise InvalidInput(f"Count '{number}' for {label.value} is not an integer")

    return counts


def generate_synthetic(
    entries: Sequence[LexiconEntry],
    counts: Mapping[CueLabel, int],
    noise_rate: float,
    seed: int,
    sessions_per_discipline: int = 10,
) -> Corpus:
    """
    Emits exactly counts[label] examples per label, deterministic in seed.

    Examples rotate over the disciplines OT, PT, SLP and over sessions_per_discipline
    synthetic sessions each, so session-level splits behave like the clinical protocol.
    """

    if not 0 <= noise_rate <= 1:
        raise InvalidInput(f"noise_rate must lie in [0, 1], got {noise_rate}")
    if sessions_per_discipline < 1:
        raise InvalidInput("sessions_per_discipline must be at least 1")
    if any(count < 0 for count in counts.values()):
        raise InvalidInput("Counts must not be negative")

    labels = {entry.label for entry in entries}
    if CueLabel.GUIDED not in labels or CueLabel.DIRECTED not in labels:
        raise InvalidInput(
            "The lexicon needs at least one Guided and one Directed entry"
        )

    generator = _Generator(entries, compile_lexicon(entries), random.Random(seed))
    examples: List[GoldExample] = []

    for label in LABEL_ORDER:
        for _ in range(counts.get(label, 0)):
            if label is CueLabel.NONE:
                tokens = generator.distractor()
            else:
                tokens = generator.cue(label)
            tokens = generator.add_noise(tokens, noise_rate)

            position = len(examples)
            discipline = DISCIPLINE_ORDER[position % len(DISCIPLINE_ORDER)]
            session = (position // len(DISCIPLINE_ORDER)) % sessions_per_discipline

            examples.append(
                GoldExample(
                    example_id=f"synth-{position:05d}",
                    text=" ".join(tokens),
                    label=label,
                    discipline=discipline,
                    session_id=f"synth-{discipline.value}-{session:02d}",
                )
            )

    logger.info(
        "Generated %d synthetic examples (noise %.2f, seed %d)",
        len(examples),
        noise_rate,
        seed,
    )
    return Corpus(examples=tuple(examples))
