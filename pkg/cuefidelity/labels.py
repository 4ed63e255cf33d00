from enum import Enum
from typing import Tuple

from .exceptions import InvalidInput


class CueLabel(str, Enum):
    """
    The three-way classification target for a therapist utterance.
    """

    GUIDED = "GUIDED"
    DIRECTED = "DIRECTED"
    NONE = "NONE"

    @classmethod
    def parse(cls, value: str) -> "CueLabel":
        try:
            return cls(value.strip())
        except ValueError:
            raise InvalidInput(
                f"Unknown cue label '{value}'. Expected one of GUIDED, DIRECTED, NONE."
            )


# Fixed order for matrices, probability vectors and tie-breaking.
LABEL_ORDER: Tuple[CueLabel, ...] = (CueLabel.GUIDED, CueLabel.DIRECTED, CueLabel.NONE)


class Discipline(str, Enum):
    """
    The therapy type of a rehabilitation session.
    """

    OT = "OT"
    PT = "PT"
    SLP = "SLP"

    @classmethod
    def parse(cls, value: str) -> "Discipline":
        try:
            return cls(value.strip())
        except ValueError:
            raise InvalidInput(
                f"Unknown discipline '{value}'. Expected one of OT, PT, SLP."
            )


DISCIPLINE_ORDER: Tuple[Discipline, ...] = (
    Discipline.OT,
    Discipline.PT,
    Discipline.SLP,
)


class SplitTag(str, Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"
    UNSPLIT = "unsplit"
