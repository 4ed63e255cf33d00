from typing import Iterable, Optional


class Error(Exception):
    """
    Base class for all cuefidelity errors.
    """

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def __str__(self) -> str:
        return f"Error: {self.message}"


class FormatError(Error):
    """
    Raised when an input file (transcript, corpus, lexicon, annotations, predictions)
    is malformed.
    """

    def __init__(
        self, message: str, line: Optional[int] = None, field: Optional[str] = None
    ):
        super().__init__(message)
        self.line = line
        self.field = field

    def __str__(self) -> str:
        location = []
        if self.line is not None:
            location.append(f"line {self.line}")
        if self.field:
            location.append(f"field '{self.field}'")

        if not location:
            return f"Error: {self.message}"

        return f"Error ({', '.join(location)}): {self.message}"


class LexiconSyntaxError(FormatError):
    """
    Raised when a lexicon line does not follow the pattern grammar.
    """

    pass


class InvalidInput(Error):
    """
    Raised when a value is well-formed but violates a domain rule.
    """

    pass


class InsufficientLabels(InvalidInput):
    """
    Raised when training data lacks one of the three cue labels.
    """

    pass


class NoPairableValues(InvalidInput):
    """
    Raised when no unit carries two or more values for agreement computation.
    """

    pass


class DuplicateRule(Error):
    """
    Raised when two lexicon entries share pattern, label and priority.
    """

    pass


class UnresolvedDisagreements(Error):
    """
    Raised when a consensus merge is attempted with disagreements left open.
    """

    def __init__(self, disagreement_ids: Iterable[str]):
        self.disagreement_ids = tuple(disagreement_ids)
        super().__init__(
            f"{len(self.disagreement_ids)} unresolved disagreement(s): "
            + ", ".join(self.disagreement_ids)
        )


class MissingPredictions(Error):
    """
    Raised when examples or utterances have no prediction.
    """

    def __init__(self, identifiers: Iterable[str]):
        self.identifiers = tuple(identifiers)
        super().__init__(
            f"{len(self.identifiers)} item(s) without a prediction: "
            + ", ".join(self.identifiers)
        )
