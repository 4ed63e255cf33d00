"""
Per-session fidelity reports: cue types, counts, frequencies and durations.
"""

import io
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from rich.console import Console
from rich.table import Table
from rich.text import Text

from . import __version__
from .classify import Classifier
from .corpus import Transcript, utterance_id
from .evaluate import render_predictions
from .exceptions import FormatError, InvalidInput, MissingPredictions
from .labels import LABEL_ORDER, CueLabel, Discipline
from .text import clean_text
from .utils import digest, write_output

logger = logging.getLogger(__name__)

MS_PER_MINUTE = 60_000
EMPTY_SOURCE = "empty"
REPORT_WIDTH = 100


class ReportFormat(str, Enum):
    STRUCTURED = "structured"
    TEXT = "text"


class CueInstance(BaseModel):
    model_config = ConfigDict(frozen=True)

    utterance_index: int = Field(ge=0)
    label: CueLabel
    source: str
    text: str
    start_ms: Optional[int] = None
    end_ms: Optional[int] = None

    @property
    def duration_ms(self) -> Optional[int]:
        if self.start_ms is None or self.end_ms is None:
            return None
        return self.end_ms - self.start_ms


class FidelityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    session_id: str
    discipline: Discipline
    classifier_id: str
    version: str
    counts: Dict[CueLabel, int]
    session_duration_ms: Optional[int] = None
    frequency_per_minute: Optional[Dict[CueLabel, float]] = None
    duration_ms_per_label: Optional[Dict[CueLabel, int]] = None
    cue_instances: Tuple[CueInstance, ...] = ()

    @model_validator(mode="after")
    def check_consistency(self) -> "FidelityReport":
        grouped = {label: 0 for label in LABEL_ORDER}
        for instance in self.cue_instances:
            grouped[instance.label] += 1
        if {label: self.counts.get(label, 0) for label in LABEL_ORDER} != grouped:
            raise ValueError("counts must equal the cue instances grouped by label")

        timed = self.session_duration_ms is not None
        if timed != (self.frequency_per_minute is not None):
            raise ValueError(
                "frequencies are present exactly when the session duration is"
            )
        if timed != (self.duration_ms_per_label is not None):
            raise ValueError(
                "cue durations are present exactly when the session duration is"
            )
        return self

    def instances(self, label: CueLabel) -> List[CueInstance]:
        return [instance for instance in self.cue_instances if instance.label is label]


class PredictionSet:
    """
    Predictions loaded from a file, keyed ``<session_id>:<utterance_index>``.
    """

    classifier_id = "predictions"

    def __init__(self, predictions: Mapping[str, CueLabel]):
        self.predictions = dict(predictions)
        self.version = digest(render_predictions(self.predictions))


def _session_duration(transcript: Transcript) -> Optional[int]:
    first = transcript.utterances[0].start_ms
    last = transcript.utterances[-1].end_ms
    if first is None or last is None or last <= first:
        return None
    return last - first


def _classify_utterances(
    transcript: Transcript, classifier: Union[Classifier, PredictionSet]
) -> List[Tuple[CueLabel, str]]:
    if isinstance(classifier, PredictionSet):
        keys = [
            utterance_id(transcript.session_id, u.index) for u in transcript.utterances
        ]
        missing = [key for key in keys if key not in classifier.predictions]
        if missing:
            raise MissingPredictions(missing)
        return [(classifier.predictions[key], classifier.classifier_id) for key in keys]

    labelled = []
    for utterance in transcript.utterances:
        if not clean_text(utterance.text):
            labelled.append((CueLabel.NONE, EMPTY_SOURCE))
            continue

        prediction = classifier.classify(utterance.text)
        source = prediction.matched_entry or classifier.classifier_id
        labelled.append((prediction.label, source))
    return labelled


def assess_session(
    transcript: Transcript, classifier: Union[Classifier, PredictionSet]
) -> FidelityReport:
    if not transcript.utterances:
        raise InvalidInput(f"Transcript {transcript.session_id} has no utterances")

    instances = tuple(
        CueInstance(
            utterance_index=utterance.index,
            label=label,
            source=source,
            text=utterance.text,
            start_ms=utterance.start_ms,
            end_ms=utterance.end_ms,
        )
        for utterance, (label, source) in zip(
            transcript.utterances, _classify_utterances(transcript, classifier)
        )
    )

    counts = {label: 0 for label in LABEL_ORDER}
    for instance in instances:
        counts[instance.label] += 1

    session_duration = _session_duration(transcript)
    frequencies = durations = None
    if session_duration is not None:
        frequencies = {
            label: counts[label] * MS_PER_MINUTE / session_duration
            for label in LABEL_ORDER
        }
        durations = {
            label: sum(
                instance.duration_ms
                for instance in instances
                if instance.label is label and instance.duration_ms is not None
            )
            for label in LABEL_ORDER
        }

    logger.info(
        "Session %s: %s",
        transcript.session_id,
        ", ".join(f"{label.value} {counts[label]}" for label in LABEL_ORDER),
    )
    return FidelityReport(
        session_id=transcript.session_id,
        discipline=transcript.discipline,
        classifier_id=classifier.classifier_id,
        version=classifier.version,
        counts=counts,
        session_duration_ms=session_duration,
        frequency_per_minute=frequencies,
        duration_ms_per_label=durations,
        cue_instances=instances,
    )


def assess_sessions(
    transcripts: Sequence[Transcript],
    classifier: Union[Classifier, PredictionSet],
    workers: int = 4,
) -> List[FidelityReport]:
    """
    Assesses sessions in a thread pool; reports come back in input order.
    """

    if workers < 1:
        raise InvalidInput("workers must be at least 1")

    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(lambda t: assess_session(t, classifier), transcripts))


def _render_text(report: FidelityReport) -> str:
    console = Console(
        file=io.StringIO(), record=True, width=REPORT_WIDTH, color_system=None
    )
    timed = report.session_duration_ms is not None

    console.print(
        f"Session {report.session_id} ({report.discipline.value})", markup=False
    )
    console.print(f"Classifier: {report.classifier_id} {report.version}", markup=False)
    if timed:
        console.print(f"Duration: {report.session_duration_ms / MS_PER_MINUTE:.2f} min")

    counts = Table(title="Cue counts")
    counts.add_column("Label")
    counts.add_column("Count", justify="right")
    if timed:
        counts.add_column("Per minute", justify="right")
        counts.add_column("Cue time (s)", justify="right")
    for label in LABEL_ORDER:
        row = [label.value, str(report.counts[label])]
        if timed:
            row.append(f"{report.frequency_per_minute[label]:.2f}")
            row.append(f"{report.duration_ms_per_label[label] / 1000:.1f}")
        counts.add_row(*row)
    console.print(counts)

    cues = [i for i in report.cue_instances if i.label is not CueLabel.NONE]
    if cues:
        table = Table(title="Cue instances")
        table.add_column("#", justify="right")
        table.add_column("Label")
        table.add_column("Source")
        if timed:
            table.add_column("Start (s)", justify="right")
        table.add_column("Text")
        for instance in cues:
            row = [
                str(instance.utterance_index),
                instance.label.value,
                Text(instance.source),
            ]
            if timed:
                start = instance.start_ms
                row.append("" if start is None else f"{start / 1000:.1f}")
            row.append(Text(instance.text))
            table.add_row(*row)
        console.print(table)
    else:
        console.print("No guided or directed cues.")

    return console.export_text()


def render_report(
    report: FidelityReport, format: ReportFormat = ReportFormat.STRUCTURED
) -> str:
    if format == ReportFormat.TEXT:
        return _render_text(report)
    return json.dumps(report.model_dump(mode="json"), indent=2) + "\n"


def parse_report(document: str) -> FidelityReport:
    try:
        return FidelityReport.model_validate(json.loads(document))
    except (ValueError, ValidationError) as error:
        raise FormatError(f"Not a valid structured report: {error}")


class RunManifest(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: Tuple[str, ...]
    inputs: Dict[str, str]
    seeds: Dict[str, int] = {}
    versions: Dict[str, str] = {}
    timestamp: str


def build_manifest(
    inputs: Sequence[Union[str, Path]],
    seeds: Optional[Mapping[str, int]] = None,
    versions: Optional[Mapping[str, str]] = None,
    command: Optional[Sequence[str]] = None,
) -> RunManifest:
    digests = {}
    for path in inputs:
        source = Path(path)
        files = sorted(source.iterdir()) if source.is_dir() else [source]
        for item in files:
            if item.is_file():
                digests[str(item)] = digest(item.read_bytes())

    return RunManifest(
        command=tuple(sys.argv if command is None else command),
        inputs=digests,
        seeds=dict(seeds or {}),
        versions={"cuefidelity": __version__, **(versions or {})},
        timestamp=datetime.now(timezone.utc).isoformat(),
    )


def write_manifest(output: Union[str, Path], manifest: RunManifest) -> Path:
    target = Path(f"{output}.manifest.json")
    return write_output(target, manifest.model_dump_json(indent=2) + "\n")
