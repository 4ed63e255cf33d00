from pathlib import Path
from typing import Dict, List, Optional

import typer
from rich import print

from ..agreement import (
    DEFAULT_THRESHOLD,
    diff_annotations,
    krippendorff_alpha,
    merge_consensus,
    pair_annotation_sets,
    parse_annotations,
    parse_resolutions,
    render_annotations,
    render_disagreements,
    utterance_units,
)
from ..corpus import load_transcripts
from ..exceptions import InvalidInput
from ..labels import CueLabel
from ..utils import (
    display_error_message,
    display_success_message,
    read_text,
    write_output,
)
from . import record_run


def agreement(
    a: Path = typer.Option(..., "--a", help="Annotations of the first annotator."),
    b: Path = typer.Option(..., "--b", help="Annotations of the second annotator."),
    min_alpha: float = typer.Option(
        DEFAULT_THRESHOLD, help="Alpha an annotation round must exceed to pass."
    ),
    transcripts: Optional[Path] = typer.Option(
        None,
        help="Transcript directory; enables per-discipline alpha.",
    ),
    disagreements_out: Optional[Path] = typer.Option(
        None, help="Where to write the adjudication worksheet."
    ),
) -> None:
    """
    Krippendorff's alpha between two annotators over utterance labels.

    Exits with status 1 when the pooled or any per-discipline alpha does not exceed
    the gate.
    """

    try:
        pairs = pair_annotation_sets(
            parse_annotations(read_text(a)), parse_annotations(read_text(b))
        )
        if not pairs:
            raise InvalidInput("No annotations to compare")

        documents = (
            {t.session_id: t for t in load_transcripts(transcripts)}
            if transcripts
            else {}
        )

        units: List[List[CueLabel]] = []
        per_discipline: Dict[str, List[List[CueLabel]]] = {}
        for set_a, set_b in pairs:
            document = documents.get(set_a.doc_id)
            if transcripts and document is None:
                raise InvalidInput(f"No transcript for document '{set_a.doc_id}'")

            document_units = utterance_units(
                set_a, set_b, len(document.utterances) if document else None
            )
            units.extend(document_units)
            if document:
                per_discipline.setdefault(document.discipline.value, []).extend(
                    document_units
                )

        pooled = krippendorff_alpha(units, threshold=min_alpha)
        results = {"pooled": pooled}
        for discipline in sorted(per_discipline):
            results[discipline] = krippendorff_alpha(
                per_discipline[discipline], threshold=min_alpha
            )

        print(
            {
                name: {
                    "alpha": result.alpha,
                    "pairable_values": result.n_pairable_values,
                    "passes_gate": result.passes_gate,
                }
                for name, result in results.items()
            }
        )

        if disagreements_out:
            disagreements = [
                item
                for set_a, set_b in pairs
                for item in diff_annotations(set_a, set_b)
            ]
            write_output(disagreements_out, render_disagreements(disagreements))
            record_run(disagreements_out, [a, b])
            display_success_message(
                f"{len(disagreements)} disagreement(s) written to {disagreements_out}"
            )

        failing = [name for name, result in results.items() if not result.passes_gate]
        if failing:
            raise InvalidInput(
                f"Agreement does not exceed {min_alpha} for: {', '.join(failing)}"
            )

        display_success_message(f"Agreement passes the {min_alpha} gate")
    except Exception as error:
        display_error_message(error)
        raise typer.Exit(code=1)


def consensus(
    a: Path = typer.Option(..., "--a", help="Annotations of the first annotator."),
    b: Path = typer.Option(..., "--b", help="Annotations of the second annotator."),
    resolutions: Path = typer.Option(
        ..., help="Adjudicated labels, one 'disagreement_id<TAB>LABEL' per line."
    ),
    output: Path = typer.Option(
        ..., "-o", "--output", help="Where to write the consensus annotations."
    ),
) -> None:
    """
    Merge two annotators' sets once every disagreement has a resolution.
    """

    try:
        resolved = parse_resolutions(read_text(resolutions))
        pairs = pair_annotation_sets(
            parse_annotations(read_text(a)), parse_annotations(read_text(b))
        )

        merged = [merge_consensus(set_a, set_b, resolved) for set_a, set_b in pairs]
        write_output(output, render_annotations(merged))
        record_run(output, [a, b, resolutions])

        display_success_message(
            f"Consensus annotations for {len(merged)} document(s) written"
        )
    except Exception as error:
        display_error_message(error)
        raise typer.Exit(code=1)
