from pathlib import Path
from typing import Dict, Optional

import typer

from ..classify import (
    BaselineClassifier,
    Classifier,
    Hyperparameters,
    RuleClassifier,
    classify_corpus,
    load_model,
    save_model,
    train_baseline,
)
from ..config import settings
from ..corpus import TRANSCRIPT_HEADER, parse_transcript, read_corpus, utterance_id
from ..evaluate import render_predictions
from ..labels import CueLabel
from ..lexicon import compile_lexicon, parse_lexicon
from ..utils import (
    digest,
    display_error_message,
    display_success_message,
    read_text,
    write_output,
)
from . import record_run
from .lexicon import lexicon_source

app = typer.Typer()


def classify_document(classifier: Classifier, document: str) -> Dict[str, CueLabel]:
    """
    Labels a corpus by example_id, or a transcript by <session_id>:<utterance_index>.
    """

    if document.startswith(TRANSCRIPT_HEADER):
        transcript = parse_transcript(document)
        return {
            utterance_id(transcript.session_id, utterance.index): classifier.classify(
                utterance.text
            ).label
            for utterance in transcript.utterances
        }

    return classify_corpus(classifier, read_corpus(document))


@app.command()
def rule(
    lexicon: Optional[Path] = typer.Option(None, help="The lexicon file."),
    source: Path = typer.Option(..., "--in", help="A corpus or transcript file."),
    output: Path = typer.Option(
        ..., "-o", "--output", help="Where to write the predictions."
    ),
) -> None:
    """
    Label every example or utterance with the rule classifier.
    """

    try:
        compiled = compile_lexicon(parse_lexicon(lexicon_source(lexicon)))
        predictions = classify_document(RuleClassifier(compiled), read_text(source))

        write_output(output, render_predictions(predictions))
        record_run(output, [source], versions={"lexicon": compiled.version_hash})

        display_success_message(f"{len(predictions)} predictions written")
    except Exception as error:
        display_error_message(error)
        raise typer.Exit(code=1)


@app.command()
def model(
    model: Path = typer.Option(..., help="A model file written by train."),
    source: Path = typer.Option(..., "--in", help="A corpus or transcript file."),
    output: Path = typer.Option(
        ..., "-o", "--output", help="Where to write the predictions."
    ),
) -> None:
    """
    Label every example or utterance with a trained baseline model.
    """

    try:
        classifier = BaselineClassifier(load_model(read_text(model)))
        predictions = classify_document(classifier, read_text(source))

        write_output(output, render_predictions(predictions))
        record_run(output, [model, source], versions={"model": classifier.version})

        display_success_message(f"{len(predictions)} predictions written")
    except Exception as error:
        display_error_message(error)
        raise typer.Exit(code=1)


def train(
    corpus: Path = typer.Option(..., help="The training corpus."),
    epochs: int = typer.Option(4, help="Passes over the training data."),
    batch: int = typer.Option(64, help="Mini-batch size."),
    learning_rate: float = typer.Option(0.1, help="Gradient descent step size."),
    l2: float = typer.Option(1e-4, help="L2 penalty on the weights."),
    min_frequency: int = typer.Option(
        1, help="Minimum token count for the vocabulary."
    ),
    max_length: Optional[int] = typer.Option(
        None,
        help="Maximum sequence length. Defaults to CUEFIDELITY_MAX_SEQUENCE_LENGTH.",
    ),
    seed: Optional[int] = typer.Option(None, help="Seed for batch shuffling."),
    output: Path = typer.Option(
        ..., "-o", "--output", help="Where to write the model."
    ),
) -> None:
    """
    Train the bag-of-n-grams baseline on a corpus.
    """

    try:
        seed = settings.resolve_seed(seed)
        hyperparameters = Hyperparameters(
            epochs=epochs,
            batch_size=batch,
            learning_rate=learning_rate,
            l2_penalty=l2,
            max_sequence_length=max_length or settings.max_sequence_length,
            min_frequency=min_frequency,
        )
        trained = train_baseline(read_corpus(read_text(corpus)), hyperparameters, seed)

        document = save_model(trained)
        write_output(output, document)
        record_run(
            output,
            [corpus],
            seeds={"train": seed},
            versions={"model": digest(document)},
        )

        display_success_message(
            f"Model trained over {epochs} epochs, "
            f"final loss {trained.loss_history[-1]:.4f}"
        )
    except Exception as error:
        display_error_message(error)
        raise typer.Exit(code=1)
