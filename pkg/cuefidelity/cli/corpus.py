from pathlib import Path
from typing import List, Optional

import typer
from rich import print

from ..agreement import parse_annotations
from ..config import settings
from ..corpus import (
    Corpus,
    balance_with_none,
    build_gold_corpus,
    clean_transcript,
    collect_none_pool,
    length_stats,
    load_transcripts,
    parse_transcript,
    read_corpus,
    render_corpus,
    render_transcript,
    split_corpus,
    split_examples,
)
from ..exceptions import InvalidInput
from ..lexicon import parse_lexicon
from ..synthetic import generate_synthetic, parse_counts
from ..utils import (
    display_error_message,
    display_success_message,
    read_text,
    write_output,
)
from . import record_run
from .lexicon import lexicon_source

app = typer.Typer()


def parse_quantiles(value: str) -> List[float]:
    try:
        return [float(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise InvalidInput(f"Quantiles must be comma-separated numbers, got '{value}'")


def clean(
    transcript: Path = typer.Argument(..., help="The transcript file to clean."),
    output: Path = typer.Option(
        ..., "-o", "--output", help="Where to write the cleaned transcript."
    ),
) -> None:
    """
    Write the transcript with every utterance in cleaned form.
    """

    try:
        cleaned = clean_transcript(parse_transcript(read_text(transcript)))
        write_output(output, render_transcript(cleaned))
        record_run(output, [transcript])

        display_success_message(
            f"Cleaned {len(cleaned.utterances)} utterances of {cleaned.session_id}"
        )
    except Exception as error:
        display_error_message(error)
        raise typer.Exit(code=1)


@app.command()
def build(
    transcripts: Path = typer.Option(..., help="Directory of transcript files."),
    annotations: Path = typer.Option(..., help="The (consensus) annotation file."),
    output: Path = typer.Option(
        ..., "-o", "--output", help="Where to write the cue corpus."
    ),
    pool_out: Optional[Path] = typer.Option(
        None, help="Where to write the none-pool, as a corpus of NONE examples."
    ),
) -> None:
    """
    Build the gold corpus of Guided and Directed examples from annotated transcripts.
    """

    try:
        documents = load_transcripts(transcripts)
        annotation_sets = parse_annotations(read_text(annotations))

        gold = build_gold_corpus(documents, annotation_sets)
        write_output(output, render_corpus(gold))
        record_run(output, [transcripts, annotations])

        if pool_out:
            pool = collect_none_pool(documents, annotation_sets)
            write_output(pool_out, render_corpus(Corpus(examples=tuple(pool))))
            display_success_message(f"None-pool of {len(pool)} utterances written")

        display_success_message(f"Gold corpus of {len(gold)} examples written")
    except Exception as error:
        display_error_message(error)
        raise typer.Exit(code=1)


@app.command()
def balance(
    corpus: Path = typer.Option(..., help="The Guided/Directed corpus."),
    pool: Path = typer.Option(..., help="The none-pool corpus."),
    seed: Optional[int] = typer.Option(None, help="Seed for sampling the none-pool."),
    output: Path = typer.Option(
        ..., "-o", "--output", help="Where to write the balanced corpus."
    ),
) -> None:
    """
    Add None examples sampled from the pool to match the larger cue class.
    """

    try:
        seed = settings.resolve_seed(seed)
        balanced = balance_with_none(
            read_corpus(read_text(corpus)), read_corpus(read_text(pool)).examples, seed
        )
        write_output(output, render_corpus(balanced))
        record_run(output, [corpus, pool], seeds={"balance": seed})

        counts = balanced.label_counts()
        display_success_message(
            "Balanced corpus written: "
            + ", ".join(f"{label.value} {count}" for label, count in counts.items())
        )
    except Exception as error:
        display_error_message(error)
        raise typer.Exit(code=1)


@app.command()
def split(
    corpus: Optional[Path] = typer.Option(None, help="A corpus to split by session."),
    transcripts: Optional[Path] = typer.Option(
        None, help="A directory of transcripts to split by document."
    ),
    fraction: float = typer.Option(
        0.7, help="Share of documents per discipline for training."
    ),
    seed: Optional[int] = typer.Option(None, help="Seed for the split."),
    train_out: Path = typer.Option(..., help="Where to write the training part."),
    validation_out: Path = typer.Option(
        ..., help="Where to write the validation part."
    ),
) -> None:
    """
    Split a corpus or a transcript directory per discipline, keeping sessions whole.

    Transcript splits are written as two directories of transcript files.
    """

    try:
        if (corpus is None) == (transcripts is None):
            raise InvalidInput("Give exactly one of --corpus and --transcripts")

        seed = settings.resolve_seed(seed)

        if corpus is not None:
            train, validation = split_examples(
                read_corpus(read_text(corpus)), fraction, seed
            )
            write_output(train_out, render_corpus(train))
            write_output(validation_out, render_corpus(validation))
            sizes = (len(train), len(validation))
        else:
            train_docs, validation_docs = split_corpus(
                load_transcripts(transcripts), fraction, seed
            )
            for directory, documents in (
                (train_out, train_docs),
                (validation_out, validation_docs),
            ):
                for document in documents:
                    write_output(
                        directory / f"{document.session_id}.tsv",
                        render_transcript(document),
                    )
            sizes = (len(train_docs), len(validation_docs))

        record_run(train_out, [corpus or transcripts], seeds={"split": seed})
        display_success_message(
            f"Split into {sizes[0]} training and {sizes[1]} validation items"
        )
    except Exception as error:
        display_error_message(error)
        raise typer.Exit(code=1)


@app.command()
def stats(
    corpus: Path = typer.Option(..., help="The corpus to describe."),
    quantiles: str = typer.Option(
        "0.5,0.75,0.9", help="Comma-separated word-count quantiles."
    ),
    output: Optional[Path] = typer.Option(
        None, "-o", "--output", help="Write the statistics as JSON."
    ),
) -> None:
    """
    Word-count statistics of a corpus.
    """

    try:
        statistics = length_stats(
            read_corpus(read_text(corpus)), parse_quantiles(quantiles)
        )

        if output:
            write_output(output, statistics.model_dump_json(indent=2) + "\n")
            record_run(output, [corpus])
        else:
            print(statistics.model_dump())
    except Exception as error:
        display_error_message(error)
        raise typer.Exit(code=1)


@app.command()
def synth(
    lexicon: Optional[Path] = typer.Option(None, help="The lexicon to instantiate."),
    counts: str = typer.Option(
        "G:50,D:50,N:50", help="Examples per label, e.g. G:50,D:50,N:50."
    ),
    noise: float = typer.Option(0.0, help="Share of tokens replaced at random."),
    seed: Optional[int] = typer.Option(None, help="Seed for generation."),
    sessions: int = typer.Option(10, help="Synthetic sessions per discipline."),
    output: Path = typer.Option(
        ..., "-o", "--output", help="Where to write the corpus."
    ),
) -> None:
    """
    Generate a synthetic labelled corpus from lexicon entries.
    """

    try:
        seed = settings.resolve_seed(seed)
        synthetic = generate_synthetic(
            parse_lexicon(lexicon_source(lexicon)),
            parse_counts(counts),
            noise,
            seed,
            sessions_per_discipline=sessions,
        )
        write_output(output, render_corpus(synthetic))
        record_run(output, [lexicon] if lexicon else [], seeds={"synth": seed})

        display_success_message(
            f"Synthetic corpus of {len(synthetic)} examples written"
        )
    except Exception as error:
        display_error_message(error)
        raise typer.Exit(code=1)
