from typing import List, Sequence

import pytest

from cuefidelity.labels import CueLabel
from cuefidelity.lexicon import (
    LexiconEntry,
    Match,
    compile_lexicon,
    load_seed_lexicon,
    parse_lexicon,
)
from cuefidelity.synthetic import generate_synthetic

SAMPLE_TRANSCRIPT = (
    "#session=ot-01 discipline=OT\n"
    "0\t0\t4000\ttherapist\tWhat do you think went well?\n"
    "1\t4000\t9000\ttherapist\tLet's try that again.\n"
    "2\t9000\t15000\tpatient\tI'm not sure, mhm.\n"
    "3\t15000\t21000\ttherapist\tDo you want to write it out?\n"
    "4\t21000\t30000\ttherapist\tThe weather is nice today.\n"
)

SAMPLE_UNTIMED_TRANSCRIPT = (
    "#session=pt-01 discipline=PT\n"
    "0\t-\t-\ttherapist\tCan you say those words backwards?\n"
    "1\t-\t-\t-\tLook better.\n"
)


def brute_force_matches(
    entries: Sequence[LexiconEntry], tokens: Sequence[str]
) -> List[Match]:
    """
    Every entry at every offset, every expansion, without a trie.
    """

    found = []
    for entry in entries:
        for sequence in entry.pattern.expand():
            starts = [0] if entry.anchored else range(len(tokens))
            for start in starts:
                if tuple(tokens[start : start + len(sequence)]) == sequence:
                    found.append(
                        Match(
                            entry_id=entry.entry_id,
                            label=entry.label,
                            token_span=(start, start + len(sequence)),
                            priority=entry.priority,
                            span_length=len(sequence),
                        )
                    )
    return sorted(found, key=Match.sort_key)


@pytest.fixture(scope="session")
def seed_entries() -> List[LexiconEntry]:
    return parse_lexicon(load_seed_lexicon())


@pytest.fixture(scope="session")
def seed_lexicon(seed_entries):
    return compile_lexicon(seed_entries)


@pytest.fixture(scope="session")
def synthetic_corpus(seed_entries):
    return generate_synthetic(
        seed_entries,
        {CueLabel.GUIDED: 50, CueLabel.DIRECTED: 50, CueLabel.NONE: 50},
        noise_rate=0.0,
        seed=7,
    )


@pytest.fixture
def transcript_directory(tmp_path):
    directory = tmp_path / "transcripts"
    directory.mkdir()
    (directory / "ot-01.tsv").write_text(SAMPLE_TRANSCRIPT, encoding="utf-8")
    (directory / "pt-01.tsv").write_text(SAMPLE_UNTIMED_TRANSCRIPT, encoding="utf-8")
    return directory
