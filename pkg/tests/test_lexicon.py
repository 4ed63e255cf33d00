import hashlib
import random

import pytest

from cuefidelity.exceptions import DuplicateRule, LexiconSyntaxError
from cuefidelity.labels import LABEL_ORDER, CueLabel
from cuefidelity.lexicon import (
    LexiconEntry,
    compile_lexicon,
    load_seed_lexicon,
    match_utterance,
    parse_lexicon,
    parse_pattern,
    render_lexicon,
)

from .conftest import brute_force_matches

VOCABULARY = ["a", "b", "c", "d", "e", "f"]


def test_parse_anchored_entry():
    (entry,) = parse_lexicon("G1\t50\t^\twhat do you think\tGUIDED\n")

    assert entry.entry_id == "G1"
    assert entry.priority == 50
    assert entry.anchored
    assert len(entry.pattern.atoms) == 4
    assert entry.label is CueLabel.GUIDED
    assert entry.source_note is None


def test_parse_alternation_group():
    (entry,) = parse_lexicon("D7\t60\t^\tlet's (start|go|try|give)\tDIRECTED\tnote\n")

    assert entry.pattern.expand() == (
        ("let's", "give"),
        ("let's", "go"),
        ("let's", "start"),
        ("let's", "try"),
    )
    assert entry.source_note == "note"


def test_parse_optional_atoms():
    tree = parse_pattern("can you? (say|keep going)?")

    assert tree.expand() == (
        ("can",),
        ("can", "keep", "going"),
        ("can", "say"),
        ("can", "you"),
        ("can", "you", "keep", "going"),
        ("can", "you", "say"),
    )
    assert tree.render() == "can you? (say|keep going)?"


def test_unknown_label_names_the_line():
    source = "# comment\nG1\t50\t^\twhat\tGUIDED\nM1\t10\t-\tmaybe\tMAYBE\n"

    with pytest.raises(LexiconSyntaxError) as raised:
        parse_lexicon(source)

    assert raised.value.line == 3
    assert raised.value.field == "label"


@pytest.mark.parametrize(
    "pattern",
    [
        "(do|can you",
        "do) you",
        "",
        "do  you",
        "do you ",
        "((do|can) you)",
        "(do|) you",
        "What",
        "do?",
        "(do|can)? you?",
        "do|can",
    ],
)
def test_pattern_grammar_errors(pattern):
    with pytest.raises(LexiconSyntaxError) as raised:
        parse_pattern(pattern, line=7)

    assert raised.value.line == 7
    assert raised.value.field == "pattern"


def test_duplicate_entry_id_is_rejected():
    source = "G1\t50\t^\twhat\tGUIDED\nG1\t40\t^\thow\tGUIDED\n"

    with pytest.raises(LexiconSyntaxError) as raised:
        parse_lexicon(source)

    assert raised.value.line == 2
    assert "line 1" in raised.value.message


def test_bad_anchor_and_priority():
    with pytest.raises(LexiconSyntaxError) as raised:
        parse_lexicon("G1\thigh\t^\twhat\tGUIDED\n")
    assert raised.value.field == "priority"

    with pytest.raises(LexiconSyntaxError) as raised:
        parse_lexicon("G1\t5\t*\twhat\tGUIDED\n")
    assert raised.value.field == "anchor"


def test_seed_lexicon_parses_and_round_trips(seed_entries):
    assert len(seed_entries) > 20
    assert parse_lexicon(render_lexicon(seed_entries)) == seed_entries


def test_compiled_single_literal_accepts_exactly():
    lexicon = compile_lexicon(parse_lexicon("N1\t60\t-\tlook better\tNONE\n"))

    assert lexicon.accepts(["look", "better"]) == ["N1"]
    assert lexicon.accepts(["look"]) == []
    assert lexicon.accepts(["look", "better", "now"]) == []


def test_compiled_alternation_accepts_each_expansion():
    lexicon = compile_lexicon(parse_lexicon("G1\t40\t^\tdo you (want|need)\tGUIDED\n"))

    assert lexicon.accepts(["do", "you", "want"]) == ["G1"]
    assert lexicon.accepts(["do", "you", "need"]) == ["G1"]
    assert lexicon.accepts(["do", "you"]) == []
    assert lexicon.accepts(["do", "you", "see"]) == []


def test_duplicate_rule_is_rejected():
    entries = parse_lexicon(
        "G1\t40\t^\tdo you want\tGUIDED\nG2\t40\t^\tdo you want\tGUIDED\n"
    )

    with pytest.raises(DuplicateRule):
        compile_lexicon(entries)


def test_reordered_alternatives_are_the_same_rule():
    entries = parse_lexicon(
        "A\t10\t^\tdo you (want|need)\tGUIDED\n"
        "B\t10\t^\tdo you (need|want)\tGUIDED\n"
    )

    with pytest.raises(DuplicateRule):
        compile_lexicon(entries)
    raised = entries[1].model_copy(update={"priority": 11})
    distinct = compile_lexicon([entries[0], raised])
    assert distinct.accepts(["do", "you", "need"]) == ["A", "B"]


def test_version_hash_digests_the_rendered_lexicon(seed_entries):
    canonical = sorted(seed_entries, key=lambda entry: entry.entry_id)
    expected = hashlib.sha256(render_lexicon(canonical).encode("utf-8")).hexdigest()
    reparsed = parse_lexicon(render_lexicon(seed_entries))

    assert compile_lexicon(seed_entries).version_hash == expected
    assert compile_lexicon(reparsed).version_hash == expected


def test_version_hash_is_stable_and_order_independent(seed_entries):
    first = compile_lexicon(seed_entries)
    second = compile_lexicon(parse_lexicon(load_seed_lexicon()))
    shuffled = list(seed_entries)
    random.Random(1).shuffle(shuffled)

    assert first.version_hash == second.version_hash
    assert compile_lexicon(shuffled).version_hash == first.version_hash


def test_match_lets_try(seed_lexicon):
    matches = match_utterance(seed_lexicon, "let's try that again")

    assert matches[0].entry_id == "D05"
    assert matches[0].token_span == (0, 2)
    assert matches[0].label is CueLabel.DIRECTED


def test_match_empty_text(seed_lexicon):
    assert match_utterance(seed_lexicon, "") == []


def test_specific_none_entry_outranks_trigger(seed_lexicon):
    matches = match_utterance(seed_lexicon, "look better please")

    assert [m.entry_id for m in matches] == ["N03", "D01"]
    assert matches[0].label is CueLabel.NONE


def test_anchored_entries_only_match_at_the_start(seed_lexicon):
    assert match_utterance(seed_lexicon, "so what do you think about look") == []
    matches = match_utterance(seed_lexicon, "what do you think about look")
    assert matches[0].entry_id == "G05"


def random_pattern(rng):
    atoms = []
    for _ in range(rng.randint(1, 3)):
        if rng.random() < 0.3:
            alternatives = {
                " ".join(rng.choices(VOCABULARY, k=rng.randint(1, 2)))
                for _ in range(rng.randint(1, 3))
            }
            atom = "(" + "|".join(sorted(alternatives)) + ")"
        else:
            atom = rng.choice(VOCABULARY)
        if rng.random() < 0.2:
            atom += "?"
        atoms.append(atom)

    if all(atom.endswith("?") for atom in atoms):
        atoms[0] = atoms[0][:-1]
    return " ".join(atoms)


def random_lexicon(rng):
    entries = {}
    for number in range(rng.randint(1, 30)):
        entry = LexiconEntry(
            entry_id=f"E{number:02d}",
            priority=rng.randint(0, 4),
            anchored=rng.random() < 0.3,
            pattern=parse_pattern(random_pattern(rng)),
            label=rng.choice(LABEL_ORDER),
        )
        key = (entry.anchored, entry.pattern.expand(), entry.label, entry.priority)
        entries.setdefault(key, entry)
    return list(entries.values())


def test_matcher_equals_brute_force_scan():
    rng = random.Random(20240501)

    for _ in range(1000):
        entries = random_lexicon(rng)
        tokens = rng.choices(VOCABULARY, k=rng.randint(0, 40))

        matches = compile_lexicon(entries).match(tokens)

        assert matches == brute_force_matches(entries, tokens)
        anchored = {e.entry_id for e in entries if e.anchored}
        assert all(m.start == 0 for m in matches if m.entry_id in anchored)
        keys = [m.sort_key() for m in matches]
        assert len(set(keys)) == len(keys)


def test_matching_is_independent_of_entry_order():
    rng = random.Random(99)

    for _ in range(100):
        entries = random_lexicon(rng)
        tokens = rng.choices(VOCABULARY, k=rng.randint(0, 20))
        shuffled = list(entries)
        rng.shuffle(shuffled)

        assert compile_lexicon(entries).match(tokens) == compile_lexicon(
            shuffled
        ).match(tokens)


def test_recompiling_rendered_entries_preserves_accepts():
    rng = random.Random(5)

    for _ in range(50):
        entries = random_lexicon(rng)
        original = compile_lexicon(entries)
        recompiled = compile_lexicon(parse_lexicon(render_lexicon(entries)))

        for entry in entries:
            for sequence in entry.pattern.expand():
                assert original.accepts(sequence) == recompiled.accepts(sequence)
