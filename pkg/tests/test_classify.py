import random

import numpy as np
import pytest

from cuefidelity.classify import (
    PAD_ID,
    UNKNOWN_ID,
    BaselineClassifier,
    Hyperparameters,
    RuleClassifier,
    build_vocab,
    classify_corpus,
    encode,
    gradient_check,
    initialize_model,
    load_model,
    loss_and_gradients,
    predict,
    rule_classify,
    save_model,
    softmax,
    train_baseline,
)
from cuefidelity.corpus import Corpus, GoldExample, split_examples
from cuefidelity.evaluate import AverageMode, averaged_f1, confusion
from cuefidelity.exceptions import FormatError, InsufficientLabels, InvalidInput
from cuefidelity.labels import LABEL_ORDER, CueLabel, Discipline
from cuefidelity.lexicon import compile_lexicon, match_utterance
from cuefidelity.synthetic import generate_synthetic
from cuefidelity.text import clean_text, tokenize

LEXICON_EXAMPLES = [
    ("Do you want to write it out?", CueLabel.GUIDED),
    ("Do you need a drink of water?", CueLabel.NONE),
    ("If you give me two minutes I'm gonna run to the restroom", CueLabel.NONE),
    ("Look for kind of those important landmarks", CueLabel.DIRECTED),
    ("Look at that first one for me again", CueLabel.DIRECTED),
    ("Look better", CueLabel.NONE),
    ("Can think of any equipment that might help?", CueLabel.GUIDED),
    ("Can do that for me?", CueLabel.GUIDED),
    ("Can you see them?", CueLabel.GUIDED),
    ("Can you say those words backwards?", CueLabel.DIRECTED),
    ("Can you keep your feet up?", CueLabel.DIRECTED),
    ("What do you think went well?", CueLabel.GUIDED),
    ("What am I going to do next?", CueLabel.GUIDED),
    ("What I'm gonna have you do", CueLabel.DIRECTED),
    ("What I want you to do is", CueLabel.DIRECTED),
    ("What if your feet get out?", CueLabel.NONE),
    ("What about me could I have one?", CueLabel.NONE),
    ("Let's talk about how you're gonna do it", CueLabel.GUIDED),
    ("Let's come up with a plan", CueLabel.GUIDED),
    ("Let's go over to that area", CueLabel.DIRECTED),
    ("Let's try that again", CueLabel.DIRECTED),
    ("Let's give it a shot", CueLabel.DIRECTED),
    ("Do it this way", CueLabel.DIRECTED),
    ("the weather is nice today", CueLabel.NONE),
]

TOY_HYPERPARAMETERS = Hyperparameters(
    epochs=200, batch_size=4, learning_rate=0.5, l2_penalty=0.0
)
FIXTURE_HYPERPARAMETERS = Hyperparameters(epochs=50, batch_size=16, learning_rate=0.2)


def example(example_id, text, label):
    return GoldExample(
        example_id=example_id,
        text=text,
        label=label,
        discipline=Discipline.SLP,
        session_id="s",
    )


def corpus_of(*items):
    return Corpus(
        examples=tuple(
            example(f"e{i}", text, label) for i, (text, label) in enumerate(items)
        )
    )


@pytest.fixture(scope="module")
def fixture_model(synthetic_corpus):
    return train_baseline(synthetic_corpus, FIXTURE_HYPERPARAMETERS, seed=1)


@pytest.mark.parametrize("text, label", LEXICON_EXAMPLES)
def test_rule_classifier_reproduces_lexicon_examples(seed_lexicon, text, label):
    prediction = rule_classify(seed_lexicon, clean_text(text))

    assert prediction.label is label


def test_rule_prediction_without_match(seed_lexicon):
    prediction = rule_classify(seed_lexicon, "the weather is nice today")

    assert prediction.label is CueLabel.NONE
    assert prediction.matched_entry is None
    assert prediction.probabilities == (0.0, 0.0, 1.0)


def test_rule_prediction_names_the_entry(seed_lexicon):
    prediction = rule_classify(seed_lexicon, "look better")

    assert prediction.matched_entry == "N03"
    assert prediction.probabilities == (0.0, 0.0, 1.0)


def test_rule_label_ignores_entry_order(seed_entries, seed_lexicon):
    shuffled = list(seed_entries)
    random.Random(8).shuffle(shuffled)
    reordered = compile_lexicon(shuffled)

    for text, _ in LEXICON_EXAMPLES:
        cleaned = clean_text(text)
        assert rule_classify(reordered, cleaned) == rule_classify(seed_lexicon, cleaned)


def test_rule_none_exactly_when_no_cue_match(seed_lexicon, synthetic_corpus):
    rng = random.Random(4)
    words = sorted({t for e in synthetic_corpus.examples for t in tokenize(e.text)})
    texts = [e.text for e in synthetic_corpus.examples] + [
        " ".join(rng.choices(words, k=rng.randint(1, 8))) for _ in range(300)
    ]

    for text in texts:
        matches = match_utterance(seed_lexicon, text)
        expected = not matches or matches[0].label is CueLabel.NONE

        assert (rule_classify(seed_lexicon, text).label is CueLabel.NONE) == expected


def test_build_vocab_threshold():
    corpus = corpus_of(
        *[("you plan", CueLabel.GUIDED)] * 3, *[("you", CueLabel.DIRECTED)] * 7
    )

    vocab = build_vocab(corpus, min_frequency=5)

    assert "you" in vocab
    assert vocab.id_of("you") == 2
    assert vocab.id_of("plan") == UNKNOWN_ID
    assert len(vocab) == 3


def test_build_vocab_orders_by_frequency_then_token(synthetic_corpus):
    vocab = build_vocab(synthetic_corpus)

    counts = {}
    for e in synthetic_corpus.examples:
        for token in tokenize(e.text):
            counts[token] = counts.get(token, 0) + 1

    assert set(vocab.tokens) == set(counts)
    assert list(vocab.tokens) == sorted(counts, key=lambda t: (-counts[t], t))
    assert build_vocab(synthetic_corpus) == vocab


def test_build_vocab_rejects_empty_corpus():
    with pytest.raises(InvalidInput):
        build_vocab(Corpus())


def test_encode_pads_and_truncates():
    vocab = build_vocab(corpus_of(("a b c", CueLabel.GUIDED)))

    short = encode(["a", "b", "c"], vocab)
    assert len(short.ids) == 64
    assert short.true_length == 3
    assert all(value == PAD_ID for value in short.ids[3:])
    assert short.window == tuple(vocab.id_of(t) for t in ["a", "b", "c"])

    long = encode(["a"] * 271, vocab)
    assert len(long.ids) == 64
    assert long.true_length == 64

    empty = encode([], vocab)
    assert empty.ids == (PAD_ID,) * 64
    assert empty.true_length == 0


def test_encode_rejects_zero_length():
    vocab = build_vocab(corpus_of(("a", CueLabel.GUIDED)))

    with pytest.raises(InvalidInput):
        encode(["a"], vocab, max_sequence_length=0)


def test_training_loss_decreases(synthetic_corpus):
    model = train_baseline(synthetic_corpus, Hyperparameters(), seed=13)

    assert len(model.loss_history) == 4
    assert model.loss_history[-1] <= model.loss_history[0]


def test_training_requires_every_label():
    corpus = corpus_of(("what now", CueLabel.GUIDED), ("nice day", CueLabel.NONE))

    with pytest.raises(InsufficientLabels):
        train_baseline(corpus)


def test_training_is_deterministic(synthetic_corpus):
    first = train_baseline(synthetic_corpus, Hyperparameters(), seed=21)
    second = train_baseline(synthetic_corpus, Hyperparameters(), seed=21)

    assert np.array_equal(first.weights, second.weights)
    assert np.array_equal(first.bias, second.bias)
    assert first.loss_history == second.loss_history


def test_separable_toy_set_converges():
    corpus = corpus_of(
        ("open question", CueLabel.GUIDED),
        ("open plan", CueLabel.GUIDED),
        ("do this", CueLabel.DIRECTED),
        ("nice weather", CueLabel.NONE),
    )

    model = train_baseline(corpus, TOY_HYPERPARAMETERS, seed=0)

    assert model.loss_history[-1] < 0.05


def test_predict_after_training(fixture_model):
    prediction = predict(fixture_model, "What do you think went well?")

    assert prediction.label is CueLabel.GUIDED
    assert abs(sum(prediction.probabilities) - 1.0) <= 1e-9


def test_predict_probabilities_are_normalised(fixture_model, synthetic_corpus):
    for e in synthetic_corpus.examples[:40]:
        prediction = predict(fixture_model, e.text)
        probabilities = np.array(prediction.probabilities)

        assert np.all(np.isfinite(probabilities)) and np.all(probabilities >= 0)
        assert abs(probabilities.sum() - 1.0) <= 1e-9
        assert LABEL_ORDER[int(np.argmax(probabilities))] is prediction.label


def test_predict_rejects_empty_text(fixture_model):
    with pytest.raises(InvalidInput):
        predict(fixture_model, "")
    with pytest.raises(InvalidInput):
        predict(fixture_model, " ?! ")


def test_softmax_is_shift_invariant():
    rng = np.random.default_rng(3)

    for _ in range(100):
        scores = rng.normal(size=3) * 5
        shifted = scores + rng.normal() * 100

        assert np.argmax(softmax(scores)) == np.argmax(softmax(shifted))
        assert np.allclose(softmax(scores), softmax(shifted))


def test_gradient_check_on_random_models(synthetic_corpus):
    examples = synthetic_corpus.examples

    for seed in range(10):
        model = initialize_model(synthetic_corpus, seed=seed)
        for offset in range(10):
            chosen = examples[(seed * 10 + offset) * 7 % len(examples)]

            assert gradient_check(model, chosen) < 1e-4


def test_gradient_check_with_half_the_step(synthetic_corpus):
    model = initialize_model(synthetic_corpus, seed=4)

    for chosen in synthetic_corpus.examples[:10]:
        full = gradient_check(model, chosen, epsilon=1e-5)
        halved = gradient_check(model, chosen, epsilon=5e-6)

        assert halved <= 4 * full + 1e-8


def test_unknown_tokens_only_touch_the_unknown_column(synthetic_corpus):
    model = initialize_model(synthetic_corpus, seed=2)
    unseen = example("u", "zzyzx qwxyz", CueLabel.GUIDED)
    features = model.feature_vector(model.encode(unseen.text))[np.newaxis, :]

    _, grad_weights, grad_bias = loss_and_gradients(
        model.weights, model.bias, features, np.array([0]), l2_penalty=0.0
    )

    assert list(np.flatnonzero(np.any(grad_weights != 0, axis=0))) == [UNKNOWN_ID]
    assert np.all(grad_bias != 0)


def test_model_file_round_trip(fixture_model, synthetic_corpus):
    restored = load_model(save_model(fixture_model))

    assert np.array_equal(restored.weights, fixture_model.weights)
    assert np.array_equal(restored.bias, fixture_model.bias)
    assert restored.vocabulary == fixture_model.vocabulary
    assert restored.loss_history == fixture_model.loss_history
    for e in synthetic_corpus.examples:
        assert predict(restored, e.text) == predict(fixture_model, e.text)


def test_model_file_rejects_other_documents(fixture_model):
    with pytest.raises(FormatError):
        load_model("not json")

    future = save_model(fixture_model).replace(
        '"format_version": 1', '"format_version": 9'
    )
    with pytest.raises(FormatError):
        load_model(future)


def test_rule_classifier_on_noise_free_synthetic_data(seed_entries, seed_lexicon):
    counts = {label: 200 for label in LABEL_ORDER}
    clean = generate_synthetic(seed_entries, counts, noise_rate=0.0, seed=13)

    predictions = classify_corpus(RuleClassifier(seed_lexicon), clean)
    matrix = confusion(
        clean.labels(), [predictions[e.example_id] for e in clean.examples]
    )

    assert matrix.total == 600
    assert averaged_f1(matrix, AverageMode.MACRO) >= 0.95


def test_baseline_learns_noisy_synthetic_data(seed_entries):
    counts = {label: 200 for label in LABEL_ORDER}
    noisy = generate_synthetic(seed_entries, counts, noise_rate=0.1, seed=13)
    train, held_out = split_examples(noisy, 0.7, seed=13)

    model = train_baseline(
        train,
        Hyperparameters(epochs=60, batch_size=32, learning_rate=0.2),
        seed=13,
    )
    predictions = classify_corpus(BaselineClassifier(model), held_out)
    gold = held_out.labels()
    score = averaged_f1(
        confusion(gold, [predictions[e.example_id] for e in held_out.examples])
    )

    train_counts = train.label_counts()
    majority = max(LABEL_ORDER, key=lambda label: train_counts[label])
    majority_score = averaged_f1(confusion(gold, [majority] * len(gold)))

    assert score >= 0.70
    assert score > majority_score
