"""
Classifiers for therapist utterances.

The rule classifier labels an utterance with the label of its best lexicon match. The
baseline is a linear softmax model over token uni-grams and bi-grams inside the
encoded window, trained by mini-batch gradient descent on the L2-penalised mean
cross-entropy. Both see text in cleaned form.
"""

import json
import logging
from collections import Counter
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from .corpus import Corpus, GoldExample
from .exceptions import FormatError, InsufficientLabels, InvalidInput
from .labels import LABEL_ORDER, CueLabel
from .lexicon import CompiledLexicon, match_utterance
from .text import clean_text, tokenize
from .utils import digest

logger = logging.getLogger(__name__)

PAD_ID = 0
UNKNOWN_ID = 1
RESERVED_IDS = 2
MAX_SEQUENCE_LENGTH = 64

MODEL_FORMAT = "cuefidelity-baseline"
MODEL_FORMAT_VERSION = 1


class Vocabulary(BaseModel):
    """
    Token ids: 0 is padding, 1 is the shared unknown id, tokens[i] has id i + 2.
    """

    model_config = ConfigDict(frozen=True)

    tokens: Tuple[str, ...]
    min_frequency: int = 1

    _ids: Dict[str, int] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def check_tokens(self) -> "Vocabulary":
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")
        if any(not token for token in self.tokens):
            raise ValueError("vocabulary tokens must not be empty")
        return self

    def model_post_init(self, __context) -> None:
        self._ids = {
            token: position + RESERVED_IDS for position, token in enumerate(self.tokens)
        }

    def __len__(self) -> int:
        return len(self.tokens) + RESERVED_IDS

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def id_of(self, token: str) -> int:
        return self._ids.get(token, UNKNOWN_ID)


class EncodedSequence(BaseModel):
    model_config = ConfigDict(frozen=True)

    ids: Tuple[int, ...]
    true_length: int = Field(ge=0)

    @model_validator(mode="after")
    def check_padding(self) -> "EncodedSequence":
        if self.true_length > len(self.ids):
            raise ValueError("true_length exceeds the sequence length")
        if any(value == PAD_ID for value in self.ids[: self.true_length]):
            raise ValueError("padding inside the content window")
        if any(value != PAD_ID for value in self.ids[self.true_length :]):
            raise ValueError("positions past true_length must be padding")
        return self

    @property
    def window(self) -> Tuple[int, ...]:
        return self.ids[: self.true_length]


class Hyperparameters(BaseModel):
    model_config = ConfigDict(frozen=True)

    epochs: int = Field(default=4, ge=1)
    batch_size: int = Field(default=64, ge=1)
    learning_rate: float = Field(default=0.1, gt=0)
    l2_penalty: float = Field(default=1e-4, ge=0)
    max_sequence_length: int = Field(default=MAX_SEQUENCE_LENGTH, ge=1)
    min_frequency: int = Field(default=1, ge=1)


class Prediction(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: CueLabel
    probabilities: Tuple[float, float, float]
    matched_entry: Optional[str] = None

    @model_validator(mode="after")
    def check_probabilities(self) -> "Prediction":
        values = np.asarray(self.probabilities)
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(values.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")
        if LABEL_ORDER[int(np.argmax(values))] is not self.label:
            raise ValueError("label must be the argmax of the probabilities")
        return self


def one_hot(label: CueLabel) -> Tuple[float, float, float]:
    return tuple(1.0 if candidate is label else 0.0 for candidate in LABEL_ORDER)


def rule_classify(lexicon: CompiledLexicon, text: str) -> Prediction:
    matches = match_utterance(lexicon, text)
    if not matches:
        return Prediction(label=CueLabel.NONE, probabilities=one_hot(CueLabel.NONE))

    top = matches[0]
    return Prediction(
        label=top.label, probabilities=one_hot(top.label), matched_entry=top.entry_id
    )


def build_vocab(corpus: Corpus, min_frequency: int = 1) -> Vocabulary:
    """
    Tokens seen at least min_frequency times, by descending frequency, then
    alphabetically.
    """

    if not corpus.examples:
        raise InvalidInput("Cannot build a vocabulary from an empty corpus")
    if min_frequency < 1:
        raise InvalidInput("min_frequency must be at least 1")

    frequencies = Counter(
        token for example in corpus.examples for token in tokenize(example.text)
    )
    kept = sorted(
        (token for token, count in frequencies.items() if count >= min_frequency),
        key=lambda token: (-frequencies[token], token),
    )
    return Vocabulary(tokens=tuple(kept), min_frequency=min_frequency)


def encode(
    tokens: Sequence[str],
    vocab: Vocabulary,
    max_sequence_length: int = MAX_SEQUENCE_LENGTH,
) -> EncodedSequence:
    if max_sequence_length < 1:
        raise InvalidInput("max_sequence_length must be at least 1")

    window = [vocab.id_of(token) for token in tokens[:max_sequence_length]]
    padding = [PAD_ID] * (max_sequence_length - len(window))
    return EncodedSequence(ids=tuple(window + padding), true_length=len(window))


def bigrams_of(sequence: EncodedSequence) -> List[Tuple[int, int]]:
    window = sequence.window
    return list(zip(window, window[1:]))


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores, axis=-1, keepdims=True)
    exponentials = np.exp(shifted)
    return exponentials / np.sum(exponentials, axis=-1, keepdims=True)


def log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def regularized_loss(
    weights: np.ndarray,
    bias: np.ndarray,
    features: np.ndarray,
    targets: np.ndarray,
    l2_penalty: float,
) -> float:
    log_probabilities = log_softmax(features @ weights.T + bias)
    data_loss = -np.mean(log_probabilities[np.arange(len(targets)), targets])
    return float(data_loss + 0.5 * l2_penalty * np.sum(weights * weights))


def loss_and_gradients(
    weights: np.ndarray,
    bias: np.ndarray,
    features: np.ndarray,
    targets: np.ndarray,
    l2_penalty: float,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Mean cross-entropy plus (l2_penalty / 2) * ||W||^2, and its gradients in W and b.
    """

    scores = features @ weights.T + bias
    log_probabilities = log_softmax(scores)
    rows = np.arange(len(targets))

    loss = -np.mean(log_probabilities[rows, targets]) + 0.5 * l2_penalty * np.sum(
        weights * weights
    )

    residual = np.exp(log_probabilities)
    residual[rows, targets] -= 1.0
    residual /= len(targets)

    grad_weights = residual.T @ features + l2_penalty * weights
    grad_bias = residual.sum(axis=0)
    return float(loss), grad_weights, grad_bias


class BaselineModel:
    """
    A trained (or randomly initialised) bag-of-n-grams softmax model.

    Feature columns: one per vocabulary id, then one per training bi-gram of ids.
    """

    def __init__(
        self,
        vocabulary: Vocabulary,
        bigrams: Sequence[Tuple[int, int]],
        weights: np.ndarray,
        bias: np.ndarray,
        hyperparameters: Hyperparameters,
        seed: int,
        loss_history: Sequence[float] = (),
    ):
        self.vocabulary = vocabulary
        self.bigrams: Tuple[Tuple[int, int], ...] = tuple(tuple(b) for b in bigrams)
        self.hyperparameters = hyperparameters
        self.seed = seed
        self.loss_history: Tuple[float, ...] = tuple(loss_history)
        self._bigram_columns = {
            bigram: len(vocabulary) + position
            for position, bigram in enumerate(self.bigrams)
        }

        self.weights = np.array(weights, dtype=np.float64)
        self.bias = np.array(bias, dtype=np.float64)
        if self.weights.shape != (len(LABEL_ORDER), self.n_features):
            raise InvalidInput(
                f"Weight matrix has shape {self.weights.shape}, expected "
                f"{(len(LABEL_ORDER), self.n_features)}"
            )
        if self.bias.shape != (len(LABEL_ORDER),):
            raise InvalidInput(f"Bias has shape {self.bias.shape}, expected (3,)")
        self.weights.flags.writeable = False
        self.bias.flags.writeable = False

    @property
    def n_features(self) -> int:
        return len(self.vocabulary) + len(self.bigrams)

    def encode(self, text: str) -> EncodedSequence:
        return encode(
            tokenize(text), self.vocabulary, self.hyperparameters.max_sequence_length
        )

    def feature_vector(self, sequence: EncodedSequence) -> np.ndarray:
        vector = np.zeros(self.n_features, dtype=np.float64)
        for token_id in sequence.window:
            vector[token_id] += 1.0
        for bigram in bigrams_of(sequence):
            column = self._bigram_columns.get(bigram)
            if column is not None:
                vector[column] += 1.0
        return vector

    def feature_matrix(self, texts: Sequence[str]) -> np.ndarray:
        matrix = np.zeros((len(texts), self.n_features), dtype=np.float64)
        for row, text in enumerate(texts):
            matrix[row] = self.feature_vector(self.encode(text))
        return matrix

    def scores(self, features: np.ndarray) -> np.ndarray:
        return features @ self.weights.T + self.bias


def _feature_space(
    corpus: Corpus, hyperparameters: Hyperparameters
) -> Tuple[Vocabulary, List[Tuple[int, int]]]:
    vocabulary = build_vocab(corpus, hyperparameters.min_frequency)
    bigrams = set()
    for example in corpus.examples:
        sequence = encode(
            tokenize(example.text), vocabulary, hyperparameters.max_sequence_length
        )
        bigrams.update(bigrams_of(sequence))
    return vocabulary, sorted(bigrams)


def initialize_model(
    corpus: Corpus,
    hyperparameters: Hyperparameters = Hyperparameters(),
    seed: int = 0,
    scale: float = 0.1,
) -> BaselineModel:
    """
    A model over the corpus' feature space with Gaussian random weights.
    """

    vocabulary, bigrams = _feature_space(corpus, hyperparameters)
    rng = np.random.default_rng(seed)
    n_features = len(vocabulary) + len(bigrams)
    return BaselineModel(
        vocabulary,
        bigrams,
        rng.normal(0.0, scale, size=(len(LABEL_ORDER), n_features)),
        rng.normal(0.0, scale, size=len(LABEL_ORDER)),
        hyperparameters,
        seed,
    )


def _targets(examples: Sequence[GoldExample]) -> np.ndarray:
    return np.array(
        [LABEL_ORDER.index(example.label) for example in examples], dtype=np.int64
    )


def train_baseline(
    train: Corpus,
    hyperparameters: Hyperparameters = Hyperparameters(),
    seed: int = 0,
) -> BaselineModel:
    counts = train.label_counts()
    missing = [label.value for label in LABEL_ORDER if counts[label] == 0]
    if missing:
        raise InsufficientLabels(
            f"Training data has no {', '.join(missing)} examples; "
            "all three labels are required"
        )

    vocabulary, bigrams = _feature_space(train, hyperparameters)
    n_features = len(vocabulary) + len(bigrams)
    space = BaselineModel(
        vocabulary,
        bigrams,
        np.zeros((len(LABEL_ORDER), n_features)),
        np.zeros(len(LABEL_ORDER)),
        hyperparameters,
        seed,
    )

    features = space.feature_matrix([example.text for example in train.examples])
    targets = _targets(train.examples)

    weights = np.zeros((len(LABEL_ORDER), n_features), dtype=np.float64)
    bias = np.zeros(len(LABEL_ORDER), dtype=np.float64)
    rng = np.random.default_rng(seed)
    history: List[float] = []
    size = len(targets)

    logger.info(
        "Training baseline on %d examples, %d features (%d ids, %d bi-grams)",
        size,
        n_features,
        len(vocabulary),
        len(bigrams),
    )

    for epoch in range(hyperparameters.epochs):
        order = rng.permutation(size)
        total = 0.0

        for start in range(0, size, hyperparameters.batch_size):
            batch = order[start : start + hyperparameters.batch_size]
            loss, grad_weights, grad_bias = loss_and_gradients(
                weights,
                bias,
                features[batch],
                targets[batch],
                hyperparameters.l2_penalty,
            )
            total += loss * len(batch)
            weights -= hyperparameters.learning_rate * grad_weights
            bias -= hyperparameters.learning_rate * grad_bias

        history.append(total / size)
        logger.info(
            "Epoch %d/%d mean training loss %.4f",
            epoch + 1,
            hyperparameters.epochs,
            history[-1],
        )

    return BaselineModel(
        vocabulary, bigrams, weights, bias, hyperparameters, seed, loss_history=history
    )


def predict(model: BaselineModel, text: str) -> Prediction:
    cleaned = clean_text(text)
    if not cleaned:
        raise InvalidInput("Cannot classify text that is empty after cleaning")

    probabilities = softmax(model.scores(model.feature_vector(model.encode(cleaned))))
    # np.argmax keeps the first maximum, so ties follow GUIDED < DIRECTED < NONE.
    label = LABEL_ORDER[int(np.argmax(probabilities))]
    return Prediction(label=label, probabilities=tuple(float(p) for p in probabilities))


def _relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-12)


def gradient_check(
    model: BaselineModel, example: GoldExample, epsilon: float = 1e-5
) -> float:
    """
    Largest relative error between the analytic gradient of the regularised loss on one
    example and central finite differences, over the bias and every weight whose
    feature occurs in the example.
    """

    features = model.feature_vector(model.encode(example.text))[np.newaxis, :]
    targets = _targets([example])
    l2_penalty = model.hyperparameters.l2_penalty

    weights = model.weights.copy()
    bias = model.bias.copy()
    _, grad_weights, grad_bias = loss_and_gradients(
        weights, bias, features, targets, l2_penalty
    )

    def numeric(parameter: np.ndarray, position: Tuple[int, ...]) -> float:
        original = parameter[position]
        parameter[position] = original + epsilon
        plus = regularized_loss(weights, bias, features, targets, l2_penalty)
        parameter[position] = original - epsilon
        minus = regularized_loss(weights, bias, features, targets, l2_penalty)
        parameter[position] = original
        return (plus - minus) / (2 * epsilon)

    worst = 0.0
    for column in np.flatnonzero(features[0]):
        for row in range(len(LABEL_ORDER)):
            worst = max(
                worst,
                _relative_error(
                    grad_weights[row, column], numeric(weights, (row, column))
                ),
            )
    for row in range(len(LABEL_ORDER)):
        worst = max(worst, _relative_error(grad_bias[row], numeric(bias, (row,))))

    return worst


class ModelFile(BaseModel):
    """
    On-disk container of a baseline model. Floats are written with their shortest
    round-tripping repr, so save and load reproduce the weights bit for bit.
    """

    format: str = MODEL_FORMAT
    format_version: int = MODEL_FORMAT_VERSION
    seed: int
    hyperparameters: Hyperparameters
    vocabulary: Vocabulary
    bigrams: List[Tuple[int, int]]
    weights: List[List[float]]
    bias: List[float]
    loss_history: List[float]


def save_model(model: BaselineModel) -> str:
    container = ModelFile(
        seed=model.seed,
        hyperparameters=model.hyperparameters,
        vocabulary=model.vocabulary,
        bigrams=list(model.bigrams),
        weights=model.weights.tolist(),
        bias=model.bias.tolist(),
        loss_history=list(model.loss_history),
    )
    return json.dumps(container.model_dump(mode="python"), indent=1) + "\n"


def load_model(document: str) -> BaselineModel:
    try:
        container = ModelFile.model_validate(json.loads(document))
    except (ValueError, TypeError) as error:
        raise FormatError(f"Not a valid model file: {error}")

    if container.format != MODEL_FORMAT:
        raise FormatError(f"Unknown model format '{container.format}'", field="format")
    if container.format_version != MODEL_FORMAT_VERSION:
        raise FormatError(
            f"Unsupported model format version {container.format_version}",
            field="format_version",
        )

    return BaselineModel(
        container.vocabulary,
        container.bigrams,
        np.array(container.weights, dtype=np.float64),
        np.array(container.bias, dtype=np.float64),
        container.hyperparameters,
        container.seed,
        loss_history=container.loss_history,
    )


class Classifier(Protocol):
    classifier_id: str
    version: str

    def classify(self, text: str) -> Prediction: ...


class RuleClassifier:
    def __init__(self, lexicon: CompiledLexicon):
        self.lexicon = lexicon
        self.classifier_id = "rule"
        self.version = lexicon.version_hash

    def classify(self, text: str) -> Prediction:
        return rule_classify(self.lexicon, text)


class BaselineClassifier:
    def __init__(self, model: BaselineModel):
        self.model = model
        self.classifier_id = "baseline"
        self.version = digest(save_model(model))

    def classify(self, text: str) -> Prediction:
        if not clean_text(text):
            return Prediction(label=CueLabel.NONE, probabilities=one_hot(CueLabel.NONE))
        return predict(self.model, text)


def classify_corpus(classifier: Classifier, corpus: Corpus) -> Dict[str, CueLabel]:
    return {
        example.example_id: classifier.classify(example.text).label
        for example in corpus.examples
    }
