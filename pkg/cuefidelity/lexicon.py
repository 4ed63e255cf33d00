"""
The fidelity-assessment lexicon: a small token-level pattern grammar and its
compiled matcher.

A lexicon file holds one rule per line::

    entry_id<TAB>priority<TAB>anchor<TAB>pattern<TAB>LABEL[<TAB>note]

where anchor is "^" (must match at the start of the utterance) or "-", and pattern is a
sequence of cleaned tokens separated by single spaces. "(a|b c)" is an alternation over
token sequences, a trailing "?" makes the preceding token or group optional, and groups
do not nest.
"""

import logging
from importlib import resources
from itertools import product
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, model_validator

from .exceptions import DuplicateRule, InvalidInput, LexiconSyntaxError
from .labels import CueLabel
from .text import clean_text, tokenize
from .utils import digest, read_text

logger = logging.getLogger(__name__)

ANCHOR_FLAGS: Dict[str, bool] = {"^": True, "-": False}

_RESERVED = set("()|?")

TokenSequence = Tuple[str, ...]


class PatternAtom(BaseModel):
    """
    A literal token or an alternation group, either of which may be optional.
    """

    model_config = ConfigDict(frozen=True)

    alternatives: Tuple[TokenSequence, ...]
    optional: bool = False
    grouped: bool = False

    @model_validator(mode="after")
    def check_alternatives(self) -> "PatternAtom":
        if not self.alternatives:
            raise ValueError("alternation groups must not be empty")
        for alternative in self.alternatives:
            if not alternative or any(not token for token in alternative):
                raise ValueError("alternatives must contain at least one token")
        if not self.grouped and (
            len(self.alternatives) != 1 or len(self.alternatives[0]) != 1
        ):
            raise ValueError("a literal atom holds exactly one token")
        return self

    def sequences(self) -> Tuple[TokenSequence, ...]:
        if self.optional:
            return self.alternatives + ((),)
        return self.alternatives

    def render(self) -> str:
        suffix = "?" if self.optional else ""
        if not self.grouped:
            return self.alternatives[0][0] + suffix

        body = "|".join(" ".join(alternative) for alternative in self.alternatives)
        return f"({body}){suffix}"


class PatternTree(BaseModel):
    model_config = ConfigDict(frozen=True)

    atoms: Tuple[PatternAtom, ...]

    @model_validator(mode="after")
    def check_required_atom(self) -> "PatternTree":
        if not any(not atom.optional for atom in self.atoms):
            raise ValueError("a pattern needs at least one required token")
        return self

    def expand(self) -> Tuple[TokenSequence, ...]:
        """
        All token sequences the pattern accepts, sorted and without duplicates.
        """

        expanded = set()
        for parts in product(*(atom.sequences() for atom in self.atoms)):
            sequence = tuple(token for part in parts for token in part)
            if sequence:
                expanded.add(sequence)

        return tuple(sorted(expanded))

    def render(self) -> str:
        return " ".join(atom.render() for atom in self.atoms)


class LexiconEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    entry_id: str
    priority: int
    anchored: bool
    pattern: PatternTree
    label: CueLabel
    source_note: Optional[str] = None

    @model_validator(mode="after")
    def check_entry_id(self) -> "LexiconEntry":
        if not self.entry_id or any(char.isspace() for char in self.entry_id):
            raise ValueError("entry_id must be a non-empty string without whitespace")
        return self

    def render(self) -> str:
        fields = [
            self.entry_id,
            str(self.priority),
            "^" if self.anchored else "-",
            self.pattern.render(),
            self.label.value,
        ]
        if self.source_note:
            fields.append(self.source_note)
        return "\t".join(fields)


class Match(BaseModel):
    model_config = ConfigDict(frozen=True)

    entry_id: str
    label: CueLabel
    token_span: Tuple[int, int]
    priority: int
    span_length: int

    @model_validator(mode="after")
    def check_span(self) -> "Match":
        start, end = self.token_span
        if start < 0 or end <= start:
            raise ValueError("a match spans at least one token")
        if self.span_length != end - start:
            raise ValueError("span_length must equal end - start")
        return self

    @property
    def start(self) -> int:
        return self.token_span[0]

    @property
    def end(self) -> int:
        return self.token_span[1]

    def sort_key(self) -> Tuple[int, int, int, str]:
        return (-self.priority, -self.span_length, self.start, self.entry_id)


def _check_token(token: str, line: Optional[int]) -> None:
    if not token:
        raise LexiconSyntaxError(
            "Empty token; tokens are separated by single spaces",
            line=line,
            field="pattern",
        )
    if _RESERVED.intersection(token):
        raise LexiconSyntaxError(
            f"Unexpected grammar character in token '{token}'",
            line=line,
            field="pattern",
        )
    if clean_text(token) != token:
        raise LexiconSyntaxError(
            f"Token '{token}' is not in cleaned form (expected '{clean_text(token)}')",
            line=line,
            field="pattern",
        )


def parse_pattern(source: str, line: Optional[int] = None) -> PatternTree:
    if not source.strip():
        raise LexiconSyntaxError("Empty pattern", line=line, field="pattern")

    atoms: List[PatternAtom] = []
    position = 0
    length = len(source)

    while position < length:
        char = source[position]

        if char == " ":
            raise LexiconSyntaxError(
                "Tokens must be separated by single spaces", line=line, field="pattern"
            )

        if char == "(":
            close = source.find(")", position)
            if close == -1:
                raise LexiconSyntaxError(
                    "Unbalanced alternation group: missing ')'",
                    line=line,
                    field="pattern",
                )
            body = source[position + 1 : close]
            if "(" in body:
                raise LexiconSyntaxError(
                    "Alternation groups cannot be nested", line=line, field="pattern"
                )

            alternatives = []
            for option in body.split("|"):
                tokens = option.split(" ")
                if not option:
                    raise LexiconSyntaxError(
                        "Empty alternative in group", line=line, field="pattern"
                    )
                for token in tokens:
                    _check_token(token, line)
                alternatives.append(tuple(tokens))

            position = close + 1
            optional = position < length and source[position] == "?"
            if optional:
                position += 1

            atoms.append(
                PatternAtom(
                    alternatives=tuple(alternatives), optional=optional, grouped=True
                )
            )
        elif char in ")|?":
            raise LexiconSyntaxError(
                f"Unexpected '{char}' outside an alternation group",
                line=line,
                field="pattern",
            )
        else:
            end = source.find(" ", position)
            if end == -1:
                end = length

            word = source[position:end]
            optional = word.endswith("?")
            if optional:
                word = word[:-1]

            _check_token(word, line)
            atoms.append(PatternAtom(alternatives=((word,),), optional=optional))
            position = end

        if position < length:
            if source[position] != " ":
                raise LexiconSyntaxError(
                    f"Expected a space after '{source[:position]}'",
                    line=line,
                    field="pattern",
                )
            position += 1
            if position == length:
                raise LexiconSyntaxError(
                    "Trailing space in pattern", line=line, field="pattern"
                )

    if all(atom.optional for atom in atoms):
        raise LexiconSyntaxError(
            "A pattern needs at least one required token", line=line, field="pattern"
        )

    return PatternTree(atoms=tuple(atoms))


def parse_lexicon(source: str) -> List[LexiconEntry]:
    entries: List[LexiconEntry] = []
    seen: Dict[str, int] = {}

    for number, line in enumerate(source.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue

        fields = [field.strip() for field in line.split("\t")]
        if len(fields) not in (5, 6):
            raise LexiconSyntaxError(
                "Expected 5 tab-separated fields (entry_id, priority, anchor, pattern, "
                f"LABEL) and an optional note, found {len(fields)}",
                line=number,
            )

        entry_id, priority, anchor, pattern, label = fields[:5]
        note = fields[5] if len(fields) == 6 and fields[5] else None

        if not entry_id or any(char.isspace() for char in entry_id):
            raise LexiconSyntaxError(
                f"Invalid entry_id '{entry_id}'", line=number, field="entry_id"
            )
        if entry_id in seen:
            raise LexiconSyntaxError(
                f"Duplicate entry_id '{entry_id}' "
                f"(first defined on line {seen[entry_id]})",
                line=number,
                field="entry_id",
            )

        try:
            priority_value = int(priority)
        except ValueError:
            raise LexiconSyntaxError(
                f"Priority '{priority}' is not an integer",
                line=number,
                field="priority",
            )

        if anchor not in ANCHOR_FLAGS:
            raise LexiconSyntaxError(
                f"Anchor flag must be '^' or '-', found '{anchor}'",
                line=number,
                field="anchor",
            )

        tree = parse_pattern(pattern, line=number)

        try:
            cue_label = CueLabel.parse(label)
        except InvalidInput as error:
            raise LexiconSyntaxError(error.message, line=number, field="label")

        seen[entry_id] = number
        entries.append(
            LexiconEntry(
                entry_id=entry_id,
                priority=priority_value,
                anchored=ANCHOR_FLAGS[anchor],
                pattern=tree,
                label=cue_label,
                source_note=note,
            )
        )

    return entries


def render_lexicon(entries: Sequence[LexiconEntry]) -> str:
    lines = ["# entry_id\tpriority\tanchor\tpattern\tLABEL\tnote"]
    lines.extend(entry.render() for entry in entries)
    return "\n".join(lines) + "\n"


class TokenTrie:
    """
    Token trie with integer node ids; each node lists the entries accepting at it.
    """

    __slots__ = ("_children", "_accepting")

    def __init__(self):
        self._children: List[Dict[str, int]] = [dict()]
        self._accepting: List[List[int]] = [[]]

    @property
    def root(self) -> int:
        return 0

    def insert(self, tokens: Sequence[str], value: int) -> None:
        node = self.root
        for token in tokens:
            following = self._children[node].get(token)
            if following is None:
                following = len(self._children)
                self._children[node][token] = following
                self._children.append(dict())
                self._accepting.append([])
            node = following

        if value not in self._accepting[node]:
            self._accepting[node].append(value)

    def step(self, node: int, token: str) -> int:
        return self._children[node].get(token, -1)

    def accepting(self, node: int) -> List[int]:
        return self._accepting[node]

    def accepts(self, tokens: Sequence[str]) -> List[int]:
        node = self.root
        for token in tokens:
            node = self.step(node, token)
            if node < 0:
                return []
        return self.accepting(node)

    def __len__(self) -> int:
        return len(self._children)


class CompiledLexicon:
    """
    Immutable matcher over cleaned tokens. Safe to share between threads.
    """

    __slots__ = ("entries", "version_hash", "_anchored", "_floating")

    def __init__(
        self,
        entries: Tuple[LexiconEntry, ...],
        version_hash: str,
        anchored: TokenTrie,
        floating: TokenTrie,
    ):
        self.entries = entries
        self.version_hash = version_hash
        self._anchored = anchored
        self._floating = floating

    def accepts(self, tokens: Sequence[str]) -> List[str]:
        """
        Ids of the entries whose pattern generates exactly this token sequence.
        """

        indices = self._anchored.accepts(tokens) + self._floating.accepts(tokens)
        return sorted(self.entries[index].entry_id for index in indices)

    def match(self, tokens: Sequence[str]) -> List[Match]:
        matches: List[Match] = []

        for start in range(len(tokens)):
            if start == 0:
                tries = (self._anchored, self._floating)
            else:
                tries = (self._floating,)

            for trie in tries:
                node = trie.root
                for end in range(start, len(tokens)):
                    node = trie.step(node, tokens[end])
                    if node < 0:
                        break

                    for index in trie.accepting(node):
                        entry = self.entries[index]
                        matches.append(
                            Match(
                                entry_id=entry.entry_id,
                                label=entry.label,
                                token_span=(start, end + 1),
                                priority=entry.priority,
                                span_length=end + 1 - start,
                            )
                        )

        matches.sort(key=Match.sort_key)
        return matches


def compile_lexicon(entries: Sequence[LexiconEntry]) -> CompiledLexicon:
    rules: Dict[Tuple[bool, Tuple[TokenSequence, ...], CueLabel, int], str] = {}
    identifiers = set()
    anchored = TokenTrie()
    floating = TokenTrie()

    for index, entry in enumerate(entries):
        if entry.entry_id in identifiers:
            raise InvalidInput(f"Duplicate entry_id '{entry.entry_id}'")
        identifiers.add(entry.entry_id)

        sequences = entry.pattern.expand()
        rule = (entry.anchored, sequences, entry.label, entry.priority)
        if rule in rules:
            raise DuplicateRule(
                f"Entries '{rules[rule]}' and '{entry.entry_id}' share pattern "
                f"'{entry.pattern.render()}', label {entry.label.value} "
                f"and priority {entry.priority}"
            )
        rules[rule] = entry.entry_id

        trie = anchored if entry.anchored else floating
        for sequence in sequences:
            trie.insert(sequence, index)

    canonical = render_lexicon(sorted(entries, key=lambda entry: entry.entry_id))
    lexicon = CompiledLexicon(tuple(entries), digest(canonical), anchored, floating)

    logger.debug(
        "Compiled %d lexicon entries into %d trie nodes (version %s)",
        len(entries),
        len(anchored) + len(floating),
        lexicon.version_hash[:12],
    )

    return lexicon


def match_utterance(lexicon: CompiledLexicon, text: str) -> List[Match]:
    return lexicon.match(tokenize(clean_text(text)))


def load_seed_lexicon() -> str:
    seed = resources.files("cuefidelity") / "data" / "seed_lexicon.tsv"
    return seed.read_text(encoding="utf-8")


def load_lexicon(path: Optional[Union[str, Path]] = None) -> CompiledLexicon:
    """
    Parses and compiles the lexicon at path, or the shipped seed lexicon when path
    is None.
    """

    source = read_text(path) if path else load_seed_lexicon()
    return compile_lexicon(parse_lexicon(source))
