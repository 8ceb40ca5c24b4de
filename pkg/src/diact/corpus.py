"""Dialogue corpus loading, tokenization, and document-frequency statistics.

Canonical corpus format is UTF-8 JSON lines, one dialogue per line:

    {"dialogue_id": "sw2005", "utterances": [{"text": "Okay.", "gold_label": "b"}, ...]}

``gold_label`` may be null. A plain-TSV alternative is accepted for files
with a ``.tsv`` extension: ``dialogue_id TAB utterance_index TAB gold_label
TAB text`` (empty gold_label means unlabeled; text keeps any further tabs).
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass

from .errors import EmptyCorpusError, ParseError

_EDGE_PUNCT = string.punctuation


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge ASCII punctuation, drop empties."""
    out = []
    for raw in text.lower().split():
        tok = raw.strip(_EDGE_PUNCT)
        if tok:
            out.append(tok)
    return out


@dataclass
class Utterance:
    text: str
    tokens: list[str]
    gold_label: str | None = None

    @classmethod
    def from_text(cls, text: str, gold_label: str | None = None) -> Utterance:
        return cls(text=text, tokens=tokenize(text), gold_label=gold_label)


@dataclass
class Dialogue:
    id: str
    utterances: list[Utterance]

    def __len__(self) -> int:
        return len(self.utterances)


@dataclass
class Corpus:
    dialogues: list[Dialogue]

    @property
    def n_utterances(self) -> int:
        return sum(len(d) for d in self.dialogues)

    @property
    def label_set(self) -> set[str] | None:
        """Union of gold labels present, or None if the corpus is unlabeled."""
        labels = {u.gold_label for d in self.dialogues for u in d.utterances
                  if u.gold_label is not None}
        return labels or None

    def dialogue_ids(self) -> list[str]:
        return [d.id for d in self.dialogues]

    def iter_utterances(self):
        for d in self.dialogues:
            for u in d.utterances:
                yield u


@dataclass
class IdfTable:
    """Per-token inverse document frequencies, one document = one utterance."""

    weights: dict[str, float]
    n_docs: int

    def __contains__(self, token: str) -> bool:
        return token in self.weights

    def __getitem__(self, token: str) -> float:
        return self.weights[token]

    def get(self, token: str, default: float | None = None):
        return self.weights.get(token, default)


def load_corpus(path: str) -> Corpus:
    """Load a corpus file (JSON lines, or TSV when the extension is .tsv).

    Dialogues keep file order and utterances keep in-dialogue order;
    tokenization is applied on load.

    Raises:
        ParseError: on any malformed record, citing the line number.
        EmptyCorpusError: if the file holds no dialogues.
    """
    if str(path).endswith(".tsv"):
        corpus = _load_tsv(path)
    else:
        corpus = _load_jsonl(path)
    if not corpus.dialogues:
        raise EmptyCorpusError("empty corpus", path=path)
    return corpus


def _load_jsonl(path: str) -> Corpus:
    dialogues: list[Dialogue] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", path=path, line=lineno) from exc
            if not isinstance(record, dict):
                raise ParseError("record is not a JSON object", path=path, line=lineno)
            did = record.get("dialogue_id")
            if not isinstance(did, str) or not did:
                raise ParseError("missing or invalid dialogue_id", path=path, line=lineno)
            if did in seen_ids:
                raise ParseError(f"duplicate dialogue_id {did!r}", path=path, line=lineno)
            seen_ids.add(did)
            raw_utts = record.get("utterances")
            if not isinstance(raw_utts, list) or not raw_utts:
                raise ParseError("utterances must be a non-empty list", path=path, line=lineno)
            utts = []
            for pos, item in enumerate(raw_utts):
                if not isinstance(item, dict) or "text" not in item:
                    raise ParseError(f"utterance {pos} missing text field",
                                     path=path, line=lineno)
                text = item["text"]
                if not isinstance(text, str):
                    raise ParseError(f"utterance {pos} text is not a string",
                                     path=path, line=lineno)
                gold = item.get("gold_label")
                if gold is not None and (not isinstance(gold, str) or not gold):
                    raise ParseError(f"utterance {pos} gold_label must be a non-empty "
                                     "string or null", path=path, line=lineno)
                utts.append(Utterance.from_text(text, gold))
            dialogues.append(Dialogue(id=did, utterances=utts))
    return Corpus(dialogues=dialogues)


def _load_tsv(path: str) -> Corpus:
    # Rows may arrive in any order; dialogues keep first-appearance order and
    # utterances are ordered by their index column.
    order: list[str] = []
    rows: dict[str, list[tuple[int, Utterance]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 3)
            if len(parts) != 4:
                raise ParseError("expected 4 tab-separated fields "
                                 "(dialogue_id, index, gold_label, text)",
                                 path=path, line=lineno)
            did, idx_str, gold, text = parts
            if not did:
                raise ParseError("empty dialogue_id", path=path, line=lineno)
            try:
                idx = int(idx_str)
            except ValueError:
                raise ParseError(f"utterance index {idx_str!r} is not an integer",
                                 path=path, line=lineno) from None
            if did not in rows:
                rows[did] = []
                order.append(did)
            rows[did].append((idx, Utterance.from_text(text, gold or None)))
    dialogues = []
    for did in order:
        pairs = sorted(rows[did], key=lambda p: p[0])
        indices = [p[0] for p in pairs]
        if len(set(indices)) != len(indices):
            raise ParseError(f"duplicate utterance index in dialogue {did!r}", path=path)
        dialogues.append(Dialogue(id=did, utterances=[p[1] for p in pairs]))
    return Corpus(dialogues=dialogues)


def compute_idf(corpus: Corpus) -> IdfTable:
    """Smoothed utterance-level IDF: idf(w) = ln((1+N)/(1+df(w))) + 1.

    N is the utterance count and df(w) the number of utterances containing w
    (multiple occurrences inside one utterance count once). Every weight is
    strictly positive; tokens absent from the corpus are absent from the table.
    """
    if not corpus.dialogues:
        raise EmptyCorpusError("cannot compute IDF of an empty corpus")
    df: dict[str, int] = {}
    n_docs = 0
    for utt in corpus.iter_utterances():
        n_docs += 1
        for tok in set(utt.tokens):
            df[tok] = df.get(tok, 0) + 1
    weights = {tok: math.log((1 + n_docs) / (1 + d)) + 1.0 for tok, d in df.items()}
    return IdfTable(weights=weights, n_docs=n_docs)
