"""Pretrained word vectors and IDF-weighted utterance composition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, IdfTable
from .errors import ParseError

_FLOAT_FMT = repr  # shortest round-trip representation, byte-stable across runs


@dataclass
class EmbeddingTable:
    """token -> vector map; all vectors have length ``dim``."""

    dim: int
    vectors: dict[str, np.ndarray]

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __getitem__(self, token: str) -> np.ndarray:
        return self.vectors[token]

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass(eq=False)
class VectorSet:
    """Per-dialogue utterance vectors, index-aligned with a Corpus."""

    dialogue_ids: list[str]
    arrays: list[np.ndarray]  # one (N_j, dim) float64 array per dialogue
    dim: int

    def __post_init__(self):
        self._flat = None

    @property
    def lengths(self) -> list[int]:
        return [a.shape[0] for a in self.arrays]

    @property
    def n_total(self) -> int:
        return sum(a.shape[0] for a in self.arrays)

    def flat(self) -> np.ndarray:
        """All vectors stacked into one (N, dim) array, cached."""
        if self._flat is None:
            self._flat = np.ascontiguousarray(np.concatenate(self.arrays, axis=0))
        return self._flat

    def save_tsv(self, path: str) -> None:
        """Write one row per utterance: dialogue_id, index, then dim floats."""
        with open(path, "w", encoding="utf-8") as fh:
            for did, arr in zip(self.dialogue_ids, self.arrays):
                for i, vec in enumerate(arr):
                    cells = [did, str(i)] + [_FLOAT_FMT(float(x)) for x in vec]
                    fh.write("\t".join(cells) + "\n")

    @classmethod
    def load_tsv(cls, path: str) -> VectorSet:
        ids: list[str] = []
        chunks: dict[str, list[np.ndarray]] = {}
        dim = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) < 3:
                    raise ParseError("expected dialogue_id, index, and vector values",
                                     path=path, line=lineno)
                did = parts[0]
                try:
                    idx = int(parts[1])
                    vec = np.array([float(x) for x in parts[2:]], dtype=np.float64)
                except ValueError:
                    raise ParseError("malformed numeric field", path=path,
                                     line=lineno) from None
                if dim is None:
                    dim = vec.shape[0]
                elif vec.shape[0] != dim:
                    raise ParseError(f"vector has {vec.shape[0]} values, expected {dim}",
                                     path=path, line=lineno)
                if did not in chunks:
                    chunks[did] = []
                    ids.append(did)
                if idx != len(chunks[did]):
                    raise ParseError(f"utterance index {idx} out of order for "
                                     f"dialogue {did!r}", path=path, line=lineno)
                chunks[did].append(vec)
        if dim is None:
            raise ParseError("empty vectors file", path=path)
        arrays = [np.vstack(chunks[did]) for did in ids]
        return cls(dialogue_ids=ids, arrays=arrays, dim=dim)

    def validate_against(self, corpus: Corpus) -> None:
        """Check shape alignment with a corpus; raises ValueError on mismatch."""
        if self.dialogue_ids != corpus.dialogue_ids():
            raise ValueError("vector set dialogue ids do not match corpus")
        for did, arr, dlg in zip(self.dialogue_ids, self.arrays, corpus.dialogues):
            if arr.shape[0] != len(dlg):
                raise ValueError(f"dialogue {did!r}: {arr.shape[0]} vectors for "
                                 f"{len(dlg)} utterances")


def load_embeddings(path: str, expected_dim: int | None = None) -> EmbeddingTable:
    """Load whitespace-separated text vectors: token followed by floats.

    The dimension is inferred from the first line (or validated against
    ``expected_dim``). Duplicate tokens keep the first occurrence.
    """
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            token = parts[0]
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError:
                raise ParseError("malformed float value", path=path, line=lineno) from None
            if dim is None:
                dim = vec.shape[0]
                if dim == 0:
                    raise ParseError("no vector values on first line", path=path, line=lineno)
                if expected_dim is not None and dim != expected_dim:
                    raise ParseError(f"dimension {dim} does not match expected "
                                     f"{expected_dim}", path=path, line=lineno)
            elif vec.shape[0] != dim:
                raise ParseError(f"vector has {vec.shape[0]} values, expected {dim}",
                                 path=path, line=lineno)
            if token not in vectors:
                vectors[token] = vec
    if dim is None:
        raise ParseError("empty embeddings file", path=path)
    return EmbeddingTable(dim=dim, vectors=vectors)


def compose_utterance(tokens: list[str], table: EmbeddingTable,
                      idf: IdfTable) -> np.ndarray:
    """IDF-weighted mean of the word vectors for tokens known to both tables.

    Weights are normalized (divide by their sum), so the output lies in the
    convex hull of the contributing word vectors and is invariant to a global
    rescaling of the IDF weights. Repeated tokens contribute once per
    occurrence. If no token qualifies the zero vector is returned.
    """
    acc = np.zeros(table.dim, dtype=np.float64)
    total = 0.0
    for tok in tokens:
        if tok in table and tok in idf:
            w = idf[tok]
            acc += w * table[tok]
            total += w
    if total > 0.0:
        acc /= total
    return acc


def vectorize_corpus(corpus: Corpus, table: EmbeddingTable,
                     idf: IdfTable) -> tuple[VectorSet, int]:
    """Compose one vector per utterance; returns (vectors, all-OOV count).

    Utterances whose tokens are all out of vocabulary map to the zero vector
    and are tallied in the returned count.
    """
    ids = []
    arrays = []
    n_oov = 0
    for dlg in corpus.dialogues:
        rows = np.zeros((len(dlg), table.dim), dtype=np.float64)
        for i, utt in enumerate(dlg.utterances):
            rows[i] = compose_utterance(utt.tokens, table, idf)
            if not any(tok in table and tok in idf for tok in utt.tokens):
                n_oov += 1
        ids.append(dlg.id)
        arrays.append(rows)
    return VectorSet(dialogue_ids=ids, arrays=arrays, dim=table.dim), n_oov
