"""Domain types shared by every operator: tuples, tables, cost parameters,
pricing and the token ledger."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Protocol, Sequence, Union

import numpy as np


class EmptyTable(ValueError):
    pass


class InvalidParams(ValueError):
    pass


# --------------------------------------------------------------------------
# Tokenizers
# --------------------------------------------------------------------------


class Tokenizer(Protocol):
    name: str

    def count(self, text: str) -> int: ...


class WhitespaceTokenizer:
    name = "whitespace"

    def count(self, text: str) -> int:
        return len(text.split())


class CharsDiv4Tokenizer:
    """Roughly four characters per token, the usual rule of thumb for
    English text with BPE vocabularies."""

    name = "chars4"

    def count(self, text: str) -> int:
        return math.ceil(len(text) / 4)


class VocabularyTokenizer:
    """Counts tokens with a HuggingFace ``tokenizer.json`` vocabulary."""

    def __init__(self, path: str | Path):
        try:
            from tokenizers import Tokenizer as _HFTokenizer
        except ImportError as exc:  # pragma: no cover - depends on env
            raise ImportError("install the 'tokenizers' package for vocabulary tokenizers") from exc
        self.path = str(path)
        self.name = f"vocab:{self.path}"
        self._tok = _HFTokenizer.from_file(self.path)

    def count(self, text: str) -> int:
        if not text:
            return 0
        return len(self._tok.encode(text, add_special_tokens=False).ids)


TokenizerHandle = Union[str, Tokenizer]

_BUILTIN = {
    "whitespace": WhitespaceTokenizer(),
    "chars4": CharsDiv4Tokenizer(),
    "chars-div-4": CharsDiv4Tokenizer(),
}
DEFAULT_TOKENIZER = "chars4"


def get_tokenizer(handle: TokenizerHandle = DEFAULT_TOKENIZER) -> Tokenizer:
    if not isinstance(handle, str):
        return handle
    if handle in _BUILTIN:
        return _BUILTIN[handle]
    if handle.startswith("vocab:"):
        return VocabularyTokenizer(handle[len("vocab:"):])
    raise ValueError(f"unknown tokenizer {handle!r}")


def count_tokens(text: str, tokenizer: TokenizerHandle = DEFAULT_TOKENIZER) -> int:
    return get_tokenizer(tokenizer).count(text)


# --------------------------------------------------------------------------
# Tables
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Tuple:
    id: int
    text: str
    token_size: int

    def __post_init__(self):
        if not self.text:
            raise ValueError(f"tuple {self.id} has empty text")
        if self.token_size < 0:
            raise ValueError("token_size must be nonnegative")

    @classmethod
    def of(cls, id: int, text: str, tokenizer: TokenizerHandle = DEFAULT_TOKENIZER) -> "Tuple":
        return cls(id, text, count_tokens(text, tokenizer))


@dataclass(frozen=True)
class Table:
    tuples: tuple[Tuple, ...]
    tokenizer: str = DEFAULT_TOKENIZER

    def __post_init__(self):
        object.__setattr__(self, "tuples", tuple(self.tuples))
        if not self.tuples:
            raise EmptyTable("table has no rows")
        if self.avg_tuple_tokens <= 0:
            raise ValueError("average tuple size must be positive")

    @classmethod
    def from_texts(
        cls,
        texts: Iterable[str],
        tokenizer: TokenizerHandle = DEFAULT_TOKENIZER,
        ids: Iterable[int] | None = None,
    ) -> "Table":
        tok = get_tokenizer(tokenizer)
        texts = list(texts)
        ids = list(range(len(texts))) if ids is None else list(ids)
        if len(ids) != len(texts):
            raise ValueError("ids and texts differ in length")
        return cls(tuple(Tuple(i, t, tok.count(t)) for i, t in zip(ids, texts)), tok.name)

    def retokenize(self, tokenizer: TokenizerHandle) -> "Table":
        return Table.from_texts((t.text for t in self.tuples), tokenizer, (t.id for t in self.tuples))

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)

    def __getitem__(self, i):
        return self.tuples[i]

    @property
    def row_count(self) -> int:
        return len(self.tuples)

    @cached_property
    def total_tokens(self) -> int:
        return sum(t.token_size for t in self.tuples)

    @cached_property
    def avg_tuple_tokens(self) -> Fraction:
        return Fraction(self.total_tokens, len(self.tuples))

    @cached_property
    def ids(self) -> np.ndarray:
        return np.fromiter((t.id for t in self.tuples), dtype=np.int64, count=len(self.tuples))

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.fromiter((t.token_size for t in self.tuples), dtype=np.int64, count=len(self.tuples))

    @cached_property
    def by_id(self) -> dict[int, Tuple]:
        return {t.id: t for t in self.tuples}

    def batches(self, size: int) -> list["Batch"]:
        """Consecutive batches of ``size`` rows; the last may be shorter."""
        if size < 1:
            raise ValueError("batch size must be >= 1")
        ids, sizes = self.ids, self.sizes
        return [
            Batch(self.tuples[i : i + size], ids[i : i + size], int(sizes[i : i + size].sum()), i)
            for i in range(0, len(self.tuples), size)
        ]


@dataclass(frozen=True, eq=False)
class Batch:
    """A run of consecutive table rows sent together in one prompt."""

    tuples: tuple[Tuple, ...]
    ids: np.ndarray
    tokens: int
    offset: int = 0

    @classmethod
    def of(cls, tuples: Sequence[Tuple]) -> "Batch":
        tuples = tuple(tuples)
        ids = np.fromiter((t.id for t in tuples), dtype=np.int64, count=len(tuples))
        return cls(tuples, ids, sum(t.token_size for t in tuples))

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)

    def __getitem__(self, i):
        return self.tuples[i]


def table_stats(table: Table, tokenizer: TokenizerHandle | None = None) -> tuple[int, Fraction]:
    """Row count and exact mean token size of ``table``.

    Sizes are recomputed when ``tokenizer`` differs from the one the table was
    built with.
    """
    if not table.tuples:
        raise EmptyTable("table has no rows")
    if tokenizer is not None and get_tokenizer(tokenizer).name != table.tokenizer:
        table = table.retokenize(tokenizer)
    return table.row_count, table.avg_tuple_tokens


def load_table(path: str | Path, tokenizer: TokenizerHandle = DEFAULT_TOKENIZER) -> Table:
    """Load a table from CSV (header with ``id,text``) or JSON lines."""
    path = Path(path)
    ids, texts = [], []
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                obj = json.loads(line)
                try:
                    ids.append(int(obj["id"]))
                    texts.append(str(obj["text"]))
                except KeyError as exc:
                    raise ValueError(f"{path}:{lineno}: missing field {exc}") from None
    else:
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"id", "text"} <= set(reader.fieldnames):
                raise ValueError(f"{path}: CSV header must contain 'id' and 'text'")
            for row in reader:
                ids.append(int(row["id"]))
                texts.append(row["text"])
    if not texts:
        raise EmptyTable(f"{path} has no rows")
    return Table.from_texts(texts, tokenizer, ids)


def write_table(table: Table, path: str | Path) -> None:
    path = Path(path)
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        with path.open("w", encoding="utf-8") as fh:
            for t in table:
                fh.write(json.dumps({"id": t.id, "text": t.text}) + "\n")
        return
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "text"])
        for t in table:
            writer.writerow([t.id, t.text])


# --------------------------------------------------------------------------
# Cost parameters and pricing
# --------------------------------------------------------------------------

Number = Union[int, float, Fraction]


@dataclass(frozen=True)
class CostParams:
    """Data, model and prompt properties that drive join cost.

    ``t`` is the per-invocation token budget with the static prompt size ``p``
    already subtracted. ``g`` is the price of a generated token relative to a
    read token.
    """

    r1: int
    r2: int
    s1: Number
    s2: Number
    s3: Number
    sigma: Number
    g: Number = 1
    p: Number = 0
    t: Number = 8192

    def __post_init__(self):
        if self.r1 < 1 or self.r2 < 1:
            raise InvalidParams("row counts must be positive")
        if min(self.s1, self.s2, self.s3) <= 0:
            raise InvalidParams("token sizes must be positive")
        if not 0 <= self.sigma <= 1:
            raise InvalidParams(f"selectivity {self.sigma} outside [0, 1]")
        if self.g < 1:
            raise InvalidParams("relative write cost g must be >= 1")
        if self.p < 0:
            raise InvalidParams("static prompt size must be nonnegative")
        if self.t <= 0:
            raise InvalidParams("token budget must be positive")

    @property
    def fits_one_pair(self) -> bool:
        return self.t >= self.s1 + self.s2 + self.sigma * self.s3

    def with_(self, **changes) -> "CostParams":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class Pricing:
    read_cost_per_token: float
    write_cost_per_token: float

    def __post_init__(self):
        if self.read_cost_per_token < 0 or self.write_cost_per_token < 0:
            raise ValueError("prices must be nonnegative")

    @classmethod
    def per_thousand(cls, read: float, write: float) -> "Pricing":
        return cls(read / 1000, write / 1000)

    @classmethod
    def gpt4(cls) -> "Pricing":
        # 3 cents per 1k read, 6 cents per 1k generated
        return cls.per_thousand(0.03, 0.06)

    @property
    def g(self) -> float:
        if self.read_cost_per_token <= 0:
            raise ValueError("relative write cost undefined for free reads")
        return self.write_cost_per_token / self.read_cost_per_token

    def cost(self, tokens_read: int, tokens_written: int) -> float:
        return tokens_read * self.read_cost_per_token + tokens_written * self.write_cost_per_token


@dataclass
class TokenLedger:
    """Cumulative token accounting for one join execution.

    A ledger has a single writer; counters only ever grow.
    """

    tokens_read: int = 0
    tokens_written: int = 0
    invocations: int = 0
    overflows: int = 0

    def record(self, prompt_tokens: int, output_tokens: int, invocations: int = 1) -> None:
        if prompt_tokens < 0 or output_tokens < 0 or invocations < 0:
            raise ValueError("ledger increments must be nonnegative")
        self.tokens_read += int(prompt_tokens)
        self.tokens_written += int(output_tokens)
        self.invocations += int(invocations)

    def record_overflow(self) -> None:
        self.overflows += 1

    def token_cost(self, g: Number) -> Number:
        """Cost in read-token units: reads plus ``g`` times writes."""
        return self.tokens_read + g * self.tokens_written

    def cost(self, pricing: Pricing) -> float:
        return pricing.cost(self.tokens_read, self.tokens_written)

    def snapshot(self) -> "TokenLedger":
        return TokenLedger(self.tokens_read, self.tokens_written, self.invocations, self.overflows)

    def to_dict(self, pricing: Pricing | None = None) -> dict:
        out = {
            "tokens_read": self.tokens_read,
            "tokens_written": self.tokens_written,
            "invocations": self.invocations,
            "overflows": self.overflows,
        }
        if pricing is not None:
            out["read_cost_per_token"] = pricing.read_cost_per_token
            out["write_cost_per_token"] = pricing.write_cost_per_token
            out["cost"] = round(self.cost(pricing), 10)
        return out


__all__ = [
    "Batch",
    "CharsDiv4Tokenizer",
    "CostParams",
    "DEFAULT_TOKENIZER",
    "EmptyTable",
    "InvalidParams",
    "Pricing",
    "Table",
    "TokenLedger",
    "Tokenizer",
    "Tuple",
    "VocabularyTokenizer",
    "WhitespaceTokenizer",
    "count_tokens",
    "get_tokenizer",
    "load_table",
    "table_stats",
    "write_table",
]
