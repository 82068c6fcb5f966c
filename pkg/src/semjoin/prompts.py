"""Prompt templates for the tuple and block joins, and answer parsing."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .model import Tuple

SENTINEL = "Finished"

TUPLE_TEMPLATE = 'Is the following true ("Yes"/"No"): {j}?\nText 1: {t1}\nText 2: {t2}\nAnswer:'

BLOCK_HEADER = (
    "Find indexes x,y where x is the number of an entry in collection 1 and y the number "
    "of an entry in collection 2 such that {j} (make sure to catch all pairs!)!\n"
    "Separate index pairs by semicolons.\n"
    'Write "Finished" after the last pair!\n'
)
COLLECTION_1 = "Text Collection 1:\n"
COLLECTION_2 = "Text Collection 2:\n"
BLOCK_FOOTER = "Index pairs:"


def _text(t) -> str:
    return t.text if isinstance(t, Tuple) else str(t)


def tuple_prompt(t1, t2, j: str) -> str:
    return TUPLE_TEMPLATE.format(j=j, t1=_text(t1), t2=_text(t2))


def _numbered(batch: Sequence) -> str:
    return "".join(f"{k}. {_text(t)}\n" for k, t in enumerate(batch, 1))


def block_prompt(batch1: Sequence, batch2: Sequence, j: str) -> str:
    if not batch1 or not batch2:
        raise ValueError("block prompts need non-empty batches")
    return (
        BLOCK_HEADER.format(j=j)
        + COLLECTION_1
        + _numbered(batch1)
        + COLLECTION_2
        + _numbered(batch2)
        + BLOCK_FOOTER
    )


def block_prompt_skeleton(j: str) -> str:
    """The block prompt with all tuple text removed; its size is the static part."""
    return BLOCK_HEADER.format(j=j) + COLLECTION_1 + COLLECTION_2 + BLOCK_FOOTER


def tuple_prompt_skeleton(j: str) -> str:
    return TUPLE_TEMPLATE.format(j=j, t1="", t2="")


def is_yes(answer: str) -> bool:
    """Case-insensitive "yes", ignoring surrounding whitespace and punctuation."""
    return answer.strip().strip(".,;:!?\"'()[] \t\n").lower() == "yes"


# --------------------------------------------------------------------------
# Block answers
# --------------------------------------------------------------------------

_PAIR = re.compile(r"^\s*(\d+)\s*,\s*(\d+)\s*$")
_TRIM = " \t\r\n.,;:!?\"'"


@dataclass(frozen=True)
class ParsedAnswer:
    index_pairs: tuple[tuple[int, int], ...]
    finished: bool
    malformed_fragments: int


def parse_block_answer(answer: str, b1: int, b2: int) -> ParsedAnswer:
    """Extract 1-based ``(x, y)`` index pairs from a block-join answer.

    Fragments are separated by semicolons. Pairs outside ``[1, b1] x [1, b2]``
    or that don't parse count as malformed. The answer is finished when its
    last word, trimmed of whitespace and punctuation, is the end marker.
    """
    body = answer.rstrip(_TRIM)
    finished = body.endswith(SENTINEL) and (
        len(body) == len(SENTINEL) or not body[-len(SENTINEL) - 1].isalnum()
    )
    if finished:
        body = body[: -len(SENTINEL)]

    pairs: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    malformed = 0
    for frag in body.split(";"):
        if not frag.strip(_TRIM):
            continue
        m = _PAIR.match(frag.strip().rstrip(".,"))
        if not m:
            malformed += 1
            continue
        x, y = int(m.group(1)), int(m.group(2))
        if not (1 <= x <= b1 and 1 <= y <= b2):
            malformed += 1
            continue
        if (x, y) not in seen:
            seen.add((x, y))
            pairs.append((x, y))
    return ParsedAnswer(tuple(pairs), finished, malformed)


def render_block_answer(pairs: Sequence[tuple[int, int]], finished: bool) -> str:
    """The answer text for 1-based index pairs, as the templates ask for it."""
    parts = [f"{x},{y}" for x, y in pairs]
    if finished:
        parts.append(SENTINEL)
        return ";".join(parts)
    return "".join(p + ";" for p in parts)


# --------------------------------------------------------------------------
# Reading prompts back (used by the simulated backend's raw-text path)
# --------------------------------------------------------------------------


class PromptFormatError(ValueError):
    pass


def split_tuple_prompt(prompt: str) -> tuple[str, str, str]:
    """Recover ``(predicate, text1, text2)`` from a tuple prompt."""
    head = 'Is the following true ("Yes"/"No"): '
    if not prompt.startswith(head) or not prompt.endswith("\nAnswer:"):
        raise PromptFormatError("not a tuple prompt")
    body = prompt[len(head) : -len("\nAnswer:")]
    i = body.find("?\nText 1: ")
    k = body.rfind("\nText 2: ")
    if i < 0 or k < 0 or k < i:
        raise PromptFormatError("tuple prompt lacks its text slots")
    return body[:i], body[i + len("?\nText 1: ") : k], body[k + len("\nText 2: ") :]


def _split_numbered(section: str) -> list[str]:
    items, k, pos = [], 1, 0
    if not section.startswith("1. "):
        raise PromptFormatError("collection does not start at entry 1")
    while True:
        start = pos + len(f"{k}. ")
        nxt = section.find(f"\n{k + 1}. ", start)
        if nxt < 0:
            if not section.endswith("\n"):
                raise PromptFormatError("collection entry not newline-terminated")
            items.append(section[start:-1])
            return items
        items.append(section[start:nxt])
        pos, k = nxt + 1, k + 1


def split_block_prompt(prompt: str) -> tuple[list[str], list[str]]:
    """Recover the two batches of texts from a block prompt."""
    i = prompt.find("\n" + COLLECTION_1)
    k = prompt.rfind("\n" + COLLECTION_2)
    if i < 0 or k < 0 or not prompt.endswith(BLOCK_FOOTER):
        raise PromptFormatError("not a block prompt")
    first = prompt[i + 1 + len(COLLECTION_1) : k + 1]
    second = prompt[k + 1 + len(COLLECTION_2) : -len(BLOCK_FOOTER)]
    return _split_numbered(first), _split_numbered(second)


__all__ = [
    "ParsedAnswer",
    "PromptFormatError",
    "SENTINEL",
    "block_prompt",
    "block_prompt_skeleton",
    "is_yes",
    "parse_block_answer",
    "render_block_answer",
    "split_block_prompt",
    "split_tuple_prompt",
    "tuple_prompt",
    "tuple_prompt_skeleton",
]
