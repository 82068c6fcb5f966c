"""Synthetic "Emails" and "Ads" join benchmarks with ground truth, and scoring."""
from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable

from .model import DEFAULT_TOKENIZER, Table, TokenizerHandle, write_table

NAMES = ("James", "Mary", "John", "Linda", "Robert", "Susan", "Michael", "Karen", "David", "Sarah")
MONTHS = (
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
)
FIRST_YEAR = 2015

MATERIALS = ("made of wood", "made of metal", "made of glass", "made of plastic")
COLORS = ("red", "blue", "green", "black")

EMAILS_PREDICATE = "the two texts contradict each other"
ADS_PREDICATE = "the ad matches the search request"
EMAILS_SELECTIVITY = 0.01


@dataclass(frozen=True)
class Benchmark:
    name: str
    table1: Table
    table2: Table
    ground_truth: frozenset
    predicate_text: str

    @property
    def selectivity(self) -> Fraction:
        return Fraction(len(self.ground_truth), len(self.table1) * len(self.table2))

    def export(self, directory: str | Path) -> dict[str, Path]:
        """Write ``table1.csv``, ``table2.csv`` and ``truth.csv`` into ``directory``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {"table1": d / "table1.csv", "table2": d / "table2.csv", "truth": d / "truth.csv"}
        write_table(self.table1, paths["table1"])
        write_table(self.table2, paths["table2"])
        write_truth(self.ground_truth, paths["truth"])
        return paths


def write_truth(pairs: Iterable[tuple[int, int]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id1", "id2"])
        w.writerows(sorted(pairs))


def read_truth(path: str | Path) -> set[tuple[int, int]]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        return {(int(r["id1"]), int(r["id2"])) for r in csv.DictReader(fh)}


def month_name(index: int) -> str:
    """Month ``index`` counted from January of ``FIRST_YEAR``."""
    return f"{MONTHS[index % 12]} {FIRST_YEAR + index // 12}"


def gen_emails(
    num_statements: int = 100,
    num_emails: int = 10,
    seed: int = 0,
    tokenizer: TokenizerHandle = DEFAULT_TOKENIZER,
) -> Benchmark:
    """Statements by ten people and emails telling them about the losses.

    An email contradicts a statement when it names the same person and the
    email's month is strictly earlier than the month the person claims to have
    first heard about the losses. Email months are picked so the number of
    contradicting pairs is ``round(0.01 * num_statements * num_emails)`` when
    the data allows it.
    """
    if num_statements < 1 or num_emails < 1:
        raise ValueError("counts must be >= 1")
    rng = random.Random(seed)
    names = list(NAMES)
    rng.shuffle(names)

    per_name: dict[str, list[int]] = {n: [] for n in names}
    stmt_name = [names[i % len(names)] for i in range(num_statements)]
    span = max(48, num_statements // len(names) + 2)
    for n in names:
        count = stmt_name.count(n)
        per_name[n] = rng.sample(range(1, span + 1), count)
    cursor = {n: 0 for n in names}
    statements = []
    for i, n in enumerate(stmt_name):
        m = per_name[n][cursor[n]]
        cursor[n] += 1
        statements.append((n, m))
    order = list(range(num_statements))
    rng.shuffle(order)
    statements = [statements[k] for k in order]

    email_name = [names[i % len(names)] for i in range(num_emails)]
    rng.shuffle(email_name)
    target = round(EMAILS_SELECTIVITY * num_statements * num_emails)
    # split the target over emails, capped by how many statements each name has
    caps = [len(per_name[n]) for n in email_name]
    want = [0] * num_emails
    remaining = target
    while remaining > 0 and any(w < c for w, c in zip(want, caps)):
        for k in range(num_emails):
            if remaining and want[k] < caps[k]:
                want[k] += 1
                remaining -= 1

    emails = []
    for n, k in zip(email_name, want):
        months = sorted(per_name[n], reverse=True)
        # exactly k statements of this person lie strictly after the email
        if not months:
            m = rng.randrange(1, span + 1)
        elif k < len(months):
            m = months[k]
        else:
            m = months[-1] - 1
        emails.append((n, m))

    t1 = Table.from_texts(
        (f"{n}: I first heard about the losses in {month_name(m)}" for n, m in statements), tokenizer
    )
    t2 = Table.from_texts(
        (f"I first told {n} about the losses back in {month_name(m)}" for n, m in emails), tokenizer
    )
    truth = frozenset(
        (i, j)
        for i, (sn, sm) in enumerate(statements)
        for j, (en, em) in enumerate(emails)
        if sn == en and em < sm
    )
    return Benchmark("emails", t1, t2, truth, EMAILS_PREDICATE)


def gen_ads(
    num_ads: int = 16,
    num_searches: int = 16,
    seed: int = 0,
    tokenizer: TokenizerHandle = DEFAULT_TOKENIZER,
) -> Benchmark:
    """Ads and searches for tables; a pair matches on identical material and color.

    Both sides cycle through shuffled copies of all material/color combinations,
    so each combination appears about equally often.
    """
    if num_ads < 1 or num_searches < 1:
        raise ValueError("counts must be >= 1")
    rng = random.Random(seed)
    combos = [(m, c) for m in MATERIALS for c in COLORS]

    def draw(n):
        out = []
        while len(out) < n:
            block = combos[:]
            rng.shuffle(block)
            out.extend(block)
        return out[:n]

    ads, searches = draw(num_ads), draw(num_searches)
    t1 = Table.from_texts((f"Offering table that is {m} and {c}" for m, c in ads), tokenizer)
    t2 = Table.from_texts((f"Searching table that is {m} and {c}" for m, c in searches), tokenizer)
    truth = frozenset((i, j) for i, a in enumerate(ads) for j, s in enumerate(searches) if a == s)
    return Benchmark("ads", t1, t2, truth, ADS_PREDICATE)


SCENARIOS = {"emails": gen_emails, "ads": gen_ads}


@dataclass(frozen=True)
class QualityMetrics:
    recall: Fraction
    precision: Fraction
    f1: Fraction
    precision_undefined: bool = False

    def as_dict(self) -> dict:
        return {
            "recall": float(self.recall),
            "precision": float(self.precision),
            "f1": float(self.f1),
            "precision_undefined": self.precision_undefined,
        }


def score(pairs, truth: Iterable[tuple[int, int]]) -> QualityMetrics:
    """Recall, precision and F1 of ``pairs`` (a report or a pair collection).

    Precision of an empty result is reported as 1 and flagged as undefined.
    """
    found = pairs.pairs if hasattr(pairs, "pairs") else {tuple(p) for p in pairs}
    truth = {tuple(p) for p in truth}
    hits = len(found & truth)
    undefined = not found
    precision = Fraction(1) if undefined else Fraction(hits, len(found))
    recall = Fraction(1) if not truth else Fraction(hits, len(truth))
    if undefined and truth:
        recall = Fraction(0)
    f1 = Fraction(0) if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    if undefined and truth:
        f1 = Fraction(0)
    return QualityMetrics(recall, precision, f1, undefined)


__all__ = [
    "ADS_PREDICATE",
    "Benchmark",
    "EMAILS_PREDICATE",
    "NAMES",
    "QualityMetrics",
    "SCENARIOS",
    "gen_ads",
    "gen_emails",
    "read_truth",
    "score",
    "write_truth",
]
