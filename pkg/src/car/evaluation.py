"""Pairwise response evaluation with position-debiased judging.

Every sample is judged twice: once with the candidate response in position 1
and once with the order swapped.  The second verdict is re-oriented (A and B
exchanged) so both verdicts speak candidate-relative, then combined:

    win:  wins twice, or wins once and ties once
    lose: loses twice, or loses once and ties once
    tie:  ties twice, or wins once and loses once

Aggregates over n samples:

    WS = 1 + (#win - #lose) / n      winning score, 1.0 is parity
    WR = #win / n                    win rate
    QS = (#win + #tie) / n           quality score

which satisfy WS = WR + QS identically.

Two reply formats are supported: a first line with two numeric scores
(assistant 1 and 2), or a final ``[[A]]``/``[[B]]``/``[[C]]`` verdict token.
Judges are pluggable: an HTTP client speaking
``POST {"prompt": ...} -> {"text": ...}`` or a deterministic mock for tests.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

from car.errors import (
    RemoteServiceError,
    ValidationError,
    VerdictParseError,
)

logger = logging.getLogger(__name__)

JUDGE_API_KEY_VAR = "JUDGE_API_KEY"


class JudgeVerdict(Enum):
    """Which presented response one judge call preferred."""

    A = "A"
    B = "B"
    TIE = "TIE"


class MatchOutcome(Enum):
    """Candidate-versus-baseline result after combining both orders."""

    WIN = "WIN"
    LOSE = "LOSE"
    TIE = "TIE"


@dataclass
class MetricsReport:
    n_all: int
    n_win: int
    n_lose: int
    n_tie: int
    ws: float
    wr: float
    qs: float

    def as_dict(self) -> dict:
        return {
            "n_all": self.n_all,
            "n_win": self.n_win,
            "n_lose": self.n_lose,
            "n_tie": self.n_tie,
            "ws": self.ws,
            "wr": self.wr,
            "qs": self.qs,
        }


@dataclass(frozen=True)
class EvalSample:
    instruction: str
    candidate: str
    baseline: str


@dataclass
class SampleLog:
    """Raw verdicts of both passes for one sample.  ``verdict_pass2`` is as
    the judge returned it, before re-orientation."""

    sample_id: int
    verdict_pass1: str
    verdict_pass2: str
    outcome: str  # WIN | LOSE | TIE | SKIPPED
    error: str = ""


@dataclass
class EvalRunResult:
    report: MetricsReport
    samples: list[SampleLog]
    n_skipped: int


def reorient(verdict: JudgeVerdict) -> JudgeVerdict:
    """Map a swapped-order verdict back to candidate-relative labels."""
    if verdict is JudgeVerdict.A:
        return JudgeVerdict.B
    if verdict is JudgeVerdict.B:
        return JudgeVerdict.A
    return JudgeVerdict.TIE


def combine_swapped(first: JudgeVerdict, second: JudgeVerdict) -> MatchOutcome:
    """Combine two candidate-relative verdicts into the final outcome.

    ``second`` must already be re-oriented (see :func:`reorient`), so A means
    the candidate in both arguments.
    """
    wins = (first, second).count(JudgeVerdict.A)
    losses = (first, second).count(JudgeVerdict.B)
    if wins == 2 or (wins == 1 and losses == 0):
        return MatchOutcome.WIN
    if losses == 2 or (losses == 1 and wins == 0):
        return MatchOutcome.LOSE
    return MatchOutcome.TIE


def compute_metrics(outcomes: Sequence[MatchOutcome]) -> MetricsReport:
    if not outcomes:
        raise ValidationError("cannot compute metrics over zero outcomes")
    n = len(outcomes)
    wins = sum(1 for o in outcomes if o is MatchOutcome.WIN)
    losses = sum(1 for o in outcomes if o is MatchOutcome.LOSE)
    ties = n - wins - losses
    return MetricsReport(
        n_all=n,
        n_win=wins,
        n_lose=losses,
        n_tie=ties,
        ws=1.0 + (wins - losses) / n,
        wr=wins / n,
        qs=(wins + ties) / n,
    )


# --- reply parsing ---------------------------------------------------------

_BRACKET = re.compile(r"\[\[(A|B|C)\]\]")


def parse_verdict_scores(reply_text: str) -> JudgeVerdict:
    """First line holds two numeric scores for assistants 1 and 2."""
    first_line = reply_text.split("\n", 1)[0].strip()
    tokens = first_line.split()
    if len(tokens) != 2:
        raise VerdictParseError(
            f"expected two scores on the first line, got {first_line!r}"
        )
    try:
        s1, s2 = float(tokens[0]), float(tokens[1])
    except ValueError:
        raise VerdictParseError(
            f"expected two scores on the first line, got {first_line!r}"
        ) from None
    if s1 > s2:
        return JudgeVerdict.A
    if s1 < s2:
        return JudgeVerdict.B
    return JudgeVerdict.TIE


def parse_verdict_bracket(reply_text: str) -> JudgeVerdict:
    """The last [[A]]/[[B]]/[[C]] token decides; C means tie."""
    matches = _BRACKET.findall(reply_text)
    if not matches:
        raise VerdictParseError("no [[A]]/[[B]]/[[C]] token in the reply")
    return {"A": JudgeVerdict.A, "B": JudgeVerdict.B, "C": JudgeVerdict.TIE}[
        matches[-1]
    ]


REPLY_FORMATS = {
    "scores": parse_verdict_scores,
    "bracket": parse_verdict_bracket,
}


# --- prompt rendering ------------------------------------------------------

def _load_template(name: str) -> str:
    return resources.files("car.prompts").joinpath(name).read_text(encoding="utf-8")


def render_prompt(
    reply_format: str, instruction: str, response_1: str, response_2: str
) -> str:
    """Fill the template for the given reply format."""
    if reply_format not in REPLY_FORMATS:
        raise ValidationError(f"unknown reply format: {reply_format!r}")
    template = _load_template(
        "pairwise_two_score.txt" if reply_format == "scores" else "pairwise_verdict.txt"
    )
    return (
        template.replace("{Instruction}", instruction)
        .replace("{Response 1}", response_1)
        .replace("{Response 2}", response_2)
    )


# --- judge clients ---------------------------------------------------------

class JudgeClient(Protocol):
    def complete(self, prompt: str) -> str:
        """Return the judge's raw reply text for a rendered prompt."""


class RemoteJudge:
    """HTTP judge: POST {"prompt": ...} -> {"text": ...}.

    Reads its bearer token from the JUDGE_API_KEY environment variable.
    Retries connection failures and 5xx replies; 4xx replies fail immediately.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 2):
        if not endpoint:
            raise ValidationError("remote judge needs an endpoint")
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries

    def complete(self, prompt: str) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(JUDGE_API_KEY_VAR)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error: Exception | None = None
        for _attempt in range(self.retries + 1):
            try:
                resp = requests.post(
                    self.endpoint,
                    json={"prompt": prompt},
                    headers=headers,
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if 400 <= resp.status_code < 500:
                raise RemoteServiceError(
                    f"judge request rejected ({resp.status_code}): {resp.text[:200]}"
                )
            if resp.status_code >= 500:
                last_error = RemoteServiceError(
                    f"judge server error {resp.status_code}"
                )
                continue
            try:
                text = resp.json().get("text")
            except ValueError as exc:
                last_error = exc
                continue
            if not isinstance(text, str):
                last_error = RemoteServiceError("judge reply has no 'text' field")
                continue
            return text
        raise RemoteServiceError(
            f"judge call failed after {self.retries + 1} attempts: {last_error}"
        )


_BLOCK = re.compile(
    r"\[The Start of Assistant (?:1|A)'s (?:Answer|Instruction and Answer)\]\n"
    r"(?P<first>.*?)\n"
    r"\[The End of Assistant (?:1|A)'s (?:Answer|Instruction and Answer)\]"
    r".*?"
    r"\[The Start of Assistant (?:2|B)'s (?:Answer|Instruction and Answer)\]\n"
    r"(?P<second>.*?)\n"
    r"\[The End of Assistant (?:2|B)'s (?:Answer|Instruction and Answer)\]",
    re.DOTALL,
)


class MockJudge:
    """Deterministic judge for tests and offline runs.

    Rules:
      * ``longer``:         the longer presented block wins; equal ties.
      * ``position-first``: always prefers the first position (a maximally
                             position-biased judge; swap combination should
                             cancel it into ties).
      * ``table``:          a {instruction -> winning response text or None}
                             map; None means tie.

    Replies are emitted in ``reply_format`` so the parsing path is exercised.
    """

    def __init__(
        self,
        rule: str = "longer",
        reply_format: str = "scores",
        table: dict[str, str | None] | None = None,
    ):
        if rule not in ("longer", "position-first", "table"):
            raise ValidationError(f"unknown mock judge rule: {rule!r}")
        if reply_format not in REPLY_FORMATS:
            raise ValidationError(f"unknown reply format: {reply_format!r}")
        if rule == "table" and table is None:
            raise ValidationError("table rule needs a verdict table")
        self.rule = rule
        self.reply_format = reply_format
        self.table = table or {}

    def complete(self, prompt: str) -> str:
        match = _BLOCK.search(prompt)
        if match is None:
            raise RemoteServiceError("mock judge could not find response blocks")
        first, second = match.group("first"), match.group("second")
        if self.rule == "longer":
            verdict = (
                JudgeVerdict.A
                if len(first) > len(second)
                else JudgeVerdict.B
                if len(second) > len(first)
                else JudgeVerdict.TIE
            )
        elif self.rule == "position-first":
            verdict = JudgeVerdict.A
        else:
            verdict = self._table_verdict(prompt, first, second)
        return self._format_reply(verdict)

    def _table_verdict(self, prompt: str, first: str, second: str) -> JudgeVerdict:
        for instruction, winner in self.table.items():
            if instruction in prompt:
                if winner is None:
                    return JudgeVerdict.TIE
                if winner in first:
                    return JudgeVerdict.A
                if winner in second:
                    return JudgeVerdict.B
                return JudgeVerdict.TIE
        raise RemoteServiceError("mock judge table has no entry for this prompt")

    def _format_reply(self, verdict: JudgeVerdict) -> str:
        if self.reply_format == "scores":
            scores = {
                JudgeVerdict.A: "9 4",
                JudgeVerdict.B: "4 9",
                JudgeVerdict.TIE: "7 7",
            }[verdict]
            return f"{scores}\nDeterministic mock verdict."
        token = {
            JudgeVerdict.A: "[[A]]",
            JudgeVerdict.B: "[[B]]",
            JudgeVerdict.TIE: "[[C]]",
        }[verdict]
        return f"Deterministic mock verdict: {token}"


# --- the harness -----------------------------------------------------------

def judge_sample(
    sample: EvalSample, judge: JudgeClient, reply_format: str = "scores"
) -> tuple[JudgeVerdict, JudgeVerdict, MatchOutcome]:
    """Run both passes for one sample.

    Returns (pass-1 verdict, raw pass-2 verdict, combined outcome).
    """
    parse = REPLY_FORMATS[reply_format]
    prompt_1 = render_prompt(
        reply_format, sample.instruction, sample.candidate, sample.baseline
    )
    prompt_2 = render_prompt(
        reply_format, sample.instruction, sample.baseline, sample.candidate
    )
    verdict_1 = parse(judge.complete(prompt_1))
    verdict_2_raw = parse(judge.complete(prompt_2))
    outcome = combine_swapped(verdict_1, reorient(verdict_2_raw))
    return verdict_1, verdict_2_raw, outcome


def run_eval(
    test_set: Sequence[EvalSample],
    judge: JudgeClient,
    reply_format: str = "scores",
    concurrency: int = 1,
) -> EvalRunResult:
    """Judge every sample twice, combine, and aggregate.

    A sample whose judge calls fail (after the client's retries) or whose
    replies cannot be parsed is marked SKIPPED and excluded from the
    aggregate counts.  If every sample is skipped there is nothing to
    aggregate and the last error is raised.
    """
    if not test_set:
        raise ValidationError("empty evaluation set")
    if reply_format not in REPLY_FORMATS:
        raise ValidationError(f"unknown reply format: {reply_format!r}")

    def evaluate(indexed: tuple[int, EvalSample]) -> SampleLog:
        index, sample = indexed
        try:
            verdict_1, verdict_2, outcome = judge_sample(sample, judge, reply_format)
        except (RemoteServiceError, VerdictParseError) as exc:
            logger.warning("sample %d skipped: %s", index, exc)
            return SampleLog(
                sample_id=index,
                verdict_pass1="",
                verdict_pass2="",
                outcome="SKIPPED",
                error=str(exc),
            )
        return SampleLog(
            sample_id=index,
            verdict_pass1=verdict_1.value,
            verdict_pass2=verdict_2.value,
            outcome=outcome.value,
        )

    if concurrency > 1:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            samples = list(pool.map(evaluate, enumerate(test_set)))
    else:
        samples = [evaluate(item) for item in enumerate(test_set)]

    outcomes = [
        MatchOutcome(log.outcome) for log in samples if log.outcome != "SKIPPED"
    ]
    n_skipped = len(samples) - len(outcomes)
    if not outcomes:
        raise RemoteServiceError(
            f"all {len(samples)} samples were skipped; last error: "
            f"{samples[-1].error}"
        )
    report = compute_metrics(outcomes)
    logger.info(
        "evaluated %d samples (%d skipped): WS=%.3f WR=%.1f%% QS=%.1f%%",
        report.n_all, n_skipped, report.ws, 100 * report.wr, 100 * report.qs,
    )
    return EvalRunResult(report=report, samples=samples, n_skipped=n_skipped)


# --- persistence -----------------------------------------------------------

def load_eval_samples(path: str | Path) -> list[EvalSample]:
    """Read a JSON array of {instruction, candidate, baseline} objects."""
    try:
        records = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(records, list):
        raise ValidationError(f"{path}: top level must be a JSON array")
    samples = []
    for i, record in enumerate(records):
        try:
            samples.append(
                EvalSample(
                    instruction=record["instruction"],
                    candidate=record["candidate"],
                    baseline=record["baseline"],
                )
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(
                f"{path}: entry {i} needs instruction/candidate/baseline"
            ) from exc
    return samples


def save_sample_log_csv(samples: Sequence[SampleLog], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "verdict_pass1", "verdict_pass2", "outcome"])
        for log in samples:
            writer.writerow(
                [log.sample_id, log.verdict_pass1, log.verdict_pass2, log.outcome]
            )


def save_summary_json(result: EvalRunResult, path: str | Path) -> None:
    summary = result.report.as_dict()
    summary["n_skipped"] = result.n_skipped
    Path(path).write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
