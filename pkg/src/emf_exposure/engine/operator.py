"""Operator port for the three antenna-pointing steps.

The engine only asks `confirm(step, prompt)`; the CLI binds it to a terminal,
tests and scripted scenarios bind it to a responder.
"""

from __future__ import annotations

import sys
from typing import Callable, Mapping, Protocol, TextIO

PROMPTS = {
    "M1": "M1: point the directive antenna towards the RBS, then type ok",
    "M2": "M2: point the directive antenna towards the smartphone (0.25 m away), then type ok",
    "M3": "M3: point the directive antenna back towards the RBS, then type ok",
}

# where the antenna points once each step is confirmed
ANTENNA_AFTER = {"M1": "RBS", "M2": "UE", "M3": "RBS"}


class Operator(Protocol):
    def confirm(self, step: str, prompt: str) -> bool: ...


class StdinOperator:
    """Prints the prompt and waits for a literal ``ok`` line."""

    def __init__(self, stdin: TextIO | None = None, stdout: TextIO | None = None):
        self.stdin = stdin or sys.stdin
        self.stdout = stdout or sys.stdout

    def confirm(self, step: str, prompt: str) -> bool:
        print(prompt, file=self.stdout, flush=True)
        line = self.stdin.readline()
        return line.strip().lower() == "ok"


class ScriptedOperator:
    """Answers from a mapping (default: confirm everything) and records what was asked."""

    def __init__(self, answers: Mapping[str, bool] | None = None):
        self.answers = dict(answers or {})
        self.asked: list[str] = []

    def confirm(self, step: str, prompt: str) -> bool:
        self.asked.append(step)
        return self.answers.get(step, True)


class FollowingOperator:
    """Wraps an operator and runs `on_confirm(step)` after each accepted step.

    With a simulator, this is where the antenna actually gets re-pointed.
    """

    def __init__(self, inner: Operator, on_confirm: Callable[[str], None]):
        self.inner = inner
        self.on_confirm = on_confirm

    def confirm(self, step: str, prompt: str) -> bool:
        ok = self.inner.confirm(step, prompt)
        if ok:
            self.on_confirm(step)
        return ok


def ask(operator: Operator | None, step: str) -> bool:
    if operator is None:
        return True
    return operator.confirm(step, PROMPTS[step])
