"""Task prompts, constraints and subtasks."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Optional

_SPACE = re.compile(r"\s+")
_TRAILING = re.compile(r"[\s.!?,;:]+$")


def normalize_prompt(text: str) -> str:
    """Lowercase, collapse whitespace, strip trailing punctuation."""
    text = _SPACE.sub(" ", text.strip().lower())
    return _TRAILING.sub("", text)


@dataclass(frozen=True)
class TaskPrompt:
    text: str
    normalized: str = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "normalized", normalize_prompt(self.text))

    def __str__(self) -> str:
        return self.text


def as_prompt(task) -> TaskPrompt:
    return task if isinstance(task, TaskPrompt) else TaskPrompt(str(task))


@dataclass(frozen=True)
class ConstraintSet:
    items: tuple = ()

    def __iter__(self):
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)


class SubtaskKind(enum.Enum):
    ROOM_TO_ROOM = "room_to_room"
    ROOM_TO_OBJECT = "room_to_object"
    OTHER = "other"


@dataclass(frozen=True)
class Subtask:
    prompt: TaskPrompt
    kind: SubtaskKind
    target: Optional[str] = None

    def to_json(self) -> dict:
        return {"prompt": self.prompt.text, "kind": self.kind.value, "target": self.target}
