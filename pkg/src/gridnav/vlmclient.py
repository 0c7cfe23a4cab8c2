"""Remote decision backend over a chat-completions style HTTP endpoint.

The request carries the prompt text with two embedded images, the rendered
scene graph and the first-person patch. Only ``choices[0].message.content`` of
the reply is read, and the first action phrase in it wins.
"""

from __future__ import annotations

import base64
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import httpx

from .backends import DecisionContext, Mode
from .errors import ProtocolError, TransportError, UnparseableActionError
from .world import Action

log = logging.getLogger(__name__)

API_KEY_ENV = "VLM_API_KEY"
IMAGE_MEDIA_TYPE = "image/x-portable-pixmap"
SCENE_GRAPH_SLOT = "<Scene Graph>"
OBSERVATION_SLOT = "<Visual Observation>"
RESPONSE_LINE = "Response: <One of the four actions>"

SYSTEM_TEXT = (
    "You control a robot on a grid. "
    "Reply with exactly one of: move forward, turn left, turn right, stop."
)

EXPLORATION_HEADER = (
    "Prompt: Generate simple step-by-step navigation instructions for a robot exploring an "
    "unknown environment. The robot can only perform the following actions: move forward, "
    "turn left, turn right, and stop."
)
EXPLORATION_CONSTRAINTS = (
    "Use only the allowed actions.",
    "Return a single action.",
    "Stop when exploration of the visible environment is complete or when further movement is unsafe.",
    "Avoid visiting explored areas",
)

DEPLOYMENT_HEADER = (
    "Prompt: Move from your start location to a goal location using the provided top-down "
    "scene graph and camera view."
)
DEPLOYMENT_CONSTRAINTS = (
    "Use only the allowed actions: move forward, turn left, turn right, stop.",
    "Return a single action.",
)
LEGEND = (
    "SQUARE: Your starting position.",
    "BLUE ARROW: Your current position & heading.",
    "BLUE LINE: Your trajectory so far.",
    "GRAY AREAS: Navigable floor where you can walk.",
    "WHITE AREAS: Obstacles or walls you cannot walk through.",
)
# only the first rule belongs to the reference template; the others are local additions
NAVIGATION_RULES = (
    "Use a top-down scene graph to determine the direction to move in.",
    "Only walk on gray cells; never move forward into a white cell.",
    "If the cell ahead is white, turn toward the open side instead.",
    "Prefer the shortest gray route toward the goal.",
    "Stop once you are within 3 meters of the goal.",
)


def _bullets(items: Sequence[str]) -> list[str]:
    return [f"- {item}" for item in items]


@dataclass(frozen=True)
class PromptBundle:
    mode: Mode
    text: str
    graph_image: bytes = field(repr=False)
    fpv_image: bytes = field(repr=False)
    system_text: str = SYSTEM_TEXT

    @property
    def constraint_block(self) -> str:
        lines = self.text.split("\n")
        start = lines.index("Constraints:")
        end = lines.index("", start)
        return "\n".join(lines[start:end])

    def messages(self) -> list[dict]:
        """Chat messages with the two image slots replaced by inline images."""
        parts = []
        images = {SCENE_GRAPH_SLOT: self.graph_image, OBSERVATION_SLOT: self.fpv_image}
        for chunk in re.split(f"({re.escape(SCENE_GRAPH_SLOT)}|{re.escape(OBSERVATION_SLOT)})", self.text):
            if chunk in images:
                parts.append(
                    {
                        "type": "image",
                        "media_type": IMAGE_MEDIA_TYPE,
                        "data_base64": base64.b64encode(images[chunk]).decode("ascii"),
                    }
                )
            elif chunk.strip():
                parts.append({"type": "text", "text": chunk.strip("\n")})
        return [
            {"role": "system", "content": [{"type": "text", "text": self.system_text}]},
            {"role": "user", "content": parts},
        ]


def _check_images(graph_image: bytes, fpv_image: bytes) -> None:
    if not graph_image or not fpv_image:
        raise ValueError("both images are required")


def build_exploration_prompt(constraints: Sequence[str], graph_image: bytes, fpv_image: bytes) -> PromptBundle:
    _check_images(graph_image, fpv_image)
    lines = [EXPLORATION_HEADER, "", "Constraints:"]
    lines += _bullets(list(EXPLORATION_CONSTRAINTS) + list(constraints))
    lines += ["", SCENE_GRAPH_SLOT, "", OBSERVATION_SLOT, "", RESPONSE_LINE, ""]
    return PromptBundle(Mode.EXPLORATION, "\n".join(lines), graph_image, fpv_image)


def build_deployment_prompt(
    constraints: Sequence[str],
    graph_image: bytes,
    fpv_image: bytes,
    task: str,
    subtask: Optional[str] = None,
) -> PromptBundle:
    _check_images(graph_image, fpv_image)
    lines = [DEPLOYMENT_HEADER, "", f"Task: {task}"]
    if subtask:
        lines.append(f"Current subtask: {subtask}")
    lines += ["", "Constraints:"] + _bullets(list(DEPLOYMENT_CONSTRAINTS) + list(constraints))
    lines += ["", SCENE_GRAPH_SLOT, ""] + _bullets(LEGEND)
    lines += ["", OBSERVATION_SLOT, "", "NAVIGATION RULES:"] + _bullets(NAVIGATION_RULES)
    lines += ["", RESPONSE_LINE, ""]
    return PromptBundle(Mode.DEPLOYMENT, "\n".join(lines), graph_image, fpv_image)


# -- reply parsing -----------------------------------------------------------

_ACTION_RE = re.compile(r"\b(move\s+forward|turn\s+left|turn\s+right|stop)\b", re.IGNORECASE)
_PHRASES = {
    "move forward": Action.MOVE_FORWARD,
    "turn left": Action.TURN_LEFT,
    "turn right": Action.TURN_RIGHT,
    "stop": Action.STOP,
}


def parse_action(reply) -> Action:
    """First action phrase in ``reply`` wins; anything else is unparseable."""
    if not isinstance(reply, str):
        raise UnparseableActionError(repr(reply))
    m = _ACTION_RE.search(reply)
    if m is None:
        raise UnparseableActionError(reply)
    return _PHRASES[" ".join(m.group(1).lower().split())]


# -- transport ---------------------------------------------------------------


@dataclass
class VlmConfig:
    endpoint: str
    model: str = "gpt-4.1"
    api_key: Optional[str] = field(default=None, repr=False)
    timeout_s: float = 30.0
    max_retries: int = 3
    price_per_call_usd: float = 0.0

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @classmethod
    def from_env(cls, endpoint: str, **kwargs) -> "VlmConfig":
        return cls(endpoint, api_key=os.environ.get(API_KEY_ENV), **kwargs)


def backoff_delays(retries: int) -> list[float]:
    return [float(2**i) for i in range(retries)]


class VlmClient:
    """Synchronous client; safe to share between threads."""

    def __init__(self, cfg: VlmConfig, http: Optional[httpx.Client] = None, sleep: Callable = time.sleep):
        self.cfg = cfg
        self._http = http or httpx.Client(timeout=cfg.timeout_s)
        self._sleep = sleep
        self._lock = threading.Lock()
        self.calls = 0
        self.attempts = 0
        self.cost_usd = 0.0

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.cfg.api_key:
            headers["Authorization"] = f"Bearer {self.cfg.api_key}"
        return headers

    def _post(self, body: dict) -> httpx.Response:
        delays = backoff_delays(self.cfg.max_retries)
        for attempt in range(self.cfg.max_retries + 1):
            with self._lock:
                self.attempts += 1
            try:
                return self._http.post(self.cfg.endpoint, json=body, headers=self._headers(), timeout=self.cfg.timeout_s)
            except httpx.TransportError as exc:
                if attempt == self.cfg.max_retries:
                    raise TransportError(f"{self.cfg.endpoint}: {exc!r} after {attempt + 1} attempts") from exc
                log.warning("transport error %r, retrying in %.0fs", exc, delays[attempt])
                self._sleep(delays[attempt])
        raise AssertionError("unreachable")

    def complete(self, bundle: PromptBundle) -> str:
        resp = self._post({"model": self.cfg.model, "messages": bundle.messages()})
        if not 200 <= resp.status_code < 300:
            raise ProtocolError(f"HTTP {resp.status_code} from {self.cfg.endpoint}")
        with self._lock:
            self.calls += 1
            self.cost_usd += self.cfg.price_per_call_usd
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed completion body: {exc!r}") from exc
        if not isinstance(content, str):
            raise ProtocolError("completion content is not a string")
        return content

    def decide(self, bundle: PromptBundle) -> Action:
        return parse_action(self.complete(bundle))


def decide(cfg: VlmConfig, bundle: PromptBundle, sleep: Callable = time.sleep) -> Action:
    with VlmClient(cfg, sleep=sleep) as client:
        return client.decide(bundle)


class VlmBackend:
    """Decision backend that renders the context into a prompt and asks the endpoint."""

    def __init__(self, client: VlmClient):
        self.client = client

    def bundle(self, ctx: DecisionContext) -> PromptBundle:
        if ctx.mode is Mode.EXPLORATION:
            return build_exploration_prompt(ctx.constraints, ctx.graph_image(), ctx.view_image())
        sub = getattr(getattr(ctx.subtask, "prompt", None), "text", None)
        return build_deployment_prompt(ctx.constraints, ctx.graph_image(), ctx.view_image(), ctx.task or "", sub)

    def decide(self, ctx: DecisionContext) -> Action:
        return self.client.decide(self.bundle(ctx))
