"""Search-and-rescue mission engine: strategy beliefs, guardrails and deterministic replays."""

from __future__ import annotations

import functools
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

_bundled = Path(__file__).with_name("data")
if _bundled.is_dir():
    os.environ.setdefault("SARGUARD_DATA_DIR", str(_bundled))

from . import _core  # noqa: E402

__version__ = _core.__version__

STRATEGIES = ("trail", "shelter", "waterways", "contour", "region")


class SarError(ValueError):
    """An engine error. `code` is one of parse, validation, inference, not_found,
    conflict, invalid_transition, version, integrity, io."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


def _translated(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _core.Error as e:
            code, message = e.args if len(e.args) == 2 else ("io", str(e))
            raise SarError(code, message) from None

    return wrapper


@dataclass(frozen=True)
class Run:
    summary: dict[str, Any]
    replay: str

    @property
    def outcome(self) -> str:
        return self.summary["outcome"]

    @property
    def events(self) -> list[dict[str, Any]]:
        lines = [json.loads(line) for line in self.replay.splitlines() if line]
        return [line for line in lines if line.get("type", "event") == "event"]


def data_dir() -> Path:
    return Path(_core.data_dir())


def scenario_path(name: str) -> Path:
    return data_dir() / "scenarios" / f"{name}.json"


@_translated
def infer(evidence: Mapping[str, str], network: Mapping[str, Any] | None = None) -> dict[str, float]:
    """Posterior over the five strategies. Uses the shipped network unless one is given."""
    return json.loads(_core.infer(json.dumps(dict(evidence)), None if network is None else json.dumps(network)))


@_translated
def update(belief: Mapping[str, float], target: str, gamma: float) -> dict[str, float]:
    """Multiplies `target` by (1 + gamma) and renormalizes."""
    return json.loads(_core.update(json.dumps(dict(belief)), target, gamma))


@_translated
def alpha(relevance: str, cv_confidence: str, interp_confidence: str, lam: float = 0.5, mu: float = 0.5) -> float:
    return _core.alpha(relevance, cv_confidence, interp_confidence, lam, mu)


@_translated
def entropy(belief: Mapping[str, float]) -> float:
    """Base-2 entropy divided by log2(5)."""
    return _core.entropy(json.dumps(dict(belief)))


@_translated
def verdict(belief: Mapping[str, float], current: str, proposed: str, threshold: float = 0.85,
            delta: float = 0.05) -> dict[str, Any]:
    return json.loads(_core.verdict(json.dumps(dict(belief)), current, proposed, threshold, delta))


@_translated
def run(scenario: str | os.PathLike[str], policy: str = "always-approve", seed: int | None = None,
        config: Mapping[str, Any] | None = None, ticks_max: int | None = None, mission_id: str | None = None) -> Run:
    """Runs a mission headless under a scripted operator policy."""
    summary, replay = _core.run(os.fspath(scenario), policy, seed, None if config is None else json.dumps(config),
                                ticks_max, mission_id)
    return Run(json.loads(summary), replay)


@_translated
def verify(replay: str) -> dict[str, Any]:
    return json.loads(_core.verify(replay))


@_translated
def plot_csv(replay: str) -> str:
    return _core.plot_csv(replay)


@_translated
def snapshot(replay: str, seq: int) -> dict[str, Any]:
    return json.loads(_core.snapshot(replay, seq))


__all__ = [
    "STRATEGIES",
    "Run",
    "SarError",
    "alpha",
    "data_dir",
    "entropy",
    "infer",
    "plot_csv",
    "run",
    "scenario_path",
    "snapshot",
    "update",
    "verdict",
    "verify",
]
