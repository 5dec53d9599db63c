"""Run manifests: what was run, with which seed, and when."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .. import __version__
from ..swarm.config import ScenarioConfig
from .schema import config_digest


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


@dataclass
class RunManifest:
    config_digest: str
    seed: int
    version: str
    numerics: dict
    started: str
    finished: str | None = None
    command: str = ""
    extra: dict = field(default_factory=dict)

    @classmethod
    def start(cls, config: ScenarioConfig, command: str, seed: int | None = None) -> "RunManifest":
        num = config.numerics
        return cls(
            config_digest=config_digest(config),
            seed=config.seed if seed is None else seed,
            version=__version__,
            numerics={"dt": num.dt, "horizon": num.horizon, "stride": num.stride, "max_jumps": num.max_jumps},
            started=_now(),
            command=command,
        )

    def finish(self, **extra) -> "RunManifest":
        self.finished = _now()
        self.extra.update(extra)
        return self

    def matches(self, config: ScenarioConfig) -> bool:
        """True when ``config`` serializes to the recorded digest."""
        return config_digest(config) == self.config_digest

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))
