import datetime
import json
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional


@dataclass
class RunManifest:
    """Provenance of one CLI run: config hash, version, seeds and timings."""
    command: str = None
    config_hash: str = None
    toolkit_version: str = None
    seeds: Dict[str, int] = field(default_factory=dict)
    config_path: Optional[str] = None
    started_at: datetime.datetime = None
    wall_clock_s: float = 0.0
    stage_timings: Dict[str, float] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    status: str = "running"
    id: int = None

    def __post_init__(self):
        """Initialize default values if not provided."""
        if self.started_at is None:
            self.started_at = datetime.datetime.now()
        self._clock = time.perf_counter()

    @contextmanager
    def stage(self, name: str):
        """Accumulate the wall-clock time spent inside the block under ``name``."""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.stage_timings[name] = self.stage_timings.get(name, 0.0) + time.perf_counter() - start

    def finish(self, status: str):
        self.status = status
        self.wall_clock_s = time.perf_counter() - self._clock

    @property
    def filename(self) -> str:
        return f"manifest_{self.command}.json"

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["started_at"] = self.started_at.strftime("%Y-%m-%d %H:%M:%S")
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)
