from __future__ import annotations
import json
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterator
from version import __version__


@dataclass
class RunManifest:
    """
    Record of one CLI run: what was asked, with which effective settings, and how long each phase
    took. Output files point back to the manifest that produced them.
    """

    command: str
    dataset: str
    config: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    version: str = __version__
    timings: Dict[str, float] = field(default_factory=dict)

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def write(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
