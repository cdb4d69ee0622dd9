# -*- coding: utf-8 -*-
"""
Shared context for the wheel-load bench.
This context is passed to every bench command, providing access to:
- The validated run configuration
- Resolved dataset / geometry / output paths (with environment overrides)
- The run-event log
"""

import json
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Optional

from pydantic import ValidationError

from dbpnet.kinematics import SuspensionGeometry, load_geometry
from dbpnet.models import RunConfig
from dbpnet.validation import BenchIoError, ConfigError, format_validation_report, has_critical_errors, validate_bench


ENV_GEOMETRY = "DBPNET_GEOMETRY"
ENV_DATASET_DIR = "DBPNET_DATASET_DIR"
ENV_OUTPUT_DIR = "DBPNET_OUTPUT_DIR"


def atomic_write_text(path: Path, text: str) -> None:
    """Write text through a temp file in the same directory, then rename over the target."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise BenchIoError(f"Cannot write {path}: {exc}") from exc


def read_run_config(path: Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise BenchIoError(f"Cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config {path} is not valid JSON: {exc}") from exc
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"Config {path} failed schema validation:\n{exc}") from exc


@dataclass
class BenchContext:
    """
    Shared context object for all bench commands.

    Relative paths in the config resolve against the config file's directory;
    DBPNET_* environment variables override them.
    """

    config: RunConfig = field(default_factory=RunConfig)
    base_dir: Path = field(default_factory=Path.cwd)
    verbose: bool = True
    output_override: Optional[Path] = None

    @classmethod
    def from_file(
        cls,
        config_path,
        seed: Optional[int] = None,
        output_dir: Optional[str] = None,
        verbose: bool = True,
    ) -> "BenchContext":
        config_path = Path(config_path).resolve()
        config = read_run_config(config_path)
        if seed is not None:
            config = config.model_copy(update={
                "train": config.train.model_copy(update={"seed": seed}),
                "noise": config.noise.model_copy(update={"seed": seed}),
            })
        ctx = cls(
            config=config,
            base_dir=config_path.parent,
            verbose=verbose,
            output_override=Path(output_dir).resolve() if output_dir else None,
        )
        results = validate_bench(config, ctx.geometry_path, ctx.output_dir)
        if has_critical_errors(results):
            raise ConfigError(format_validation_report(results))
        return ctx

    # ========== Paths ==========

    def _resolve(self, env_name: str, configured: str) -> Path:
        value = os.environ.get(env_name) or configured
        path = Path(value)
        return path if path.is_absolute() else (self.base_dir / path).resolve()

    @property
    def geometry_path(self) -> Path:
        return self._resolve(ENV_GEOMETRY, self.config.paths.geometry)

    @property
    def dataset_dir(self) -> Path:
        return self._resolve(ENV_DATASET_DIR, self.config.paths.dataset_dir)

    @property
    def output_dir(self) -> Path:
        if self.output_override is not None:
            return self.output_override
        return self._resolve(ENV_OUTPUT_DIR, self.config.paths.output_dir)

    @property
    def checkpoint_dir(self) -> Path:
        return self.output_dir / "checkpoints"

    @property
    def plot_dir(self) -> Path:
        return self.output_dir / "plots"

    @property
    def events_path(self) -> Path:
        return self.output_dir / "logs" / "events.jsonl"

    def load_geometry(self) -> SuspensionGeometry:
        return load_geometry(self.geometry_path)

    # ========== Event Log ==========

    def log_event(self, event_type: str, stage: str, payload: dict) -> None:
        """Append one event to the run log (events.jsonl)."""
        record: dict[str, Any] = {
            "event_type": event_type,
            "stage": stage,
            "payload": payload,
            "timestamp": datetime.now().isoformat(),
        }
        try:
            self.events_path.parent.mkdir(parents=True, exist_ok=True)
            with self.events_path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record, sort_keys=True, default=str) + "\n")
        except OSError as exc:
            raise BenchIoError(f"Cannot append to {self.events_path}: {exc}") from exc

    def read_events(self) -> list[dict]:
        if not self.events_path.exists():
            return []
        with self.events_path.open(encoding="utf-8") as handle:
            return [json.loads(line) for line in handle if line.strip()]
