"""Run configuration: an INI file with flat sections, overridable by CLI
flags. The live-endpoint credential is never stored here, only the name of
the environment variable that holds it."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, Optional

from .errors import ConfigError

# config key -> (section, type)
_LAYOUT = {
    "requirements_path": ("inputs", str),
    "matrix_path": ("inputs", str),
    "backend": ("llm", str),
    "mock_fixture": ("llm", str),
    "endpoint_url": ("llm", str),
    "completion_model": ("llm", str),
    "embedding_model": ("llm", str),
    "credential_env_var": ("llm", str),
    "cache_dir": ("llm", str),
    "temperature": ("llm", float),
    "concurrency": ("llm", int),
    "max_retries": ("llm", int),
    "timeout": ("llm", float),
    "chunk_size": ("extraction", int),
    "strict": ("extraction", bool),
    "linkage": ("clustering", str),
    "merge_threshold": ("clustering", float),
    "tie_break": ("optimizer", str),
    "out_dir": ("output", str),
}


@dataclass(frozen=True)
class RunConfig:
    requirements_path: Optional[str] = None
    matrix_path: Optional[str] = None
    backend: str = "mock"
    mock_fixture: Optional[str] = None
    endpoint_url: Optional[str] = None
    completion_model: str = "gpt-4o"
    embedding_model: str = "text-embedding-3-small"
    credential_env_var: str = "OPENAI_API_KEY"
    cache_dir: Optional[str] = None
    temperature: float = 0.0
    concurrency: int = 4
    max_retries: int = 2
    timeout: float = 60.0
    chunk_size: int = 20
    strict: bool = False
    linkage: str = "average"
    merge_threshold: float = 0.3
    tie_break: str = "first-listed"
    out_dir: Optional[str] = None
    synonyms: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        path = Path(path)
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        values = {}
        for key, (section, typ) in _LAYOUT.items():
            if not parser.has_option(section, key):
                continue
            try:
                if typ is bool:
                    values[key] = parser.getboolean(section, key)
                else:
                    values[key] = typ(parser.get(section, key))
            except ValueError as exc:
                raise ConfigError(f"{path}: [{section}] {key}: {exc}") from exc
        if parser.has_section("synonyms"):
            values["synonyms"] = dict(parser.items("synonyms"))
        known = {s for s, _ in _LAYOUT.values()} | {"synonyms"}
        extra = [s for s in parser.sections() if s not in known]
        if extra:
            raise ConfigError(f"{path}: unknown section(s) {extra}")
        # relative paths are resolved against the config file's directory
        for key in ("requirements_path", "matrix_path", "mock_fixture", "cache_dir", "out_dir"):
            if key in values and not Path(values[key]).is_absolute():
                values[key] = str(path.parent / values[key])
        return cls(**values)

    def override(self, **kw) -> "RunConfig":
        """Return a copy with every non-None keyword applied."""
        names = {f.name for f in fields(self)}
        bad = [k for k in kw if k not in names]
        if bad:
            raise ConfigError(f"unknown config field(s) {bad}")
        return dataclasses.replace(self, **{k: v for k, v in kw.items() if v is not None})

    def check(self, need_requirements: bool = True) -> None:
        if self.backend not in ("mock", "live"):
            raise ConfigError(f"backend must be 'mock' or 'live', got {self.backend!r}")
        paths = [("matrix_path", self.matrix_path)]
        if need_requirements:
            paths.append(("requirements_path", self.requirements_path))
        if self.backend == "mock":
            paths.append(("mock_fixture", self.mock_fixture))
        elif not self.endpoint_url or not self.credential_env_var:
            raise ConfigError("live backend needs endpoint_url and credential_env_var")
        for name, p in paths:
            if not p:
                raise ConfigError(f"{name} is not set")
            if not Path(p).is_file():
                raise ConfigError(f"{name}: {p} does not exist or is not a file")
        if self.chunk_size < 1:
            raise ConfigError("chunk_size must be >= 1")
