"""Run configuration: one flat key-value file (YAML or JSON), overridable by CLI flags."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from .core import DEFAULT_MAX_SUMMARY_LINES
from .errors import InputError
from .judge import ChatCompletionBackend, Judge, MockBackend, ResponseCache, TokenBucket
from .promptkit import DEFAULT_TRANSCRIPT_CHAR_BUDGET, MAX_FACTS_RANGE, PromptKit
from .tournament import Mode, OrderPolicy


@dataclass(frozen=True)
class Config:
    judge_backend: str = "mock"
    endpoint: str = ""
    judge_model: str = "mock-lexical"
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_output_tokens: int = 4096
    max_retries: int = 3
    requests_per_second: float = 0.0
    concurrency: int = 4
    cache_dir: str = ""
    max_key_facts: int = 16
    mode: str = Mode.SHARED_EXTRACTION.value
    order_policy: str = OrderPolicy.BOTH_ORDERS.value
    epsilon: float = 0.02
    k_factor: float = 32.0
    initial_rating: float = 1000.0
    permutations: int = 100
    seed: int = 0
    tie_policy: str = "exact"
    mock_threshold: float = 0.6
    template_dir: str = ""
    example_facts: str = ""
    reproduce_ket_typo: bool = False
    transcript_char_budget: int = DEFAULT_TRANSCRIPT_CHAR_BUDGET
    max_summary_lines: int = DEFAULT_MAX_SUMMARY_LINES
    human_model_id: str = "human"

    def __post_init__(self) -> None:
        problems = []
        if self.judge_backend not in ("mock", "remote"):
            problems.append(f"judge_backend must be mock or remote, got {self.judge_backend!r}")
        if self.judge_backend == "remote" and not self.endpoint:
            problems.append("remote judge_backend needs an endpoint")
        if self.max_key_facts not in MAX_FACTS_RANGE:
            problems.append(f"max_key_facts must be in 1..100, got {self.max_key_facts}")
        if self.mode not in {m.value for m in Mode}:
            problems.append(f"unknown mode {self.mode!r}")
        if self.order_policy not in {p.value for p in OrderPolicy}:
            problems.append(f"unknown order_policy {self.order_policy!r}")
        if self.tie_policy not in ("exact", "overlap"):
            problems.append(f"unknown tie_policy {self.tie_policy!r}")
        if not 0 <= self.epsilon < 1:
            problems.append(f"epsilon must be in [0, 1), got {self.epsilon}")
        if self.k_factor <= 0:
            problems.append("k_factor must be positive")
        if self.permutations < 1:
            problems.append("permutations must be >= 1")
        if self.concurrency < 1:
            problems.append("concurrency must be >= 1")
        if self.temperature < 0:
            problems.append("temperature must be >= 0")
        if self.max_retries < 0:
            problems.append("max_retries must be >= 0")
        if problems:
            raise InputError("invalid config: " + "; ".join(problems))

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> Config:
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise InputError(f"unknown config keys: {unknown}")
        values = {}
        for key, value in data.items():
            kind = type(known[key].default)
            if value is None:
                continue
            try:
                if kind is bool and not isinstance(value, bool):
                    raise TypeError
                values[key] = value if kind is bool else kind(value)
            except (TypeError, ValueError) as exc:
                raise InputError(f"config key {key!r}: cannot read {value!r} as {kind.__name__}") from exc
        return cls(**values)

    @classmethod
    def load(cls, path: str | Path | None) -> Config:
        if path is None:
            return cls()
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise InputError(f"config {path} must be a key-value mapping")
        return cls.from_mapping(data)

    def override(self, **values: Any) -> Config:
        merged = {**self.to_dict(), **{k: v for k, v in values.items() if v is not None}}
        return Config.from_mapping(merged)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def build_judge(config: Config) -> Judge:
    if config.judge_backend == "mock":
        backend = MockBackend(threshold=config.mock_threshold)
    else:
        backend = ChatCompletionBackend(config.endpoint, config.judge_model, config.api_key_env)
    limiter = TokenBucket(config.requests_per_second) if config.requests_per_second > 0 else None
    return Judge(
        backend,
        model_id=config.judge_model,
        cache=ResponseCache(config.cache_dir or None),
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
        max_retries=config.max_retries,
        max_in_flight=config.concurrency,
        rate_limiter=limiter,
    )


def build_kit(config: Config) -> PromptKit:
    return PromptKit(
        Path(config.template_dir) if config.template_dir else None,
        Path(config.example_facts) if config.example_facts else None,
        reproduce_ket_typo=config.reproduce_ket_typo,
        transcript_char_budget=config.transcript_char_budget,
    )
