"""Service and provider configuration: JSON config file plus env overrides.

Environment variables win over the config file, which wins over defaults.
Recognised variables: SW_API_KEY, SW_BASE_URL, SW_CHAT_MODEL, SW_EMBED_MODEL,
SW_PORT, SW_PROVIDER_MODE, SW_INDEX_PATH, SW_CORS_ORIGIN.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .providers import ProviderConfig

PROVIDER_MODES = ("live", "stub")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ServiceConfig:
    port: int = 8080
    provider_mode: str = "stub"
    index_path: str | None = None
    cors_origin: str | None = None

    def __post_init__(self):
        if self.provider_mode not in PROVIDER_MODES:
            raise ConfigError(
                f"provider_mode must be one of {PROVIDER_MODES}, "
                f"got {self.provider_mode!r}")
        if not 0 < self.port < 65536:
            raise ConfigError(f"port out of range: {self.port}")


def _read_config_file(path: str | Path | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a JSON object")
    return data


def load_provider_config(path: str | Path | None = None,
                         env: Mapping[str, str] | None = None) -> ProviderConfig:
    env = os.environ if env is None else env
    data = _read_config_file(path)
    try:
        return ProviderConfig(
            base_url=env.get("SW_BASE_URL") or data.get("base_url")
            or ProviderConfig.base_url,
            api_key=env.get("SW_API_KEY") or data.get("api_key") or "",
            chat_model=env.get("SW_CHAT_MODEL") or data.get("chat_model")
            or ProviderConfig.chat_model,
            embed_model=env.get("SW_EMBED_MODEL") or data.get("embed_model")
            or ProviderConfig.embed_model,
            stt_model=data.get("stt_model") or ProviderConfig.stt_model,
            tts_model=data.get("tts_model") or ProviderConfig.tts_model,
            timeout=float(data.get("timeout", ProviderConfig.timeout)),
            max_retries=int(data.get("max_retries", ProviderConfig.max_retries)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid provider configuration: {exc}") from exc


def load_service_config(path: str | Path | None = None,
                        env: Mapping[str, str] | None = None) -> ServiceConfig:
    env = os.environ if env is None else env
    data = _read_config_file(path)
    try:
        port = int(env.get("SW_PORT") or data.get("port", 8080))
    except ValueError as exc:
        raise ConfigError(f"invalid port: {exc}") from exc
    return ServiceConfig(
        port=port,
        provider_mode=env.get("SW_PROVIDER_MODE") or data.get("provider_mode", "stub"),
        index_path=env.get("SW_INDEX_PATH") or data.get("index_path"),
        cors_origin=env.get("SW_CORS_ORIGIN") or data.get("cors_origin"),
    )
