"""Flat ``key = value`` configuration files.

Blank lines and lines starting with ``#`` are ignored. Keys are case
insensitive; unknown keys are rejected so typos do not pass silently.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigurationError
from .field import PRIME_60, PRIME_89, next_prime

LOG_ENV = "COESEARCH_LOG"


@dataclass(frozen=True)
class Settings:
    modulus_bits: int = 89
    backend: str = "oracle"
    lwe_dimension: int = 32
    noise_bound: int = 8
    lam: int = 40
    f_p: int = 16
    eta: int = 2
    tau: int = 40
    mu: int = 16
    hash_seed: int = 0
    key_seed: int = 0
    salted: bool = True

    @property
    def modulus(self) -> int:
        if self.modulus_bits == 89:
            return PRIME_89
        if self.modulus_bits == 60:
            return PRIME_60
        return next_prime(1 << self.modulus_bits)


_ALIASES = {"lambda": "lam"}


def parse_settings(text: str, base: Settings | None = None) -> Settings:
    base = base if base is not None else Settings()
    kinds = {f.name: f.type for f in fields(Settings)}
    updates: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key = _ALIASES.get(key.strip().lower(), key.strip().lower())
        value = value.strip()
        if key not in kinds:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        kind = kinds[key]
        try:
            if kind in ("bool", bool):
                if value.lower() not in ("1", "0", "true", "false", "yes", "no"):
                    raise ValueError(value)
                updates[key] = value.lower() in ("1", "true", "yes")
            elif kind in ("int", int):
                updates[key] = int(value, 0)
            else:
                updates[key] = value
        except ValueError:
            raise ConfigurationError(f"line {lineno}: bad value {value!r} for {key}") from None
    return replace(base, **updates)


def load_settings(path: str | Path | None) -> Settings:
    if path is None:
        return Settings()
    return parse_settings(Path(path).read_text())


def parse_flat(text: str) -> dict[str, str]:
    """Untyped ``key = value`` pairs, for benchmark specs."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        out[key.strip().lower()] = value.strip()
    return out


def configure_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
