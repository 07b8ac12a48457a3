"""Run configuration: defaults < config file < command-line flags.

The config file is INI: one section per subcommand, option names equal to
flag names with dashes replaced by underscores.  Unknown sections or keys
are errors, not warnings.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from typing import Any, Callable


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Opt:
    name: str  # underscore form; flag is --name-with-dashes
    cast: Callable[[str], Any] | None  # None for store_true flags
    default: Any
    help: str

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


def parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {raw!r}")


def load_config_file(path: str, registry: dict[str, list[Opt]]) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser()
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigError(f"config file not found: {path}")
    out: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in registry:
            raise ConfigError(f"unknown config section [{section}]")
        known = {o.name for o in registry[section]}
        for key, value in parser.items(section):
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            out.setdefault(section, {})[key] = value
    return out


def resolve(section: str, opts: list[Opt], cli_values: dict[str, Any],
            file_values: dict[str, dict[str, str]]) -> dict[str, Any]:
    """Apply the precedence order to produce the effective option mapping."""
    effective: dict[str, Any] = {}
    section_file = file_values.get(section, {})
    for opt in opts:
        value = opt.default
        if opt.name in section_file:
            raw = section_file[opt.name]
            cast = opt.cast if opt.cast is not None else parse_bool
            try:
                value = cast(raw)
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"[{section}] {opt.name}: bad value {raw!r} ({exc})") from exc
        cli = cli_values.get(opt.name)
        if cli is not None and cli is not False:
            value = cli
        effective[opt.name] = value
    return effective
