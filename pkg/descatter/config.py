import typing as T
import json
import math
import pathlib
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from pydantic import BaseModel, ConfigDict, ValidationError

from descatter.errors import ConfigError, FormatError

ConfigType = T.TypeVar("ConfigType", bound="Config")

BARE_KEY = re.compile(r"^[A-Za-z0-9_-]+$")


class Config(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    @classmethod
    def parse(cls: T.Type[ConfigType], data: T.Mapping[str, T.Any]) -> ConfigType:
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            problems = [
                {"field": ".".join(str(p) for p in err["loc"]), "reason": err["msg"]}
                for err in e.errors()
            ]
            missing = [p["field"] for p in problems if p["reason"] == "Field required"]
            raise ConfigError(
                f"Invalid {cls.__name__}: "
                + ", ".join(f"{p['field']} ({p['reason']})" for p in problems),
                extensions={"problems": problems, "missing": missing},
                original_error=e,
            ) from e

    def to_toml(self) -> str:
        return dumps_toml(self.model_dump(mode="json"))


def _format_key(key: str) -> str:
    return key if BARE_KEY.match(key) else json.dumps(key, ensure_ascii=False)


def _format_value(value: T.Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        text = repr(value)
        # toml floats need a fractional part or an exponent
        return text if any(c in text for c in ".en") else f"{text}.0"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    raise TypeError(f"Cannot write {type(value).__name__} as a toml value.")


def _flatten(
    data: T.Mapping[str, T.Any], prefix: tuple[str, ...]
) -> T.Iterator[tuple[tuple[str, ...], T.Any]]:
    for key, value in data.items():
        if value is None:
            continue
        if isinstance(value, T.Mapping):
            yield from _flatten(value, (*prefix, key))
        else:
            yield (*prefix, key), value


def dumps_toml(data: T.Mapping[str, T.Any]) -> str:
    """flat `dotted.key = value` lines, in insertion order"""
    lines = [
        ".".join(_format_key(k) for k in keys) + " = " + _format_value(value)
        for keys, value in _flatten(data, ())
    ]
    return "\n".join(lines) + "\n"


def loads_toml(text: str, *, source: str = "<string>") -> dict[str, T.Any]:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise FormatError(
            f"Could not parse {source}: {e}",
            extensions={"path": source},
            original_error=e,
        ) from e


def read_toml_file(path: pathlib.Path) -> dict[str, T.Any]:
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise FormatError(
            f"Could not read {path}: {e}", extensions={"path": str(path)}, original_error=e
        ) from e
    return loads_toml(text, source=str(path))


__all__ = ["Config", "dumps_toml", "loads_toml", "read_toml_file"]
