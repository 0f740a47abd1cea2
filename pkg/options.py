"""
Option-string parsing
Grammar shared by fields, domains, test functions and changes of variables:
``name:key=value:key=value``. Values are ints, floats, comma-separated float
vectors or bare words.
"""
from typing import Dict, Tuple, Any

from errors import ConfigError


def parse_value(raw: str) -> Any:
    """Parse a single option value"""
    text = raw.strip()
    if "," in text:
        try:
            return tuple(float(part) for part in text.split(",") if part.strip())
        except ValueError:
            return text
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_vector(raw: str, key: str = "a") -> Tuple[float, ...]:
    """
    Parse ``x,y[,z]`` into a float tuple

    Raises:
        ConfigError: on non-numeric components
    """
    try:
        values = tuple(float(part) for part in str(raw).split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"Malformed vector for '{key}': {raw!r}", key=key)
    if not values:
        raise ConfigError(f"Empty vector for '{key}'", key=key)
    return values


def parse_option_string(spec: str) -> Tuple[str, Dict[str, Any]]:
    """
    Split an option string into its name and keyword options

    Args:
        spec: e.g. ``"disk:r=1:res=64"`` or ``"winding:k=2"``

    Returns:
        (name, options)

    Raises:
        ConfigError: empty name, or a segment without ``=``
    """
    if spec is None or not str(spec).strip():
        raise ConfigError("Empty option string", key="name")
    parts = str(spec).strip().split(":")
    name = parts[0].strip().lower()
    if not name:
        raise ConfigError(f"Missing name in {spec!r}", key="name")

    options = {}
    for segment in parts[1:]:
        if not segment.strip():
            continue
        if "=" not in segment:
            raise ConfigError(f"Option '{segment}' in {spec!r} is not key=value", key=segment)
        key, value = segment.split("=", 1)
        key = key.strip().lower()
        if not key:
            raise ConfigError(f"Empty key in {spec!r}", key=segment)
        options[key] = parse_value(value)
    return name, options


def take(options: Dict[str, Any], spec: str, allowed) -> Dict[str, Any]:
    """
    Reject option keys outside ``allowed``

    Raises:
        ConfigError: naming the first unknown key
    """
    for key in options:
        if key not in allowed:
            raise ConfigError(f"Unknown option '{key}' for {spec!r}", key=key)
    return options
