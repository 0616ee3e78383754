"""
String formatting utilities shared by logging, reports and config parsing.
"""
import math
import os
from typing import Any, Dict


def format_operation_details(**kwargs) -> str:
    """
    Format operation details for logging.

    Args:
        **kwargs: Key-value pairs to format

    Returns:
        Formatted details string
    """
    if not kwargs:
        return ""
    return ", ".join([f"{k}={v}" for k, v in kwargs.items()])


def parse_key_value_lines(text: str, separator: str = "=") -> Dict[str, str]:
    """
    Extract key-value pairs from text, one per line.

    Args:
        text: Text containing key-value pairs
        separator: Separator between key and value

    Returns:
        Dictionary of key-value pairs; later lines win
    """
    result = {}
    for line in text.split("\n"):
        line = line.split("#", 1)[0].strip()
        if separator in line:
            key, value = line.split(separator, 1)
            result[key.strip()] = value.strip()
    return result


def build_path(*path_parts: str) -> str:
    """Build file path with consistent joining"""
    return os.path.join(*path_parts)


def round_significant(value: float, digits: int = 12) -> float:
    """Round to a number of significant digits; non-finite values pass through"""
    if value == 0 or not math.isfinite(value):
        return value
    return round(value, digits - 1 - int(math.floor(math.log10(abs(value)))))


def round_floats(data: Any, digits: int = 12) -> Any:
    """Round every float in a nested structure of dicts, lists and tuples"""
    if isinstance(data, bool):
        return data
    if isinstance(data, float):
        return round_significant(data, digits)
    if isinstance(data, dict):
        return {k: round_floats(v, digits) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [round_floats(v, digits) for v in data]
    return data


def format_number(value: Any, precision: int = 6) -> str:
    """Compact number for console tables"""
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, (int, float)):
        if isinstance(value, float) and not math.isfinite(value):
            return str(value)
        return f"{value:.{precision}g}"
    return str(value)


def format_duration(seconds: float) -> str:
    """
    Format duration in seconds to human-readable string.

    Args:
        seconds: Duration in seconds

    Returns:
        Formatted duration string
    """
    if seconds < 60:
        return f"{seconds:.1f}s"
    elif seconds < 3600:
        minutes = seconds / 60
        return f"{minutes:.1f}m"
    else:
        hours = seconds / 3600
        return f"{hours:.1f}h"
