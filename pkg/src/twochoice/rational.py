"""Small helpers for exact rational values and their text form."""

from __future__ import annotations

from fractions import Fraction

__all__ = ["parse_rational", "format_rational", "dyadic_exponent", "as_fraction"]


def parse_rational(token: str) -> Fraction:
    """Parse ``"7"`` or ``"5/11"`` into a Fraction. Floats are rejected."""
    token = token.strip()
    if not token:
        raise ValueError("empty rational")
    num, sep, den = token.partition("/")
    try:
        if sep:
            return Fraction(int(num), int(den))
        return Fraction(int(num))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not an exact rational: {token!r}") from exc


def format_rational(value: Fraction | int) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return parse_rational(value)
    if isinstance(value, float):
        raise TypeError("floats are not accepted where exact values are required")
    return Fraction(value)


def dyadic_exponent(value: Fraction) -> int | None:
    """Smallest b with value = a / 2**b, or None if the denominator is not a power of two."""
    den = Fraction(value).denominator
    if den & (den - 1):
        return None
    return den.bit_length() - 1
