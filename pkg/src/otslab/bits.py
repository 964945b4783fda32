"""Fixed-length bit strings and the symbolic placeholders used by the exact sampler."""

from __future__ import annotations

from functools import total_ordering
from typing import Iterable


@total_ordering
class Bits:
    """An immutable bit string, most significant bit first.

    Equality is bitwise (value and length). The total order is shortlex:
    shorter strings first, then lexicographic, which for equal lengths is
    the usual lexicographic order on bit strings.
    """

    __slots__ = ("value", "length")

    def __init__(self, value: int, length: int):
        if length < 0:
            raise ValueError("negative length")
        if value < 0 or value >> length:
            raise ValueError(f"value {value} does not fit in {length} bits")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "length", length)

    def __setattr__(self, name, value):
        raise AttributeError("Bits is immutable")

    @classmethod
    def from_str(cls, s: str) -> "Bits":
        s = s.strip()
        return cls(int(s, 2) if s else 0, len(s))

    @classmethod
    def zeros(cls, n: int) -> "Bits":
        return cls(0, n)

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "Bits":
        value, length = 0, 0
        for b in bits:
            value = (value << 1) | (1 if b else 0)
            length += 1
        return cls(value, length)

    @classmethod
    def from_hex(cls, text: str) -> "Bits":
        """Parse the ``<length>:<hex>`` form produced by :meth:`hex`."""
        length, _, digits = text.partition(":")
        return cls(int(digits, 16) if digits else 0, int(length))

    def hex(self) -> str:
        width = (self.length + 3) // 4
        return f"{self.length}:{self.value:0{width}x}" if width else f"{self.length}:"

    def __str__(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""

    def __repr__(self) -> str:
        return f"Bits('{self}')"

    def __len__(self) -> int:
        return self.length

    def __eq__(self, other) -> bool:
        if isinstance(other, Bits):
            return self.value == other.value and self.length == other.length
        if isinstance(other, Symbol):
            raise NeedValue(other)
        return NotImplemented

    def __lt__(self, other: "Bits") -> bool:
        if isinstance(other, Symbol):
            raise NeedValue(other)
        return (self.length, self.value) < (other.length, other.value)

    def __hash__(self) -> int:
        return hash((self.value, self.length))

    def __add__(self, other: "Bits") -> "Bits":
        if isinstance(other, Symbol):
            raise NeedValue(other)
        return Bits((self.value << other.length) | other.value, self.length + other.length)

    def bit(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self.value >> (self.length - 1 - i)) & 1

    def prefix(self, k: int) -> "Bits":
        if not 0 <= k <= self.length:
            raise ValueError(f"prefix of length {k} from {self.length} bits")
        return Bits(self.value >> (self.length - k), k)

    def slice(self, start: int, stop: int) -> "Bits":
        if not 0 <= start <= stop <= self.length:
            raise ValueError("bad slice")
        width = stop - start
        return Bits((self.value >> (self.length - stop)) & ((1 << width) - 1), width)

    def chunks(self, width: int) -> list["Bits"]:
        if width <= 0 or self.length % width:
            raise ValueError("length is not a multiple of the chunk width")
        return [self.slice(i, i + width) for i in range(0, self.length, width)]

    def flip(self, i: int) -> "Bits":
        return Bits(self.value ^ (1 << (self.length - 1 - i)), self.length)

    def to_int(self) -> int:
        return self.value

    @property
    def sort_key(self) -> tuple[int, int]:
        return (self.length, self.value)


def concat(parts: Iterable[Bits]) -> Bits:
    out = Bits(0, 0)
    for p in parts:
        out = out + p
    return out


class NeedValue(Exception):
    """Raised when code inspects a symbol whose value the sampler has not fixed."""

    def __init__(self, symbol: "Symbol"):
        super().__init__(symbol)
        self.symbol = symbol


class Symbol:
    """A bit string whose value is not yet decided.

    Symbols may be stored, passed around and used as oracle query inputs.
    Any operation that depends on the actual bits raises :class:`NeedValue`,
    which the exact sampler catches to branch on the value.
    """

    __slots__ = ("length", "ident")

    def __init__(self, length: int, ident):
        object.__setattr__(self, "length", length)
        object.__setattr__(self, "ident", ident)

    def __len__(self) -> int:
        return self.length

    def _inspect(self, *args, **kwargs):
        raise NeedValue(self)

    __eq__ = __ne__ = __lt__ = __le__ = __gt__ = __ge__ = _inspect
    __add__ = __radd__ = __int__ = __index__ = __bool__ = _inspect
    bit = prefix = slice = chunks = flip = to_int = hex = _inspect
    __hash__ = _inspect  # type: ignore[assignment]

    @property
    def value(self):
        raise NeedValue(self)

    def __repr__(self) -> str:
        return f"Symbol({self.ident!r}, {self.length})"


class TapeSymbol(Symbol):
    """An unread-so-far segment of the key generation tape."""

    __slots__ = ()


class AnswerSymbol(Symbol):
    """The answer to a fresh oracle query that has not been pinned down."""

    __slots__ = ()
