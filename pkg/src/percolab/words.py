"""Addresses of cells in the k-adic subdivision scheme.

A word is a finite string of digits in {0, ..., k^m - 1}; each digit picks
one of the k^m congruent subcubes of the current cube, so a word of length L
names one cell of the level-L grid on [0, 1]^m.  Digits encode per-axis
offsets in mixed radix with axis 0 most significant:

    offset along axis a  =  (digit // k**(m - 1 - a)) % k
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Tuple

import numpy as np


def digit_offsets(digit: int, m: int, k: int) -> Tuple[int, ...]:
    """Per-axis offsets in {0, ..., k-1} encoded by one digit."""
    return tuple((digit // k ** (m - 1 - a)) % k for a in range(m))


def cell_of_digits(digits: Tuple[int, ...], m: int, k: int) -> Tuple[int, ...]:
    """Integer coordinates of the cell a digit string addresses.

    The result lives on the side-``k**len(digits)`` grid; coordinate ``a``
    is the base-k number whose digits are the axis-``a`` offsets, most
    significant first.
    """
    coords = [0] * m
    for d in digits:
        for a in range(m):
            coords[a] = coords[a] * k + (d // k ** (m - 1 - a)) % k
    return tuple(coords)


@lru_cache(maxsize=None)
def _offset_table(m: int, k: int) -> np.ndarray:
    """(k^m, m) table mapping digit -> per-axis offsets."""
    table = np.empty((k ** m, m), dtype=np.int64)
    for d in range(k ** m):
        table[d] = digit_offsets(d, m, k)
    return table


@dataclass(frozen=True)
class Word:
    """A cell address: ambient dimension, subdivision base, digit string."""

    m: int
    k: int
    digits: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.k < 2:
            raise ValueError("k must be >= 2")
        fanout = self.k ** self.m
        for d in self.digits:
            if not 0 <= d < fanout:
                raise ValueError(f"digit {d} out of range [0, {fanout})")

    @classmethod
    def root(cls, m: int, k: int) -> "Word":
        return cls(m, k, ())

    @property
    def level(self) -> int:
        return len(self.digits)

    @property
    def fanout(self) -> int:
        return self.k ** self.m

    def child(self, digit: int) -> "Word":
        return Word(self.m, self.k, self.digits + (int(digit),))

    def parent(self) -> "Word":
        if not self.digits:
            raise ValueError("the root word has no parent")
        return Word(self.m, self.k, self.digits[:-1])

    def prefix(self, length: int) -> "Word":
        if not 0 <= length <= self.level:
            raise ValueError(f"prefix length {length} out of range")
        return Word(self.m, self.k, self.digits[:length])

    def cell(self) -> Tuple[int, ...]:
        """Coordinates on the side-``k**level`` grid."""
        return cell_of_digits(self.digits, self.m, self.k)

    def side(self) -> float:
        """Euclidean side length of the cube this word names."""
        return float(self.k) ** (-self.level)

    def __str__(self) -> str:
        body = ".".join(str(d) for d in self.digits) if self.digits else "()"
        return f"Word(m={self.m}, k={self.k}, {body})"
