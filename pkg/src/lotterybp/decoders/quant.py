"""Two's-complement fixed-point emulation for soft messages."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from numba import njit

_FORMAT_RE = re.compile(r"^int(\d+)\.(\d+)$", re.IGNORECASE)


@dataclass(frozen=True)
class FixedPointFormat:
    """``int_bits`` integer bits (sign included) and ``frac_bits`` fraction bits."""

    int_bits: int
    frac_bits: int

    def __post_init__(self):
        if self.int_bits < 1 or self.frac_bits < 0:
            raise ValueError(f"invalid fixed-point format Int{self.int_bits}.{self.frac_bits}")

    @classmethod
    def parse(cls, text: str) -> "FixedPointFormat":
        m = _FORMAT_RE.match(text.strip())
        if not m:
            raise ValueError(f"cannot parse fixed-point format {text!r}; expected e.g. 'Int5.3'")
        return cls(int(m.group(1)), int(m.group(2)))

    @property
    def step(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def lo(self) -> float:
        return -(2.0 ** (self.int_bits - 1))

    @property
    def hi(self) -> float:
        return 2.0 ** (self.int_bits - 1) - self.step

    @property
    def width(self) -> int:
        return self.int_bits + self.frac_bits

    def __str__(self) -> str:
        return f"Int{self.int_bits}.{self.frac_bits}"

    def params(self) -> np.ndarray:
        """Packed (enabled, scale, lo, hi) vector consumed by the kernels."""
        return np.array([1.0, 2.0**self.frac_bits, self.lo, self.hi])


NO_QUANT = np.array([0.0, 1.0, -np.inf, np.inf])


def quant_params(fmt: FixedPointFormat | None) -> np.ndarray:
    return NO_QUANT.copy() if fmt is None else fmt.params()


@njit(cache=True, nogil=True, inline="always")
def qz(v, qp):
    if qp[0] == 0.0:
        return v
    v = math.floor(v * qp[1]) / qp[1]
    if v < qp[2]:
        return qp[2]
    if v > qp[3]:
        return qp[3]
    return v


def quantize(v: float, fmt: FixedPointFormat) -> float:
    """Truncate toward -inf onto the 2^-frac_bits grid, then saturate."""
    return float(qz(float(v), fmt.params()))
