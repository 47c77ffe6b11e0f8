"""Scalar precision contexts and unitary FFT kernels.

Two arithmetic modes share one interface: hardware double precision backed by
numpy/scipy, and arbitrary-precision binary floating point backed by
gmpy2/MPFR with enough mantissa bits to guarantee a requested number of
significant decimal digits.  Vectors are numpy complex128 arrays in hardware
mode and numpy object arrays of gmpy2.mpc in arbitrary mode.

The FFT is a radix-2 complex transform with unitary 1/sqrt(N) normalization
in both directions; lengths are restricted to powers of two.  The forward
transform carries the exp(-iqx) sign, so it maps position amplitudes to
momentum amplitudes, and the inverse maps back.
"""

from __future__ import annotations

import math

import gmpy2
import numpy as np
import scipy.fft as _sfft

from . import _kernels

LOG2_10 = math.log2(10.0)
GUARD_BITS = 8
DOUBLE_DIGITS = 15


class GridSizeError(ValueError):
    """Vector length is not a power of two."""


class PrecisionError(ArithmeticError):
    """A quantity underflowed or is not representable at the working precision."""


def mantissa_bits(digits: int) -> int:
    """Binary mantissa size guaranteeing `digits` significant decimal digits."""
    return int(math.ceil(digits * LOG2_10)) + GUARD_BITS


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


class ScalarContext:
    """Working-precision descriptor: hardware doubles or MPFR with N_d digits."""

    __slots__ = ("mode", "digits", "bits")

    def __init__(self, mode: str = "double", digits: int = DOUBLE_DIGITS):
        if mode not in ("double", "arbitrary"):
            raise ValueError(f"unknown scalar mode {mode!r}")
        if digits < 1:
            raise ValueError("precision_digits must be a positive integer")
        self.mode = mode
        self.digits = int(digits)
        self.bits = 53 if mode == "double" else mantissa_bits(self.digits)

    @classmethod
    def double(cls) -> "ScalarContext":
        return cls("double")

    @classmethod
    def arbitrary(cls, digits: int) -> "ScalarContext":
        return cls("arbitrary", digits)

    @property
    def is_double(self) -> bool:
        return self.mode == "double"

    @property
    def eps(self) -> float:
        """Unit roundoff 2**(1-bits); exact as a float for bits <= ~1070."""
        return 2.0 ** (1 - self.bits)

    def activate(self) -> None:
        """Set the thread's gmpy2 context precision.  No-op in double mode."""
        if not self.is_double:
            gmpy2.get_context().precision = self.bits

    def __repr__(self):
        if self.is_double:
            return "ScalarContext(double)"
        return f"ScalarContext(arbitrary, N_d={self.digits})"

    def __eq__(self, other):
        return (
            isinstance(other, ScalarContext)
            and self.mode == other.mode
            and self.bits == other.bits
        )

    def __hash__(self):
        return hash((self.mode, self.bits))

    # ---- scalar constants -------------------------------------------------

    def pi(self):
        if self.is_double:
            return math.pi
        self.activate()
        return gmpy2.const_pi()

    def two_pi(self):
        if self.is_double:
            return 2.0 * math.pi
        self.activate()
        return 2 * gmpy2.const_pi()

    def e(self):
        if self.is_double:
            return math.e
        self.activate()
        return gmpy2.exp(gmpy2.mpfr(1))

    def real(self, x):
        if self.is_double:
            return float(x)
        self.activate()
        return gmpy2.mpfr(x)

    # ---- vectors ----------------------------------------------------------

    def zeros(self, n: int):
        if self.is_double:
            return np.zeros(n, dtype=np.complex128)
        self.activate()
        z = gmpy2.mpc(0)
        return np.array([z] * n, dtype=object)

    def array(self, values):
        """Build a native complex vector from a sequence of complex numbers."""
        if self.is_double:
            return np.asarray(values, dtype=np.complex128)
        self.activate()
        out = np.empty(len(values), dtype=object)
        for i, v in enumerate(values):
            if isinstance(v, gmpy2.mpc):
                out[i] = v
            else:
                v = complex(v)
                out[i] = gmpy2.mpc(v.real, v.imag)
        return out

    def to_complex(self, vec) -> np.ndarray:
        """Convert a native vector to complex128 (lossy in arbitrary mode)."""
        if self.is_double:
            return np.asarray(vec, dtype=np.complex128)
        return np.array([complex(z) for z in vec], dtype=np.complex128)

    def abs2(self, vec):
        """Elementwise |z|^2 as a native real vector."""
        if self.is_double:
            v = np.asarray(vec)
            return v.real * v.real + v.imag * v.imag
        self.activate()
        return _OBJ_NORM(vec)

    def populations(self, vec) -> np.ndarray:
        """Elementwise |z|^2 as float64 (tiny values round toward zero)."""
        if self.is_double:
            v = np.asarray(vec)
            return v.real * v.real + v.imag * v.imag
        self.activate()
        n = len(vec)
        return np.fromiter((float(gmpy2.norm(z)) for z in vec), float, n)

    def norm2(self, vec):
        """Sum of |z|^2 at working precision."""
        if self.is_double:
            v = np.asarray(vec)
            return float(np.sum(v.real * v.real + v.imag * v.imag))
        self.activate()
        acc = gmpy2.mpfr(0)
        for z in vec.ravel():
            acc += gmpy2.norm(z)
        return acc

    def phase_factors(self, angles: np.ndarray):
        """exp(-i*angle) for a float64 array of angles, at working precision."""
        angles = np.asarray(angles, dtype=float)
        if self.is_double:
            return np.exp(-1j * angles)
        self.activate()
        out = np.empty(angles.size, dtype=object)
        flat = angles.ravel()
        for i in range(flat.size):
            s, c = gmpy2.sin_cos(gmpy2.mpfr(flat[i]))
            out[i] = gmpy2.mpc(c, -s)
        return out.reshape(angles.shape)

    def nonlinear_phase(self, u, coef):
        """Multiply u elementwise by exp(-i*coef*|u|^2); returns the result.

        coef is a native real scalar.  The hardware path mutates u in place.
        """
        if self.is_double:
            _kernels.nl_phase_inplace(u, float(coef))
            return u
        self.activate()
        n = len(u)
        out = np.empty(n, dtype=object)
        for i in range(n):
            z = u[i]
            s, c = gmpy2.sin_cos(coef * gmpy2.norm(z))
            out[i] = z * gmpy2.mpc(c, -s)
        return out

    # ---- FFT ---------------------------------------------------------------

    def fft(self, vec, overwrite: bool = False):
        """Unitary forward transform (position -> momentum, exp(-iqx) sign)."""
        n = np.shape(vec)[-1]
        if not _is_pow2(n):
            raise GridSizeError(f"FFT length {n} is not a power of two")
        if self.is_double:
            return _sfft.fft(vec, norm="ortho", overwrite_x=overwrite)
        return _obj_fft(vec, self.bits, inverse=False)

    def ifft(self, vec, overwrite: bool = False):
        """Unitary inverse transform (momentum -> position, exp(+iqx) sign)."""
        n = np.shape(vec)[-1]
        if not _is_pow2(n):
            raise GridSizeError(f"FFT length {n} is not a power of two")
        if self.is_double:
            return _sfft.ifft(vec, norm="ortho", overwrite_x=overwrite)
        return _obj_fft(vec, self.bits, inverse=True)


_OBJ_NORM = np.frompyfunc(gmpy2.norm, 1, 1)

# Twiddle tables are the dominant setup cost of the arbitrary-precision FFT:
# computed once per (bits, length, direction) and never mutated afterwards,
# so they are safely shareable.
_TWIDDLE_CACHE: dict = {}
_BITREV_CACHE: dict = {}


def _bitrev(n: int) -> np.ndarray:
    perm = _BITREV_CACHE.get(n)
    if perm is None:
        bits = n.bit_length() - 1
        perm = np.zeros(n, dtype=np.intp)
        for i in range(1, n):
            perm[i] = (perm[i >> 1] >> 1) | ((i & 1) << (bits - 1))
        _BITREV_CACHE[n] = perm
    return perm


def _twiddle_table(bits: int, n: int, inverse: bool):
    key = (bits, n, inverse)
    table = _TWIDDLE_CACHE.get(key)
    if table is None:
        gmpy2.get_context().precision = bits
        two_pi = 2 * gmpy2.const_pi()
        sign = 1 if inverse else -1
        roots = np.empty(max(n // 2, 1), dtype=object)
        for k in range(max(n // 2, 1)):
            s, c = gmpy2.sin_cos(two_pi * k / n)
            roots[k] = gmpy2.mpc(c, sign * s)
        inv_sqrt = 1 / gmpy2.sqrt(gmpy2.mpfr(n))
        table = (roots, inv_sqrt)
        _TWIDDLE_CACHE[key] = table
    return table


def _obj_fft(vec, bits: int, inverse: bool):
    """Iterative radix-2 transform over a numpy object array of gmpy2.mpc."""
    n = len(vec)
    gmpy2.get_context().precision = bits
    roots, inv_sqrt = _twiddle_table(bits, n, inverse)
    a = np.asarray(vec, dtype=object)[_bitrev(n)]
    size = 2
    while size <= n:
        half = size >> 1
        step = n // size
        w = roots[0 : n // 2 : step]
        blocks = a.reshape(n // size, size)
        lo = blocks[:, :half].copy()
        t = blocks[:, half:] * w
        blocks[:, :half] = lo + t
        blocks[:, half:] = lo - t
        size <<= 1
    return a * inv_sqrt
