"""Permutation types, the signed reversal operator and sign decoding.

Permutations are plain tuples of ints. A signed permutation carries the
orientation of each gene in the sign of its entry. Reversal indices are
1-based, inclusive.
"""

from __future__ import annotations

import numpy as np


class ContractError(ValueError):
    """Raised when an operation is called outside its preconditions."""


def is_unsigned_permutation(genes) -> bool:
    n = len(genes)
    return n >= 1 and sorted(genes) == list(range(1, n + 1))


def is_signed_permutation(genes) -> bool:
    n = len(genes)
    return n >= 1 and 0 not in genes and sorted(abs(g) for g in genes) == list(range(1, n + 1))


def check_unsigned(genes) -> tuple[int, ...]:
    genes = tuple(int(g) for g in genes)
    if not is_unsigned_permutation(genes):
        raise ContractError(f"not a permutation of 1..n: {genes}")
    return genes


def check_signed(genes) -> tuple[int, ...]:
    genes = tuple(int(g) for g in genes)
    if not is_signed_permutation(genes):
        raise ContractError(f"not a signed permutation: {genes}")
    return genes


def apply_reversal(sigma, j: int, k: int) -> tuple[int, ...]:
    """Reverse positions ``j..k`` (1-based, inclusive) and negate their signs."""
    n = len(sigma)
    if not (1 <= j <= k <= n):
        raise ContractError(f"invalid reversal ({j}, {k}) for length {n}")
    s = tuple(sigma)
    return s[: j - 1] + tuple(-g for g in reversed(s[j - 1 : k])) + s[k:]


def apply_unsigned_reversal(pi, j: int, k: int) -> tuple[int, ...]:
    n = len(pi)
    if not (1 <= j <= k <= n):
        raise ContractError(f"invalid reversal ({j}, {k}) for length {n}")
    p = tuple(pi)
    return p[: j - 1] + tuple(reversed(p[j - 1 : k])) + p[k:]


def random_unsigned_permutation(n: int, rng: np.random.Generator) -> tuple[int, ...]:
    if n < 1:
        raise ContractError("n must be >= 1")
    return tuple(int(x) for x in rng.permutation(n) + 1)


def decode_real_vector(v, pi, rng: np.random.Generator) -> tuple[int, ...]:
    """Turn a real vector into a signed version of ``pi``.

    Coordinates in ``[0, 0.5)`` give a negative gene, ``[0.5, 1]`` a positive
    one. Anything outside ``[0, 1]`` gets a fair coin flip from ``rng``; the
    generator is only touched when such a coordinate exists.
    """
    signs = real_to_signs(v, rng)
    if len(signs) != len(pi):
        raise ContractError(f"length mismatch: {len(signs)} vs {len(pi)}")
    return tuple(int(s) * int(g) for s, g in zip(signs, pi))


def real_to_signs(v, rng: np.random.Generator) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    signs = np.where(v < 0.5, -1, 1).astype(np.int8)
    out = (v < 0.0) | (v > 1.0) | np.isnan(v)
    if out.any():
        signs[out] = rng.choice(np.array([-1, 1], dtype=np.int8), size=int(out.sum()))
    return signs


def sign_vector_to_signed(s, pi) -> tuple[int, ...]:
    if len(s) != len(pi):
        raise ContractError(f"length mismatch: {len(s)} vs {len(pi)}")
    for x in s:
        if x not in (1, -1):
            raise ContractError(f"sign must be +1 or -1, got {x}")
    return tuple(int(x) * int(g) for x, g in zip(s, pi))


def format_permutation(genes) -> str:
    return " ".join(str(int(g)) for g in genes)


def parse_permutation(line: str, signed: bool = False) -> tuple[int, ...]:
    genes = tuple(int(tok) for tok in line.split())
    return check_signed(genes) if signed else check_unsigned(genes)
