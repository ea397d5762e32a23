"""Topological Markov chains on truncated alphabets.

Symbols are integer labels ``offset, offset+1, ..., offset+A-1``.  The
Gauss-type chains count digits from 1, the finite full shifts from 0, so the
offset is carried by the chain and every routine works with labels.  Words
are plain tuples of labels; bulk routines use 2-d integer arrays whose rows
are words in lexicographic order.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple, Optional, Sequence

import numpy as np

Word = tuple

DEFAULT_WORD_CAP = 5_000_000


class ResourceGuardError(RuntimeError):
    """Raised when an enumeration would exceed the configured cap."""


class ChainError(ValueError):
    """Raised for malformed chain definitions or inadmissible words."""


@dataclass(eq=False)
class TruncatedChain:
    """Finite 0/1 transition structure, possibly truncating a countable one.

    ``tail_descriptor(k)`` (optional) is a monotone weight for the dropped
    symbols ``k > A``; it is only bookkeeping, the pressure routines take
    their tail bounds from the potential.
    """

    matrix: np.ndarray
    offset: int = 0
    countable: bool = False
    tail_descriptor: Optional[Callable[[int], float]] = None
    name: str = "custom"
    _least: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=bool)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise ChainError("transition matrix must be square and nonempty")
        m.setflags(write=False)
        self.matrix = m
        least = np.full(m.shape[0], -1, dtype=np.int64)
        for i in range(m.shape[0]):
            nz = np.flatnonzero(m[i])
            if nz.size:
                least[i] = nz[0]
        self._least = least

    @property
    def alphabet_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def symbols(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.alphabet_size)

    @property
    def is_full(self) -> bool:
        return bool(self.matrix.all())

    def contains(self, sym: int) -> bool:
        return self.offset <= sym < self.offset + self.alphabet_size

    def allowed(self, a: int, b: int) -> bool:
        if not (self.contains(a) and self.contains(b)):
            return False
        return bool(self.matrix[a - self.offset, b - self.offset])

    def successors(self, sym: int) -> np.ndarray:
        return np.flatnonzero(self.matrix[sym - self.offset]) + self.offset

    def least_successor(self, sym: int) -> int:
        j = self._least[sym - self.offset]
        if j < 0:
            raise ChainError(f"symbol {sym} has no admissible successor")
        return int(j) + self.offset

    def is_admissible(self, word: Sequence[int]) -> bool:
        if len(word) == 0:
            return True
        if not all(self.contains(int(s)) for s in word):
            return False
        return all(self.allowed(int(a), int(b)) for a, b in zip(word, word[1:]))

    def check_word(self, word: Sequence[int]) -> Word:
        w = tuple(int(s) for s in word)
        if not self.is_admissible(w):
            raise ChainError(f"word {w} is not admissible in chain {self.name}")
        return w

    def canonical_extension(self, word: Sequence[int], length: int) -> Word:
        """Extend ``word`` to ``length`` symbols by least admissible successors."""
        w = list(word)
        if not w:
            w.append(self.offset)
        while len(w) < length:
            w.append(self.least_successor(w[-1]))
        return tuple(w)

    def restrict(self, A: int) -> "TruncatedChain":
        """Chain on the first ``A`` symbols (same offset)."""
        if A < 1 or A > self.alphabet_size:
            raise ChainError("restriction size out of range")
        return TruncatedChain(self.matrix[:A, :A], self.offset, self.countable,
                              self.tail_descriptor, self.name)


# ---------------------------------------------------------------- builders

def full_shift(N: int, offset: int = 0, countable: bool = False,
               name: Optional[str] = None) -> TruncatedChain:
    if N < 1:
        raise ChainError("alphabet size must be positive")
    return TruncatedChain(np.ones((N, N), dtype=bool), offset, countable,
                          None, name or f"full-{N}")


def countable_full_shift(A: int, offset: int = 1, name: str = "full") -> TruncatedChain:
    """Full shift on a countable alphabet truncated at ``A`` symbols."""
    return TruncatedChain(np.ones((A, A), dtype=bool), offset, True,
                          lambda k: 1.0 / (k * k), name)


def modified_gauss_chain(A: int) -> TruncatedChain:
    """a(1, j) = 1 for all j; for i > 1, a(i, j) = 1 iff j < i."""
    if A < 1:
        raise ChainError("alphabet size must be positive")
    i = np.arange(1, A + 1)[:, None]
    j = np.arange(1, A + 1)[None, :]
    m = (i == 1) | (j < i)
    return TruncatedChain(m, 1, True, lambda k: 1.0 / (k * k), "modified-gauss")


def mp_induced_chain(A: int) -> TruncatedChain:
    """Full shift on return-time classes 0, 1, ... (every induced branch is onto)."""
    return TruncatedChain(np.ones((A, A), dtype=bool), 0, True, None, "mp-induced")


_RULE_NODES = (ast.Expression, ast.BoolOp, ast.And, ast.Or, ast.UnaryOp, ast.Not,
               ast.Compare, ast.Eq, ast.NotEq, ast.Lt, ast.LtE, ast.Gt, ast.GtE,
               ast.Name, ast.Load, ast.Constant, ast.BinOp, ast.Add, ast.Sub,
               ast.Mult, ast.Mod, ast.USub)


def chain_from_rule(rule: str, A: int, offset: int = 1,
                    countable: bool = True) -> TruncatedChain:
    """Build a chain from a boolean rule in the symbols ``i`` (from) and ``j`` (to).

    Example: ``"i == 1 or j < i"`` is the modified-Gauss transition.
    Only comparisons, boolean and integer arithmetic are accepted.
    """
    tree = ast.parse(rule, mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _RULE_NODES):
            raise ChainError(f"unsupported construct in rule {rule!r}")
        if isinstance(node, ast.Name) and node.id not in ("i", "j"):
            raise ChainError(f"unknown name {node.id!r} in rule {rule!r}")
    code = compile(tree, "<rule>", "eval")
    m = np.zeros((A, A), dtype=bool)
    for a in range(A):
        for b in range(A):
            m[a, b] = bool(eval(code, {"__builtins__": {}},
                                {"i": a + offset, "j": b + offset}))
    return TruncatedChain(m, offset, countable, None, f"rule:{rule}")


def builtin_chain(name: str, A: int = 2) -> TruncatedChain:
    if name == "full":
        return countable_full_shift(A)
    if name == "modified-gauss":
        return modified_gauss_chain(A)
    if name == "mp-induced":
        return mp_induced_chain(A)
    raise ChainError(f"unknown builtin chain {name!r}")


# ---------------------------------------------------------------- points

class SymbolicPoint:
    """Infinite admissible sequence given by a finite head and a tail rule.

    ``tail`` is ``"canonical"`` (least admissible successor forever),
    ``"periodic"`` (repeat the last ``period`` symbols of the head, the whole
    head by default) or a callable ``k -> symbol``.
    """

    def __init__(self, chain: TruncatedChain, head: Sequence[int],
                 tail="canonical", period: Optional[int] = None):
        self.chain = chain
        self.head = chain.check_word(head)
        self.tail = tail
        if tail == "periodic":
            p = period or len(self.head)
            if p < 1 or p > len(self.head):
                raise ChainError("period must be between 1 and the head length")
            block = self.head[-p:]
            if not chain.allowed(block[-1], block[0]):
                raise ChainError("periodic block does not close up admissibly")
            self.period = p
        elif tail == "canonical" or callable(tail):
            self.period = None
        else:
            raise ChainError(f"unknown tail rule {tail!r}")
        self._cache = list(self.head)

    def symbol(self, k: int) -> int:
        while len(self._cache) <= k:
            n = len(self._cache)
            if self.tail == "canonical":
                nxt = (self.chain.least_successor(self._cache[-1]) if self._cache
                       else self.chain.offset)
            elif self.tail == "periodic":
                start = len(self.head) - self.period
                nxt = self.head[start + (n - len(self.head)) % self.period]
            else:
                nxt = int(self.tail(n))
                if self._cache and not self.chain.allowed(self._cache[-1], nxt):
                    raise ChainError(f"digit stream produced inadmissible symbol at {n}")
            self._cache.append(nxt)
        return self._cache[k]

    def prefix(self, n: int) -> Word:
        self.symbol(max(n - 1, 0))
        return tuple(self._cache[:n])


class Distance(NamedTuple):
    value: float
    depth_limited: bool


def metric(x: SymbolicPoint, y: SymbolicPoint, max_depth: int = 64) -> Distance:
    """2^(-m) with m the first index where the sequences differ."""
    for m in range(max_depth):
        if x.symbol(m) != y.symbol(m):
            return Distance(2.0 ** (-m), False)
    return Distance(0.0, True)


# ---------------------------------------------------------------- words

def count_words(chain: TruncatedChain, length: int, first: Optional[int] = None,
                last: Optional[int] = None) -> int:
    """Number of admissible words via powers of the transition matrix."""
    if length < 1:
        raise ValueError("length must be at least 1")
    M = chain.matrix.astype(object)
    v = np.zeros(chain.alphabet_size, dtype=object)
    if first is None:
        v[:] = 1
    elif chain.contains(first):
        v[first - chain.offset] = 1
    for _ in range(length - 1):
        v = v.dot(M)
    if last is not None:
        return int(v[last - chain.offset]) if chain.contains(last) else 0
    return int(v.sum())


def _check_cap(chain, length, first, last, cap):
    count = count_words(chain, length, first, last)
    if count > cap:
        raise ResourceGuardError(
            f"{count} words of length {length} exceed the enumeration cap {cap}")
    return count


def enumerate_words(chain: TruncatedChain, length: int, first: Optional[int] = None,
                    last: Optional[int] = None,
                    cap: int = DEFAULT_WORD_CAP) -> Iterator[Word]:
    """Yield admissible words in lexicographic order (depth-first, pruned)."""
    if length < 1:
        raise ValueError("length must be at least 1")
    _check_cap(chain, length, first, last, cap)
    A, off = chain.alphabet_size, chain.offset
    # reach[k][s]: can a word of k more symbols starting after s end at `last`
    if last is not None:
        if not chain.contains(last):
            return
        reach = [np.zeros(A, dtype=bool) for _ in range(length)]
        reach[0][last - off] = True
        for k in range(1, length):
            reach[k] = (chain.matrix & reach[k - 1][None, :]).any(axis=1)
    starts = [first] if first is not None else list(chain.symbols)
    stack = []
    for s in reversed(starts):
        if not chain.contains(s):
            continue
        if last is not None and not reach[length - 1][s - off]:
            continue
        stack.append((int(s),))
    while stack:
        w = stack.pop()
        if len(w) == length:
            yield w
            continue
        rem = length - len(w) - 1
        nxt = chain.successors(w[-1])
        if last is not None:
            nxt = nxt[reach[rem][nxt - off]]
        for s in nxt[::-1]:
            stack.append(w + (int(s),))


def word_array(chain: TruncatedChain, length: int, first: Optional[int] = None,
               last: Optional[int] = None, cap: int = DEFAULT_WORD_CAP) -> np.ndarray:
    """All admissible words as rows of an int array, lexicographic order."""
    if length < 1:
        raise ValueError("length must be at least 1")
    _check_cap(chain, length, first, last, cap)
    off = chain.offset
    if first is None:
        words = chain.symbols[:, None].astype(np.int64)
    else:
        words = np.array([[first]], dtype=np.int64)
    M = chain.matrix
    for _ in range(length - 1):
        rows, cols = np.nonzero(M[words[:, -1] - off])
        words = np.column_stack([words[rows], cols + off])
    if last is not None:
        words = words[words[:, -1] == last]
    return words


def extend_words(chain: TruncatedChain, words: np.ndarray) -> np.ndarray:
    """All admissible one-symbol extensions, preserving lexicographic order."""
    rows, cols = np.nonzero(chain.matrix[words[:, -1] - chain.offset])
    return np.column_stack([words[rows], cols + chain.offset])


# ---------------------------------------------------------------- properties

@dataclass
class PropertyReport:
    mixing: bool
    mixing_power: Optional[int]
    mixing_status: str
    BI: bool
    BIP: bool
    witness: tuple
    full: bool


def check_properties(chain: TruncatedChain, max_power: Optional[int] = None) -> PropertyReport:
    """Mixing by boolean matrix powers, BI/BIP with the smallest initial witness set."""
    A = chain.alphabet_size
    bound = max_power or (A * A - 2 * A + 2)  # Wielandt bound for primitive matrices
    M = chain.matrix.astype(np.int64)
    P = M.copy()
    mixing, power = False, None
    for k in range(1, bound + 1):
        if (P > 0).all():
            mixing, power = True, k
            break
        P = ((P @ M) > 0).astype(np.int64)
    if mixing:
        status = "mixing"
    elif max_power is not None and max_power < A * A - 2 * A + 2:
        status = "inconclusive"
    else:
        status = "not-mixing"
    # BI: every row meets the witness; BIP: also every column meets it
    bi = bip = False
    witness: tuple = ()
    for k in range(1, A + 1):
        rows_ok = chain.matrix[:, :k].any(axis=1).all()
        cols_ok = chain.matrix[:k, :].any(axis=0).all()
        if rows_ok and not bi:
            bi = True
            witness = tuple(int(s) for s in chain.symbols[:k])
        if rows_ok and cols_ok:
            bip = True
            witness = tuple(int(s) for s in chain.symbols[:k])
            break
    return PropertyReport(mixing, power, status, bi, bip, witness, chain.is_full)
