"""Modular arithmetic, orders, discrete logs, CRT, primality and small factoring.

Integers are plain Python ``int``. Inside JSON artifacts they are written as
canonical lowercase hex (``to_hex`` / ``from_hex``).
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import (
    DomainError,
    InconsistentCongruences,
    IntegrityError,
    NotInSubgroup,
    ResourceExhausted,
)

__all__ = [
    "Congruence",
    "Factorization",
    "carmichael_lambda",
    "crt_combine",
    "discrete_log_pohlig_hellman",
    "discrete_log_subgroup",
    "factor_small",
    "from_hex",
    "is_probable_prime",
    "mod_pow",
    "multiplicative_order",
    "random_prime",
    "to_hex",
    "totient",
    "two_adic_valuation",
]

DETERMINISTIC_PRIME_BOUND = 1 << 16
DEFAULT_PRIME_ROUNDS = 40

_SMALL_PRIMES = [p for p in range(2, 256) if all(p % q for q in range(2, math.isqrt(p) + 1))]


def to_hex(value: int) -> str:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise DomainError(f"not a natural number: {value!r}")
    return format(value, "x")


def from_hex(text: str) -> int:
    if not isinstance(text, str) or not text:
        raise DomainError(f"not a canonical hex natural: {text!r}")
    if text != "0" and (text[0] == "0" or any(ch not in "0123456789abcdef" for ch in text)):
        raise DomainError(f"not a canonical hex natural: {text!r}")
    return int(text, 16)


@dataclass(frozen=True)
class Factorization:
    """Prime-power factorization, primes strictly ascending."""

    factors: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple((int(p), int(e)) for p, e in self.factors))
        last = 1
        for p, e in self.factors:
            if p <= last or e < 1:
                raise DomainError(f"malformed factorization {self.factors}")
            last = p

    @property
    def value(self) -> int:
        return math.prod(p**e for p, e in self.factors)

    @property
    def primes(self) -> list[int]:
        return [p for p, _ in self.factors]

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.factors)

    def __len__(self) -> int:
        return len(self.factors)

    def odd_part(self) -> "Factorization":
        return Factorization(tuple(f for f in self.factors if f[0] != 2))

    def merge(self, other: "Factorization") -> "Factorization":
        """Factorization of the product of the two factored values."""
        exps: dict[int, int] = {}
        for p, e in (*self.factors, *other.factors):
            exps[p] = exps.get(p, 0) + e
        return Factorization(tuple(sorted(exps.items())))

    def to_json(self) -> list[list]:
        return [[to_hex(p), e] for p, e in self.factors]

    @classmethod
    def from_json(cls, data: Iterable) -> "Factorization":
        return cls(tuple((from_hex(p), int(e)) for p, e in data))

    @classmethod
    def from_dict(cls, exps: dict[int, int]) -> "Factorization":
        return cls(tuple(sorted((p, e) for p, e in exps.items() if e > 0)))


@dataclass(frozen=True)
class Congruence:
    residue: int
    modulus: int

    def __post_init__(self):
        if self.modulus < 1:
            raise DomainError(f"modulus must be >= 1, got {self.modulus}")
        if not 0 <= self.residue < self.modulus:
            raise DomainError(f"residue {self.residue} not reduced mod {self.modulus}")

    def __str__(self):
        return f"{self.residue} mod {self.modulus}"

    def holds(self, value: int) -> bool:
        return value % self.modulus == self.residue


def mod_pow(base: int, exponent: int, modulus: int) -> int:
    if modulus == 0:
        raise DomainError("modulus must be positive")
    if exponent < 0:
        raise DomainError("negative exponent")
    return pow(base, exponent, modulus)


def two_adic_valuation(value: int) -> int:
    if value <= 0:
        raise DomainError("2-adic valuation needs a positive integer")
    return (value & -value).bit_length() - 1


def totient(factorization: Factorization) -> int:
    return math.prod((p - 1) * p ** (e - 1) for p, e in factorization)


def carmichael_lambda(factorization: Factorization) -> int:
    """Exponent of the unit group mod the factored value."""
    result = 1
    for p, e in factorization:
        if p == 2 and e >= 3:
            part = 1 << (e - 2)
        else:
            part = (p - 1) * p ** (e - 1)
        result = math.lcm(result, part)
    return result


def multiplicative_order(x: int, modulus: int, group_order_factorization: Factorization) -> int:
    """Least r > 0 with x^r = 1 (mod modulus).

    ``group_order_factorization`` must factor some multiple of the order of x,
    e.g. lambda(modulus). Each prime is stripped from the exponent while x
    still maps to 1.
    """
    if modulus < 1:
        raise DomainError("modulus must be positive")
    if math.gcd(x, modulus) != 1:
        raise DomainError(f"{x} is not a unit mod {modulus}")
    if modulus == 1:
        return 1
    x %= modulus
    order = group_order_factorization.value
    if pow(x, order, modulus) != 1:
        raise IntegrityError(f"x^{order} != 1 mod {modulus}; factorization is not a group-exponent multiple")
    for q, e in group_order_factorization:
        for _ in range(e):
            if pow(x, order // q, modulus) == 1:
                order //= q
            else:
                break
    return order


def discrete_log_subgroup(base: int, target: int, modulus: int, base_order: int) -> int:
    """Least l in {1, ..., base_order} with base^l = target, by baby-step giant-step.

    log(1) is ``base_order``, never 0.
    """
    if base_order < 1:
        raise DomainError("base_order must be positive")
    base %= modulus
    target %= modulus
    m = math.isqrt(base_order - 1) + 1
    table: dict[int, int] = {}
    cur = 1 % modulus
    for j in range(m):
        table.setdefault(cur, j)
        cur = cur * base % modulus
    try:
        stride = pow(base, -m, modulus)
    except ValueError:
        raise DomainError(f"{base} is not invertible mod {modulus}") from None
    gamma = target
    for i in range(m + 1):
        j = table.get(gamma)
        if j is not None:
            ell = i * m + j
            if ell < base_order:
                return ell if ell else base_order
        gamma = gamma * stride % modulus
    raise NotInSubgroup(f"{target} is not a power of {base} mod {modulus}")


def discrete_log_pohlig_hellman(base: int, target: int, modulus: int, order_factorization: Factorization) -> int:
    """Discrete log in <base> of exact order ``order_factorization.value``.

    Splits over the prime powers of the order and runs baby-step giant-step in
    each prime-order piece. Same {1, ..., order} convention as
    ``discrete_log_subgroup``.
    """
    order = order_factorization.value
    base %= modulus
    target %= modulus
    if pow(target, order, modulus) != 1:
        raise NotInSubgroup(f"{target} is not a power of {base} mod {modulus}")
    parts = []
    for q, e in order_factorization:
        qe = q**e
        cofactor = order // qe
        g = pow(base, cofactor, modulus)
        h = pow(target, cofactor, modulus)
        # g has order q^e; peel off one base-q digit at a time
        gamma = pow(g, q ** (e - 1), modulus)
        x = 0
        for k in range(e):
            hk = pow(pow(g, -x, modulus) * h % modulus, q ** (e - 1 - k), modulus)
            digit = discrete_log_subgroup(gamma, hk, modulus, q) % q
            x += digit * q**k
        parts.append(Congruence(x, qe))
    ell = crt_combine(parts).residue if parts else 0
    if pow(base, ell, modulus) != target:
        raise NotInSubgroup(f"{target} is not in the subgroup generated by {base} mod {modulus}")
    return ell if ell else order


def _combine_pair(a: Congruence, b: Congruence) -> Congruence | None:
    g = math.gcd(a.modulus, b.modulus)
    diff = b.residue - a.residue
    if diff % g:
        return None
    step = b.modulus // g
    t = (diff // g) * pow(a.modulus // g, -1, step) % step if step > 1 else 0
    lcm = a.modulus * step
    return Congruence((a.residue + a.modulus * t) % lcm, lcm)


def crt_combine(congruences: Sequence[Congruence]) -> Congruence:
    """Solve a system of congruences whose moduli need not be coprime."""
    if not congruences:
        raise DomainError("empty congruence system")
    acc = congruences[0]
    for idx in range(1, len(congruences)):
        nxt = _combine_pair(acc, congruences[idx])
        if nxt is None:
            # pairwise consistency implies joint consistency, so some earlier one clashes
            for j in range(idx):
                if _combine_pair(congruences[j], congruences[idx]) is None:
                    raise InconsistentCongruences(congruences[j], congruences[idx], (j, idx))
            raise IntegrityError("inconsistent system without an inconsistent pair")
        acc = nxt
    return acc


def is_probable_prime(value: int, rounds: int = DEFAULT_PRIME_ROUNDS) -> bool:
    """Primality test: trial division below 2^16, Miller-Rabin above.

    The first witnesses are small primes (deterministic far past 64 bits);
    the remaining ones are pseudo-random but seeded by ``value`` so the
    answer is a pure function of its input.
    """
    if rounds < 1:
        raise DomainError("rounds must be >= 1")
    if value < 2:
        return False
    if value < DETERMINISTIC_PRIME_BOUND:
        if value < 4:
            return True
        if value % 2 == 0:
            return False
        return all(value % f for f in range(3, math.isqrt(value) + 1, 2))
    for p in _SMALL_PRIMES:
        if value % p == 0:
            return value == p
    d = value - 1
    s = two_adic_valuation(d)
    d >>= s
    fixed = _SMALL_PRIMES[: min(rounds, 12)]
    rng = random.Random(value)
    extra = [rng.randrange(2, value - 1) for _ in range(rounds - len(fixed))]
    for a in (*fixed, *extra):
        x = pow(a, d, value)
        if x in (1, value - 1):
            continue
        for _ in range(s - 1):
            x = x * x % value
            if x == value - 1:
                break
        else:
            return False
    return True


def _pollard_brent(n: int, rng: random.Random, max_iter: int) -> int | None:
    """One Brent-variant rho run; returns a nontrivial factor or None."""
    y, c, m = rng.randrange(1, n), rng.randrange(1, n), 128
    g = r = q = 1
    x = ys = y
    steps = 0
    while g == 1:
        x = y
        for _ in range(r):
            y = (y * y + c) % n
        k = 0
        while k < r and g == 1:
            ys = y
            for _ in range(min(m, r - k)):
                y = (y * y + c) % n
                q = q * abs(x - y) % n
            g = math.gcd(q, n)
            k += m
        r *= 2
        steps += r
        if steps > max_iter:
            return None
    if g == n:
        while True:
            ys = (ys * ys + c) % n
            g = math.gcd(abs(x - ys), n)
            if g > 1:
                break
    return g if g != n else None


def factor_small(value: int, max_iter: int = 1 << 24) -> Factorization:
    """Complete factorization of a desk-scale integer (up to ~64 bits)."""
    if value < 1:
        raise DomainError("can only factor positive integers")
    exps: dict[int, int] = {}
    n = value
    for p in _SMALL_PRIMES:
        while n % p == 0:
            exps[p] = exps.get(p, 0) + 1
            n //= p
    rng = random.Random(value)
    stack = [n] if n > 1 else []
    while stack:
        m = stack.pop()
        if is_probable_prime(m):
            exps[m] = exps.get(m, 0) + 1
            continue
        r = math.isqrt(m)
        if r * r == m:
            stack += [r, r]
            continue
        for _ in range(32):
            f = _pollard_brent(m, rng, max_iter)
            if f:
                stack += [f, m // f]
                break
        else:
            raise ResourceExhausted(f"could not split {m} within the iteration budget")
    return Factorization.from_dict(exps)


def random_prime(bits: int, rng: random.Random, *, top_bits: int = 1, max_candidates: int = 100_000,
                 accept=None) -> tuple[int, int]:
    """Rejection-sample a prime of exactly ``bits`` bits.

    ``top_bits`` leading ones are forced. Returns (prime, candidates tried).
    ``accept`` filters primes further.
    """
    if bits < 2 or top_bits > bits:
        raise DomainError(f"cannot draw a {bits}-bit prime with {top_bits} forced top bits")
    hi_mask = ((1 << top_bits) - 1) << (bits - top_bits)
    for tried in range(1, max_candidates + 1):
        cand = rng.getrandbits(bits) | hi_mask | 1
        if is_probable_prime(cand) and (accept is None or accept(cand)):
            return cand, tried
    raise ResourceExhausted(f"no acceptable {bits}-bit prime in {max_candidates} candidates")
