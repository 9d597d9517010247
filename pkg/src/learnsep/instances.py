"""Problem instances (prime groups and RSA-style moduli) with a public/secret split.

Learners only ever see the public view. The secret payload travels with the
instance so the harness can score results, but every read goes through
``SecretVault.reveal`` which leaves an audit trail.
"""
from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field, replace
from typing import Any, Optional, Union

from .errors import DomainError, IntegrityError, ResourceExhausted
from .numtheory import (
    Factorization,
    factor_small,
    from_hex,
    is_probable_prime,
    random_prime,
    to_hex,
    two_adic_valuation,
)

SCHEMA_VERSION = 1
KINDS = ("dlp", "dcr", "modexp2c", "dcri")
CANDIDATE_BUDGET = 100_000
DEFAULT_C_MAX = 8
DEFAULT_C_PRIME_MAX = 2


@dataclass(frozen=True)
class PrimeGroup:
    n: int
    p: int
    a: int
    p_minus_1_factors: Factorization

    def validate(self) -> None:
        p, a = self.p, self.a
        if p.bit_length() != self.n or not is_probable_prime(p):
            raise IntegrityError(f"{p} is not an {self.n}-bit prime")
        if not 2 <= a <= p - 1:
            raise IntegrityError(f"generator {a} out of range")
        if self.p_minus_1_factors.value != p - 1:
            raise IntegrityError("p-1 factorization does not recompose")
        if not is_generator(a, p, self.p_minus_1_factors):
            raise IntegrityError(f"{a} does not generate Z_{p}^*")

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "p": to_hex(self.p),
            "a": to_hex(self.a),
            "p_minus_1_factors": self.p_minus_1_factors.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "PrimeGroup":
        return cls(int(d["n"]), from_hex(d["p"]), from_hex(d["a"]), Factorization.from_json(d["p_minus_1_factors"]))


@dataclass(frozen=True)
class RsaPublic:
    n: int
    N: int

    def validate(self) -> None:
        if self.N.bit_length() != self.n or self.N % 2 == 0 or is_probable_prime(self.N):
            raise IntegrityError(f"{self.N} is not an odd composite {self.n}-bit modulus")

    def to_json(self) -> dict:
        return {"n": self.n, "N": to_hex(self.N)}

    @classmethod
    def from_json(cls, d: dict) -> "RsaPublic":
        return cls(int(d["n"]), from_hex(d["N"]))


@dataclass(frozen=True)
class RsaSecret:
    p: int
    q: int
    phi: int
    lam: int
    odd_part_factors: Factorization
    c: int
    c_prime: int
    d_star: Optional[int] = None
    m: Optional[int] = None

    @classmethod
    def from_primes(cls, p: int, q: int, m: Optional[int] = None) -> "RsaSecret":
        phi = (p - 1) * (q - 1)
        c = two_adic_valuation(phi)
        odd = factor_small(phi >> c)
        d_star = pow(3, -1, phi) if math.gcd(3, phi) == 1 else None
        return cls(
            p=p,
            q=q,
            phi=phi,
            lam=math.lcm(p - 1, q - 1),
            odd_part_factors=odd,
            c=c,
            c_prime=two_adic_valuation(math.gcd(p - 1, q - 1)),
            d_star=d_star,
            m=m,
        )

    @property
    def N(self) -> int:
        return self.p * self.q

    @property
    def phi_factors(self) -> Factorization:
        return Factorization(((2, self.c),)).merge(self.odd_part_factors)

    @property
    def lambda_factors(self) -> Factorization:
        return factor_small(self.lam)

    def validate(self, public: RsaPublic | None = None) -> None:
        p, q = self.p, self.q
        if public is not None and p * q != public.N:
            raise IntegrityError("p*q does not match the public modulus")
        if not (is_probable_prime(p) and is_probable_prime(q)) or p == q:
            raise IntegrityError("factors are not two distinct primes")
        if self.phi != (p - 1) * (q - 1) or self.lam != math.lcm(p - 1, q - 1):
            raise IntegrityError("phi/lambda mismatch")
        if (self.odd_part_factors.value << self.c) != self.phi or self.odd_part_factors.value % 2 == 0:
            raise IntegrityError("phi != 2^c * odd part")
        if self.c_prime != two_adic_valuation(math.gcd(p - 1, q - 1)):
            raise IntegrityError("c' mismatch")
        if self.d_star is not None and 3 * self.d_star % self.phi != 1:
            raise IntegrityError("d* does not invert 3 mod phi")
        if self.m is not None and math.gcd(self.m, p * q) != 1:
            raise IntegrityError("target m is not a unit")

    def to_json(self) -> dict:
        out = {
            "p": to_hex(self.p),
            "q": to_hex(self.q),
            "phi": to_hex(self.phi),
            "lambda": to_hex(self.lam),
            "odd_part_factors": self.odd_part_factors.to_json(),
            "c": self.c,
            "c_prime": self.c_prime,
            "d_star": None if self.d_star is None else to_hex(self.d_star),
        }
        if self.m is not None:
            out["m"] = to_hex(self.m)
        return out

    @classmethod
    def from_json(cls, d: dict) -> "RsaSecret":
        return cls(
            p=from_hex(d["p"]),
            q=from_hex(d["q"]),
            phi=from_hex(d["phi"]),
            lam=from_hex(d["lambda"]),
            odd_part_factors=Factorization.from_json(d["odd_part_factors"]),
            c=int(d["c"]),
            c_prime=int(d["c_prime"]),
            d_star=None if d.get("d_star") is None else from_hex(d["d_star"]),
            m=None if d.get("m") is None else from_hex(d["m"]),
        )


class SecretVault:
    """Holds a secret payload; every ``reveal`` is logged with its purpose."""

    def __init__(self, payload: Any):
        self._payload = payload
        self.access_log: list[str] = []

    def reveal(self, purpose: str) -> Any:
        self.access_log.append(purpose)
        return self._payload

    @property
    def present(self) -> bool:
        return self._payload is not None

    def __repr__(self):
        return f"SecretVault(<{'sealed' if self.present else 'empty'}>, accesses={len(self.access_log)})"


@dataclass
class InstanceRecord:
    kind: str
    public: Union[PrimeGroup, RsaPublic]
    secret: SecretVault
    seed: int
    created_at: Optional[str] = None
    stats: dict = field(default_factory=dict)

    @property
    def instance_ref(self) -> str:
        blob = json.dumps({"kind": self.kind, "public": self.public.to_json()}, sort_keys=True)
        return f"{self.kind}-{hashlib.sha256(blob.encode()).hexdigest()[:16]}"

    def to_json(self) -> dict:
        payload = self.secret._payload
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "seed": self.seed,
            "created_at": self.created_at,
            "public": self.public.to_json(),
            "secret": None if payload is None else payload.to_json(),
            "stats": dict(self.stats),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, d: dict) -> "InstanceRecord":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise DomainError(f"unsupported schema_version {d.get('schema_version')!r}")
        kind = d["kind"]
        if kind not in KINDS:
            raise DomainError(f"unknown instance kind {kind!r}")
        if kind == "dlp":
            public: Union[PrimeGroup, RsaPublic] = PrimeGroup.from_json(d["public"])
            secret = None
        else:
            public = RsaPublic.from_json(d["public"])
            secret = None if d.get("secret") is None else RsaSecret.from_json(d["secret"])
        return cls(kind, public, SecretVault(secret), int(d["seed"]), d.get("created_at"), dict(d.get("stats", {})))

    @classmethod
    def loads(cls, text: str) -> "InstanceRecord":
        return cls.from_json(json.loads(text))

    def validate(self) -> None:
        self.public.validate()
        payload = self.secret._payload
        if payload is not None:
            payload.validate(self.public)
        if self.kind in ("dcr", "modexp2c", "dcri") and (payload is None or payload.d_star is None):
            raise IntegrityError(f"{self.kind} instance needs gcd(3, phi) = 1")
        if self.kind == "modexp2c" and math.gcd(payload.p - 1, payload.q - 1) != 1 << payload.c_prime:
            raise IntegrityError("odd parts of p-1 and q-1 share a factor")
        if self.kind == "dcri" and payload.m is None:
            raise IntegrityError("dcri instance lacks its target m")


def is_generator(a: int, p: int, p_minus_1_factors: Factorization) -> bool:
    return all(pow(a, (p - 1) // q, p) != 1 for q in p_minus_1_factors.primes)


def _check_seed(seed: int) -> int:
    if not 0 <= seed < 1 << 64:
        raise DomainError("seed must be a 64-bit unsigned integer")
    return seed


def gen_dlp_instance(n: int, seed: int) -> InstanceRecord:
    if not 8 <= n <= 64:
        raise DomainError(f"dlp bit length must be in [8, 64], got {n}")
    rng = random.Random(_check_seed(seed))
    p, tried = random_prime(n, rng, max_candidates=CANDIDATE_BUDGET)
    fac = factor_small(p - 1)
    while True:
        a = rng.randrange(2, p)
        if is_generator(a, p, fac):
            break
    group = PrimeGroup(n, p, a, fac)
    group.validate()
    return InstanceRecord("dlp", group, SecretVault(None), seed, stats={"candidates": tried})


def _rsa_bits(n: int, lo: int) -> int:
    if not lo <= n <= 64:
        raise DomainError(f"modulus bit length must be in [{lo}, 64], got {n}")
    if n % 2:
        raise DomainError("modulus bit length must be even (two floor(n/2)-bit primes)")
    return n // 2


def _cube_invertible(p: int) -> bool:
    return p % 3 == 2


def _verify_cube_root(secret: RsaSecret, rng: random.Random, trials: int = 32) -> None:
    N = secret.N
    for _ in range(trials):
        x = _unit(N, rng)
        if pow(pow(x, 3, N), secret.d_star, N) != x:
            raise IntegrityError("d* fails to invert cubing")


def _unit(N: int, rng: random.Random) -> int:
    while True:
        x = rng.randrange(1, N)
        if math.gcd(x, N) == 1:
            return x


def _draw_rsa_pair(k: int, rng: random.Random, condition=None) -> tuple[int, int, dict]:
    """Two distinct k-bit primes, both = 2 mod 3, product exactly 2k bits."""
    spent = 0
    rejected = 0
    while spent < CANDIDATE_BUDGET:
        p, t1 = random_prime(k, rng, top_bits=2, max_candidates=CANDIDATE_BUDGET - spent, accept=_cube_invertible)
        spent += t1
        q, t2 = random_prime(k, rng, top_bits=2, max_candidates=max(CANDIDATE_BUDGET - spent, 1),
                             accept=_cube_invertible)
        spent += t2
        if p != q and (condition is None or condition(p, q)):
            return p, q, {"candidates": spent, "rejected_pairs": rejected}
        rejected += 1
    raise ResourceExhausted("candidate budget exhausted while drawing the modulus")


def gen_dcr_instance(n: int, seed: int) -> InstanceRecord:
    k = _rsa_bits(n, 12)
    rng = random.Random(_check_seed(seed))
    p, q, stats = _draw_rsa_pair(k, rng)
    secret = RsaSecret.from_primes(p, q)
    _verify_cube_root(secret, rng)
    rec = InstanceRecord("dcr", RsaPublic(n, p * q), SecretVault(secret), seed, stats=stats)
    rec.validate()
    return rec


def _is_2c_pair(p: int, q: int, c_max: int) -> bool:
    g = math.gcd(p - 1, q - 1)
    return g & (g - 1) == 0 and two_adic_valuation((p - 1) * (q - 1)) <= c_max


def gen_2c_instance(n: int, c_max: int = DEFAULT_C_MAX, seed: int = 0) -> InstanceRecord:
    k = _rsa_bits(n, 12)
    if c_max < 2:
        raise DomainError("c_max must be >= 2")
    rng = random.Random(_check_seed(seed))
    p, q, stats = _draw_rsa_pair(k, rng, lambda p, q: _is_2c_pair(p, q, c_max))
    secret = RsaSecret.from_primes(p, q)
    _verify_cube_root(secret, rng)
    stats["c_max"] = c_max
    rec = InstanceRecord("modexp2c", RsaPublic(n, p * q), SecretVault(secret), seed, stats=stats)
    rec.validate()
    return rec


def gen_dcri_instance(n: int, seed: int) -> InstanceRecord:
    if n < 16 or n > 64 or n & (n - 1):
        raise DomainError(f"dcri bit length must be a power of two in [16, 64], got {n}")
    k = _rsa_bits(n, 16)
    rng = random.Random(_check_seed(seed))
    p, q, stats = _draw_rsa_pair(k, rng)
    N = p * q
    secret = RsaSecret.from_primes(p, q)
    _verify_cube_root(secret, rng)
    secret = replace(secret, m=_unit(N, rng))
    rec = InstanceRecord("dcri", RsaPublic(n, N), SecretVault(secret), seed, stats=stats)
    rec.validate()
    return rec


GENERATORS = {
    "dlp": gen_dlp_instance,
    "dcr": gen_dcr_instance,
    "modexp2c": gen_2c_instance,
    "dcri": gen_dcri_instance,
}


def generate(kind: str, n: int, seed: int, **kwargs) -> InstanceRecord:
    if kind not in GENERATORS:
        raise DomainError(f"unknown instance kind {kind!r}")
    if kind == "modexp2c":
        return gen_2c_instance(n, kwargs.get("c_max", DEFAULT_C_MAX), seed)
    return GENERATORS[kind](n, seed)


@dataclass(frozen=True)
class TwoAdicCheck:
    c: int
    c_prime: int
    c_ok: bool
    c_prime_ok: bool
    odd_parts_coprime: bool
    cube_invertible: bool

    @property
    def passed(self) -> bool:
        return self.c_ok and self.c_prime_ok and self.odd_parts_coprime


def validate_2c(secret: RsaSecret, c_threshold: int = DEFAULT_C_MAX,
                c_prime_threshold: int = DEFAULT_C_PRIME_MAX) -> TwoAdicCheck:
    """Recompute the 2-adic exponents of phi and gcd(p-1, q-1) from the primes."""
    p1, q1 = secret.p - 1, secret.q - 1
    g = math.gcd(p1, q1)
    c = two_adic_valuation(p1 * q1)
    cp = two_adic_valuation(g)
    return TwoAdicCheck(
        c=c,
        c_prime=cp,
        c_ok=c <= c_threshold,
        c_prime_ok=cp <= c_prime_threshold,
        odd_parts_coprime=g == 1 << cp,
        cube_invertible=math.gcd(3, p1 * q1) == 1,
    )
