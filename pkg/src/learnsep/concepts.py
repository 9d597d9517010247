"""Concept and hypothesis evaluators, plus seeded example oracles.

The oracles here use the efficient data-generation tricks: a DLP example is
produced as (a^y, f_i(y)) and a cube-root example as (y^3, bin(y, i)), so
drawing examples never requires solving the hard problem.

Bit conventions: DCR bits are 1-indexed from the least significant bit, DCRI
positions are 0-indexed from the least significant bit, and the DCRI prefix is
read most-significant-first.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence, Union

from .errors import DomainError
from .instances import PrimeGroup, RsaPublic, RsaSecret
from .numtheory import discrete_log_pohlig_hellman, from_hex, to_hex

Point = Union[int, str, float]

CONCEPT_FAMILIES = ("dlp_interval", "dcr_bit", "modexp", "dcri", "pqc_cosine")
HYPOTHESIS_FAMILIES = (
    "dlp_interval",
    "trapdoor_bit",
    "modexp",
    "dcri",
    "pqc_cosine",
    "lookup_table",
    "interval_on_x",
    "linear_threshold",
)
DISTRIBUTIONS = ("uniform_Zp_star", "uniform_ZN_star", "uniform_bitstrings", "uniform_angle")


DLOG_TABLE_LIMIT = 1 << 17


# -- evaluators ---------------------------------------------------------------

def dlp_window_contains(ell: int, i: int, p: int) -> bool:
    """Is exponent ``ell`` in the wrap-around window [i, i + (p-3)/2] over {1..p-1}?"""
    return (ell - i) % (p - 1) <= (p - 3) // 2


def dlp_concept_eval(group: PrimeGroup, i: int, x: int, dlog_provider: Callable[[int], int]) -> int:
    if not 1 <= x < group.p:
        raise DomainError(f"{x} is not in Z_{group.p}^*")
    return int(dlp_window_contains(dlog_provider(x), i, group.p))


def exact_dlog(group: PrimeGroup) -> Callable[[int], int]:
    """Secret-side log_a for scoring; uses the public factorization of p-1."""
    p, a = group.p, group.a
    if p <= DLOG_TABLE_LIMIT:
        table = [0] * p
        y = 1
        for ell in range(1, p):
            y = y * a % p
            table[y] = ell
        return table.__getitem__
    cache: dict[int, int] = {}

    def log_a(x: int) -> int:
        ell = cache.get(x)
        if ell is None:
            ell = cache[x] = discrete_log_pohlig_hellman(a, x, p, group.p_minus_1_factors)
        return ell

    return log_a


def bin_bit(value: int, i: int) -> int:
    """Bit ``i`` of ``value``, 1-indexed from the least significant bit."""
    if i < 1:
        raise DomainError("bit index is 1-based")
    return (value >> (i - 1)) & 1


def _require_unit(x: int, N: int) -> None:
    if not (isinstance(x, int) and 1 <= x < N and math.gcd(x, N) == 1):
        raise DomainError(f"{x!r} is not in Z_{N}^*")


def dcr_concept_eval(secret: RsaSecret, i: int, x: int) -> int:
    _require_unit(x, secret.N)
    return bin_bit(pow(x, secret.d_star, secret.N), i)


def modexp_concept_eval(public: RsaPublic, d: int, x: int) -> int:
    _require_unit(x, public.N)
    return pow(x, d, public.N)


def prefix_index(x: str, n: int) -> int:
    """Integer encoded by the first log2(n) bits of x, most significant first."""
    if len(x) != n:
        raise DomainError(f"expected a {n}-bit string, got {len(x)} bits")
    width = n.bit_length() - 1
    return int(x[:width], 2) if width else 0


def dcri_concept_eval(N: int, m: int, n: int, x: str) -> int:
    if n & (n - 1):
        raise DomainError("n must be a power of two")
    k = prefix_index(x, n)
    return (pow(m, 3, N) >> k) & 1


def pqc_cosine_eval(params: Sequence[float], theta: float) -> float:
    alpha, beta, gamma = params
    return alpha * math.cos(theta - beta) + gamma


# -- specs ----------------------------------------------------------------------

def _enc(v: Any) -> Any:
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, int):
        return to_hex(v)
    if isinstance(v, str):
        return "0b" + v
    return v


def _dec(v: Any) -> Any:
    if isinstance(v, str):
        return v[2:] if v.startswith("0b") else from_hex(v)
    return v


@dataclass(frozen=True)
class ConceptSpec:
    family: str
    instance_ref: str
    index: Any

    def __post_init__(self):
        if self.family not in CONCEPT_FAMILIES:
            raise DomainError(f"unknown concept family {self.family!r}")

    def validate_index(self, public: Any = None, secret: Optional[RsaSecret] = None) -> None:
        """Range check of the index against the instance it refers to."""
        fam, idx = self.family, self.index
        if fam == "dlp_interval":
            ok = isinstance(idx, int) and 1 <= idx < public.p
        elif fam == "dcr_bit":
            ok = isinstance(idx, int) and 1 <= idx <= public.n
        elif fam == "modexp":
            ok = isinstance(idx, int) and idx >= 1
            if ok and secret is not None:
                ok = idx < secret.phi and math.gcd(idx, secret.phi) == 1
        elif fam == "dcri":
            ok = isinstance(idx, int) and 1 <= idx < public.N and math.gcd(idx, public.N) == 1
        else:
            alpha, beta, _ = idx
            ok = alpha >= 0 and 0 <= beta < 2 * math.pi
        if not ok:
            raise DomainError(f"index {idx!r} out of range for {fam}")

    def to_json(self) -> dict:
        idx = [float(v) for v in self.index] if self.family == "pqc_cosine" else _enc(self.index)
        return {"family": self.family, "instance_ref": self.instance_ref, "index": idx}

    @classmethod
    def from_json(cls, d: dict) -> "ConceptSpec":
        idx = tuple(d["index"]) if d["family"] == "pqc_cosine" else _dec(d["index"])
        return cls(d["family"], d["instance_ref"], idx)


@dataclass(frozen=True)
class HypothesisSpec:
    family: str
    instance_ref: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in HYPOTHESIS_FAMILIES:
            raise DomainError(f"unknown hypothesis family {self.family!r}")

    def to_json(self) -> dict:
        params = {}
        for k, v in self.params.items():
            if k == "table":
                params[k] = [[_enc(a), _enc(b)] for a, b in v]
            elif k in ("weights", "coefficients"):
                params[k] = [float(w) for w in v]
            elif isinstance(v, float):
                params[k] = v
            else:
                params[k] = _enc(v)
        return {"family": self.family, "instance_ref": self.instance_ref, "params": dict(sorted(params.items()))}

    @classmethod
    def from_json(cls, d: dict) -> "HypothesisSpec":
        params = {}
        for k, v in d["params"].items():
            if k == "table":
                params[k] = tuple((_dec(a), _dec(b)) for a, b in v)
            elif k in ("weights", "coefficients"):
                params[k] = tuple(v)
            else:
                params[k] = _dec(v)
        return cls(d["family"], d.get("instance_ref", ""), params)


@dataclass
class EvalContext:
    """Public values a hypothesis evaluator may need."""

    modulus: Optional[int] = None
    n: Optional[int] = None
    dlog: Optional[Callable[[int], int]] = None
    feature: Optional[Callable[[Point], Sequence[float]]] = None


def hypothesis_evaluator(h: HypothesisSpec, ctx: EvalContext) -> Callable[[Point], Any]:
    """Total evaluation function for a hypothesis."""
    P = h.params
    fam = h.family
    if fam == "dlp_interval":
        p, i = ctx.modulus, P["i"]
        return lambda x: int(dlp_window_contains(ctx.dlog(x), i, p))
    if fam == "trapdoor_bit":
        N, d, i = ctx.modulus, P["d"], P["i"]
        return lambda x: bin_bit(pow(x, d, N), i)
    if fam == "modexp":
        N, d = ctx.modulus, P["d"]
        return lambda x: pow(x, d, N)
    if fam == "dcri":
        N, m, n = ctx.modulus, P["m"], ctx.n
        e = pow(m, 3, N)
        return lambda x: (e >> prefix_index(x, n)) & 1
    if fam == "pqc_cosine":
        params = (P["alpha"], P["beta"], P["gamma"])
        return lambda theta: pqc_cosine_eval(params, theta)
    if fam == "lookup_table":
        table = dict(P.get("table", ()))
        default = P.get("default", 0)
        return lambda x: table.get(x, default)
    if fam == "interval_on_x":
        lo, hi, inside = P["lo"], P["hi"], P["inside"]
        key = _scalar_key
        return lambda x: inside if lo <= key(x) <= hi else 1 - inside
    if fam == "linear_threshold":
        w = P["weights"]
        bias = P["bias"]
        feat = ctx.feature or bit_features_for(ctx.n)
        return lambda x: int(sum(a * b for a, b in zip(w, feat(x))) + bias > 0)
    raise DomainError(f"no evaluator for {fam!r}")


def _scalar_key(x: Point) -> int:
    return int(x, 2) if isinstance(x, str) else int(x)


def bit_features_for(n: Optional[int]) -> Callable[[Point], list[float]]:
    def feat(x: Point) -> list[float]:
        if isinstance(x, str):
            return [float(ch == "1") for ch in x]
        width = n or int(x).bit_length()
        return [float((int(x) >> k) & 1) for k in range(width)]

    return feat


# -- oracles ----------------------------------------------------------------------

@dataclass(frozen=True)
class LabeledExample:
    x: Point
    y: Any


class ExampleOracle:
    """Seeded EX(c, D): each ``draw`` is one unit-cost labeled example.

    ``sampler`` maps the oracle's private generator to an (x, y) pair. The
    oracle owns its generator; do not share one across threads.
    """

    def __init__(self, sampler: Callable[[random.Random], tuple[Point, Any]], seed: int,
                 distribution: str, concept: Optional[ConceptSpec] = None):
        if distribution not in DISTRIBUTIONS:
            raise DomainError(f"unknown distribution {distribution!r}")
        self._sampler = sampler
        self.rng = random.Random(seed)
        self.seed = seed
        self.distribution = distribution
        self.concept = concept
        self.queries = 0

    def draw(self) -> LabeledExample:
        self.queries += 1
        x, y = self._sampler(self.rng)
        return LabeledExample(x, y)

    def draw_many(self, count: int) -> list[LabeledExample]:
        return [self.draw() for _ in range(count)]


def uniform_unit(N: int, rng: random.Random) -> int:
    """Uniform element of Z_N^* by rejection."""
    while True:
        y = rng.randrange(1, N)
        if math.gcd(y, N) == 1:
            return y


def uniform_bitstring(n: int, rng: random.Random) -> str:
    return format(rng.getrandbits(n), f"0{n}b")


def dlp_example_oracle_draw(group: PrimeGroup, i: int, rng: random.Random) -> LabeledExample:
    y = rng.randrange(1, group.p)
    return LabeledExample(pow(group.a, y, group.p), int(dlp_window_contains(y, i, group.p)))


def dcr_example_oracle_draw(public: RsaPublic, i: int, rng: random.Random) -> LabeledExample:
    y = uniform_unit(public.N, rng)
    return LabeledExample(pow(y, 3, public.N), bin_bit(y, i))


def dlp_oracle(group: PrimeGroup, i: int, seed: int, instance_ref: str = "") -> ExampleOracle:
    def sample(rng):
        ex = dlp_example_oracle_draw(group, i, rng)
        return ex.x, ex.y

    return ExampleOracle(sample, seed, "uniform_Zp_star", ConceptSpec("dlp_interval", instance_ref, i))


def dcr_oracle(public: RsaPublic, i: int, seed: int, instance_ref: str = "") -> ExampleOracle:
    def sample(rng):
        ex = dcr_example_oracle_draw(public, i, rng)
        return ex.x, ex.y

    return ExampleOracle(sample, seed, "uniform_ZN_star", ConceptSpec("dcr_bit", instance_ref, i))


def modexp_oracle(public: RsaPublic, d: int, seed: int, instance_ref: str = "") -> ExampleOracle:
    N = public.N

    def sample(rng):
        x = uniform_unit(N, rng)
        return x, pow(x, d, N)

    return ExampleOracle(sample, seed, "uniform_ZN_star", ConceptSpec("modexp", instance_ref, d))


def cube_root_pairs_oracle(public: RsaPublic, seed: int) -> ExampleOracle:
    """Examples (y^3, y): the cube-root function f_N^{-1}, generated without d*."""
    N = public.N

    def sample(rng):
        y = uniform_unit(N, rng)
        return pow(y, 3, N), y

    return ExampleOracle(sample, seed, "uniform_ZN_star")


def dcri_labeled_oracle(n: int, e: int, seed: int, concept: Optional[ConceptSpec] = None) -> ExampleOracle:
    """Examples (x, bin(e, prefix(x))) for uniform n-bit strings x."""

    def sample(rng):
        x = uniform_bitstring(n, rng)
        return x, (e >> prefix_index(x, n)) & 1

    return ExampleOracle(sample, seed, "uniform_bitstrings", concept)


def dcri_oracle(public: RsaPublic, m: int, seed: int, instance_ref: str = "") -> ExampleOracle:
    return dcri_labeled_oracle(public.n, pow(m, 3, public.N), seed, ConceptSpec("dcri", instance_ref, m))


def pqc_oracle(params: Sequence[float], seed: int) -> ExampleOracle:
    def sample(rng):
        theta = rng.uniform(0.0, 2 * math.pi)
        return theta, pqc_cosine_eval(params, theta)

    return ExampleOracle(sample, seed, "uniform_angle", ConceptSpec("pqc_cosine", "", tuple(params)))
