"""Seeded random streams and the gamma/exponential/geometric laws built on them."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import unipotent
from .rootsys import ChamberDrift, RootSystem, build_root_system, gamma_parameters

SEED_ENV = "POSLAB_SEED"
DEFAULT_SEED = 20240601


def seed_from_env(default: int = DEFAULT_SEED) -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return default
    value = int(raw.strip(), 10)
    if not 0 <= value < 2**64:
        raise ValueError(f"{SEED_ENV} must be a 64-bit unsigned integer, got {raw!r}")
    return value


@dataclass
class RngStream:
    """A reproducible PCG64 stream identified by (seed, stream_id).

    ``child(k)`` derives an independent sub-stream; the Monte Carlo drivers
    give chunk k of a job the stream ``child(k)`` so results do not depend on
    how chunks are spread over workers.
    """

    seed: int
    stream_id: int = 0
    key: tuple[int, ...] = ()
    gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for v in (self.seed, self.stream_id):
            if not 0 <= v < 2**64:
                raise ValueError("seed and stream_id must be 64-bit unsigned integers")
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,) + tuple(self.key))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.key + (k,))


def _check_positive(name, x):
    if not np.all(np.asarray(x) > 0) or not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be positive and finite, got {x}")


def log_gamma_draw(rng: RngStream, shape: float, size=None) -> np.ndarray:
    """log of a unit-scale gamma draw; stays finite for tiny shapes."""
    _check_positive("gamma shape", shape)
    if shape >= 1:
        return np.log(rng.gen.standard_gamma(shape, size))
    # boost: gamma_a = gamma_{a+1} * U^{1/a}
    g = rng.gen.standard_gamma(shape + 1.0, size)
    e = rng.gen.standard_exponential(size)  # -log U
    return np.log(g) - e / shape


def gamma_draw(rng: RngStream, shape: float, size=None):
    """Unit-scale gamma variate(s) with density x^{a-1} e^{-x} / Gamma(a)."""
    _check_positive("gamma shape", shape)
    if shape >= 1:
        return rng.gen.standard_gamma(shape, size)
    return np.exp(log_gamma_draw(rng, shape, size))


def exponential_draw(rng: RngStream, rate: float, size=None):
    _check_positive("exponential rate", rate)
    return rng.gen.standard_exponential(size) / rate


def geometric_draw(rng: RngStream, z: float, size=None):
    """P(G = k) = z^k (1 - z) on k = 0, 1, 2, ..."""
    if not 0 < z < 1:
        raise ValueError(f"geometric parameter must lie in (0, 1), got {z}")
    e = rng.gen.standard_exponential(size)
    return np.floor(e / -np.log(z)).astype(np.int64)


def gamma_to_exponential_limit(rng: RngStream, mu: float, h: float, n: int) -> np.ndarray:
    """n draws of -h log gamma_{h mu}; converges in law to an exponential of rate mu."""
    _check_positive("mu", mu)
    _check_positive("h", h)
    return -h * log_gamma_draw(rng, h * mu, n)


@dataclass(frozen=True)
class GammaVector:
    word: tuple[int, ...]
    params: tuple[float, ...]
    values: tuple  # floats, or arrays when sampled in bulk

    def __post_init__(self):
        if not len(self.word) == len(self.params) == len(self.values):
            raise ValueError("word, params and values differ in length")
        for v in self.values:
            if not np.all(np.asarray(v) > 0):
                raise ValueError("gamma vector values must be positive")


def sample_gamma_vector(
    rng: RngStream, rs: RootSystem, word: Sequence[int], drift: ChamberDrift, size=None
) -> GammaVector:
    shapes = gamma_parameters(rs, word, drift)
    values = tuple(gamma_draw(rng, a, size) for a in shapes)
    return GammaVector(tuple(word), shapes, values)


def sample_D_mu(rng: RngStream, word: Sequence[int], drift: ChamberDrift, size=None) -> np.ndarray:
    """Theta(g) for g the Lusztig product of a Gamma_mu vector (type A2).

    Returns a 3x3 matrix, or an (size, 3, 3) stack.
    """
    rs = build_root_system("A2")
    gv = sample_gamma_vector(rng, rs, word, drift, size)
    vals = [np.atleast_1d(np.asarray(v, dtype=float)) for v in gv.values]
    g = unipotent.lusztig_product_batch(3, gv.word, vals)
    theta = unipotent.theta_twist(3, g)
    return theta[0] if size is None else theta


def chunk_sizes(n: int, chunk: int) -> list[int]:
    if n < 0 or chunk < 1:
        raise ValueError("need n >= 0 and chunk >= 1")
    full, rest = divmod(n, chunk)
    return [chunk] * full + ([rest] if rest else [])


def run_chunks(
    rng: RngStream,
    n: int,
    chunk: int,
    fn: Callable[[RngStream, int], object],
    workers: int = 1,
) -> list:
    """Evaluate fn(rng.child(k), size_k) over the chunks of n; results in chunk order.

    The chunk -> stream mapping is fixed, so the merged output is the same for
    any worker count.
    """
    sizes = chunk_sizes(n, chunk)
    jobs = [(rng.child(k), s) for k, s in enumerate(sizes)]
    if workers <= 1 or len(jobs) <= 1:
        return [fn(r, s) for r, s in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)
