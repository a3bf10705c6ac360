"""Brownian paths on the Cartan subalgebra, exponential functionals and path transforms.

Paths are stored on a uniform grid as arrays of shape ``(..., N+1, dim)``;
leading dimensions index independent paths.  Integrals use the cumulative
trapezoid rule on the sampled exponentials.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .rootsys import ChamberDrift, RootSystem, orthonormal_basis
from .sampler import RngStream


@dataclass(frozen=True)
class PathGrid:
    dt: float
    samples: np.ndarray  # (..., N+1, dim)

    @property
    def dim(self) -> int:
        return self.samples.shape[-1]

    @property
    def n_steps(self) -> int:
        return self.samples.shape[-2] - 1

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def start(self) -> np.ndarray:
        return self.samples[..., 0, :]

    def subsample(self, k: int) -> "PathGrid":
        """Every k-th grid point (the same path on a grid k times coarser)."""
        if self.n_steps % k:
            raise ValueError("k must divide the number of steps")
        return PathGrid(self.dt * k, self.samples[..., ::k, :])


@dataclass(frozen=True)
class FunctionalAccumulator:
    beta: np.ndarray
    weight: float
    values: np.ndarray  # (..., N+1), values[..., 0] == 0

    @property
    def terminal(self) -> np.ndarray:
        return self.values[..., -1]


def grid_steps(T: float, dt: float) -> int:
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    n = round(T / dt)
    if n < 1 or abs(n * dt - T) > 1e-9 * T:
        raise ValueError(f"dt={dt} does not divide T={T}")
    return n


def sample_brownian_path(
    rng: RngStream,
    rs: RootSystem,
    drift: ChamberDrift | np.ndarray,
    x0,
    T: float,
    dt: float,
    n_paths: int | None = None,
) -> PathGrid:
    """Brownian motion in the span of the roots, plus drift * t, started at x0.

    Increments are drawn in an orthonormal basis of the span, so A_{n-1}
    paths stay in the zero-sum hyperplane.
    """
    n = grid_steps(T, dt)
    basis = orthonormal_basis(rs)  # (rank, ambient)
    mu = np.asarray(drift.vector if isinstance(drift, ChamberDrift) else drift, dtype=float)
    lead = () if n_paths is None else (n_paths,)
    z = rng.gen.standard_normal(lead + (n, basis.shape[0]))
    # drift coordinates in the same basis; mu lies in the span
    z *= math.sqrt(dt)
    z += (basis @ mu) * dt
    coeffs = np.cumsum(z, axis=-2)
    x = np.empty(lead + (n + 1, basis.shape[1]))
    x0 = np.asarray(x0, dtype=float)
    x[..., 0, :] = x0
    x[..., 1:, :] = x0 + coeffs @ basis
    return PathGrid(dt, x)


def cumulative_trapezoid(f: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros_like(f)
    np.cumsum((f[..., 1:] + f[..., :-1]) * (0.5 * dt), axis=-1, out=out[..., 1:])
    return out


def exponential_functional(path: PathGrid, beta, weight: float = 1.0) -> FunctionalAccumulator:
    """I(t) = int_0^t weight * exp(-beta(X_s)) ds on the grid."""
    beta = np.asarray(beta, dtype=float)
    f = weight * np.exp(-(path.samples @ beta))
    return FunctionalAccumulator(beta, weight, cumulative_trapezoid(f, path.dt))


def _roots(rs: RootSystem):
    return [np.asarray(a, dtype=float) for a in rs.simple_roots]


def n_matrix(path: PathGrid, rs: RootSystem) -> np.ndarray:
    """Unit lower triangular N_T for A1 (2x2) or A2 (3x3); batch shape is preserved.

    Subdiagonal entries are int_0^T c_i e^{-alpha_i(X_s)} ds with c_i = |alpha_i|^2/2;
    the corner is int_0^T e^{-alpha_1(X_s)} int_0^s e^{-alpha_2(X_u)} du ds.
    """
    lead = path.samples.shape[:-2]
    if rs.type_tag == "A1":
        out = np.broadcast_to(np.eye(2), lead + (2, 2)).copy()
        (a1,) = _roots(rs)
        out[..., 1, 0] = exponential_functional(path, a1, float(rs.norm2(1)) / 2).terminal
        return out
    if rs.type_tag != "A2":
        raise ValueError("n_matrix supports A1 and A2 only")
    a1, a2 = _roots(rs)
    f1 = np.exp(-(path.samples @ a1))
    f2 = np.exp(-(path.samples @ a2))
    i1 = cumulative_trapezoid(f1, path.dt)
    i2 = cumulative_trapezoid(f2, path.dt)
    i31 = cumulative_trapezoid(f1 * i2, path.dt)
    out = np.broadcast_to(np.eye(3), lead + (3, 3)).copy()
    out[..., 1, 0] = i1[..., -1]
    out[..., 2, 1] = i2[..., -1]
    out[..., 2, 0] = i31[..., -1]
    return out


def path_transform_elementary(path: PathGrid, rs: RootSystem, i: int, xi) -> PathGrid:
    """X + log(1 + xi int_0^t e^{-alpha_i(X_s)} ds) alpha_i^vee.

    ``xi`` may be an array broadcasting over the batch dimensions.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0):
        raise ValueError("xi must be positive")
    alpha = np.asarray(rs.simple_roots[i - 1], dtype=float)
    coroot = np.asarray(rs.coroot(i), dtype=float)
    integral = exponential_functional(path, alpha).values
    shift = np.log1p(xi[..., None] * integral)
    return PathGrid(path.dt, path.samples + shift[..., None] * coroot)


def path_transform_backward(path: PathGrid, rs: RootSystem, i: int, n) -> PathGrid:
    """Y = X + log(1 - (1/n) int_0^t e^{-alpha_i(X)}) alpha_i^vee; inverts the forward transform with xi = 1/n."""
    n = np.asarray(n, dtype=float)
    alpha = np.asarray(rs.simple_roots[i - 1], dtype=float)
    coroot = np.asarray(rs.coroot(i), dtype=float)
    integral = exponential_functional(path, alpha).values
    ratio = integral / n[..., None]
    if np.any(ratio >= 1):
        raise ValueError("integral reaches n: the backward transform is undefined on this horizon")
    return PathGrid(path.dt, path.samples + np.log1p(-ratio)[..., None] * coroot)


def path_transform_word(path: PathGrid, rs: RootSystem, word: Sequence[int], params: Sequence) -> PathGrid:
    """T_{x_{i_1}(t_1)} o ... o T_{x_{i_m}(t_m)} applied to ``path`` (rightmost first).

    The factor for letter i uses xi = (|alpha_i|^2 / 2) t.
    """
    if len(word) != len(params):
        raise ValueError("word and params differ in length")
    out = path
    for i, t in reversed(list(zip(word, params))):
        out = path_transform_elementary(out, rs, i, float(rs.norm2(i)) / 2 * np.asarray(t, dtype=float))
    return out


def inversion_residual(path_x: PathGrid, path_y: PathGrid, beta, n) -> float:
    """sup_t |(1 + I_y(t)/n)(1 - I_x(t)/n) - 1| over the grid and the batch."""
    if path_x.samples.shape != path_y.samples.shape or path_x.dt != path_y.dt:
        raise ValueError("paths must share a grid")
    n = np.asarray(n, dtype=float)[..., None]
    ix = exponential_functional(path_x, beta).values
    iy = exponential_functional(path_y, beta).values
    return float(np.max(np.abs((1 + iy / n) * (1 - ix / n) - 1)))


def dufresne_density(mu: float, z) -> np.ndarray:
    """exp(mu z - e^z / 2) / (Gamma(mu) 2^mu)."""
    z = np.asarray(z, dtype=float)
    return np.exp(mu * z - np.exp(z) / 2 - gammaln(mu) - mu * math.log(2))


def dufresne_generator_residual(mu: float, z_grid, method: str = "analytic", step: float = 1e-4) -> float:
    """max |L* p| on the grid, L* p = 2 p'' - ((2 mu - e^z) p)'."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    z = np.asarray(z_grid, dtype=float)
    if z.min() < -10 or z.max() > 5:
        raise ValueError("grid must lie inside [-10, 5]")
    ez = np.exp(z)
    if method == "analytic":
        p = dufresne_density(mu, z)
        phi = mu - ez / 2  # p' = phi p
        dp = phi * p
        d2p = (-ez / 2 + phi**2) * p
        term1 = 2 * d2p
        term2 = -ez * p + (2 * mu - ez) * dp
        return float(np.max(np.abs(term1 - term2)))
    if method == "fd":
        h = step
        pm, p0, pp = (dufresne_density(mu, z + s) for s in (-h, 0.0, h))
        d2p = (pp - 2 * p0 + pm) / h**2
        flux = lambda s: (2 * mu - np.exp(z + s)) * dufresne_density(mu, z + s)
        dflux = (flux(h) - flux(-h)) / (2 * h)
        return float(np.max(np.abs(2 * d2p - dflux)))
    raise ValueError(f"unknown method {method!r}")


def default_horizon(rs: RootSystem, drift: ChamberDrift, floor: float = 20.0) -> float:
    """max(floor, 12 / min_i alpha_i(mu)), rounded up to an integer."""
    return float(max(floor, math.ceil(12.0 / min(drift.a))))


def relative_tail(path: PathGrid, rs: RootSystem, drift: ChamberDrift) -> np.ndarray:
    """Drift-only estimate of the neglected tail of each N_T entry, relative to the entry.

    For entry (i+1, i) the tail is c_i e^{-alpha_i(X_T)} / alpha_i(mu).  Returned
    with shape (..., rank); the corner entry's tail is bounded by the same
    ratio for alpha_1 scaled by (1 + tail of alpha_2).
    """
    nm = n_matrix(path, rs)
    xt = path.samples[..., -1, :]
    out = []
    for k, a in enumerate(_roots(rs), start=1):
        c = float(rs.norm2(k)) / 2
        tail = c * np.exp(-(xt @ a)) / drift.a[k - 1]
        out.append(tail / nm[..., k, k - 1])
    return np.stack(out, axis=-1)


ENTRY_LABELS = {2: ("n21",), 3: ("n21", "n32", "n31")}


def entries(mats: np.ndarray) -> np.ndarray:
    """(..., n, n) unit lower triangular -> (..., k) entries in ENTRY_LABELS order."""
    n = mats.shape[-1]
    if n == 2:
        return mats[..., 1:2, 0]
    return np.stack([mats[..., 1, 0], mats[..., 2, 1], mats[..., 2, 0]], axis=-1)


def write_csv(rows: np.ndarray, labels: Sequence[str], stream=None, extra: dict | None = None) -> str:
    """CSV with a '# columns: ...' header line; returns the text if no stream is given."""
    own = stream is None
    buf = io.StringIO() if own else stream
    extra = extra or {}
    cols = list(labels) + list(extra)
    buf.write("# columns: " + ",".join(cols) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    for r in np.atleast_2d(rows):
        w.writerow([repr(float(v)) for v in r] + [str(v) for v in extra.values()])
    return buf.getvalue() if own else ""
