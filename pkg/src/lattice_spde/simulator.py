"""Explicit Euler simulation of the lattice SPDE and correlation estimates.

    X_{k+1} = X_k + dt (Δ X_k - m² X_k - λ X_k^p) + W_k

with ``W_k`` the lattice noise increments of :mod:`levy`.  Stepping runs in
the compiled kernel when it is built (see ``_stepping.BACKEND``).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _stepping
from .lattice import LatticeConfig, SpatialField, minimal_image
from .levy import LevyParams, NoiseStream

STABILITY_MARGIN = 0.5
MIN_BATCHES = 20
STEP_CHUNK = 4096


class BlowUpError(FloatingPointError):
    def __init__(self, step: int):
        super().__init__(f"field became non-finite at step {step}")
        self.step = step


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.05
    burn_in: int = 1000
    samples: int = 1000
    thinning: int = 1
    seed: int = 0
    lam: float = 0.0
    p: int = 3

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.p < 1:
            raise ValueError("p must be >= 1")

    def check_stability(self, cfg: LatticeConfig):
        if self.dt * cfg.mu2_max >= STABILITY_MARGIN:
            raise ValueError(
                f"dt*(4d/delta²+m²) = {self.dt * cfg.mu2_max:.4g} violates the stability margin {STABILITY_MARGIN}"
            )


@dataclass
class Trajectory:
    """Recorded snapshots, shape ``(samples, L, ..., L)``, plus the run's settings."""

    snapshots: np.ndarray
    cfg: LatticeConfig
    sim: SimConfig
    params: LevyParams
    backend: str = ""


@dataclass
class CorrelationFunction:
    """Stationary two-point function over lags, with batch-means errors.

    ``batches`` holds leave-one-batch-out estimates (jackknife), from which
    errors of derived quantities can be propagated.
    """

    mean: np.ndarray
    stderr: np.ndarray
    cfg: LatticeConfig
    batches: np.ndarray | None = None
    lag_mask: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def masked(self) -> np.ndarray:
        return np.ones(self.cfg.shape, bool) if self.lag_mask is None else self.lag_mask


def neighbour_table(cfg: LatticeConfig) -> np.ndarray:
    """Flat indices of the 2d nearest neighbours of every site (periodic)."""
    idx = np.arange(cfg.n_sites).reshape(cfg.shape)
    cols = []
    for axis in range(cfg.d):
        for shift in (1, -1):
            cols.append(np.roll(idx, -shift, axis=axis).ravel())
    return np.ascontiguousarray(np.stack(cols, axis=1).astype(np.int64))


def _run(params: LevyParams, sim: SimConfig, cfg: LatticeConfig, f=None, backend=None, companion=False):
    """Yield recorded snapshots in blocks of shape ``(n, n_sites)``.

    With ``companion`` the blocks are pairs: the chain itself and a linear
    (lambda = 0) chain driven by the same increments.
    """
    sim.check_stability(cfg)
    if sim.lam > 0 and sim.p % 2 == 0:
        warnings.warn("even p with lambda > 0 has no confining drift; blow-up is possible", RuntimeWarning)
    step = backend or _stepping.euler_steps
    X = np.zeros(cfg.n_sites) if f is None else np.array(f.values if isinstance(f, SpatialField) else f, dtype=float).ravel()
    X = np.ascontiguousarray(X)
    Y = X.copy()
    nbr = neighbour_table(cfg)
    stream = NoiseStream(params, cfg, sim.dt, sim.seed)
    total = sim.burn_in + sim.samples * sim.thinning
    done = 0
    args = (sim.dt, cfg.m**2, sim.lam, sim.p, 1.0 / cfg.delta**2)
    while done < total:
        n = min(STEP_CHUNK, total - done)
        W = np.ascontiguousarray(stream.take(n).reshape(n, cfg.n_sites))
        # first recorded step (1-based, relative to this chunk)
        first = sim.burn_in + sim.thinning - done
        if first <= 0:
            first = (first - 1) % sim.thinning + 1
        n_rec = 0 if first > n else 1 + (n - first) // sim.thinning
        buf = np.empty((max(n_rec, 1), cfg.n_sites))
        bad = step(X, W, nbr, *args, buf, sim.thinning, first)
        if bad >= 0:
            raise BlowUpError(done + bad + 1)
        if companion:
            buf_lin = np.empty_like(buf)
            step(Y, W, nbr, sim.dt, cfg.m**2, 0.0, 1, 1.0 / cfg.delta**2, buf_lin, sim.thinning, first)
        done += n
        if n_rec:
            yield (buf[:n_rec], buf_lin[:n_rec]) if companion else buf[:n_rec]


def _backend_name(backend) -> str:
    return "python" if backend is _stepping.euler_steps_py else _stepping.BACKEND


def simulate(params: LevyParams, sim: SimConfig, cfg: LatticeConfig, f=None, backend=None) -> Trajectory:
    """Run the chain and keep every recorded snapshot."""
    out = np.concatenate(list(_run(params, sim, cfg, f, backend)))
    assert len(out) == sim.samples
    return Trajectory(out.reshape((sim.samples,) + cfg.shape), cfg, sim, params, _backend_name(backend))


def _shift_table(cfg: LatticeConfig) -> np.ndarray:
    """``table[x, y]`` = flat index of site ``y + x`` on the torus."""
    coords = np.array(list(np.ndindex(*cfg.shape)))
    shifted = (coords[:, None, :] + coords[None, :, :]) % cfg.L
    return np.ravel_multi_index(tuple(np.moveaxis(shifted, -1, 0)), cfg.shape)


# above this many sites the per-batch products go through FFTs instead of X^T X
DENSE_SITES = 256


class _BatchAccumulator:
    """Per-batch sums of ``X`` and of ``X(y) X(y+x)`` over contiguous sample batches."""

    def __init__(self, cfg: LatticeConfig, samples: int, n_batches: int):
        if n_batches < MIN_BATCHES:
            raise ValueError(f"need at least {MIN_BATCHES} batches")
        if samples < n_batches:
            raise ValueError(f"{samples} samples are too few for {n_batches} batches")
        self.cfg, self.n_batches = cfg, n_batches
        self.per = samples // n_batches
        self.dense = cfg.n_sites <= DENSE_SITES
        n = cfg.n_sites
        self.sum_x = np.zeros(n_batches)
        self.prod = np.zeros((n_batches, n, n) if self.dense else (n_batches,) + cfg.shape)
        self.seen = 0

    def add(self, block: np.ndarray):
        cfg = self.cfg
        end = self.per * self.n_batches
        while len(block) and self.seen < end:
            b = self.seen // self.per
            take = min(len(block), (b + 1) * self.per - self.seen)
            part, block = block[:take], block[take:]
            self.sum_x[b] += part.sum()
            if self.dense:
                self.prod[b] += part.T @ part
            else:
                snap = part.reshape((take,) + cfg.shape)
                self.prod[b] += _lag_products(snap, cfg).sum(axis=0)
            self.seen += take

    def batch_means(self):
        """Per-batch ``mean_y <X(y) X(y+x)>`` over lags and per-batch ``<X>``."""
        cfg = self.cfg
        n = cfg.n_sites
        if self.dense:
            table = _shift_table(cfg)
            rows = np.arange(n)[None, :]
            lag = np.stack([P[rows, table].sum(axis=1) / n for P in self.prod])
            lag = lag.reshape((self.n_batches,) + cfg.shape)
        else:
            lag = self.prod
        return lag / self.per, self.sum_x / (self.per * n)

    def estimates(self):
        """Full estimate of ``F`` and its leave-one-batch-out versions."""
        cfg, nb = self.cfg, self.n_batches
        prod_b, mean_b = self.batch_means()
        prod = prod_b.mean(axis=0)
        mu = mean_b.mean()
        loo_prod = (nb * prod - prod_b) / (nb - 1)
        loo_mean = (nb * mu - mean_b) / (nb - 1)
        return prod - mu**2, loo_prod - (loo_mean**2).reshape((-1,) + (1,) * cfg.d)


def _correlation(cfg, F, loo, max_lag, metadata) -> CorrelationFunction:
    nb = len(loo)
    err = np.sqrt((nb - 1) / nb * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    mask = None
    if max_lag is not None:
        mask = np.zeros(cfg.shape, bool)
        for site in np.ndindex(*cfg.shape):
            mask[site] = max(abs(c) for c in minimal_image(site, cfg)) <= max_lag
    return CorrelationFunction(F, err, cfg, loo, mask, metadata)


def _lag_products(snap: np.ndarray, cfg: LatticeConfig) -> np.ndarray:
    """Per snapshot, ``mean_y X(y) X(y+x)`` for every lag ``x`` (via FFT)."""
    axes = tuple(range(1, cfg.d + 1))
    fx = np.fft.rfftn(snap, axes=axes)
    return np.fft.irfftn(np.abs(fx) ** 2, s=cfg.shape, axes=axes) / cfg.n_sites


def _metadata(sim: SimConfig, backend: str) -> dict:
    return {"dt": sim.dt, "lam": sim.lam, "p": sim.p, "seed": sim.seed, "backend": backend}


def estimate_correlation(traj: Trajectory, max_lag: int | None = None, n_batches: int = MIN_BATCHES) -> CorrelationFunction:
    """``F(x) = <X(y) X(y+x)> - <X>²`` averaged over time and space.

    Errors come from a jackknife over ``n_batches`` contiguous batches.
    """
    S = len(traj.snapshots)
    acc = _BatchAccumulator(traj.cfg, S, n_batches)
    acc.add(traj.snapshots.reshape(S, -1))
    meta = dict(_metadata(traj.sim, traj.backend), samples=acc.seen, batches=n_batches, control_variate=False)
    return _correlation(traj.cfg, *acc.estimates(), max_lag, meta)


def simulate_correlation(params: LevyParams, sim: SimConfig, cfg: LatticeConfig, max_lag: int | None = None,
                         n_batches: int = MIN_BATCHES, f=None, backend=None,
                         control_variate: bool = False) -> CorrelationFunction:
    """Same estimate as ``estimate_correlation(simulate(...))`` without storing snapshots.

    With ``control_variate`` a linear companion chain ``Y`` shares the noise
    increments.  Its stationary covariance is ``c2 * G`` exactly, with ``G``
    from :func:`discrete_stationary_covariance`, so

        F = F_X - F_Y + c2_hat G,   c2_hat = <G, F_Y> / <G, G>

    is again an estimate of ``F_X`` whose fluctuations shared with ``Y``
    cancel.  The burn-in must be long enough for ``Y`` to be stationary.
    """
    meta = dict(_metadata(sim, _backend_name(backend)), control_variate=control_variate)
    acc = _BatchAccumulator(cfg, sim.samples, n_batches)
    if not control_variate:
        for block in _run(params, sim, cfg, f, backend):
            acc.add(block)
        meta.update(samples=acc.seen, batches=n_batches)
        return _correlation(cfg, *acc.estimates(), max_lag, meta)
    lin = _BatchAccumulator(cfg, sim.samples, n_batches)
    for bx, by in _run(params, sim, cfg, f, backend, companion=True):
        acc.add(bx)
        lin.add(by)
    FX, looX = acc.estimates()
    FY, looY = lin.estimates()
    G = discrete_stationary_covariance(1.0, cfg, sim.dt)
    GG = float(np.sum(G * G))
    axes = tuple(range(1, cfg.d + 1))

    def combine(x, y, c2):
        return x - y + np.multiply.outer(c2, G) if np.ndim(c2) else x - y + c2 * G

    c2_full = float(np.sum(G * FY)) / GG
    c2_loo = np.sum(G * looY, axis=axes) / GG
    meta.update(samples=acc.seen, batches=n_batches, c2_linear=c2_full)
    return _correlation(cfg, combine(FX, FY, c2_full), combine(looX, looY, c2_loo), max_lag, meta)


def discrete_stationary_covariance(c2: float, cfg: LatticeConfig, dt: float) -> np.ndarray:
    """Exact stationary covariance of the linear (lambda = 0) Euler scheme."""
    mu2 = cfg.mu2_grid()
    spec = c2 / (2 * mu2 - dt * mu2**2)
    return np.fft.ifftn(spec).real / cfg.cell_volume
