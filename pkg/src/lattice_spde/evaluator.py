"""Graph values, truncated correlation series and first-order kernels.

Values are returned as fields over the lag of the last root: roots ``0..n-2``
sit at fixed sites (the origin by default) and the last root runs over the
torus.  Every graph value includes its vertex multiplicities and cumulant
factors; the series coefficient of ``lambda**m`` carries the sign ``(-1)**m``.

Two evaluation methods exist for equilibrium graphs: ``quadrature`` (nested
time quadrature in position space, the general path) and ``momentum`` (exact
time integrals in momentum space).  Finite-time graphs always use quadrature.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .graphs import (
    INIT,
    PWGraph,
    SimplifiedGraph,
    drop_tadpoles as _drop_tadpoles,
    enumerate_graphs,
    filter_connected,
    is_connected,
    prune_odd,
    simplify,
)
from .lattice import LatticeConfig, SpatialField
from .levy import LevyParams, cumulants as _levy_cumulants
from .momentum import evaluate_momentum
from .quadrature import QuadratureSpec, evaluate_quadrature
from .recursion import (  # noqa: F401  re-exported
    NoiseRealization,
    causal_convolution,
    perturbative_solution,
    tree_field,
    tree_value,
)

MAX_ORDER = 2
METHODS = ("quadrature", "momentum")


def as_cumulants(c, N: int = 8) -> dict[int, float]:
    if isinstance(c, LevyParams):
        return _levy_cumulants(c, N)
    return {int(k): float(v) for k, v in dict(c).items()}


def _as_simplified(g) -> SimplifiedGraph:
    return simplify(g) if isinstance(g, PWGraph) else g


def _pick(fieldvals: np.ndarray, lags, cfg: LatticeConfig):
    if lags is None:
        return fieldvals
    out = []
    for x in lags:
        site = tuple(np.mod(np.atleast_1d(x), cfg.L))
        out.append(fieldvals[site])
    return np.array(out)


def _field(f, cfg):
    if f is None:
        return None
    if isinstance(f, SpatialField):
        return f.values
    return np.asarray(f, dtype=float).reshape(cfg.shape)


def evaluate_graph_equilibrium(g, lags, cumulants, cfg: LatticeConfig, quad: QuadratureSpec | None = None,
                               method: str = "quadrature", positions=None, allow_disconnected: bool = False,
                               dt: float | None = None):
    """Equilibrium value of ``g`` (roots at time 0, vertices over negative times).

    ``dt`` (momentum method only) evaluates the explicit Euler discretization
    with that time step instead of continuous time.
    """
    sg = _as_simplified(g)
    if sg.vertices(INIT):
        raise ValueError("equilibrium rules apply only to graphs without initial-condition leaves")
    if not allow_disconnected and not is_connected(sg):
        raise ValueError("equilibrium evaluation expects a connected graph")
    c = as_cumulants(cumulants)
    if method == "momentum":
        vals = evaluate_momentum(sg, cfg, c, positions, dt=dt)
    elif method == "quadrature":
        if dt is not None:
            raise ValueError("discrete-time values are only available with the momentum method")
        quad = quad or QuadratureSpec()
        vals = evaluate_quadrature(sg, cfg, c, quad, quad.horizon(cfg), positions)
    else:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    return _pick(vals, lags, cfg)


def evaluate_graph_finite_t(g, t: float, lags, cumulants, f, cfg: LatticeConfig, quad: QuadratureSpec | None = None,
                            positions=None):
    """Value at common root time ``t``: vertices over ``(0, t]``, initial leaves carry ``f``."""
    if not t > 0:
        raise ValueError(f"finite-time evaluation needs t > 0, got {t}")
    sg = _as_simplified(g)
    fv = _field(f, cfg)
    if sg.vertices(INIT) and (fv is None or not np.any(fv)):
        return _pick(np.zeros(cfg.shape), lags, cfg)
    quad = quad or QuadratureSpec()
    vals = evaluate_quadrature(sg, cfg, as_cumulants(cumulants), quad, t, positions, t_final=t, f=fv)
    return _pick(vals, lags, cfg)


def _odd_vanish(c: dict[int, float], up_to: int) -> bool:
    return all(c.get(k, 0.0) == 0.0 for k in range(1, up_to + 1, 2))


@dataclass
class SeriesCoefficients:
    """Per-order graph values and assembled coefficients (fields over the last root's lag)."""

    cfg: LatticeConfig
    n: int
    graph_values: list[dict[str, np.ndarray]] = field(default_factory=list)
    coefficients: list[np.ndarray] = field(default_factory=list)

    @property
    def max_order(self) -> int:
        return len(self.coefficients) - 1

    def assemble(self, lam: float) -> np.ndarray:
        return sum(lam**m * c for m, c in enumerate(self.coefficients))

    def write_csv(self, path):
        d = self.cfg.d
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["order", "graph_id"] + [f"x{i}" for i in range(d)] + ["value"])
            for m, vals in enumerate(self.graph_values):
                for gid, arr in vals.items():
                    for site in np.ndindex(*self.cfg.shape):
                        w.writerow([m, gid] + list(site) + [f"{arr[site]:.17g}"])
                for site in np.ndindex(*self.cfg.shape):
                    w.writerow([m, "total"] + list(site) + [f"{self.coefficients[m][site]:.17g}"])


def select_graphs(m: int, n: int, p: int, c: dict[int, float], equilibrium: bool, drop_tadpoles: bool,
                  connected: bool = True):
    gs = enumerate_graphs(m, n, p, equilibrium_only=equilibrium)
    ids = {g.key: f"m{m}-{i}" for i, g in enumerate(gs)}
    if connected:
        gs = filter_connected(gs)
    if _odd_vanish(c, 2 * m * p + n):
        gs = prune_odd(gs)
    if drop_tadpoles:
        gs = _drop_tadpoles(gs)
    return [(ids[g.key], g) for g in gs]


def truncated_correlation_series(n: int, M: int, cumulants, cfg: LatticeConfig, quad: QuadratureSpec | None = None,
                                 equilibrium: bool = True, drop_tadpoles: bool = False, p: int = 3, t: float | None = None,
                                 f=None, method: str = "quadrature", positions=None, max_order: int = MAX_ORDER,
                                 connected: bool = True, dt: float | None = None) -> SeriesCoefficients:
    """Coefficients of ``lambda**m``, ``m <= M``, of the truncated n-point function.

    With ``connected=False`` all graphs are summed, which gives the full
    (untruncated) moment instead.
    """
    if M > max_order:
        raise ValueError(f"order {M} exceeds the configured cap {max_order}")
    if M < 0 or n < 1:
        raise ValueError("need M >= 0 and n >= 1")
    if not equilibrium and t is None:
        raise ValueError("finite-time series needs t")
    c = as_cumulants(cumulants)
    out = SeriesCoefficients(cfg, n)
    for m in range(M + 1):
        vals = {}
        for gid, g in select_graphs(m, n, p, c, equilibrium, drop_tadpoles, connected):
            if equilibrium:
                vals[gid] = evaluate_graph_equilibrium(g, None, c, cfg, quad, method, positions, not connected, dt)
            else:
                vals[gid] = evaluate_graph_finite_t(g, t, None, c, f, cfg, quad, positions)
        total = sum(vals.values()) if vals else np.zeros(cfg.shape)
        out.graph_values.append(vals)
        out.coefficients.append((-1) ** m * np.asarray(total))
    return out


def compose_connected(one_point: SeriesCoefficients, two_point: SeriesCoefficients, root0_site=None) -> list[np.ndarray]:
    """Full two-point coefficients from connected ones: ``<XX>^T + <X><X>`` order by order."""
    cfg = two_point.cfg
    site = tuple(root0_site) if root0_site is not None else (0,) * cfg.d
    out = []
    for m in range(two_point.max_order + 1):
        acc = two_point.coefficients[m].copy()
        for m1 in range(m + 1):
            acc = acc + one_point.coefficients[m1][site] * one_point.coefficients[m - m1]
        out.append(acc)
    return out


@dataclass
class FirstOrderKernels:
    """Equilibrium two-point kernels: ``F = c2 P1 + lambda (c4 P2 + c2² Ptad) + O(lambda²)``."""

    P1: np.ndarray
    P2: np.ndarray
    Ptad: np.ndarray
    cfg: LatticeConfig

    def model(self, c2: float, c4: float, lam: float, tadpoles: bool = False) -> np.ndarray:
        out = c2 * self.P1 + lam * c4 * self.P2
        if tadpoles:
            out = out + lam * c2**2 * self.Ptad
        return out


def first_order_kernels(cfg: LatticeConfig, p: int = 3, method: str = "momentum",
                        quad: QuadratureSpec | None = None, dt: float | None = None) -> FirstOrderKernels:
    """Kernels as series coefficients with one cumulant set to 1 and the rest to 0.

    ``dt`` gives the kernels of the Euler-discretized dynamics (see
    :func:`evaluate_graph_equilibrium`), which is what a simulation with that
    step actually samples.
    """

    def coef(c, order):
        return truncated_correlation_series(2, order, c, cfg, quad, p=p, method=method, dt=dt).coefficients[order]

    return FirstOrderKernels(coef({2: 1.0}, 0), coef({4: 1.0}, 1), coef({2: 1.0}, 1), cfg)


def write_lag_csv(path, values: np.ndarray, cfg: LatticeConfig, stderr: np.ndarray | None = None, header_comment=None):
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        cols = [f"x{i}" for i in range(cfg.d)] + (["mean", "stderr"] if stderr is not None else ["value"])
        w.writerow(cols)
        for site in np.ndindex(*cfg.shape):
            row = list(site) + [f"{values[site]:.17g}"]
            if stderr is not None:
                row.append(f"{stderr[site]:.17g}")
            w.writerow(row)


def read_lag_csv(path, cfg: LatticeConfig):
    """Read a lag CSV (``value`` or ``mean``/``stderr`` columns)."""
    vals = np.full(cfg.shape, np.nan)
    err = None
    with open(path) as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader)
        if len(header) < cfg.d + 1:
            raise ValueError(f"{path}: expected {cfg.d} coordinate columns and a value column")
        has_err = "stderr" in header
        if has_err:
            err = np.full(cfg.shape, np.nan)
        for row in reader:
            site = tuple(int(c) for c in row[: cfg.d])
            vals[site] = float(row[cfg.d])
            if has_err:
                err[site] = float(row[cfg.d + 1])
    if np.isnan(vals).any():
        raise ValueError(f"{path}: lag CSV does not cover every site of the lattice")
    return vals, err
