"""Least-squares identification of c2, c4 and the kurtosis K = c4/c2².

The model is ``F_th = c2 P1 + lambda c4 P2`` and the objective
``Q = ∫ (F_th - F_em)² dx`` with ``∫ dx = delta**d * sum over lags``.  With

    alpha = ∫P1²,  beta = lambda² ∫P2²,  gamma = lambda ∫P1 P2,
    a = ∫P1 F_em,  b = lambda ∫P2 F_em,  c = ∫F_em²

the minimizer is ``c2 = (a beta - gamma b)/D``, ``c4 = (alpha b - gamma a)/D``
with ``D = alpha beta - gamma²``.

Optionally the first-order self-energy term ``lambda c2² Ptad`` is kept in the
model; it is quadratic in ``c2`` and solved self-consistently (see
:func:`fit_arrays`).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

K_ZERO = 0.05
K_JUMP = 1.0
DEGENERACY_TOL = 1e-12


class DegenerateDesignError(ArithmeticError):
    pass


@dataclass
class FitResult:
    c2: float
    c4: float
    K: float
    Q: float
    alpha: float
    beta: float
    gamma: float
    a: float
    b: float
    c: float
    lam: float
    se_c2: float = math.nan
    se_c4: float = math.nan
    se_K: float = math.nan
    label: str = ""
    tadpole: bool = False
    iterations: int = 1
    warnings: list[str] = field(default_factory=list)

    def normal_equation_residuals(self) -> tuple[float, float]:
        """``(dQ/dc2, dQ/dc4)`` at the returned point (zero at the minimizer)."""
        return (2 * (self.alpha * self.c2 + self.gamma * self.c4 - self.a),
                2 * (self.gamma * self.c2 + self.beta * self.c4 - self.b))

    def to_json(self) -> str:
        def clean(v):
            return None if isinstance(v, float) and not math.isfinite(v) else v

        return json.dumps({k: clean(v) for k, v in asdict(self).items()}, indent=2, sort_keys=True)

    def table(self) -> str:
        rows = [("c2", self.c2, self.se_c2), ("c4", self.c4, self.se_c4), ("K", self.K, self.se_K)]
        lines = [f"{'quantity':<10}{'estimate':>22}{'std. error':>22}"]
        lines += [f"{n:<10}{v:>22.12g}{e:>22.6g}" for n, v, e in rows]
        lines.append(f"{'Q':<10}{self.Q:>22.12g}")
        lines.append(f"{'label':<10}{self.label:>22}")
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def _closed_form(F, P1, P2, lam, vol, mask):
    def integ(x):
        return vol * float(np.sum(x[mask]))

    alpha = integ(P1 * P1)
    beta = lam**2 * integ(P2 * P2)
    gamma = lam * integ(P1 * P2)
    a = integ(P1 * F)
    b = lam * integ(P2 * F)
    D = alpha * beta - gamma**2
    if not D > DEGENERACY_TOL * max(alpha * beta, 1e-300):
        raise DegenerateDesignError(f"alpha*beta - gamma² = {D:.3g}: P1 and lambda*P2 are (nearly) proportional")
    c2 = (a * beta - gamma * b) / D
    c4 = (alpha * b - gamma * a) / D
    return c2, c4, (alpha, beta, gamma, a, b)


def classify_kurtosis(K: float, k_zero: float = K_ZERO, k_jump: float = K_JUMP) -> str:
    if not math.isfinite(K):
        raise ValueError("kurtosis must be finite")
    if abs(K) <= k_zero:
        return "diffusive"
    if abs(K) < k_jump:
        return "mixed, predominantly diffusive"
    return "jump-dominated"


def _values(F):
    # accept a CorrelationFunction or a bare array
    if isinstance(F, np.ndarray) or not hasattr(F, "batches"):
        return np.asarray(F, float), None, None
    return F.mean, F.masked(), F.batches


def fit_arrays(F, P1, P2, lam, vol, mask=None, Ptad=None):
    """(c2, c4, design scalars, passes) for plain arrays.

    With ``Ptad`` the fit is the self-consistent point of the closed form
    applied to ``F - lambda c2² Ptad``.  The closed form is linear in its
    data, so with ``(u2, u4)`` the coefficients fitted to ``Ptad`` alone the
    condition ``c2 = c2_0 - lambda u2 c2²`` is a quadratic, solved on the
    branch that reduces to ``c2_0`` as ``lambda u2 -> 0``.
    """
    mask = np.ones(np.shape(F), bool) if mask is None else mask
    c2, c4, design = _closed_form(F, P1, P2, lam, vol, mask)
    if Ptad is None or lam == 0:
        return c2, c4, design, 1
    u2, u4, _ = _closed_form(Ptad, P1, P2, lam, vol, mask)
    disc = 1 + 4 * lam * u2 * c2
    if disc < 0:
        raise ArithmeticError("tadpole-corrected fit has no real solution")
    c2 = 2 * c2 / (1 + math.sqrt(disc))
    c4 = c4 - lam * u4 * c2**2
    alpha, beta, gamma, _, _ = design
    Fc = F - lam * c2**2 * Ptad
    a = vol * float(np.sum((P1 * Fc)[mask]))
    b = lam * vol * float(np.sum((P2 * Fc)[mask]))
    return c2, c4, (alpha, beta, gamma, a, b), 2


def fit_first_order(F_em, P1, P2, lam: float, cfg=None, Ptad=None, k_zero: float = K_ZERO, k_jump: float = K_JUMP) -> FitResult:
    """Fit ``(c2, c4)``; ``F_em`` may be a :class:`CorrelationFunction` (errors from its jackknife batches)."""
    F, mask, batches = _values(F_em)
    cfg = cfg if cfg is not None else getattr(F_em, "cfg", None)
    vol = cfg.cell_volume if cfg is not None else 1.0
    P1, P2 = np.asarray(P1, float), np.asarray(P2, float)
    if not (F.shape == P1.shape == P2.shape):
        raise ValueError("F_em, P1 and P2 must live on the same lag grid")
    mask = np.ones(F.shape, bool) if mask is None else mask
    c2, c4, (alpha, beta, gamma, a, b), it = fit_arrays(F, P1, P2, lam, vol, mask, Ptad)
    F_th = c2 * P1 + lam * c4 * P2
    if Ptad is not None:
        F_th = F_th + lam * c2**2 * Ptad
    Q = vol * float(np.sum(((F_th - F) ** 2)[mask]))
    c = vol * float(np.sum((F * F)[mask]))
    warn = []
    if c2 <= 0:
        warn.append(f"fitted c2 = {c2:.6g} <= 0: model misfit, kurtosis undefined")
        K = math.nan
    else:
        K = c4 / c2**2
    res = FitResult(c2, c4, K, Q, alpha, beta, gamma, a, b, c, lam, tadpole=Ptad is not None, iterations=it, warnings=warn)
    if batches is not None:
        n = len(batches)
        est = np.array([fit_arrays(Fb, P1, P2, lam, vol, mask, Ptad)[:2] for Fb in batches])
        Ks = est[:, 1] / est[:, 0] ** 2
        jk = lambda x: math.sqrt((n - 1) / n * float(np.sum((x - x.mean()) ** 2)))
        res.se_c2, res.se_c4, res.se_K = jk(est[:, 0]), jk(est[:, 1]), jk(Ks)
    res.label = classify_kurtosis(K, k_zero, k_jump) if math.isfinite(K) else "undefined"
    return res
