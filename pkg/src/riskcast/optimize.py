"""Shared derivative-free minimizer used by the likelihood fitters.

A multi-start wrapper around Nelder-Mead. Each start gets a moderate-
tolerance simplex run; the champion is then re-polished with fresh
simplexes until a full restart improves the objective by less than
``ftol`` (the convergence rule all fitters quote). Constraint handling
is the caller's job: every fitter passes an unconstrained
reparameterization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

__all__ = ["MultistartResult", "minimize_multistart"]


@dataclass
class MultistartResult:
    x: np.ndarray
    fun: float
    converged: bool
    nfev: int


def minimize_multistart(
    fun: Callable[[np.ndarray], float],
    starts: Sequence[np.ndarray],
    ftol: float = 1e-8,
    inner_fatol: float = 1e-6,
    inner_xatol: float = 1e-3,
    cap: int = 150,
    max_polish: int = 8,
) -> MultistartResult:
    best_x: np.ndarray | None = None
    best_f = np.inf
    nfev = 0

    def run(x0: np.ndarray, fatol: float, spread: float):
        # explicit simplex: the default 5%-of-coordinate rule degenerates
        # near zero coordinates and stalls restarts
        simplex = np.vstack([x0, x0 + spread * np.eye(len(x0))])
        return minimize(
            fun,
            x0,
            method="Nelder-Mead",
            options={
                "fatol": fatol,
                "xatol": inner_xatol,
                "maxiter": cap * len(x0),
                "maxfev": cap * len(x0),
                "initial_simplex": simplex,
            },
        )

    for x0 in starts:
        res = run(np.asarray(x0, dtype=float), inner_fatol, 0.5)
        nfev += res.nfev
        if res.fun < best_f:
            best_f, best_x = float(res.fun), np.asarray(res.x, dtype=float)

    # precise restarts from the champion with shrinking fresh simplexes;
    # converged once a restart improves the objective by less than ftol
    converged = False
    spread = 0.1
    for _ in range(max_polish):
        res = run(best_x, ftol, spread)
        nfev += res.nfev
        gained = best_f - float(res.fun)
        if res.fun < best_f:
            best_f, best_x = float(res.fun), np.asarray(res.x, dtype=float)
        if gained < ftol:
            converged = True
            break
        spread = max(spread * 0.3, 1e-4)
    return MultistartResult(best_x, best_f, converged, nfev)
