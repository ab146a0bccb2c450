"""Damped Newton minimization of the plant's total potential energy.

The Hessian handed in is a Gauss-Newton approximation, so it is positive
semidefinite; a Levenberg-style diagonal shift plus backtracking line search
keeps every accepted iterate's energy non-increasing. When the shifted system
stops producing descent directions the shift grows until the step degenerates
toward scaled gradient descent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SolverDiverged


@dataclass
class SolveResult:
    x: np.ndarray
    residual: float
    energy: float
    iterations: int
    energies: list[float] = field(default_factory=list)


class IterateAbort(Exception):
    """Raised by an on_iterate hook to abandon the solve early."""


def minimize_energy(energy_fn, grad_hess_fn, x0: np.ndarray, tol: float,
                    max_iters: int, on_iterate=None) -> SolveResult:
    """Minimize until the gradient inf-norm drops to tol.

    energy_fn(x) -> E; grad_hess_fn(x) -> (E, g, H) with H PSD.
    on_iterate(x, E) is called at x0 and after every accepted step.
    """
    x = x0.copy()
    e, g, h = grad_hess_fn(x)
    energies = [e]
    if on_iterate is not None:
        on_iterate(x, e)
    lam = 1e-8
    n = x.size
    eye = np.eye(n)
    for it in range(max_iters):
        res = float(np.abs(g).max()) if n else 0.0
        if res <= tol:
            return SolveResult(x, res, e, it, energies)
        stepped = False
        for _ in range(40):
            try:
                p = np.linalg.solve(h + lam * eye, -g)
            except np.linalg.LinAlgError:
                lam = max(lam * 10.0, 1e-8)
                continue
            descent = float(g @ p)
            if not np.isfinite(descent) or descent >= 0.0:
                lam = max(lam * 10.0, 1e-8)
                continue
            t = 1.0
            accepted = False
            for _ in range(60):
                e_new = energy_fn(x + t * p)
                if np.isfinite(e_new) and e_new <= e + 1e-4 * t * descent:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                lam *= 10.0
                if lam > 1e14:
                    break
                continue
            x = x + t * p
            e, g, h = grad_hess_fn(x)
            energies.append(e)
            if on_iterate is not None:
                on_iterate(x, e)
            lam = max(lam / 3.0, 1e-10)
            stepped = True
            break
        if not stepped:
            raise SolverDiverged(
                f"no descent step found at iteration {it}, residual {res:.3e}"
            )
    res = float(np.abs(g).max()) if n else 0.0
    if res <= tol:
        return SolveResult(x, res, e, max_iters, energies)
    raise SolverDiverged(
        f"residual {res:.3e} above tolerance {tol:.1e} after {max_iters} iterations"
    )
