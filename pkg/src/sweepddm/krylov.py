"""Right-preconditioned GMRES and flexible GMRES with residual histories.

Both drivers run Arnoldi with modified Gram-Schmidt (plus one
reorthogonalization pass) and update the Hessenberg least-squares
problem with complex Givens rotations, so the relative residual is
available at every iteration without forming the iterate.  With right
preconditioning the least-squares residual equals the true residual,
which keeps histories comparable across preconditioners.

gmres applies a fixed preconditioner and reconstructs the solution as
x = x0 + M^-1 (V y); fgmres stores the preconditioned basis vectors
Z_j = M_j^-1 v_j and forms x = x0 + Z y, allowing the preconditioner to
change at every outer iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

OUTCOME_CONVERGED = "converged"
OUTCOME_MAX_ITER = "max-iter"
OUTCOME_BREAKDOWN = "breakdown"

_BREAKDOWN_REL = 1e-14


@dataclass
class KrylovRun:
    """Settings and, after a solve, the iteration record."""

    tolerance: float = 1e-6
    max_iterations: int = 200
    restart: Optional[int] = None
    history: list = field(default_factory=list)  # (iteration, relative residual)
    outcome: str = ""

    def settings(self):
        return KrylovRun(self.tolerance, self.max_iterations, self.restart)

    @property
    def iterations(self):
        return self.history[-1][0] if self.history else 0


def _givens(a, b):
    """Unitary rotation [[c, s], [-conj(s), c]] zeroing the second entry."""
    if a == 0.0:
        return 0.0, 1.0 + 0.0j
    t = np.hypot(abs(a), abs(b))
    c = abs(a) / t
    s = (a / abs(a)) * np.conj(b) / t
    return c, s


def _gmres_driver(apply_op, precond_for, b, run, store_z):
    """Shared restart loop; store_z selects flexible (FGMRES) reconstruction."""
    settings = run.settings() if run is not None else KrylovRun()
    out = settings.settings()
    b = np.asarray(b, dtype=complex)
    n = b.shape[0]
    x = np.zeros(n, dtype=complex)

    beta0 = np.linalg.norm(b)
    if beta0 == 0.0 or n == 0:
        out.history = [(0, 0.0)]
        out.outcome = OUTCOME_CONVERGED
        return x, out

    out.history = [(0, 1.0)]
    cycle_len = settings.restart or settings.max_iterations
    total = 0
    outcome = None

    while total < settings.max_iterations and outcome is None:
        r = b - apply_op(x) if total else b.copy()
        beta = np.linalg.norm(r)
        if beta / beta0 <= settings.tolerance:
            outcome = OUTCOME_CONVERGED
            break

        basis = [r / beta]
        z_basis = []
        h_cols = []
        cs, sn = [], []
        g = [beta]
        j = 0
        converged = False
        broke_down = False

        while j < cycle_len and total < settings.max_iterations:
            z = precond_for(total)(basis[j])
            if store_z:
                z_basis.append(z)
            w = apply_op(z)
            w_scale = np.linalg.norm(w)

            col = np.zeros(j + 2, dtype=complex)
            for i in range(j + 1):
                hij = np.vdot(basis[i], w)
                w = w - hij * basis[i]
                col[i] = hij
            for i in range(j + 1):  # one reorthogonalization pass
                corr = np.vdot(basis[i], w)
                w = w - corr * basis[i]
                col[i] += corr
            h_next = np.linalg.norm(w)
            col[j + 1] = h_next

            # previous rotations, then a new one zeroing the subdiagonal
            for i in range(j):
                ci, si = cs[i], sn[i]
                col[i], col[i + 1] = (
                    ci * col[i] + si * col[i + 1],
                    -np.conj(si) * col[i] + ci * col[i + 1],
                )
            c, s = _givens(col[j], col[j + 1])
            cs.append(c)
            sn.append(s)
            col[j] = c * col[j] + s * col[j + 1]
            col[j + 1] = 0.0
            h_cols.append(col[: j + 1])
            g.append(-np.conj(s) * g[j])
            g[j] = c * g[j]

            total += 1
            j += 1
            relres = abs(g[j]) / beta0
            out.history.append((total, relres))

            happy = h_next <= _BREAKDOWN_REL * max(w_scale, 1.0)
            if relres <= settings.tolerance:
                converged = True
            elif happy:
                broke_down = True  # basis exhausted without reaching tolerance
            else:
                basis.append(w / h_next)
                continue
            break

        # solve the triangular least squares and fold the cycle into x
        if j > 0:
            y = np.zeros(j, dtype=complex)
            for i in range(j - 1, -1, -1):
                acc = g[i] - sum(h_cols[m][i] * y[m] for m in range(i + 1, j))
                # a zero diagonal entry can appear at breakdown on singular
                # operators; the minimum-norm choice keeps the iterate finite
                y[i] = acc / h_cols[i][i] if h_cols[i][i] != 0.0 else 0.0
            if store_z:
                dx = sum(y[m] * z_basis[m] for m in range(j))
            else:
                combo = sum(y[m] * basis[m] for m in range(j))
                dx = precond_for(0)(combo)
            x = x + dx

        if converged:
            outcome = OUTCOME_CONVERGED
        elif broke_down:
            outcome = OUTCOME_BREAKDOWN

    out.outcome = outcome or OUTCOME_MAX_ITER
    return x, out


def gmres(apply_op, precond, b, run=None):
    """Right-preconditioned GMRES; returns (solution, completed KrylovRun)."""
    if precond is None:
        fixed = lambda v: v
    else:
        fixed = precond
    return _gmres_driver(apply_op, lambda _total: fixed, b, run, store_z=False)


def fgmres(apply_op, precond_provider, b, run=None):
    """Flexible GMRES; the preconditioner may differ at each iteration.

    precond_provider(j) returns the preconditioner applied at global
    iteration j (a callable on vectors).
    """
    return _gmres_driver(apply_op, precond_provider, b, run, store_z=True)


def format_history_csv(run):
    """Residual history as CSV text with columns iter,relres."""
    lines = ["iter,relres"]
    lines.extend(f"{it},{res:.12e}" for it, res in run.history)
    return "\n".join(lines) + "\n"
