"""Pade-type absorbing-operator coefficients and corner algebra.

The impedance functional applied on absorbing and transmission sides is

    B(u, {phi_i}) = -i*k*alpha * [ u + (2/M) * sum_i c_i * (u + phi_i) ]

with M = 2N+1, alpha = exp(i*angle/2) and c_i = tan^2(i*pi/M).  Each
auxiliary field phi_i obeys a one-dimensional Helmholtz-type equation
along the side,

    -d2(phi_i)/dtau2 - k^2*(alpha^2*c_i + 1)*phi_i
                     - k^2*alpha^2*(c_i + 1)*u = 0,

and at a right-angle corner the fields of the two meeting sides couple
through scalar combinations

    psi_ij = -(alpha^2*(c_j+1)*phi_i^x + alpha^2*(c_i+1)*phi_j^y)
             / (alpha^2*c_i + alpha^2*c_j + 1),

which are eliminated analytically: this module also provides the
coefficient tables of the eliminated corner operator used by the
assembly and by the outgoing-trace extraction.

With N = 0 (empty coefficient list, angle 0) everything degenerates to
the basic impedance condition B(u) = -i*k*u.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np


class SingularCornerError(ArithmeticError):
    """Corner-coupling denominator vanished (not reachable for 0 <= angle < pi)."""


@dataclass(frozen=True)
class PadeParams:
    """Coefficients of the rotated Pade expansion of order M = 2N+1.

    Attributes
    ----------
    n_aux : int
        Number of auxiliary fields N per side.
    angle : float
        Branch-rotation angle (radians), 0 <= angle < pi.
    order : int
        Expansion order M = 2N+1.
    alpha : complex
        Rotation factor exp(i*angle/2).
    coeffs : numpy.ndarray
        The N positive reals c_i = tan^2(i*pi/M), strictly increasing.
        ``coeffs[i-1]`` holds c_i; fields are numbered 1..N as in the
        expansion.
    """

    n_aux: int
    angle: float
    order: int = field(init=False)
    alpha: complex = field(init=False)
    coeffs: np.ndarray = field(init=False)

    def __post_init__(self):
        if int(self.n_aux) != self.n_aux or self.n_aux < 0:
            raise ValueError(f"n_aux must be a nonnegative integer, got {self.n_aux}")
        if not 0.0 <= self.angle < math.pi:
            raise ValueError(f"angle must lie in [0, pi), got {self.angle}")
        m = 2 * self.n_aux + 1
        object.__setattr__(self, "order", m)
        object.__setattr__(self, "alpha", cmath.exp(0.5j * self.angle))
        c = np.array([math.tan(i * math.pi / m) ** 2 for i in range(1, self.n_aux + 1)])
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)


def pade_coefficients(n_aux, angle):
    """Build the PadeParams for N = n_aux auxiliary fields and rotation angle."""
    return PadeParams(n_aux=n_aux, angle=float(angle))


def b_trace_coefficients(params, k):
    """Nodewise linear form of B: returns (coef_u, coef_phi).

    B(u, {phi_i}) = coef_u * u + sum_i coef_phi[i-1] * phi_i with

        coef_u   = -i*k*alpha * (1 + (2/M) * sum_i c_i)
        coef_phi = -i*k*alpha * (2/M) * c_i.
    """
    c = params.coeffs
    base = -1j * k * params.alpha
    coef_u = base * (1.0 + (2.0 / params.order) * c.sum())
    coef_phi = base * (2.0 / params.order) * c
    return coef_u, coef_phi


def eval_B(params, k, u, phis):
    """Apply the impedance functional B(u, {phi_i}) pointwise.

    ``u`` may be a scalar or an array of nodal values; ``phis`` must then
    be a sequence of N matching scalars/arrays (one per auxiliary field).
    """
    phis = list(phis) if not isinstance(phis, np.ndarray) else phis
    if len(phis) != params.n_aux:
        raise ValueError(
            f"expected {params.n_aux} auxiliary values, got {len(phis)}"
        )
    coef_u, coef_phi = b_trace_coefficients(params, k)
    out = coef_u * np.asarray(u, dtype=complex)
    for ci, phi in zip(coef_phi, phis):
        out = out + ci * np.asarray(phi, dtype=complex)
    if np.ndim(u) == 0:
        return complex(out)
    return out


def corner_psi(params, i, j, phi_x, phi_y):
    """Corner scalar psi_ij for fields phi_i^x and phi_j^y meeting at a corner.

    Indices are 1-based (1 <= i, j <= N), matching the numbering of the
    expansion coefficients.
    """
    n = params.n_aux
    if not (1 <= i <= n and 1 <= j <= n):
        raise ValueError(f"indices must satisfy 1 <= i, j <= {n}, got i={i}, j={j}")
    a2 = params.alpha ** 2
    ci = params.coeffs[i - 1]
    cj = params.coeffs[j - 1]
    den = a2 * ci + a2 * cj + 1.0
    if abs(den) < 1e-14:
        raise SingularCornerError(
            f"corner denominator |{den}| < 1e-14 for i={i}, j={j}"
        )
    return -(a2 * (cj + 1.0) * phi_x + a2 * (ci + 1.0) * phi_y) / den


def aux_equation_coefficients(params, i, k):
    """Reaction and coupling coefficients of the i-th auxiliary edge equation.

    Returns (reaction, coupling) = (k^2*(alpha^2*c_i + 1), k^2*alpha^2*(c_i + 1))
    so that the field satisfies -phi_i'' - reaction*phi_i - coupling*u = 0
    along the side.  ``i`` is 1-based.
    """
    if not 1 <= i <= params.n_aux:
        raise ValueError(f"index must satisfy 1 <= i <= {params.n_aux}, got {i}")
    a2 = params.alpha ** 2
    ci = params.coeffs[i - 1]
    return k ** 2 * (a2 * ci + 1.0), k ** 2 * a2 * (ci + 1.0)


def aux_row_scale(params, i, k):
    """Symmetrizing scale of the i-th auxiliary equation (1-based ``i``).

    The auxiliary equations are assembled multiplied by the constant

        s_i = 1j * (2/M) * c_i / (k * alpha * (c_i + 1))

    which makes the u<->phi_i coupling blocks of the subdomain matrix
    exactly symmetric: the scaled aux row carries -s_i * coupling =
    -i*k*alpha*(2/M)*c_i on u, identical to the coefficient the u rows
    carry on phi_i through B.  A constant nonzero row scale leaves the
    solution unchanged.
    """
    ci = params.coeffs[i - 1]
    return 1j * (2.0 / params.order) * ci / (k * params.alpha * (ci + 1.0))


def corner_b_coefficients(params, k):
    """Linear form of the corner operator B(phi_j, {psi_ij}) after eliminating psi.

    At a corner the endpoint condition of field phi_j of one side couples
    to the fields phi_i of the crossing side through the scalars psi_ij.
    Substituting psi_ij by its closed form turns B(phi_j, {psi_ij}_i)
    into

        e_diag[j-1] * phi_j + sum_i e_cross[j-1, i-1] * phi_i^cross

    and this function returns (e_diag, e_cross) for wavenumber ``k``.
    Both the assembled endpoint terms (after row scaling) and the
    outgoing corner-trace extraction are built from these tables.
    """
    n = params.n_aux
    c = params.coeffs
    a2 = params.alpha ** 2
    base = -1j * k * params.alpha
    two_m = 2.0 / params.order
    e_diag = np.zeros(n, dtype=complex)
    e_cross = np.zeros((n, n), dtype=complex)
    for jj in range(n):  # field phi_j of the side owning the condition
        cj = c[jj]
        acc = 1.0 + two_m * c.sum()
        for ii in range(n):  # fields phi_i of the crossing side
            ci = c[ii]
            den = a2 * ci + a2 * cj + 1.0
            acc -= two_m * ci * a2 * (ci + 1.0) / den
            e_cross[jj, ii] = -base * two_m * ci * a2 * (cj + 1.0) / den
        e_diag[jj] = base * acc
    return e_diag, e_cross
