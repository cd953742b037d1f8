"""Transformation groups acting on the regression parameter.

Group K rotates the eigenvectors of ``sigma_xx`` and maps each eigen
coordinate ``gamma_j`` through a bijective continuous function.  Group G
acts on a reduction ``theta`` with a rotation and positive linear scales.
Bijections are represented as strictly monotone piecewise-linear tables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.linalg import null_space

from .errors import DimensionMismatch, InvalidGroupElement
from .model import (
    ZERO_TOL,
    FullParameter,
    ReducedParameter,
    _zero_tol,
    aligned_eigenbasis,
)


@dataclass(frozen=True, eq=False)
class PiecewiseLinearMap:
    """Strictly monotone piecewise-linear bijection of the real line.

    Defined by breakpoints ``knots -> values``; the first and last segments
    are extended linearly, so the map is onto.
    """

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.knots, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.shape[0] < 2:
            raise InvalidGroupElement("need at least two matching knots and values")
        dx, dy = np.diff(x), np.diff(y)
        if np.any(dx <= 0):
            raise InvalidGroupElement("knots must be strictly increasing")
        if not (np.all(dy > 0) or np.all(dy < 0)):
            raise InvalidGroupElement("table is not strictly monotone")
        object.__setattr__(self, "knots", x)
        object.__setattr__(self, "values", y)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        x, y = self.knots, self.values
        out = np.interp(t, x, y)
        lo_slope = (y[1] - y[0]) / (x[1] - x[0])
        hi_slope = (y[-1] - y[-2]) / (x[-1] - x[-2])
        out = np.where(t < x[0], y[0] + lo_slope * (t - x[0]), out)
        out = np.where(t > x[-1], y[-1] + hi_slope * (t - x[-1]), out)
        return out if out.ndim else float(out)


Scale = Union[float, PiecewiseLinearMap]


@dataclass(frozen=True, eq=False)
class GroupElement:
    """Rotation plus one scale map per coordinate.

    A float scale ``alpha`` means ``gamma -> alpha * gamma`` and must be
    positive; a :class:`PiecewiseLinearMap` is a general bijection.
    """

    rotation: np.ndarray
    scales: tuple[Scale, ...]

    def __post_init__(self):
        o = np.array(self.rotation, dtype=float)
        if o.ndim != 2 or o.shape[0] != o.shape[1]:
            raise InvalidGroupElement("rotation must be square")
        if np.max(np.abs(o.T @ o - np.eye(o.shape[0]))) > 1e-10:
            raise InvalidGroupElement("rotation is not orthogonal")
        scales = []
        for s in self.scales:
            if isinstance(s, PiecewiseLinearMap):
                scales.append(s)
            else:
                s = float(s)
                if not s > 0:
                    raise InvalidGroupElement(f"linear scale {s} is not positive")
                scales.append(s)
        o.setflags(write=False)
        object.__setattr__(self, "rotation", o)
        object.__setattr__(self, "scales", tuple(scales))

    @classmethod
    def identity(cls, p: int, n_scales: int | None = None) -> "GroupElement":
        return cls(np.eye(p), (1.0,) * (p if n_scales is None else n_scales))

    @property
    def is_linear(self) -> bool:
        return all(isinstance(s, float) for s in self.scales)

    def scale(self, j: int, gamma):
        s = self.scales[j]
        if isinstance(s, PiecewiseLinearMap):
            return s(gamma)
        return s * gamma


def apply_K(k: GroupElement, phi: FullParameter) -> FullParameter:
    """Act with ``k`` on the full parameter.

    The covariance becomes ``O sigma_xx O'``; the eigen coordinates of
    ``beta`` are mapped through the scale functions and re-attached to the
    rotated eigenvectors, and ``sigma_xy`` is rebuilt from the new ``beta``.
    ``sigma2`` is left unchanged.
    """
    p = phi.p
    if k.rotation.shape[0] != p:
        raise InvalidGroupElement(f"rotation is {k.rotation.shape[0]}x{k.rotation.shape[0]}, p={p}")
    if len(k.scales) != p:
        raise InvalidGroupElement(f"need {p} scale maps, got {len(k.scales)}")
    spec = aligned_eigenbasis(phi)
    gam = spec.coordinates(phi.beta)
    new_gam = np.array([k.scale(j, gam[j]) for j in range(p)], dtype=float)
    o = k.rotation
    new_vecs = o @ spec.eigenvectors
    sxx = new_vecs @ np.diag(spec.eigenvalues) @ new_vecs.T
    sxx = 0.5 * (sxx + sxx.T)
    beta = new_vecs @ new_gam
    return FullParameter(sxx, sxx @ beta, phi.sigma2)


def apply_G(g: GroupElement, theta: ReducedParameter) -> ReducedParameter:
    """Rotate the directions of ``theta`` and rescale its coefficients."""
    if not g.is_linear:
        raise InvalidGroupElement("group G uses positive linear scales only")
    if g.rotation.shape[0] != theta.p:
        raise InvalidGroupElement("rotation dimension does not match theta")
    if len(g.scales) != theta.m:
        raise InvalidGroupElement(f"need {theta.m} scales, got {len(g.scales)}")
    alphas = np.array(g.scales, dtype=float)
    return ReducedParameter(
        alphas * theta.gammas, g.rotation @ theta.directions, zero_tol=theta.zero_tol
    )


def orbit_invariant_nonzero_count(phi: FullParameter, zero_tol: float = ZERO_TOL) -> int:
    """Number of nonzero eigen coordinates of ``beta``.

    Degenerate eigenspaces contribute at most one, via the aligned basis.
    """
    spec = aligned_eigenbasis(phi, zero_tol)
    gam = spec.coordinates(phi.beta)
    return int(np.sum(np.abs(gam) > _zero_tol(phi.beta, zero_tol)))


def _complete_basis(cols: np.ndarray) -> np.ndarray:
    if cols.shape[1] == cols.shape[0]:
        return cols
    return np.column_stack([cols, null_space(cols.T)])


def transporter(theta_from: ReducedParameter, theta_to: ReducedParameter) -> GroupElement:
    """Element of G carrying ``theta_from`` onto ``theta_to``.

    Sign changes of the coefficients are absorbed into the rotation, so the
    result maps every product ``gamma_j d_j`` exactly; the ``(gamma, d)`` and
    ``(-gamma, -d)`` labellings denote the same parameter.
    """
    if theta_from.m != theta_to.m or theta_from.p != theta_to.p:
        raise DimensionMismatch("reductions must share m and p")
    ratio = theta_to.gammas / theta_from.gammas
    signs = np.sign(ratio)
    target = theta_to.directions * signs
    o = _complete_basis(target) @ _complete_basis(theta_from.directions).T
    return GroupElement(o, tuple(float(a) for a in np.abs(ratio)))


def random_rotation(rng: np.random.Generator, p: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix."""
    q, r = np.linalg.qr(rng.standard_normal((p, p)))
    return q * np.sign(np.diag(r))


def random_monotone_map(
    rng: np.random.Generator, n_knots: int = 5, span: float = 10.0, fix_zero: bool = True
) -> PiecewiseLinearMap:
    """Random increasing or decreasing piecewise-linear bijection.

    With ``fix_zero`` the map sends 0 to 0.
    """
    knots = np.sort(rng.uniform(-span, span, n_knots))
    if fix_zero:
        knots = np.sort(np.append(knots[np.abs(knots) > 1e-3], 0.0))
    slopes = rng.uniform(0.2, 5.0, knots.shape[0] - 1)
    values = np.concatenate([[0.0], np.cumsum(slopes * np.diff(knots))])
    if fix_zero:
        values -= values[np.flatnonzero(knots == 0.0)[0]]
    if rng.random() < 0.5:
        values = -values
    return PiecewiseLinearMap(knots, values)
