"""Density operators and Born-rule expectations on a finite-dimensional space.

A discretized parameter taking ``r`` values is represented by a Hermitian
operator ``sum_i theta_i u_i u_i^dagger``; a state of knowledge is a density
operator ``rho``.  The expectation of ``xi(theta)`` in state ``rho`` is
``trace(rho xi(A))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

from .errors import DimensionMismatch, NonHermitianInput, UndefinedAtEigenvalue, UnsupportedPrior
from .priors import DiscreteUniform, GammaPrior, LogUniform, Normal, PointMass

HERMITIAN_TOL = 1e-12

ScalarFunction = Union[Callable[[float], float], Mapping[float, float]]


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    """Operator given by real eigenvalues and orthonormal (complex) eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=float).reshape(-1)
        U = np.array(self.eigenvectors, dtype=complex)
        if U.shape != (lam.shape[0], lam.shape[0]):
            raise DimensionMismatch(f"{lam.shape[0]} eigenvalues but eigenvectors {U.shape}")
        eye = np.eye(lam.shape[0])
        if not np.array_equal(U, eye) and np.max(np.abs(U.conj().T @ U - eye)) > HERMITIAN_TOL * 100:
            raise NonHermitianInput("eigenvectors are not orthonormal")
        lam.setflags(write=False)
        U.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", U)

    @classmethod
    def diagonal(cls, values) -> "SpectralOperator":
        values = np.asarray(values, dtype=float)
        return cls(values, np.eye(values.shape[0]))

    @classmethod
    def from_matrix(cls, A) -> "SpectralOperator":
        A = np.asarray(A, dtype=complex)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch("operator must be square")
        if np.max(np.abs(A - A.conj().T)) > HERMITIAN_TOL * max(1.0, np.max(np.abs(A))):
            raise NonHermitianInput("operator is not Hermitian")
        lam, U = np.linalg.eigh(A)
        return cls(lam, U)

    @property
    def r(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.conj().T


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, positive semidefinite, unit-trace matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        rho = np.array(self.matrix, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise DimensionMismatch("density operator must be square")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise NonHermitianInput("density operator is not Hermitian")
        if abs(np.trace(rho) - 1.0) > HERMITIAN_TOL:
            raise ValueError(f"trace is {np.trace(rho)}, expected 1")
        diag = np.diag(rho).real
        if np.count_nonzero(rho - np.diag(np.diag(rho))) == 0:
            min_eig = float(diag.min())
        else:
            min_eig = float(np.linalg.eigvalsh(rho)[0])
        if min_eig < -HERMITIAN_TOL:
            raise ValueError("density operator is not positive semidefinite")
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)

    @property
    def r(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def uniform(cls, r: int) -> "DensityOperator":
        """The non-informative state ``I / r``."""
        return cls(np.eye(r) / r)

    @classmethod
    def from_probabilities(cls, probs, basis) -> "DensityOperator":
        """``sum_i p_i u_i u_i^dagger`` for orthonormal columns ``u_i``."""
        p = np.asarray(probs, dtype=float)
        U = np.asarray(basis, dtype=complex)
        if np.any(p < 0) or not math.isclose(p.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("probabilities must be nonnegative and sum to one")
        rho = (U * p) @ U.conj().T
        return cls(0.5 * (rho + rho.conj().T))


def _evaluate(xi: ScalarFunction, value: float) -> float:
    try:
        with np.errstate(divide="raise", invalid="raise", over="raise"):
            out = xi[value] if isinstance(xi, Mapping) else xi(value)
    except (KeyError, ValueError, ArithmeticError) as exc:
        raise UndefinedAtEigenvalue(f"function undefined at {value!r}: {exc}") from None
    out = float(out)
    if not math.isfinite(out):
        raise UndefinedAtEigenvalue(f"function value at {value!r} is not finite")
    return out


def apply_function(op: SpectralOperator, xi: ScalarFunction) -> SpectralOperator:
    """``xi(A)``: same eigenvectors, eigenvalues mapped through ``xi``.

    ``xi`` is a callable or a lookup table keyed by eigenvalue.
    """
    return SpectralOperator(
        np.array([_evaluate(xi, float(v)) for v in op.eigenvalues]), op.eigenvectors
    )


def born_expectation(rho: DensityOperator, op: SpectralOperator, xi: ScalarFunction | None = None) -> float:
    """``trace(rho xi(A))`` (``xi`` defaults to the identity)."""
    if rho.r != op.r:
        raise DimensionMismatch(f"state has dimension {rho.r}, operator {op.r}")
    target = op if xi is None else apply_function(op, xi)
    U = target.eigenvectors
    # trace(rho U diag(v) U^dagger) = sum_k v_k <u_k| rho |u_k>
    if np.array_equal(U, np.eye(op.r)):
        weights = np.diag(rho.matrix)
    else:
        weights = np.sum(U.conj() * (rho.matrix @ U), axis=0)
    if np.max(np.abs(weights.imag)) > 1e-10:
        raise NonHermitianInput("state has complex diagonal in the operator basis")
    return math.fsum(weights.real * target.eigenvalues)


def criterion46_via_born(prior: GammaPrior, lambdas, m: int, grid_size: int) -> float:
    """Weighted prior variance ``sum_j lambda_j E(gamma_j - mu_j)^2`` via Born expectations.

    Each ``gamma_j`` is discretized to ``grid_size`` values, one per
    equal-probability cell of its prior (the conditional mean within the
    cell), so that the non-informative state ``I / r`` weights the grid
    exactly like the prior.  The result converges to the exact weighted
    variance as the grid is refined.
    """
    prior.require_supported()
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    if m != prior.m or len(lambdas) < m:
        raise DimensionMismatch(f"m={m} does not match the prior or the eigenvalues")
    for comp in prior.components:
        if not isinstance(comp, (Normal, PointMass, LogUniform, DiscreteUniform)):
            raise UnsupportedPrior(f"cannot discretize {comp!r}")
    rho = DensityOperator.uniform(grid_size)
    total = []
    for j, comp in enumerate(prior.components):
        op = SpectralOperator.diagonal(comp.cell_means(grid_size))
        mu = comp.mean
        total.append(float(lambdas[j]) * born_expectation(rho, op, lambda g: (g - mu) ** 2))
    return math.fsum(total)
