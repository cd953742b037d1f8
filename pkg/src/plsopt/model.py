"""Full and reduced regression parameters.

The full parameter holds the second moments of a centered pair ``(x, y)``:
the predictor covariance ``sigma_xx``, the cross covariance ``sigma_xy`` and
the residual variance ``sigma2 = var(y | x)``.  Everything else (the true
regression vector, the eigenbasis, the Krylov sequence, the PLS reduction)
is derived from it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidSpec, NonPositiveDefinite

ZERO_TOL = 1e-10
RANK_TOL = 1e-8
GROUP_TOL = 1e-9
SYMMETRY_TOL = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class FullParameter:
    """Second-moment parameter of a centered predictor/response pair.

    Parameters
    ----------
    sigma_xx : array_like, shape (p, p)
        Symmetric positive definite covariance of ``x``.
    sigma_xy : array_like, shape (p,)
        Covariance between ``x`` and ``y``.
    sigma2 : float
        Residual variance ``var(y) - sigma_xy' sigma_xx^{-1} sigma_xy``.
    """

    sigma_xx: np.ndarray
    sigma_xy: np.ndarray
    sigma2: float

    def __post_init__(self):
        sxx = _frozen(self.sigma_xx)
        sxy = _frozen(self.sigma_xy).reshape(-1)
        if sxx.ndim != 2 or sxx.shape[0] != sxx.shape[1]:
            raise DimensionMismatch(f"sigma_xx must be square, got shape {sxx.shape}")
        if sxy.shape[0] != sxx.shape[0]:
            raise DimensionMismatch(
                f"sigma_xy has length {sxy.shape[0]}, sigma_xx is {sxx.shape[0]}x{sxx.shape[0]}"
            )
        if not (np.all(np.isfinite(sxx)) and np.all(np.isfinite(sxy))):
            raise InvalidSpec("non-finite entries in covariance parameters")
        scale = max(float(np.max(np.abs(sxx))), np.finfo(float).tiny)
        if np.max(np.abs(sxx - sxx.T)) > SYMMETRY_TOL * scale:
            raise InvalidSpec("sigma_xx is not symmetric")
        lam = np.linalg.eigvalsh(sxx)
        if lam[0] <= 1e-12 * max(lam[-1], 0.0) or lam[-1] <= 0.0:
            raise NonPositiveDefinite(f"smallest eigenvalue {lam[0]:.3e} is not positive")
        s2 = float(self.sigma2)
        if not np.isfinite(s2) or s2 < 0.0:
            raise InvalidSpec(f"sigma2 must be a nonnegative finite number, got {s2}")
        object.__setattr__(self, "sigma_xx", sxx)
        object.__setattr__(self, "sigma_xy", _frozen(sxy))
        object.__setattr__(self, "sigma2", s2)

    @classmethod
    def from_var_y(cls, sigma_xx, sigma_xy, var_y: float) -> "FullParameter":
        """Build from ``var(y)`` instead of the residual variance."""
        sxx = np.asarray(sigma_xx, dtype=float)
        sxy = np.asarray(sigma_xy, dtype=float)
        explained = float(sxy @ np.linalg.solve(sxx, sxy))
        sigma2 = float(var_y) - explained
        if sigma2 < -1e-12 * max(1.0, abs(float(var_y))):
            raise InvalidSpec(
                f"var(y)={var_y} is smaller than the explained variance {explained}"
            )
        return cls(sxx, sxy, max(sigma2, 0.0))

    @property
    def p(self) -> int:
        return self.sigma_xx.shape[0]

    @cached_property
    def beta(self) -> np.ndarray:
        return _frozen(beta_true(self))

    @property
    def var_y(self) -> float:
        return self.sigma2 + float(self.sigma_xy @ self.beta)

    def to_dict(self) -> dict:
        return {
            "sigma_xx": self.sigma_xx.tolist(),
            "sigma_xy": self.sigma_xy.tolist(),
            "sigma2": self.sigma2,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FullParameter":
        try:
            return cls(d["sigma_xx"], d["sigma_xy"], d["sigma2"])
        except KeyError as exc:
            raise InvalidSpec(f"missing field {exc.args[0]!r}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "FullParameter":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigen-decomposition of a covariance matrix, eigenvalues descending.

    ``groups`` partitions the column indices into blocks of (numerically)
    equal eigenvalues.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    groups: tuple[tuple[int, ...], ...]

    @property
    def p(self) -> int:
        return self.eigenvalues.shape[0]

    def coordinates(self, v) -> np.ndarray:
        return self.eigenvectors.T @ np.asarray(v, dtype=float)


def _sign_normalize(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def spectral_decomposition(sigma_xx, group_tol: float = GROUP_TOL) -> SpectralDecomposition:
    """Deterministic symmetric eigen-decomposition.

    Each eigenvector is signed so its largest-magnitude entry is positive;
    eigenvalues within ``group_tol * lambda_max`` of their neighbour are
    placed in the same multiplicity group.
    """
    s = np.asarray(sigma_xx, dtype=float)
    lam, vecs = np.linalg.eigh(s)
    lam = lam[::-1]
    vecs = _sign_normalize(vecs[:, ::-1])
    tol = group_tol * max(abs(lam[0]), np.finfo(float).tiny)
    groups: list[list[int]] = [[0]]
    for i in range(1, lam.shape[0]):
        if lam[groups[-1][-1]] - lam[i] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return SpectralDecomposition(
        _frozen(lam), _frozen(vecs), tuple(tuple(g) for g in groups)
    )


def _zero_tol(beta: np.ndarray, zero_tol: float) -> float:
    return zero_tol * max(1.0, float(np.max(np.abs(beta))) if beta.size else 1.0)


def aligned_eigenbasis(phi: FullParameter, zero_tol: float = ZERO_TOL) -> SpectralDecomposition:
    """Eigenbasis of ``phi.sigma_xx`` rotated inside each degenerate eigenspace.

    Within a multiplicity group the first vector is the normalized projection
    of ``beta`` onto that eigenspace; the rest of the group is completed by
    Gram-Schmidt.  Non-degenerate eigenvectors keep the sign convention of
    :func:`spectral_decomposition`.
    """
    spec = spectral_decomposition(phi.sigma_xx)
    vecs = np.array(spec.eigenvectors)
    beta = phi.beta
    tol = _zero_tol(beta, zero_tol)
    for grp in spec.groups:
        if len(grp) == 1:
            continue
        cols = list(grp)
        block = vecs[:, cols]
        c = block.T @ beta
        if np.linalg.norm(c) <= tol:
            continue
        k = len(cols)
        q, _ = np.linalg.qr(np.column_stack([c, np.eye(k)]))
        if q[:, 0] @ c < 0:
            q = -q
        rotated = block @ q
        rotated[:, 1:] = _sign_normalize(rotated[:, 1:])
        vecs[:, cols] = rotated
    return SpectralDecomposition(spec.eigenvalues, _frozen(vecs), spec.groups)


@dataclass(frozen=True, eq=False)
class ReducedParameter:
    """PLS reduction: ``m`` pairs ``(gamma_j, d_j)`` with ``beta = sum gamma_j d_j``.

    ``directions`` stores the ``d_j`` as columns.  ``eigenvalues`` are the
    associated eigenvalues of the covariance the reduction came from, when
    known.
    """

    gammas: np.ndarray
    directions: np.ndarray
    eigenvalues: np.ndarray | None = None
    zero_tol: float = ZERO_TOL

    def __post_init__(self):
        g = _frozen(self.gammas).reshape(-1)
        d = _frozen(self.directions)
        if d.ndim != 2 or d.shape[1] != g.shape[0]:
            raise DimensionMismatch(
                f"{g.shape[0]} coefficients but directions of shape {d.shape}"
            )
        if np.any(np.abs(g) <= self.zero_tol):
            raise InvalidSpec("every gamma_j must be nonzero")
        if g.shape[0] and np.max(np.abs(d.T @ d - np.eye(g.shape[0]))) > 1e-8:
            raise InvalidSpec("directions must be orthonormal")
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "directions", d)
        if self.eigenvalues is not None:
            lam = _frozen(self.eigenvalues).reshape(-1)
            if lam.shape != g.shape:
                raise DimensionMismatch("one eigenvalue per component is required")
            object.__setattr__(self, "eigenvalues", lam)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, Sequence[float]]], p: int | None = None):
        if not pairs:
            if p is None:
                raise DimensionMismatch("p is required for an empty reduction")
            return cls(np.zeros(0), np.zeros((p, 0)))
        gam = [float(g) for g, _ in pairs]
        dirs = np.column_stack([np.asarray(d, dtype=float) for _, d in pairs])
        return cls(np.array(gam), dirs)

    @property
    def m(self) -> int:
        return self.gammas.shape[0]

    @property
    def p(self) -> int:
        return self.directions.shape[0]

    @property
    def components(self) -> list[tuple[float, np.ndarray]]:
        return [(float(self.gammas[j]), self.directions[:, j]) for j in range(self.m)]

    def eigen_residual(self, sigma_xx) -> float:
        """Largest ``||sigma_xx d_j - lambda_j d_j||`` over the components."""
        s = np.asarray(sigma_xx, dtype=float)
        if self.m == 0:
            return 0.0
        sd = s @ self.directions
        lam = np.einsum("ij,ij->j", self.directions, sd)
        return float(np.max(np.linalg.norm(sd - self.directions * lam, axis=0)))


@dataclass(frozen=True, eq=False)
class AlternativeReduction:
    """A rival reduction given by its coordinates ``zeta`` on the eigenbasis."""

    zeta: np.ndarray

    def __post_init__(self):
        z = _frozen(self.zeta).reshape(-1)
        if not np.all(np.isfinite(z)):
            raise InvalidSpec("zeta must be finite")
        object.__setattr__(self, "zeta", z)


@dataclass(frozen=True, eq=False)
class KrylovBasis:
    """The sequence ``sigma_xy, S sigma_xy, ..., S^(a-1) sigma_xy`` as columns."""

    vectors: np.ndarray

    @property
    def a(self) -> int:
        return self.vectors.shape[1]


def beta_true(phi: FullParameter) -> np.ndarray:
    """Regression vector solving ``sigma_xx beta = sigma_xy``."""
    try:
        c = np.linalg.cholesky(phi.sigma_xx)
    except np.linalg.LinAlgError:
        raise NonPositiveDefinite("sigma_xx is not positive definite") from None
    z = np.linalg.solve(c, phi.sigma_xy)
    return np.linalg.solve(c.T, z)


def krylov_basis(phi: FullParameter, a: int) -> KrylovBasis:
    if a < 1:
        raise InvalidSpec("a must be at least 1")
    vecs = [np.array(phi.sigma_xy)]
    for _ in range(a - 1):
        vecs.append(phi.sigma_xx @ vecs[-1])
    return KrylovBasis(_frozen(np.column_stack(vecs)))


def krylov_orthobasis(sigma_xx, start, max_dim: int | None = None, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the Krylov space generated by ``start``.

    Arnoldi with full re-orthogonalization: a new direction is accepted only
    if its component orthogonal to the current basis exceeds
    ``rank_tol * ||sigma_xx||_2``.  The number of columns is the numerical
    rank of the Krylov matrix, obtained without forming its ill-conditioned
    monomial columns.
    """
    s = np.asarray(sigma_xx, dtype=float)
    v = np.asarray(start, dtype=float)
    p = s.shape[0]
    max_dim = p if max_dim is None else min(max_dim, p)
    nv = np.linalg.norm(v)
    if nv == 0.0 or max_dim <= 0:
        return np.zeros((p, 0))
    smax = np.linalg.norm(s, 2)
    basis = [v / nv]
    while len(basis) < max_dim:
        q = np.column_stack(basis)
        w = s @ basis[-1]
        for _ in range(2):
            w = w - q @ (q.T @ w)
        nw = np.linalg.norm(w)
        if nw <= rank_tol * smax:
            break
        basis.append(w / nw)
    return np.column_stack(basis)


def krylov_dimension(sigma_xx, start, rank_tol: float = RANK_TOL, max_dim: int | None = None) -> int:
    return krylov_orthobasis(sigma_xx, start, max_dim, rank_tol).shape[1]


def relevant_component_count(phi: FullParameter, rank_tol: float = RANK_TOL) -> int:
    """Number of relevant components ``m``: the rank of the Krylov matrix."""
    return krylov_dimension(phi.sigma_xx, phi.sigma_xy, rank_tol)


def _ordered_components(spec: SpectralDecomposition, gam: np.ndarray) -> list[int]:
    weight = np.abs(gam) * spec.eigenvalues
    # weights equal up to rounding count as ties, broken by eigen index
    quantum = 1e-12 * max(float(np.max(weight)), np.finfo(float).tiny)
    key = np.round(weight / quantum)
    return sorted(range(gam.shape[0]), key=lambda j: (-key[j], j))


def reduce_to_theta(
    phi: FullParameter,
    m: int,
    *,
    strict: bool = True,
    zero_tol: float = ZERO_TOL,
    rank_tol: float = RANK_TOL,
) -> ReducedParameter:
    """PLS reduction ``theta`` of ``phi`` with ``m`` components.

    With ``strict=True`` (the default) ``m`` must equal the relevant
    component count, so that ``beta(theta)`` reproduces ``beta`` exactly.
    With ``strict=False`` the ``m`` eigen-terms of largest ``|gamma_j|
    lambda_j`` are kept, which is the best ``m``-term truncation in
    prediction error.  Components are ordered by descending
    ``|gamma_j| lambda_j``, ties broken by eigen index.
    """
    if m < 0 or m > phi.p:
        raise DimensionMismatch(f"m={m} outside [0, {phi.p}]")
    spec = aligned_eigenbasis(phi, zero_tol)
    gam = spec.coordinates(phi.beta)
    tol = _zero_tol(phi.beta, zero_tol)
    nonzero = np.abs(gam) > tol
    if strict:
        m_true = relevant_component_count(phi, rank_tol)
        if m != m_true or int(nonzero.sum()) != m_true:
            raise DimensionMismatch(
                f"m={m} but the relevant component count is {m_true}"
            )
    order = [j for j in _ordered_components(spec, gam) if nonzero[j]][:m]
    if len(order) < m:
        raise DimensionMismatch(f"only {len(order)} nonzero eigen-coordinates, m={m}")
    return ReducedParameter(
        gam[order],
        spec.eigenvectors[:, order],
        spec.eigenvalues[order],
        zero_tol=tol,
    )


def beta_of_theta(theta: ReducedParameter) -> np.ndarray:
    return theta.directions @ theta.gammas


def beta_of_eta(eta: AlternativeReduction, spec: SpectralDecomposition) -> np.ndarray:
    if eta.zeta.shape[0] != spec.p:
        raise DimensionMismatch(f"zeta has length {eta.zeta.shape[0]}, basis has {spec.p}")
    return spec.eigenvectors @ eta.zeta


def eta_from_beta(beta_candidate, spec: SpectralDecomposition) -> AlternativeReduction:
    """Express any coefficient vector as a rival reduction on ``spec``'s basis."""
    return AlternativeReduction(spec.coordinates(beta_candidate))
