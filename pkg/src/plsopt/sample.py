"""Sample PLS regression with a single response.

Two routes to the ``a``-component estimator are implemented:

* Krylov form: ``beta_a`` is the ``S``-inner-product projection of the OLS
  direction onto the span of ``s, S s, ..., S^(a-1) s`` where ``S`` and
  ``s`` are the empirical covariances.
* NIPALS: the classical deflation algorithm on the centered data matrix.

Both give the same vector; the NIPALS route is kept as a cross-check.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidSpec, RankDeficientKrylov, SingularGram
from .model import RANK_TOL, krylov_orthobasis


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations ``X`` (n x p) and responses ``y`` (n,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).reshape(-1)
        if X.ndim != 2:
            raise DimensionMismatch(f"X must be 2-D, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"X has {X.shape[0]} rows, y has {y.shape[0]}")
        if X.shape[0] < 2:
            raise InvalidSpec("at least two observations are required")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidSpec("data contain non-finite entries")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_csv(cls, path, header: bool = False) -> "Dataset":
        """Load a CSV whose last column is the response."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if header:
            rows = rows[1:]
        rows = [r for r in rows if r and any(c.strip() for c in r)]
        if not rows:
            raise InvalidSpec(f"{path}: no data rows")
        width = len(rows[0])
        if width < 2 or any(len(r) != width for r in rows):
            raise InvalidSpec(f"{path}: ragged or too narrow rows")
        try:
            arr = np.array([[float(c) for c in r] for r in rows])
        except ValueError as exc:
            raise InvalidSpec(f"{path}: {exc}") from None
        return cls(arr[:, :-1], arr[:, -1])

    def to_csv(self, path, header: bool = False) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if header:
                w.writerow([f"x{j + 1}" for j in range(self.p)] + ["y"])
            for row, yi in zip(self.X, self.y):
                w.writerow([repr(float(v)) for v in row] + [repr(float(yi))])

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx])


def empirical_moments(data: Dataset, ddof: int = 1):
    """Column means and the centered covariances ``S`` and ``s``."""
    x_mean = data.X.mean(axis=0)
    y_mean = float(data.y.mean())
    Xc = data.X - x_mean
    yc = data.y - y_mean
    div = data.n - ddof
    return x_mean, y_mean, Xc, yc, Xc.T @ Xc / div, Xc.T @ yc / div


@dataclass(frozen=True, eq=False)
class PlsFit:
    """Result of :func:`fit_pls`.

    ``e_hat`` holds the raw Krylov vectors ``s, S s, ...`` as columns and
    ``alpha_hat`` their coefficients, so that ``beta_hat = e_hat @ alpha_hat``.
    """

    a: int
    beta_hat: np.ndarray
    alpha_hat: np.ndarray
    e_hat: np.ndarray
    x_mean: np.ndarray
    y_mean: float
    sigma_xx_hat: np.ndarray
    sigma_xy_hat: np.ndarray

    @property
    def terms(self) -> np.ndarray:
        """The vectors ``alpha_j e_j`` as columns (p x a)."""
        return self.e_hat * self.alpha_hat

    @property
    def reconciliation_error(self) -> float:
        return float(np.linalg.norm(self.terms.sum(axis=1) - self.beta_hat))


def krylov_vectors(sigma_xx, sigma_xy, a: int) -> np.ndarray:
    vecs = [np.asarray(sigma_xy, dtype=float)]
    for _ in range(a - 1):
        vecs.append(sigma_xx @ vecs[-1])
    return np.column_stack(vecs)


def nipals_pls(Xc: np.ndarray, yc: np.ndarray, a: int) -> np.ndarray:
    """PLS1 coefficients by NIPALS deflation of centered data."""
    X = np.array(Xc, dtype=float)
    y = np.array(yc, dtype=float)
    p = X.shape[1]
    W = np.zeros((p, a))
    P = np.zeros((p, a))
    q = np.zeros(a)
    for j in range(a):
        w = X.T @ y
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise RankDeficientKrylov(f"zero weight vector at component {j + 1}")
        w /= nw
        t = X @ w
        tt = t @ t
        P[:, j] = X.T @ t / tt
        q[j] = (y @ t) / tt
        X -= np.outer(t, P[:, j])
        y -= q[j] * t
        W[:, j] = w
    return W @ np.linalg.solve(P.T @ W, q)


def fit_pls(
    data: Dataset,
    a: int,
    *,
    ddof: int = 1,
    rank_tol: float = RANK_TOL,
    cross_check: bool = False,
) -> PlsFit:
    """Fit ``a``-component PLS regression.

    Raises
    ------
    RankDeficientKrylov
        If the empirical Krylov block has numerical rank below ``a``
        (for example a constant response, where ``s = 0``).
    """
    if a < 1 or a > data.p:
        raise InvalidSpec(f"a must lie in [1, {data.p}], got {a}")
    x_mean, y_mean, Xc, yc, S, s = empirical_moments(data, ddof)
    V = krylov_orthobasis(S, s, a, rank_tol)
    if V.shape[1] < a:
        raise RankDeficientKrylov(
            f"Krylov block has numerical rank {V.shape[1]} < a={a}"
        )
    # least squares of y on the Krylov scores is the S-projection onto span(V)
    coef, *_ = np.linalg.lstsq(Xc @ V, yc, rcond=None)
    beta = V @ coef
    E = krylov_vectors(S, s, a)
    norms = np.linalg.norm(E, axis=0)
    c, *_ = np.linalg.lstsq(E / norms, beta, rcond=None)
    alpha = c / norms
    if cross_check:
        other = nipals_pls(Xc, yc, a)
        if np.linalg.norm(other - beta) > 1e-6 * max(1.0, np.linalg.norm(beta)):
            raise RuntimeError("NIPALS and Krylov-form PLS estimates disagree")
    return PlsFit(a, beta, alpha, E, x_mean, y_mean, S, s)


def predict(fit: PlsFit, x_new) -> np.ndarray | float:
    x = np.asarray(x_new, dtype=float)
    if x.shape[-1] != fit.beta_hat.shape[0]:
        raise DimensionMismatch(f"expected {fit.beta_hat.shape[0]} predictors, got {x.shape[-1]}")
    out = fit.y_mean + (x - fit.x_mean) @ fit.beta_hat
    return float(out) if np.ndim(out) == 0 else out


def skew_project(beta_any, krylov, sigma_xx, max_cond: float = 1e12):
    """Split ``beta_any`` into a Krylov part and an ``S``-orthogonal residual.

    Returns ``(zeta, f)`` with ``beta_any = krylov @ zeta + f`` and
    ``krylov' sigma_xx f = 0``.
    """
    b = np.asarray(beta_any, dtype=float)
    K = np.asarray(krylov, dtype=float)
    if K.ndim == 1:
        K = K[:, None]
    S = np.asarray(sigma_xx, dtype=float)
    if K.shape[0] != b.shape[0] or S.shape != (b.shape[0], b.shape[0]):
        raise DimensionMismatch("beta, Krylov vectors and sigma_xx disagree in dimension")
    norms = np.linalg.norm(K, axis=0)
    if np.any(norms == 0.0):
        raise SingularGram("zero Krylov vector")
    U = K / norms
    gram = U.T @ S @ U
    if np.linalg.cond(gram) > max_cond:
        raise SingularGram(f"Gram matrix condition number {np.linalg.cond(gram):.3e}")
    zu = np.linalg.solve(gram, U.T @ S @ b)
    return zu / norms, b - U @ zu


def cross_validate(data: Dataset, a_max: int, folds: int = 5, seed: int = 0) -> list[dict]:
    """K-fold prediction error for ``a = 1..a_max``.

    Returns one ``{"a", "msep"}`` record per component count; ``msep`` is
    ``nan`` when some fold cannot support ``a`` components.
    """
    if folds < 2 or folds > data.n:
        raise InvalidSpec(f"folds must lie in [2, n={data.n}]")
    perm = np.random.default_rng(seed).permutation(data.n)
    parts = np.array_split(perm, folds)
    table = []
    for a in range(1, a_max + 1):
        sse = 0.0
        try:
            for k in range(folds):
                test = parts[k]
                train = np.concatenate([parts[i] for i in range(folds) if i != k])
                fit = fit_pls(data.subset(train), a)
                resid = data.y[test] - predict(fit, data.X[test])
                sse += float(np.sum(resid**2))
            table.append({"a": a, "msep": sse / data.n})
        except RankDeficientKrylov:
            table.append({"a": a, "msep": float("nan")})
    return table
