"""Competitor estimators: OLS, ridge, principal component regression, PLS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpec, SingularDesign
from .sample import Dataset, empirical_moments, fit_pls

KINDS = ("ols", "ridge", "pcr", "pls")
RIDGE_GRID = (0.001, 0.01, 0.1, 1.0, 10.0)


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str
    param: float | int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown estimator kind {self.kind!r}")
        if self.kind == "ols":
            if self.param is not None:
                raise InvalidSpec("ols takes no parameter")
        elif self.kind == "ridge":
            if self.param is None or not float(self.param) >= 0:
                raise InvalidSpec("ridge needs a nonnegative penalty k")
            object.__setattr__(self, "param", float(self.param))
        else:
            if self.param is None or int(self.param) != self.param or int(self.param) < 1:
                raise InvalidSpec(f"{self.kind} needs a positive integer component count")
            object.__setattr__(self, "param", int(self.param))

    @classmethod
    def parse(cls, text: str) -> "EstimatorSpec":
        """Parse ``"ols"``, ``"ridge:0.1"``, ``"pcr:3"`` or ``"pls:2"``."""
        kind, _, arg = text.strip().partition(":")
        kind = kind.lower()
        if not arg:
            return cls(kind)
        try:
            value = float(arg) if kind == "ridge" else int(arg)
        except ValueError:
            raise InvalidSpec(f"bad estimator parameter in {text!r}") from None
        return cls(kind, value)

    def __str__(self) -> str:
        if self.param is None:
            return self.kind
        if self.kind == "ridge":
            return f"ridge:{self.param:.6g}"
        return f"{self.kind}:{self.param}"


@dataclass(frozen=True, eq=False)
class FittedLinear:
    """Coefficients with the centering offsets used to fit them."""

    beta_hat: np.ndarray
    x_mean: np.ndarray
    y_mean: float

    def predict(self, x_new):
        return self.y_mean + (np.asarray(x_new, dtype=float) - self.x_mean) @ self.beta_hat


def ridge_grid(scale: float, factors=RIDGE_GRID) -> list[EstimatorSpec]:
    """Ridge specs with penalties ``factor * scale``; use ``trace(S)/p`` as scale."""
    return [EstimatorSpec("ridge", f * scale) for f in factors]


def fit(spec: EstimatorSpec, data: Dataset, ddof: int = 1) -> FittedLinear:
    p = data.p
    if spec.kind in ("pcr", "pls") and spec.param > p:
        raise InvalidSpec(f"{spec} needs at most p={p} components")
    if spec.kind == "pls":
        f = fit_pls(data, spec.param, ddof=ddof)
        return FittedLinear(f.beta_hat, f.x_mean, f.y_mean)
    x_mean, y_mean, Xc, yc, S, s = empirical_moments(data, ddof)
    if spec.kind == "ols":
        lam = np.linalg.eigvalsh(S)
        if lam[0] <= 1e-12 * max(lam[-1], np.finfo(float).tiny):
            raise SingularDesign("empirical covariance is singular")
        beta = np.linalg.solve(S, s)
    elif spec.kind == "ridge":
        try:
            beta = np.linalg.solve(S + spec.param * np.eye(p), s)
        except np.linalg.LinAlgError:
            raise SingularDesign(f"{spec}: penalized covariance is singular") from None
    else:
        lam, V = np.linalg.eigh(S)
        lam, V = lam[::-1][: spec.param], V[:, ::-1][:, : spec.param]
        if lam[-1] <= 1e-12 * max(lam[0], np.finfo(float).tiny):
            raise SingularDesign(f"principal component {spec.param} has zero variance")
        beta = V @ ((V.T @ s) / lam)
    return FittedLinear(beta, x_mean, y_mean)
