"""Prediction-error decompositions and optimality criteria.

All population quantities use the identity

    E(y - b.x)^2 = sigma2 + (beta - b)' S (beta - b)

for a centered pair with ``cov(x) = S``; no sampling is involved.  The
estimator criteria average over replicated data sets and carry standard
errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InsufficientReplicates
from .model import (
    AlternativeReduction,
    FullParameter,
    ReducedParameter,
    aligned_eigenbasis,
    beta_of_eta,
    beta_of_theta,
)
from .priors import GammaPrior
from .sample import PlsFit

CRITERIA = ("assumption_A", "cor2", "thm4_eq37", "thm5_eq46", "thm6_eq31", "thm7_eq47")
MIN_REPLICATES = 100


@dataclass
class CriterionReport:
    """Both sides of an inequality and its verdict.

    ``margin`` is oriented so that a positive value means the criterion is
    satisfied; ``stderr`` is the Monte Carlo standard error of the margin.
    """

    name: str
    lhs: float
    rhs: float
    margin: float
    satisfied: bool
    stderr: float | None = None
    n_replicates: int | None = None
    mode: str = "exact"
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        # plain Python scalars keep reports JSON-serializable
        self.lhs, self.rhs, self.margin = float(self.lhs), float(self.rhs), float(self.margin)
        self.satisfied = bool(self.satisfied)
        if self.stderr is not None:
            self.stderr = float(self.stderr)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "satisfied": self.satisfied,
            "stderr": self.stderr,
            "n_replicates": self.n_replicates,
            "mode": self.mode,
        }
        if self.details:
            out["details"] = self.details
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "CriterionReport":
        return cls(
            d["name"],
            float(d["lhs"]),
            float(d["rhs"]),
            float(d["margin"]),
            bool(d["satisfied"]),
            None if d.get("stderr") is None else float(d["stderr"]),
            None if d.get("n_replicates") is None else int(d["n_replicates"]),
            d.get("mode", "exact"),
            dict(d.get("details", {})),
        )


def _quad(S: np.ndarray, u: np.ndarray, v: np.ndarray | None = None) -> float:
    return float(u @ S @ (u if v is None else v))


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values)


def _stderr(values) -> float:
    arr = np.asarray(values, dtype=float)
    if arr.shape[0] < 2:
        return 0.0
    mu = _mean(arr)
    return math.sqrt(math.fsum((arr - mu) ** 2) / (arr.shape[0] - 1) / arr.shape[0])


def _roundoff(S: np.ndarray, *vecs) -> float:
    """Rounding-error scale of a quadratic form in ``S`` over sums of ``vecs``.

    Values of that size cannot be told apart from zero, so strict
    inequalities at the boundary ``F = 0`` are decided against it.
    """
    size = math.fsum(float(np.linalg.norm(v)) for v in vecs)
    return 64.0 * np.finfo(float).eps * float(np.linalg.norm(S, 2)) * size * size


def tau(beta_candidate, phi: FullParameter) -> float:
    """Mean square prediction error of the linear predictor ``b.x``."""
    d = phi.beta - np.asarray(beta_candidate, dtype=float)
    return phi.sigma2 + _quad(phi.sigma_xx, d)


def _betas(phi: FullParameter, theta: ReducedParameter, eta: AlternativeReduction):
    if theta.p != phi.p:
        raise DimensionMismatch(f"theta has p={theta.p}, phi has p={phi.p}")
    b_theta = beta_of_theta(theta)
    b_eta = beta_of_eta(eta, aligned_eigenbasis(phi))
    return phi.beta, b_theta, b_eta


def big_F(phi: FullParameter, theta: ReducedParameter, eta: AlternativeReduction) -> float:
    """``(b_eta + b_theta - 2 beta)' S (b_eta - b_theta)``.

    Equals ``tau(b_eta) - tau(b_theta)``.
    """
    beta, bt, be = _betas(phi, theta, eta)
    return _quad(phi.sigma_xx, be + bt - 2 * beta, be - bt)


def assumption_A(phi, theta, eta) -> CriterionReport:
    """Positive covariance of ``(b_eta - b_theta).x`` and ``(b_eta + b_theta - 2 beta).x``."""
    beta, bt, be = _betas(phi, theta, eta)
    lhs = big_F(phi, theta, eta)
    guard = _roundoff(phi.sigma_xx, be, bt, beta, beta)
    return CriterionReport("assumption_A", lhs, 0.0, lhs, lhs > guard)


def corollary2_check(phi, theta, eta) -> CriterionReport:
    """Sufficient condition ``Var((beta - b_theta).x) < Var((b_eta - b_theta).x) / 4``."""
    beta, bt, be = _betas(phi, theta, eta)
    lhs = 0.25 * _quad(phi.sigma_xx, be - bt)
    rhs = _quad(phi.sigma_xx, beta - bt)
    guard = _roundoff(phi.sigma_xx, be, bt, beta)
    return CriterionReport(
        "cor2", lhs, rhs, lhs - rhs, lhs - rhs > guard, details={"F": big_F(phi, theta, eta)}
    )


def _check_prior_shapes(prior: GammaPrior, lambdas, irrelevant_gammas):
    prior.require_supported()
    lam = np.asarray(lambdas, dtype=float)
    irr = np.asarray(irrelevant_gammas, dtype=float).reshape(-1)
    m = prior.m
    if lam.shape[0] != m + irr.shape[0]:
        raise DimensionMismatch(
            f"{lam.shape[0]} eigenvalues for {m} relevant and {irr.shape[0]} irrelevant coordinates"
        )
    if np.any(lam <= 0):
        raise DimensionMismatch("eigenvalues must be positive")
    return lam, irr, m


def thm4_criterion(
    prior: GammaPrior,
    lambdas,
    irrelevant_gammas,
    zeta,
    *,
    mode: str = "auto",
    n_draws: int = 100_000,
    seed: int = 0,
) -> CriterionReport:
    """Expected-error criterion for the PLS reduction against a rival ``zeta``.

    ``lhs = 4 sum_{j>m} gamma_j^2 lambda_j`` and ``rhs = E sum_{j<=m}
    (zeta_j - gamma_j)^2 lambda_j + sum_{j>m} zeta_j^2 lambda_j`` under the
    prior.  ``mode`` is ``"analytic"``, ``"monte_carlo"`` or ``"auto"``
    (analytic for normal, point-mass and discrete priors).

    When satisfied, the prior-averaged prediction error of the PLS reduction
    is below that of the rival; both are returned in ``details``.
    """
    lam, irr, m = _check_prior_shapes(prior, lambdas, irrelevant_gammas)
    z = np.asarray(zeta, dtype=float).reshape(-1)
    if z.shape[0] != lam.shape[0]:
        raise DimensionMismatch(f"zeta has length {z.shape[0]}, expected {lam.shape[0]}")
    if mode == "auto":
        mode = "analytic" if prior.analytic else "monte_carlo"
    lam_rel, lam_irr = lam[:m], lam[m:]
    z_rel, z_irr = z[:m], z[m:]
    lhs = 4.0 * math.fsum(irr**2 * lam_irr)
    fixed = math.fsum(z_irr**2 * lam_irr)
    stderr = None
    if mode == "analytic":
        rel = math.fsum(lam_rel * ((z_rel - prior.means) ** 2 + prior.variances))
    elif mode == "monte_carlo":
        rng = np.random.Generator(np.random.Philox(seed))
        draws = prior.sample(rng, n_draws)
        per_draw = ((z_rel - draws) ** 2) @ lam_rel
        rel = _mean(per_draw)
        stderr = _stderr(per_draw)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    rhs = rel + fixed
    # prior-averaged excess errors of the two reductions
    msep_theta = lhs / 4.0
    msep_eta = rel + math.fsum((z_irr - irr) ** 2 * lam_irr)
    return CriterionReport(
        "thm4_eq37",
        lhs,
        rhs,
        rhs - lhs,
        lhs < rhs,
        stderr=stderr,
        n_replicates=n_draws if mode == "monte_carlo" else None,
        mode=mode,
        details={"excess_msep_theta": msep_theta, "excess_msep_eta": msep_eta},
    )


def thm5_criterion(prior: GammaPrior, lambdas, irrelevant_gammas) -> CriterionReport:
    """Rival-free criterion ``sum_{j<=m} lambda_j Var(gamma_j) > 4 sum_{j>m} gamma_j^2 lambda_j``.

    ``details`` lists both sides for every truncation level ``k <= m``
    (treating coordinates beyond ``k`` as irrelevant, with ``E gamma_j^2``
    for the random ones); the left side grows and the right side shrinks
    with ``k``.
    """
    lam, irr, m = _check_prior_shapes(prior, lambdas, irrelevant_gammas)
    var = prior.variances
    second = prior.means**2 + var
    lhs = math.fsum(lam[:m] * var)
    rhs = 4.0 * math.fsum(irr**2 * lam[m:])
    lhs_by_k = [math.fsum(lam[:k] * var[:k]) for k in range(m + 1)]
    rhs_by_k = [
        4.0 * (math.fsum(lam[k:m] * second[k:]) + math.fsum(irr**2 * lam[m:]))
        for k in range(m + 1)
    ]
    return CriterionReport(
        "thm5_eq46",
        lhs,
        rhs,
        lhs - rhs,
        lhs > rhs,
        mode="analytic",
        details={"lhs_by_m": lhs_by_k, "rhs_by_m": rhs_by_k},
    )


def _as_betas(items) -> np.ndarray:
    if isinstance(items, np.ndarray):
        return np.atleast_2d(items)
    return np.array([it.beta_hat if isinstance(it, PlsFit) else np.asarray(it) for it in items])


def _as_terms(items) -> np.ndarray:
    if isinstance(items, np.ndarray):
        if items.ndim != 3:
            raise DimensionMismatch("terms must have shape (replicates, p, a)")
        return items
    return np.array([f.terms for f in items])


def thm6_criterion(
    rival_betas, pls_fits, phi: FullParameter, min_replicates: int = MIN_REPLICATES
) -> CriterionReport:
    """``E (b - b_a)' S (b - b_a) > 4 E (beta - b_a)' S (beta - b_a)`` over replicates.

    ``rival_betas`` and ``pls_fits`` are paired per replicate; the latter may
    be :class:`PlsFit` objects or coefficient vectors.
    """
    rb = _as_betas(rival_betas)
    pb = _as_betas(pls_fits)
    if rb.shape != pb.shape:
        raise DimensionMismatch(f"rival {rb.shape} and PLS {pb.shape} ensembles differ")
    R = rb.shape[0]
    if R < min_replicates:
        raise InsufficientReplicates(f"{R} replicates, at least {min_replicates} required")
    S = phi.sigma_xx
    d = rb - pb
    e = phi.beta - pb
    left = np.einsum("ri,ij,rj->r", d, S, d)
    right = 4.0 * np.einsum("ri,ij,rj->r", e, S, e)
    lhs, rhs = _mean(left), _mean(right)
    msep_pls = phi.sigma2 + _mean(right) / 4.0
    r_err = phi.beta - rb
    msep_rival = phi.sigma2 + _mean(np.einsum("ri,ij,rj->r", r_err, S, r_err))
    return CriterionReport(
        "thm6_eq31",
        lhs,
        rhs,
        lhs - rhs,
        lhs > rhs,
        stderr=_stderr(left - right),
        n_replicates=R,
        mode="monte_carlo",
        details={
            "lhs_stderr": _stderr(left),
            "rhs_stderr": _stderr(right),
            "msep_pls": msep_pls,
            "msep_rival": msep_rival,
        },
    )


def thm7_criterion(
    pls_fits, phi: FullParameter, min_replicates: int = MIN_REPLICATES
) -> CriterionReport:
    """``trace(S W) >= 4 E (beta - b_a)' S (beta - b_a)`` over replicates.

    ``W = sum_j E (alpha_j e_j - mu_j)(alpha_j e_j - mu_j)'`` with ``mu_j``
    the replicate mean of ``alpha_j e_j``.  ``pls_fits`` is a sequence of
    :class:`PlsFit` or an array of terms of shape ``(replicates, p, a)``.
    """
    T = _as_terms(pls_fits)
    R = T.shape[0]
    if R < min_replicates:
        raise InsufficientReplicates(f"{R} replicates, at least {min_replicates} required")
    S = phi.sigma_xx
    # shift by the first replicate so identical inputs give exactly zero spread
    shifted = T - T[0]
    dev = shifted - shifted.mean(axis=0)
    # per-replicate contribution to trace(S W), unbiased over replicates
    spread = np.einsum("rja,jk,rka->r", dev, S, dev) * (R / (R - 1) if R > 1 else 1.0)
    err = phi.beta - T.sum(axis=2)
    right = 4.0 * np.einsum("ri,ij,rj->r", err, S, err)
    lhs, rhs = _mean(spread), _mean(right)
    return CriterionReport(
        "thm7_eq47",
        lhs,
        rhs,
        lhs - rhs,
        lhs >= rhs,
        stderr=_stderr(spread - right),
        n_replicates=R,
        mode="monte_carlo",
        details={"lhs_stderr": _stderr(spread), "rhs_stderr": _stderr(right)},
    )
