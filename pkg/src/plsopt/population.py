"""Population PLS in covariance form.

The deflation recursions are propagated on second moments: at step ``j``
the state is ``cov(e_j)``, ``cov(e_j, f_j)`` and ``var(f_j)``.  Scores are
tracked as linear functionals ``t_j = r_j' x`` of the original predictors,
which gives the accumulated coefficient vector directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateScore, InvalidSpec
from .model import RANK_TOL, FullParameter, krylov_orthobasis, relevant_component_count

STOP_TOL = 1e-9


@dataclass
class PopulationPlsState:
    """Per-step quantities of a population PLS run."""

    weights: list[np.ndarray] = field(default_factory=list)
    loadings: list[np.ndarray] = field(default_factory=list)
    y_loadings: list[float] = field(default_factory=list)
    score_variances: list[float] = field(default_factory=list)
    score_functionals: list[np.ndarray] = field(default_factory=list)
    residual_y_variances: list[float] = field(default_factory=list)
    cov_e: np.ndarray | None = None
    cov_ef: np.ndarray | None = None
    next_weight_norm: float = np.nan

    @property
    def step(self) -> int:
        return len(self.weights)


def run_population_pls(
    phi: FullParameter,
    max_steps: int | None = None,
    stop_tol: float = STOP_TOL,
    var_tol: float = 1e-14,
) -> tuple[PopulationPlsState, np.ndarray, int]:
    """Run the population PLS algorithm until it stops.

    Returns the final state, the coefficient vector ``beta_pls`` and the
    number of steps taken.  The run stops once ``||w_{j+1}|| <= stop_tol *
    ||w_1||`` or after ``max_steps`` steps.

    Raises
    ------
    DegenerateScore
        If a score has (numerically) zero variance before the stop, e.g.
        when ``sigma_xy = 0``.
    """
    p = phi.p
    max_steps = p if max_steps is None else max_steps
    if not 1 <= max_steps <= p:
        raise InvalidSpec(f"max_steps must lie in [1, {p}]")
    cov_e = np.array(phi.sigma_xx)
    cov_ef = np.array(phi.sigma_xy)
    var_f = phi.var_y
    transform = np.eye(p)  # e_j = transform @ x
    state = PopulationPlsState(residual_y_variances=[var_f])
    beta = np.zeros(p)
    w1_norm = np.linalg.norm(cov_ef)
    scale = np.linalg.norm(phi.sigma_xx, 2)
    w = cov_ef
    while state.step < max_steps:
        var_t = float(w @ cov_e @ w)
        if w1_norm == 0.0 or var_t <= var_tol * scale * float(w @ w):
            raise DegenerateScore(f"score variance {var_t:.3e} at step {state.step + 1}")
        cov_et = cov_e @ w
        p_j = cov_et / var_t
        q_j = float(cov_ef @ w) / var_t
        r_j = transform.T @ w
        cov_e = cov_e - np.outer(cov_et, cov_et) / var_t
        cov_e = 0.5 * (cov_e + cov_e.T)
        cov_ef = cov_ef - cov_et * q_j
        var_f = var_f - q_j * q_j * var_t
        transform = transform - np.outer(p_j, r_j)
        beta = beta + q_j * r_j
        state.weights.append(w)
        state.loadings.append(p_j)
        state.y_loadings.append(q_j)
        state.score_variances.append(var_t)
        state.score_functionals.append(r_j)
        state.residual_y_variances.append(var_f)
        w = cov_ef
        state.next_weight_norm = float(np.linalg.norm(w))
        if state.next_weight_norm <= stop_tol * w1_norm:
            break
    state.cov_e = cov_e
    state.cov_ef = cov_ef
    return state, beta, state.step


def krylov_projection(phi: FullParameter, a: int) -> np.ndarray:
    """``sigma_xx``-orthogonal projection of ``beta`` onto the first ``a`` Krylov vectors.

    The span is represented by an Arnoldi orthobasis ``V`` rather than the
    monomial columns, whose conditioning grows like ``cond(sigma_xx)**a``;
    the normal equations ``V' S V c = V' sigma_xy`` are then well posed.
    """
    if a < 1:
        raise InvalidSpec("a must be at least 1")
    v = krylov_orthobasis(phi.sigma_xx, phi.sigma_xy, max_dim=a)
    if v.shape[1] == 0:
        return np.zeros(phi.p)
    gram = v.T @ phi.sigma_xx @ v
    return v @ np.linalg.solve(gram, v.T @ phi.sigma_xy)


def verify_krylov_equivalence(phi: FullParameter, tol: float = 1e-7) -> bool:
    """Check that population PLS agrees with the Krylov projection of ``beta``."""
    m = relevant_component_count(phi, RANK_TOL)
    if m == 0:
        # beta = 0 and the algorithm takes no step; both sides are zero
        return True
    _, beta_pls, _ = run_population_pls(phi, max_steps=m)
    proj = krylov_projection(phi, m)
    scale = max(1.0, float(np.linalg.norm(proj)))
    return bool(np.linalg.norm(beta_pls - proj) <= tol * scale)
