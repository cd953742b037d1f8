"""Synthetic populations with planted relevant components and MSEP experiments.

Populations are built as ``sigma_xx = Q diag(lambda) Q'`` with a Haar random
``Q``; the regression vector has coordinates ``gamma`` on the first ``m``
columns of ``Q`` (the relevant ones) and ``irrelevant_gamma`` on the rest.
Every replicate draws from its own Philox stream spawned from the design
seed, so results do not depend on the number of worker threads.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ExperimentPolicyError, InvalidSpec, PlsOptError
from .estimators import EstimatorSpec, fit
from .groups import random_rotation
from .model import FullParameter, ReducedParameter
from .optimality import (
    MIN_REPLICATES,
    CriterionReport,
    _mean,
    _stderr,
    tau,
    thm6_criterion,
    thm7_criterion,
)
from .priors import GammaPrior
from .sample import Dataset, fit_pls

MIN_EXPERIMENT_REPLICATES = 30
MAX_SKIP_FRACTION = 0.05
CSV_COLUMNS = (
    "estimator",
    "msep_mean",
    "msep_stderr",
    "replicates",
    "criterion_name",
    "lhs",
    "rhs",
    "margin",
    "satisfied",
)


@dataclass(frozen=True)
class DesignSpec:
    p: int
    m: int
    relevant_lambdas: tuple[float, ...]
    irrelevant_lambdas: tuple[float, ...]
    gamma: tuple[float, ...] | None = None
    gamma_prior: GammaPrior | None = None
    irrelevant_gamma: tuple[float, ...] | None = None
    sigma2: float = 1.0
    n: int = 50
    seed: int = 0

    def __post_init__(self):
        rel = tuple(float(v) for v in self.relevant_lambdas)
        irr = tuple(float(v) for v in self.irrelevant_lambdas)
        if not 1 <= self.m <= self.p:
            raise InvalidSpec(f"need 1 <= m <= p, got m={self.m}, p={self.p}")
        if len(rel) != self.m or len(irr) != self.p - self.m:
            raise InvalidSpec("need m relevant and p - m irrelevant eigenvalues")
        if any(not (v > 0 and math.isfinite(v)) for v in rel + irr):
            raise InvalidSpec("eigenvalues must be positive and finite")
        if (self.gamma is None) == (self.gamma_prior is None):
            raise InvalidSpec("give exactly one of gamma and gamma_prior")
        if self.gamma is not None:
            gam = tuple(float(v) for v in self.gamma)
            if len(gam) != self.m:
                raise InvalidSpec(f"gamma must have m={self.m} entries")
            object.__setattr__(self, "gamma", gam)
        elif self.gamma_prior.m != self.m:
            raise InvalidSpec(f"gamma_prior must have m={self.m} components")
        ig = self.irrelevant_gamma
        ig = (0.0,) * (self.p - self.m) if ig is None else tuple(float(v) for v in ig)
        if len(ig) != self.p - self.m:
            raise InvalidSpec("irrelevant_gamma must have p - m entries")
        if not self.sigma2 >= 0:
            raise InvalidSpec("sigma2 must be nonnegative")
        if self.n < 2:
            raise InvalidSpec("n must be at least 2")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidSpec("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "relevant_lambdas", rel)
        object.__setattr__(self, "irrelevant_lambdas", irr)
        object.__setattr__(self, "irrelevant_gamma", ig)
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def from_dict(cls, d: dict) -> "DesignSpec":
        known = {
            "p", "m", "relevant_lambdas", "irrelevant_lambdas", "gamma",
            "gamma_prior", "irrelevant_gamma", "sigma2", "n", "seed",
        }
        unknown = set(d) - known
        if unknown:
            raise InvalidSpec(f"unknown design fields {sorted(unknown)}")
        try:
            kw = dict(d)
            if kw.get("gamma_prior") is not None:
                kw["gamma_prior"] = GammaPrior.from_dict(kw["gamma_prior"])
            return cls(**kw)
        except (TypeError, KeyError) as exc:
            raise InvalidSpec(f"bad design: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "m": self.m,
            "relevant_lambdas": list(self.relevant_lambdas),
            "irrelevant_lambdas": list(self.irrelevant_lambdas),
            "gamma": None if self.gamma is None else list(self.gamma),
            "gamma_prior": None if self.gamma_prior is None else self.gamma_prior.to_dict(),
            "irrelevant_gamma": list(self.irrelevant_gamma),
            "sigma2": self.sigma2,
            "n": self.n,
            "seed": self.seed,
        }

    def streams(self, replicates: int) -> tuple[np.random.Generator, list[np.random.Generator]]:
        """Population stream and one independent stream per replicate."""
        pop, reps = np.random.SeedSequence(self.seed).spawn(2)
        return (
            np.random.Generator(np.random.Philox(pop)),
            [np.random.Generator(np.random.Philox(s)) for s in reps.spawn(replicates)],
        )


def build_population(spec: DesignSpec) -> tuple[FullParameter, ReducedParameter]:
    """Population ``phi`` and its exact relevant reduction ``theta``."""
    rng, _ = spec.streams(0)
    Q = random_rotation(rng, spec.p)
    if spec.gamma is not None:
        gamma = np.array(spec.gamma)
    else:
        gamma = spec.gamma_prior.sample(rng, 1)[0]
    lam = np.array(spec.relevant_lambdas + spec.irrelevant_lambdas)
    sxx = (Q * lam) @ Q.T
    sxx = 0.5 * (sxx + sxx.T)
    beta = Q[:, : spec.m] @ gamma + Q[:, spec.m :] @ np.array(spec.irrelevant_gamma)
    phi = FullParameter(sxx, sxx @ beta, spec.sigma2)
    theta = ReducedParameter(gamma, Q[:, : spec.m], lam[: spec.m])
    return phi, theta


def sample_dataset(phi: FullParameter, n: int, rng: np.random.Generator) -> Dataset:
    """``n`` Gaussian draws with ``x ~ N(0, sigma_xx)``, ``y = beta.x + eps``."""
    if n < 2:
        raise InvalidSpec("n must be at least 2")
    L = np.linalg.cholesky(phi.sigma_xx)
    X = rng.standard_normal((n, phi.p)) @ L.T
    eps = rng.standard_normal(n)
    return Dataset(X, X @ phi.beta + math.sqrt(phi.sigma2) * eps)


@dataclass
class McResult:
    estimator: str
    msep_mean: float
    msep_stderr: float
    n_replicates: int
    criteria: list[CriterionReport] = field(default_factory=list)
    n_skipped: int = 0

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "msep_mean": self.msep_mean,
            "msep_stderr": self.msep_stderr,
            "n_replicates": self.n_replicates,
            "n_skipped": self.n_skipped,
            "criteria": [c.to_dict() for c in self.criteria],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "McResult":
        return cls(
            d["estimator"],
            float(d["msep_mean"]),
            float(d["msep_stderr"]),
            int(d["n_replicates"]),
            [CriterionReport.from_dict(c) for c in d.get("criteria", [])],
            int(d.get("n_skipped", 0)),
        )


def _run_replicate(phi, n, estimators, rng, test_set_size):
    data = sample_dataset(phi, n, rng)
    X_test = y_test = None
    if test_set_size:
        test = sample_dataset(phi, test_set_size, rng)
        X_test, y_test = test.X, test.y
    out = {}
    try:
        for spec in estimators:
            if spec.kind == "pls":
                f = fit_pls(data, spec.param)
                beta, terms = f.beta_hat, f.terms
            else:
                beta, terms = fit(spec, data).beta_hat, None
            if X_test is None:
                loss = tau(beta, phi)
            else:
                # population means are zero, so the centered predictor is beta.x
                loss = float(np.mean((y_test - X_test @ beta) ** 2))
            out[spec] = (beta, terms, loss)
    except PlsOptError:
        return None
    return out


def msep_experiment(
    spec: DesignSpec,
    estimators: list[EstimatorSpec],
    replicates: int,
    *,
    threads: int = 1,
    criteria: tuple[str, ...] = ("thm6_eq31", "thm7_eq47"),
    test_set_size: int | None = None,
    phi: FullParameter | None = None,
) -> list[McResult]:
    """Expected prediction error of each estimator over replicated data sets.

    The inner expectation over a future ``(x, y)`` is evaluated in closed
    form with :func:`tau`, or on an empirical test set of ``test_set_size``
    points when given.  Replicates where any estimator fails are skipped for
    all estimators; more than 5% skipped raises
    :class:`ExperimentPolicyError`.  PLS estimators get the
    ``thm7_eq47`` report; the others get ``thm6_eq31`` against the first
    PLS estimator in the list.
    """
    if replicates < MIN_EXPERIMENT_REPLICATES:
        raise InvalidSpec(f"at least {MIN_EXPERIMENT_REPLICATES} replicates required")
    if len(set(estimators)) != len(estimators):
        estimators = list(dict.fromkeys(estimators))
    if phi is None:
        phi, _ = build_population(spec)
    _, rngs = spec.streams(replicates)

    def job(r):
        return _run_replicate(phi, spec.n, estimators, rngs[r], test_set_size)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(job, range(replicates)))
    else:
        runs = [job(r) for r in range(replicates)]
    kept = [r for r in runs if r is not None]
    skipped = replicates - len(kept)
    if skipped > MAX_SKIP_FRACTION * replicates:
        raise ExperimentPolicyError(
            f"{skipped} of {replicates} replicates failed (limit {MAX_SKIP_FRACTION:.0%})"
        )
    R = len(kept)
    reference = next((e for e in estimators if e.kind == "pls"), None)
    results = []
    for est in estimators:
        losses = [run[est][2] for run in kept]
        reports = []
        if R >= MIN_REPLICATES:
            if est.kind == "pls" and "thm7_eq47" in criteria:
                terms = np.array([run[est][1] for run in kept])
                reports.append(thm7_criterion(terms, phi))
            elif est.kind != "pls" and reference is not None and "thm6_eq31" in criteria:
                rb = np.array([run[est][0] for run in kept])
                pb = np.array([run[reference][0] for run in kept])
                rep = thm6_criterion(rb, pb, phi)
                rep.details["reference"] = str(reference)
                reports.append(rep)
        results.append(
            McResult(str(est), _mean(losses), _stderr(losses), R, reports, skipped)
        )
    return results


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def results_to_csv(results: list[McResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for res in results:
        crit = res.criteria[0] if res.criteria else None
        row = [res.estimator, res.msep_mean, res.msep_stderr, res.n_replicates]
        if crit is None:
            row += [None] * 5
        else:
            row += [crit.name, crit.lhs, crit.rhs, crit.margin, crit.satisfied]
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def results_to_json(results: list[McResult], **extra) -> str:
    return json.dumps({**extra, "results": [r.to_dict() for r in results]}, indent=2)


def results_from_json(text: str) -> list[McResult]:
    return [McResult.from_dict(d) for d in json.loads(text)["results"]]
