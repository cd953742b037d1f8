"""Command-line interface: ``plsopt fit | simulate | criteria | born-demo``.

Exit codes: 0 success, 2 bad input, 3 numerical precondition failed,
4 experiment policy violated.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .born import DensityOperator, SpectralOperator, born_expectation, criterion46_via_born
from .errors import (
    ExperimentPolicyError,
    InvalidSpec,
    NonPositiveDefinite,
    PlsOptError,
    RankDeficientKrylov,
    SingularDesign,
    SingularGram,
)
from .estimators import EstimatorSpec, ridge_grid
from .model import (
    AlternativeReduction,
    FullParameter,
    reduce_to_theta,
    relevant_component_count,
)
from .optimality import (
    CRITERIA,
    assumption_A,
    corollary2_check,
    thm4_criterion,
    thm5_criterion,
)
from .priors import GammaPrior, Normal
from .sample import Dataset, cross_validate, fit_pls
from .simulation import (
    DesignSpec,
    build_population,
    msep_experiment,
    results_to_csv,
    results_to_json,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_POLICY = 0, 2, 3, 4
NUMERICAL_ERRORS = (RankDeficientKrylov, SingularGram, SingularDesign, NonPositiveDefinite)


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class ExperimentConfig:
    design: DesignSpec
    estimators: list[str]
    replicates: int
    criteria: tuple[str, ...]
    test_set_size: int | None = None
    csv_name: str = "results.csv"
    json_name: str = "results.json"

    @classmethod
    def from_dict(cls, d: dict, seed: int) -> "ExperimentConfig":
        try:
            design = dict(d["design"])
            design["seed"] = seed
            criteria = tuple(d.get("criteria", ("thm6_eq31", "thm7_eq47")))
            bad = [c for c in criteria if c not in CRITERIA]
            if bad:
                raise InvalidSpec(f"unknown criteria {bad}")
            estimators = list(d["estimators"])
            if not estimators:
                raise InvalidSpec("no estimators listed")
            for e in estimators:
                if e != "ridge-grid":
                    EstimatorSpec.parse(e)
            out = d.get("output", {})
            return cls(
                DesignSpec.from_dict(design),
                estimators,
                int(d["replicates"]),
                criteria,
                d.get("test_set_size"),
                out.get("csv", "results.csv"),
                out.get("json", "results.json"),
            )
        except KeyError as exc:
            raise InvalidSpec(f"missing config field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, PlsOptError):
                raise
            raise InvalidSpec(f"bad config: {exc}") from None

    def estimator_specs(self, phi: FullParameter) -> list[EstimatorSpec]:
        specs = []
        for e in self.estimators:
            if e == "ridge-grid":
                specs.extend(ridge_grid(float(np.trace(phi.sigma_xx)) / phi.p))
            else:
                specs.append(EstimatorSpec.parse(e))
        return specs


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CliError(f"cannot parse number list {text!r}", EXIT_INPUT) from None


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_INPUT) from None


def _emit(obj, output_dir: str | None, name: str) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        Path(output_dir, name).write_text(text)
    sys.stdout.write(text)


def cmd_fit(args) -> int:
    try:
        data = Dataset.from_csv(args.csv, header=args.header)
    except OSError as exc:
        raise CliError(f"cannot read {args.csv}: {exc}", EXIT_INPUT) from None
    except InvalidSpec as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    try:
        fit = fit_pls(data, args.components)
    except RankDeficientKrylov as exc:
        raise CliError(f"precondition a <= rank of the Krylov block failed: {exc}", EXIT_NUMERICAL) from None
    except NUMERICAL_ERRORS as exc:
        raise CliError(str(exc), EXIT_NUMERICAL) from None
    except InvalidSpec as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    out = {
        "a": fit.a,
        "n": data.n,
        "p": data.p,
        "beta_hat": fit.beta_hat.tolist(),
        "alpha_hat": fit.alpha_hat.tolist(),
        "x_mean": fit.x_mean.tolist(),
        "y_mean": fit.y_mean,
    }
    if args.cv_folds:
        a_max = args.cv_max or min(data.p, 10)
        out["cross_validation"] = {
            "folds": args.cv_folds,
            "seed": args.seed,
            "table": cross_validate(data, a_max, args.cv_folds, args.seed),
        }
    _emit(out, args.output_dir, "fit.json")
    return EXIT_OK


def cmd_simulate(args) -> int:
    raw = _load_json(args.config)
    try:
        config = ExperimentConfig.from_dict(raw, args.seed)
        phi, _ = build_population(config.design)
        specs = config.estimator_specs(phi)
        results = msep_experiment(
            config.design,
            specs,
            config.replicates,
            threads=args.threads,
            criteria=config.criteria,
            test_set_size=config.test_set_size,
            phi=phi,
        )
    except ExperimentPolicyError as exc:
        raise CliError(str(exc), EXIT_POLICY) from None
    except PlsOptError as exc:
        raise CliError(f"invalid config: {exc}", EXIT_INPUT) from None
    out_dir = Path(args.output_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.format in ("csv", "both"):
        (out_dir / config.csv_name).write_text(results_to_csv(results))
    if args.format in ("json", "both"):
        (out_dir / config.json_name).write_text(
            results_to_json(results, design=config.design.to_dict(), replicates=config.replicates) + "\n"
        )
    ranking = sorted(results, key=lambda r: r.msep_mean)
    for r in ranking:
        print(f"{r.estimator:>16s}  msep={r.msep_mean:.6f} +- {r.msep_stderr:.6f}")
    return EXIT_OK


def _criteria_population(args) -> list[dict]:
    try:
        phi = FullParameter.from_dict(_load_json(args.population))
    except PlsOptError as exc:
        raise CliError(f"invalid population: {exc}", EXIT_INPUT) from None
    m = args.m if args.m is not None else relevant_component_count(phi)
    try:
        theta = reduce_to_theta(phi, m, strict=args.m is None)
    except PlsOptError as exc:
        raise CliError(str(exc), EXIT_NUMERICAL) from None
    if args.zeta:
        zeta = _floats(args.zeta)
    else:
        rng = np.random.default_rng(args.seed)
        zeta = rng.standard_normal(phi.p)
    if len(zeta) != phi.p:
        raise CliError(f"zeta needs {phi.p} entries", EXIT_INPUT)
    eta = AlternativeReduction(zeta)
    return [assumption_A(phi, theta, eta).to_dict(), corollary2_check(phi, theta, eta).to_dict()]


def _criteria_prior(args) -> list[dict]:
    if not (args.lambdas and args.irrelevant_gammas is not None):
        raise CliError("--prior needs --lambdas and --irrelevant-gammas", EXIT_INPUT)
    try:
        prior = GammaPrior.from_dict(_load_json(args.prior))
        lam = _floats(args.lambdas)
        irr = _floats(args.irrelevant_gammas)
        reports = [thm5_criterion(prior, lam, irr).to_dict()]
        if args.zeta:
            reports.append(thm4_criterion(prior, lam, irr, _floats(args.zeta), seed=args.seed).to_dict())
    except (PlsOptError, KeyError) as exc:
        raise CliError(f"invalid prior input: {exc}", EXIT_INPUT) from None
    return reports


def cmd_criteria(args) -> int:
    if bool(args.population) == bool(args.prior):
        raise CliError("give exactly one of POPULATION or --prior", EXIT_INPUT)
    reports = _criteria_population(args) if args.population else _criteria_prior(args)
    _emit({"reports": reports}, args.output_dir, "criteria.json")
    return EXIT_OK


def cmd_born_demo(args) -> int:
    rng = np.random.default_rng(args.seed)
    r = args.r
    Z = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
    op = SpectralOperator.from_matrix(Z + Z.conj().T)
    xi = lambda v: v * v
    uniform = born_expectation(DensityOperator.uniform(r), op, xi)
    mean = float(np.mean(op.eigenvalues**2))
    lines = [
        f"uniform state, r={r}: trace(rho xi(A)) = {uniform:.15g}",
        f"mean of xi over eigenvalues         = {mean:.15g}",
        f"difference                          = {abs(uniform - mean):.3e}",
        "",
        "grid   sum lambda_j Var(gamma_j) via Born   error   (gamma ~ N(0,1), lambda = 1)",
    ]
    prior = GammaPrior((Normal(0.0, 1.0),))
    for g in (8, 16, 32, 64, 128, 256, 512):
        v = criterion46_via_born(prior, [1.0], 1, g)
        lines.append(f"{g:4d}   {v:.10f}   {abs(1.0 - v):.3e}")
    print("\n".join(lines))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plsopt", description=__doc__)
    parser.add_argument("--output-dir", default=None, help="directory for output files")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit sample PLS to a CSV file")
    p.add_argument("csv")
    p.add_argument("-a", "--components", type=int, required=True)
    p.add_argument("--header", action="store_true", help="first CSV row is a header")
    p.add_argument("--cv-folds", type=int, default=0, help="k for k-fold CV over a (0 = off)")
    p.add_argument("--cv-max", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="run a Monte Carlo MSEP experiment")
    p.add_argument("config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--format", choices=("csv", "json", "both"), default="both")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("criteria", help="evaluate optimality criteria")
    p.add_argument("population", nargs="?", help="FullParameter JSON file")
    p.add_argument("--m", type=int, default=None, help="components kept in theta")
    p.add_argument("--zeta", default=None, help="rival eigen-coordinates, comma separated")
    p.add_argument("--prior", default=None, help="GammaPrior JSON file")
    p.add_argument("--lambdas", default=None)
    p.add_argument("--irrelevant-gammas", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_criteria)

    p = sub.add_parser("born-demo", help="print the uniform-state Born identity check")
    p.add_argument("--r", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_born_demo)

    for sp in sub.choices.values():
        sp.add_argument("--output-dir", default=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"plsopt {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
