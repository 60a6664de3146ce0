"""
Command-line front end.

    python -m app.cli solve --config configs/baseline.cfg --q 4
    python -m app.cli table --config configs/baseline.cfg --q-min 1 --q-max 10 --q-step 1

Results go to stdout (or --output); logs go to stderr. Exit codes: 0 ok,
1 invalid config, 2 model validation failed, 3 solver failure, 4 a
verification check failed.
"""
import argparse
import json
import logging
import math
import sys
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from .core.config import settings
from .core.errors import ImpulseBandError, InvalidConfig, RegimeError, VerificationFailed
from .schemas.model import InventoryModel
from .schemas.policy import BandPolicy, GeneralizedPolicy
from .schemas.simulation import SimConfig
from .schemas.solution import QSweepRow
from .schemas.verification import VerificationSummary
from .services import model_service, policy_service, simulation_service, solver_service, verify_service
from .services.kernel_service import Kernel

logger = logging.getLogger("app.cli")

TABLE_COLUMNS = {
    "Q": "Q",
    "s1": "s1",
    "S1": "S1",
    "a1_star": "A1*",
    "s2": "s2",
    "S2": "S2",
    "a2_star": "A2*",
    "s_bar": "Sbar",
    "s_low": "s_low",
    "xi": "Xi",
}


def _configure_logging(level: Optional[str]) -> None:
    name = (level or settings.LOGGING_LEVEL).upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format="%(asctime)s [%(levelname)s] %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
    )


def _load(args) -> InventoryModel:
    model = model_service.load_model_config(args.config, q=getattr(args, "q", None))
    model_service.require_valid(model)
    return model


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        with open(output, "w") as fh:
            fh.write(text)
        logger.info("Wrote %s", output)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _to_csv(frame: pd.DataFrame, precision: int) -> str:
    return frame.to_csv(index=False, float_format=f"%.{precision}g", na_rep="")


def _to_json(payload) -> str:
    return json.dumps(payload, indent=2)


def q_grid(q_min: float, q_max: float, q_step: float) -> List[float]:
    """Thresholds q_min, q_min + q_step, ... up to q_max inclusive."""
    if not q_step > 0:
        raise InvalidConfig(f"--q-step must be > 0, got {q_step}")
    if not 0 < q_min <= q_max:
        raise InvalidConfig(f"need 0 < q-min <= q-max, got {q_min} and {q_max}")
    count = int(math.floor((q_max - q_min) / q_step + 1e-9))
    return [round(q_min + i * q_step, 12) for i in range(count + 1)]


def sweep_frame(rows) -> pd.DataFrame:
    """Sweep rows as a table with the published column names."""
    frame = pd.DataFrame([row.model_dump() for row in rows], columns=list(TABLE_COLUMNS))
    return frame.rename(columns=TABLE_COLUMNS)


def cmd_solve(args) -> int:
    kernel = Kernel(_load(args))
    report = solver_service.classify(kernel)
    if args.format == "csv":
        _emit(_to_csv(sweep_frame([QSweepRow.from_report(report)]), args.precision), args.output)
    else:
        _emit(_to_json(report.model_dump(mode="json")), args.output)
    return 0


def cmd_table(args) -> int:
    kernel = Kernel(_load(args))
    result = solver_service.sweep_q(kernel, q_grid(args.q_min, args.q_max, args.q_step))
    if args.format == "json":
        _emit(_to_json(result.model_dump(mode="json")), args.output)
    else:
        _emit(_to_csv(sweep_frame(result.rows), args.precision), args.output)
    return 0


def cmd_compare(args) -> int:
    if args.points < 2 or not args.x_min < args.x_max:
        raise InvalidConfig("compare needs --x-min < --x-max and at least two --points")
    kernel = Kernel(_load(args))
    report = solver_service.classify(kernel)
    rows = policy_service.compare(kernel, report, np.linspace(args.x_min, args.x_max, args.points))

    if args.layout == "wide":
        frame = pd.DataFrame([row.model_dump() for row in rows],
                             columns=["x", "band1", "band2", "generalized", "best"])
    else:
        frame = pd.DataFrame(
            [{"x": p.x, "cost": p.cost, "policy_tag": curve.policy_tag}
             for curve in policy_service.cost_curves(rows) for p in curve.points],
            columns=["x", "cost", "policy_tag"],
        )
    _emit(_to_csv(frame, args.precision), args.output)
    return 0


def run_checks(kernel: Kernel, which: str, grid: Sequence[float], n_pairs: int, seed: int,
               oracle_step: float) -> VerificationSummary:
    """
    Run the requested checks on the candidate value functions of the model's regime.

    For the (s2, S2) regime the candidate is V2; otherwise it is the cost of
    the generalized policy together with the lower bound V1 of the K1 problem.
    """
    report = solver_service.classify(kernel)
    q = report.Q
    checks = []
    wanted = {"hjb", "gap", "growth", "quasiconvexity", "oracle", "dominance"} if which == "all" else {which}

    if report.regime == "S2Everywhere":
        candidates = [(policy_service.value_function_band(kernel, report.sol2), {})]
    else:
        v1 = policy_service.lower_bound_v1(kernel, report.sol1)
        k1 = kernel.params.K1
        candidates = [
            (policy_service.value_function_generalized(kernel, report), {}),
            (v1, {"setup": lambda d: k1, "max_jump": q}),
        ]
        if "dominance" in wanted:
            band1 = policy_service.band_evaluator(kernel, report.sol1.s, report.sol1.S, q=q, setup=k1)
            checks.append(verify_service.dominance_check("V1<=band1", v1.f, band1, grid,
                                                         equal_from=report.sol1.S - q))

    for vf, gap_options in candidates:
        if "hjb" in wanted:
            checks.append(verify_service.hjb_check(kernel, vf, grid))
        if "gap" in wanted:
            checks.append(verify_service.intervention_gap_check(kernel, vf, n_pairs=n_pairs, seed=seed,
                                                                **gap_options))
        if "growth" in wanted:
            checks.append(verify_service.growth_check(kernel, vf, grid))
    if "quasiconvexity" in wanted:
        for sol in (report.sol1, report.sol2):
            checks.append(verify_service.quasiconvexity_check(kernel, sol.a_star, grid))
    if "oracle" in wanted:
        for sol in (report.sol1, report.sol2):
            checks.append(verify_service.oracle_check(kernel, sol, resolution=oracle_step))

    return VerificationSummary(passed=all(c.passed for c in checks), checks=checks)


def cmd_verify(args) -> int:
    if args.points < 2 or not args.x_min < args.x_max:
        raise InvalidConfig("verify needs --x-min < --x-max and at least two --points")
    kernel = Kernel(_load(args))
    summary = run_checks(
        kernel, args.check, np.linspace(args.x_min, args.x_max, args.points),
        n_pairs=args.pairs, seed=args.seed, oracle_step=args.oracle_step,
    )
    _emit(_to_json(summary.model_dump(mode="json")), args.output)
    if not summary.passed:
        failed = [c.check for c in summary.checks if not c.passed]
        raise VerificationFailed(f"{len(failed)} check(s) failed: {', '.join(failed)}", failed_checks=failed)
    return 0


def _simulated_policy(args):
    if args.s is not None or args.S is not None:
        if args.s is None or args.S is None:
            raise InvalidConfig("--s and --S must be given together")
        try:
            return BandPolicy(s=args.s, S=args.S)
        except ValueError as e:
            raise InvalidConfig(f"invalid band: {e}")

    # levels come from the solved policy model, which must satisfy the assumptions
    source = model_service.load_model_config(args.policy_config or args.config, q=args.q)
    model_service.require_valid(source)
    report = solver_service.classify(Kernel(source))
    if args.policy == "band1":
        return BandPolicy(s=report.sol1.s, S=report.sol1.S)
    if args.policy == "band2":
        return BandPolicy(s=report.sol2.s, S=report.sol2.S)
    if args.policy == "generalized":
        if report.regime != "S1PlusGeneralized":
            raise RegimeError(f"no generalized policy at Q={report.Q:g}: regime is {report.regime}")
        return GeneralizedPolicy.from_report(report)
    # regime-optimal band
    sol = report.sol2 if report.regime == "S2Everywhere" else report.sol1
    return BandPolicy(s=sol.s, S=sol.S)


def cmd_simulate(args) -> int:
    model = model_service.load_model_config(args.config, q=args.q)
    report = model_service.validate(model.params, model.cost)
    for violation in report.violations:
        logger.warning("Simulated model violates %s: %s", violation.assumption, violation.detail)

    policy = _simulated_policy(args)
    cfg = SimConfig(dt=args.dt, horizon=args.horizon, n_paths=args.paths, master_seed=args.seed)
    estimate = simulation_service.simulate_dc(model, policy, args.x0, cfg)
    closed_form = policy_service.policy_evaluator(Kernel(model), policy)(args.x0)
    payload = {
        "policy": policy.model_dump(mode="json"),
        "x0": args.x0,
        "estimate": estimate.model_dump(mode="json"),
        "closed_form": closed_form,
    }
    _emit(_to_json(payload), args.output)
    return 0


def cmd_validate(args) -> int:
    model = model_service.load_model_config(args.config, q=args.q)
    report = model_service.validate(model.params, model.cost)
    _emit(_to_json(report.model_dump(mode="json")), args.output)
    if not report.ok:
        model_service.require_valid(model)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("app.main:app", host=args.host, port=args.port, reload=args.reload,
                log_level=(args.log_level or settings.LOGGING_LEVEL).lower())
    return 0


def _model_args(parser: argparse.ArgumentParser, output: bool = True) -> None:
    parser.add_argument("--config", required=True, help="Model file (key = value)")
    parser.add_argument("--q", type=float, default=None, help="Threshold Q overriding the config")
    if output:
        parser.add_argument("--output", default=None, help="Write results here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="impulse-band", description="Inventory impulse-control band solver")
    parser.add_argument("--log-level", default=None, help="Logging level (default from LOGGING_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="Solve both band problems and classify the regime")
    _model_args(solve)
    solve.add_argument("--format", choices=["json", "csv"], default="json")
    solve.add_argument("--precision", type=int, default=settings.CSV_PRECISION)
    solve.set_defaults(func=cmd_solve)

    table = sub.add_parser("table", help="Sweep the threshold Q")
    _model_args(table)
    table.add_argument("--q-min", type=float, required=True)
    table.add_argument("--q-max", type=float, required=True)
    table.add_argument("--q-step", type=float, required=True)
    table.add_argument("--format", choices=["json", "csv"], default="csv")
    table.add_argument("--precision", type=int, default=settings.CSV_PRECISION)
    table.set_defaults(func=cmd_table)

    compare = sub.add_parser("compare", help="Cost curves of the candidate policies")
    _model_args(compare)
    compare.add_argument("--x-min", type=float, required=True)
    compare.add_argument("--x-max", type=float, required=True)
    compare.add_argument("--points", type=int, default=200)
    compare.add_argument("--layout", choices=["long", "wide"], default="long")
    compare.add_argument("--precision", type=int, default=settings.CSV_PRECISION)
    compare.set_defaults(func=cmd_compare)

    verify = sub.add_parser("verify", help="Numerical lower-bound and consistency checks")
    _model_args(verify)
    verify.add_argument("--check", default="all",
                        choices=["hjb", "gap", "growth", "quasiconvexity", "oracle", "dominance", "all"])
    verify.add_argument("--x-min", type=float, default=-15.0)
    verify.add_argument("--x-max", type=float, default=10.0)
    verify.add_argument("--points", type=int, default=501)
    verify.add_argument("--pairs", type=int, default=10_000)
    verify.add_argument("--seed", type=int, default=verify_service.DEFAULT_SEED)
    verify.add_argument("--oracle-step", type=float, default=0.01)
    verify.set_defaults(func=cmd_verify)

    simulate = sub.add_parser("simulate", help="Monte Carlo discounted cost of a policy")
    _model_args(simulate)
    simulate.add_argument("--policy", choices=["band", "band1", "band2", "generalized"], default="band")
    simulate.add_argument("--policy-config", default=None,
                          help="Model whose solution supplies the policy levels (default: --config)")
    simulate.add_argument("--s", type=float, default=None, help="Reorder level of an explicit band")
    simulate.add_argument("--S", type=float, default=None, help="Order-up-to level of an explicit band")
    simulate.add_argument("--x0", type=float, default=0.0)
    simulate.add_argument("--paths", type=int, default=20_000)
    simulate.add_argument("--dt", type=float, default=1e-3)
    simulate.add_argument("--horizon", type=float, default=40.0)
    simulate.add_argument("--seed", type=int, default=7)
    simulate.set_defaults(func=cmd_simulate)

    validate = sub.add_parser("validate", help="Check a model against the solver's assumptions")
    _model_args(validate)
    validate.set_defaults(func=cmd_validate)

    serve = sub.add_parser("serve", help="Run the HTTP API")
    serve.add_argument("--host", default=settings.HOST)
    serve.add_argument("--port", type=int, default=settings.PORT)
    serve.add_argument("--reload", action="store_true", default=settings.RELOAD)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.log_level)
    try:
        return args.func(args)
    except VerificationFailed as e:
        for check in e.failed_checks:
            logger.warning("Check failed: %s", check)
        print(f"error: {e.message}", file=sys.stderr)
        return e.exit_code
    except ImpulseBandError as e:
        print(f"error: {e.message}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return InvalidConfig.exit_code


if __name__ == "__main__":
    sys.exit(main())
