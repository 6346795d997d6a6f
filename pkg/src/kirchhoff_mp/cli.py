"""Command line entry point: ``validate``, ``check-area`` and ``solve``.

Exit codes: 0 success, 1 config error, 2 hypothesis failure, 3 area condition
failure, 4 solver non-convergence, 5 certification failure.

Relative output paths resolve against ``$KIRCHHOFF_MP_OUTPUT_DIR`` when it is
set, otherwise against the working directory.  The JSON report contains no
timings so identical configs give byte-identical reports; wall-clock timings
go to a ``<report>.timings.json`` sidecar.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .area import AlphaNotConverged, check_area_condition, compute_alphas
from .config import ConfigError, RunConfig, load_config
from .mesh import MeshError, StiffnessForm
from .model import validate_spec
from .solver import (
    EndpointNotFound,
    FamilySolveError,
    GeometryError,
    NonConvergence,
    solve_family,
)
from .verify import certify_family, certify_solution

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_HYPOTHESIS = 2
EXIT_AREA = 3
EXIT_NONCONVERGENCE = 4
EXIT_CERTIFICATION = 5
ENV_OUTPUT_DIR = "KIRCHHOFF_MP_OUTPUT_DIR"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dump_report(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _output_base() -> Path:
    env = os.environ.get(ENV_OUTPUT_DIR)
    return Path(env) if env else Path.cwd()


def _resolve(path: str | Path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else _output_base() / p


def write_csv(path: Path, coords: np.ndarray, values: np.ndarray):
    cols = ["x", "y"][: coords.shape[1]] + ["u"]
    lines = [",".join(cols)]
    for xy, v in zip(coords, values):
        lines.append(",".join(f"{c:.17g}" for c in (*xy, v)))
    path.write_text("\n".join(lines) + "\n")


class _Run:
    def __init__(self, command: str, config_path, seed, report_path):
        self.command = command
        self.config_path = config_path
        self.seed_override = seed
        self.report_path = report_path
        self.timings: dict[str, float] = {}
        self.report: dict = {"artifact": {"name": "kirchhoff_mp", "version": __version__}, "command": command}
        self.cfg: RunConfig | None = None

    def timed(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            self.timings[name] = time.perf_counter() - t0

    def load(self):
        cfg = self.timed("load_config", load_config, self.config_path)
        if self.seed_override is not None:
            cfg.data["seed"] = int(self.seed_override)
        self.cfg = cfg
        self.report.update(config=cfg.echo(), config_hash=cfg.content_hash(), seed=cfg.seed)
        try:
            self.mesh = cfg.build_mesh()
            self.Q = StiffnessForm(self.mesh)
        except MeshError as exc:
            raise ConfigError(str(exc), "domain") from exc
        self.problem = cfg.build_problem()

    def report_file(self) -> Path:
        if self.report_path is not None:
            return _resolve(self.report_path)
        name = self.cfg.output["report"] if self.cfg else "report.json"
        return _resolve(name)

    def csv_dir(self) -> Path:
        d = self.cfg.output.get("csv_dir") if self.cfg else None
        return _resolve(d) if d else self.report_file().parent

    def finish(self, code: int, message: str) -> tuple[int, dict]:
        self.report["status"] = {"exit_code": code, "message": message}
        path = self.report_file()
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dump_report(self.report))
        path.with_name(path.stem + ".timings.json").write_text(json.dumps(self.timings, indent=2, sort_keys=True) + "\n")
        (log.info if code == 0 else log.error)("%s: %s (exit %d)", self.command, message, code)
        return code, self.report

    # -- stages ------------------------------------------------------------
    def validate(self) -> bool:
        samples = self.cfg.solver["validation_samples"]
        rep = self.timed("validate", validate_spec, self.problem.m, self.problem.f, samples)
        self.report["validation"] = rep.to_dict()
        return rep.passed

    def area(self):
        alphas = self.timed("alpha", compute_alphas, self.problem, self.Q, self.mesh, self.cfg.alpha_options())
        self.alphas = alphas
        self.report["alphas"] = [a.to_dict() for a in alphas]
        verdict = check_area_condition(self.problem, self.Q, self.mesh, alphas)
        self.report["area"] = verdict.to_dict()
        return verdict


def _guard(run: _Run, body) -> tuple[int, dict]:
    try:
        run.load()
    except ConfigError as exc:
        return run.finish(EXIT_CONFIG, str(exc))
    except (ValueError, TypeError) as exc:
        return run.finish(EXIT_CONFIG, f"invalid configuration: {exc}")
    except OSError as exc:
        return run.finish(EXIT_CONFIG, f"cannot read config: {exc}")
    if not run.validate():
        msgs = "; ".join(v["message"] for v in run.report["validation"]["violations"])
        return run.finish(EXIT_HYPOTHESIS, f"hypothesis failure: {msgs}")
    return body(run)


def cmd_validate(config_path, seed=None, report_path=None) -> tuple[int, dict]:
    run = _Run("validate", config_path, seed, report_path)
    return _guard(run, lambda r: r.finish(EXIT_OK, "hypotheses (m) and (f) hold"))


def _area_stage(run: _Run):
    try:
        verdict = run.area()
    except AlphaNotConverged as exc:
        run.report["alphas_partial"] = exc.best.to_dict()
        return run.finish(EXIT_NONCONVERGENCE, str(exc))
    if not verdict.overall:
        bad = [r.k for r in verdict.records if not r.passed]
        return run.finish(EXIT_AREA, f"area condition fails for k = {bad}")
    return None


def cmd_check_area(config_path, seed=None, report_path=None) -> tuple[int, dict]:
    run = _Run("check-area", config_path, seed, report_path)

    def body(r):
        done = _area_stage(r)
        return done or r.finish(EXIT_OK, "area condition holds for every k")

    return _guard(run, body)


def cmd_solve(config_path, seed=None, report_path=None, trace=None) -> tuple[int, dict]:
    run = _Run("solve", config_path, seed, report_path)

    def body(r: _Run):
        done = _area_stage(r)
        if done:
            return done
        want_trace = r.cfg.output["trace"] if trace is None else trace
        traces: dict[int, list] | None = {} if want_trace else None
        outcomes, errors = [], {}
        try:
            outcomes = r.timed("mountain_pass", solve_family, r.problem, r.Q, r.mesh, r.cfg.mp_config(),
                               alphas=r.alphas, traces=traces)
        except FamilySolveError as exc:
            outcomes = [exc.outcomes[k] for k in sorted(exc.outcomes)]
            errors = exc.errors
        r.report["outcomes"] = [o.to_dict() for o in outcomes]
        csv_dir = r.csv_dir()
        csv_dir.mkdir(parents=True, exist_ok=True)
        coords = r.mesh.coordinates
        for o in outcomes:
            write_csv(csv_dir / f"solution_k{o.k}.csv", coords, r.mesh.extend(o.u_k))
        if traces:
            for k, rows in sorted(traces.items()):
                lines = ["iteration,c_estimate,grad_norm,argmax"]
                lines += [f"{i},{c:.17g},{g:.17g},{j}" for i, c, g, j in rows]
                (csv_dir / f"trace_k{k}.csv").write_text("\n".join(lines) + "\n")
        if errors:
            r.report["errors"] = {str(k): f"{type(e).__name__}: {e}" for k, e in sorted(errors.items())}
            partial = [e.outcome.to_dict() for e in errors.values() if isinstance(e, NonConvergence)]
            if partial:
                r.report["partial_outcomes"] = partial
            area_like = all(isinstance(e, (GeometryError, EndpointNotFound)) for e in errors.values())
            code = EXIT_AREA if area_like else EXIT_NONCONVERGENCE
            return r.finish(code, f"mountain pass failed for k = {sorted(errors)}")
        tol_res = r.cfg.solver["tol_res"]
        tol_clip = r.cfg.solver["tol_clip"]
        certs = r.timed("certify", lambda: [certify_solution(r.problem, r.Q, r.mesh, o, tol_res, tol_clip) for o in outcomes])
        family = certify_family(certs)
        r.report["family"] = family.to_dict()
        if not family.passed:
            return r.finish(EXIT_CERTIFICATION, "family certificate failed")
        return r.finish(EXIT_OK, f"{len(certs)} ordered positive solutions certified")

    return _guard(run, body)


COMMANDS = {"validate": cmd_validate, "check-area": cmd_check_area, "solve": cmd_solve}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kirchhoff-mp", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--report", metavar="PATH", default=None)
        p.add_argument("--seed", type=int, default=None, metavar="N")
        if name == "solve":
            p.add_argument("--trace", action="store_true", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    kwargs = {"seed": args.seed, "report_path": args.report}
    if args.command == "solve":
        kwargs["trace"] = args.trace
    code, report = COMMANDS[args.command](args.config, **kwargs)
    print(report["status"]["message"], file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
