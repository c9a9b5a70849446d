"""``rh-lab`` command line front end.

    rh-lab <subcommand> --config <path> [--out <dir>] [--workers N] [--dump-matrix]

Exit codes: 0 ok, 2 configuration, 3 solver, 4 hypothesis violation. Every
run except one with an unreadable config writes ``report.json``; on failure
it carries an ``error`` record naming the stage.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from functools import cached_property

import numpy as np

from . import __version__
from ._backend import requested_backend, set_workers
from .calibration import CnEstimate, estimate_cn, make_test_bank
from .config import RunConfig, load_config
from .eigensolver import SolverConfig, smallest_eigenpairs
from .errors import ConfigurationError, RHLabError, SolverError
from .mesh import Ball, Box, avoid_singularities, build_domain, build_grid
from .norms import signed_parts
from .operator import assemble, coefficient_from_dict, ellipticity_constant
from .potentials import (
    MCParams, PowerLaw, mc_norm, mc_norm_analytic, potential_from_dict, sample_potential,
)
from .rhi import BoundConstants, disk_domain, moser_trace, payne_rayner_check, square_domain, verify_rhi

log = logging.getLogger("rhlab")

COMMANDS = ("solve", "mc-norm", "fp-calibrate", "verify", "moser", "payne-rayner", "run")


# -- output helpers ------------------------------------------------------------

def _plain(obj):
    """JSON-safe copy: numpy scalars to Python, infinities to the string "inf"."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(_plain(data), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


# -- pipeline ------------------------------------------------------------------

class Pipeline:
    """Lazily built stages sharing one config; each stage runs at most once."""

    def __init__(self, config: RunConfig, out: str, workers: int = 1, dump_matrix: bool = False):
        self.config = config
        self.out = out
        self.workers = workers
        self.dump_matrix = dump_matrix
        self.report = {"config": config.to_dict(), "status": "ok", "version": __version__}

    def path(self, name):
        return os.path.join(self.out, name)

    # domain and operator

    @cached_property
    def potential(self):
        return potential_from_dict(self.config.potential)

    def _build_domain(self, points, nodes=None):
        d = self.config.domain
        grid = build_grid(d["dimension"], d["extent"], nodes or d["nodes"], origin=d["origin"])
        if d["avoid_singularities"] and points:
            grid = avoid_singularities(grid, points)
        shape = Ball(tuple(d["center"]), d["radius"]) if d["shape"] == "ball" else Box()
        return grid, build_domain(grid, shape)

    @cached_property
    def domain(self):
        points = [c for c, _ in self.potential.singularities()]
        return self._build_domain(points)

    @cached_property
    def operator(self):
        grid, mask = self.domain
        coeff = coefficient_from_dict(self.config.coefficient, grid.dimension)
        ellipticity = ellipticity_constant(coeff, grid, mask)
        op = assemble(grid, mask, coeff, sample_potential(self.potential, grid, mask))
        op.ellipticity = ellipticity
        self.report["operator"] = {
            "unknowns": op.shape[0], "nnz": int(op.matrix.nnz), "symmetric": op.symmetric,
            "ellipticity": ellipticity, "domain": mask.describe(),
            "h": [float(s) for s in grid.spacing], "origin": list(grid.origin),
        }
        if self.dump_matrix:
            op.dump_coo(self.path("matrix.coo"))
            self.report["operator"]["matrix_file"] = "matrix.coo"
        return op

    @cached_property
    def eigenpairs(self):
        s = self.config.solver
        solver = SolverConfig(**{k: v for k, v in s.items() if k != "eigenpairs"})
        op = self.operator
        try:
            pairs = smallest_eigenpairs(op, s["eigenpairs"], solver)
        except SolverError as exc:
            self.report["eigen"] = [self._pair_record(i, p) for i, p in enumerate(exc.partial)]
            raise
        self.report["eigen"] = [self._pair_record(i, p) for i, p in enumerate(pairs)]
        lines = ["index,lambda,residual,iterations"]
        lines += [f"{i},{p.lam!r},{p.residual!r},{p.iterations}" for i, p in enumerate(pairs)]
        write_text(self.path("eigen.csv"), "\n".join(lines) + "\n")
        return pairs

    @staticmethod
    def _pair_record(i, pair):
        return {"index": i, "lambda": pair.lam, "residual": pair.residual,
                "iterations": pair.iterations}

    # potentials and constants

    @cached_property
    def mc(self):
        grid, mask = self.domain
        params = MCParams(**self.config.mc)
        est = mc_norm(self.potential, params, grid, mask, workers=self.workers)
        record = est.to_dict()
        record["analytic"] = mc_norm_analytic(self.potential, params.alpha, params.r,
                                              grid.dimension)
        self.report["mc"] = record
        return est

    def _calibration_center(self):
        c = self.config.calibration
        if c["center"] is not None:
            return tuple(c["center"])
        sing = self.potential.singularities()
        if sing:
            return tuple(sing[0][0])
        d = self.config.domain
        if d["shape"] == "ball":
            return tuple(d["center"])
        return tuple(o + 0.5 * e for o, e in zip(d["origin"], d["extent"]))

    def compute_calibration(self) -> CnEstimate:
        c = self.config.calibration
        center = self._calibration_center()
        nodes = None if c["nodes"] is None else [c["nodes"]] * self.config.dimension
        grid, mask = self._build_domain([center], nodes)
        bank = make_test_bank(mask, c["bank_size"], c["seed"], focus=center)
        weight = PowerLaw(1.0, 2.0, center)
        return estimate_cn(bank, [weight], c["r"], workers=self.workers,
                           safety_factor=c["safety_factor"])

    def calibration(self, allow_saved: bool):
        """C_n from the config, a saved record, or a fresh estimate (in that order)."""
        c = self.config.calibration
        if c["cn"] is not None:
            record = {"source": "inline", "C_n": c["cn"]}
        else:
            saved = c["path"]
            if saved is None and allow_saved and os.path.isfile(self.path("calibration.json")):
                saved = self.path("calibration.json")
            if saved is not None:
                est = CnEstimate.load(saved)
                record = {"source": os.path.basename(saved), "C_n": est.cn, "estimate": est.to_dict()}
            else:
                est = self.compute_calibration()
                est.save(self.path("calibration.json"))
                record = {"source": "computed", "C_n": est.cn, "estimate": est.to_dict()}
        self.report["calibration"] = record
        return record["C_n"]

    def constants(self, allow_saved: bool) -> BoundConstants:
        pair = self.selected_pair
        cn = self.calibration(allow_saved)
        mc = self.mc
        grid = self.domain[0]
        constants = BoundConstants(grid.dimension, self.operator.ellipticity, pair.lam,
                                   mc.alpha, mc.r, cn, mc.value)
        self.report["constants"] = constants.to_dict()
        return constants

    @property
    def selected_pair(self):
        return self.eigenpairs[self.config.rhi["eigen_index"]]

    # verification stages

    def verify(self, allow_saved=True):
        constants = self.constants(allow_saved)
        grid, mask = self.domain
        meta = {"domain": mask.describe(), "potential": self.potential.to_dict(),
                "h": [float(s) for s in grid.spacing],
                "eigen_index": self.config.rhi["eigen_index"]}
        rep = verify_rhi(self.selected_pair, constants, self.config.queries, grid, mask,
                         metadata=meta, workers=self.workers)
        write_text(self.path("rhi.csv"), rep.to_csv())
        self.report["rhi"] = rep.to_dict()
        return rep

    def moser(self, allow_saved=True):
        m = self.config.moser or {"p": 2.0, "levels": 6, "part": "f"}
        constants = self.constants(allow_saved)
        f, g = signed_parts(self.selected_pair.u)
        trace = moser_trace(f if m["part"] == "f" else g, m["p"], constants, m["levels"])
        write_text(self.path("moser.csv"), trace.to_csv())
        self.report["moser"] = trace.to_dict()
        return trace

    def payne_rayner(self):
        pr = self.config.payne_rayner or {"shape": "disk", "h": 1.0 / 128}
        grid, mask = disk_domain(pr["h"]) if pr["shape"] == "disk" else square_domain(pr["h"])
        s = self.config.solver
        solver = SolverConfig(**{k: v for k, v in s.items() if k not in ("eigenpairs", "shift")})
        record = payne_rayner_check(grid, mask, solver)
        self.report["payne_rayner"] = record.to_dict()
        return record


def _stage_solve(p: Pipeline):
    p.eigenpairs


def _stage_mc(p: Pipeline):
    p.mc


def _stage_calibrate(p: Pipeline):
    est = p.compute_calibration()
    est.save(p.path("calibration.json"))
    p.report["calibration"] = {"source": "computed", "C_n": est.cn, "estimate": est.to_dict()}


def _stage_verify(p: Pipeline):
    p.verify(allow_saved=True)


def _stage_moser(p: Pipeline):
    p.moser(allow_saved=True)


def _stage_payne_rayner(p: Pipeline):
    p.payne_rayner()


def _stage_run(p: Pipeline):
    p.eigenpairs
    p.mc
    p.verify(allow_saved=False)
    if p.config.moser is not None:
        p.moser(allow_saved=False)
    if p.config.payne_rayner is not None:
        p.payne_rayner()


STAGES = {
    "solve": _stage_solve, "mc-norm": _stage_mc, "fp-calibrate": _stage_calibrate,
    "verify": _stage_verify, "moser": _stage_moser, "payne-rayner": _stage_payne_rayner,
    "run": _stage_run,
}


def _error_record(exc: RHLabError) -> dict:
    record = {"stage": exc.stage, "type": type(exc).__name__, "message": str(exc),
              "exit_code": exc.exit_code}
    residual = getattr(exc, "residual", None)
    if residual is not None:
        record["residual"] = residual
    return record


def build_parser():
    parser = argparse.ArgumentParser(prog="rh-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI run config (or a report.json)")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--workers", type=int, default=1, help="worker threads (default: 1)")
        p.add_argument("--dump-matrix", action="store_true",
                       help="write the assembled operator to matrix.coo")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.workers < 1:
            raise ConfigurationError("--workers must be at least 1")
        config = load_config(args.config)
    except RHLabError as exc:
        print(f"rh-lab: {exc.stage} error: {exc}", file=sys.stderr)
        return exc.exit_code
    set_workers(args.workers)
    os.makedirs(args.out, exist_ok=True)
    pipeline = Pipeline(config, args.out, args.workers, args.dump_matrix)
    pipeline.report["command"] = args.command
    log.info("backend %s, %d worker(s)", requested_backend(), args.workers)
    code = 0
    try:
        STAGES[args.command](pipeline)
    except RHLabError as exc:
        pipeline.report["status"] = "error"
        pipeline.report["error"] = _error_record(exc)
        print(f"rh-lab: {exc.stage} error: {exc}", file=sys.stderr)
        code = exc.exit_code
    write_json(pipeline.path("report.json"), pipeline.report)
    return code


if __name__ == "__main__":
    sys.exit(main())
