"""Run configuration: an INI file of ``key = value`` sections.

Example::

    [domain]
    dimension = 3
    shape = box
    extent = 16
    origin = -8
    h = 0.25

    [potential]
    kind = power_law
    amplitude = -5
    exponent = 1
    center = 0, 0, 0

    [rhi]
    p = 0.5, 1, 2, 3
    q = 2, 4, 8, inf

Every section is optional except ``[domain]``. Parsing resolves defaults, so
``RunConfig.to_dict()`` is the complete description embedded in reports and
``RunConfig.from_dict`` of it gives back an equal config.
"""
from __future__ import annotations

import configparser
import copy
import json
import math
import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .errors import ConfigurationError, RHLabError

SECTIONS = ("run", "domain", "coefficient", "potential", "mc", "solver", "rhi",
            "moser", "calibration", "payne_rayner")

DEFAULT_P = (0.5, 1.0, 2.0, 3.0)
DEFAULT_Q = (2.0, 4.0, 8.0, math.inf)


# -- value parsing -------------------------------------------------------------

def _float(text, key):
    try:
        value = float(str(text).strip())
    except ValueError:
        raise ConfigurationError(f"{key}: {text!r} is not a number") from None
    if math.isnan(value):
        raise ConfigurationError(f"{key}: NaN is not allowed")
    return value


def _int(text, key):
    try:
        value = float(str(text).strip())
    except ValueError:
        raise ConfigurationError(f"{key}: {text!r} is not an integer") from None
    if value != int(value):
        raise ConfigurationError(f"{key}: {text!r} is not an integer")
    return int(value)


def _floats(text, key):
    if isinstance(text, (list, tuple)):
        return [_float(t, key) for t in text]
    parts = [t for t in str(text).replace(";", ",").split(",") if t.strip()]
    if not parts:
        raise ConfigurationError(f"{key}: empty list")
    return [_float(t, key) for t in parts]


def _bool(text, key):
    if isinstance(text, bool):
        return text
    word = str(text).strip().lower()
    if word in ("1", "yes", "true", "on"):
        return True
    if word in ("0", "no", "false", "off"):
        return False
    raise ConfigurationError(f"{key}: {text!r} is not a boolean")


def _vector(text, n, key):
    values = _floats(text, key)
    if len(values) == 1:
        values = values * n
    if len(values) != n:
        raise ConfigurationError(f"{key}: expected {n} components, got {len(values)}")
    return values


def _json_float(x):
    return "inf" if isinstance(x, float) and math.isinf(x) else x


class _Section:
    """Reads keys from one section and complains about leftovers."""

    def __init__(self, name, data):
        self.name = name
        self.data = dict(data or {})
        self.used = set()

    def get(self, key, default=None):
        self.used.add(key)
        value = self.data.get(key, default)
        if isinstance(value, str) and not value.strip():
            return default
        return value

    def has(self, key):
        return key in self.data

    def finish(self):
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ConfigurationError(f"[{self.name}] unknown keys: {', '.join(extra)}")


# -- resolved configuration -----------------------------------------------------

@dataclass
class RunConfig:
    domain: dict
    coefficient: dict
    potential: dict
    mc: dict
    solver: dict
    rhi: dict
    calibration: dict
    moser: Optional[dict] = None
    payne_rayner: Optional[dict] = None
    seed: int = 0
    source_dir: str = field(default=".", compare=False, repr=False)

    @property
    def dimension(self) -> int:
        return self.domain["dimension"]

    @property
    def queries(self) -> List[Tuple[float, float]]:
        return [tuple(pq) for pq in self.rhi["queries"]]

    def to_dict(self) -> dict:
        out = {
            "run": {"seed": self.seed},
            "domain": self.domain, "coefficient": self.coefficient,
            "potential": self.potential, "mc": self.mc, "solver": self.solver,
            "rhi": {"queries": [[_json_float(p), _json_float(q)] for p, q in self.queries],
                    "eigen_index": self.rhi["eigen_index"]},
            "calibration": self.calibration,
        }
        if self.moser is not None:
            out["moser"] = self.moser
        if self.payne_rayner is not None:
            out["payne_rayner"] = self.payne_rayner
        return copy.deepcopy(out)

    @classmethod
    def from_dict(cls, data: dict, source_dir: str = ".") -> "RunConfig":
        return _resolve({k: v for k, v in data.items()}, source_dir)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = os.fspath(path)
        if not os.path.isfile(path):
            raise ConfigurationError(f"config file {path} does not exist")
        source_dir = os.path.dirname(os.path.abspath(path))
        if path.endswith(".json"):
            # a report embeds its resolved config under "config"
            try:
                with open(path) as fh:
                    data = json.load(fh)
            except (OSError, ValueError) as exc:
                raise ConfigurationError(f"cannot read {path}: {exc}") from None
            return cls.from_dict(data.get("config", data), source_dir)
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigurationError(f"cannot parse {path}: {exc}") from None
        unknown = sorted(set(parser.sections()) - set(SECTIONS))
        if unknown:
            raise ConfigurationError(f"unknown sections: {', '.join(unknown)}")
        data = {name: dict(parser.items(name)) for name in parser.sections()}
        return _resolve(data, source_dir)


def load_config(path) -> RunConfig:
    try:
        return RunConfig.from_file(path)
    except RHLabError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid config: {exc}") from None


def _resolve(data: dict, source_dir: str) -> RunConfig:
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise ConfigurationError(f"unknown sections: {', '.join(unknown)}")
    if "domain" not in data:
        raise ConfigurationError("the [domain] section is required")
    run = _Section("run", data.get("run"))
    seed = _int(run.get("seed", 0), "run.seed")
    run.finish()
    domain = _domain(_Section("domain", data["domain"]))
    n = domain["dimension"]
    potential = _potential(_Section("potential", data.get("potential")), n)
    config = RunConfig(
        domain=domain,
        coefficient=_coefficient(_Section("coefficient", data.get("coefficient")), n),
        potential=potential,
        mc=_mc(_Section("mc", data.get("mc"))),
        solver=_solver(_Section("solver", data.get("solver"))),
        rhi=_rhi(_Section("rhi", data.get("rhi"))),
        calibration=_calibration(_Section("calibration", data.get("calibration")),
                                 n, seed, source_dir),
        moser=_moser(_Section("moser", data["moser"])) if "moser" in data else None,
        payne_rayner=(_payne_rayner(_Section("payne_rayner", data["payne_rayner"]))
                      if "payne_rayner" in data else None),
        seed=seed,
        source_dir=source_dir,
    )
    if config.rhi["eigen_index"] >= config.solver["eigenpairs"]:
        raise ConfigurationError("rhi.eigen_index must be below solver.eigenpairs")
    return config


def _domain(s: _Section) -> dict:
    n = _int(s.get("dimension", 3), "domain.dimension")
    if n < 1:
        raise ConfigurationError("domain.dimension must be at least 1")
    shape = str(s.get("shape", "box")).strip().lower()
    if shape not in ("box", "ball"):
        raise ConfigurationError(f"domain.shape must be box or ball, got {shape!r}")
    extent = _vector(s.get("extent", 1.0), n, "domain.extent")
    if min(extent) <= 0:
        raise ConfigurationError("domain.extent must be positive")
    origin = _vector(s.get("origin", 0.0), n, "domain.origin")
    if s.get("h") is not None and s.get("nodes") is not None:
        raise ConfigurationError("give domain.h or domain.nodes, not both")
    if s.get("nodes") is not None:
        nodes = [int(v) for v in _vector(s.get("nodes"), n, "domain.nodes")]
    else:
        h = _float(s.get("h", 1.0 / 32), "domain.h")
        if h <= 0:
            raise ConfigurationError("domain.h must be positive")
        nodes = []
        for e in extent:
            cells = e / h
            if abs(cells - round(cells)) > 1e-9 * max(1.0, cells):
                raise ConfigurationError(f"domain.h = {h} does not divide the extent {e}")
            nodes.append(int(round(cells)) + 1)
    if min(nodes) < 3:
        raise ConfigurationError("need at least 3 nodes per axis")
    out = {"dimension": n, "shape": shape, "extent": extent, "origin": origin,
           "nodes": nodes,
           "avoid_singularities": _bool(s.get("avoid_singularities", True),
                                        "domain.avoid_singularities")}
    if shape == "ball":
        mid = [o + 0.5 * e for o, e in zip(origin, extent)]
        out["center"] = _vector(s.get("center", mid), n, "domain.center")
        out["radius"] = _float(s.get("radius", 0.5 * min(extent)), "domain.radius")
        if out["radius"] <= 0:
            raise ConfigurationError("domain.radius must be positive")
    s.finish()
    return out


def _coefficient(s: _Section, n: int) -> dict:
    kind = str(s.get("kind", "identity")).strip().lower()
    if kind == "identity":
        out = {"kind": "identity"}
    elif kind == "constant":
        text = s.get("matrix")
        if text is None:
            raise ConfigurationError("coefficient.matrix is required for kind = constant")
        if isinstance(text, list):
            rows = [_floats(r, "coefficient.matrix") for r in text]
        else:
            rows = [_floats(r, "coefficient.matrix") for r in str(text).split(";")]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ConfigurationError(f"coefficient.matrix must be {n}x{n} (rows split by ';')")
        out = {"kind": "constant", "matrix": rows}
    elif kind == "shear":
        pair = [int(v) for v in _floats(s.get("pair", "0, 1"), "coefficient.pair")]
        axis = _int(s.get("axis", 0), "coefficient.axis")
        if len(pair) != 2 or pair[0] == pair[1] or not all(0 <= k < n for k in pair + [axis]):
            raise ConfigurationError("coefficient.pair/axis must name distinct axes of the grid")
        out = {"kind": "shear", "amplitude": _float(s.get("amplitude", 0.5), "coefficient.amplitude"),
               "axis": axis, "pair": pair, "skew": _float(s.get("skew", 0.0), "coefficient.skew")}
    else:
        raise ConfigurationError(f"unknown coefficient kind {kind!r}")
    s.finish()
    return out


def _potential(s: _Section, n: int) -> dict:
    kind = str(s.get("kind", "zero")).strip().lower()
    if kind == "zero":
        out = {"kind": "zero"}
    elif kind == "constant":
        out = {"kind": "constant", "value": _float(s.get("value", 0.0), "potential.value")}
    elif kind == "power_law":
        out = {"kind": "power_law",
               "amplitude": _float(s.get("amplitude", 1.0), "potential.amplitude"),
               "exponent": _float(s.get("exponent", 1.0), "potential.exponent"),
               "center": _vector(s.get("center", 0.0), n, "potential.center")}
    elif kind == "ball_well":
        out = {"kind": "ball_well",
               "depth": _float(s.get("depth", 1.0), "potential.depth"),
               "center": _vector(s.get("center", 0.0), n, "potential.center"),
               "radius": _float(s.get("radius", 1.0), "potential.radius")}
    else:
        raise ConfigurationError(f"unknown potential kind {kind!r}")
    s.finish()
    from .potentials import potential_from_dict
    potential_from_dict(out)  # validates
    return out


def _optional_float(s, key, name):
    value = s.get(key)
    return None if value is None else _float(value, name)


def _mc(s: _Section) -> dict:
    out = {"alpha": _float(s.get("alpha", 1.0), "mc.alpha"),
           "r": _float(s.get("r", 2.5), "mc.r"),
           "rho_min": _optional_float(s, "rho_min", "mc.rho_min"),
           "rho_max": _optional_float(s, "rho_max", "mc.rho_max"),
           "stride": None if s.get("stride") is None else _int(s.get("stride"), "mc.stride"),
           "radii": _int(s.get("radii", 24), "mc.radii")}
    s.finish()
    from .potentials import MCParams
    MCParams(**out)
    return out


def _solver(s: _Section) -> dict:
    out = {"tolerance": _float(s.get("tolerance", 1e-8), "solver.tolerance"),
           "max_iterations": _int(s.get("max_iterations", 500), "solver.max_iterations"),
           "shift": _optional_float(s, "shift", "solver.shift"),
           "linear_tolerance": _float(s.get("linear_tolerance", 1e-10), "solver.linear_tolerance"),
           "linear_max_iterations": _int(s.get("linear_max_iterations", 20000),
                                         "solver.linear_max_iterations"),
           "eigenpairs": _int(s.get("eigenpairs", 1), "solver.eigenpairs")}
    s.finish()
    if out["eigenpairs"] < 1:
        raise ConfigurationError("solver.eigenpairs must be at least 1")
    from .eigensolver import SolverConfig
    SolverConfig(**{k: v for k, v in out.items() if k != "eigenpairs"})
    return out


def _rhi(s: _Section) -> dict:
    if s.get("queries") is not None:
        if s.get("p") is not None or s.get("q") is not None:
            raise ConfigurationError("give rhi.queries or the rhi.p/rhi.q grid, not both")
        raw = s.get("queries")
        if isinstance(raw, list):
            pairs = [(_float(p, "rhi.queries"), _float(q, "rhi.queries")) for p, q in raw]
        else:
            pairs = []
            for item in str(raw).split(","):
                if not item.strip():
                    continue
                bits = item.split(":")
                if len(bits) != 2:
                    raise ConfigurationError(f"rhi.queries: {item.strip()!r} is not p:q")
                pairs.append((_float(bits[0], "rhi.queries"), _float(bits[1], "rhi.queries")))
        for p, q in pairs:
            if q < p:
                raise ConfigurationError(f"rhi.queries: q = {q:g} is below p = {p:g}")
    else:
        ps = _floats(s.get("p", list(DEFAULT_P)), "rhi.p")
        qs = _floats(s.get("q", list(DEFAULT_Q)), "rhi.q")
        pairs = [(p, q) for p in ps for q in qs if q >= p]
    if not pairs:
        raise ConfigurationError("rhi: no (p, q) pairs with q >= p")
    for p, _ in pairs:
        if not p > 0:
            raise ConfigurationError(f"rhi: p = {p:g} must be positive")
    out = {"queries": [list(pq) for pq in pairs],
           "eigen_index": _int(s.get("eigen_index", 0), "rhi.eigen_index")}
    s.finish()
    return out


def _moser(s: _Section) -> dict:
    out = {"p": _float(s.get("p", 2.0), "moser.p"),
           "levels": _int(s.get("levels", 6), "moser.levels"),
           "part": str(s.get("part", "f")).strip().lower()}
    s.finish()
    if out["levels"] < 1:
        raise ConfigurationError("moser.levels must be at least 1")
    if out["part"] not in ("f", "g"):
        raise ConfigurationError("moser.part must be f or g")
    return out


def _calibration(s: _Section, n: int, seed: int, source_dir: str) -> dict:
    out = {"cn": _optional_float(s, "cn", "calibration.cn"),
           "path": s.get("path"),
           "bank_size": _int(s.get("bank_size", 16), "calibration.bank_size"),
           "seed": _int(s.get("seed", seed), "calibration.seed"),
           "r": _float(s.get("r", 1.4), "calibration.r"),
           "safety_factor": _float(s.get("safety_factor", 2.0), "calibration.safety_factor"),
           "center": (None if s.get("center") is None
                      else _vector(s.get("center"), n, "calibration.center")),
           "nodes": None if s.get("nodes") is None else _int(s.get("nodes"), "calibration.nodes")}
    s.finish()
    if out["cn"] is not None and out["path"] is not None:
        raise ConfigurationError("give calibration.cn or calibration.path, not both")
    if out["cn"] is not None and out["cn"] < 0:
        raise ConfigurationError("calibration.cn must be non-negative")
    if out["path"] is not None:
        path = os.path.join(source_dir, str(out["path"]).strip())
        if not os.path.isfile(path):
            raise ConfigurationError(f"calibration.path {path} does not exist")
        out["path"] = os.path.normpath(path)
    if out["bank_size"] < 1:
        raise ConfigurationError("calibration.bank_size must be at least 1")
    if out["safety_factor"] <= 0:
        raise ConfigurationError("calibration.safety_factor must be positive")
    if out["nodes"] is not None and out["nodes"] < 3:
        raise ConfigurationError("calibration.nodes must be at least 3")
    return out


def _payne_rayner(s: _Section) -> dict:
    out = {"shape": str(s.get("shape", "disk")).strip().lower(),
           "h": _float(s.get("h", 1.0 / 128), "payne_rayner.h")}
    s.finish()
    if out["shape"] not in ("disk", "square"):
        raise ConfigurationError("payne_rayner.shape must be disk or square")
    if not 0 < out["h"] < 0.5:
        raise ConfigurationError("payne_rayner.h must lie in (0, 0.5)")
    return out
