"""JSON experiment configuration with strict key checking.

Every section is optional; missing keys take the defaults in :data:`DEFAULTS`.
``problem`` is the exception and needs either ``generator`` (with ``params``)
or ``path`` to a Matrix Market file. ``restriction.n_c`` defaults to ``n // 4``.
``grid`` maps dotted keys such as ``"problem.params.velocity"`` to lists of
values; the Cartesian product is taken in sorted-key order.
"""

import copy
import inspect
import itertools
import json
import re
from pathlib import Path

from . import problems
from .errors import ConfigError
from .smoothing import KINDS

GENERATORS = {
    "convdiff_1d": problems.convdiff_1d,
    "convdiff_2d": problems.convdiff_2d,
    "random_npd": problems.random_npd,
}
RESTRICTIONS = ("injection", "aggregation", "random", "optimal")
COARSE_MODES = ("exact", "linear", "nonlinear", "randomized")
LINEAR_FLAVORS = ("jacobi", "gauss-seidel")
CLAIMS = ("identity", "optimal", "monotonicity", "sandwich", "corollary",
          "nonlinear", "randomized", "lemma41")

DEFAULTS = {
    "problem": {"generator": None, "params": {}, "path": None},
    "smoother": {"kind": "scaled-jacobi", "omega": "auto", "allow_uncertified": False},
    "restriction": {"kind": "aggregation", "n_c": None, "seed": 0},
    "coarse_solver": {
        "mode": "exact", "flavor": "gauss-seidel", "omega": 1.0, "epsilon": 0.0,
        "oracle_mode": True, "steps": 1, "sketch_dim": 1, "seed": 0,
    },
    "verify": [],
    "trials": 200,
    "initial_errors": 20,
    "extra_rows": 1,
    "levels": 3,
    "seed": 0,
    "grid": {},
    "output": {"report": "report.json", "summary": "summary.csv", "sweep": "sweep.csv"},
}

# Sections whose contents are free-form (validated elsewhere).
_OPEN = {("problem", "params"), ("grid",)}
SEED_KEYS = ("seed", "restriction.seed", "coarse_solver.seed")


def _line_of(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return None if m is None else text.count("\n", 0, m.start()) + 1


def _merge(defaults, given, path, text):
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        where = ".".join(path + (key,))
        if key not in defaults:
            line = _line_of(text, key)
            at = f" (line {line})" if line else ""
            raise ConfigError(f"unknown key {where!r}{at}")
        if isinstance(defaults[key], dict) and path + (key,) not in _OPEN:
            if not isinstance(value, dict):
                raise ConfigError(f"key {where!r} must be an object")
            out[key] = _merge(defaults[key], value, path + (key,), text)
        else:
            out[key] = value
    return out


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _validate(cfg):
    prob = cfg["problem"]
    _require((prob["generator"] is None) != (prob["path"] is None),
             "problem needs exactly one of 'generator' or 'path'")
    if prob["generator"] is not None:
        gen = GENERATORS.get(prob["generator"])
        _require(gen is not None, f"problem.generator must be one of {sorted(GENERATORS)}")
        try:
            inspect.signature(gen).bind(**prob["params"])
        except TypeError as exc:
            raise ConfigError(f"problem.params: {exc}") from None
    sm = cfg["smoother"]
    _require(sm["kind"] in KINDS, f"smoother.kind must be one of {list(KINDS)}")
    _require(sm["omega"] == "auto" or (isinstance(sm["omega"], (int, float)) and sm["omega"] > 0),
             "smoother.omega must be 'auto' or a positive number")
    _require(cfg["restriction"]["kind"] in RESTRICTIONS,
             f"restriction.kind must be one of {list(RESTRICTIONS)}")
    cs = cfg["coarse_solver"]
    _require(cs["mode"] in COARSE_MODES, f"coarse_solver.mode must be one of {list(COARSE_MODES)}")
    _require(cs["flavor"] in LINEAR_FLAVORS,
             f"coarse_solver.flavor must be one of {list(LINEAR_FLAVORS)}")
    _require(isinstance(cfg["verify"], list), "verify must be a list")
    for claim in cfg["verify"]:
        _require(claim in CLAIMS, f"verify: unknown claim {claim!r}; expected one of {list(CLAIMS)}")
    for key in ("trials", "initial_errors", "extra_rows", "levels", "seed"):
        _require(isinstance(cfg[key], int) and cfg[key] >= 0, f"{key} must be a nonnegative integer")
    _require(isinstance(cfg["grid"], dict), "grid must be an object")
    for key, values in cfg["grid"].items():
        _require(isinstance(values, list) and values, f"grid.{key} must be a nonempty list")
        _check_dotted(cfg, key)


def _check_dotted(cfg, dotted):
    parts = dotted.split(".")
    node = cfg
    for i, part in enumerate(parts[:-1]):
        _require(isinstance(node, dict) and part in node, f"grid key {dotted!r} does not name a config field")
        node = node[part]
    open_section = tuple(parts[:-1]) in _OPEN
    _require(isinstance(node, dict) and (parts[-1] in node or open_section),
             f"grid key {dotted!r} does not name a config field")


def set_dotted(cfg, dotted, value):
    parts = dotted.split(".")
    node = cfg
    for part in parts[:-1]:
        node = node[part]
    node[parts[-1]] = value


def parse_config(text, base_dir=None):
    """Parse and validate config `text`; relative problem paths resolve against `base_dir`."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    _require(isinstance(raw, dict), "config must be a JSON object")
    cfg = _merge(DEFAULTS, raw, (), text)
    _validate(cfg)
    path = cfg["problem"]["path"]
    if path is not None and base_dir is not None and not Path(path).is_absolute():
        cfg["problem"]["path"] = str(Path(base_dir) / path)
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.parent)


def apply_seed_override(cfg, seed):
    """Set every seed field (including a generator's ``seed`` parameter) to `seed`."""
    cfg = copy.deepcopy(cfg)
    for key in SEED_KEYS:
        set_dotted(cfg, key, seed)
    if "seed" in cfg["problem"]["params"]:
        cfg["problem"]["params"]["seed"] = seed
    return cfg


def grid_points(cfg):
    """``[(assignment, config)]`` over the Cartesian grid, in sorted-key product order."""
    keys = sorted(cfg["grid"])
    out = []
    for values in itertools.product(*(cfg["grid"][k] for k in keys)):
        point = copy.deepcopy(cfg)
        point["grid"] = {}
        for k, v in zip(keys, values):
            set_dotted(point, k, v)
        _validate(point)
        out.append((dict(zip(keys, values)), point))
    return out
