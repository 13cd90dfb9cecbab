"""Experiment configuration: JSON schema, validation and canonical hashing.

A config is one JSON object::

    {
      "experiment": "moments",
      "law": {"kind": "two-point", "p_low": 0.4, "p_high": 0.8, "weight_low": 0.5},
      "map": {"kind": "polynomial", "A": 1, "a": 1},
      "horizons": [1000, 10000],
      "replicas": 10000,
      "seed": 1
    }

Law kinds: ``two-point`` (``p_low``, ``p_high``, ``weight_low``),
``finite`` (``atoms``: list of ``[omega, weight]``), ``rho`` (``rho``,
``weights``), ``beta`` (``a``, ``b``, ``ellipticity``); all accept
``non_lattice``.

Map kinds: ``identity``, ``frozen``, ``polynomial`` (``A`` = 1, ``a``),
``exponential`` (``B`` = 1, ``b`` = log 2), ``explicit`` (``increments``, or
``file``: a newline-separated increment list relative to the config file),
``counterexample`` (``T_k = 4^k - 4^(k-1)``), ``double-exponential``
(``T_k = 2^(2^k)``), ``critical`` (``s``, ``A`` = 1; resolves to
``a = 1/(s-1)``).

Experiments and their extra fields:

=================  ===========================================================
moments            ``mode``, ``env_seed``
profile            ``mode``, ``env_seed``
scgf               ``theta_grid``, ``scgf_method`` (``mc`` or ``block``)
rate-function      as scgf, plus ``x_grid``
recurrence-trace   none
fluctuation-test   none (KS of the standardised ``X_n`` against N(0, 1))
mass-game          ``values`` (``{"kind": "alternating"}`` or
                   ``{"kind": "constant", "value": c}``), ``blocks``; no law
counterexample     ``blocks`` (K); ``replicas`` is the number of paths; no law
=================  ===========================================================

Every error raised while validating carries the dotted path of the field.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any

from .environment import EnvironmentLaw, clipped_beta_law, finite_law, law_from_rho, make_two_point_law
from .errors import ConfigError
from .resampling import (ResamplingMap, counterexample_map, critical_exponent, double_exponential_map,
                         explicit_map, exponential_map, frozen_map, identity_map, polynomial_map)
from .streams import MASK64

EXPERIMENTS = ("moments", "profile", "scgf", "rate-function", "recurrence-trace", "fluctuation-test",
               "mass-game", "counterexample")
NO_LAW = ("mass-game", "counterexample")


def canonical_bytes(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False).encode()


def config_hash(obj: Any) -> str:
    return hashlib.sha256(canonical_bytes(obj)).hexdigest()


# ---------------------------------------------------------------- field readers
def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _get(block: dict, key: str, path: str, kind, default=..., check=None, what="", fieldpath=None):
    fp = fieldpath or _join(path, key)
    if key not in block:
        if default is ...:
            raise ConfigError("required field is missing", fp)
        return default
    v = block[key]
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError("must be a finite number", fp)
        v = float(v)
    elif kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError("must be an integer", fp)
    elif kind is bool:
        if not isinstance(v, bool):
            raise ConfigError("must be true or false", fp)
    elif kind is str:
        if not isinstance(v, str):
            raise ConfigError("must be a string", fp)
    elif kind is list:
        if not isinstance(v, list):
            raise ConfigError("must be a list", fp)
    elif kind is dict:
        if not isinstance(v, dict):
            raise ConfigError("must be an object", fp)
    if check is not None and not check(v):
        raise ConfigError(what or "value out of range", fp)
    return v


def _numbers(block: dict, key: str, path: str, kind=float, default=...) -> list:
    vals = _get(block, key, path, list, default)
    out = []
    for i, v in enumerate(vals):
        out.append(_get({"_": v}, "_", "", kind, fieldpath=f"{_join(path, key)}[{i}]"))
    return out


def _allowed(block: dict, keys: set, path: str) -> None:
    extra = sorted(set(block) - keys)
    if extra:
        raise ConfigError(f"unknown field {extra[0]!r}", _join(path, extra[0]))


# ---------------------------------------------------------------- law and map
def build_law(block: Any, path: str = "law") -> EnvironmentLaw:
    if not isinstance(block, dict):
        raise ConfigError("must be an object", path)
    kind = _get(block, "kind", path, str)
    nl = _get(block, "non_lattice", path, bool, False)  # beta laws default to True below
    try:
        if kind == "two-point":
            _allowed(block, {"kind", "p_low", "p_high", "weight_low", "non_lattice"}, path)
            return make_two_point_law(_get(block, "p_low", path, float), _get(block, "p_high", path, float),
                                      _get(block, "weight_low", path, float), non_lattice=nl)
        if kind == "finite":
            _allowed(block, {"kind", "atoms", "non_lattice"}, path)
            atoms = _get(block, "atoms", path, list)
            return finite_law(atoms, non_lattice=nl)
        if kind == "rho":
            _allowed(block, {"kind", "rho", "weights", "non_lattice"}, path)
            rho = _numbers(block, "rho", path)
            w = _numbers(block, "weights", path)
            if len(rho) != len(w):
                raise ConfigError("rho and weights differ in length", "weights")
            for i, r in enumerate(rho):
                if r <= 0:
                    raise ConfigError("rho values must be positive", f"rho[{i}]")
            return law_from_rho(rho, w, non_lattice=nl)
        if kind == "beta":
            _allowed(block, {"kind", "a", "b", "ellipticity", "non_lattice"}, path)
            return clipped_beta_law(_get(block, "a", path, float), _get(block, "b", path, float),
                                    _get(block, "ellipticity", path, float), non_lattice=_get(block, "non_lattice", path, bool, True))
    except ConfigError as exc:
        if exc.path and exc.path.startswith(path + "."):
            raise
        raise exc.relocate(path) from None
    raise ConfigError(f"unknown law kind {kind!r}", f"{path}.kind")


def _read_increments(name: str, base_dir: str | None, path: str) -> list:
    full = name if os.path.isabs(name) else os.path.join(base_dir or ".", name)
    try:
        with open(full, encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh]
    except OSError as exc:
        raise ConfigError(f"cannot read increment file: {exc.strerror}", path) from None
    out = []
    for i, ln in enumerate(lines):
        if not ln:
            continue
        try:
            out.append(int(ln))
        except ValueError:
            raise ConfigError(f"line {i + 1} is not an integer", path) from None
    return out


def build_map(block: Any, path: str = "map", base_dir: str | None = None) -> ResamplingMap:
    if not isinstance(block, dict):
        raise ConfigError("must be an object", path)
    kind = _get(block, "kind", path, str)
    positive = dict(check=lambda v: v > 0, what="must be positive")
    if kind in ("identity", "frozen", "counterexample", "double-exponential"):
        _allowed(block, {"kind"}, path)
        return {"identity": identity_map, "frozen": frozen_map, "counterexample": counterexample_map,
                "double-exponential": double_exponential_map}[kind]()
    if kind == "polynomial":
        _allowed(block, {"kind", "A", "a"}, path)
        return polynomial_map(_get(block, "A", path, float, 1.0, **positive),
                              _get(block, "a", path, float, check=lambda v: v >= 0, what="must be >= 0"))
    if kind == "critical":
        _allowed(block, {"kind", "A", "s"}, path)
        s = _get(block, "s", path, float, check=lambda v: 1 < v < 2, what="must lie in (1, 2)")
        return polynomial_map(_get(block, "A", path, float, 1.0, **positive), critical_exponent(s))
    if kind == "exponential":
        _allowed(block, {"kind", "B", "b"}, path)
        return exponential_map(_get(block, "B", path, float, 1.0, **positive),
                               _get(block, "b", path, float, math.log(2.0), **positive))
    if kind == "explicit":
        _allowed(block, {"kind", "increments", "file"}, path)
        if ("file" in block) == ("increments" in block):
            raise ConfigError("give exactly one of 'increments' and 'file'", f"{path}.increments")
        if "file" in block:
            where = f"{path}.file"
            incs = _read_increments(_get(block, "file", path, str), base_dir, where)
        else:
            where = f"{path}.increments"
            incs = _numbers(block, "increments", path, int)
        if not incs:
            raise ConfigError("increment list is empty", where)
        for i, t in enumerate(incs):
            if t < 1:
                raise ConfigError("increments must be positive", f"{where}[{i}]")
        return explicit_map(incs)
    raise ConfigError(f"unknown map kind {kind!r}", f"{path}.kind")


# ---------------------------------------------------------------- experiment config
@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    experiment: str
    law: EnvironmentLaw | None
    rmap: ResamplingMap | None
    horizons: tuple[int, ...]
    replicas: int
    seed: int
    mode: str = "annealed"
    env_seed: int | None = None
    theta_grid: tuple[float, ...] = ()
    x_grid: tuple[float, ...] = ()
    scgf_method: str = "mc"
    blocks: int = 0
    values: dict = field(default_factory=dict)
    output: str = ""

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


TOP_KEYS = {"experiment", "law", "map", "horizons", "replicas", "seed", "mode", "env_seed", "theta_grid",
            "x_grid", "scgf_method", "blocks", "values", "output", "description"}


def validate(raw: Any, base_dir: str | None = None) -> ExperimentConfig:
    """Validate a parsed JSON object; raises :class:`ConfigError` with a field path.

    ``base_dir`` resolves relative file references (increment lists).
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", "$")
    _allowed(raw, TOP_KEYS, "")
    exp = _get(raw, "experiment", "", str, check=lambda v: v in EXPERIMENTS,
               what=f"must be one of {', '.join(EXPERIMENTS)}")
    seed_ok = dict(check=lambda v: 0 <= v <= MASK64, what="must be an unsigned 64-bit integer")
    seed = _get(raw, "seed", "", int, **seed_ok)
    replicas = _get(raw, "replicas", "", int, 1, check=lambda v: v >= 1, what="must be >= 1")
    law = None if exp in NO_LAW else build_law(raw.get("law"), "law") if "law" in raw else None
    if exp not in NO_LAW and law is None:
        raise ConfigError("required field is missing", "law")
    rmap = build_map(raw["map"], "map", base_dir) if "map" in raw else None
    if rmap is None and exp != "counterexample":
        raise ConfigError("required field is missing", "map")
    horizons: list = []
    if exp not in ("counterexample",):
        if exp == "mass-game" and "horizons" not in raw:
            horizons = []
        else:
            horizons = _numbers(raw, "horizons", "", int)
            if not horizons:
                raise ConfigError("need at least one horizon", "horizons")
            for i, n in enumerate(horizons):
                if n < 1:
                    raise ConfigError("horizons must be >= 1", f"horizons[{i}]")
    mode = _get(raw, "mode", "", str, "annealed", check=lambda v: v in ("annealed", "quenched"),
                what="must be 'annealed' or 'quenched'")
    env_seed = _get(raw, "env_seed", "", int, None, **seed_ok)
    theta = _numbers(raw, "theta_grid", "", float, [])
    xg = _numbers(raw, "x_grid", "", float, [])
    if exp in ("scgf", "rate-function") and not theta:
        raise ConfigError("required field is missing", "theta_grid")
    if exp == "rate-function" and not xg:
        raise ConfigError("required field is missing", "x_grid")
    method = _get(raw, "scgf_method", "", str, "mc", check=lambda v: v in ("mc", "block"),
                  what="must be 'mc' or 'block'")
    blocks = _get(raw, "blocks", "", int, 0, check=lambda v: v >= 0, what="must be >= 0")
    if exp == "counterexample" and blocks < 1:
        raise ConfigError("counterexample needs blocks >= 1", "blocks")
    values = _get(raw, "values", "", dict, {"kind": "alternating"})
    if exp == "mass-game":
        vk = _get(values, "kind", "values", str, check=lambda v: v in ("alternating", "constant"),
                  what="must be 'alternating' or 'constant'")
        if vk == "constant":
            _get(values, "value", "values", float)
        if not horizons and blocks < 1:
            raise ConfigError("mass-game needs horizons or blocks", "blocks")
    output = _get(raw, "output", "", str, exp)
    if not output or "/" in output or output.startswith("."):
        raise ConfigError("must be a plain file stem", "output")
    return ExperimentConfig(raw, exp, law, rmap, tuple(horizons), replicas, seed, mode, env_seed,
                            tuple(theta), tuple(xg), method, blocks, values, output)


def load(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", "$") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", "$") from None
    return validate(raw, os.path.dirname(os.path.abspath(path)))
