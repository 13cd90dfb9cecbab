"""Built-in scenario bundles.

Parametrised presets are requested as ``name(arg, ...)``, e.g. ``poly(2,1.5)``
or ``critical(1.5)``; the bare name uses the defaults shown in the registry.
"""
from __future__ import annotations

import math
import re

from .config import validate
from .errors import ConfigError
from .resampling import critical_exponent

BALLISTIC_LAW = {"kind": "rho", "rho": [1.5, 0.25], "weights": [0.5, 0.5]}
HOMOGENEOUS_LAW = {"kind": "two-point", "p_low": 0.4, "p_high": 0.8, "weight_low": 0.5}
SINAI_LAW = {"kind": "two-point", "p_low": 0.25, "p_high": 0.75, "weight_low": 0.5}


def _rho_law_with_s(s: float) -> dict:
    """Two-point rho law ``{1/4, rho_high}`` with equal weights and ``E[rho**s] = 1``."""
    high = (2.0 - 0.25 ** s) ** (1.0 / s)
    return {"kind": "rho", "rho": [0.25, high], "weights": [0.5, 0.5]}


def _identity():
    return {"experiment": "moments", "description": "identity map: homogenised walk with mean 2E[omega]-1",
            "law": HOMOGENEOUS_LAW, "map": {"kind": "identity"}, "horizons": [1000], "replicas": 2000, "seed": 1}


def _frozen():
    return {"experiment": "moments", "description": "frozen map: plain annealed RWRE, ballistic law",
            "law": BALLISTIC_LAW, "map": {"kind": "frozen"}, "horizons": [1000], "replicas": 2000, "seed": 1}


def _poly(A=1.0, a=1.0):
    return {"experiment": "profile", "description": f"polynomial cooling T_k = round({A:g} k^{a:g})",
            "law": BALLISTIC_LAW, "map": {"kind": "polynomial", "A": A, "a": a}, "horizons": [1000],
            "replicas": 2000, "seed": 1}


def _exp(B=1.0, b=math.log(2.0)):
    return {"experiment": "profile", "description": f"exponential cooling tau(k) = round({B:g} e^({b:g} k)), Sinai law",
            "law": SINAI_LAW, "map": {"kind": "exponential", "B": B, "b": b}, "horizons": [1024],
            "replicas": 2000, "seed": 1}


def _counterexample():
    return {"experiment": "counterexample", "description": "gradual sum with T_k = 4^k - 4^(k-1) and no strong LLN",
            "map": {"kind": "counterexample"}, "blocks": 10000, "replicas": 500, "seed": 1}


def _critical(s=1.5):
    return {"experiment": "moments", "description": f"critical polynomial cooling a = 1/(s-1) = {critical_exponent(s):g}",
            "law": _rho_law_with_s(s), "map": {"kind": "critical", "s": s}, "horizons": [1000],
            "replicas": 2000, "seed": 1}


PRESETS = {
    "identity": (_identity, 0, "identity map, homogenised two-point law"),
    "frozen": (_frozen, 0, "frozen map (plain RWRE), ballistic law"),
    "poly(A,a)": (_poly, 2, "polynomial cooling T_k = round(A k^a), default A=1, a=1"),
    "exp(B,b)": (_exp, 2, "exponential cooling tau(k) = round(B e^(b k)), default tau(k) = 2^k"),
    "counterexample-4k": (_counterexample, 0, "strong-LLN counterexample on T_k = 4^k - 4^(k-1)"),
    "critical(s)": (_critical, 1, "critical polynomial cooling a = 1/(s-1), default s = 1.5"),
}

_CALL = re.compile(r"^([a-z0-9-]+)(?:\((.*)\))?$")


def list_presets() -> list[tuple[str, str]]:
    return [(name, desc) for name, (_, _, desc) in PRESETS.items()]


def _checked(cfg: dict) -> dict:
    try:
        validate(cfg)
    except ConfigError as exc:
        raise ConfigError(f"{exc.message} ({exc.path})", "preset") from None
    return cfg


def resolve(name: str) -> dict:
    """Config dict of a preset request such as ``identity`` or ``critical(1.5)``.

    The output stem is the preset's base name, so presets never overwrite
    each other's files.
    """
    m = _CALL.match(name.strip().replace(" ", ""))
    if not m:
        raise ConfigError(f"unknown preset {name!r}", "preset")
    base, args = m.group(1), m.group(2)
    for key, (fn, arity, _) in PRESETS.items():
        if key.split("(")[0] != base:
            continue
        if args is None or args == key[len(base) + 1:-1]:
            return _checked({**fn(), "output": base})
        try:
            vals = [float(v) for v in args.split(",")] if args else []
        except ValueError:
            raise ConfigError(f"preset arguments must be numbers: {args!r}", "preset") from None
        if len(vals) > arity:
            raise ConfigError(f"{key} takes at most {arity} argument(s)", "preset")
        try:
            cfg = {**fn(*vals), "output": base}
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(str(exc), "preset") from None
        return _checked(cfg)
    raise ConfigError(f"unknown preset {name!r}", "preset")
