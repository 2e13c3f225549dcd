"""Run configuration: TOML in, validated dataclasses out.

Unknown keys are errors.  Validation messages name the offending key and,
when it can be found, the line it sits on.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import ExponentSet, WeightSpec, weight_from_dict
from .kernels import MINUS, PLUS, KernelCertificate, builtin, lift
from .measures import MeasureSpec, atomic, lebesgue_with_density


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is set when the key could be located."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


TOP_KEYS = {"variant", "p", "q", "window", "tol", "seed", "workers", "eps_study",
            "kernel", "u", "v", "measure", "grid", "norm", "sweep", "compose",
            "partition", "synthetic", "side"}
KERNEL_KEYS = {"name", "sign", "alpha", "c", "lift", "xs", "ss", "values", "order", "h"}
WEIGHT_KEYS = {"kind", "coef", "exponent", "value", "a", "b", "points", "values", "factors"}
MEASURE_KEYS = {"kind", "power", "atoms", "window", "mass_at_infinity", "weight", "scale"}
GRID_KEYS = {"count", "xmin", "xmax", "spacing", "refine"}
NORM_KEYS = {"restarts", "max_iters"}
SWEEP_KEYS = {"kernel", "alpha", "exponents", "p", "q", "window", "grid"}
COMPOSE_KEYS = {"outer", "inner", "weight", "count", "xmin", "xmax"}
PARTITION_KEYS = {"f", "h", "count", "xmin", "xmax", "samples"}
SYNTHETIC_KEYS = {"matrix", "row_weights", "col_weights"}


def _line_of(text: str, key: str, section: str | None = None) -> int | None:
    lines = text.splitlines()
    start = 0
    if section:
        pat = re.compile(r"^\s*\[+\s*" + re.escape(section) + r"\s*\]+")
        for i, ln in enumerate(lines):
            if pat.match(ln):
                start = i
                break
    kpat = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
    for i in range(start, len(lines)):
        if kpat.match(lines[i]):
            return i + 1
    return None


def _number(x, what: str) -> float:
    if isinstance(x, bool):
        raise ConfigError(f"{what} must be a number")
    if isinstance(x, (int, float)):
        return float(x)
    if isinstance(x, str):
        try:
            return float(Fraction(x.strip()))
        except (ValueError, ZeroDivisionError):
            pass
    raise ConfigError(f"{what} must be a number or a fraction string like '4/3'")


def _check_keys(d: dict, allowed: set, where: str, text: str):
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown key '{k}' in {where}; allowed: {sorted(allowed)}",
                              _line_of(text, k, None if where == "top level" else where))


@dataclass
class RunConfig:
    raw: dict
    text: str = ""
    variant: str = "3.9"
    p: float = 2.0
    q: float = 4.0 / 3.0
    window: tuple[float, float] = (1e-4, 1e4)
    tol: float = 1e-8
    seed: int = 0
    workers: int = 1
    eps_study: bool = True
    side: str = "plus"
    kernel: dict = field(default_factory=lambda: {"name": "constant", "lift": True})
    u: dict | None = None
    v: dict | None = None
    measure: dict | None = None
    grid: dict = field(default_factory=dict)
    norm: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    compose: dict | None = None
    partition: dict | None = None
    synthetic: dict | None = None

    # ---- construction ------------------------------------------------------

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            m = re.search(r"line (\d+)", str(exc))
            raise ConfigError(f"not valid TOML: {exc}", int(m.group(1)) if m else None)
        return cls.from_dict(raw, text)

    @classmethod
    def from_path(cls, path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())

    @classmethod
    def from_dict(cls, raw: dict, text: str = "") -> "RunConfig":
        raw = copy.deepcopy(raw)
        _check_keys(raw, TOP_KEYS, "top level", text)
        cfg = cls(raw=raw, text=text)
        line = lambda k: _line_of(text, k)
        if "variant" in raw:
            cfg.variant = str(raw["variant"])
        for key in ("p", "q", "tol"):
            if key in raw:
                try:
                    setattr(cfg, key, _number(raw[key], key))
                except ConfigError as exc:
                    raise ConfigError(str(exc), line(key))
        if "window" in raw:
            w = raw["window"]
            if not (isinstance(w, list) and len(w) == 2):
                raise ConfigError("window must be a two-element list [a, b]", line("window"))
            a, b = (_number(x, "window end") for x in w)
            if not (0 <= a < b < math.inf):
                raise ConfigError(f"window ({a}, {b}] needs 0 <= a < b < inf", line("window"))
            cfg.window = (a, b)
        for key in ("seed", "workers"):
            if key in raw:
                if not isinstance(raw[key], int) or isinstance(raw[key], bool) or raw[key] < 0:
                    raise ConfigError(f"{key} must be a nonnegative integer", line(key))
                setattr(cfg, key, raw[key])
        if "eps_study" in raw:
            cfg.eps_study = bool(raw["eps_study"])
        if "side" in raw:
            if raw["side"] not in ("plus", "minus"):
                raise ConfigError("side must be 'plus' or 'minus'", line("side"))
            cfg.side = raw["side"]
        sections = {"kernel": KERNEL_KEYS, "u": WEIGHT_KEYS, "v": WEIGHT_KEYS,
                    "measure": MEASURE_KEYS, "grid": GRID_KEYS, "norm": NORM_KEYS,
                    "sweep": SWEEP_KEYS, "compose": COMPOSE_KEYS,
                    "partition": PARTITION_KEYS, "synthetic": SYNTHETIC_KEYS}
        for name, keys in sections.items():
            if name in raw:
                if not isinstance(raw[name], dict):
                    raise ConfigError(f"[{name}] must be a table", line(name))
                _check_keys(raw[name], keys, name, text)
                setattr(cfg, name, raw[name])
        cfg.validate()
        return cfg

    def validate(self):
        if not self.p > 1 or not self.q > 1:
            raise ConfigError(f"exponents must exceed 1 (got p={self.p}, q={self.q})",
                              _line_of(self.text, "p"))
        if self.q >= self.p:
            raise ConfigError(f"regime violation: need 1 < q < p, got p={self.p}, q={self.q}",
                              _line_of(self.text, "q"))
        from .criteria import VARIANTS
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {sorted(VARIANTS)}",
                              _line_of(self.text, "variant"))
        for name in ("u", "v"):
            spec = getattr(self, name)
            if spec is not None:
                try:
                    weight_from_dict(spec)
                except (ValueError, KeyError, TypeError) as exc:
                    raise ConfigError(f"[{name}]: {exc}", _line_of(self.text, name))
        try:
            self.kernel_cert()
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"[kernel]: {exc}", _line_of(self.text, "name", "kernel"))

    # ---- builders ------------------------------------------------------------

    @property
    def exps(self) -> ExponentSet:
        return ExponentSet(self.p, self.q)

    def weight(self, name: str) -> WeightSpec | None:
        spec = getattr(self, name)
        return None if spec is None else weight_from_dict(spec)

    def kernel_cert(self, spec: dict | None = None) -> KernelCertificate:
        return kernel_from_dict(spec if spec is not None else self.kernel)

    def mu(self) -> MeasureSpec | None:
        m = self.measure
        if m is None:
            return None
        kind = m.get("kind", "lebesgue-density")
        scale = _number(m.get("scale", 1.0), "measure scale")
        if kind == "lebesgue-density":
            w = weight_from_dict(m["weight"]) if "weight" in m else self.weight("u")
            if w is None:
                raise ConfigError("lebesgue-density measure needs a weight or [u]")
            power = _number(m.get("power", self.q), "measure power")
            window = tuple(m.get("window", self.window))
            mu = lebesgue_with_density(w, power, window=window)
        elif kind == "atomic":
            atoms = [(_number(x, "atom location"), _number(a, "atom mass"))
                     for x, a in m.get("atoms", [])]
            mu = atomic(atoms, tuple(m.get("window", (0.0, math.inf))),
                        _number(m.get("mass_at_infinity", 0.0), "mass at infinity"))
        else:
            raise ConfigError(f"unknown measure kind {kind!r}",
                              _line_of(self.text, "kind", "measure"))
        return mu.scaled(scale) if scale != 1.0 else mu

    def resolved(self) -> dict:
        """The configuration with defaults filled in (embedded in reports)."""
        return {
            "variant": self.variant, "p": self.p, "q": self.q,
            "window": list(self.window), "tol": self.tol, "seed": self.seed,
            "workers": self.workers, "eps_study": self.eps_study, "side": self.side,
            "kernel": self.kernel, "u": self.u, "v": self.v, "measure": self.measure,
            "grid": self.grid, "norm": self.norm, "sweep": self.sweep,
            "compose": self.compose, "partition": self.partition,
            "synthetic": self.synthetic,
        }

    def digest(self) -> str:
        """Hash of everything that can change the numbers (worker count excluded)."""
        res = {k: v for k, v in self.resolved().items() if k != "workers"}
        blob = json.dumps(res, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_overrides(self, **kw) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        for k, val in kw.items():
            if k in ("alpha", "kernel"):
                kern = dict(raw.get("kernel", self.kernel))
                if k == "alpha":
                    kern["alpha"] = val
                else:
                    kern = dict(val) if isinstance(val, dict) else {"name": val}
                raw["kernel"] = kern
            elif k == "exponents":
                if not (isinstance(val, list) and len(val) == 2):
                    raise ConfigError("each sweep exponent pair must be [p, q]")
                raw["p"], raw["q"] = val
            elif k == "grid":
                g = dict(raw.get("grid", {}))
                g["count"] = val
                raw["grid"] = g
            else:
                raw[k] = val
        raw.pop("sweep", None)
        return RunConfig.from_dict(raw)


def kernel_from_dict(spec: dict) -> KernelCertificate:
    spec = dict(spec)
    name = spec.pop("name", None)
    if name is None:
        raise ValueError("kernel needs a name")
    sign = spec.pop("sign", PLUS)
    if sign not in (PLUS, MINUS):
        raise ValueError("kernel sign must be '+' or '-'")
    do_lift = spec.pop("lift", None)
    if "alpha" in spec:
        spec["alpha"] = _number(spec["alpha"], "alpha")
    k = builtin(name, sign, **spec)
    if do_lift is None:
        do_lift = k.order == 0
    return lift(k) if do_lift and k.order == 0 else k
