"""Experiment configuration: a flat ``key = value`` file plus overrides."""

from dataclasses import dataclass, field, fields, replace
import math
import os

import numpy as np

from .dynamics import Exponents
from .errors import DomainError

MODELS = ("torus", "sphere")


def _floats(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).replace(";", ",").split(",") if x.strip())


def _optional_float(text):
    if text is None or str(text).strip().lower() in ("", "none", "auto"):
        return None
    return float(text)


def _bool(text):
    if isinstance(text, bool):
        return text
    val = str(text).strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise DomainError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    dim: int = 5
    model: str = "torus"
    h: float = 1.0
    t0: tuple = (1e3, 1e4, 1e5, 1e6)
    tmax: float = None
    level: int = 2
    grid: int = 2000
    rmax: float = 1e4
    nodes: int = 2000
    radii: tuple = (0.01, 0.0178, 0.0316, 0.0562, 0.1)
    z0: tuple = ()
    ric: str = ""
    forcing: str = "lambda=0.7,xi=1.0"
    tol: float = 1e-8
    # exponent block; None picks the default tied to eps0
    eps0: float = 0.1
    eps1: float = 0.05
    sigma0: float = 0.5
    a: float = None
    b: float = None
    alpha: float = None
    beta: float = None
    rho: float = None
    delta0: float = 0.25
    seed: int = 0
    quick: bool = False
    out: str = ""
    json: str = ""
    tolerances: dict = field(default_factory=dict)

    @property
    def exponents(self):
        return Exponents(self.dim, eps0=self.eps0, eps1=self.eps1, sigma0=self.sigma0, a=self.a, b=self.b,
                         alpha=self.alpha, beta=self.beta, delta0=self.delta0)

    def tolerance(self, name, default):
        return float(self.tolerances.get(name, default))

    def violations(self):
        out = []
        if self.dim < 5:
            out.append("dim must be at least 5")
            return out
        if self.model not in MODELS:
            out.append(f"model must be one of {', '.join(MODELS)}")
        if not self.h > 0:
            out.append("h must be positive at the blow-up point")
        if not self.t0 or min(self.t0) <= 0:
            out.append("t0 must be positive")
        if self.tmax is not None and self.t0 and not self.tmax > max(self.t0):
            out.append("tmax must exceed t0")
        if self.level not in (1, 2):
            out.append("level must be 1 or 2")
        if self.z0 and len(self.z0) not in (1, self.dim):
            out.append("z0 needs one coordinate or dim coordinates")
        ex = self.exponents
        out.extend(ex.violations())
        if self.rho is not None and abs(self.rho - ex.rho) > 1e-12:
            out.append("rho must equal (N - 2)/2 - alpha")
        return out

    def validate(self):
        bad = self.violations()
        if bad:
            raise DomainError("; ".join(bad))
        return self

    def center(self):
        if not self.z0:
            return np.zeros(self.dim)
        return np.full(self.dim, self.z0[0]) if len(self.z0) == 1 else np.asarray(self.z0, float)

    def ricci(self):
        """Ricci matrix at the blow-up point: zero, or read from a whitespace table."""
        if not self.ric:
            return np.zeros((self.dim, self.dim))
        m = np.atleast_2d(np.loadtxt(self.ric, dtype=float))
        if m.shape != (self.dim, self.dim):
            raise DomainError(f"Ricci file must hold a {self.dim}x{self.dim} matrix")
        return m

    def forcing_amplitudes(self):
        vals = parse_pairs(self.forcing)
        unknown = set(vals) - {"lambda", "xi"}
        if unknown:
            raise DomainError(f"unknown forcing keys: {', '.join(sorted(unknown))}")
        return float(vals.get("lambda", 0.0)), float(vals.get("xi", 0.0))


_CONVERT = {
    int: int,
    float: float,
    str: str,
    tuple: _floats,
    bool: _bool,
}

_OPTIONAL = {"tmax", "a", "b", "alpha", "beta", "rho"}


def _converter(name):
    if name in _OPTIONAL:
        return _optional_float
    default = {f.name: f for f in fields(ExperimentConfig)}[name].default
    return _CONVERT[type(default)]


def parse_pairs(text):
    out = {}
    for part in str(text).split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise DomainError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def read_pairs(path):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    pairs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{lineno}: expected key = value")
            k, v = line.split("=", 1)
            pairs[k.strip()] = v.strip()
    return pairs


def apply_pairs(cfg, pairs):
    """Return ``cfg`` with string values from ``pairs`` converted and applied.

    Keys of the form ``tol.NAME`` set entries of the tolerance table.
    """
    names = {f.name for f in fields(ExperimentConfig)} - {"tolerances"}
    updates, tols = {}, dict(cfg.tolerances)
    for k, v in pairs.items():
        if k.startswith("tol."):
            tols[k[4:]] = float(v)
            continue
        if k not in names:
            raise DomainError(f"unknown configuration key: {k}")
        try:
            updates[k] = _converter(k)(v)
        except ValueError as exc:
            raise DomainError(f"bad value for {k}: {v!r}") from exc
    return replace(cfg, tolerances=tols, **updates)


def load_config(path=None, overrides=None):
    """Defaults, then the file at ``path``, then ``overrides`` (a dict of strings)."""
    cfg = ExperimentConfig()
    if path:
        cfg = apply_pairs(cfg, read_pairs(path))
    if overrides:
        cfg = apply_pairs(cfg, overrides)
    return cfg


def thread_cap(default=1):
    """Concurrency limit from YBL_THREADS."""
    raw = os.environ.get("YBL_THREADS", "")
    if not raw.strip():
        return default
    try:
        n = int(raw)
    except ValueError as exc:
        raise DomainError(f"YBL_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise DomainError("YBL_THREADS must be at least 1")
    return n


def dump_pairs(cfg):
    """Config as sorted ``key = value`` lines (round-trips through :func:`read_pairs`)."""
    lines = []
    for f in sorted(fields(cfg), key=lambda f: f.name):
        val = getattr(cfg, f.name)
        if f.name == "tolerances":
            lines += [f"tol.{k} = {v!r}" for k, v in sorted(val.items())]
            continue
        if isinstance(val, tuple):
            val = ",".join(repr(float(x)) for x in val)
        elif val is None:
            val = "none"
        elif isinstance(val, float) and math.isfinite(val):
            val = repr(val)
        lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"
