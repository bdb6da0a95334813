"""Experiment configuration: validation, defaults, hashing, seed blocks."""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import resources
from ..env import EnvSpec
from ..fields import TestFunction
from ..kernels import derive_seed

KINDS = (
    "simulate",
    "exponent",
    "tail",
    "overlap",
    "moments",
    "compare",
    "covariance",
    "doob",
    "appendix-phi",
)

_REGRESSION_KINDS = {"exponent", "overlap", "moments", "compare"}

# seed stream tags; measurement and mean-injection blocks never overlap
TAG_MEASURE = 1
TAG_MEAN = 2


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


def _default_u_grid():
    return [round(float(u), 6) for u in np.geomspace(2.0, 50.0, 24)]


@dataclass
class ExperimentConfig:
    kind: str = "simulate"
    family: str = "gaussian"
    beta: float = 0.2
    p: float = 0.5
    width: float = 1.0
    seed: int = 1
    d: int = 3
    n_grid: list = field(default_factory=lambda: [16, 32, 64, 128])
    replicas: int = 200
    f: dict = field(default_factory=lambda: {"kind": "bump", "L": 1.0})
    delta: float = 0.12
    u_grid: list = field(default_factory=_default_u_grid)
    p_grid: list = field(default_factory=lambda: [1.0, 1.5, 2.0, 3.0])
    margin: float = 2.5              # sweep box half-margin, units of sqrt(n)
    mean_base_replicas: int = 8      # replicas for the shortest-horizon mean level
    mean_level_replicas: int = 16    # replicas per telescoping ratio level
    mean_box_factor: float = 6.0     # x-averaging box half-width, units of sqrt(max n)
    inner_samples: int = 2000
    phi_atoms: list = field(default_factory=lambda: [4, 16, 64, 256])
    phi_samples: int = 100_000
    phi_beta: float = 0.5
    threads: int = 1
    cell_budget: int = resources.DEFAULT_CELL_BUDGET
    out: str = None
    check: bool = False

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        try:
            self.env_spec()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if self.d < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.d}")
        ns = list(self.n_grid)
        if any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError(f"n_grid must be strictly increasing positive, got {ns}")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if self.kind in _REGRESSION_KINDS and self.replicas < 30:
            raise ConfigError(f"{self.kind} needs >= 30 replicas for regression, got {self.replicas}")
        if self.kind in ("compare", "exponent", "doob") and not 0.0 < self.delta < 1.0 / 6.0:
            raise ConfigError(f"delta must be in (0, 1/6), got {self.delta}")
        if self.kind == "tail":
            if any(u <= 1.0 for u in self.u_grid):
                raise ConfigError("tail u grid must stay above 1")
            if not self.env_spec().conc_ok:
                raise ConfigError(
                    "lower-tail experiment needs a concentration-friendly family "
                    "(bounded or Gaussian); distributions like the Poisson law "
                    "have exponential moments yet fail the concentration property"
                )
        if self.kind == "moments" and any(not 1.0 <= p <= 4.0 for p in self.p_grid):
            raise ConfigError(f"moment p grid must lie in [1, 4], got {self.p_grid}")
        if self.kind in ("doob", "covariance") and self.inner_samples < 1000:
            raise ConfigError("inner_samples must be >= 1000")
        if self.margin <= 0:
            raise ConfigError("margin must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        # structural disjointness of seed blocks, re-checked explicitly
        measure = {self.replica_seed(TAG_MEASURE, n, r) for n in ns[:2] for r in range(min(64, self.replicas))}
        mean = {self.replica_seed(TAG_MEAN, n, r) for n in ns[:2] for r in range(64)}
        if measure & mean:
            raise ConfigError("seed block collision between measurement and mean blocks")
        return self

    def env_spec(self):
        return EnvSpec(family=self.family, beta=self.beta, p=self.p, width=self.width)

    def test_function(self):
        return TestFunction.from_dict(self.f)

    def replica_seed(self, tag, n, r):
        return derive_seed(self.seed, tag, n, r)

    def radius(self, n):
        return int(math.ceil(self.margin * math.sqrt(n)))

    def as_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def config_hash(cfg_dict):
    canon = json.dumps(cfg_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def load_config_file(path):
    """Read a config from JSON; accepts a plain config or a summary.json."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    return data
