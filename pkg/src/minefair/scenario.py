"""Experiment inputs: hashrate distributions, delay models, tie-break rules.

Scenario files are YAML documents::

    n_miners: 4
    block_interval_s: 600
    tie_break: first_seen          # first_seen | random | last_generated
    hashrates:                     # explicit vector ...
      [0.4, 0.3, 0.2, 0.1]
    # ... or a pool spec with the residual spread evenly:
    # hashrates:
    #   pools:
    #     - {label: Foundry USA, share: 0.29}
    #   fill_to: 1000
    delays:
      model: fixed                 # fixed | matrix | logistic | grouped
      d: 6
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
import yaml

from .errors import ScenarioError

# Hand-written shares within this distance of 1 are renormalized, anything
# further off is rejected.
NORMALIZE_TOL = 1e-9


class TieBreak(enum.Enum):
    FIRST_SEEN = "first_seen"
    RANDOM = "random"
    LAST_GENERATED = "last_generated"

    @classmethod
    def parse(cls, value: "str | TieBreak") -> "TieBreak":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ScenarioError(f"unknown rule {value!r} (expected one of {choices})", "tie_break") from None


@dataclass(frozen=True)
class FixedUniform:
    d: float

    def __post_init__(self):
        if not np.isfinite(self.d) or self.d < 0:
            raise ScenarioError(f"delay must be >= 0, got {self.d}", "delays.d")


@dataclass(frozen=True, eq=False)
class ExplicitMatrix:
    values: np.ndarray

    def __post_init__(self):
        m = np.array(self.values, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ScenarioError(f"delay matrix must be square, got shape {m.shape}", "delays.values")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ScenarioError("delays must be finite and >= 0", "delays.values")
        if np.any(np.diag(m) != 0):
            raise ScenarioError("self-delays T_ii must be 0", "delays.values")
        m.setflags(write=False)
        object.__setattr__(self, "values", m)


@dataclass(frozen=True)
class LogisticRandom:
    """Per-pair delays drawn from the logistic law of gossip dissemination.

    The scale defaults to ``mean / ln(n - 1)``, which is what the logistic
    spreading curve ``I(t) = n / (1 + (n-1) exp(-beta n t))`` gives when beta is
    chosen to put its mean at ``mean``.  ``scale=0`` collapses the law onto
    ``mean`` (a fixed delay).
    """

    mean: float
    symmetric: bool = False
    seed: int = 0
    scale: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.mean) or self.mean <= 0:
            raise ScenarioError(f"mean must be > 0, got {self.mean}", "delays.mean")
        if self.scale is not None and (not np.isfinite(self.scale) or self.scale < 0):
            raise ScenarioError(f"scale must be >= 0, got {self.scale}", "delays.scale")
        if not 0 <= int(self.seed) < 2**64:
            raise ScenarioError("seed must be an unsigned 64-bit integer", "delays.seed")

    def scale_for(self, n: int) -> float:
        if self.scale is not None:
            return float(self.scale)
        if n < 3:
            raise ScenarioError("the gossip delay law needs at least 3 miners", "delays")
        return self.mean / np.log(n - 1)


@dataclass(frozen=True, eq=False)
class GroupedFixed:
    """Delay fixed per (sender group, receiver group) pair."""

    groups: np.ndarray
    pair_delays: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.groups, dtype=int)
        p = np.array(self.pair_delays, dtype=float)
        if g.ndim != 1:
            raise ScenarioError("groups must be a flat list of group ids", "delays.groups")
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ScenarioError("pair_delays must be a square matrix", "delays.pair_delays")
        if g.size and (g.min() < 0 or g.max() >= p.shape[0]):
            raise ScenarioError("group id out of range of pair_delays", "delays.groups")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ScenarioError("delays must be finite and >= 0", "delays.pair_delays")
        g.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "groups", g)
        object.__setattr__(self, "pair_delays", p)


DelayModel = Union[FixedUniform, ExplicitMatrix, LogisticRandom, GroupedFixed]


@dataclass(frozen=True)
class PoolDistributionSpec:
    named_shares: tuple[tuple[str, float], ...]
    fill_to: int


def expand_pool_distribution(spec: PoolDistributionSpec) -> np.ndarray:
    """Named shares first, in order, then the residual split evenly."""
    named = np.array([float(s) for _, s in spec.named_shares], dtype=float)
    k = named.size
    if np.any(named <= 0):
        raise ScenarioError("named shares must be > 0", "hashrates.pools")
    if spec.fill_to < k:
        raise ScenarioError(f"fill_to={spec.fill_to} is smaller than the {k} named pools", "hashrates.fill_to")
    residual = 1.0 - named.sum()
    if spec.fill_to == k:
        if abs(residual) > NORMALIZE_TOL:
            raise ScenarioError(f"named shares sum to {named.sum():.10g} with no miners left to fill", "hashrates")
        return named / named.sum()
    if residual <= 0:
        raise ScenarioError(f"named shares sum to {named.sum():.10g}; nothing left for the other miners", "hashrates")
    alpha = np.empty(spec.fill_to)
    alpha[:k] = named
    alpha[k:] = residual / (spec.fill_to - k)
    return alpha


def normalize_hashrates(alpha) -> np.ndarray:
    a = np.asarray(alpha, dtype=float)
    if a.ndim != 1 or a.size < 2:
        raise ScenarioError("need a vector of at least 2 hashrates", "hashrates")
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise ScenarioError("every hashrate share must be > 0", "hashrates")
    total = a.sum()
    if abs(total - 1.0) > NORMALIZE_TOL:
        raise ScenarioError(f"hashrates sum to {total:.10g}", "hashrates")
    return a / total


@dataclass(frozen=True, eq=False)
class Scenario:
    alpha: np.ndarray
    block_interval: float
    delays: DelayModel
    tie_break: TieBreak = TieBreak.FIRST_SEEN
    labels: tuple[str, ...] = field(default=())
    name: str = ""

    def __post_init__(self):
        alpha = normalize_hashrates(self.alpha)
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "tie_break", TieBreak.parse(self.tie_break))
        if not np.isfinite(self.block_interval) or self.block_interval <= 0:
            raise ScenarioError(f"must be > 0, got {self.block_interval}", "block_interval_s")
        n = alpha.size
        if isinstance(self.delays, ExplicitMatrix) and self.delays.values.shape[0] != n:
            raise ScenarioError(f"delay matrix is {self.delays.values.shape[0]}x{self.delays.values.shape[0]} for {n} miners", "delays.values")
        if isinstance(self.delays, GroupedFixed) and self.delays.groups.size != n:
            raise ScenarioError(f"{self.delays.groups.size} group ids for {n} miners", "delays.groups")
        if isinstance(self.delays, LogisticRandom):
            self.delays.scale_for(n)

    @property
    def n_miners(self) -> int:
        return self.alpha.size

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "n_miners": self.n_miners,
            "block_interval_s": float(self.block_interval),
            "tie_break": self.tie_break.value,
            "hashrates": [float(a) for a in self.alpha],
            "delays": _delays_to_dict(self.delays),
        }

    def fingerprint(self) -> str:
        """SHA-256 over a canonical JSON rendering of the model inputs."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _delays_to_dict(model: DelayModel) -> dict:
    if isinstance(model, FixedUniform):
        return {"model": "fixed", "d": float(model.d)}
    if isinstance(model, ExplicitMatrix):
        return {"model": "matrix", "values": model.values.tolist()}
    if isinstance(model, LogisticRandom):
        out = {"model": "logistic", "mean": float(model.mean), "symmetric": bool(model.symmetric), "seed": int(model.seed)}
        if model.scale is not None:
            out["scale"] = float(model.scale)
        return out
    return {"model": "grouped", "groups": model.groups.tolist(), "pair_delays": model.pair_delays.tolist()}


def parse_delays(raw) -> DelayModel:
    if not isinstance(raw, dict) or "model" not in raw:
        raise ScenarioError("expected a mapping with a 'model' key", "delays")
    kind = str(raw["model"]).lower()

    def need(key):
        if key not in raw:
            raise ScenarioError("missing", f"delays.{key}")
        return raw[key]

    try:
        if kind == "fixed":
            return FixedUniform(float(need("d")))
        if kind == "matrix":
            return ExplicitMatrix(np.asarray(need("values"), dtype=float))
        if kind == "logistic":
            scale = raw.get("scale")
            return LogisticRandom(
                mean=float(need("mean")),
                symmetric=bool(raw.get("symmetric", False)),
                seed=int(raw.get("seed", 0)),
                scale=None if scale is None else float(scale),
            )
        if kind == "grouped":
            return GroupedFixed(np.asarray(need("groups")), np.asarray(need("pair_delays"), dtype=float))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc), "delays") from exc
    raise ScenarioError(f"unknown delay model {kind!r}", "delays.model")


def parse_hashrates(raw) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(raw, dict):
        pools = raw.get("pools", [])
        if "fill_to" not in raw:
            raise ScenarioError("missing", "hashrates.fill_to")
        named = []
        for p in pools:
            if isinstance(p, dict):
                named.append((str(p.get("label", "")), float(p["share"])))
            else:
                label, share = p
                named.append((str(label), float(share)))
        spec = PoolDistributionSpec(tuple(named), int(raw["fill_to"]))
        return expand_pool_distribution(spec), tuple(label for label, _ in named)
    if isinstance(raw, (list, tuple)):
        try:
            return np.asarray(raw, dtype=float), ()
        except (TypeError, ValueError) as exc:
            raise ScenarioError(str(exc), "hashrates") from exc
    raise ScenarioError("expected a list of shares or a pool spec", "hashrates")


def parse_scenario(doc: dict, name: str = "") -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a mapping")
    for key in ("block_interval_s", "hashrates", "delays"):
        if key not in doc:
            raise ScenarioError("missing", key)
    alpha, labels = parse_hashrates(doc["hashrates"])
    if "n_miners" in doc:
        n = int(doc["n_miners"])
        if n < 2:
            raise ScenarioError(f"need at least 2 miners, got {n}", "n_miners")
        if n != alpha.size:
            raise ScenarioError(f"n_miners={n} but {alpha.size} hashrates given", "n_miners")
    return Scenario(
        alpha=alpha,
        block_interval=float(doc["block_interval_s"]),
        delays=parse_delays(doc["delays"]),
        tie_break=TieBreak.parse(doc.get("tie_break", "first_seen")),
        labels=labels,
        name=str(doc.get("name", name)),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"no such scenario file: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError(f"cannot parse {path}: {exc}") from exc
    return parse_scenario(doc, name=path.stem)


def bundled_scenario_path(name: str = "bitcoin-2024") -> Path:
    return Path(__file__).parent / "data" / f"{name}.scenario"


def derive_seed(master_seed: int, index: int) -> int:
    """Child seed for replicate ``index``.

    ``SeedSequence(master_seed, spawn_key=(index,))`` hashed down to one
    64-bit word, so each replicate is reproducible on its own.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def realize_delays(model: DelayModel, n: int, rng_seed: int | None = None) -> np.ndarray:
    """N x N delay matrix in seconds, ``T[i, j]`` = time for i's block to reach j.

    Random draws use numpy's PCG64 seeded with ``rng_seed`` (falling back to the
    model's own seed), one draw per ordered pair in row-major order.
    """
    if isinstance(model, FixedUniform):
        out = np.full((n, n), float(model.d))
    elif isinstance(model, ExplicitMatrix):
        if model.values.shape != (n, n):
            raise ScenarioError(f"delay matrix shape {model.values.shape} != ({n}, {n})", "delays.values")
        out = model.values.copy()
    elif isinstance(model, GroupedFixed):
        if model.groups.size != n:
            raise ScenarioError(f"{model.groups.size} group ids for {n} miners", "delays.groups")
        out = model.pair_delays[np.ix_(model.groups, model.groups)].copy()
    elif isinstance(model, LogisticRandom):
        seed = model.seed if rng_seed is None else rng_seed
        rng = np.random.default_rng(int(seed))
        scale = model.scale_for(n)
        if scale == 0:
            out = np.full((n, n), float(model.mean))
        else:
            out = rng.logistic(model.mean, scale, size=(n, n))
            np.maximum(out, 0.0, out=out)
            if model.symmetric:
                upper = np.triu(out, 1)
                out = upper + upper.T
    else:
        raise TypeError(f"not a delay model: {model!r}")
    np.fill_diagonal(out, 0.0)
    return out
