"""Run configuration: JSON file, environment overrides, CLI flags.

Precedence is CLI flag > environment variable > file > default. Scalar fields
can be overridden through ``SCENRED_<SECTION>_<FIELD>`` (for example
``SCENRED_PPO_EPOCHS=3``) or ``SCENRED_<FIELD>`` for top-level fields.
"""
import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path

from .errors import InvalidArgument
from .nn.policy import NetConfig
from .rl import PpoConfig, RewardConfig


@dataclass(frozen=True)
class ProblemConfig:
    family: str = "CFLP"
    facilities: int = 5
    customers: int = 10
    sources: int = 2
    sinks: int = 2
    intermediates: int = 4
    scenarios: int = 30
    count: int = 8
    seed: int = 0
    scale_lo: float = 1.0
    scale_hi: float = 1.0

    def __post_init__(self):
        if self.family not in ("CFLP", "NDP"):
            raise InvalidArgument(f"unknown problem family {self.family!r}")


@dataclass(frozen=True)
class SolverConfig:
    node_limit: int = 100000
    gap: float = 1e-6
    enum_limit: int = 4096
    cache_size: int = 200000


@dataclass(frozen=True)
class PathsConfig:
    dataset: str = "data"
    val_dataset: str = ""
    out: str = "out"


@dataclass(frozen=True)
class ReportConfig:
    record_wall: bool = False
    shuffles: int = 100
    baseline_restarts: int = 4


@dataclass(frozen=True)
class TrainConfig:
    checkpoint_every: int = 10
    max_updates: int = -1


@dataclass(frozen=True)
class RunConfig:
    k: int = 3
    seed: int = 0
    seeds: tuple = (0,)
    threads: int = 1
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    net: NetConfig = field(default_factory=NetConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    report: ReportConfig = field(default_factory=ReportConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.k < 1:
            raise InvalidArgument("k must be >= 1")

    def to_dict(self):
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _coerce(value, default, name):
    if isinstance(default, bool):
        if isinstance(value, str):
            low = value.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise InvalidArgument(f"{name}: cannot read {value!r} as a boolean")
        return bool(value)
    try:
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except (TypeError, ValueError):
        raise InvalidArgument(f"{name}: cannot read {value!r} as {type(default).__name__}") from None
    if isinstance(default, tuple):
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split()]
        return tuple(int(v) for v in value)
    return str(value) if isinstance(default, str) else value


def _build(cls, data, prefix, env):
    data = dict(data or {})
    default = cls()
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise InvalidArgument(f"unknown config keys in {prefix or 'top level'}: {sorted(unknown)}")
    kwargs = {}
    for f in fields(cls):
        dv = getattr(default, f.name)
        name = f"{prefix}.{f.name}" if prefix else f.name
        if is_dataclass(dv):
            kwargs[f.name] = _build(type(dv), data.get(f.name), name, env)
            continue
        key = "SCENRED_" + name.replace(".", "_").upper()
        if key in env:
            kwargs[f.name] = _coerce(env[key], dv, name)
        elif f.name in data:
            kwargs[f.name] = _coerce(data[f.name], dv, name)
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise InvalidArgument(str(e)) from None


def config_from_dict(data, env=None):
    return _build(RunConfig, data, "", os.environ if env is None else env)


def load_config(path=None, env=None, overrides=None):
    """Read ``path`` (JSON), apply environment overrides, then ``overrides``.

    ``overrides`` maps dotted names (``"ppo.epochs"``) to values that win over
    everything else; ``None`` values are ignored.
    """
    data = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidArgument(f"cannot read config {path}: {e}") from None
    cfg = config_from_dict(data, env)
    for name, value in (overrides or {}).items():
        if value is not None:
            cfg = _override(cfg, name.split("."), value)
    return cfg


def _override(obj, parts, value):
    head = parts[0]
    cur = getattr(obj, head)
    if len(parts) == 1:
        return replace(obj, **{head: _coerce(value, cur, head)})
    return replace(obj, **{head: _override(cur, parts[1:], value)})
