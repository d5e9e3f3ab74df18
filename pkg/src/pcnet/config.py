"""Run configuration: one flat `key = value` text file drives every
command.  `#` starts a comment; command-line flags override file values.
Serialization is canonical (fixed key order, repr floats) so two configs
compare byte-wise."""

from __future__ import annotations

from dataclasses import dataclass, fields

from .learn import MODEL_KINDS, TrainConfig
from .pointnet import PointNetConfig
from .pointnetpp import PointNetPPConfig, SetAbstractionConfig


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    return tuple(int(p) for p in parts)


def _parse_float_tuple(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    return tuple(float(p) for p in parts)


def _parse_nested_tuple(text: str) -> tuple[tuple[int, ...], ...]:
    # Layer groups split on ';', widths within a group on ','.
    groups = [g.strip() for g in text.split(";") if g.strip()]
    return tuple(_parse_int_tuple(g) for g in groups)


@dataclass
class RunConfig:
    # model / seeds
    model: str = "pointnet"
    seed: int = 0
    # geometry
    points: int = 256
    grouping: str = "ball"
    # dataset
    samples_per_class: int = 200
    synth_points_min: int = 128
    synth_points_max: int = 512
    noise_sigma: float = 0.02
    pose_jitter: float = 0.5
    test_fraction: float = 0.2
    # training
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    reg_weight: float = 1e-3
    # architecture
    tnet_mlp: tuple[int, ...] = (32, 64)
    pointnet_mlp: tuple[int, ...] = (64, 128, 256)
    pointnet_head: tuple[int, ...] = (128,)
    sa_centers: tuple[int, ...] = (64, 16)
    sa_radius: tuple[float, ...] = (0.25, 0.5)
    sa_max_neighbors: tuple[int, ...] = (16, 16)
    sa_k: tuple[int, ...] = (16, 16)
    sa_mlp: tuple[tuple[int, ...], ...] = ((32, 64), (64, 128))
    pnpp_head: tuple[int, ...] = (64,)
    # paths
    data_dir: str = "data"
    checkpoint_path: str = "model.ckpt"
    report_path: str = "report.txt"

    def validate(self) -> None:
        if self.model not in MODEL_KINDS:
            raise ValueError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if self.points < 8:
            raise ValueError(f"points must be >= 8, got {self.points}")
        if self.grouping not in ("ball", "knn"):
            raise ValueError(f"grouping must be 'ball' or 'knn', got {self.grouping!r}")
        if self.samples_per_class < 1:
            raise ValueError(f"samples_per_class must be >= 1, got {self.samples_per_class}")
        if not 8 <= self.synth_points_min <= self.synth_points_max:
            raise ValueError(f"bad synth point range "
                             f"[{self.synth_points_min}, {self.synth_points_max}]")
        if self.noise_sigma < 0 or self.pose_jitter < 0:
            raise ValueError("noise_sigma and pose_jitter must be >= 0")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        stack = (self.sa_centers, self.sa_radius, self.sa_max_neighbors, self.sa_k, self.sa_mlp)
        if len(set(len(s) for s in stack)) != 1:
            raise ValueError("sa_centers, sa_radius, sa_max_neighbors, sa_k, and sa_mlp "
                             "must all have one entry per abstraction layer")
        for name in ("data_dir", "checkpoint_path", "report_path"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be a non-empty path")
        self.train_config().validate()
        self.pointnet_config().validate()
        self.pointnetpp_config().validate()
        if self.model == "pointnetpp" and self.points < self.sa_centers[0]:
            raise ValueError(f"points ({self.points}) must be >= the first layer's "
                             f"center count ({self.sa_centers[0]})")

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size,
                           learning_rate=self.learning_rate, optimizer=self.optimizer,
                           beta1=self.beta1, beta2=self.beta2, eps=self.eps,
                           reg_weight=self.reg_weight, rng_seed=self.seed,
                           points_per_cloud=self.points)

    def pointnet_config(self) -> PointNetConfig:
        return PointNetConfig(tnet_mlp=self.tnet_mlp, shared_mlp=self.pointnet_mlp,
                              head_hidden=self.pointnet_head)

    def pointnetpp_config(self) -> PointNetPPConfig:
        sa = tuple(
            SetAbstractionConfig(num_centers=c, mlp_widths=w, grouping=self.grouping,
                                 radius=r, max_neighbors=m, k=k)
            for c, r, m, k, w in zip(self.sa_centers, self.sa_radius,
                                     self.sa_max_neighbors, self.sa_k, self.sa_mlp))
        return PointNetPPConfig(sa=sa, head_hidden=self.pnpp_head)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


def _format_value(value) -> str:
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(",".join(str(w) for w in g) for g in value)
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


_TUPLE_INT = {"tnet_mlp", "pointnet_mlp", "pointnet_head", "sa_centers",
              "sa_max_neighbors", "sa_k", "pnpp_head"}
_TUPLE_FLOAT = {"sa_radius"}
_TUPLE_NESTED = {"sa_mlp"}


def _coerce(name: str, kind: type, raw: str):
    raw = raw.strip()
    if name in _TUPLE_NESTED:
        return _parse_nested_tuple(raw)
    if name in _TUPLE_INT:
        return _parse_int_tuple(raw)
    if name in _TUPLE_FLOAT:
        return _parse_float_tuple(raw)
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def parse_config_text(text: str, base: RunConfig | None = None,
                      source: str = "<config>") -> RunConfig:
    cfg = RunConfig(**{f.name: getattr(base, f.name) for f in fields(RunConfig)}) \
        if base is not None else RunConfig()
    types = {f.name: type(getattr(cfg, f.name)) for f in fields(RunConfig)}
    for ln, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ValueError(f"{source}: line {ln}: expected `key = value`, got {line!r}")
        key, _, raw = s.partition("=")
        key = key.strip()
        if key not in types:
            raise ValueError(f"{source}: line {ln}: unknown key {key!r}")
        try:
            setattr(cfg, key, _coerce(key, types[key], raw))
        except ValueError as e:
            raise ValueError(f"{source}: line {ln}: bad value for {key}: {e}") from None
    return cfg


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path, encoding="ascii") as f:
        return parse_config_text(f.read(), base=base, source=str(path))


def config_round_trip(cfg: RunConfig) -> RunConfig:
    return parse_config_text(cfg.to_text())
