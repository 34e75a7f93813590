"""Model hyperparameters and the named-parameter layer plan."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..errors import SpecError


@dataclass(frozen=True)
class ModelSpec:
    segment_len: int = 360
    rnn_units_block1: int = 64
    rnn_units_block2: int = 128  # 0 drops the second recurrent block
    conv_blocks: int = 3
    kernel_width: int = 8
    filters: int = 64
    routing_iters: int = 3
    target_convs: int = 6
    attention_dim: int = 64  # length of each routed target vector
    dropout: float = 0.5
    classes: int = 5

    def __post_init__(self):
        checks = [
            (self.segment_len >= 1, "segment_len must be >= 1"),
            (self.rnn_units_block1 >= 1, "rnn_units_block1 must be >= 1"),
            (self.rnn_units_block2 >= 0, "rnn_units_block2 must be >= 0"),
            (self.conv_blocks >= 1, "conv_blocks must be >= 1"),
            (self.kernel_width >= 2, "kernel_width must be >= 2"),
            (self.filters >= 1, "filters must be >= 1"),
            (self.routing_iters >= 1, "routing_iters must be >= 1"),
            (self.classes >= 2, "classes must be >= 2"),
            (self.target_convs >= self.classes, "target_convs must be >= classes"),
            (self.attention_dim >= 1, "attention_dim must be >= 1"),
            (0 <= self.dropout < 1, "dropout must lie in [0, 1)"),
        ]
        for ok, msg in checks:
            if not ok:
                raise SpecError(msg)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "ModelSpec":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in types:
                raise SpecError(f"unknown model field {key!r}")
            conv = float if types[key] == "float" else int
            try:
                kwargs[key] = conv(raw)
            except (TypeError, ValueError):
                raise SpecError(f"model field {key!r}: cannot parse {raw!r}") from None
        return cls(**kwargs)

    @property
    def rnn_out(self) -> int:
        """Feature width after concatenating the two bidirectional branches."""
        last = self.rnn_units_block2 or self.rnn_units_block1
        return 2 * 2 * last


def dilations(spec: ModelSpec) -> list[int]:
    """1, 1, 2, 4, ...: the first block is an ordinary conv, then dilation doubles."""
    return [1] + [2 ** (l - 1) for l in range(1, spec.conv_blocks)]


def receptive_field(spec: ModelSpec) -> int:
    """Impulse support of the conv stack: (w - 1) * 2^(L-1) + 1 samples."""
    return (spec.kernel_width - 1) * 2 ** (spec.conv_blocks - 1) + 1


def rnn_blocks(spec: ModelSpec) -> list[tuple[int, int]]:
    """(input width, units) for each stacked bidirectional block of one branch."""
    blocks = [(1, spec.rnn_units_block1)]
    if spec.rnn_units_block2:
        blocks.append((2 * spec.rnn_units_block1, spec.rnn_units_block2))
    return blocks


def layer_plan(spec: ModelSpec) -> list[tuple[str, tuple[int, ...], str]]:
    """Every stored tensor as (name, shape, kind); kind is 'param' or 'buffer'."""
    plan: list[tuple[str, tuple[int, ...], str]] = []
    for branch, gates in (("gru", 3), ("lstm", 4)):
        for i, (d, u) in enumerate(rnn_blocks(spec), start=1):
            for direction in ("fwd", "bwd"):
                pre = f"{branch}.b{i}.{direction}"
                plan.append((f"{pre}.wx", (d, gates * u), "param"))
                plan.append((f"{pre}.wh", (u, gates * u), "param"))
                plan.append((f"{pre}.b", (gates * u,), "param"))
    cin = spec.rnn_out
    for l in range(1, spec.conv_blocks + 1):
        plan.append((f"conv{l}.w", (spec.filters, cin, spec.kernel_width), "param"))
        plan.append((f"conv{l}.gamma", (spec.filters,), "param"))
        plan.append((f"conv{l}.beta", (spec.filters,), "param"))
        plan.append((f"conv{l}.running_mean", (spec.filters,), "buffer"))
        plan.append((f"conv{l}.running_var", (spec.filters,), "buffer"))
        cin = spec.filters
    plan.append(("routing.w", (spec.target_convs, spec.filters, spec.attention_dim), "param"))
    plan.append(("attention.q", (spec.attention_dim,), "param"))
    plan.append(("head.w", (spec.attention_dim, spec.classes), "param"))
    plan.append(("head.b", (spec.classes,), "param"))
    return plan
