"""Message-passing GNN that maps interference graphs to beamformers.

Each vertex carries a state [c_n ; hidden_n]: c_n holds the Re/Im parts
of its own desired channel (constant across rounds), hidden_n is a
learned representation of the same length. Per round, every vertex
max-aggregates MLP-transformed messages from its in-neighbors, feeds
[own state ; aggregate] through a second MLP, and squashes the result
with a sigmoid into the new hidden part. One MLP pair is shared across
all rounds. The readout maps hidden from (0,1) to (-1,1), reads the
halves as Re/Im of a complex vector, and radially projects onto the
power ball, so every output satisfies ||q_n||^2 <= p_max.

User weights and noise powers ride along on the graph for the
objective; they are not part of the MLP-visible state (the MLP input
widths 6*Nt and 64+4*Nt leave no room for them).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .autodiff import concat, gather_rows, maximum, scatter_max, sigmoid, sqrt, square, tsum, value
from .binio import ByteReader, FormatError
from .nn import DenseLinear, LowRankLinear, Mlp
from .scenario import Graph, merge_complex

MODEL_MAGIC = b"LRGM"
MODEL_VERSION = 1

MSG_DIM = 64
MLP2_HIDDEN = 512

_KINDS = ("dense", "low_rank")


class ModelFormatError(FormatError):
    """Raised when a model file is malformed (magic, version, truncation)."""


def mlp_dims(n_tx_antennas: int) -> tuple[list, list]:
    """(MLP1 dims, MLP2 dims) as functions of the antenna count."""
    nt = n_tx_antennas
    return [6 * nt, MSG_DIM, MSG_DIM], [MSG_DIM + 4 * nt, MLP2_HIDDEN, 2 * nt]


@dataclass(frozen=True)
class MpgnnArch:
    """Architecture: antenna count, layer kind, factorization ranks.

    MLP1 (messages) has dims [6*Nt, 64, 64]; MLP2 (vertex update)
    [64+4*Nt, 512, 2*Nt]. For low-rank models, rank1 applies to both
    MLP1 layers and rank2 to both MLP2 layers; trainable ranks are
    capped at the layer widths (rank1 <= 64, rank2 <= min(64+4*Nt, 512)).
    """

    n_tx_antennas: int
    kind: str = "dense"
    rank1: int | None = None
    rank2: int | None = None
    n_rounds: int = 3
    p_max: float = 1.0

    def __post_init__(self):
        if self.n_tx_antennas < 1:
            raise ValueError(f"n_tx_antennas must be >= 1, got {self.n_tx_antennas}")
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}")
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        if self.p_max <= 0.0:
            raise ValueError("p_max must be positive")
        if self.kind == "dense":
            if self.rank1 is not None or self.rank2 is not None:
                raise ValueError("dense architectures take no ranks")
        else:
            if self.rank1 is None or self.rank2 is None:
                raise ValueError("low-rank architectures need rank1 and rank2")
            if self.rank1 < 1 or self.rank2 < 1:
                raise ValueError("ranks must be >= 1")
            if self.rank1 > MSG_DIM:
                raise ValueError(f"rank1 must be <= {MSG_DIM}, got {self.rank1}")
            cap2 = min(64 + 4 * self.n_tx_antennas, MLP2_HIDDEN)
            if self.rank2 > cap2:
                raise ValueError(f"rank2 must be <= {cap2} at Nt={self.n_tx_antennas}, got {self.rank2}")

    @property
    def mlp1_dims(self) -> list:
        return mlp_dims(self.n_tx_antennas)[0]

    @property
    def mlp2_dims(self) -> list:
        return mlp_dims(self.n_tx_antennas)[1]


@dataclass
class MpgnnParams:
    """The shared MLP pair. MLP1 ends in ReLU so messages are >= 0 and
    an all-zero vector is a neutral element for max-aggregation over an
    empty neighborhood; MLP2's output is squashed later by the state
    update."""

    mlp1: Mlp
    mlp2: Mlp

    def flat(self) -> list:
        return self.mlp1.params() + self.mlp2.params()

    @property
    def kind(self) -> str:
        return self.mlp1.layers[0].kind


def init_params(arch: MpgnnArch, seed: int) -> MpgnnParams:
    """Fan-based uniform init, deterministic in the seed.

    Draw order: MLP1 layer 1, MLP1 layer 2, MLP2 layer 1, MLP2 layer 2;
    low-rank layers draw U then V. Biases are zeros (no draws).
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    if arch.kind == "dense":
        mlp1 = Mlp.dense(rng, arch.mlp1_dims, output_activation="relu")
        mlp2 = Mlp.dense(rng, arch.mlp2_dims, output_activation=None)
    else:
        mlp1 = Mlp.low_rank(rng, arch.mlp1_dims, [arch.rank1] * 2, output_activation="relu")
        mlp2 = Mlp.low_rank(rng, arch.mlp2_dims, [arch.rank2] * 2, output_activation=None)
    return MpgnnParams(mlp1, mlp2)


def rebuild_params(arch: MpgnnArch, arrays: list) -> MpgnnParams:
    """Assemble MpgnnParams around existing arrays (ndarrays or autodiff
    tensors), in the flat() order."""
    it = iter(arrays)

    def layer():
        if arch.kind == "dense":
            return DenseLinear(next(it), next(it))
        return LowRankLinear(next(it), next(it), next(it))

    mlp1 = Mlp([layer(), layer()], output_activation="relu")
    mlp2 = Mlp([layer(), layer()], output_activation=None)
    leftovers = sum(1 for _ in it)
    if leftovers:
        raise ValueError(f"{leftovers} unused parameter arrays")
    return MpgnnParams(mlp1, mlp2)


class ParamCounts(NamedTuple):
    mlp1: int
    mlp2: int
    total: int


def _zero_layers(arch: MpgnnArch) -> MpgnnParams:
    def mk(dims, rank):
        layers = []
        for d_in, d_out in zip(dims, dims[1:]):
            if arch.kind == "dense":
                layers.append(DenseLinear(np.zeros((d_out, d_in)), np.zeros(d_out)))
            else:
                layers.append(LowRankLinear(np.zeros((d_in, rank)), np.zeros((rank, d_out)), np.zeros(d_out)))
        return Mlp(layers)

    return MpgnnParams(mk(arch.mlp1_dims, arch.rank1), mk(arch.mlp2_dims, arch.rank2))


def count_model_params(arch: MpgnnArch, include_bias: bool = True) -> ParamCounts:
    """Parameter counts per MLP and total (MLPs shared across rounds,
    counted once)."""
    p = _zero_layers(arch)
    c1 = p.mlp1.param_count(include_bias)
    c2 = p.mlp2.param_count(include_bias)
    return ParamCounts(c1, c2, c1 + c2)


def layer_step(states: tuple, graph: Graph, params: MpgnnParams) -> tuple:
    """One message-passing round.

    states is (fixed, hidden). For each vertex n: messages
    MLP1([x_j ; e_jn]) over in-neighbors j, elementwise-max aggregated
    (zero vector if there are none), then hidden_n := sigmoid(
    MLP2([x_n ; aggregate])). The fixed half passes through unchanged.
    """
    fixed, hidden = states
    n = graph.n_vertices
    msg_dim = params.mlp1.layers[-1].d_out
    if graph.edges.shape[0]:
        src = graph.edges[:, 0]
        dst = graph.edges[:, 1]
        inputs = concat([gather_rows(fixed, src), gather_rows(hidden, src), graph.edge_features])
        agg = scatter_max(params.mlp1(inputs), dst, n)
    else:
        agg = np.zeros((n, msg_dim))
    y = params.mlp2(concat([fixed, hidden, agg]))
    return fixed, sigmoid(y)


def forward_real(graph: Graph, params: MpgnnParams, arch: MpgnnArch):
    """Run all rounds and the power projection; beamformers as stacked
    [Re | Im] rows. Returns an autodiff tensor when params hold tensors,
    a plain ndarray otherwise (identical values either way)."""
    nt = arch.n_tx_antennas
    if graph.n_tx_antennas != nt:
        raise ValueError(f"graph carries Nt={graph.n_tx_antennas}, model expects {nt}")
    fixed = graph.vertex_features[:, : 2 * nt]
    states = (fixed, np.zeros((graph.n_vertices, 2 * nt)))
    for _ in range(arch.n_rounds):
        states = layer_step(states, graph, params)
    v = 2.0 * states[1] - 1.0
    root_p = float(np.sqrt(arch.p_max))
    norm = sqrt(tsum(square(v), axis=1, keepdims=True))
    # Radial projection: scale by min(1, sqrt(p_max)/||v||), written
    # division-safe so an all-zero row stays zero with finite gradients.
    return v * (root_p / maximum(norm, root_p))


def forward(graph: Graph, params: MpgnnParams, arch: MpgnnArch) -> np.ndarray:
    """Beamforming matrix, complex (N, Nt); rows obey ||q_n||^2 <= p_max."""
    return merge_complex(value(forward_real(graph, params, arch)))


# ---------------------------------------------------------------------------
# Model files: little-endian, magic "LRGM". Header: version u32, flags u32
# (bit0 set for low-rank), Nt u32, rank1 u32, rank2 u32 (0 when dense). Then
# the four layers in flat() order, each as d_in u32, d_out u32, r u32 (0 when
# dense) followed by f32 arrays: dense W row-major then b; low-rank U, V, b.
# The power budget and round count are not stored; loads use the defaults.
# ---------------------------------------------------------------------------


def save_model(path, arch: MpgnnArch, params: MpgnnParams) -> None:
    low_rank = arch.kind == "low_rank"
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(
            struct.pack(
                "<IIIII",
                MODEL_VERSION,
                1 if low_rank else 0,
                arch.n_tx_antennas,
                arch.rank1 if low_rank else 0,
                arch.rank2 if low_rank else 0,
            )
        )
        for layer in params.mlp1.layers + params.mlp2.layers:
            rank = layer.rank if low_rank else 0
            f.write(struct.pack("<III", layer.d_in, layer.d_out, rank))
            for a in layer.params():
                f.write(value(a).astype("<f4").tobytes())


def load_model(path) -> tuple[MpgnnArch, MpgnnParams]:
    with open(path, "rb") as f:
        buf = f.read()
    r = ByteReader(buf, path, ModelFormatError)
    magic = r.take(4, "magic")
    if magic != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: bad magic {magic!r}, expected {MODEL_MAGIC!r}")
    version = r.u32("version")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported version {version}")
    flags = r.u32("flags")
    nt = r.u32("antenna count")
    a1 = r.u32("rank1")
    a2 = r.u32("rank2")
    low_rank = bool(flags & 1)
    try:
        arch = MpgnnArch(
            n_tx_antennas=nt,
            kind="low_rank" if low_rank else "dense",
            rank1=a1 if low_rank else None,
            rank2=a2 if low_rank else None,
        )
    except ValueError as e:
        raise ModelFormatError(f"{path}: invalid architecture header: {e}") from e

    dims = list(zip(arch.mlp1_dims, arch.mlp1_dims[1:])) + list(zip(arch.mlp2_dims, arch.mlp2_dims[1:]))
    ranks = [arch.rank1, arch.rank1, arch.rank2, arch.rank2] if low_rank else [0, 0, 0, 0]
    arrays = []
    for k, ((d_in, d_out), rank) in enumerate(zip(dims, ranks)):
        got = struct.unpack("<III", r.take(12, f"layer {k} header"))
        if got != (d_in, d_out, rank):
            raise ModelFormatError(f"{path}: layer {k} header {got}, expected {(d_in, d_out, rank)}")
        if low_rank:
            arrays.append(r.f32(d_in * rank, f"layer {k} U").reshape(d_in, rank))
            arrays.append(r.f32(rank * d_out, f"layer {k} V").reshape(rank, d_out))
        else:
            arrays.append(r.f32(d_out * d_in, f"layer {k} W").reshape(d_out, d_in))
        arrays.append(r.f32(d_out, f"layer {k} bias"))
    r.done()
    return arch, rebuild_params(arch, arrays)
