"""Training and evaluation loops for the beamforming GNN.

Training minimizes the negative mean weighted sum rate with Adam over
seeded shuffled mini-batches. Per-sample gradients are computed on
independent tapes and folded in sample order (sum, then divide by the
batch size), so results are bit-reproducible for a given seed even when
samples are evaluated by a thread pool. The worker count is read from
the LRGNN_THREADS environment variable (default 1); deterministic=True
in the config pins it back to 1.
"""

from __future__ import annotations

import csv
import hashlib
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .mpgnn import MpgnnArch, MpgnnParams, forward, forward_real, init_params, rebuild_params, save_model
from .nn import Adam
from .objective import weighted_sum_rate, wsr_from_real

_SELECT_MODES = ("test", "train")


@dataclass(frozen=True)
class TrainConfig:
    arch: MpgnnArch
    lr: float = 0.001
    batch_size: int = 64
    epochs: int = 50
    seed: int = 0
    eval_every: int = 1
    select_on: str = "test"
    checkpoint_path: str | None = None
    deterministic: bool = False
    full_interference: bool = False

    def __post_init__(self):
        if self.lr < 0.0:
            raise ValueError("lr must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.select_on not in _SELECT_MODES:
            raise ValueError(f"select_on must be one of {_SELECT_MODES}")


@dataclass
class TrainReport:
    """Per-epoch training curves plus provenance for reproducibility.

    train_loss and test_sum_rate have one entry per epoch; between
    evaluation epochs the last computed test value is carried forward so
    the lengths always match. Epoch 0 is the untrained model; its test
    sum rate is kept separately and participates in checkpoint
    selection.
    """

    train_loss: list = field(default_factory=list)
    test_sum_rate: list = field(default_factory=list)
    initial_test_sum_rate: float = float("nan")
    best_epoch: int = 0
    wall_time_s: float = 0.0
    params_checksum: str = ""


def params_checksum(params: MpgnnParams) -> str:
    """SHA-256 over the parameter arrays as little-endian f32 bytes, in
    flat order. Matches what a saved model file stores."""
    h = hashlib.sha256()
    for a in params.flat():
        data = a.data if isinstance(a, Tensor) else a
        h.update(np.asarray(data).astype("<f4").tobytes())
    return h.hexdigest()


def _worker_count(deterministic: bool) -> int:
    if deterministic:
        return 1
    raw = os.environ.get("LRGNN_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"LRGNN_THREADS must be an integer, got {raw!r}") from None


def _snap_f32(arrays: list) -> list:
    return [a.astype(np.float32).astype(np.float64) for a in arrays]


def _sample_grad(arch: MpgnnArch, arrays: list, sample, full_interference: bool):
    """Loss and parameter gradients of one sample on a fresh tape."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    params = rebuild_params(arch, tensors)
    q = forward_real(sample.graph, params, arch)
    neg = -wsr_from_real(sample.scenario, q, sample.graph.edges, full_interference=full_interference)
    neg.backward()
    grads = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]
    return float(neg.data), grads


def evaluate(arch: MpgnnArch, params: MpgnnParams, samples, *, full_interference: bool = False) -> float:
    """Mean weighted sum rate over a dataset; never mutates params."""
    if not samples:
        raise ValueError("empty dataset")
    total = 0.0
    for scenario, graph in samples:
        q = forward(graph, params, arch)
        total += weighted_sum_rate(scenario, q, graph.edges, full_interference=full_interference)
    return total / len(samples)


def normalized_sum_rate(lr_model, dense_model, test_set, *, full_interference: bool = False) -> float:
    """evaluate(low-rank) / evaluate(dense) on the identical test set.

    Both models are (arch, params) pairs. The reference mean sum rate
    must be positive.
    """
    lr_arch, lr_params = lr_model
    dense_arch, dense_params = dense_model
    denom = evaluate(dense_arch, dense_params, test_set, full_interference=full_interference)
    if denom <= 0.0:
        raise ValueError(f"reference model has non-positive mean sum rate {denom}")
    return evaluate(lr_arch, lr_params, test_set, full_interference=full_interference) / denom


def train(train_set, cfg: TrainConfig, test_set=None):
    """Train from a fresh seeded init; returns (params, TrainReport).

    The returned parameters are the best checkpoint: highest test sum
    rate seen at evaluation epochs (including epoch 0, so the result is
    never worse than the untrained model), or lowest epoch train loss
    when select_on="train" or no test set is given. Values are rounded
    through f32 so an in-memory result and its saved file evaluate
    identically.
    """
    if not train_set:
        raise ValueError("empty training set")
    nt = train_set[0].scenario.n_tx_antennas
    if nt != cfg.arch.n_tx_antennas:
        raise ValueError(f"dataset carries Nt={nt}, arch expects {cfg.arch.n_tx_antennas}")

    t0 = time.perf_counter()
    select_on = cfg.select_on if test_set else "train"
    workers = _worker_count(cfg.deterministic)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    params = init_params(cfg.arch, cfg.seed)
    arrays = params.flat()
    adam = Adam(lr=cfg.lr)
    report = TrainReport()

    def test_metric():
        return evaluate(cfg.arch, rebuild_params(cfg.arch, arrays), test_set,
                        full_interference=cfg.full_interference)

    # Epoch 0 (untrained) is a checkpoint candidate.
    best_arrays = [a.copy() for a in arrays]
    best_epoch = 0
    if test_set:
        report.initial_test_sum_rate = test_metric()
    best_score = report.initial_test_sum_rate if select_on == "test" else float("-inf")
    last_test = report.initial_test_sum_rate

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for epoch in range(1, cfg.epochs + 1):
            order = rng.permutation(len(train_set))
            epoch_losses = []
            for bi in range(0, len(order), cfg.batch_size):
                batch = [train_set[i] for i in order[bi : bi + cfg.batch_size]]
                work = lambda s: _sample_grad(cfg.arch, arrays, s, cfg.full_interference)
                results = list(pool.map(work, batch)) if pool else [work(s) for s in batch]
                # Ordered fold: identical result for any worker count.
                totals = [np.zeros_like(a) for a in arrays]
                batch_loss = 0.0
                for loss_s, grads in results:
                    batch_loss += loss_s
                    for t, g in zip(totals, grads):
                        t += g
                batch_loss /= len(batch)
                if not np.isfinite(batch_loss):
                    raise FloatingPointError(
                        f"non-finite loss at epoch {epoch}, batch {bi // cfg.batch_size}"
                    )
                try:
                    adam.step(arrays, [t / len(batch) for t in totals])
                except FloatingPointError as err:
                    raise FloatingPointError(
                        f"epoch {epoch}, batch {bi // cfg.batch_size}: {err}"
                    ) from None
                epoch_losses.append(batch_loss)
            report.train_loss.append(float(np.mean(epoch_losses)))

            if select_on == "train":
                score = -report.train_loss[-1]
            if test_set and (epoch % cfg.eval_every == 0 or epoch == cfg.epochs):
                last_test = test_metric()
                if select_on == "test":
                    score = last_test
            elif select_on == "test":
                score = float("-inf")  # not evaluated this epoch, cannot win
            report.test_sum_rate.append(last_test)

            if score > best_score:
                best_score = score
                best_epoch = epoch
                best_arrays = [a.copy() for a in arrays]
    finally:
        if pool:
            pool.shutdown()

    final = rebuild_params(cfg.arch, _snap_f32(best_arrays))
    report.best_epoch = best_epoch
    report.wall_time_s = time.perf_counter() - t0
    report.params_checksum = params_checksum(final)
    if cfg.checkpoint_path:
        save_model(cfg.checkpoint_path, cfg.arch, final)
    return final, report


def write_train_report(report: TrainReport, path) -> None:
    """CSV with one row per epoch: epoch, loss, test_sum_rate."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "loss", "test_sum_rate"])
        for i, (l, r) in enumerate(zip(report.train_loss, report.test_sum_rate), start=1):
            w.writerow([i, repr(l), repr(r)])
