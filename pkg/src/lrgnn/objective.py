"""SINR, rates, the unsupervised training objective, and baselines.

Interference is summed over the directed edges of the interference
graph; pairs outside the distance threshold contribute nothing. Pass
full_interference=True to sum over every off-diagonal pair instead.

Two routes compute the same quantities on purpose. The complex-valued
functions (rate_report, sinr, weighted_sum_rate) serve inference and
analysis. The stacked-real functions (wsr_from_real, loss) accept
autodiff tensors and carry gradients end-to-end for training. rate is
log2(1+SINR) evaluated as log1p/ln(2) in both; the routes agree to
floating-point rounding and are cross-checked in the tests.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .autodiff import gather_rows, log1p, maximum, scatter_sum, square, tsum
from .scenario import Scenario, split_complex

LN2 = float(np.log(2.0))

# Keeps synthetic zero-noise instances from dividing by zero; any valid
# configuration has noise powers far above this.
DENOM_FLOOR = 1e-30


class RateReport(NamedTuple):
    sinr: np.ndarray  # (N,) linear
    rate: np.ndarray  # (N,) bits
    weighted_sum_rate: float
    interference: np.ndarray  # (N,) linear power


def _resolve_pairs(s: Scenario, edges, full_interference: bool) -> np.ndarray:
    if full_interference:
        n = s.n_pairs
        src, dst = np.nonzero(~np.eye(n, dtype=bool))
        return np.stack([src, dst], axis=1)
    if edges is None:
        raise ValueError("edges are required unless full_interference=True")
    return np.asarray(edges, dtype=np.intp).reshape(-1, 2)


def _check(s: Scenario, q: np.ndarray) -> None:
    if q.shape != (s.n_pairs, s.n_tx_antennas):
        raise ValueError(f"beamformer shape {q.shape}, expected {(s.n_pairs, s.n_tx_antennas)}")
    if np.any(s.noise_powers <= 0.0):
        raise ValueError("noise powers must be positive")


def rate_report(s: Scenario, q: np.ndarray, edges=None, *, full_interference: bool = False) -> RateReport:
    """Per-user SINR, rate, interference, and the weighted sum rate.

    SINR_n = |h_nn^H q_n|^2 / (sum over edges (i, n) of |h_in^H q_i|^2
    + sigma2_n).
    """
    q = np.asarray(q)
    _check(s, q)
    n = s.n_pairs
    diag = s.channels[np.arange(n), np.arange(n), :]
    sig = np.abs(np.sum(np.conj(diag) * q, axis=1)) ** 2
    interf = np.zeros(n)
    pairs = _resolve_pairs(s, edges, full_interference)
    if pairs.shape[0]:
        h_e = s.channels[pairs[:, 0], pairs[:, 1], :]
        p_e = np.abs(np.sum(np.conj(h_e) * q[pairs[:, 0]], axis=1)) ** 2
        np.add.at(interf, pairs[:, 1], p_e)
    snr = sig / np.maximum(interf + s.noise_powers, DENOM_FLOOR)
    rate = np.log1p(snr) / LN2
    return RateReport(snr, rate, float(np.sum(s.weights * rate)), interf)


def sinr(s: Scenario, q: np.ndarray, edges=None, *, full_interference: bool = False) -> np.ndarray:
    return rate_report(s, q, edges, full_interference=full_interference).sinr


def weighted_sum_rate(s: Scenario, q: np.ndarray, edges=None, *, full_interference: bool = False) -> float:
    return rate_report(s, q, edges, full_interference=full_interference).weighted_sum_rate


def _rot_half(x: np.ndarray) -> np.ndarray:
    # [Re | Im] -> [-Im | Re]; dotting the result with a stacked-real
    # vector yields the imaginary part of the complex inner product.
    nt = x.shape[-1] // 2
    return np.concatenate([-x[..., nt:], x[..., :nt]], axis=-1)


def wsr_from_real(s: Scenario, q_real, edges=None, *, full_interference: bool = False):
    """Weighted sum rate with beamformers as stacked [Re | Im] rows.

    q_real may be an autodiff tensor (gradients flow through SINR and
    the rate) or a plain (N, 2*Nt) array; channel data enter as
    constants.
    """
    n = s.n_pairs
    if np.any(s.noise_powers <= 0.0):
        raise ValueError("noise powers must be positive")
    diag = split_complex(s.channels[np.arange(n), np.arange(n), :])
    sig = square(tsum(diag * q_real, axis=1)) + square(tsum(_rot_half(diag) * q_real, axis=1))
    pairs = _resolve_pairs(s, edges, full_interference)
    if pairs.shape[0]:
        h_e = split_complex(s.channels[pairs[:, 0], pairs[:, 1], :])
        q_src = gather_rows(q_real, pairs[:, 0])
        p_e = square(tsum(h_e * q_src, axis=1)) + square(tsum(_rot_half(h_e) * q_src, axis=1))
        interf = scatter_sum(p_e, pairs[:, 1], n)
    else:
        interf = np.zeros(n)
    snr = sig / maximum(interf + s.noise_powers, DENOM_FLOOR)
    return tsum(s.weights * (log1p(snr) / LN2))


def loss(samples, qs_real, *, full_interference: bool = False):
    """Negative mean weighted sum rate over a batch.

    samples are (Scenario, Graph) pairs; qs_real are the matching
    stacked-real beamformers (tensors during training).
    """
    if not samples:
        raise ValueError("empty batch")
    if len(samples) != len(qs_real):
        raise ValueError(f"{len(samples)} samples but {len(qs_real)} beamformers")
    total = None
    for (scenario, graph), q in zip(samples, qs_real):
        w = wsr_from_real(scenario, q, graph.edges, full_interference=full_interference)
        total = w if total is None else total + w
    return -(total / float(len(samples)))


def baseline_beamformers(s: Scenario, kind: str, seed: int = 0) -> np.ndarray:
    """Reference beamformers: matched filtering toward the own receiver
    ("mrt"), uniform on the power sphere ("random"), or all zeros."""
    n, nt = s.n_pairs, s.n_tx_antennas
    root_p = np.sqrt(s.p_max)
    if kind == "zero":
        return np.zeros((n, nt), dtype=np.complex128)
    if kind == "mrt":
        diag = s.channels[np.arange(n), np.arange(n), :]
        norms = np.linalg.norm(diag, axis=1, keepdims=True)
        return root_p * diag / np.where(norms > 0.0, norms, 1.0)
    if kind == "random":
        rg = np.random.Generator(np.random.PCG64(seed))
        g = rg.standard_normal((n, nt)) + 1j * rg.standard_normal((n, nt))
        return root_p * g / np.linalg.norm(g, axis=1, keepdims=True)
    raise ValueError(f"unknown baseline kind {kind!r}")
