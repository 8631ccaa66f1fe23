"""Linear and decision-feedback detection for the selected streams.

The working constellation is unit-energy QPSK with Gray mapping: one bit
rides the in-phase rail and one the quadrature rail, so slicing decisions
are independent per rail.  A symbol-error view is also exposed since the
diversity behaviour is modulation generic.

Receiver identifiers: "zf", "mmse", "df-zf", "df-mmse".  Feedback modes:
"actual" (sliced symbols are cancelled) and "genie" (true symbols are
cancelled).  Ordering modes for decision feedback: "fixed", "vblast",
"qr-reverse".
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import as_channel_matrix, gram_inverse_diag, projection_height_sq, require_full_column_rank

RECEIVERS = ("zf", "mmse", "df-zf", "df-mmse")
FEEDBACK_MODES = ("actual", "genie")
ORDERING_MODES = ("fixed", "vblast", "qr-reverse")

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class LinkBudget:
    """Average SNR per receive antenna (linear) and the stream count.

    Each of the L streams is transmitted with amplitude sqrt(rho0 / L) so
    the per-receive-antenna SNR is rho0 against unit-variance noise.
    """

    rho0: float
    L: int

    def __post_init__(self):
        if self.rho0 <= 0:
            raise ValueError(f"rho0 must be positive, got {self.rho0}")
        if self.L < 1:
            raise ValueError(f"stream count must be positive, got {self.L}")

    @property
    def stream_scale(self) -> float:
        return math.sqrt(self.rho0 / self.L)


@dataclass(frozen=True)
class StreamSnrReport:
    """Post-processing SNR per selected stream, in linear scale."""

    snrs: tuple[float, ...]
    receiver: str
    decode_order: tuple[int, ...] | None = None


@dataclass(frozen=True)
class SymbolFrame:
    """Transmitted, received and detected symbol blocks of one frame."""

    transmitted: np.ndarray
    received: np.ndarray
    detected: np.ndarray


def qfunc(x) -> np.ndarray | float:
    """Gaussian tail probability Pr(N(0,1) > x)."""
    from scipy import special

    return 0.5 * special.erfc(np.asarray(x) / _SQRT2)


def qpsk_modulate(bits: np.ndarray) -> np.ndarray:
    """Map bit pairs (last axis of size 2) to unit-energy Gray QPSK points."""
    bits = np.asarray(bits)
    if bits.shape[-1] != 2:
        raise ValueError(f"expected trailing axis of 2 bits, got shape {bits.shape}")
    return ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1])) / _SQRT2


def qpsk_slice(z: np.ndarray) -> np.ndarray:
    """Nearest QPSK constellation point, elementwise."""
    z = np.asarray(z)
    return (np.where(z.real >= 0, 1.0, -1.0) + 1j * np.where(z.imag >= 0, 1.0, -1.0)) / _SQRT2


def qpsk_demodulate(symbols: np.ndarray) -> np.ndarray:
    """Inverse of :func:`qpsk_modulate`; appends an axis of 2 bits."""
    symbols = np.asarray(symbols)
    return np.stack([(symbols.real < 0), (symbols.imag < 0)], axis=-1).astype(np.int64)


def qpsk_bit_error_rate(snr) -> np.ndarray | float:
    """Exact AWGN bit error rate of Gray QPSK at per-symbol SNR ``snr``."""
    return qfunc(np.sqrt(np.asarray(snr, dtype=float)))


def qpsk_symbol_error_rate(snr) -> np.ndarray | float:
    """Exact AWGN symbol error rate of QPSK at per-symbol SNR ``snr``."""
    p = qfunc(np.sqrt(np.asarray(snr, dtype=float)))
    return 1.0 - (1.0 - p) ** 2


def _check_streams(H_s: np.ndarray, budget: LinkBudget) -> None:
    if H_s.shape[1] != budget.L:
        raise ValueError(f"budget declares {budget.L} streams but matrix has {H_s.shape[1]} columns")


def zf_post_snr(H_s, budget: LinkBudget) -> StreamSnrReport:
    """Post-processing SNR of each stream under the decorrelating equalizer.

    Computed through the projection-height route; equals
    (rho0 / L) / diag((H_s^H H_s)^-1) entrywise.
    """
    H_s = as_channel_matrix(H_s)
    _check_streams(H_s, budget)
    require_full_column_rank(H_s)
    scale = budget.rho0 / budget.L
    cols = tuple(range(H_s.shape[1]))
    snrs = tuple(
        scale * projection_height_sq(H_s, k, cols[:k] + cols[k + 1:]).height_sq for k in cols
    )
    return StreamSnrReport(snrs=snrs, receiver="zf")


def mmse_post_snr(H_s, budget: LinkBudget) -> StreamSnrReport:
    """Post-processing SNR of each stream under the linear MMSE equalizer.

    Never singular thanks to the regularized inverse; dominates the
    decorrelator per stream and coincides with it at high SNR.
    """
    H_s = as_channel_matrix(H_s)
    _check_streams(H_s, budget)
    gram = H_s.conj().T @ H_s
    a = np.linalg.inv(np.eye(budget.L) + (budget.rho0 / budget.L) * gram)
    snrs = tuple(max(0.0, float(1.0 / np.real(a[k, k]) - 1.0)) for k in range(budget.L))
    return StreamSnrReport(snrs=snrs, receiver="mmse")


def transmit(H_s, budget: LinkBudget, symbols: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Received block sqrt(rho0/L) * H_s @ symbols + noise."""
    H_s = as_channel_matrix(H_s)
    return budget.stream_scale * (H_s @ symbols) + noise


def simulate_frame(H_s, budget: LinkBudget, bits: np.ndarray, noise: np.ndarray,
                   receiver: str = "zf", decode_order: tuple[int, ...] | None = None,
                   feedback: str = "actual") -> SymbolFrame:
    """Carry one frame of QPSK bits over a channel realization and detect it."""
    if receiver not in RECEIVERS:
        raise ValueError(f"unknown receiver {receiver!r}; expected one of {RECEIVERS}")
    symbols = qpsk_modulate(bits)
    received = transmit(H_s, budget, symbols, noise)
    if receiver in ("zf", "mmse"):
        detected = detect_linear(H_s, received, budget, equalizer=receiver)
    else:
        order = decode_order if decode_order is not None else tuple(range(budget.L))
        detected = detect_df(
            H_s, received, budget, order,
            feedback=feedback,
            transmitted=symbols if feedback == "genie" else None,
            front_end="mmse" if receiver == "df-mmse" else "zf",
        )
    return SymbolFrame(transmitted=symbols, received=received, detected=detected)


def detect_linear(H_s, received: np.ndarray, budget: LinkBudget, equalizer: str = "zf") -> np.ndarray:
    """Equalize and slice each stream independently.

    Returns the L x T block of detected QPSK symbols.
    """
    H_s = as_channel_matrix(H_s)
    _check_streams(H_s, budget)
    received = np.asarray(received, dtype=np.complex128)
    if received.ndim != 2 or received.shape[0] != H_s.shape[0]:
        raise ValueError(f"received block shape {received.shape} does not match {H_s.shape[0]} receive rows")
    if equalizer == "zf":
        require_full_column_rank(H_s)
        est = np.linalg.pinv(H_s) @ received
    elif equalizer == "mmse":
        gram = H_s.conj().T @ H_s
        w = np.linalg.inv(gram + (budget.L / budget.rho0) * np.eye(budget.L)) @ H_s.conj().T
        est = w @ received
    else:
        raise ValueError(f"unknown equalizer {equalizer!r}")
    return qpsk_slice(est / budget.stream_scale)


def detect_df(
    H_s,
    received: np.ndarray,
    budget: LinkBudget,
    decode_order: tuple[int, ...],
    feedback: str = "actual",
    transmitted: np.ndarray | None = None,
    front_end: str = "zf",
) -> np.ndarray:
    """Successive nulling-and-cancellation detection.

    Each stage nulls the not-yet-decoded streams with the chosen front
    end, slices, and subtracts the sliced (feedback="actual") or true
    (feedback="genie") symbol contribution.  Genie mode needs the true
    ``transmitted`` block.
    """
    H_s = as_channel_matrix(H_s)
    _check_streams(H_s, budget)
    received = np.asarray(received, dtype=np.complex128)
    if received.ndim != 2 or received.shape[0] != H_s.shape[0]:
        raise ValueError(f"received block shape {received.shape} does not match {H_s.shape[0]} receive rows")
    order = tuple(int(i) for i in decode_order)
    if sorted(order) != list(range(budget.L)):
        raise ValueError(f"decode_order {decode_order} is not a permutation of 0..{budget.L - 1}")
    if feedback not in FEEDBACK_MODES:
        raise ValueError(f"unknown feedback mode {feedback!r}")
    if feedback == "genie":
        if transmitted is None:
            raise ValueError("genie feedback requires the transmitted block")
        transmitted = np.asarray(transmitted, dtype=np.complex128)
    if front_end not in ("zf", "mmse"):
        raise ValueError(f"unknown front end {front_end!r}")

    scale = budget.stream_scale
    y = received.copy()
    detected = np.empty((budget.L, received.shape[1]), dtype=np.complex128)
    for stage, k in enumerate(order):
        cols = (k,) + order[stage + 1:]
        sub = H_s[:, cols]
        if front_end == "zf":
            w = np.linalg.pinv(sub)[0]
        else:
            gram = sub.conj().T @ sub
            w = (np.linalg.inv(gram + (budget.L / budget.rho0) * np.eye(len(cols))) @ sub.conj().T)[0]
        sliced = qpsk_slice((w @ y) / scale)
        detected[k] = sliced
        fed_back = transmitted[k] if feedback == "genie" else sliced
        y = y - scale * np.outer(H_s[:, k], fed_back)
    return detected


def df_stage_snrs(H_s, budget: LinkBudget, decode_order: tuple[int, ...]) -> tuple[float, ...]:
    """Effective SNR of each decision-feedback stage under perfect feedback.

    Stage i sees (rho0 / L) times the squared projection height of its
    stream against the span of the streams decoded after it; reported in
    decode order.
    """
    H_s = as_channel_matrix(H_s)
    _check_streams(H_s, budget)
    order = tuple(int(i) for i in decode_order)
    if sorted(order) != list(range(budget.L)):
        raise ValueError(f"decode_order {decode_order} is not a permutation of 0..{budget.L - 1}")
    scale = budget.rho0 / budget.L
    return tuple(
        scale * projection_height_sq(H_s, k, order[stage + 1:]).height_sq
        for stage, k in enumerate(order)
    )


def vblast_order(H_s, budget: LinkBudget) -> tuple[int, ...]:
    """Greedy decode order: always pick the stream with the largest
    current post-nulling SNR among the not-yet-decoded ones."""
    H_s = as_channel_matrix(H_s)
    _check_streams(H_s, budget)
    require_full_column_rank(H_s)
    remaining = list(range(budget.L))
    order: list[int] = []
    while remaining:
        diag = gram_inverse_diag(H_s[:, remaining])
        best = int(np.argmin(diag))  # largest SNR = smallest inverse-Gram diagonal
        order.append(remaining.pop(best))
    return tuple(order)
