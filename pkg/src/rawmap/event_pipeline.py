"""Raw samples -> quantized, fixed-point event sequences.

Pipeline order is quantize first, then fixed-point conversion, then
signal-to-event segmentation: bucketing the raw stream up front damps
sample-level noise before boundaries are picked, which is what makes the
narrow 16-bit representation viable for everything downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signal_model import PoreModel, RawSignal, Sequence

Z_CLAMP = 4.0  # normalized samples are clamped to [-4, +4] before bucketing
MIN_EVENT_LEN = 3


class EventPipelineError(Exception):
    pass


@dataclass(frozen=True)
class FixedPointFormat:
    total_bits: int = 16
    fractional_bits: int = 8

    def __post_init__(self):
        if self.total_bits != 16:
            raise EventPipelineError("only 16-bit formats are supported")
        if not (0 <= self.fractional_bits <= 15):
            raise EventPipelineError("fractional_bits must be in [0, 15]")

    @property
    def resolution(self) -> float:
        return 2.0 ** -self.fractional_bits

    @property
    def max_value(self) -> float:
        return 32767 * self.resolution

    @property
    def min_value(self) -> float:
        return -32768 * self.resolution


def to_fixed(x: float, fmt: FixedPointFormat, saturate: bool = True) -> int:
    """Round-to-nearest-even encoding of x as a signed 16-bit code."""
    scaled = x * (1 << fmt.fractional_bits)
    code = int(np.rint(scaled))
    if code > 32767 or code < -32768:
        if not saturate:
            raise EventPipelineError(f"fixed-point overflow: {x}")
        code = 32767 if code > 0 else -32768
    return code


def from_fixed(code: int, fmt: FixedPointFormat) -> float:
    return code * fmt.resolution


@dataclass(frozen=True)
class QuantizationParams:
    bucket_bits: int
    shift: float  # per-read normalization offset (pA)
    scale: float  # per-read normalization divisor (pA)

    def __post_init__(self):
        if not (2 <= self.bucket_bits <= 10):
            raise EventPipelineError("bucket_bits must be in [2, 10]")
        if self.scale <= 0.0:
            raise EventPipelineError("scale must be positive")

    @property
    def n_buckets(self) -> int:
        return 1 << self.bucket_bits

    @property
    def bucket_width(self) -> float:
        return 2.0 * Z_CLAMP / self.n_buckets

    def bucket_of_z(self, z):
        """Bucket index of a clamped z-score; vectorized."""
        z = np.clip(z, -Z_CLAMP, Z_CLAMP)
        idx = np.floor((z + Z_CLAMP) / self.bucket_width).astype(np.int64)
        return np.clip(idx, 0, self.n_buckets - 1)

    def center_of_bucket(self, idx):
        return -Z_CLAMP + (np.asarray(idx) + 0.5) * self.bucket_width


@dataclass
class Event:
    start_index: int
    length: int
    mean_code: int      # 16-bit fixed-point mean (z units)
    bucket: int         # quantization level of the mean

    def __post_init__(self):
        if self.length < 1:
            raise EventPipelineError("event length must be >= 1")


@dataclass
class EventSequence:
    read_id: str
    events: list[Event]
    params: QuantizationParams
    format: FixedPointFormat

    def __len__(self) -> int:
        return len(self.events)

    def bucket_codes(self) -> np.ndarray:
        return np.array([e.bucket for e in self.events], dtype=np.int64)

    def to_debug_tsv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("index\tstart\tlength\tmean_code\tbucket\n")
            for i, e in enumerate(self.events):
                fh.write(f"{i}\t{e.start_index}\t{e.length}\t{e.mean_code}\t{e.bucket}\n")


# ---------------------------------------------------------------------------
# Normalization and quantization
# ---------------------------------------------------------------------------

def normalize_and_quantize(raw: RawSignal, bucket_bits: int = 5
                           ) -> tuple[np.ndarray, QuantizationParams]:
    """Median/MAD-normalize the samples and bucket them uniformly.

    Returns the per-sample level indices and the parameters used, so the
    same transform can be inverted (bucket centers) downstream.
    """
    x = raw.samples
    if x.size < 32:
        raise EventPipelineError(
            f"read {raw.read_id!r}: signal too short ({x.size} < 32)")
    shift = float(np.median(x))
    mad = float(np.median(np.abs(x - shift)))
    scale = 1.4826 * mad
    if scale == 0.0:
        scale = float(np.std(x))
    if scale == 0.0:
        raise EventPipelineError(f"read {raw.read_id!r}: zero dispersion")
    params = QuantizationParams(bucket_bits=bucket_bits, shift=shift, scale=scale)
    codes = params.bucket_of_z((x - shift) / scale)
    return codes, params


# ---------------------------------------------------------------------------
# Event detection (Welch t-statistic segmentation)
# ---------------------------------------------------------------------------

def _welch_t(z: np.ndarray, window: int) -> np.ndarray:
    """Two-sided Welch t between adjacent windows; t[i] compares
    z[i-window:i] against z[i:i+window].  Positions without a full window
    on both sides get t = 0."""
    n = z.size
    t = np.zeros(n)
    c1 = np.concatenate([[0.0], np.cumsum(z)])
    c2 = np.concatenate([[0.0], np.cumsum(z * z)])
    idx = np.arange(window, n - window + 1)
    sum_l = c1[idx] - c1[idx - window]
    sum_r = c1[idx + window] - c1[idx]
    sq_l = c2[idx] - c2[idx - window]
    sq_r = c2[idx + window] - c2[idx]
    m_l = sum_l / window
    m_r = sum_r / window
    var_l = np.maximum(sq_l / window - m_l * m_l, 0.0)
    var_r = np.maximum(sq_r / window - m_r * m_r, 0.0)
    se = np.sqrt((var_l + var_r) / window) + 1e-12
    t[idx] = np.abs(m_l - m_r) / se
    return t


def detect_events(codes: np.ndarray, params: QuantizationParams,
                  fmt: FixedPointFormat, window: int = 4,
                  threshold_t: float = 2.5, min_event_len: int = MIN_EVENT_LEN,
                  arithmetic: str = "fixed") -> list[Event]:
    """Segment a quantized stream at local maxima of the Welch t-statistic.

    Events partition the stream; minimum event length is 3 samples.  Each
    event's mean_code is the fixed-point mean of its samples' bucket
    centers (kept floating in 'float' mode for A/B accuracy runs).
    """
    if window < 3:
        raise EventPipelineError("window must be >= 3")
    n = codes.size
    if n < 2 * window:
        raise EventPipelineError(f"stream too short: {n} < {2 * window}")
    z = params.center_of_bucket(codes)
    t = _welch_t(z, window)
    above = t > threshold_t
    local_max = np.zeros(n, dtype=bool)
    local_max[1:-1] = (t[1:-1] >= t[:-2]) & (t[1:-1] > t[2:])
    candidates = np.flatnonzero(above & local_max)

    boundaries = [0]
    for b in candidates:
        if b - boundaries[-1] >= min_event_len and n - b >= min_event_len:
            boundaries.append(int(b))
    boundaries.append(n)

    events: list[Event] = []
    for lo, hi in zip(boundaries[:-1], boundaries[1:]):
        mu = float(np.mean(z[lo:hi]))
        if arithmetic == "fixed":
            code = to_fixed(mu, fmt)
            mu_q = from_fixed(code, fmt)
        else:
            code = to_fixed(mu, fmt)  # code still recorded for serialization
            mu_q = mu
        bucket = int(params.bucket_of_z(mu_q))
        events.append(Event(start_index=lo, length=hi - lo,
                            mean_code=code, bucket=bucket))
    return events


def signal_to_events(raw: RawSignal, bucket_bits: int = 5,
                     fmt: FixedPointFormat | None = None, window: int = 4,
                     threshold_t: float = 2.5,
                     arithmetic: str = "fixed") -> EventSequence:
    """Full read-side pipeline: quantize, then detect events."""
    fmt = fmt or FixedPointFormat()
    codes, params = normalize_and_quantize(raw, bucket_bits)
    events = detect_events(codes, params, fmt, window=window,
                           threshold_t=threshold_t, arithmetic=arithmetic)
    return EventSequence(raw.read_id, events, params, fmt)


# ---------------------------------------------------------------------------
# Reference-side conversion
# ---------------------------------------------------------------------------

def model_quantization_params(model: PoreModel, bucket_bits: int = 5
                              ) -> QuantizationParams:
    """Bucketing transform for the reference, using the pore model's global
    level statistics (median / 1.4826*MAD, matching the read-side
    estimator so read and reference codes are comparable)."""
    levels = model.level_array()
    shift = float(np.median(levels))
    mad = float(np.median(np.abs(levels - shift)))
    scale = 1.4826 * mad
    if scale == 0.0:
        scale = float(np.std(levels))
    if scale == 0.0:
        raise EventPipelineError("degenerate pore model: all levels equal")
    return QuantizationParams(bucket_bits=bucket_bits, shift=shift, scale=scale)


def reference_to_events(seq: Sequence, model: PoreModel,
                        params: QuantizationParams,
                        fmt: FixedPointFormat | None = None) -> EventSequence:
    """One event per reference k-mer, quantized under the given transform."""
    fmt = fmt or FixedPointFormat()
    if len(seq) < model.k:
        raise EventPipelineError(
            f"sequence {seq.id!r} shorter than k={model.k}")
    k = model.k
    means = np.array([model.mean_of(seq.bases[i:i + k])
                      for i in range(len(seq) - k + 1)])
    z = (means - params.shift) / params.scale
    buckets = params.bucket_of_z(z)
    centers = params.center_of_bucket(buckets)
    events = [Event(start_index=i, length=1,
                    mean_code=to_fixed(float(c), fmt), bucket=int(b))
              for i, (b, c) in enumerate(zip(buckets, centers))]
    return EventSequence(seq.id, events, params, fmt)
