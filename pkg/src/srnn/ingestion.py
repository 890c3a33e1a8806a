"""ECG waveform and annotation files, plus a synthetic ECG generator.

ECG CSV grammar (PhysioBank ATM export style), one sample per line::

    time_or_index,value_mV[,ignored_channel...]

An optional first header line whose second field is not numeric is skipped.
Annotation grammar, one range per line, ``end`` inclusive::

    start,end,label        # label is "normal" or "abnormal"

Both accept LF or CRLF line endings.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .anomaly import ABNORMAL, NORMAL

LABELS = (NORMAL, ABNORMAL)


class ParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class EcgSeries:
    values: np.ndarray  # mV
    sample_rate: float = 128.0
    record_id: str = ""

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError("sample rate must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("ECG values must be finite")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class AnnotationSet:
    ranges: tuple[tuple[int, int, str], ...]

    def __iter__(self):
        return iter(self.ranges)

    def __len__(self) -> int:
        return len(self.ranges)


def _lines(text):
    if not isinstance(text, str):
        text = text.read()
    return text.replace("\r\n", "\n").split("\n")


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def parse_ecg_csv(text, sample_rate: float = 128.0, record_id: str = "") -> EcgSeries:
    values = []
    for lineno, line in enumerate(_lines(text), start=1):
        if not line.strip():
            continue
        parts = [p.strip().strip("'\"") for p in line.split(",")]
        if lineno == 1 and len(parts) >= 2 and not _is_float(parts[1]):
            continue  # header
        if len(parts) < 2:
            raise ParseError(lineno, f"expected 'time,value', got {line!r}")
        if not _is_float(parts[0]) or not _is_float(parts[1]):
            raise ParseError(lineno, f"non-numeric field in {line!r}")
        v = float(parts[1])
        if not math.isfinite(v):
            raise ParseError(lineno, f"non-finite value {parts[1]!r}")
        values.append(v)
    if not values:
        raise ValueError("no ECG samples found")
    return EcgSeries(np.array(values), sample_rate, record_id)


def write_ecg_csv(series: EcgSeries) -> str:
    out = io.StringIO()
    for i, v in enumerate(series.values.tolist()):
        out.write(f"{i},{v!r}\n")
    return out.getvalue()


def parse_annotations(text, length: int) -> AnnotationSet:
    ranges = []
    for lineno, line in enumerate(_lines(text), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise ParseError(lineno, f"expected 'start,end,label', got {line!r}")
        try:
            start, end = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(lineno, f"non-integer index in {line!r}") from None
        label = parts[2]
        if label not in LABELS:
            raise ParseError(lineno, f"unknown label {label!r}")
        if start > end:
            raise ParseError(lineno, f"start {start} after end {end}")
        if start < 0 or end >= length:
            raise ParseError(lineno, f"range {start}..{end} outside series of length {length}")
        ranges.append((start, end, label, lineno))
    ranges.sort()
    for a, b in zip(ranges, ranges[1:]):
        if b[0] <= a[1]:
            raise ParseError(b[3], f"range {b[0]}..{b[1]} overlaps line {a[3]}")
    return AnnotationSet(tuple((s, e, lab) for s, e, lab, _ in ranges))


def write_annotations(ann: AnnotationSet) -> str:
    return "".join(f"{s},{e},{lab}\n" for s, e, lab in ann)


# --- synthetic ECG --------------------------------------------------------

# (amplitude mV, centre s, width s) for P, QRS and T
NORMAL_BEAT = ((0.15, 0.16, 0.025), (1.0, 0.32, 0.02), (0.3, 0.56, 0.045))
# inverted, widened QRS
ABNORMAL_QRS = (-1.3, 0.32, 0.05)


def beat_template(samples_per_beat: int, sample_rate: float, baseline: float,
                  waves) -> np.ndarray:
    t = np.arange(samples_per_beat) / sample_rate
    x = np.full(samples_per_beat, baseline)
    for amp, centre, width in waves:
        x += amp * np.exp(-0.5 * ((t - centre) / width) ** 2)
    return x


def make_synthetic_ecg(n_beats: int, anomalies=(), seed: int = 0, *,
                       sample_rate: float = 128.0, samples_per_beat: int = 96,
                       baseline: float = -0.5, noise: float = 0.0,
                       core_fraction: float = 0.25) -> tuple[EcgSeries, AnnotationSet]:
    """Periodic P-QRS-T beats; beats listed in ``anomalies`` get an inverted, wide QRS.

    Samples of an abnormal beat whose deviation from the normal template is at
    least ``core_fraction`` of the largest deviation are labelled abnormal;
    everything else is labelled normal.  ``noise`` adds seeded Gaussian noise
    (mV) and breaks exact periodicity.
    """
    if n_beats < 2:
        raise ValueError("need at least two beats")
    anomalies = sorted(set(anomalies))
    for a in anomalies:
        if not 0 <= a < n_beats:
            raise ValueError(f"anomaly position {a} outside 0..{n_beats - 1}")
    normal = beat_template(samples_per_beat, sample_rate, baseline, NORMAL_BEAT)
    waves = (NORMAL_BEAT[0], ABNORMAL_QRS, NORMAL_BEAT[2])
    abnormal = beat_template(samples_per_beat, sample_rate, baseline, waves)
    dev = np.abs(abnormal - normal)
    core = np.flatnonzero(dev >= core_fraction * dev.max())
    c0, c1 = int(core.min()), int(core.max())

    x = np.tile(normal, n_beats)
    abnormal_ranges = []
    for a in anomalies:
        s = a * samples_per_beat
        x[s:s + samples_per_beat] = abnormal
        abnormal_ranges.append((s + c0, s + c1))
    if noise > 0:
        x = x + np.random.default_rng(seed).normal(0.0, noise, size=len(x))

    ranges = []
    pos = 0
    for s, e in abnormal_ranges:
        if s > pos:
            ranges.append((pos, s - 1, NORMAL))
        ranges.append((s, e, ABNORMAL))
        pos = e + 1
    if pos < len(x):
        ranges.append((pos, len(x) - 1, NORMAL))
    return EcgSeries(x, sample_rate, f"synthetic-{seed}"), AnnotationSet(tuple(ranges))
