"""Sampled data containers shared by the simulator, the analysis and file I/O."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TransmissionTrace:
    """Normalized cavity transmission on a uniform time grid."""

    time: np.ndarray
    transmission: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        self.transmission = np.asarray(self.transmission, dtype=float)
        if self.time.shape != self.transmission.shape or self.time.ndim != 1:
            raise ValueError("time and transmission must be 1-D arrays of equal length")
        if not np.all(np.isfinite(self.transmission)):
            raise ValueError("transmission values must be finite")
        if len(self.time) > 2:
            dt = np.diff(self.time)
            if np.any(dt <= 0) or np.ptp(dt) > 1e-6 * np.mean(dt):
                raise ValueError("time grid must be uniform and increasing")

    def __len__(self):
        return len(self.time)

    @property
    def sample_rate(self) -> float:
        return 1.0 / (self.time[1] - self.time[0])

    def segment(self, t_start: float, t_end: float) -> TransmissionTrace:
        keep = (self.time >= t_start) & (self.time <= t_end)
        return TransmissionTrace(self.time[keep], self.transmission[keep], dict(self.metadata))


@dataclass
class FrequencyScan:
    """Transmission vs. a linear but uncalibrated scan coordinate.

    ``sideband_spacing`` [Hz] is the modulation frequency that puts two
    sidebands symmetrically around the carrier.
    """

    coordinate: np.ndarray
    transmission: np.ndarray
    sideband_spacing: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coordinate = np.asarray(self.coordinate, dtype=float)
        self.transmission = np.asarray(self.transmission, dtype=float)
        if self.coordinate.shape != self.transmission.shape or self.coordinate.ndim != 1:
            raise ValueError("coordinate and transmission must be 1-D arrays of equal length")
        if not self.sideband_spacing > 0:
            raise ValueError("sideband_spacing must be > 0")
