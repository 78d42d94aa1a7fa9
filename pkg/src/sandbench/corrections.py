"""Correction arbitration: nominal commands plus bounded operator deltas.

The final command is x = x_n + dx with dx limited per axis by a saturation
set and the sum clamped to a hard safety box. Operator input arrives either
as a single coupled axis (weighted across all variables) or as independent
per-axis values.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

AXES = ("feed_scale", "force", "pitch", "lateral_offset")


@dataclass(frozen=True)
class CommandVector:
    """The m=4 controlled variables: feed multiplier (dimensionless), applied
    force (N), tool pitch (rad), and lateral path offset (mm)."""

    feed_scale: float = 1.0
    force: float = 15.0
    pitch: float = 0.0
    lateral_offset: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.feed_scale, self.force, self.pitch, self.lateral_offset])

    @staticmethod
    def from_array(a) -> "CommandVector":
        return CommandVector(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass(frozen=True)
class SafetyBox:
    """Hard post-arbitration bounds; corrections can never push outside."""

    feed_scale: tuple[float, float] = (-1.0, 3.0)
    force: tuple[float, float] = (0.0, 50.0)
    pitch: tuple[float, float] = (-0.15, 0.15)
    lateral_offset: tuple[float, float] = (-30.0, 30.0)

    def bounds(self) -> np.ndarray:
        return np.array([self.feed_scale, self.force, self.pitch, self.lateral_offset])


@dataclass(frozen=True)
class SaturationSet:
    """Per-axis symmetric bounds on the operator correction delta."""

    feed_scale: float = 0.5     # dimensionless
    force: float = 10.0         # N
    pitch: float = 0.05         # rad
    lateral_offset: float = 10.0  # mm

    def __post_init__(self):
        if any(b < 0 for b in self.as_array()):
            raise ValueError("saturation bounds must be >= 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.feed_scale, self.force, self.pitch, self.lateral_offset])


# positive coupled input slows the feed and raises force and pitch, jointly
# raising abrasiveness through a single input axis
DEFAULT_COUPLING = (-0.5, 1.0, 0.5, 0.0)


def _clamp_unit(x: float) -> float:
    return min(1.0, max(-1.0, float(x)))


@dataclass(frozen=True)
class CorrectionInput:
    """One operator input sample. Exactly one of `coupled` / `axes` is set;
    an idle controller is Independent all-zeros. Components are clamped to
    [-1, 1] at ingest."""

    coupled: float | None = None
    axes: tuple[float, float, float, float] | None = None
    backtrack: bool = False

    def __post_init__(self):
        if (self.coupled is None) == (self.axes is None):
            raise ValueError("exactly one of coupled/axes must be given")
        if self.coupled is not None:
            object.__setattr__(self, "coupled", _clamp_unit(self.coupled))
        else:
            object.__setattr__(self, "axes", tuple(_clamp_unit(a) for a in self.axes))

    @staticmethod
    def coupled_input(u: float, backtrack: bool = False) -> "CorrectionInput":
        return CorrectionInput(coupled=u, backtrack=backtrack)

    @staticmethod
    def independent(axes, backtrack: bool = False) -> "CorrectionInput":
        return CorrectionInput(axes=tuple(axes), backtrack=backtrack)

    @staticmethod
    def idle() -> "CorrectionInput":
        return CorrectionInput(axes=(0.0, 0.0, 0.0, 0.0))


def map_correction(inp: CorrectionInput, sat: SaturationSet,
                   coupling=DEFAULT_COUPLING) -> np.ndarray:
    """Map raw operator input to a per-axis delta inside the saturation set.

    Coupled mode spans the single ray u * (w_i * sat_i); independent mode
    scales each axis by its own saturation bound.
    """
    w = np.asarray(coupling, dtype=float)
    if abs(np.max(np.abs(w)) - 1.0) > 1e-12:
        raise ValueError("coupling weights must have unit infinity norm")
    s = sat.as_array()
    if inp.coupled is not None:
        return inp.coupled * w * s
    return np.asarray(inp.axes, dtype=float) * s


def arbitrate(x_n: CommandVector, dx: np.ndarray, box: SafetyBox = SafetyBox()) -> CommandVector:
    """Final command: nominal plus delta, clamped to the safety box
    component-wise. A zero delta returns the nominal bit-exactly."""
    nom = x_n.as_array()
    b = box.bounds()
    out = nom.copy()
    for i in range(len(AXES)):
        if dx[i] != 0.0:
            out[i] = min(b[i, 1], max(b[i, 0], nom[i] + dx[i]))
    return CommandVector.from_array(out)


def backtrack_rate(inp: CorrectionInput, nominal_feed: float, feed_scale: float = 1.0) -> float:
    """Signed progress rate along the recorded path, mm/s. Backtracking
    reverses at the nominal feed with the sander still engaged."""
    if inp.backtrack:
        return -nominal_feed
    return feed_scale * nominal_feed


class CorrectionMailbox:
    """Single-slot latest-wins mailbox between input ingest and the
    execution tick. Newer input overwrites; reads never block or consume."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value = CorrectionInput.idle()

    def post(self, inp: CorrectionInput) -> None:
        with self._lock:
            self._value = inp

    def latest(self) -> CorrectionInput:
        with self._lock:
            return self._value
