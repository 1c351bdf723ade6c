"""Feedback laws: the continuous fidelity-gradient law, the hysteresis
switching controller built on it, and constant open-loop controls.

The switching controller acts on the overlap f = tr(rho rho_d) with a
hysteresis band B = (gamma/2, gamma): the continuous law is active at high
overlap, a constant exploratory drive u = 1 at low overlap, and inside the
band the law is chosen by which boundary was crossed last.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import as_matrix


class Region(Enum):
    HIGH = "high"
    LOW = "low"
    BAND = "band"


class BandEntry(Enum):
    FROM_HIGH = "from_high"
    FROM_LOW = "from_low"


# integer codes shared with the compiled kernels and the CSV export
REGION_CODE_NA = -1
REGION_CODE_HIGH = 0
REGION_CODE_LOW = 1
REGION_CODE_BAND_FROM_HIGH = 2
REGION_CODE_BAND_FROM_LOW = 3

REGION_LABELS = {
    REGION_CODE_NA: "",
    REGION_CODE_HIGH: "high",
    REGION_CODE_LOW: "low",
    REGION_CODE_BAND_FROM_HIGH: "band_from_high",
    REGION_CODE_BAND_FROM_LOW: "band_from_low",
}


@dataclass(frozen=True)
class SwitchingState:
    """Per-trajectory memory of the hysteresis controller.

    ``region`` is None before the first evaluation; ``band_entry`` is
    meaningful only inside the band.
    """

    gamma: float
    region: Region = None
    band_entry: BandEntry = None

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.region is Region.BAND and self.band_entry is None:
            raise ValueError("band region requires a band_entry")

    @property
    def code(self):
        if self.region is Region.HIGH:
            return REGION_CODE_HIGH
        if self.region is Region.LOW:
            return REGION_CODE_LOW
        if self.region is Region.BAND:
            if self.band_entry is BandEntry.FROM_HIGH:
                return REGION_CODE_BAND_FROM_HIGH
            return REGION_CODE_BAND_FROM_LOW
        return REGION_CODE_NA


def continuous_law(rho, rho_d, h_f):
    """u = -tr(i [H_f, rho] rho_d); real for Hermitian inputs."""
    rho = as_matrix(rho)
    rho_d = as_matrix(rho_d)
    h_f = as_matrix(h_f)
    val = -1j * np.trace((h_f @ rho - rho @ h_f) @ rho_d)
    if abs(val.imag) > 1e-12:
        raise ValueError(f"control value has imaginary residue {val.imag:.2e}")
    return float(val.real)


def switching_controller(rho, state, rho_d, h_f):
    """One evaluation of the hysteresis law.

    Returns the control for the region entered at this evaluation and the
    updated controller memory.  An uninitialized state (region None) is
    initialized from the current overlap; a start inside the band counts as
    entered from below (exploratory drive).
    """
    gamma = state.gamma
    f = float(np.trace(as_matrix(rho) @ as_matrix(rho_d)).real)
    if f >= gamma:
        new = SwitchingState(gamma, Region.HIGH)
    elif f <= 0.5 * gamma:
        new = SwitchingState(gamma, Region.LOW)
    else:
        if state.region is Region.HIGH:
            entry = BandEntry.FROM_HIGH
        elif state.region is Region.LOW:
            entry = BandEntry.FROM_LOW
        elif state.region is Region.BAND:
            entry = state.band_entry
        else:
            entry = BandEntry.FROM_LOW
        new = SwitchingState(gamma, Region.BAND, entry)
    if new.region is Region.HIGH or (
        new.region is Region.BAND and new.band_entry is BandEntry.FROM_HIGH
    ):
        u = continuous_law(rho, rho_d, h_f)
    else:
        u = 1.0
    return u, new


def reduced_law(rho_s, rho_u, h_fu):
    """The continuous law written in the two observable parameters of the
    block-adapted state: the target population ``rho_s`` and the coherence
    ``rho_u`` between target and coupling direction.

    Only the coherence enters the drive value; the population governs the
    regime selection elsewhere.  Equals ``continuous_law`` on the full state
    whenever the feedback Hamiltonian couples the target to a single
    direction.
    """
    del rho_s
    return float(2.0 * (complex(h_fu) * np.conj(complex(rho_u))).imag)


class ConstantController:
    """Open-loop control: ignores the state, returns a fixed value."""

    kind = 0

    def __init__(self, value=0.0):
        self.value = float(value)

    def start(self):
        return None

    def __call__(self, rho, memory, rho_d, h_f):
        return self.value, None


class ContinuousController:
    """Applies the continuous fidelity-gradient law at every step."""

    kind = 1

    def start(self):
        return None

    def __call__(self, rho, memory, rho_d, h_f):
        return continuous_law(rho, rho_d, h_f), None


class SwitchingController:
    """The hysteresis switching law with threshold ``gamma``."""

    kind = 2

    def __init__(self, gamma=0.5):
        if not 0.0 < gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
        self.gamma = float(gamma)

    def start(self):
        return SwitchingState(self.gamma)

    def __call__(self, rho, memory, rho_d, h_f):
        return switching_controller(rho, memory, rho_d, h_f)


def constant_controller(value):
    """Controller returning ``value`` regardless of the state."""
    return ConstantController(value)
