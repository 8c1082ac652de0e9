"""Brainwave band definitions."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidSpec

BAND_NAMES = ("alpha", "beta", "delta", "theta")


@dataclass(frozen=True)
class BandDefinition:
    name: str
    low_hz: float
    high_hz: float

    def __post_init__(self):
        if not 0 < self.low_hz < self.high_hz:
            raise InvalidSpec(f"band {self.name}: need 0 < low < high, got "
                              f"[{self.low_hz}, {self.high_hz}]")

    def contains(self, freq_hz: float) -> bool:
        """Strict interior test."""
        return self.low_hz < freq_hz < self.high_hz

    def check_rate(self, sample_rate_hz: float) -> None:
        if self.high_hz >= sample_rate_hz / 2:
            raise InvalidSpec(f"band {self.name} upper edge {self.high_hz} Hz "
                              f"is not below Nyquist ({sample_rate_hz / 2} Hz)")


CANONICAL_BANDS = {
    "delta": BandDefinition("delta", 0.5, 4.0),
    "theta": BandDefinition("theta", 4.0, 8.0),
    "alpha": BandDefinition("alpha", 8.0, 12.0),
    "beta": BandDefinition("beta", 12.0, 30.0),
}


def get_band(band: str | BandDefinition) -> BandDefinition:
    if isinstance(band, BandDefinition):
        return band
    try:
        return CANONICAL_BANDS[band]
    except KeyError:
        raise InvalidSpec(f"unknown band {band!r}; expected one of {sorted(CANONICAL_BANDS)}") from None
