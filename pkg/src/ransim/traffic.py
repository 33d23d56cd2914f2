"""Traffic sources and their congestion reaction.

Sources stand in for the transport endpoints: ECN-capable (L4S-style)
sources scale their rate down with the CE-mark fraction once per RTT
window, classic sources halve on a drop echo; both recover additively back
toward the nominal rate.
"""

from dataclasses import dataclass, field

from .core import ConfigError, US_PER_S

CBR = "ConstantBitRate"
POISSON = "Poisson"
PERIODIC_BURST = "PeriodicBurst"
XR_FRAME = "XrFrame"

L4S = "L4S"
CLASSIC = "Classic"
NO_REACTION = "None"


@dataclass
class TrafficSource:
    bearer_id: str
    pattern: str = CBR
    nominal_rate: float = 1_000_000.0  # bytes/s offered at pattern level
    sdu_bytes: int = 1500
    burst_period: int = 100_000  # us, PeriodicBurst
    burst_bytes: int = 15_000  # PeriodicBurst
    fps: float = 90.0  # XrFrame
    frame_bytes: int = 50_000  # XrFrame mean
    frame_jitter: float = 0.0  # XrFrame stddev fraction of frame_bytes
    congestion_law: str = NO_REACTION
    recovery_step: float = 0.05  # fraction of nominal added back per RTT
    rate: float = field(init=False)
    _last_reaction: int = field(init=False, default=-(10**12))
    rtt_window: int = 50_000  # us, at most one multiplicative reaction per window

    def __post_init__(self):
        if self.nominal_rate < 0:
            raise ConfigError(f"source {self.bearer_id}: negative rate")
        self.rate = self.nominal_rate

    def next_emission(self, now, rng):
        """Return (next_time_us, [sdu sizes]) for the emission after ``now``."""
        if self.rate <= 0:
            return None, []
        if self.pattern == CBR:
            gap = int(self.sdu_bytes * US_PER_S / self.rate)
            return now + max(1, gap), [self.sdu_bytes]
        if self.pattern == POISSON:
            mean_gap = self.sdu_bytes * US_PER_S / self.rate
            gap = rng.expovariate(1.0 / mean_gap) if mean_gap > 0 else 1
            return now + max(1, int(gap)), [self.sdu_bytes]
        if self.pattern == PERIODIC_BURST:
            sizes = []
            left = self.burst_bytes
            while left > 0:
                take = min(left, self.sdu_bytes)
                sizes.append(take)
                left -= take
            return now + self.burst_period, sizes
        if self.pattern == XR_FRAME:
            gap = int(US_PER_S / self.fps)
            size = self.frame_bytes
            if self.frame_jitter > 0:
                size = max(1, int(rng.gauss(size, self.frame_jitter * size)))
            sizes = []
            left = size
            while left > 0:
                take = min(left, self.sdu_bytes)
                sizes.append(take)
                left -= take
            return now + gap, sizes
        raise ConfigError(f"unknown traffic pattern {self.pattern!r}")


class CeMarkFraction:
    __slots__ = ("fraction",)

    def __init__(self, fraction):
        self.fraction = fraction


class DropEcho:
    __slots__ = ()


def on_congestion_signal(source, signal, now):
    """Apply the congestion law; returns the new rate."""
    if source.congestion_law == NO_REACTION:
        return source.rate
    if now - source._last_reaction < source.rtt_window:
        return source.rate
    if source.congestion_law == L4S and isinstance(signal, CeMarkFraction):
        source.rate *= 1.0 - signal.fraction / 2.0
        source._last_reaction = now
    elif source.congestion_law == CLASSIC and isinstance(signal, DropEcho):
        source.rate /= 2.0
        source._last_reaction = now
    return source.rate


def recover_rate(source):
    """Additive recovery, once per RTT window, up to the nominal rate."""
    if source.congestion_law == NO_REACTION:
        return source.rate
    source.rate = min(
        source.nominal_rate,
        source.rate + source.recovery_step * source.nominal_rate,
    )
    return source.rate
