"""Orchestration: slice admission with automatic placement, hysteresis-based
scaling, energy/sleep accounting, and the policy/report hook surface a
near-real-time controller application would use.
"""

import itertools
from dataclasses import dataclass, field

from . import topology as topo
from .core import ConfigError

SCALE_UP = "ScaleUp"
SCALE_DOWN = "ScaleDown"
SCALE_NONE = "None"

PREFER_SITE = "PreferSite"
ENERGY_SAVING = "EnergySaving"
MIN_SLICE_SHARE = "MinSliceShare"

PER_TTI = "per-TTI"
PER_INTERVAL = "per-interval"


@dataclass
class SlaSpec:
    slice_id: str
    latency_budget: int  # tightest latency requirement, us
    offered_load: float = 0.0  # bytes/s, informational
    availability: float = 0.999
    cpu_load_per_instance: float = 1.0


@dataclass
class Reject:
    reason: str  # "latency" | "capacity"
    detail: str = ""


def admit_slice(sla, topology, plan, *, tti=500, harq_max_tx=4, harq_rtt=2_000,
                prefer_site=None, instance_id_prefix=None):
    """Place a new slice's RRC/UP/PHY, cheapest-first (FarEdge preferred).

    The conservative latency bound is path latency + one TTI of scheduling
    delay + worst-case HARQ (max_tx x RTT).  If the FarEdge placement misses
    the slice's tightest budget, functions escalate to OnPrem; if even
    all-OnPrem misses it (or capacity runs out) the slice is rejected and
    the plan is left unchanged.  Returns the new FunctionInstances or Reject.
    """
    prefix = instance_id_prefix or f"slice-{sla.slice_id}"
    faredge = sorted(
        (s for s in topology.sites.values() if s.kind == topo.FAREDGE),
        key=lambda s: s.id,
    )
    onprem = sorted(
        (s for s in topology.sites.values() if s.kind == topo.ONPREM),
        key=lambda s: s.id,
    )
    if not onprem:
        return Reject("capacity", "no OnPrem site in topology")

    candidates = []  # site choices for (RRC, UP, PHY), cheapest first
    prefs = dict(prefer_site or {})
    if faredge:
        candidates.append(faredge[0])
    candidates.append(onprem[0])
    if prefs:
        # An explicit site-kind preference jumps the queue when feasible.
        def pref_key(site):
            wanted = prefs.get(topo.UP)
            return 0 if wanted == site.kind else 1
        candidates.sort(key=lambda s: (pref_key(s), s.kind != topo.FAREDGE))

    overhead = tti + harq_max_tx * harq_rtt
    last_detail = ""
    for site in candidates:
        instances = [
            topo.FunctionInstance(f"{prefix}-rrc", topo.RRC, site.id,
                                  slice=sla.slice_id,
                                  cpu_load=sla.cpu_load_per_instance),
            topo.FunctionInstance(f"{prefix}-up", topo.UP, site.id,
                                  slice=sla.slice_id,
                                  cpu_load=sla.cpu_load_per_instance),
            topo.FunctionInstance(f"{prefix}-phy", topo.PHY, site.id,
                                  slice=sla.slice_id,
                                  cpu_load=sla.cpu_load_per_instance),
        ]
        trial = topo.PlacementPlan(plan.instances + instances)
        violations = topo.validate_placement(trial, topology)
        if violations:
            last_detail = "; ".join(violations)
            continue
        worst = 0
        for ru_id in topology.rus:
            lat = topo.path_latency(trial, topology, sla.slice_id, ru_id)
            worst = max(worst, lat + overhead)
        if worst <= sla.latency_budget:
            plan.instances.extend(instances)
            plan.by_id.update({i.id: i for i in instances})
            return instances
        last_detail = (
            f"worst-case latency {worst}us at {site.kind} exceeds "
            f"budget {sla.latency_budget}us"
        )
    if "capacity" in last_detail or "exceeds capacity" in last_detail:
        return Reject("capacity", last_detail)
    return Reject("latency", last_detail)


class Scaler:
    """Load-driven replica scaling with consecutive-tick hysteresis."""

    def __init__(self, hi=0.8, lo=0.2, hysteresis=3):
        self.hi = hi
        self.lo = lo
        self.hysteresis = hysteresis
        self._high = {}
        self._low = {}
        self.replicas = {}
        self.deferred_alarms = 0

    def evaluate(self, instance_id, load, capacity_available=True):
        """One periodic tick; returns ScaleUp / ScaleDown / None."""
        replicas = self.replicas.setdefault(instance_id, 1)
        if load > self.hi:
            self._high[instance_id] = self._high.get(instance_id, 0) + 1
            self._low[instance_id] = 0
        elif load < self.lo:
            self._low[instance_id] = self._low.get(instance_id, 0) + 1
            self._high[instance_id] = 0
        else:
            self._high[instance_id] = 0
            self._low[instance_id] = 0
        if self._high.get(instance_id, 0) >= self.hysteresis:
            self._high[instance_id] = 0
            if not capacity_available:
                self.deferred_alarms += 1
                return SCALE_NONE
            self.replicas[instance_id] = replicas + 1
            return SCALE_UP
        if self._low.get(instance_id, 0) >= self.hysteresis and replicas > 1:
            self._low[instance_id] = 0
            self.replicas[instance_id] = replicas - 1
            return SCALE_DOWN
        return SCALE_NONE


@dataclass
class PowerProfile:
    active_w: float
    idle_w: float
    sleep_w: float
    wake_latency: int = 100  # us
    granularity: str = PER_TTI

    def __post_init__(self):
        if not (self.sleep_w < self.idle_w < self.active_w):
            raise ConfigError("power profile must satisfy sleep < idle < active")
        if self.wake_latency < 0:
            raise ConfigError("wake latency must be non-negative")

    def power(self, state):
        return {"Active": self.active_w, "Idle": self.idle_w,
                "Sleep": self.sleep_w}[state]


DEFAULT_POWER_PROFILES = {
    "RU": PowerProfile(20.0, 8.0, 1.0, wake_latency=100, granularity=PER_TTI),
    topo.PHY: PowerProfile(15.0, 6.0, 1.0, wake_latency=100, granularity=PER_TTI),
    topo.UP: PowerProfile(10.0, 4.0, 0.5, wake_latency=500,
                          granularity=PER_INTERVAL),
    topo.RRC: PowerProfile(5.0, 2.0, 0.3, wake_latency=500,
                           granularity=PER_INTERVAL),
    topo.RRM: PowerProfile(5.0, 2.0, 0.3, wake_latency=500,
                           granularity=PER_INTERVAL),
    topo.CP_ROUTING: PowerProfile(3.0, 1.5, 0.2, wake_latency=500,
                                  granularity=PER_INTERVAL),
    topo.FHM: PowerProfile(4.0, 1.8, 0.2, wake_latency=100,
                           granularity=PER_TTI),
}


class EnergyMeter:
    """Integrates power x time per entity from explicit state transitions.

    The transition log is kept verbatim so an independent replay can verify
    the accumulated joules.
    """

    def __init__(self):
        self._profile = {}
        self._state = {}
        self._since = {}
        self.energy_j = {}
        self.transitions = []  # (t_us, entity, new_state)
        self.wake_delays = 0

    def register(self, entity, profile, state="Idle", now=0):
        self._profile[entity] = profile
        self._state[entity] = state
        self._since[entity] = now
        self.energy_j[entity] = 0.0
        self.transitions.append((now, entity, state))

    def state(self, entity):
        return self._state[entity]

    def profile(self, entity):
        return self._profile[entity]

    def set_state(self, entity, state, now):
        old = self._state[entity]
        if old == state:
            return
        self._accumulate(entity, now)
        self._state[entity] = state
        self.transitions.append((now, entity, state))

    def _accumulate(self, entity, now):
        dt = now - self._since[entity]
        if dt > 0:
            power = self._profile[entity].power(self._state[entity])
            self.energy_j[entity] += power * dt / 1e6
        self._since[entity] = now

    def finalize(self, now):
        for entity in list(self._state):
            self._accumulate(entity, now)
        return dict(self.energy_j)

    def total(self):
        return sum(self.energy_j.values())


def replay_energy(transitions, profiles, t_end):
    """Independent oracle: recompute joules per entity from the transition log."""
    energy = {}
    by_entity = {}
    for t, entity, state in transitions:
        by_entity.setdefault(entity, []).append((t, state))
    for entity, events in by_entity.items():
        total = 0.0
        for (t0, state), (t1, _next) in itertools.pairwise(events + [(t_end, None)]):
            total += profiles[entity].power(state) * (t1 - t0) / 1e6
        energy[entity] = total
    return energy


@dataclass
class Policy:
    id: str
    scope: str  # slice | site | global
    directive: str  # PreferSite | EnergySaving | MinSliceShare
    params: dict = field(default_factory=dict)


class PolicyStore:
    """Last-writer-wins policy state with an audit trail."""

    def __init__(self):
        self._by_key = {}
        self.audit = []

    def apply(self, policy, now):
        if policy.directive not in (PREFER_SITE, ENERGY_SAVING, MIN_SLICE_SHARE):
            raise ConfigError(f"unknown policy directive {policy.directive!r}")
        if policy.directive == MIN_SLICE_SHARE:
            frac = policy.params.get("fraction")
            if frac is None or not 0 <= frac <= 1:
                raise ConfigError(f"policy {policy.id}: bad MinSliceShare fraction")
        key = (policy.directive, policy.scope,
               policy.params.get("slice"), policy.params.get("kind"))
        if key in self._by_key:
            self.audit.append((now, policy.id, "overrides",
                               self._by_key[key].id))
        else:
            self.audit.append((now, policy.id, "applied", None))
        self._by_key[key] = policy

    def energy_saving(self):
        for p in self._by_key.values():
            if p.directive == ENERGY_SAVING:
                return bool(p.params.get("on", False))
        return False

    def min_slice_shares(self):
        shares = {}
        for p in self._by_key.values():
            if p.directive == MIN_SLICE_SHARE:
                shares[p.params["slice"]] = p.params["fraction"]
        return shares

    def preferred_sites(self):
        prefs = {}
        for p in self._by_key.values():
            if p.directive == PREFER_SITE:
                prefs[p.params["kind"]] = p.params["site_kind"]
        return prefs
