"""Run metrics: per-bearer latency percentiles, conservation counters, PRB
utilization, fronthaul load, energy, and the event logs (handover,
migration, admission audit).  All times are microseconds, energy joules.
"""

import csv
import json

import numpy as np

from .core import ModelError


class BearerMetrics:
    __slots__ = ("packets_in", "ingress_dropped", "delivered", "latencies",
                 "aqm_drops", "residual", "duplicates", "ce_marks",
                 "reorder_stalls", "delivered_times")

    def __init__(self):
        self.packets_in = 0
        self.ingress_dropped = 0
        self.delivered = 0
        self.latencies = []
        self.delivered_times = []
        self.aqm_drops = 0
        self.residual = 0
        self.duplicates = 0
        self.ce_marks = 0
        self.reorder_stalls = []  # (sn, stall_us)


class MetricsCollector:
    def __init__(self, record_grants=False, record_series=True, series_stride=1):
        self.bearers = {}
        self.record_grants = record_grants
        self.record_series = record_series
        self.series_stride = series_stride
        self.grant_log = []  # (tti_time, ue, bearer, ru, carrier, prbs, dir)
        self.prb_granted = {}  # (ru, carrier) -> prbs
        self.prb_offered = {}  # (ru, carrier) -> prbs
        self.slice_prbs = {}  # slice -> prbs
        self.tti_series = []  # (t, util, max_head_sojourn)
        self.fronthaul_bytes = {}  # ru -> bytes
        self.energy_j = {}
        self.wake_delays = 0
        self.wasted_grants = 0
        self.padding_bytes = 0
        self.tb_transmitted = 0
        self.tb_failed_final = 0
        self.harq_protocol_errors = 0
        self.handovers = []
        self.migrations = []
        self.scale_events = []
        self.audit_log = []
        self.drop_echo_times = {}  # bearer -> first DropEcho arrival at source
        self.ce_signal_times = {}  # bearer -> first CE signal arrival
        self.subnets = {}
        self.conservation = {}
        self.in_flight_at_end = {}

    def bearer(self, bearer_id):
        bm = self.bearers.get(bearer_id)
        if bm is None:
            bm = BearerMetrics()
            self.bearers[bearer_id] = bm
        return bm

    def on_grant(self, grant, t):
        key = (grant.ru, grant.carrier)
        self.prb_granted[key] = self.prb_granted.get(key, 0) + grant.prbs
        if self.record_grants:
            self.grant_log.append((t, grant.ue, grant.bearer_id, grant.ru,
                                   grant.carrier, grant.prbs, grant.direction))

    def add_slice_prbs(self, slice_id, prbs):
        self.slice_prbs[slice_id] = self.slice_prbs.get(slice_id, 0) + prbs

    def on_tti(self, t, pools_total, pools_used, max_head_sojourn, tti_index):
        for key, total in pools_total.items():
            self.prb_offered[key] = self.prb_offered.get(key, 0) + total
        if self.record_series and tti_index % self.series_stride == 0:
            offered = sum(pools_total.values())
            used = sum(pools_used.values())
            util = used / offered if offered else 0.0
            self.tti_series.append((t, util, max_head_sojourn))

    def on_fronthaul(self, ru, nbytes):
        self.fronthaul_bytes[ru] = self.fronthaul_bytes.get(ru, 0) + nbytes

    def finalize_conservation(self, bearer_id, in_flight):
        bm = self.bearer(bearer_id)
        self.in_flight_at_end[bearer_id] = in_flight
        lhs = bm.packets_in
        rhs = bm.delivered + bm.aqm_drops + bm.residual + in_flight
        ok = lhs == rhs
        self.conservation[bearer_id] = {
            "packets_in": lhs, "delivered": bm.delivered,
            "aqm_drops": bm.aqm_drops, "residual": bm.residual,
            "in_flight_at_end": in_flight, "holds": ok,
        }
        if not ok:
            raise ModelError(
                f"conservation violated for bearer {bearer_id}: "
                f"in={lhs} delivered={bm.delivered} aqm={bm.aqm_drops} "
                f"residual={bm.residual} in_flight={in_flight}"
            )

    def to_report(self, seed, cfg_hash, duration_us):
        bearers = {}
        for bid in sorted(self.bearers):
            bm = self.bearers[bid]
            lat = np.asarray(bm.latencies, dtype=np.int64)
            if lat.size:
                p50, p99 = np.percentile(lat, [50, 99]).astype(int).tolist()
                p100 = int(lat.max())
            else:
                p50 = p99 = p100 = None
            bearers[bid] = {
                "packets_in": bm.packets_in,
                "ingress_dropped": bm.ingress_dropped,
                "delivered": bm.delivered,
                "aqm_drops": bm.aqm_drops,
                "residual": bm.residual,
                "duplicates": bm.duplicates,
                "ce_marks": bm.ce_marks,
                "latency_us": {"p50": p50, "p99": p99, "p100": p100},
                "reorder_stalls": bm.reorder_stalls,
            }
        util = {}
        for key in sorted(self.prb_offered):
            offered = self.prb_offered[key]
            granted = self.prb_granted.get(key, 0)
            util["/".join(key)] = {
                "offered_prbs": offered,
                "granted_prbs": granted,
                "utilization": round(granted / offered, 6) if offered else 0.0,
            }
        return {
            "seed": seed,
            "config_hash": cfg_hash,
            "duration_us": duration_us,
            "bearers": bearers,
            "conservation": self.conservation,
            "prb_utilization": util,
            "slice_prbs": {k: v for k, v in sorted(self.slice_prbs.items())
                           if v},
            "fronthaul_bytes": dict(sorted(self.fronthaul_bytes.items())),
            "energy_j": {k: round(v, 9) for k, v in
                         sorted(self.energy_j.items())},
            "wake_delays": self.wake_delays,
            "wasted_grants": self.wasted_grants,
            "tb_transmitted": self.tb_transmitted,
            "tb_failed_final": self.tb_failed_final,
            "harq_protocol_errors": self.harq_protocol_errors,
            "handovers": [vars(h) for h in self.handovers],
            "migrations": [vars(m) for m in self.migrations],
            "scale_events": self.scale_events,
            "audit_log": [
                {"at": e.at, "ue": e.ue, "event": e.event,
                 "score": round(e.score, 6), "ranf": e.ranf}
                for e in self.audit_log
            ],
            "drop_echo_times": dict(sorted(self.drop_echo_times.items())),
            "ce_signal_times": dict(sorted(self.ce_signal_times.items())),
            "subnetworks": self.subnets,
        }


def write_summary(report, path):
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_tti_series_csv(series, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_us", "prb_utilization", "max_head_sojourn_us"])
        for t, util, sojourn in series:
            w.writerow([t, f"{util:.6f}", sojourn])


def write_latency_cdf(collector, path):
    """Columnar plot data: one (latency, cdf) column pair per bearer."""
    cols = {}
    for bid in sorted(collector.bearers):
        lat = np.sort(np.asarray(collector.bearers[bid].latencies,
                                 dtype=np.int64))
        if lat.size == 0:
            continue
        cdf = np.arange(1, lat.size + 1) / lat.size
        cols[bid] = (lat, cdf)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = []
        for bid in cols:
            header += [f"{bid}_latency_us", f"{bid}_cdf"]
        w.writerow(header)
        if cols:
            n = max(lat.size for lat, _ in cols.values())
            for i in range(n):
                row = []
                for lat, cdf in cols.values():
                    if i < lat.size:
                        row += [int(lat[i]), f"{cdf[i]:.8f}"]
                    else:
                        row += ["", ""]
                w.writerow(row)
