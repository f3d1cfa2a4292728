"""Aggregation of episode records into the quantities worth plotting:
smoothed return curves, queue/drift traces, delay CDFs with reliability at
the deadline, policy overlays, and dexterity sensitivity tables.

All functions are pure over their record inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .constraint import delay_cdf, reliability
from .engine import EpisodeRecord


def moving_average(series, window: int) -> np.ndarray:
    """Trailing mean; the first k points average only the first k samples."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise ValueError("empty series")
    cum = np.cumsum(x)
    out = np.empty_like(x)
    for i in range(x.size):
        lo = max(i - window + 1, 0)
        total = cum[i] - (cum[lo - 1] if lo > 0 else 0.0)
        out[i] = total / (i - lo + 1)
    return out


def windowed_slope(series, window: int) -> np.ndarray:
    """Per-position slope over a trailing window: (x[i] - x[i-w]) / w."""
    x = np.asarray(series, dtype=float)
    if x.size <= window:
        raise ValueError("series shorter than window")
    return (x[window:] - x[:-window]) / window


@dataclass
class RunSummary:
    returns: np.ndarray            # per-episode raw returns
    returns_smoothed: np.ndarray
    mean_queue_embb: np.ndarray    # per-episode mean total backlog, eMBB
    mean_queue_hrllc: np.ndarray
    mean_drift_embb: np.ndarray    # per-episode mean drift per slice
    mean_drift_hrllc: np.ndarray
    delays_s: np.ndarray           # pooled per-packet HRLLC delays
    reliability_at_dmax: float
    mean_prbs_per_user: np.ndarray     # (U,) over all slots
    mean_arrivals_hrllc: np.ndarray    # (n_h,) packets/slot
    mean_departures_hrllc: np.ndarray  # (n_h,)


def summarize(records: list[EpisodeRecord], cfg: ScenarioConfig) -> RunSummary:
    returns = np.array([r.episodic_return for r in records])
    mq_e, mq_h, md_e, md_h = [], [], [], []
    for r in records:
        mq_e.append(np.mean([s.backlogs_embb.sum() for s in r.slots]) if r.slots else 0.0)
        mq_h.append(np.mean([s.backlogs_hrllc.sum() for s in r.slots]) if r.slots else 0.0)
        md_e.append(np.mean([s.drift_embb for s in r.slots]) if r.slots else 0.0)
        md_h.append(np.mean([s.drift_hrllc for s in r.slots]) if r.slots else 0.0)
    delays = np.array([d for r in records for d in r.hrllc_delays_s])
    slots = [s for r in records for s in r.slots]
    n_e = cfg.num_embb
    if slots:
        prbs = np.mean([s.counts for s in slots], axis=0)
        arr_h = np.mean([s.arrivals_hrllc for s in slots], axis=0)
        dep_h = np.mean([s.departures[n_e:] for s in slots], axis=0)
    else:
        prbs = np.zeros(cfg.num_users)
        arr_h = dep_h = np.zeros(cfg.num_hrllc)
    rel = reliability(delays, cfg.d_max_s) if delays.size else float("nan")
    return RunSummary(
        returns=returns,
        returns_smoothed=moving_average(returns, cfg.smooth_window),
        mean_queue_embb=np.array(mq_e), mean_queue_hrllc=np.array(mq_h),
        mean_drift_embb=np.array(md_e), mean_drift_hrllc=np.array(md_h),
        delays_s=delays, reliability_at_dmax=rel,
        mean_prbs_per_user=prbs, mean_arrivals_hrllc=arr_h,
        mean_departures_hrllc=dep_h)


def compare_policies(records_by_policy: dict[str, list[EpisodeRecord]],
                     cfg: ScenarioConfig) -> dict:
    """Aligned per-episode return table, per-policy delay CDFs, and the
    reliability at the deadline for each policy."""
    lengths = {name: len(recs) for name, recs in records_by_policy.items()}
    if len(set(lengths.values())) > 1:
        raise ValueError(f"mismatched run lengths: {lengths}")
    out = {"returns": {}, "cdf": {}, "reliability": {},
           "mean_delay_per_episode": {}}
    for name, recs in records_by_policy.items():
        summ = summarize(recs, cfg)
        out["returns"][name] = summ.returns
        out["cdf"][name] = (delay_cdf(summ.delays_s) if summ.delays_s.size
                            else [])
        out["reliability"][name] = summ.reliability_at_dmax
        out["mean_delay_per_episode"][name] = np.array(
            [np.mean(r.hrllc_delays_s) if r.hrllc_delays_s else float("nan")
             for r in recs])
    return out


def spearman_rank_correlation(x, y) -> float:
    """Rank correlation in [-1, 1] (average ranks on ties)."""
    def ranks(v: np.ndarray) -> np.ndarray:
        order = np.argsort(v, kind="stable")
        r = np.empty(len(v), dtype=float)
        i = 0
        while i < len(v):
            j = i
            while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
                j += 1
            r[order[i:j + 1]] = (i + j) / 2.0
            i = j + 1
        return r

    rx, ry = ranks(np.asarray(x, float)), ranks(np.asarray(y, float))
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx * rx).sum() * (ry * ry).sum())
    return float((rx * ry).sum() / denom) if denom > 0 else 0.0


def dexterity_sensitivity(records: list[EpisodeRecord], cfg: ScenarioConfig
                          ) -> dict:
    """Per-HRLLC-user steady-state table sorted by DXI, with the rank
    correlation between DXI and mean allocated PRBs."""
    summ = summarize(records, cfg)
    slots = [s for r in records for s in r.slots]
    dxi = (np.mean([s.dxi for s in slots], axis=0) if slots
           else np.zeros(cfg.num_hrllc))
    n_e = cfg.num_embb
    rows = []
    for u in range(cfg.num_hrllc):
        rows.append({
            "user": u,
            "dxi": float(dxi[u]),
            "mean_arrivals": float(summ.mean_arrivals_hrllc[u]),
            "mean_departures": float(summ.mean_departures_hrllc[u]),
            "mean_prbs": float(summ.mean_prbs_per_user[n_e + u]),
        })
    rows.sort(key=lambda r: r["dxi"])
    corr = spearman_rank_correlation([r["dxi"] for r in rows],
                                     [r["mean_prbs"] for r in rows])
    return {"rows": rows, "rank_correlation_dxi_prbs": corr}
