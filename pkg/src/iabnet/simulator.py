"""Monte Carlo ground truth for the two-tier IAB network.

Samples full network snapshots (PPP base stations and users over a
germ-grain blockage field), performs max-biased-power association with
correlated link states, tallies cell loads, draws access SINR and
backhaul SNR, and estimates rate/SINR CCDFs for the typical user at the
window center.

Iterations are independent given per-iteration seeds derived from a
master seed; all aggregation is over integer counts, so results are
identical however iterations are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import NetworkConfig, interferer_gain_distribution
from .geometry import (
    BlockageField,
    LinkState,
    Rect,
    link_states_batch,
    pair_uniform,
    sample_blockage_field,
)

__all__ = [
    "NetworkRealization",
    "AssociationMap",
    "CcdfCurve",
    "EmpiricalAssociation",
    "CoverageSim",
    "sample_realization",
    "associate_user",
    "anchor_sbs",
    "build_association_map",
    "empirical_association_prob",
    "sinr_access",
    "snr_backhaul",
    "user_rate",
    "estimate_ccdf",
    "simulate_rate_ccdfs",
    "simulate_coverage",
]

_KIND_CODES = {"um": 1, "us": 2, "sm": 3, "ss": 4}
# probe source index for links originating at the window center
PROBE_ID = -1


# ----------------------------------------------------------------------
# Realization
# ----------------------------------------------------------------------

@dataclass
class NetworkRealization:
    """One sampled network snapshot.

    `field` is None in the independent-blocking mode, where each link is
    LOS with probability exp(-r/mu) independently (states are a
    deterministic hash of (seed, link), so cached and recomputed values
    always agree).
    """

    config: NetworkConfig
    window: Rect
    mbs: np.ndarray
    sbs: np.ndarray
    ue: np.ndarray
    field: BlockageField | None
    seed: int
    link_state_cache: dict = field(default_factory=dict)

    def n_mbs(self) -> int:
        return self.mbs.shape[0]

    def n_sbs(self) -> int:
        return self.sbs.shape[0]

    def n_ue(self) -> int:
        return self.ue.shape[0]

    def _points(self, kind: str, src_ids, dst_ids):
        src_tier, dst_tier = kind[0], kind[1]
        src_arr = {"u": self.ue, "s": self.sbs}[src_tier]
        dst_arr = {"m": self.mbs, "s": self.sbs}[dst_tier]
        src_ids = np.asarray(src_ids, dtype=np.int64)
        probe = src_ids == PROBE_ID
        src = np.empty((src_ids.shape[0], 2), dtype=float)
        src[probe] = np.asarray(self.window.center())
        src[~probe] = src_arr[src_ids[~probe]]
        return src, dst_arr[np.asarray(dst_ids, dtype=np.int64)]

    def _compute_states(self, kind, src_ids, dst_ids):
        src, dst = self._points(kind, src_ids, dst_ids)
        if self.field is not None:
            return link_states_batch(src, dst, self.field)
        mu = self.config.require_mu()
        r = np.hypot(src[:, 0] - dst[:, 0], src[:, 1] - dst[:, 1])
        u = np.atleast_1d(pair_uniform(
            self.seed, _KIND_CODES[kind], src_ids + 1, dst_ids))
        return (u >= np.exp(-r / mu)).astype(np.uint8)

    def link_states(self, kind: str, src_ids, dst_ids,
                    cache: bool = True) -> np.ndarray:
        """LOS/NLOS codes for the links (src_ids[k] -> dst_ids[k]).

        kind is 'um', 'us', 'sm', or 'ss' (source tier, destination
        tier).  With `cache`, results are memoized per link; bulk
        one-shot association queries skip the memo for speed (states are
        a pure function of the realization either way).
        """
        src_ids = np.atleast_1d(np.asarray(src_ids, dtype=np.int64))
        dst_ids = np.atleast_1d(np.asarray(dst_ids, dtype=np.int64))
        src_ids, dst_ids = np.broadcast_arrays(src_ids, dst_ids)
        if not cache:
            return self._compute_states(kind, src_ids, dst_ids)
        memo = self.link_state_cache.setdefault(kind, {})
        out = np.empty(src_ids.shape[0], dtype=np.uint8)
        missing = []
        for k, (i, j) in enumerate(zip(src_ids.tolist(), dst_ids.tolist())):
            st = memo.get((i, j))
            if st is None:
                missing.append(k)
            else:
                out[k] = st
        if missing:
            midx = np.asarray(missing, dtype=np.int64)
            states = self._compute_states(kind, src_ids[midx], dst_ids[midx])
            out[midx] = states
            for k, st in zip(missing, states.tolist()):
                memo[(int(src_ids[k]), int(dst_ids[k]))] = st
        return out


def sample_realization(config: NetworkConfig, window: Rect, seed: int,
                       include_typical_user: bool = False) -> NetworkRealization:
    """Sample MBS/SBS/UE PPPs and the blockage field; deterministic per seed.

    With `include_typical_user`, the window-center probe user is
    prepended as ue[0] (it participates in cell loads).
    """
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 1)))
    area = window.area_km2()

    def ppp(lam):
        n = rng.poisson(lam * area)
        xs = rng.uniform(window.xmin, window.xmax, size=n)
        ys = rng.uniform(window.ymin, window.ymax, size=n)
        return np.column_stack([xs, ys])

    mbs = ppp(config.lambda_m)
    sbs = ppp(config.lambda_s)
    ue = ppp(config.lambda_u)
    if include_typical_user:
        ue = np.vstack([np.asarray(window.center())[None, :], ue])
    if config.blockage_model == "germ_grain":
        margin = max(config.blockage_length, 25.0)
        fld = sample_blockage_field(config.blockage_density, config.blockage_length,
                                    window.expanded(margin), seed)
    else:
        fld = None
        config.require_mu()
    return NetworkRealization(config=config, window=window, mbs=mbs, sbs=sbs,
                              ue=ue, field=fld, seed=int(seed))


# ----------------------------------------------------------------------
# Association
# ----------------------------------------------------------------------

def _tier_best(realization: NetworkRealization, config: NetworkConfig,
               src_kind: str, src_pts: np.ndarray, src_ids: np.ndarray,
               tier: str, link: str):
    """Per-source best BS of one tier under min pathloss with correlated
    states.  Returns (bs_index, pathloss, distance), index -1 where the
    tier is empty."""
    bs = realization.mbs if tier == "m" else realization.sbs
    n_src = src_pts.shape[0]
    best_idx = np.full(n_src, -1, dtype=np.int64)
    best_l = np.full(n_src, np.inf)
    best_r = np.full(n_src, np.inf)
    if bs.shape[0] == 0:
        return best_idx, best_l, best_r
    a_los = config.alpha_los[f"{link}_{tier}"]
    a_nlos = config.alpha_nlos[f"{link}_{tier}"]
    d = np.hypot(src_pts[:, 0, None] - bs[None, :, 0],
                 src_pts[:, 1, None] - bs[None, :, 1])
    d = np.maximum(d, 1e-9)
    # L >= min(r^a_los, r^a_nlos); the nearest BS caps the achievable
    # minimum, so distant BSs can be pruned before any state query:
    # only r <= max(r1^(an/al), r1^(al/an)) can still win.
    r1 = d.min(axis=1)
    cap_r = np.maximum(r1 ** (a_nlos / a_los), r1 ** (a_los / a_nlos))
    cand_src, cand_bs = np.nonzero(d <= cap_r[:, None])
    states = realization.link_states(src_kind + tier, src_ids[cand_src], cand_bs,
                                     cache=False)
    r = d[cand_src, cand_bs]
    losses = r**a_los
    nlos = states == int(LinkState.NLOS)
    losses[nlos] = r[nlos] ** a_nlos
    order = np.lexsort((cand_bs, r, losses, cand_src))
    first = np.unique(cand_src[order], return_index=True)[1]
    pick = order[first]
    best_idx[cand_src[pick]] = cand_bs[pick]
    best_l[cand_src[pick]] = losses[pick]
    best_r[cand_src[pick]] = r[pick]
    return best_idx, best_l, best_r


def _associate_points(realization: NetworkRealization, config: NetworkConfig,
                      src_pts: np.ndarray, src_ids: np.ndarray):
    """Max biased average received power association for many users.

    Returns (tier codes, bs indices, serving pathloss, serving distance).
    """
    if realization.n_mbs() == 0:
        raise ValueError("association requires at least one MBS")
    idx_m, l_m, r_m = _tier_best(realization, config, "u", src_pts, src_ids, "m", "a")
    idx_s, l_s, r_s = _tier_best(realization, config, "u", src_pts, src_ids, "s", "a")
    c_m = config.p_m * config.t_m * config.beta["a_m"] * config.g_main_m * config.g_main_u
    c_s = config.p_s * config.t_s * config.beta["a_s"] * config.g_main_s * config.g_main_u
    with np.errstate(divide="ignore"):
        score_m = np.where(idx_m >= 0, c_m / l_m, -np.inf)
        score_s = np.where(idx_s >= 0, c_s / l_s, -np.inf)
    pick_s = score_s > score_m
    tie = score_s == score_m
    pick_s |= tie & (r_s < r_m)  # equal power: smaller distance, then tier m
    tier = np.where(pick_s, 1, 0).astype(np.uint8)
    bs = np.where(pick_s, idx_s, idx_m)
    loss = np.where(pick_s, l_s, l_m)
    dist = np.where(pick_s, r_s, r_m)
    return tier, bs, loss, dist


def associate_user(u, realization: NetworkRealization, config: NetworkConfig):
    """Serving (tier, bs_index) of a user at coordinate u."""
    pt = np.asarray(u, dtype=float)[None, :]
    uid = _match_ue_id(realization, pt[0])
    tier, bs, _, _ = _associate_points(realization, config, pt, np.array([uid]))
    return ("s" if tier[0] else "m"), int(bs[0])


def _match_ue_id(realization: NetworkRealization, pt) -> int:
    """Cache id of a query point: its UE index, or the center probe id."""
    if np.allclose(pt, realization.window.center()):
        return PROBE_ID
    hits = np.nonzero((realization.ue[:, 0] == pt[0]) & (realization.ue[:, 1] == pt[1]))[0]
    return int(hits[0]) if hits.size else PROBE_ID


def anchor_sbs(s, realization: NetworkRealization, config: NetworkConfig) -> int:
    """Anchor MBS index of an SBS at coordinate s (max power over MBSs)."""
    if realization.n_mbs() == 0:
        raise ValueError("anchoring requires at least one MBS")
    pt = np.asarray(s, dtype=float)
    hits = np.nonzero((realization.sbs[:, 0] == pt[0]) & (realization.sbs[:, 1] == pt[1]))[0]
    sid = int(hits[0]) if hits.size else PROBE_ID
    idx, _, _ = _tier_best(realization, config, "s", pt[None, :], np.array([sid]), "m", "b")
    return int(idx[0])


@dataclass
class AssociationMap:
    """Association outcome and load tallies for one realization."""

    ue_tier: np.ndarray        # 0 = MBS-served, 1 = SBS-served
    ue_bs: np.ndarray          # serving BS index within its tier
    sbs_anchor: np.ndarray     # anchor MBS index per SBS
    mbs_access_load: np.ndarray
    sbs_access_load: np.ndarray
    mbs_backhaul_load: np.ndarray  # number of anchored SBSs per MBS

    def serving(self, ue_index: int):
        return ("s" if self.ue_tier[ue_index] else "m"), int(self.ue_bs[ue_index])


def build_association_map(realization: NetworkRealization,
                          config: NetworkConfig) -> AssociationMap:
    """Associate every UE and anchor every SBS; tally loads."""
    n_ue = realization.n_ue()
    ids = np.arange(n_ue, dtype=np.int64)
    tier, bs, _, _ = _associate_points(realization, config, realization.ue, ids)
    n_m, n_s = realization.n_mbs(), realization.n_sbs()
    if n_s > 0:
        anchor, _, _ = _tier_best(realization, config, "s", realization.sbs,
                                  np.arange(n_s, dtype=np.int64), "m", "b")
    else:
        anchor = np.zeros(0, dtype=np.int64)
    mbs_access = np.bincount(bs[tier == 0], minlength=n_m) if n_m else np.zeros(0, int)
    sbs_access = np.bincount(bs[tier == 1], minlength=n_s) if n_s else np.zeros(0, int)
    backhaul = np.bincount(anchor, minlength=n_m) if n_s else np.zeros(n_m, int)
    return AssociationMap(ue_tier=tier, ue_bs=bs, sbs_anchor=anchor,
                          mbs_access_load=mbs_access, sbs_access_load=sbs_access,
                          mbs_backhaul_load=backhaul)


# ----------------------------------------------------------------------
# SINR / SNR draws
# ----------------------------------------------------------------------

def _access_interference(realization, config, u_pt, uid, exclude_tier,
                         exclude_idx, rng):
    """Aggregate access interference at u from the SBS tier (plus the
    MBS tier when the sensitivity flag is on)."""
    total = 0.0
    tiers = ["s"] + (["m"] if config.mbs_interference else [])
    for tier in tiers:
        bs = realization.sbs if tier == "s" else realization.mbs
        n = bs.shape[0]
        if n == 0:
            continue
        mask = np.ones(n, dtype=bool)
        if exclude_tier == tier:
            mask[exclude_idx] = False
        idx = np.nonzero(mask)[0]
        if idx.size == 0:
            continue
        r = np.maximum(np.hypot(bs[idx, 0] - u_pt[0], bs[idx, 1] - u_pt[1]), 1e-9)
        states = realization.link_states("u" + tier, np.full(idx.size, uid), idx)
        a_l, a_n = config.alpha_los[f"a_{tier}"], config.alpha_nlos[f"a_{tier}"]
        losses = np.where(states == 1, r**a_n, r**a_l)
        gd = interferer_gain_distribution(config, "access", tier)
        psi = rng.choice(gd.values, p=gd.probabilities, size=idx.size)
        h = rng.exponential(1.0, size=idx.size)
        total += float(np.sum(config.power(tier) * config.beta[f"a_{tier}"]
                              * psi * h / losses))
    return total


def sinr_access(u, realization: NetworkRealization, amap: AssociationMap,
                config: NetworkConfig, rng: np.random.Generator) -> float:
    """Access SINR draw of the UE with index `u` (fading and interferer
    beams resampled i.i.d.; link states from the realization)."""
    tier, bs_idx = amap.serving(u)
    return _sinr_access_at(realization, config, realization.ue[u], int(u),
                           tier, bs_idx, rng)


def _sinr_access_at(realization, config, u_pt, uid, tier, bs_idx, rng) -> float:
    bs = (realization.sbs if tier == "s" else realization.mbs)[bs_idx]
    r = max(math.hypot(bs[0] - u_pt[0], bs[1] - u_pt[1]), 1e-9)
    state = int(realization.link_states("u" + tier, [uid], [bs_idx])[0])
    alpha = (config.alpha_nlos if state else config.alpha_los)[f"a_{tier}"]
    h = rng.exponential(1.0)
    signal = (config.power(tier) * config.gain_main(tier) * config.gain_main("u")
              * config.beta[f"a_{tier}"] * h / r**alpha)
    interf = _access_interference(realization, config, u_pt, uid, tier, bs_idx, rng)
    return signal / (interf + config.noise_power())


def snr_backhaul(s, realization: NetworkRealization, amap: AssociationMap,
                 config: NetworkConfig, rng: np.random.Generator) -> float:
    """Backhaul SNR draw of the SBS with index `s` toward its anchor."""
    return _snr_backhaul_at(realization, config, int(s),
                            int(amap.sbs_anchor[s]), rng)


def _snr_backhaul_at(realization, config, sid, anchor_idx, rng,
                     sbs_interferers: bool = False) -> float:
    s_pt = (realization.sbs[sid] if sid >= 0
            else np.asarray(realization.window.center()))
    m_pt = realization.mbs[anchor_idx]
    r = max(math.hypot(m_pt[0] - s_pt[0], m_pt[1] - s_pt[1]), 1e-9)
    state = int(realization.link_states("sm", [sid], [anchor_idx])[0])
    alpha = (config.alpha_nlos if state else config.alpha_los)["b_m"]
    h = rng.exponential(1.0)
    signal = (config.p_m * config.g_main_m * config.g_main_s
              * config.beta["b_m"] * h / r**alpha)
    interf = 0.0
    if config.backhaul_interference:
        tiers = ["m"] + (["s"] if sbs_interferers else [])
        for tier in tiers:
            bs = realization.mbs if tier == "m" else realization.sbs
            mask = np.ones(bs.shape[0], dtype=bool)
            if tier == "m":
                mask[anchor_idx] = False
            elif sid >= 0:
                mask[sid] = False
            idx = np.nonzero(mask)[0]
            if idx.size == 0:
                continue
            rr = np.maximum(np.hypot(bs[idx, 0] - s_pt[0], bs[idx, 1] - s_pt[1]), 1e-9)
            states = realization.link_states("s" + tier, np.full(idx.size, sid), idx)
            a_l, a_n = config.alpha_los[f"b_{tier}"], config.alpha_nlos[f"b_{tier}"]
            losses = np.where(states == 1, rr**a_n, rr**a_l)
            gd = interferer_gain_distribution(config, "backhaul", tier)
            psi = rng.choice(gd.values, p=gd.probabilities, size=idx.size)
            hh = rng.exponential(1.0, size=idx.size)
            interf += float(np.sum(config.power(tier) * config.beta[f"b_{tier}"]
                                   * psi * hh / losses))
    return signal / (interf + config.noise_power())


# ----------------------------------------------------------------------
# Rates
# ----------------------------------------------------------------------

def _chain_loads(realization, amap: AssociationMap, tier: str, bs_idx: int):
    """Load terms of the tagged chain for a user served by (tier, bs_idx)."""
    if tier == "m":
        own = int(amap.mbs_access_load[bs_idx])
        anchored = np.nonzero(amap.sbs_anchor == bs_idx)[0]
        backhauled = int(amap.sbs_access_load[anchored].sum()) if anchored.size else 0
        return {"own": own, "backhauled": backhauled}
    own = int(amap.sbs_access_load[bs_idx])
    anchor = int(amap.sbs_anchor[bs_idx])
    siblings = np.nonzero(amap.sbs_anchor == anchor)[0]
    cell_users = int(amap.sbs_access_load[siblings].sum())
    anchor_access = int(amap.mbs_access_load[anchor])
    return {
        "own": own,
        "anchor": anchor,
        "anchor_access": anchor_access,
        "cell_users": cell_users,  # all SBS loads in the backhaul cell, own included
    }


def _rates_from_draws(config, tier, loads, sinr_a, snr_b):
    """Per-user rate (bits/s) of every scheme from one set of draws."""
    w = config.bandwidth_w
    eta = config.eta_a
    log_a = math.log2(1.0 + sinr_a)
    out = {}
    if tier == "m":
        total = loads["own"] + loads["backhauled"]
        out["IRA"] = w / total * log_a
        out["ORA"] = eta * w / loads["own"] * log_a
        out["WB"] = w / loads["own"] * log_a
        return out
    n = loads["own"]
    denom = loads["anchor_access"] + loads["cell_users"]
    omega_share = n / denom
    log_b = math.log2(1.0 + snr_b)
    out["IRA"] = (w / n) * min(omega_share * log_b, (1.0 - omega_share) * log_a)
    out["ORA"] = min(eta * w / n * log_a,
                     (1.0 - eta) * w / loads["cell_users"] * log_b)
    out["WB"] = w / n * log_a
    return out


def user_rate(u, realization: NetworkRealization, amap: AssociationMap,
              config: NetworkConfig, scheme: str,
              rng: np.random.Generator) -> float:
    """Downlink rate draw (bits/s) of the UE with index `u`."""
    if scheme not in ("IRA", "ORA", "WB"):
        raise ValueError(f"unknown scheme {scheme!r}")
    tier, bs_idx = amap.serving(u)
    loads = _chain_loads(realization, amap, tier, bs_idx)
    sinr_a = sinr_access(u, realization, amap, config, rng)
    snr_b = (snr_backhaul(bs_idx, realization, amap, config, rng)
             if tier == "s" else math.inf)
    return _rates_from_draws(config, tier, loads, sinr_a, snr_b)[scheme]


# ----------------------------------------------------------------------
# Estimators (typical user at the window center)
# ----------------------------------------------------------------------

def _iteration_seed(seed: int, it: int, attempt: int) -> int:
    return int(np.random.SeedSequence((int(seed), it, attempt)).generate_state(1)[0])


def _sample_valid(config, window, seed, it, include_typical):
    """Resample until the realization supports the tagged chain (>= 1 MBS,
    full-buffer conditioning); returns (realization, resample count)."""
    resamples = 0
    while True:
        rz = sample_realization(config, window,
                                _iteration_seed(seed, it, resamples),
                                include_typical_user=include_typical)
        if rz.n_mbs() > 0:
            return rz, resamples
        resamples += 1
        if resamples > 200:
            raise RuntimeError("cannot sample a realization with an MBS")


@dataclass
class EmpiricalAssociation:
    a_m: float
    a_s: float
    a_m_stderr: float
    a_s_stderr: float
    n_iter: int


def empirical_association_prob(config: NetworkConfig, window: Rect,
                               n_iter: int, seed: int) -> EmpiricalAssociation:
    """Fraction of iterations in which the typical (window-center) user
    associates to each tier, with binomial standard errors."""
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    center = np.asarray(window.center())
    hits_m = 0
    for it in range(n_iter):
        rz, _ = _sample_valid(config, window, seed, it, include_typical=False)
        tier, _, _, _ = _associate_points(rz, config, center[None, :],
                                    np.array([PROBE_ID]))
        hits_m += int(tier[0] == 0)
    a_m = hits_m / n_iter
    se = math.sqrt(max(a_m * (1.0 - a_m), 1e-12) / n_iter)
    return EmpiricalAssociation(a_m=a_m, a_s=1.0 - a_m, a_m_stderr=se,
                                a_s_stderr=se, n_iter=n_iter)


@dataclass
class CcdfCurve:
    """Threshold -> probability table for a coverage or rate CCDF."""

    thresholds: np.ndarray
    probabilities: np.ndarray
    provenance: str
    meta: dict = field(default_factory=dict)
    stderr: np.ndarray | None = None

    def __post_init__(self):
        self.thresholds = np.asarray(self.thresholds, dtype=float)
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if np.any(np.diff(self.thresholds) <= 0):
            raise ValueError("thresholds must be strictly ascending")
        if np.any((self.probabilities < 0) | (self.probabilities > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        if np.any(np.diff(self.probabilities) > 1e-12):
            raise ValueError("CCDF probabilities must be non-increasing")
        if self.provenance not in ("simulated", "analytic"):
            raise ValueError("provenance must be 'simulated' or 'analytic'")

    def to_csv(self, path) -> None:
        import csv as _csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = _csv.writer(fh)
            wr.writerow(["threshold", "probability", "stderr", "provenance",
                         "config_hash", "detail"])
            detail = ";".join(f"{k}={v}" for k, v in sorted(self.meta.items())
                              if k != "config_hash")
            for i, (t, p) in enumerate(zip(self.thresholds, self.probabilities)):
                se = "" if self.stderr is None else repr(float(self.stderr[i]))
                wr.writerow([repr(float(t)), repr(float(p)), se, self.provenance,
                             self.meta.get("config_hash", ""), detail])

    @classmethod
    def from_csv(cls, path) -> "CcdfCurve":
        import csv as _csv

        with open(path, "r", newline="", encoding="utf-8") as fh:
            rows = list(_csv.reader(fh))[1:]
        thr = np.array([float(r[0]) for r in rows])
        prob = np.array([float(r[1]) for r in rows])
        stderr = (np.array([float(r[2]) for r in rows])
                  if rows and rows[0][2] != "" else None)
        meta = {}
        if rows:
            meta["config_hash"] = rows[0][4]
            for kv in rows[0][5].split(";"):
                if "=" in kv:
                    k, v = kv.split("=", 1)
                    meta[k] = v
        return cls(thr, prob, rows[0][3] if rows else "simulated", meta, stderr)


def _typical_chain_draw(rz, config, rng):
    """Associate the typical user (ue index 0) and draw its SINRs and
    chain loads; returns (tier, loads, sinr_a, snr_b)."""
    amap = build_association_map(rz, config)
    tier, bs_idx = amap.serving(0)
    loads = _chain_loads(rz, amap, tier, bs_idx)
    sinr_a = sinr_access(0, rz, amap, config, rng)
    snr_b = (snr_backhaul(bs_idx, rz, amap, config, rng)
             if tier == "s" else math.inf)
    return tier, loads, sinr_a, snr_b


def simulate_rate_ccdfs(config: NetworkConfig, window: Rect, thresholds,
                        n_iter: int, seed: int,
                        schemes=("IRA", "ORA", "WB")) -> dict:
    """Empirical rate CCDFs of the typical user for several schemes from
    shared per-iteration draws."""
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    thr = np.asarray(thresholds, dtype=float)
    counts = {s: np.zeros(len(thr), dtype=np.int64) for s in schemes}
    resample_total = 0
    for it in range(n_iter):
        rz, resamples = _sample_valid(config, window, seed, it, include_typical=True)
        resample_total += resamples
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), it, 3)))
        tier, loads, sinr_a, snr_b = _typical_chain_draw(rz, config, rng)
        rates = _rates_from_draws(config, tier, loads, sinr_a, snr_b)
        for s in schemes:
            counts[s] += (rates[s] > thr).astype(np.int64)
    out = {}
    for s in schemes:
        p = counts[s] / n_iter
        meta = {
            "config_hash": config.hash(),
            "seed": seed,
            "n_iter": n_iter,
            "scheme": s,
            "resample_rate": resample_total / n_iter,
            "window_km": (window.xmax - window.xmin) / 1e3,
        }
        out[s] = CcdfCurve(thr, p, "simulated", meta,
                           stderr=np.sqrt(np.maximum(p * (1 - p), 1e-12) / n_iter))
    return out


def estimate_ccdf(config: NetworkConfig, window: Rect, scheme: str,
                  thresholds, n_iter: int, seed: int) -> CcdfCurve:
    """Empirical CCDF of the typical-user rate for one scheme."""
    if scheme not in ("IRA", "ORA", "WB"):
        raise ValueError(f"unknown scheme {scheme!r}")
    return simulate_rate_ccdfs(config, window, thresholds, n_iter, seed,
                               schemes=(scheme,))[scheme]


@dataclass
class CoverageSim:
    """Empirical SINR/SNR coverage of the typical user and the typical
    backhaul link."""

    mbs_access: CcdfCurve          # P(SINR_a > tau | MBS-served)
    sbs_joint: CcdfCurve           # P(SINR_a > tau1, SNR_b > tau2 | SBS-served)
    backhaul_typical: CcdfCurve    # P(SNR_b > tau) of a center probe SBS
    association: EmpiricalAssociation
    tau2: float


def simulate_coverage(config: NetworkConfig, window: Rect, tau_grid,
                      n_iter: int, seed: int, tau2: float = 10 ** 0.5,
                      backhaul_grid=None) -> CoverageSim:
    """Estimate the conditional access-SINR CCDFs and the typical
    backhaul SNR CCDF (no load bookkeeping, so much cheaper than the
    rate estimators)."""
    tau = np.asarray(tau_grid, dtype=float)
    bh_grid = tau if backhaul_grid is None else np.asarray(backhaul_grid, float)
    center = np.asarray(window.center())
    n_m_served = 0
    n_s_served = 0
    cnt_m = np.zeros(len(tau), dtype=np.int64)
    cnt_joint = np.zeros(len(tau), dtype=np.int64)
    cnt_bh = np.zeros(len(bh_grid), dtype=np.int64)
    for it in range(n_iter):
        rz, _ = _sample_valid(config, window, seed, it, include_typical=False)
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), it, 3)))
        tier_code, bs, _, _ = _associate_points(rz, config, center[None, :],
                                          np.array([PROBE_ID]))
        tier = "s" if tier_code[0] else "m"
        sinr = _sinr_access_at(rz, config, center, PROBE_ID, tier, int(bs[0]), rng)
        if tier == "m":
            n_m_served += 1
            cnt_m += (sinr > tau).astype(np.int64)
        else:
            n_s_served += 1
            serving = int(bs[0])
            anchor, _, _ = _tier_best(rz, config, "s",
                                      rz.sbs[serving][None, :],
                                      np.array([serving]), "m", "b")
            snr_b = _snr_backhaul_at(rz, config, serving, int(anchor[0]), rng)
            cnt_joint += ((sinr > tau) & (snr_b > tau2)).astype(np.int64)
        # typical backhaul link: probe SBS at the center
        anchor_t, _, _ = _tier_best(rz, config, "s", center[None, :],
                                    np.array([PROBE_ID]), "m", "b")
        snr_t = _snr_backhaul_at(rz, config, PROBE_ID, int(anchor_t[0]), rng)
        cnt_bh += (snr_t > bh_grid).astype(np.int64)

    def curve(counts, denom, grid, name):
        p = counts / max(denom, 1)
        meta = {"config_hash": config.hash(), "seed": seed, "n_iter": n_iter,
                "conditioning_count": denom, "metric": name}
        return CcdfCurve(grid, p, "simulated", meta,
                         stderr=np.sqrt(np.maximum(p * (1 - p), 1e-12) / max(denom, 1)))

    a_m = n_m_served / n_iter
    se = math.sqrt(max(a_m * (1 - a_m), 1e-12) / n_iter)
    assoc = EmpiricalAssociation(a_m, 1 - a_m, se, se, n_iter)
    return CoverageSim(
        mbs_access=curve(cnt_m, n_m_served, tau, "sinr_access_mbs"),
        sbs_joint=curve(cnt_joint, n_s_served, tau, "joint_sbs_backhaul"),
        backhaul_typical=curve(cnt_bh, n_iter, bh_grid, "snr_backhaul_typical"),
        association=assoc,
        tau2=tau2,
    )
