"""Nearest-neighbour pattern-matching agents.

Each agent is a (window k, match level ell, cluster w, horizon tau) tuple.
At history length t the agent takes the most recent k rows of price
relatives for its cluster, searches the admissible past for the closest
k-row tuples, steps each matched time tau periods forward to collect an
"agent tuple" of outcomes, and maps the sample mean/covariance of
(outcome - 1) through the analytic fund-separation solver to produce its
portfolio controls for period t+1.

Distances: for k = 1 the score is the Euclidean norm of the one-row
difference across the cluster's assets (the same scalar for every asset);
for k > 1 the per-asset score is the window sum of absolute differences,
and candidate ranking uses the sum of per-asset scores.  A "euclidean"
metric switch replaces the per-asset window sum with a per-column 2-norm
for comparison runs.

Match counts: with a single (trivial) partition either ell-hat = ell
("trivial" rule) or ell-hat = floor((0.02 + 0.5 (ell-1)/(L-1)) t)
("gyorfi_nn" rule), clamped to [1, admissible candidates].  With multiple
partitions the single best match is taken in each.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import fundsep

log = logging.getLogger(__name__)

MATCH_RULES = ("trivial", "gyorfi_nn")
PARTITION_KINDS = ("trivial", "overlapping", "exclusive")
METRICS = ("abs_sum", "euclidean")

# Above this many floats, prefix covariances fall back to per-level passes
# instead of one cumulative outer-product array.
_PREFIX_CUMSUM_LIMIT = 65536


class NoMatchError(Exception):
    """History too short to produce any admissible candidate tuple."""


@dataclass(frozen=True)
class AgentSpec:
    """Identity of one agent in the grid."""

    k: int
    ell: int
    cluster: int = 0
    tau: int = 1

    def __post_init__(self):
        if self.k < 1 or self.ell < 1 or self.tau < 1 or self.cluster < 0:
            raise ValueError(f"invalid agent spec {self}")


def agent_grid(windows: int, levels: int, n_clusters: int = 1, horizons=(1,)):
    """Full (tau, w, k, ell) enumeration; tau outermost, ell innermost."""
    if windows < 1 or levels < 1 or n_clusters < 1:
        raise ValueError("grid dimensions must be at least 1")
    return [
        AgentSpec(k=k, ell=ell, cluster=w, tau=tau)
        for tau in horizons
        for w in range(n_clusters)
        for k in range(1, windows + 1)
        for ell in range(1, levels + 1)
    ]


@dataclass(frozen=True)
class ClusterMap:
    """Asset-index subsets each agent family is confined to."""

    members: tuple
    names: tuple

    def __post_init__(self):
        if len(self.members) != len(self.names) or not self.members:
            raise ValueError("cluster members and names must align and be nonempty")
        for name, idx in zip(self.names, self.members):
            arr = np.asarray(idx)
            if arr.size == 0:
                raise ValueError(f"cluster {name!r} is empty")
            if arr.min() < 0:
                raise ValueError(f"cluster {name!r} has negative asset indices")

    @classmethod
    def trivial(cls, n_assets: int) -> "ClusterMap":
        return cls(members=(tuple(range(n_assets)),), names=("ALL",))

    @classmethod
    def from_tickers(cls, groups: dict, tickers) -> "ClusterMap":
        """Build from {cluster name: [ticker, ...]} against an asset order."""
        order = {tck: i for i, tck in enumerate(tickers)}
        members, names = [], []
        for name, group in groups.items():
            missing = [tck for tck in group if tck not in order]
            if missing:
                raise ValueError(f"cluster {name!r} references unknown tickers {missing}")
            members.append(tuple(order[tck] for tck in group))
            names.append(name)
        return cls(members=tuple(members), names=tuple(names))

    def __len__(self):
        return len(self.members)

    def validate_assets(self, n_assets: int):
        for name, idx in zip(self.names, self.members):
            if max(idx) >= n_assets:
                raise ValueError(f"cluster {name!r} exceeds asset count {n_assets}")


@dataclass(frozen=True)
class Partition:
    """Boolean time-membership masks over a history of length t."""

    masks: np.ndarray  # (n_partitions, t)

    def __post_init__(self):
        if self.masks.ndim != 2:
            raise ValueError("partition masks must be 2-d")

    @property
    def n_partitions(self):
        return self.masks.shape[0]


def make_partitions(t: int, kind: str, ell: int) -> Partition:
    """Build the time partition used by one agent family.

    trivial: a single all-true mask.  overlapping: ell masks where the i-th
    covers the most recent ceil(i*t/ell) periods, so every mask contains
    the latest period.  exclusive: ell disjoint contiguous blocks covering
    the whole history (earlier blocks take the remainder).
    """
    if t < 1 or ell < 1:
        raise ValueError("t and ell must be at least 1")
    if kind == "trivial":
        return Partition(np.ones((1, t), dtype=bool))
    if kind == "overlapping":
        masks = np.zeros((ell, t), dtype=bool)
        for i in range(1, ell + 1):
            span = math.ceil(i * t / ell)
            masks[i - 1, t - span:] = True
        return Partition(masks)
    if kind == "exclusive":
        if ell > t:
            raise ValueError(f"cannot split {t} periods into {ell} exclusive blocks")
        masks = np.zeros((ell, t), dtype=bool)
        bounds = np.array_split(np.arange(t), ell)
        for i, block in enumerate(bounds):
            masks[i, block] = True
        return Partition(masks)
    raise ValueError(f"unknown partition kind {kind!r}")


def gyorfi_match_count(ell: int, levels: int, t: int) -> int:
    """Match count floor(p_ell * t) with p_ell = 0.02 + 0.5 (ell-1)/(L-1).

    With a single level the schedule degenerates to p = 0.02.  The result
    is not yet clamped to the admissible candidate count.
    """
    if not 1 <= ell <= levels:
        raise ValueError(f"ell={ell} outside 1..{levels}")
    p = 0.02 if levels == 1 else 0.02 + 0.5 * (ell - 1) / (levels - 1)
    return int(math.floor(p * t))


def tuple_distance(query, candidate, metric: str = "abs_sum"):
    """Per-asset distance between two k x m tuples.

    k = 1 compares the rows as whole vectors: the Euclidean norm across
    assets, broadcast to every asset position.  k > 1 scores each asset
    column independently: the window sum of absolute differences
    ("abs_sum", the default) or the column 2-norm ("euclidean").
    """
    q = np.atleast_2d(np.asarray(query, dtype=float))
    c = np.atleast_2d(np.asarray(candidate, dtype=float))
    if q.shape != c.shape:
        raise ValueError(f"tuple shapes differ: {q.shape} vs {c.shape}")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    diff = q - c
    k, m = diff.shape
    if k == 1:
        return np.full(m, float(np.sqrt((diff * diff).sum())))
    if metric == "abs_sum":
        return np.abs(diff).sum(axis=0)
    return np.sqrt((diff * diff).sum(axis=0))


@dataclass(frozen=True)
class MatchResult:
    """Matched candidate end-positions and the outcome rows they select.

    ``times`` are 0-based end indices j of matched tuples, in ascending
    distance order (earliest index wins ties); every j + tau is a valid row
    of the history.  ``agent_tuple`` holds the outcome rows, one per match.
    """

    times: np.ndarray
    agent_tuple: np.ndarray


def _candidate_scores(xw, k, tau, metric):
    """Summed candidate scores for every admissible tuple end.

    Returns (ends, scores) where ends[i] is the 0-based end row of the i-th
    candidate window and scores[i] its ranking score (sum of per-asset
    scores for k > 1; the plain Euclidean row distance for k = 1, whose
    ordering equals the broadcast sum).
    """
    t, m = xw.shape
    n = t - tau - k + 1
    if n <= 0:
        return np.empty(0, dtype=np.intp), np.empty(0)
    ends = np.arange(k - 1, k - 1 + n)
    if k == 1:
        diff = xw[:n] - xw[t - 1]
        return ends, np.sqrt((diff * diff).sum(axis=1))
    windows = sliding_window_view(xw[: t - tau], (k, m)).reshape(n, k, m)
    diff = windows - xw[t - k : t]
    if metric == "abs_sum":
        return ends, np.abs(diff).sum(axis=(1, 2))
    return ends, np.sqrt((diff * diff).sum(axis=1)).sum(axis=1)


def _per_asset_scores(xw, k, tau, metric):
    """(ends, per-asset score matrix) for the independent-columns variant."""
    t, m = xw.shape
    n = t - tau - k + 1
    if n <= 0:
        return np.empty(0, dtype=np.intp), np.empty((0, m))
    ends = np.arange(k - 1, k - 1 + n)
    if k == 1:
        diff = xw[:n] - xw[t - 1]
        scalar = np.sqrt((diff * diff).sum(axis=1))
        return ends, np.repeat(scalar[:, None], m, axis=1)
    windows = sliding_window_view(xw[: t - tau], (k, m)).reshape(n, k, m)
    diff = windows - xw[t - k : t]
    if metric == "abs_sum":
        return ends, np.abs(diff).sum(axis=1)
    return ends, np.sqrt((diff * diff).sum(axis=1))


def _clamped_count(rule, ell, levels, t, n_candidates):
    if rule == "trivial":
        lhat = ell
    elif rule == "gyorfi_nn":
        lhat = gyorfi_match_count(ell, levels, t)
    else:
        raise ValueError(f"unknown match rule {rule!r}")
    return max(1, min(lhat, n_candidates))


def _stable_smallest(scores, n_smallest):
    """Indices of the n smallest scores, earliest index first among ties.

    Equivalent to ``np.argsort(scores, kind="stable")[:n_smallest]`` but via
    argpartition when that is much smaller than the candidate count.
    """
    n = scores.shape[0]
    if n_smallest >= n or n_smallest * 4 > n:
        return np.argsort(scores, kind="stable")[:n_smallest]
    cut = np.partition(scores, n_smallest - 1)[n_smallest - 1]
    candidates = np.flatnonzero(scores <= cut)
    order = candidates[np.argsort(scores[candidates], kind="stable")]
    return order[:n_smallest]


def _partition_best_matches(scores, ends, masks, k, tau, t):
    """Best candidate end per partition; partitions too short contribute none."""
    times = []
    for mask in masks:
        csum = np.concatenate([[0], np.cumsum(mask.astype(np.intp))])
        inside = csum[ends + 1] - csum[ends - k + 1] == k
        if not inside.any():
            continue
        idx = np.flatnonzero(inside)
        best = idx[np.argmin(scores[idx])]
        times.append(ends[best])
    return np.asarray(times, dtype=np.intp)


def match(
    features,
    spec: AgentSpec,
    partition: Partition | None = None,
    rule: str = "trivial",
    levels: int | None = None,
    metric: str = "abs_sum",
) -> MatchResult:
    """Find matching times for one agent on its cluster-sliced history.

    ``features`` is the (t, m) relatives slice the agent sees.  A single
    partition selects the ell-hat closest candidates under ``rule``;
    multiple partitions select the best match in each.  Raises
    :class:`NoMatchError` when no admissible candidate exists, which
    callers translate into the fallback control.
    """
    xw = np.asarray(getattr(features, "values", features), dtype=float)
    if xw.ndim != 2:
        raise ValueError("features must be a (t, m) array")
    t = xw.shape[0]
    ends, scores = _candidate_scores(xw, spec.k, spec.tau, metric)
    if ends.size == 0:
        raise NoMatchError(f"history of {t} periods admits no (k={spec.k}, tau={spec.tau}) candidate")
    if partition is None:
        partition = make_partitions(t, "trivial", 1)
    if partition.masks.shape[1] != t:
        raise ValueError("partition length does not match history length")
    if partition.n_partitions == 1:
        lhat = _clamped_count(rule, spec.ell, levels if levels is not None else spec.ell, t, ends.size)
        order = np.argsort(scores, kind="stable")
        times = ends[order[:lhat]]
    else:
        times = _partition_best_matches(scores, ends, partition.masks, spec.k, spec.tau, t)
        if times.size == 0:
            raise NoMatchError("no partition admits a candidate tuple")
    return MatchResult(times=times, agent_tuple=xw[times + spec.tau])


def sample_moments(outcomes):
    """Mean and covariance of (outcomes - 1) with an n-1 denominator.

    A single outcome row yields a zero covariance, which the fund solver's
    ridge turns positive definite.
    """
    y = np.asarray(outcomes, dtype=float) - 1.0
    n, m = y.shape
    mu = y.mean(axis=0)
    if n >= 2:
        r = y - mu
        cov = (r.T @ r) / (n - 1)
    else:
        cov = np.zeros((m, m))
    return mu, cov


@dataclass(frozen=True)
class MatchConfig:
    """Matching and control-mapping knobs shared by a whole agent family."""

    rule: str = "trivial"
    partition: str = "trivial"
    metric: str = "abs_sum"
    independent_columns: bool = False
    gamma: float = 1.0
    ridge: float = fundsep.DEFAULT_RIDGE
    projection: str = "euclidean"
    absolute_tilt: str = "unit_leverage"

    def __post_init__(self):
        if self.rule not in MATCH_RULES:
            raise ValueError(f"unknown match rule {self.rule!r}")
        if self.partition not in PARTITION_KINDS:
            raise ValueError(f"unknown partition kind {self.partition!r}")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.absolute_tilt not in ("unit_leverage", "gamma"):
            raise ValueError(f"unknown absolute_tilt {self.absolute_tilt!r}")


class PatternAgents:
    """Vectorized control generation for a whole agent grid.

    Groups agents by (cluster, tau, k) so candidate scores are computed
    once per group, then maps every agent's matched-sample moments through
    the fund-separation solver in one batched call per cluster.  Absolute
    and active controls for the same history share all matching work.
    """

    def __init__(self, specs, n_assets: int, clusters: ClusterMap | None = None,
                 config: MatchConfig | None = None, levels: int | None = None):
        self.specs = list(specs)
        if not self.specs:
            raise ValueError("agent grid is empty")
        self.n_assets = n_assets
        self.clusters = clusters if clusters is not None else ClusterMap.trivial(n_assets)
        self.clusters.validate_assets(n_assets)
        self.config = config if config is not None else MatchConfig()
        # The gyorfi schedule needs the grid's L; infer it from a full grid
        # or take it explicitly when running a partial spec list.
        self.levels = levels if levels is not None else max(s.ell for s in self.specs)
        for spec in self.specs:
            if spec.cluster >= len(self.clusters):
                raise ValueError(f"{spec} references missing cluster")
            if spec.ell > self.levels:
                raise ValueError(f"{spec} exceeds levels={self.levels}")
        self._fallbacks = 0

    @property
    def n_agents(self):
        return len(self.specs)

    @property
    def fallback_count(self):
        """Agent-periods that produced a fallback control so far."""
        return self._fallbacks

    # -- matching ---------------------------------------------------------

    def _group_selections(self, xw, group):
        """Matched outcome-row selections for agents sharing (cluster, tau, k).

        Returns a list aligned with ``group`` of int arrays of history row
        indices (empty = no match).
        """
        cfg = self.config
        t = xw.shape[0]
        tau, k = group[0][1].tau, group[0][1].k
        if cfg.independent_columns and cfg.partition == "trivial":
            return self._independent_selections(xw, group)
        ends, scores = _candidate_scores(xw, k, tau, cfg.metric)
        selections = []
        if ends.size == 0:
            return [np.empty(0, dtype=np.intp) for _ in group]
        if cfg.partition == "trivial":
            lhats = [_clamped_count(cfg.rule, spec.ell, self.levels, t, ends.size)
                     for _, spec in group]
            order = _stable_smallest(scores, max(lhats))
            sorted_rows = ends[order] + tau
            for lhat in lhats:
                selections.append(sorted_rows[:lhat])
        else:
            for _, spec in group:
                try:
                    masks = make_partitions(t, cfg.partition, spec.ell).masks
                except ValueError:
                    selections.append(np.empty(0, dtype=np.intp))
                    continue
                times = _partition_best_matches(scores, ends, masks, k, tau, t)
                selections.append(times + tau)
        return selections

    def _independent_selections(self, xw, group):
        """Per-asset match times; the agent tuple is assembled column-wise.

        Encoded as negative sentinel-free 2-d selections: returns for each
        agent an (lhat, m) index matrix instead of a flat row list.
        """
        cfg = self.config
        t = xw.shape[0]
        tau, k = group[0][1].tau, group[0][1].k
        ends, per_asset = _per_asset_scores(xw, k, tau, cfg.metric)
        if ends.size == 0:
            return [np.empty(0, dtype=np.intp) for _ in group]
        orders = np.argsort(per_asset, axis=0, kind="stable")
        rows = ends[orders] + tau  # (n, m) per-asset sorted outcome rows
        out = []
        for _, spec in group:
            lhat = _clamped_count(cfg.rule, spec.ell, self.levels, t, ends.size)
            out.append(rows[:lhat, :])
        return out

    def _agent_statistics(self, x, want_samples=False):
        """Per-agent (mu, cov) of matched outcomes at the given history.

        Returns (mu, cov, counts, matched, samples) where mu/cov are ragged
        lists in cluster-local dimensions, counts holds matched sample sizes,
        matched is a bool array, and samples (only when requested) holds each
        agent's outcome rows for numeric solvers.
        """
        n = self.n_agents
        matched = np.zeros(n, dtype=bool)
        counts = np.zeros(n, dtype=np.intp)
        mus = [None] * n
        covs = [None] * n
        samples = [None] * n if want_samples else None

        by_group: dict = {}
        for i, spec in enumerate(self.specs):
            by_group.setdefault((spec.cluster, spec.tau, spec.k), []).append((i, spec))

        for (w, _tau, _k), group in by_group.items():
            cols = np.asarray(self.clusters.members[w], dtype=np.intp)
            if cols.size == x.shape[1] and np.array_equal(cols, np.arange(x.shape[1])):
                xw = x
            else:
                xw = np.ascontiguousarray(x[:, cols])
            selections = self._group_selections(xw, group)
            prefix = self._prefix_stats(xw, group, selections)
            for (i, _spec), sel in zip(group, selections):
                if sel.size == 0:
                    continue
                matched[i] = True
                counts[i] = sel.shape[0]
                if sel.ndim == 2:  # independent-columns tuple
                    tup = xw[sel, np.arange(xw.shape[1])[None, :]]
                    mus[i], covs[i] = sample_moments(tup)
                    if want_samples:
                        samples[i] = tup
                elif prefix is not None and i in prefix:
                    mus[i], covs[i] = prefix[i]
                    if want_samples:
                        samples[i] = xw[sel]
                else:
                    mus[i], covs[i] = sample_moments(xw[sel])
                    if want_samples:
                        samples[i] = xw[sel]
        return mus, covs, counts, matched, samples

    def _cluster_blocks(self, x):
        """Stacked matched moments per cluster for one history.

        Returns ({cluster: (agent rows, mu stack, cov stack, deficient mask)},
        unmatched agent indices).  "Deficient" marks covariances built from no
        more samples than assets, which are rank-deficient by construction.
        """
        mus, covs, counts, matched, _ = self._agent_statistics(x)
        blocks = {}
        for w in range(len(self.clusters)):
            idx = [i for i in np.flatnonzero(matched) if self.specs[i].cluster == w]
            if idx:
                rows = np.asarray(idx, dtype=np.intp)
                mw = len(self.clusters.members[w])
                blocks[w] = (
                    rows,
                    np.stack([mus[i] for i in idx]),
                    np.stack([covs[i] for i in idx]),
                    counts[rows] <= mw,
                )
        return blocks, np.flatnonzero(~matched)

    def _prefix_stats(self, xw, group, selections):
        """Shared prefix mean/cov when selections are nested sorted prefixes."""
        cfg = self.config
        if cfg.partition != "trivial" or cfg.independent_columns:
            return None
        lens = np.array([sel.shape[0] for sel in selections])
        if lens.size == 0 or lens.max() == 0:
            return None
        nmax = int(lens.max())
        m = xw.shape[1]
        if nmax * m * m > _PREFIX_CUMSUM_LIMIT:
            return None
        base = selections[int(np.argmax(lens))]
        y = xw[base] - 1.0
        c1 = np.cumsum(y, axis=0)
        c2 = np.cumsum(y[:, :, None] * y[:, None, :], axis=0)
        live = np.flatnonzero(lens > 0)
        counts = lens[live].astype(float)
        bounds = lens[live] - 1
        mus = c1[bounds] / counts[:, None]
        covs = np.zeros((live.size, m, m))
        ge2 = counts >= 2
        if ge2.any():
            outer = mus[ge2][:, :, None] * mus[ge2][:, None, :]
            covs[ge2] = (c2[bounds[ge2]] - counts[ge2, None, None] * outer) \
                / (counts[ge2] - 1.0)[:, None, None]
        return {group[j][0]: (mus[pos], covs[pos]) for pos, j in enumerate(live)}

    # -- control mapping --------------------------------------------------

    def _fallback_row(self, spec, mode):
        h = np.zeros(self.n_assets)
        if mode == "absolute":
            cols = np.asarray(self.clusters.members[spec.cluster], dtype=np.intp)
            h[cols] = 1.0 / cols.size
        return h

    def controls_multi(self, history, modes=("absolute", "active")):
        """Control matrices for several portfolio modes off one matching pass."""
        x = np.asarray(getattr(history, "values", history), dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_assets:
            raise ValueError(f"history must be (t, {self.n_assets})")
        blocks, unmatched = self._cluster_blocks(x)
        out = {mode: np.zeros((self.n_agents, self.n_assets)) for mode in modes}

        for w, (rows, mu_b, cov_b, deficient) in blocks.items():
            cols = np.asarray(self.clusters.members[w], dtype=np.intp)
            for mode, ctrl in self._map_controls(mu_b, cov_b, modes, deficient).items():
                out[mode][rows[:, None], cols[None, :]] = ctrl

        self._fallbacks += unmatched.size * len(modes)
        if unmatched.size:
            log.debug("fallback controls for %d agents at t=%d", unmatched.size, x.shape[0])
        for mode in modes:
            for i in unmatched:
                out[mode][i] = self._fallback_row(self.specs[i], mode)
        return out

    def controls_series(self, history, modes=("absolute", "active"), chunk: int = 64):
        """(T, N, M) control stacks for every period, batching the solver.

        Period t's controls use only x[:t], exactly as repeated
        :meth:`controls_multi` calls would (bit-identically so); moments are
        buffered across ``chunk`` periods per cluster and pushed through one
        stacked fund solve, which keeps per-period dispatch overhead out of
        long backtests.
        """
        x = np.asarray(getattr(history, "values", history), dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_assets:
            raise ValueError(f"history must be (t, {self.n_assets})")
        t_total = x.shape[0]
        out = {mode: np.zeros((t_total, self.n_agents, self.n_assets)) for mode in modes}
        pending = {w: [] for w in range(len(self.clusters))}

        def flush():
            for w, items in pending.items():
                if not items:
                    continue
                cols = np.asarray(self.clusters.members[w], dtype=np.intp)
                mu_b = np.concatenate([item[2] for item in items])
                cov_b = np.concatenate([item[3] for item in items])
                deficient = np.concatenate([item[4] for item in items])
                ctrl = self._map_controls(mu_b, cov_b, modes, deficient)
                offset = 0
                for t, rows, mu_i, _, _ in items:
                    span = slice(offset, offset + len(rows))
                    for mode in modes:
                        out[mode][t, rows[:, None], cols[None, :]] = ctrl[mode][span]
                    offset += len(rows)
                pending[w] = []

        for t in range(t_total):
            blocks, unmatched = self._cluster_blocks(x[:t])
            for w, (rows, mu_b, cov_b, deficient) in blocks.items():
                pending[w].append((t, rows, mu_b, cov_b, deficient))
            self._fallbacks += unmatched.size * len(modes)
            for mode in modes:
                for i in unmatched:
                    out[mode][t, i] = self._fallback_row(self.specs[i], mode)
            if (t + 1) % chunk == 0:
                flush()
        flush()
        return out

    def _map_controls(self, mu_b, cov_b, modes, deficient=None):
        """Controls per mode from one batched fund solve over the agents."""
        cfg = self.config
        try:
            a, b = fundsep.fund_solution(mu_b, cov_b, eps=cfg.ridge,
                                         assume_deficient=deficient)
            return {
                mode: fundsep.controls_from_solution(a, b, mode, gamma=cfg.gamma,
                                                     projection=cfg.projection,
                                                     absolute_tilt=cfg.absolute_tilt)
                for mode in modes
            }
        except fundsep.SolverError:
            pass
        # Rare: isolate the offending agents and fall back just for them.
        out = {mode: np.zeros_like(mu_b) for mode in modes}
        m = mu_b.shape[1]
        for i in range(mu_b.shape[0]):
            try:
                a, b = fundsep.fund_solution(mu_b[i], cov_b[i], eps=cfg.ridge)
                for mode in modes:
                    out[mode][i] = fundsep.controls_from_solution(
                        a, b, mode, gamma=cfg.gamma, projection=cfg.projection,
                        absolute_tilt=cfg.absolute_tilt)
            except fundsep.SolverError:
                self._fallbacks += len(modes)
                log.debug("solver fallback for agent row %d", i)
                for mode in modes:
                    if mode == "absolute":
                        out[mode][i] = np.full(m, 1.0 / m)
        return out

    def controls(self, history, mode: str):
        """N x M control matrix for the next period in one mode."""
        return self.controls_multi(history, (mode,))[mode]

    def controls_numeric(self, history, warm=None):
        """Absolute controls from the numeric growth-optimal solver.

        Same matching as :meth:`controls`; each agent's matched outcomes are
        handed to SLSQP instead of the analytic map.  ``warm`` is an optional
        per-agent dict of starting points reused across periods.
        """
        x = np.asarray(getattr(history, "values", history), dtype=float)
        _, _, _, matched, samples = self._agent_statistics(x, want_samples=True)
        out = np.zeros((self.n_agents, self.n_assets))
        for i, spec in enumerate(self.specs):
            cols = np.asarray(self.clusters.members[spec.cluster], dtype=np.intp)
            if not matched[i]:
                out[i] = self._fallback_row(spec, "absolute")
                continue
            x0 = None if warm is None else warm.get(i)
            w = fundsep.log_optimal_controls(samples[i], "absolute", x0=x0)
            if warm is not None:
                warm[i] = w
            out[i, cols] = w
        return out


def generate_agent_controls(
    history,
    specs,
    mode: str,
    clusters: ClusterMap | None = None,
    config: MatchConfig | None = None,
):
    """One-shot N x M controls for period t+1 from history x[1..t].

    Thin wrapper over :class:`PatternAgents`; backtests keep the engine
    object alive instead so repeated calls share nothing but stay cheap.
    """
    x = np.asarray(getattr(history, "values", history), dtype=float)
    engine = PatternAgents(specs, x.shape[1], clusters=clusters, config=config)
    return engine.controls(x, mode)


def anti_bcrp_controls(window, mode: str, gamma: float = 1.0,
                       ridge: float = fundsep.DEFAULT_RIDGE,
                       projection: str = "euclidean"):
    """Contrarian controls from a recent window of relatives.

    The sample mean of (window - 1) is negated before the fund solve, so the
    agent leans against whatever just performed; the covariance is kept.
    """
    w = np.atleast_2d(np.asarray(getattr(window, "values", window), dtype=float))
    if w.size == 0:
        raise ValueError("window must be nonempty")
    mu, cov = sample_moments(w)
    return fundsep.agent_controls(-mu, cov, mode, gamma=gamma, eps=ridge, projection=projection)


def generate_anti_bcrp_controls(history, specs, mode: str,
                                clusters: ClusterMap | None = None,
                                config: MatchConfig | None = None):
    """Control matrix for an anti-BCRP agent grid (trivial partitions).

    Each agent applies :func:`anti_bcrp_controls` to the last k relatives of
    its cluster; agents whose window exceeds the history fall back exactly
    like pattern agents.
    """
    x = np.asarray(getattr(history, "values", history), dtype=float)
    cfg = config if config is not None else MatchConfig()
    cmap = clusters if clusters is not None else ClusterMap.trivial(x.shape[1])
    cmap.validate_assets(x.shape[1])
    t = x.shape[0]
    out = np.zeros((len(specs), x.shape[1]))
    for i, spec in enumerate(specs):
        cols = np.asarray(cmap.members[spec.cluster], dtype=np.intp)
        if t < spec.k:
            if mode == "absolute":
                out[i, cols] = 1.0 / cols.size
            continue
        out[i, cols] = anti_bcrp_controls(
            x[t - spec.k :, cols], mode, gamma=cfg.gamma, ridge=cfg.ridge,
            projection=cfg.projection,
        )
    return out
