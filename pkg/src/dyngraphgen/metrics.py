"""Evaluation metrics for generated dynamic attributed graphs.

Structure: per-step MMD of in/out-degree and clustering distributions, and
average percentage discrepancy of scalar statistics (power-law exponents,
wedge count, number of components, largest component). Attributes: JSD / EMD
of marginals and the Spearman correlation error. Dynamics: per-node change
between consecutive snapshots.

Clustering, wedges, coreness and components use the undirected projection.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import networkx as nx
import numpy as np
from scipy import stats
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .graph_store import Snapshot, TemporalGraph


class UndefinedMetric(ValueError):
    pass


@dataclass
class MmdConfig:
    sigma: float = 1.0
    clustering_bins: int = 100
    jsd_bins: int = 50

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("kernel bandwidth must be positive")


def _adj(s) -> np.ndarray:
    return s.adjacency if isinstance(s, Snapshot) else np.asarray(s)


def undirected(a: np.ndarray) -> np.ndarray:
    u = ((a + a.T) > 0).astype(np.int64)
    np.fill_diagonal(u, 0)
    return u


# --------------------------------------------------------------------------- MMD


def gaussian_kernel(x: np.ndarray, y: np.ndarray, sigma: float) -> np.ndarray:
    d2 = ((x[:, None, :] - y[None, :, :]) ** 2).sum(-1)
    return np.exp(-d2 / (2 * sigma * sigma))


def mmd(sample_p, sample_q, cfg: MmdConfig = MmdConfig()) -> float:
    """Plug-in (biased) squared MMD with a Gaussian kernel, floored at 0."""
    p = np.asarray(sample_p, dtype=np.float64)
    q = np.asarray(sample_q, dtype=np.float64)
    if p.size == 0 or q.size == 0:
        raise ValueError("MMD needs two non-empty samples")
    p = p.reshape(len(p), -1)
    q = q.reshape(len(q), -1)
    kpp = gaussian_kernel(p, p, cfg.sigma).mean()
    kqq = gaussian_kernel(q, q, cfg.sigma).mean()
    kpq = gaussian_kernel(p, q, cfg.sigma).mean()
    return max(float(kpp + kqq - 2 * kpq), 0.0)


# --------------------------------------------------------------------------- per-snapshot statistics


def degree_sequences(s):
    """(in_degrees, out_degrees) = (column sums, row sums)."""
    a = _adj(s).astype(np.int64)
    return a.sum(axis=0), a.sum(axis=1)


def clustering_coefficients(s) -> np.ndarray:
    u = undirected(_adj(s)).astype(np.float64)
    deg = u.sum(axis=1)
    closed = np.einsum("ij,jk,ki->i", u, u, u) / 2.0  # edges among neighbours
    pairs = deg * (deg - 1) / 2.0
    out = np.zeros_like(deg)
    np.divide(closed, pairs, out=out, where=deg >= 2)
    return out


def clustering_histogram(s, bins: int = 100) -> np.ndarray:
    c = clustering_coefficients(s)
    hist, _ = np.histogram(c, bins=bins, range=(0.0, 1.0))
    return hist / max(hist.sum(), 1)


def ple(degrees, x_min: int = 1, correction: bool = True) -> float:
    """Continuous maximum-likelihood power-law exponent over degrees >= x_min.

    With ``correction`` the discrete-data shift x_min - 1/2 is used in the log.
    """
    if x_min < 1:
        raise ValueError("x_min must be a positive integer")
    d = np.asarray(degrees, dtype=np.float64)
    d = d[d >= x_min]
    if d.size == 0:
        raise UndefinedMetric(f"no degrees >= {x_min}")
    ref = x_min - 0.5 if correction else float(x_min)
    denom = np.log(d / ref).sum()
    if denom <= 0:
        raise UndefinedMetric("power-law fit denominator is zero")
    return 1.0 + d.size / denom


def wedge_count(s) -> int:
    deg = undirected(_adj(s)).sum(axis=1)
    return int((deg * (deg - 1) // 2).sum())


def components(s):
    """(number of weakly connected components, size of the largest)."""
    a = _adj(s)
    nc, labels = connected_components(csr_matrix(a), directed=True, connection="weak")
    return int(nc), int(np.bincount(labels).max())


def coreness(s) -> np.ndarray:
    u = undirected(_adj(s))
    g = nx.from_numpy_array(u)
    core = nx.core_number(g)
    return np.array([core[i] for i in range(u.shape[0])], dtype=np.float64)


# --------------------------------------------------------------------------- sequence-level


def _avg_discrepancy(orig, gen):
    orig = np.asarray(orig, dtype=np.float64)
    gen = np.asarray(gen, dtype=np.float64)
    if orig.shape != gen.shape:
        raise ValueError("sequences must have equal length")
    ok = orig != 0
    excluded = int((~ok).sum())
    if not ok.any():
        return math.nan, excluded
    return float(np.mean(np.abs(orig[ok] - gen[ok]) / np.abs(orig[ok]))), excluded


def avg_discrepancy(orig, gen) -> float:
    """Mean over steps of |orig - gen| / |orig|; steps with orig == 0 are skipped (NaN if all are)."""
    return _avg_discrepancy(orig, gen)[0]


def jsd(p_samples, q_samples, bins: int = 50) -> float:
    """Base-2 Jensen-Shannon divergence of two 1-D samples on a shared histogram."""
    p_samples = np.asarray(p_samples, dtype=np.float64).ravel()
    q_samples = np.asarray(q_samples, dtype=np.float64).ravel()
    lo = min(p_samples.min(), q_samples.min())
    hi = max(p_samples.max(), q_samples.max())
    if hi == lo:
        return 0.0
    p, _ = np.histogram(p_samples, bins=bins, range=(lo, hi))
    q, _ = np.histogram(q_samples, bins=bins, range=(lo, hi))
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)

    def kl(a, b):
        nz = a > 0
        return float(np.sum(a[nz] * np.log2(a[nz] / b[nz])))

    return min(max(0.5 * kl(p, m) + 0.5 * kl(q, m), 0.0), 1.0)


def emd(p_samples, q_samples) -> float:
    """1-D earth mover's distance: integral of |F_p - F_q| over the real line."""
    p = np.sort(np.asarray(p_samples, dtype=np.float64).ravel())
    q = np.sort(np.asarray(q_samples, dtype=np.float64).ravel())
    grid = np.concatenate([p, q])
    grid.sort()
    widths = np.diff(grid)
    cdf_p = np.searchsorted(p, grid[:-1], side="right") / p.size
    cdf_q = np.searchsorted(q, grid[:-1], side="right") / q.size
    return float(np.sum(np.abs(cdf_p - cdf_q) * widths))


def attr_divergences(x_orig, x_gen, bins: int = 50):
    """(JSD, EMD) of attribute marginals, averaged over attribute dimensions."""
    x_orig = np.asarray(x_orig, dtype=np.float64)
    x_gen = np.asarray(x_gen, dtype=np.float64)
    if x_orig.shape[1] != x_gen.shape[1]:
        raise ValueError("attribute dimensions differ")
    if x_orig.shape[1] == 0:
        return 0.0, 0.0
    js = [jsd(x_orig[:, k], x_gen[:, k], bins) for k in range(x_orig.shape[1])]
    em = [emd(x_orig[:, k], x_gen[:, k]) for k in range(x_orig.shape[1])]
    return float(np.mean(js)), float(np.mean(em))


def _pair_correlations(x: np.ndarray):
    """Spearman rho for each attribute column pair (None where a column is constant)."""
    out = []
    F = x.shape[1]
    for i in range(F):
        for j in range(i + 1, F):
            if np.ptp(x[:, i]) == 0 or np.ptp(x[:, j]) == 0:
                out.append(None)
            else:
                out.append(float(stats.spearmanr(x[:, i], x[:, j]).statistic))
    return out


def _spearman_error(orig: TemporalGraph, gen: TemporalGraph):
    if orig.attr_dim < 2:
        return None, 0
    errs, excluded = [], 0
    for t in range(orig.num_steps):
        ro = _pair_correlations(orig.raw_attributes(t))
        rg = _pair_correlations(gen.raw_attributes(t))
        for a, b in zip(ro, rg):
            if a is None or b is None:
                excluded += 1
            else:
                errs.append(abs(a - b))
    return (float(np.mean(errs)) if errs else math.nan), excluded


def spearman_error(orig: TemporalGraph, gen: TemporalGraph) -> Optional[float]:
    """Mean over steps of |rho_orig - rho_gen| for the attribute pair(s); None when F < 2.

    For F > 2 every column pair contributes to the mean.
    """
    return _spearman_error(orig, gen)[0]


def diff_series(g: TemporalGraph) -> dict:
    """Consecutive-snapshot differences: mean |change| of per-node degree, clustering and coreness,
    plus attribute MAE / RMSE averaged over attribute dimensions."""
    if g.num_steps < 2:
        raise ValueError("difference series need T >= 2")
    props = []
    for s in g.snapshots:
        props.append({
            "degree": undirected(s.adjacency).sum(axis=1).astype(np.float64),
            "clustering": clustering_coefficients(s),
            "coreness": coreness(s),
        })
    out = {k: [] for k in ("degree", "clustering", "coreness", "attr_mae", "attr_rmse")}
    for t in range(g.num_steps - 1):
        for k in ("degree", "clustering", "coreness"):
            out[k].append(float(np.mean(np.abs(props[t][k] - props[t + 1][k]))))
        if g.attr_dim > 0:
            dx = g.raw_attributes(t) - g.raw_attributes(t + 1)
            out["attr_mae"].append(float(np.mean(np.abs(dx).mean(axis=0))))
            out["attr_rmse"].append(float(np.mean(np.sqrt((dx ** 2).mean(axis=0)))))
        else:
            out["attr_mae"].append(0.0)
            out["attr_rmse"].append(0.0)
    return out


# --------------------------------------------------------------------------- report


@dataclass
class MetricReport:
    in_deg_mmd: float
    out_deg_mmd: float
    clus_mmd: float
    in_ple_err: float
    out_ple_err: float
    wedge_err: float
    nc_err: float
    lcc_err: float
    attr_jsd: float
    attr_emd: float
    spearman_err: Optional[float]
    diff_series: dict = field(default_factory=dict)
    undefined_steps: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(**d)


def _safe_ple(degrees):
    try:
        return ple(degrees)
    except UndefinedMetric:
        return 0.0  # treated as undefined by the discrepancy (orig) or as a miss (gen)


def evaluate(orig: TemporalGraph, gen: TemporalGraph, cfg: MmdConfig = MmdConfig()) -> MetricReport:
    if (orig.num_nodes, orig.num_steps, orig.attr_dim) != (gen.num_nodes, gen.num_steps, gen.attr_dim):
        raise ValueError(f"shape mismatch: orig (N, T, F) = {(orig.num_nodes, orig.num_steps, orig.attr_dim)}, "
                         f"gen = {(gen.num_nodes, gen.num_steps, gen.attr_dim)}")
    T = orig.num_steps
    in_mmd, out_mmd, clus_mmd, js, em = [], [], [], [], []
    scalars = {k: ([], []) for k in ("in_ple", "out_ple", "wedge", "nc", "lcc")}
    for t in range(T):
        so, sg = orig.snapshots[t], gen.snapshots[t]
        ino, outo = degree_sequences(so)
        ing, outg = degree_sequences(sg)
        in_mmd.append(mmd(ino, ing, cfg))
        out_mmd.append(mmd(outo, outg, cfg))
        clus_mmd.append(mmd(clustering_histogram(so, cfg.clustering_bins)[None],
                            clustering_histogram(sg, cfg.clustering_bins)[None], cfg))
        for key, fo, fg in (("in_ple", _safe_ple(ino), _safe_ple(ing)),
                            ("out_ple", _safe_ple(outo), _safe_ple(outg)),
                            ("wedge", wedge_count(so), wedge_count(sg)),
                            ("nc", components(so)[0], components(sg)[0]),
                            ("lcc", components(so)[1], components(sg)[1])):
            scalars[key][0].append(fo)
            scalars[key][1].append(fg)
        j, e = attr_divergences(orig.raw_attributes(t), gen.raw_attributes(t), cfg.jsd_bins)
        js.append(j)
        em.append(e)

    undefined = {}
    errs = {}
    for key, (o, g) in scalars.items():
        value, excluded = _avg_discrepancy(o, g)
        errs[key] = 0.0 if math.isnan(value) else value
        if excluded:
            undefined[key] = excluded
    rho, rho_excluded = _spearman_error(orig, gen)
    if rho_excluded:
        undefined["spearman"] = rho_excluded
    notes = []
    if orig.attr_dim > 2:
        notes.append("spearman_err averaged over all attribute pairs (F > 2)")
    if rho is not None and math.isnan(rho):
        rho = 0.0
    diffs = {}
    if T >= 2:
        d_orig, d_gen = diff_series(orig), diff_series(gen)
        diffs = {"orig": d_orig, "gen": d_gen}
    return MetricReport(
        in_deg_mmd=float(np.mean(in_mmd)), out_deg_mmd=float(np.mean(out_mmd)),
        clus_mmd=float(np.mean(clus_mmd)),
        in_ple_err=errs["in_ple"], out_ple_err=errs["out_ple"], wedge_err=errs["wedge"],
        nc_err=errs["nc"], lcc_err=errs["lcc"],
        attr_jsd=float(np.mean(js)), attr_emd=float(np.mean(em)), spearman_err=rho,
        diff_series=diffs, undefined_steps=undefined, notes=notes,
    )
