"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are collected in RESULTS and echoed in the pytest terminal summary
(see conftest.py); run this file directly to see them without pytest.
Tolerances and time limits are pinned as module constants.
"""

import json
import math
import os
import subprocess
import sys
import time

import numpy as np
from sklearn.metrics import adjusted_rand_score

from oracles import (
    brute_max_clique,
    brute_maximal_cliques,
    is_clique,
    monte_carlo_overlap,
    random_graph,
    rotation_from_euler,
    spearman,
)
from vpcluster.calibration import PairSample, calibrate, roc_curve, select_threshold
from vpcluster.clustering import bron_kerbosch, clique_clustering, clique_clusters
from vpcluster.evaluation import MaskCache, frame_metrics, window_metrics
from vpcluster.geometry import (
    ViewportSpec,
    euler_to_orientation,
    geodesic_distance,
    pairwise_overlap,
    random_orientations,
    sphere_grid,
    view_direction,
)
from vpcluster.graph import AffinityMatrix, FrameGraph, build_affinity, build_frame_graph
from vpcluster.ingestion import SynthConfig, TraceDataset, synth_traces
from vpcluster.pipeline import ALGORITHMS, cluster_window, frame_window, windows_for

G_TH = math.pi / 10
SPEARMAN_MAX = -0.9
MC_TOL = 0.02
MC_SAMPLES = 1_000_000

LIMIT_S = {1: 30, 2: 60, 3: 120, 4: 10, 5: 30, 6: 300, 7: 5, 8: 60}

# criterion 6 protocol: moderate concentration, attractors drifting at 0.3 rad/s
C6_SEEDS = range(10)
C6_KAPPA = 100.0
C6_SPEED = 0.3
C6_REQUIRED = 9
# reported alongside, not gating: noisier runs where pairwise spreads approach G_th
C6_SENSITIVITY_KAPPAS = (30.0, 50.0)

RESULTS: list[str] = []


def record(n: int, ok: bool, elapsed: float, detail: str) -> None:
    ok = ok and elapsed < LIMIT_S[n]
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail} ({elapsed:.1f}s, limit {LIMIT_S[n]}s)"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _spec_grid():
    return ViewportSpec.from_degrees(100.0, 100.0), sphere_grid(10000)


# ---------------------------------------------------------------------------

def test_criterion_1_clique_soundness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    failures = 0
    n_graphs = 0
    for density in (0.1, 0.3, 0.6):
        for _ in range(170):
            n = int(rng.integers(1, 65))
            a = random_graph(rng, n, density)
            c = clique_clustering(AffinityMatrix(a, 0, 1, 1))
            members = sorted(v for cl in c.clusters for v in cl)
            ok = members == list(range(n)) and all(is_clique(a, cl) for cl in c.clusters)
            failures += not ok
            n_graphs += 1
    record(1, failures == 0, time.perf_counter() - t0,
           f"{n_graphs - failures}/{n_graphs} random matrices give disjoint, exhaustive cliques")


def test_criterion_2_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    bk_ok = 0
    for i in range(210):
        a = random_graph(rng, int(rng.integers(1, 13)), (0.15, 0.4, 0.7)[i % 3])
        bk_ok += bron_kerbosch(a) == brute_maximal_cliques(a)
    q1_ok = 0
    n_q1 = 60
    for i in range(n_q1):
        a = random_graph(rng, int(rng.integers(1, 17)), (0.2, 0.5, 0.8)[i % 3])
        q1_ok += len(clique_clusters(a)[0]) == len(brute_max_clique(a))
    record(2, bk_ok == 210 and q1_ok == n_q1, time.perf_counter() - t0,
           f"BK = brute force on {bk_ok}/210 graphs (n<=12); |Q_1| = max clique on {q1_ok}/{n_q1} (n<=16)")


def test_criterion_3_geometry_anchors():
    t0 = time.perf_counter()
    spec, grid = _spec_grid()
    rng = np.random.default_rng(3)
    dists, overlaps = [], []
    for _ in range(2000):
        a, b = random_orientations(rng, 2)
        dists.append(geodesic_distance(view_direction(a), view_direction(b)))
        overlaps.append(pairwise_overlap(a, b, spec, grid))
    dists, overlaps = np.array(dists), np.array(overlaps)
    rho = spearman(dists, overlaps)
    high = overlaps > 0.75
    max_d = float(dists[high].max()) if high.any() else 0.0
    ok_a = rho <= SPEARMAN_MAX
    ok_b = bool(np.all(dists[high] < 3 * math.pi / 4))

    worst = 0.0
    for cfg in range(20):
        r = np.random.default_rng(100 + cfg)
        h, v = np.radians(r.uniform(60, 120, 2))
        yaw, pitch, roll = r.uniform(-math.pi, math.pi), r.uniform(-1.2, 1.2), r.uniform(-math.pi, math.pi)
        dy, dp, dr = r.uniform(-0.6, 0.6), r.uniform(-0.4, 0.4), r.uniform(-0.8, 0.8)
        o1 = euler_to_orientation(yaw, pitch, roll)
        o2 = euler_to_orientation(yaw + dy, pitch + dp, roll + dr)
        ours = pairwise_overlap(o1, o2, ViewportSpec(h, v), grid)
        ref = monte_carlo_overlap([rotation_from_euler(yaw, pitch, roll),
                                   rotation_from_euler(yaw + dy, pitch + dp, roll + dr)],
                                  h, v, MC_SAMPLES, seed=cfg)
        worst = max(worst, abs(ours - ref))
    ok_c = worst <= MC_TOL
    record(3, ok_a and ok_b and ok_c, time.perf_counter() - t0,
           f"(a) Spearman {rho:.3f} <= {SPEARMAN_MAX}; (b) {int(high.sum())} pairs with overlap > 0.75, "
           f"max distance {max_d:.3f} < 3pi/4 = {3 * math.pi / 4:.3f}; "
           f"(c) max |grid - Monte Carlo| {worst:.4f} <= {MC_TOL} over 20 configs")


def _separable_dataset(seed):
    """Tight groups (intra spread <= 0.06 rad) whose centres are >= pi/2 apart."""
    rng = np.random.default_rng(seed)
    centres = [(0.0, 0.0), (math.pi / 2, 0.0), (math.pi, 0.3), (-math.pi / 2, -0.2)]
    n_frames = 4
    q = []
    for g, (yaw, pitch) in enumerate(centres[: 2 + seed % 3]):
        for _ in range(3):
            q.append([euler_to_orientation(yaw + rng.uniform(-0.03, 0.03), pitch + rng.uniform(-0.03, 0.03),
                                           rng.uniform(-0.2, 0.2)).as_array() for _ in range(n_frames)])
    q = np.array(q)
    return TraceDataset(tuple(f"u{i}" for i in range(len(q))), 2.0, q, n_frames / 2.0)


def test_criterion_4_calibration():
    t0 = time.perf_counter()
    spec, grid = _spec_grid()
    ok_select = True
    ok_monotone = True
    picked = []
    for seed in range(6):
        res = calibrate(_separable_dataset(seed), spec, grid, frame_stride=1)
        p = next(pt for pt in res.curve if pt.threshold == res.g_th)
        ok_select &= (p.tpr, p.fpr) == (1.0, 0.0) and not res.fallback
        picked.append(res.g_th)
        ok_monotone &= all(b.tpr >= a.tpr and b.fpr >= a.fpr for a, b in zip(res.curve, res.curve[1:]))
    rng = np.random.default_rng(4)
    for _ in range(200):
        d1 = rng.uniform(0.05, 1.0)
        d2 = d1 + rng.uniform(0.05, 1.0)
        s = [PairSample(float(d), 1.0, True) for d in rng.uniform(0, d1, 30)]
        s += [PairSample(float(d), 0.0, False) for d in rng.uniform(d2, math.pi, 30)]
        curve = roc_curve(s, np.linspace(math.pi / 256, math.pi, 256))
        sel = select_threshold(curve)
        p = next(pt for pt in curve if pt.threshold == sel.threshold)
        ok_select &= (p.tpr, p.fpr) == (1.0, 0.0) and not sel.fallback
        ok_monotone &= all(b.tpr >= a.tpr and b.fpr >= a.fpr for a, b in zip(curve, curve[1:]))
        labels = rng.random(60) < 0.5
        labels[:2] = [True, False]
        noisy = [PairSample(float(d), 0.0, bool(b)) for d, b in zip(rng.uniform(0, math.pi, 60), labels)]
        c2 = roc_curve(noisy, np.linspace(math.pi / 64, math.pi, 64))
        ok_monotone &= all(b.tpr >= a.tpr and b.fpr >= a.fpr for a, b in zip(c2, c2[1:]))
    record(4, ok_select and ok_monotone, time.perf_counter() - t0,
           f"separable sets give TPR=1 with FPR=0 (trace-level g_th in "
           f"[{min(picked):.3f}, {max(picked):.3f}]); monotone on all 406 curves")


def _min_attractor_gap(ds, labels):
    """Smallest distance between per-cluster mean directions over all frames."""
    k = labels.max() + 1
    worst = math.pi
    for f in range(ds.n_frames):
        m = np.array([ds.directions[labels == c, f].mean(axis=0) for c in range(k)])
        m /= np.linalg.norm(m, axis=1, keepdims=True)
        for i in range(k):
            for j in range(i + 1, k):
                worst = min(worst, math.acos(np.clip(m[i] @ m[j], -1, 1)))
    return worst


def test_criterion_5_planted_recovery():
    t0 = time.perf_counter()
    ds, truth = synth_traces(SynthConfig(59, 3, 6.0, 30.0, 0.2, 1e4, 5))
    labels = np.array([truth[u] for u in ds.user_ids])
    gap = _min_attractor_gap(ds, labels)
    aris = {}
    for w in windows_for(ds, 3.0, 1.8):
        for name, c in cluster_window(ds, w, G_TH).items():
            aris.setdefault(name, []).append(adjusted_rand_score(labels, c.labels()))
    ok = gap >= 3 * G_TH and all(v == 1.0 for vals in aris.values() for v in vals)
    detail = ", ".join(f"{k} ARI={min(v):.3f}" for k, v in aris.items())
    record(5, ok, time.perf_counter() - t0,
           f"attractor gap {gap:.3f} >= 3 G_th = {3 * G_TH:.3f}; {detail} (2 windows, T=3 s, tau=1.8 s)")


def _beats(c, b):
    """Clique's mean_overlap_ge3 >= a baseline's; an absent value ranks lowest."""
    if b is None:
        return True
    return c is not None and c >= b


def _comparison_runs(kappa, spec, grid):
    wins = strict = 0
    rows = []
    for seed in C6_SEEDS:
        ds, _ = synth_traces(SynthConfig(59, 3, 3.0, 30.0, C6_SPEED, kappa, seed))
        cache = MaskCache(ds, spec, grid)
        (w,) = windows_for(ds, 3.0, 1.8)
        res = cluster_window(ds, w, G_TH, seed=seed)
        m = {k: window_metrics(v, ds, spec, grid, cache).mean_overlap_ge3 for k, v in res.items()}
        others = [m[k] for k in ("louvain", "kmeans1", "kmeans2")]
        win = all(_beats(m["clique"], b) for b in others)
        wins += win
        strict += win and all(b is None or m["clique"] > b for b in others)
        rows.append(f"seed {seed}: " + " ".join(
            f"{k}={'-' if v is None else f'{v:.3f}'}" for k, v in m.items()))
    return wins, strict, rows


def test_criterion_6_comparative_claim():
    t0 = time.perf_counter()
    spec, grid = _spec_grid()
    wins, strict, rows = _comparison_runs(C6_KAPPA, spec, grid)
    for r in rows:
        print("   ", r)
    for kappa in C6_SENSITIVITY_KAPPAS:
        w2, s2, _ = _comparison_runs(kappa, spec, grid)
        line = (f"[INFO] criterion 6 sensitivity, not gating: kappa={kappa:g} gives clique >= all "
                f"baselines in {w2}/{len(C6_SEEDS)} runs ({s2} strictly higher)")
        RESULTS.append(line)
        print(line)
    record(6, wins >= C6_REQUIRED, time.perf_counter() - t0,
           f"clique >= Louvain, k-means1, k-means2 in {wins}/{len(C6_SEEDS)} runs "
           f"({strict} strictly higher, the rest ties; kappa={C6_KAPPA:g}, speed={C6_SPEED} rad/s)")


def _graph(n, edges):
    a = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        a[i, j] = a[j, i] = True
    return FrameGraph(a)


def test_criterion_7_window_semantics():
    t0 = time.perf_counter()
    two_of_three = build_affinity([_graph(2, [(0, 1)]), _graph(2, [(0, 1)]), _graph(2, [])], tau=2)
    one_of_three = build_affinity([_graph(2, [(0, 1)]), _graph(2, []), _graph(2, [])], tau=2)
    mixed = build_affinity([_graph(4, [(0, 1), (2, 3)]), _graph(4, [(0, 1), (1, 2)]),
                            _graph(4, [(2, 3)])], tau=2)
    ok_hand = (bool(two_of_three.adjacency[0, 1]) and not one_of_three.adjacency[0, 1]
               and mixed.edges() == [(0, 1), (2, 3)])

    spec, grid = _spec_grid()
    ds, _ = synth_traces(SynthConfig(20, 3, 1.0, 30.0, 0.2, 300.0, 11))
    ok_eq = True
    for k in (0, 17):
        (w,) = [x for x in windows_for(ds, 1 / 30, 1 / 30, None) if x.start == k]
        windowed = cluster_window(ds, w, G_TH)
        framed = cluster_window(ds, frame_window(k), G_TH)
        graph = build_frame_graph(ds.quaternions[:, k], G_TH)
        ok_eq &= w.length == 1 and w.tau == 1
        ok_eq &= all(windowed[a] == framed[a] for a in ALGORITHMS)
        ok_eq &= bool(np.array_equal(build_affinity([graph], 1).adjacency, graph.adjacency))
        ok_eq &= (window_metrics(windowed["clique"], ds, spec, grid)
                  == frame_metrics(framed["clique"], ds.frame_orientations(k), spec, grid))
    record(7, ok_hand and ok_eq, time.perf_counter() - t0,
           "2/3 frames with tau=2 connects, 1/3 does not; T=1, tau=1 windows equal frame runs")


def _cli(args, env):
    r = subprocess.run([sys.executable, "-m", "vpcluster.cli"] + args, env=env,
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    return r


def test_criterion_8_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"fps": 30, "T": 3, "tau": 1.8, "seed": 3, "g_th": "auto"}),
                   encoding="utf-8")
    digests = []
    for run, hash_seed in (("a", "1"), ("b", "999")):
        env = dict(os.environ, PYTHONHASHSEED=hash_seed)
        out = tmp_path / run
        _cli(["synth", "--users", "59", "--clusters", "3", "--duration", "3", "--kappa", "300",
              "--seed", "3", "--out", str(out / "data")], env)
        traces = str(out / "data" / "traces.csv")
        _cli(["calibrate", "--config", str(cfg), "--input", traces, "--out", str(out / "cal")], env)
        _cli(["cluster", "--config", str(cfg), "--input", traces, "--algo", ",".join(ALGORITHMS),
              "--out", str(out / "clu")], env)
        _cli(["evaluate", "--config", str(cfg), "--input", traces, "--out", str(out / "eval")], env)
        digests.append({str(p.relative_to(out)): p.read_bytes()
                        for p in sorted(out.rglob("*")) if p.is_file()})
    same = digests[0] == digests[1]
    record(8, same and len(digests[0]) >= 10, time.perf_counter() - t0,
           f"{len(digests[0])} output files byte-identical across two runs")


if __name__ == "__main__":
    import pytest
    sys.exit(pytest.main([__file__, "-q", "-s"]))
