"""Primary acceptance criteria, one test each.

Every test records a PASS/FAIL line (shown in the terminal summary and
printed immediately) and then asserts it.
"""
import math
import statistics
import time

import numpy as np
import pytest

from clam.baselines import lloyd_kmeans
from clam.basins import compute_basins, random_memories
from clam.config import PRESETS
from clam.datasets import gen_elongated, load_bundled
from clam.dynamics import DynamicsConfig, ParticleState, PrototypeSet, energy, run_recursion
from clam.inference import infer
from clam.metrics import ari, nmi, silhouette
from clam.training import MaskSpec, TrainConfig, train

from oracles import ari_brute, nmi_brute, silhouette_brute
from test_autograd import _fd_check


def _report(criterion, name, passed, detail, capsys):
    criterion(name, passed, detail)
    with capsys.disabled():
        print(f"\n{'PASS' if passed else 'FAIL'}  {name}  {detail}")
    assert passed, f"{name}: {detail}"


def test_gradient_check(criterion, capsys):
    t0 = time.perf_counter()
    worst = max(_fd_check(seed, log10_beta=(-3, math.log10(5))) for seed in range(120))
    elapsed = time.perf_counter() - t0
    _report(criterion, "gradient check", worst <= 1e-4 and elapsed < 10,
            f"120 configs, max rel err {worst:.2e} (<= 1e-4), {elapsed:.1f}s (< 10s)", capsys)


def test_energy_descent(criterion, capsys):
    t0 = time.perf_counter()
    worst = -np.inf
    for seed in range(1000):
        rng = np.random.default_rng(10_000 + seed)
        k, d, T = int(rng.integers(1, 6)), int(rng.integers(1, 6)), int(rng.integers(1, 16))
        scale = float(10 ** rng.uniform(-1, 1))
        protos = PrototypeSet(rng.normal(size=(k, d)) * scale)
        cfg = DynamicsConfig(float(10 ** rng.uniform(-3, 2)), T)  # step factor 1/T
        _, traj = run_recursion(ParticleState(rng.normal(size=d) * scale), protos, cfg, trajectory=True)
        E = [energy(x, protos, cfg) for x in traj]
        worst = max(worst, max(b - a for a, b in zip(E, E[1:])))
    elapsed = time.perf_counter() - t0
    _report(criterion, "energy descent", worst <= 1e-9 and elapsed < 5,
            f"1000 trials, max rise {worst:.2e} (<= 1e-9), {elapsed:.1f}s (< 5s)", capsys)


def test_clamp_invariant(criterion, capsys):
    violations = 0
    for seed in range(1000):
        rng = np.random.default_rng(20_000 + seed)
        k, d = int(rng.integers(1, 6)), int(rng.integers(2, 8))
        v = rng.normal(size=d) * 3
        obs = rng.random(d) < 0.5
        cfg = DynamicsConfig(float(10 ** rng.uniform(-2, 2)), int(rng.integers(1, 20)))
        _, traj = run_recursion(ParticleState(v, obs, v), PrototypeSet(rng.normal(size=(k, d))), cfg,
                                trajectory=True)
        violations += sum(not np.array_equal(x[obs], v[obs]) for x in traj)
    _report(criterion, "clamp invariant", violations == 0, f"1000 recursions, {violations} violating steps", capsys)


def test_basin_map(criterion, capsys):
    t0 = time.perf_counter()
    betas = (0.001, 1.0, 10.0, 100.0)
    ok, lines = True, []
    for seed in range(5):
        protos = random_memories(3, seed)
        agree = [compute_basins(protos, DynamicsConfig(b, 10), resolution=(200, 200)).agreement for b in betas]
        monotone = all(b >= a for a, b in zip(agree, agree[1:]))
        ok &= agree[-1] >= 0.99 and agree[0] < 0.95 and monotone
        lines.append("/".join(f"{a:.3f}" for a in agree))
    elapsed = time.perf_counter() - t0
    _report(criterion, "basin map vs Voronoi", ok and elapsed < 30,
            f"5 memory sets, agreement at beta {betas}: {', '.join(lines)}; {elapsed:.1f}s (< 30s)", capsys)


def test_collective_cancellation(criterion, capsys):
    t0 = time.perf_counter()
    protos = PrototypeSet([[-1.0, 0.0], [0.0, 0.9], [0.0, -0.9]])
    x = np.zeros((1, 2))
    far = np.argmax(np.linalg.norm(protos.memories - x, axis=1))
    small = int(infer(x, protos, DynamicsConfig(0.001, 10)).labels[0])
    large = int(infer(x, protos, DynamicsConfig(100.0, 10)).labels[0])
    elapsed = time.perf_counter() - t0
    _report(criterion, "collective cancellation", small == far and large in (1, 2) and elapsed < 1,
            f"beta=0.001 -> memory {small} (farthest {far}); beta=100 -> memory {large} (nearest 1/2); {elapsed:.2f}s", capsys)


# -- Zoo ----------------------------------------------------------------------

def _zoo_run(variant):
    data = load_bundled("zoo")
    p = PRESETS["zoo"]
    dyn = DynamicsConfig(p["beta"], p["steps"])
    cfg = TrainConfig(batch_size=p["batch"], max_epochs=200, restarts=10, initial_lr=p["lr"], variant=variant)
    rep = train(data, p["k"], dyn, MaskSpec(p["mask_prob"], p["mask_fill"]), cfg)
    return silhouette(data, infer(data, rep.best_protos, dyn).labels)


@pytest.fixture(scope="module")
def zoo_masked():
    t0 = time.perf_counter()
    sc = _zoo_run("masked")
    return sc, time.perf_counter() - t0


def test_zoo_band(criterion, capsys, zoo_masked):
    t0 = time.perf_counter()
    data = load_bundled("zoo")
    lloyd = lloyd_kmeans(data, 7, n_init=1000, seed=0)
    lloyd_sc = silhouette(data, lloyd.labels)
    sc, clam_time = zoo_masked
    elapsed = time.perf_counter() - t0 + clam_time
    ok = sc >= 0.38 and abs(lloyd_sc - 0.374) <= 0.02 and sc > lloyd_sc and elapsed < 120
    _report(criterion, "Zoo band", ok,
            f"ClAM SC {sc:.4f} (>= 0.38), Lloyd SC {lloyd_sc:.4f} (0.374 +- 0.02), {elapsed:.1f}s (< 120s)", capsys)


def test_masking_ablation(criterion, capsys, zoo_masked):
    masked = zoo_masked[0]
    unmasked = _zoo_run("unmasked")
    _report(criterion, "masked vs unmasked loss", masked >= unmasked - 0.005,
            f"Zoo SC masked {masked:.4f}, unmasked {unmasked:.4f}", capsys)


def test_elongated_clusters(criterion, capsys):
    data = gen_elongated(n_per_cluster=500, n_clusters=2, seed=0)
    lloyd_nmi = nmi(data.labels, lloyd_kmeans(data, 2, n_init=1000, seed=0).labels)
    dyn = DynamicsConfig(1.0, 10)
    rep = train(data, 2, dyn, MaskSpec(0.5, "mean"),
                TrainConfig(batch_size=32, max_epochs=100, restarts=10, initial_lr=0.1))
    clam_nmi = nmi(data.labels, infer(data, rep.best_protos, dyn).labels)
    _report(criterion, "elongated clusters", clam_nmi > lloyd_nmi and lloyd_nmi < 0.9,
            f"NMI ClAM {clam_nmi:.4f} vs Lloyd best-of-1000 {lloyd_nmi:.4f}", capsys)


def test_metric_oracles(criterion, capsys):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(3, 9))
        X = rng.normal(size=(n, 2))
        a = rng.integers(0, 3, size=n)
        a[:2] = [0, 1]
        b = rng.integers(0, 4, size=n)
        worst = max(worst, abs(silhouette(X, a) - silhouette_brute(X, a)),
                    abs(nmi(a, b) - nmi_brute(a, b)), abs(ari(a, b) - ari_brute(a, b)))
    fixed = [0, 0, 1, 1, 2, 2], [0, 0, 0, 1, 1, 1]
    worst = max(worst, abs(nmi(*fixed) - nmi_brute(*fixed)), abs(ari(*fixed) - ari_brute(*fixed)))
    trivial = nmi(fixed[0], fixed[0]) == 1.0 and ari(fixed[0], fixed[0]) == 1.0
    _report(criterion, "metric oracles", worst <= 1e-9 and trivial,
            f"201 instances (n <= 8), max abs diff {worst:.1e}; identical partitions exact: {trivial}", capsys)


def test_runtime_scaling(criterion, capsys):
    dyn = DynamicsConfig(1.0, 10)
    cfg = TrainConfig(batch_size=64, max_epochs=2, restarts=2)

    def timed(n):
        X = np.random.default_rng(0).normal(size=(n, 8))
        t0 = time.perf_counter()
        rep = train(X, 6, dyn, MaskSpec(0.2, "zero"), cfg)
        t1 = time.perf_counter()
        for _ in range(5):
            infer(X, rep.best_protos, dyn)
        return t1 - t0, time.perf_counter() - t1

    runs = [(timed(10_000), timed(20_000)) for _ in range(3)]
    train_ratio = statistics.median(b[0] / a[0] for a, b in runs)
    infer_ratio = statistics.median(b[1] / a[1] for a, b in runs)
    _report(criterion, "runtime scaling", train_ratio <= 2.5 and infer_ratio <= 2.5,
            f"n 1e4 -> 2e4: train x{train_ratio:.2f}, infer x{infer_ratio:.2f} (<= 2.5, median of 3)", capsys)
