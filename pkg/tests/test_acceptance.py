"""Acceptance gate.  ``pytest tests/test_acceptance.py`` prints one PASS/FAIL
line per criterion in the terminal summary."""
import hashlib

import numpy as np
import pytest

from pointlca.decoder import decode_max_activation, decode_max_sum, evaluate, measure_sparsity, round_m_hat
from pointlca.event_cloud import PointCloud, encode_canonical, load_events, normalize_cloud, write_canonical
from pointlca.featfile import load_features, save_features
from pointlca.lca import (
    Dictionary, LcaParams, build_dictionary, compute_gramian, driving_input, lca_encode,
    load_dictionary, save_dictionary,
)
from pointlca.pointnet import extract_features, load_weights, random_weights, save_weights
from pointlca.workload import energy_estimate, inference_flops_sparse, training_flops

from .conftest import make_stream, random_unit_dictionary
from .oracles.ista import enumerate_fixed_points, ista

criterion = pytest.mark.criterion

N_FEAT = 1024
# dataset, M, m_hat, training TFLOPs, inference GFLOPs, energy (J) as reported
TABLE = [
    ("NMNIST", 60000, 240, 3.7, 3, 0.27e-3),
    ("DVS128", 28600, 114, 0.84, 0.7, 0.065e-3),
    ("SHD", 8156, 33, 0.07, 0.07, 6.4e-6),
]
EXACT_TRAINING = {60000: 3_684_661_410_000, 28600: 837_211_332_100, 8156: 68_091_911_562}
EXACT_INFERENCE = {60000: 3_008_820_000, 28600: 713_484_200, 8156: 71_340_532}


def _decimals(reported):
    text = repr(float(reported)).rstrip("0").rstrip(".")
    return len(text.split(".")[1]) if "." in text else 0


def _matches_reported(value, reported, rel=0.02):
    rounded = round(value, _decimals(reported))
    return abs(rounded - reported) <= rel * reported


# 1 -----------------------------------------------------------------------------

@criterion(1, "workload: training and sparse-inference FLOPs reproduce the workload table")
@pytest.mark.parametrize("name, M, m_hat, train_t, infer_g, _", TABLE)
def test_workload_exactness(name, M, m_hat, train_t, infer_g, _):
    tr = training_flops(M, N_FEAT)
    inf = inference_flops_sparse(100, N_FEAT, M, m_hat)
    assert tr == EXACT_TRAINING[M]
    assert inf == EXACT_INFERENCE[M]
    assert _matches_reported(tr / 1e12, train_t), (name, tr / 1e12, train_t)
    assert _matches_reported(inf / 1e9, infer_g), (name, inf / 1e9, infer_g)


# 2 -----------------------------------------------------------------------------

@criterion(2, "energy: 0.27 mJ / 0.065 mJ / 6.4 uJ within 2% at 9.09e-14 J/FLOP")
@pytest.mark.parametrize("name, M, m_hat, _t, _i, joules", TABLE)
def test_energy(name, M, m_hat, _t, _i, joules):
    e = energy_estimate(inference_flops_sparse(100, N_FEAT, M, m_hat), 9.09e-14)
    assert abs(e - joules) <= 0.02 * joules, (name, e, joules)


# 3 -----------------------------------------------------------------------------

@criterion(3, "LCA final activations match an ISTA LASSO oracle to 1e-3 on 120 random instances")
def test_lca_matches_ista():
    g = np.random.default_rng(20241014)
    worst = 0.0
    for inst in range(120):
        M = int(g.integers(1, 17))
        N = int(g.integers(M, 33))
        lam = (0.05, 0.2)[inst % 2]
        Phi = random_unit_dictionary(g, N, M)
        s = g.normal(size=N)
        s_hat = s / np.linalg.norm(s)
        d = Dictionary(Phi, list(range(M)))
        act = lca_encode(driving_input(s, d), compute_gramian(d), LcaParams(lam=lam, tau=10, dt=1, steps=2000))
        err = float(np.max(np.abs(act.a - ista(Phi, s_hat, lam))))
        worst = max(worst, err)
        assert err <= 1e-3, (inst, M, N, lam, err)
    print(f"worst |a_lca - a_ista|_inf = {worst:.2e}")


# 4 -----------------------------------------------------------------------------

@criterion(4, "fixed points: M=1 -> 0.8 and M=2 -> (0.8, 0.0) to 1e-3")
def test_fixed_point_examples():
    one = lca_encode(np.array([1.0]), np.eye(1), LcaParams(lam=0.2, tau=10, dt=1, steps=200))
    assert abs(one.a[0] - 0.8) <= 1e-3
    G = np.array([[1.0, 0.5], [0.5, 1.0]])
    b = np.array([1.0, 0.6])
    (u_star, a_star), = enumerate_fixed_points(b, G, 0.2)
    np.testing.assert_allclose(u_star, [1.0, 0.2], atol=1e-12)
    two = lca_encode(b, G, LcaParams(lam=0.2, tau=10, dt=1, steps=500))
    assert np.max(np.abs(two.a - np.array([0.8, 0.0]))) <= 1e-3


# 5 -----------------------------------------------------------------------------

@criterion(5, "permutation invariance: 100 clouds x 10 permutations bitwise identical")
def test_permutation_invariance():
    w = random_weights(2024)
    g = np.random.default_rng(5)
    for c in range(100):
        cloud = normalize_cloud(PointCloud(g.normal(size=(32, 3))))
        base = extract_features(cloud, w)
        assert base.shape == (1024,)
        for _ in range(10):
            perm = PointCloud(cloud.points[g.permutation(32)])
            assert extract_features(perm, w).tobytes() == base.tobytes(), c


# 6 -----------------------------------------------------------------------------

EXEMPLAR_PARAMS = LcaParams(lam=0.1, tau=10, steps=200, dt=0.25)


def _exemplar_task(seed=7, classes=10, per_class=50, test_per_class=20, dim=N_FEAT):
    g = np.random.default_rng(seed)
    centers = g.normal(size=(classes, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    cos = centers @ centers.T - 2 * np.eye(classes)
    assert np.degrees(np.arccos(cos.max())) >= 60.0

    def sample(c):
        d = g.normal(size=dim)
        d -= (d @ c) * c
        d /= np.linalg.norm(d)
        theta = np.radians(g.uniform(0.0, 10.0))
        return np.cos(theta) * c + np.sin(theta) * d

    train = [(sample(centers[k]), str(k)) for k in range(classes) for _ in range(per_class)]
    test = [(sample(centers[k]), str(k)) for k in range(classes) for _ in range(test_per_class)]
    return train, test


@pytest.fixture(scope="module")
def exemplar_run():
    train, test = _exemplar_task()
    d = build_dictionary([f for f, _ in train], [lab for _, lab in train])
    G = compute_gramian(d)
    acts = [lca_encode(driving_input(f, d), G, EXEMPLAR_PARAMS) for f, _ in test]
    return d, G, test, acts


@criterion(6, "exemplar recovery: 10 classes x 50 exemplars, max-sum top-1 >= 0.95")
def test_exemplar_recovery(exemplar_run):
    d, _, test, acts = exemplar_run
    rep = evaluate([decode_max_sum(a, d.labels) for a in acts], [lab for _, lab in test], acts, d.M)
    print(f"max-sum top-1 = {rep.top1_accuracy:.4f}, m_hat = {rep.m_hat:.2f}")
    assert rep.top1_accuracy >= 0.95


def test_exemplar_task_unstable_at_unit_dt(exemplar_run):
    # 50 near-parallel atoms per class: Gram block eigenvalue ~ 48 exceeds the
    # explicit-Euler limit 2 * tau / dt = 20, so dt = 1 must trip the guard.
    from pointlca.errors import LcaDivergenceError

    d, G, test, _ = exemplar_run
    with pytest.raises(LcaDivergenceError):
        lca_encode(driving_input(test[0][0], d), G, LcaParams(lam=0.1, tau=10, steps=200, dt=1.0))


# 7 -----------------------------------------------------------------------------

@criterion(7, "decoder divergence: (0.5, 0.3, 0.3) / (A, B, B) -> A vs B")
def test_decoder_divergence():
    a = np.array([0.5, 0.3, 0.3])
    assert decode_max_activation(a, ["A", "B", "B"]).predicted_class == "A"
    assert decode_max_sum(a, ["A", "B", "B"]).predicted_class == "B"


# 8 -----------------------------------------------------------------------------

@criterion(8, "sparsity accounting: m_hat equals a brute-force recount; 0.4% gives 240/114/33")
def test_sparsity_accounting(exemplar_run):
    d, G, test, acts = exemplar_run
    subset = [0, 57, 133, 199]
    recount, steps = 0, 0
    for idx in subset:
        b = driving_input(test[idx][0], d)
        for k in range(1, EXEMPLAR_PARAMS.steps + 1):
            p = LcaParams(EXEMPLAR_PARAMS.lam, EXEMPLAR_PARAMS.tau, k, EXEMPLAR_PARAMS.dt)
            recount += int(np.count_nonzero(lca_encode(b, G, p).a))
            steps += 1
    assert measure_sparsity([acts[i] for i in subset], d.M) == recount / steps
    for M, expected in ((60000, 240), (28600, 114), (8156, 33)):
        assert round_m_hat(0.004 * M) == expected


# 9 -----------------------------------------------------------------------------

def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@criterion(9, "format round-trips keep digests; 5-byte ATIS record decodes exactly")
def test_format_roundtrips(tmp_path):
    s = make_stream(777, seed=9)
    write_canonical(s, tmp_path / "a.evc")
    write_canonical(load_events(tmp_path / "a.evc"), tmp_path / "b.evc")
    assert _digest(tmp_path / "a.evc") == _digest(tmp_path / "b.evc")

    F = np.random.default_rng(1).random((6, 1024))
    save_features(F, list("aabbcc"), tmp_path / "a.feat")
    save_features(*load_features(tmp_path / "a.feat"), tmp_path / "b.feat")
    assert _digest(tmp_path / "a.feat") == _digest(tmp_path / "b.feat")

    save_dictionary(build_dictionary(F, list("aabbcc")), tmp_path / "a.lcad")
    save_dictionary(load_dictionary(tmp_path / "a.lcad"), tmp_path / "b.lcad")
    assert _digest(tmp_path / "a.lcad") == _digest(tmp_path / "b.lcad")

    save_weights(random_weights(9), tmp_path / "a.pnw")
    save_weights(load_weights(tmp_path / "a.pnw"), tmp_path / "b.pnw")
    assert _digest(tmp_path / "a.pnw") == _digest(tmp_path / "b.pnw")

    (tmp_path / "e.bin").write_bytes(bytes([0x0A, 0x14, 0x80, 0x00, 0x64]))
    ev = load_events(tmp_path / "e.bin", "nmnist-bin")[0]
    assert (ev.x, ev.y, ev.polarity, ev.t) == (10, 20, True, 100)
    assert encode_canonical(load_events(tmp_path / "e.bin", "nmnist-bin"))[20:] == bytes(
        [10, 0, 20, 0, 100, 0, 0, 0, 1])


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
