"""Acceptance suite.

One test per acceptance criterion, each printing a PASS line with the
measured quantities (run with ``pytest -v -s`` to see them).  Everything runs
offline: the hash embedder and the deterministic mock judge stand in for
external services.
"""

import time

import numpy as np
import pytest

from car.benchgen import gen_blobs, rescue_comparison, world_assignment, world_scores
from car.cluster import default_k, kmeans
from car.evaluation import (
    JudgeVerdict,
    MatchOutcome,
    combine_swapped,
    compute_metrics,
)
from car.pca import fit_pca, pca_transform
from car.scorer import TrainConfig, eval_pref_accuracy, pairwise_grad, pairwise_loss, split_811, train_scorer
from car.selection import SelectionConfig, car_select

from test_cli import run_chain
from test_scorer import feature_preferences
from test_selection import assignment_from_labels, brute_force_select, random_instance

A, B, T = JudgeVerdict.A, JudgeVerdict.B, JudgeVerdict.TIE
WIN, LOSE, TIE = MatchOutcome.WIN, MatchOutcome.LOSE, MatchOutcome.TIE


def note(line: str) -> None:
    print(f"\n{line}")


# reference pairwise-evaluation results: 12 method rows x 4 test sets,
# each cell (winning score, win rate %, quality score %)
TEST_SET_SIZES = {"pandalm": 170, "vicuna": 80, "coach": 150, "selfinstruct": 252}

REFERENCE_ROWS = [
    ("alpaca-pandalm-7b", (1.224, 49.4, 72.9), (0.288, 8.8, 20.0), (0.867, 28.7, 58.0), (1.075, 42.9, 64.7)),
    ("alpaca-cleaned-7b", (1.276, 53.5, 74.1), (0.300, 8.8, 21.3), (0.953, 35.3, 60.0), (1.083, 42.5, 65.9)),
    ("vicuna-7b",         (1.276, 53.5, 74.1), (0.688, 17.5, 51.3), (0.787, 23.3, 55.3), (0.877, 25.8, 61.9)),
    ("alpaca-7b",         (1.341, 54.1, 80.0), (0.363, 11.3, 25.0), (0.913, 32.7, 58.7), (1.139, 42.9, 71.0)),
    ("alpagasus-7b",      (1.324, 54.1, 78.2), (0.463, 13.8, 32.5), (0.807, 25.3, 55.3), (1.123, 44.4, 67.9)),
    ("alpacar-7b",        (1.594, 70.6, 88.8), (0.813, 27.5, 53.8), (1.020, 37.3, 64.7), (1.448, 61.9, 82.9)),
    ("alpaca-13b",        (1.365, 56.5, 80.0), (0.363, 8.8, 27.5), (0.940, 30.7, 63.3), (1.155, 45.2, 70.2)),
    ("alpagasus-13b",     (1.347, 54.7, 80.0), (0.338, 6.3, 27.5), (0.880, 28.0, 60.0), (1.230, 48.4, 74.6)),
    ("alpacar-13b",       (1.535, 65.9, 87.6), (1.025, 37.5, 65.0), (1.153, 44.0, 71.3), (1.357, 56.3, 79.4)),
    ("alpaca-30b",        (1.276, 50.0, 77.6), (0.425, 11.3, 31.3), (0.900, 28.0, 62.0), (1.155, 43.7, 71.8)),
    ("alpagasus-30b",     (1.382, 57.1, 81.2), (0.438, 8.8, 35.0), (0.920, 30.0, 62.0), (1.214, 46.8, 74.6)),
    ("alpacar-30b",       (1.553, 67.1, 88.2), (0.950, 28.8, 66.3), (1.120, 43.3, 68.7), (1.377, 57.1, 80.6)),
]

WS_TOL = 0.001
PCT_TOL = 0.1


def invert_metrics(n: int, ws: float, wr_pct: float, qs_pct: float):
    """Recover the integer (win, tie, lose) counts behind printed metrics."""
    win_guess = round(wr_pct / 100.0 * n)
    tie_guess = round(qs_pct / 100.0 * n) - win_guess
    for dw in (0, -1, 1):
        for dt in (0, -1, 1):
            win = win_guess + dw
            tie = tie_guess + dt
            lose = n - win - tie
            if min(win, tie, lose) < 0:
                continue
            report = compute_metrics([WIN] * win + [TIE] * tie + [LOSE] * lose)
            if (
                abs(report.ws - ws) <= WS_TOL
                and abs(100 * report.wr - wr_pct) <= PCT_TOL
                and abs(100 * report.qs - qs_pct) <= PCT_TOL
            ):
                return win, tie, lose
    raise AssertionError(f"no integer counts reproduce ({ws}, {wr_pct}, {qs_pct}) at n={n}")


def test_criterion_1_reference_table_arithmetic():
    start = time.perf_counter()
    cells = 0
    for row in REFERENCE_ROWS:
        name, metrics = row[0], row[1:]
        for (ws, wr, qs), n in zip(metrics, TEST_SET_SIZES.values()):
            win, tie, lose = invert_metrics(n, ws, wr, qs)
            report = compute_metrics([WIN] * win + [TIE] * tie + [LOSE] * lose)
            assert abs(report.ws - ws) <= WS_TOL, (name, n)
            assert abs(100 * report.wr - wr) <= PCT_TOL, (name, n)
            assert abs(100 * report.qs - qs) <= PCT_TOL, (name, n)
            cells += 1
    # the documented example row: 92/44/34 on the 170-sample set
    assert invert_metrics(170, 1.341, 54.1, 80.0) == (92, 44, 34)
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"criterion 1 took {elapsed:.2f}s"
    note(
        f"PASS criterion 1: {cells}/48 reference cells reproduced to "
        f"±{WS_TOL} / ±{PCT_TOL}pp in {elapsed:.2f}s"
    )
    assert cells == 48


def test_criterion_2_identity_ws_wr_qs():
    rng = np.random.default_rng(20)
    worst = 0.0
    for _ in range(10_000):
        win, lose, tie = (int(x) for x in rng.integers(0, 50, size=3))
        if win + lose + tie == 0:
            win = 1
        report = compute_metrics([WIN] * win + [LOSE] * lose + [TIE] * tie)
        worst = max(worst, abs(report.ws - (report.wr + report.qs)))
    assert worst <= 1e-12
    note(f"PASS criterion 2: WS=WR+QS on 10,000 multisets, worst gap {worst:.2e}")


def test_criterion_3_swap_combination_rules():
    expected = {
        (A, A): WIN, (A, T): WIN, (T, A): WIN,
        (B, B): LOSE, (B, T): LOSE, (T, B): LOSE,
        (T, T): TIE, (A, B): TIE, (B, A): TIE,
    }
    for pair, outcome in expected.items():
        assert combine_swapped(*pair) is outcome
    swap = {A: B, B: A, T: T}
    flip = {WIN: LOSE, LOSE: WIN, TIE: TIE}
    for (first, second), outcome in expected.items():
        assert combine_swapped(swap[first], swap[second]) is flip[outcome]
    note("PASS criterion 3: all 9 verdict combinations and the label-swap symmetry")


def test_criterion_4_selection_oracle_and_bound():
    rng = np.random.default_rng(21)
    for _ in range(200):
        scores, labels = random_instance(rng, n_max=50, k_max=6)
        n1 = int(rng.integers(0, len(scores) + 1))
        n2 = int(rng.integers(0, 4))
        result = car_select(
            scores, assignment_from_labels(labels), SelectionConfig(n1=n1, n2=n2)
        )
        assert result.selected_ids == brute_force_select(scores, labels, n1, n2)
        k = int(np.max(labels)) + 1
        assert len(result.selected_ids) <= n1 + k * n2
    # the reference configuration: n1=1000, n2=1, k=178 on 52,002 pairs gives
    # the bound 1178; the reported subset of 1,017 is consistent with it and
    # with the quoted 1.96% of the corpus, but the exact 1,017 needs the
    # original scores and is NOT reproducible here
    bound = 1000 + 178 * 1
    assert bound == 1178
    assert 1017 <= bound
    assert abs(100 * 1017 / 52_002 - 1.96) < 0.005
    note(
        "PASS criterion 4: 200 instances match the brute-force oracle; "
        "bound 1178 holds and 1017/52002 = 1.956% is consistent with 1.96% "
        "(exact 1,017 declared not reproducible without the original scores)"
    )


def test_criterion_5_selection_monotonicity():
    rng = np.random.default_rng(22)
    for world_seed in range(100):
        k = int(rng.integers(2, 7))
        size = int(rng.integers(6, 12))
        world = gen_blobs(k=k, per_cluster_n=size, dim=k, sep=8.0, seed=world_seed)
        assignment = world_assignment(world)
        scores = world_scores(world)
        score_map = dict(scores)
        n1 = int(rng.integers(0, world.n + 1))

        means = []
        for n2 in range(0, size + 1):  # grid kept within the cluster size
            result = car_select(scores, assignment, SelectionConfig(n1=n1, n2=n2))
            if result.selected_ids:
                means.append(float(np.mean([score_map[i] for i in result.selected_ids])))
        assert all(x >= y - 1e-12 for x, y in zip(means, means[1:])), world_seed

        previous: set[int] = set()
        for n1_step in range(0, world.n + 1, max(1, world.n // 7)):
            selected = set(
                car_select(
                    scores, assignment, SelectionConfig(n1=n1_step, n2=1)
                ).selected_ids
            )
            assert previous <= selected, world_seed
            previous = selected
    note(
        "PASS criterion 5: mean score non-increasing in n2 and subsets nested "
        "in n1 on 100 seeded worlds"
    )


def test_criterion_6_pca_planted_rank():
    from test_pca import planted_rank

    start = time.perf_counter()
    for r in (1, 2, 5):
        X = planted_rank(5000, r, 384, seed=30 + r)
        model = fit_pca(X, 0.95)
        assert model.m == r, f"rank {r} recovered as {model.m}"
        assert model.explained_ratio >= 0.95
        Y = pca_transform(model, X)
        reconstructed = Y @ model.components + model.mean
        centered = X - X.mean(axis=0)
        rel_sq_err = float(((X - reconstructed) ** 2).sum() / (centered**2).sum())
        assert rel_sq_err <= 1.0 - model.explained_ratio + 1e-9
        again = fit_pca(X, 0.95)
        assert again.components.tobytes() == model.components.tobytes()
        assert again.mean.tobytes() == model.mean.tobytes()
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"criterion 6 took {elapsed:.2f}s"
    note(
        f"PASS criterion 6: ranks 1/2/5 recovered at d=384, n=5000, "
        f"deterministic, Eckart-Young bound held, {elapsed:.2f}s"
    )


def test_criterion_7_kmeans():
    # the inertia monotonicity assertion runs inside every Lloyd iteration;
    # any increase raises from the implementation itself
    world = gen_blobs(k=3, per_cluster_n=40, dim=8, sep=10.0, seed=33)
    result = kmeans(world.embeddings, 3, seed=1)
    from sklearn.metrics import adjusted_rand_score

    ari = adjusted_rand_score(world.true_labels, result.labels)
    assert ari >= 0.99
    assert default_k(52_002) == 162
    note(
        f"PASS criterion 7: planted blobs recovered (ARI {ari:.3f}); "
        "default_k(52002)=162 per ceil(sqrt(n/2)); the reference experiment "
        "reports 178 clusters for the same n, which the formula cannot give; "
        "use --k 178 to match it"
    )


def test_criterion_8_scorer():
    rng = np.random.default_rng(23)
    step = 1e-5
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 8))
        d = int(rng.integers(2, 7))
        x_c = rng.normal(size=(n, d))
        x_r = rng.normal(size=(n, d))
        lam = float(rng.uniform(0.0, 0.5))
        w = rng.normal(size=d) * 0.5
        grad = pairwise_grad(w, x_c, x_r, lam)
        numeric = np.empty(d)
        for i in range(d):
            bump = np.zeros(d)
            bump[i] = step
            numeric[i] = (
                pairwise_loss(w + bump, x_c, x_r, lam)
                - pairwise_loss(w - bump, x_c, x_r, lam)
            ) / (2 * step)
        rel = float(np.linalg.norm(numeric - grad) / max(np.linalg.norm(grad), 1e-8))
        worst = max(worst, rel)
        assert rel <= 1e-5

    examples, embed_fn, _ = feature_preferences(120, 8, delta=0.5, seed=24)
    splits = split_811(examples, seed=0)
    model = train_scorer(splits["train"], embed_fn, TrainConfig(epochs=200, eta=0.1, lam=1e-4))
    accuracy = eval_pref_accuracy(model, splits["test"], embed_fn)
    assert accuracy >= 0.95
    note(
        f"PASS criterion 8: gradient vs finite differences worst rel err "
        f"{worst:.2e}; held-out accuracy {accuracy:.3f} on separable "
        "preferences (the reference 84.25% needs the 355M encoder and expert "
        "corpus, so it is declared not reproducible at desk scale)"
    )


def test_criterion_9_cli_chain_determinism(tmp_path):
    (tmp_path / "run1").mkdir()
    (tmp_path / "run2").mkdir()
    first = run_chain(tmp_path / "run1", n=90, n1=15, n2=1)
    second = run_chain(tmp_path / "run2", n=90, n1=15, n2=1)

    compared = 0
    for name, path_1 in first.items():
        path_2 = second[name]
        assert path_1.read_bytes() == path_2.read_bytes(), f"{name} differs"
        compared += 1
        for suffix in (".manifest.json",):
            side_1 = path_1.parent / (path_1.name + suffix)
            side_2 = path_2.parent / (path_2.name + suffix)
            if side_1.exists():
                body_1 = side_1.read_text().replace(str(tmp_path / "run1"), "RUN")
                body_2 = side_2.read_text().replace(str(tmp_path / "run2"), "RUN")
                assert body_1 == body_2, f"{name} manifest differs"
    # report, selection csv, and figure ride along with the subset
    for extra in (".csv", ".report.json", ".png"):
        side_1 = first["subset"].with_suffix(extra)
        side_2 = second["subset"].with_suffix(extra)
        assert side_1.read_bytes() == side_2.read_bytes(), f"subset{extra} differs"
        compared += 1
    note(
        f"PASS criterion 9: two identical chain runs produced byte-identical "
        f"artifacts ({compared} files, manifests path-normalized)"
    )


def test_criterion_10_diversity_rescue():
    start = time.perf_counter()
    world = gen_blobs(
        k=4, per_cluster_n=50, dim=6, sep=10.0, seed=35,
        quality_shifts=[0.0, 0.3, -0.2, -9.0],
    )
    rows = rescue_comparison(world, n1=60, n2=1)
    low_cluster = rows[3]
    assert low_cluster["quality_only_count"] == 0
    assert all(row["car_count"] >= 1 for row in rows)

    assignment = world_assignment(world)
    result = car_select(world_scores(world), assignment, SelectionConfig(n1=60, n2=1))
    from car.selection import selection_report

    report = selection_report(result, world_scores(world), assignment)
    assert report.cluster_coverage == 1.0
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"criterion 10 took {elapsed:.2f}s"
    note(
        f"PASS criterion 10: quality-only selection covers 0% of the shifted "
        f"cluster, cluster-supplemented selection covers 100% ({elapsed:.2f}s)"
    )
