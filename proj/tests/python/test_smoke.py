import math
import os
import tempfile

import primevo


def test_seed_library():
    names = primevo.seed_names()
    assert "transformer" in names and "primer" in names
    text = primevo.seed_program("transformer")
    assert primevo.parse_roundtrip(text) == text
    assert primevo.seed_native_scale_unit("primer") == 48


def test_flatten_matches_native_sizes():
    listing = primevo.flatten("transformer", 64, 512)
    lines = listing.splitlines()
    assert len(lines) == 39
    assert lines[0] == "(0)  INPUT"
    assert "DENSE" in listing and "BRANCH_8_INPUT_1" in listing


def test_compile_report_and_hash():
    rep = primevo.compile_report("transformer", scale_unit=4, seq=8, layers=1)
    assert rep["causality_pass"]
    assert rep["block_parameters"] > 0
    h1 = primevo.canonical_hash("transformer")
    h2 = primevo.canonical_hash("primer")
    assert h1 != h2
    ez = primevo.apply_modification(
        primevo.apply_modification("transformer", "mdha"), "squared_relu"
    )
    assert primevo.canonical_hash(ez) == primevo.canonical_hash("primer_ez")


def test_hurdles():
    s = primevo.build_hurdles(4, 25200.0)
    assert abs(s["thresholds"][0] - 812.9) < 0.1
    assert abs(s["expected_budget_perfect_halving"] - 4064.5) < 0.5
    assert abs(primevo.lr_schedule(10000, 10000, 0.01) - 0.01) < 1e-12


def test_mutation_changes_the_graph():
    child = primevo.mutate("transformer", seed=7)
    assert primevo.canonical_hash(child) != primevo.canonical_hash("transformer")


def test_training_round_trip():
    with tempfile.TemporaryDirectory() as tmp:
        corpus = os.path.join(tmp, "corpus.txt")
        with open(corpus, "wb") as f:
            f.write(primevo.synthetic_corpus(20000, seed=1))
        rec = primevo.evaluate_fitness("transformer", corpus, budget_steps=20, seq=8)
        assert not rec["degenerate"]
        assert math.isclose(rec["perplexity"], math.exp(rec["loss"]), rel_tol=1e-9)


def test_analysis():
    compute = [10.0 * i for i in range(1, 30)]
    loss = [2.0 * c ** -0.5 for c in compute]
    fit = primevo.fit_power_law(compute, loss)
    assert abs(fit["a"] - 2.0) < 1e-9 and abs(fit["k"] - 0.5) < 1e-9
    half = [c / 2 for c in compute]
    assert abs(primevo.speedup_factor(compute, loss, half, loss) - 2.0) < 1e-12
    front = primevo.pareto_front([(1.0, 2.0), (2.0, 1.0), (2.5, 1.5)])
    assert front == [0, 1]


def test_activations():
    import numpy as np

    x = np.linspace(-2, 2, 24).reshape(1, 4, 6)
    sq = primevo.squared_relu(x)
    assert np.allclose(sq, np.maximum(x, 0.0) ** 2)
    gelu = primevo.activation("gelu", x)
    ref = 0.5 * x * (1 + np.tanh(np.sqrt(2 / np.pi) * (x + 0.044715 * x**3)))
    assert np.allclose(gelu, ref)
