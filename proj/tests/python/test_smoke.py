import json
from fractions import Fraction

import pytest

import stepsearch

SPEC = "1..9,walk,add1|add3|mul2|sub1,3,0.5,6,5"


def test_answer_extraction():
    found = stepsearch.extract_answer("so 6 * 7 = 42. The answer is 42.")
    assert found["kind"] == "number"
    assert Fraction(found["numeric"]) == 42
    boxed = stepsearch.extract_answer("$10^3 = \\boxed{1000}$", "boxed")
    assert Fraction(boxed["numeric"]) == 1000
    assert stepsearch.extract_answer("no answer here") is None
    assert stepsearch.verify("42.0", "42")
    assert not stepsearch.verify("41", "42")


def test_collect_pairs_and_views():
    corpus = stepsearch.generate_corpus(SPEC)
    assert len(corpus) == 6
    config = {"mcts.n_iteration": 120, "mcts.seed": 3}
    pairs = []
    for entry in corpus:
        tree = stepsearch.run_mcts(entry, config)
        assert stepsearch.validate_tree(tree) == []
        root = json.loads(tree.splitlines()[1])
        assert root["visits"] == 120
        assert tree == stepsearch.run_mcts(entry, config)
        for pair in stepsearch.extract_pairs(tree, config, entry["statement"]):
            assert pair["gap"] > 0.7
            pairs.append(pair)
    assert pairs

    for view in stepsearch.VIEWS:
        rows = stepsearch.build_dataset(pairs, view)
        assert rows and all(r["view"] == view for r in rows)
    chosen, rejected = stepsearch.render_pair(pairs[0], "math_only")
    assert chosen != rejected
    assert "[MATH]" in chosen
    assert "[THOUGHT]" not in chosen


def test_evaluate_oracle_and_random():
    corpus = stepsearch.generate_corpus("1..9,walk,add1|add3|mul2|sub1,3,0.7,30,8")
    config = {"search.beam_size": 1, "search.candidate_count": 5}
    oracle = stepsearch.evaluate(corpus, "oracle", config=config)
    assert oracle["accuracy"] == 1.0
    assert len(oracle["traces"]) == 30
    random = stepsearch.evaluate(corpus, "random:1", config=config, workers=2)
    assert random["accuracy"] <= oracle["accuracy"]


def test_errors_map_to_python_exceptions():
    with pytest.raises(stepsearch.ConfigError):
        stepsearch.run_mcts(stepsearch.generate_corpus(SPEC)[0], {"mcts.bogus": 1})
    with pytest.raises(ValueError):
        stepsearch.build_dataset([], "bogus")
    with pytest.raises(ValueError):
        stepsearch.evaluate(stepsearch.generate_corpus(SPEC), "psychic")


def test_cli_in_process(tmp_path):
    code, out, _ = stepsearch.run_cli(["corpus", "--synthetic", SPEC, "--out", str(tmp_path / "c.jsonl")])
    assert code == 0
    assert out.startswith("6 problems")
    code, out, _ = stepsearch.run_cli(
        ["collect", "--corpus", str(tmp_path / "c.jsonl"), "--out", str(tmp_path / "run"), "--iterations", "20"]
    )
    assert code == 0
    assert out.startswith("collect: 6 trees")
    code, _, _ = stepsearch.run_cli(["frobnicate"])
    assert code == 2
