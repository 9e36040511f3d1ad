"""Step-level MCTS preference collection and reward-guided beam search.

Config arguments are dicts of dotted keys as in the config file, for
example {"mcts.n_iteration": 200, "search.beam_size": 3}.
"""

import json
from typing import Dict, Iterable, List, Optional, Tuple

from . import _core
from ._core import ConfigError, EmptyRender, ParseError, ReplayMiss, TransportError, TreeError

__all__ = [
    "ConfigError",
    "EmptyRender",
    "ParseError",
    "ReplayMiss",
    "TransportError",
    "TreeError",
    "VIEWS",
    "build_dataset",
    "evaluate",
    "extract_answer",
    "extract_pairs",
    "generate_corpus",
    "render_pair",
    "run_cli",
    "run_mcts",
    "validate_tree",
    "verify",
]

VIEWS = ("full_context", "math_only", "single_step_math_only", "next_thought")


def _config(config: Optional[Dict]) -> str:
    return json.dumps(config or {})


def _jsonl(lines: str) -> List[Dict]:
    return [json.loads(line) for line in lines.splitlines() if line]


def extract_answer(text: str, spec: str = "the_answer_is") -> Optional[Dict]:
    """Final answer in `text` as {raw, numeric, kind}, or None."""
    found = _core.extract_answer(text, spec)
    return None if found is None else json.loads(found)


def verify(found: str, gold: str) -> bool:
    return _core.verify(found, gold)


def generate_corpus(spec: str) -> List[Dict]:
    """Synthetic corpus entries from a `start,target,ops,depth,noise,count,seed` spec."""
    return _jsonl(_core.generate_corpus(spec))


def run_mcts(entry: Dict, config: Optional[Dict] = None) -> str:
    """Runs MCTS on one synthetic corpus entry; returns the tree file text."""
    return _core.run_mcts(json.dumps(entry), _config(config))


def extract_pairs(tree: str, config: Optional[Dict] = None, statement: str = "") -> List[Dict]:
    return _jsonl(_core.extract_pairs(tree, _config(config), statement))


def validate_tree(tree: str) -> List[str]:
    """Structural and count violations of a tree file; empty when sound."""
    return _core.validate_tree(tree)


def build_dataset(
    pairs: Iterable[Dict], view: str, include_statement: bool = False, pointwise: bool = False
) -> List[Dict]:
    text = "".join(json.dumps(p) + "\n" for p in pairs)
    return _jsonl(_core.build_dataset(text, view, include_statement, pointwise))


def render_pair(pair: Dict, view: str, include_statement: bool = False) -> Tuple[str, str]:
    out = json.loads(_core.render_pair(json.dumps(pair), view, include_statement))
    return out["chosen"], out["rejected"]


def evaluate(
    corpus: Iterable[Dict],
    scorer: str = "oracle",
    view: str = "full_context",
    config: Optional[Dict] = None,
    workers: int = 1,
) -> Dict:
    """Beam search over a synthetic corpus.

    `scorer` is "oracle", "noisy:<sigma>:<seed>" or "random:<seed>". The
    report carries one trace JSONL string per problem under "traces".
    """
    text = "".join(json.dumps(e) + "\n" for e in corpus)
    return json.loads(_core.evaluate(text, scorer, view, _config(config), workers))


def run_cli(args: List[str]) -> Tuple[int, str, str]:
    """Runs the command-line tool in-process; returns (exit code, stdout, stderr)."""
    return _core.run_cli(list(args))
