import random
from pathlib import Path

import pytest
from hypothesis import settings
from hypothesis import strategies as st

from powl2bpmn.dsl import parse
from powl2bpmn.randgen import GenConfig, random_process

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
GOLDEN = Path(__file__).resolve().parent / "golden"
CORPUS_FILES = sorted(CORPUS.glob("*.powl"))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def processes(cfg: GenConfig | None = None):
    """Hypothesis strategy: random models drawn from the seeded generator."""
    return st.integers(0, 2**32).map(lambda seed: random_process(random.Random(seed), cfg or GenConfig()))


def seeded_models(n: int, cfg: GenConfig, seed: int = 0):
    rng = random.Random(seed)
    return [random_process(rng, cfg, name=f"m{k}") for k in range(n)]


def load(stem: str):
    (path,) = [p for p in CORPUS_FILES if p.stem.startswith(stem + "_")]
    return parse(path.read_text(encoding="utf-8"))


@pytest.fixture(params=CORPUS_FILES, ids=lambda p: p.stem)
def corpus_file(request) -> Path:
    return request.param
