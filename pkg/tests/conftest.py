import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qarag import MockEmbedder, MockGenerator, MockReranker, ModelGateway


@pytest.fixture
def mock_gateway() -> ModelGateway:
    """Echo generators, seeded random embedder, token-overlap reranker."""
    return ModelGateway(
        embedder=MockEmbedder(dimension=32, seed=7),
        tuned=MockGenerator("echo"),
        general=MockGenerator("echo"),
        reranker=MockReranker(),
    )
