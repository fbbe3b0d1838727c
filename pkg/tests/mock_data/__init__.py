"""Mock data and mock plugins for tests."""

from tests.mock_data.mock_generator import (
    EmptyAnswerPlugin,
    MockDataGenerator,
    MockFillerPlugin,
    MockPolicyPlugin,
    MockScorerPlugin,
    mock_fill,
    mock_score,
)

__all__ = [
    "MockDataGenerator",
    "MockScorerPlugin",
    "MockFillerPlugin",
    "MockPolicyPlugin",
    "EmptyAnswerPlugin",
    "mock_score",
    "mock_fill",
]
