from __future__ import annotations

import pytest

from decisive import models


@pytest.fixture(scope="session")
def pacman():
    return models.load("pacman")


@pytest.fixture(scope="session")
def pacman_strong():
    return models.load("pacman_strong")


@pytest.fixture(scope="session")
def ladder():
    return models.load("ladder")


@pytest.fixture(scope="session")
def half():
    return models.load("half")


@pytest.fixture(scope="session")
def walk():
    return models.load("random_walk")
