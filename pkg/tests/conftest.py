from __future__ import annotations

from importlib import resources

import pytest

from ndml.proof import config_from_meta, load

CORPUS_NAMES = ("dia_or", "dia_bot", "ax4", "axT", "axB", "axD", "axC", "pi1", "pi1p", "pi2", "pi2p")


def corpus_entry(name: str):
    d, meta = load(resources.files("ndml.corpus") / f"{name}.json")
    return d, config_from_meta(meta)


@pytest.fixture(scope="session")
def corpus():
    return {name: corpus_entry(name) for name in CORPUS_NAMES}
