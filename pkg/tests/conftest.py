"""Shared corpora for the test suite.

The tiny corpora are generated once per session at 64x64 so tests that
need real rendered views and occupancy samples stay fast. Source scenes
get boosted full-body and back-view fractions so pair-hungry training
stages have material to work with even at 8 scenes.
"""

import pytest
import torch

from monohuman.synthcorpus.corpus import CorpusConfig, generate_corpus

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def tiny_source(tmp_path_factory):
    config = CorpusConfig(
        kind="source",
        n_scenes=8,
        seed=101,
        image_size=64,
        full_body_fraction=0.6,
        back_view_fraction=0.6,
        occ_surface=0,
        occ_uniform=0,
    )
    root = tmp_path_factory.mktemp("tiny-source")
    return generate_corpus(config, root)


@pytest.fixture(scope="session")
def tiny_target(tmp_path_factory):
    config = CorpusConfig(
        kind="target",
        n_scenes=6,
        seed=102,
        image_size=64,
        target_yaws_deg=(0, 180),
        occ_surface=800,
        occ_uniform=200,
    )
    root = tmp_path_factory.mktemp("tiny-target")
    return generate_corpus(config, root)
