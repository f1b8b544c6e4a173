import json

import numpy as np
import pytest
import torch

from dyngraphgen.graph_store import Standardizer
from dyngraphgen.model import (MANIFEST_FILE, DynamicGraphModel, ModelConfig, load_model, parameter_vector,
                               save_model)


def _cfg(**kw):
    base = dict(num_nodes=5, attr_dim=2, hidden=4, state_dim=4, enc_dim=4, latent_dim=4, time_dim=4,
                components=2, gat_heads=2)
    base.update(kw)
    return ModelConfig(**base)


def test_seeded_init_is_reproducible():
    a, b = DynamicGraphModel(_cfg(), seed=3), DynamicGraphModel(_cfg(), seed=3)
    assert np.array_equal(parameter_vector(a), parameter_vector(b))
    assert not np.array_equal(parameter_vector(a), parameter_vector(DynamicGraphModel(_cfg(), seed=4)))


def test_seeded_init_leaves_global_rng_alone():
    torch.manual_seed(0)
    expected = torch.rand(3)
    torch.manual_seed(0)
    DynamicGraphModel(_cfg(), seed=11)
    assert torch.equal(torch.rand(3), expected)


def test_save_load_round_trip(tmp_path):
    model = DynamicGraphModel(_cfg(), seed=1)
    model.set_scaler(Standardizer(np.array([1.0, -2.0]), np.array([0.5, 3.0])))
    save_model(model, tmp_path, extra={"trained_steps": 7})
    back = load_model(tmp_path)
    assert back.cfg == model.cfg
    assert np.array_equal(parameter_vector(back), parameter_vector(model))
    assert np.array_equal(back.scaler().std, [0.5, 3.0])
    manifest = json.loads((tmp_path / MANIFEST_FILE).read_text())
    assert manifest["trained_steps"] == 7
    assert manifest["shapes"]["attr_mean"] == [2]


def test_load_without_scaler(tmp_path):
    save_model(DynamicGraphModel(_cfg(), seed=1), tmp_path)
    assert load_model(tmp_path).scaler() is None


def test_tampered_manifest_rejected(tmp_path):
    save_model(DynamicGraphModel(_cfg(), seed=1), tmp_path)
    path = tmp_path / MANIFEST_FILE
    manifest = json.loads(path.read_text())
    manifest["config"]["hidden"] = 8
    path.write_text(json.dumps(manifest))
    with pytest.raises(ValueError, match="hash"):
        load_model(tmp_path)
    manifest["version"] = 99
    path.write_text(json.dumps(manifest))
    with pytest.raises(ValueError, match="version"):
        load_model(tmp_path)


def test_ablation_swaps_structure_head():
    from dyngraphgen.decoder import InnerProductHead, MixtureHead

    assert isinstance(DynamicGraphModel(_cfg()).structure, MixtureHead)
    assert isinstance(DynamicGraphModel(_cfg(use_mixture=False)).structure, InnerProductHead)


def test_config_hash_tracks_fields():
    assert _cfg().config_hash() == _cfg().config_hash()
    assert _cfg().config_hash() != _cfg(components=3).config_hash()


def test_init_ignores_default_dtype():
    wide = DynamicGraphModel(_cfg(), seed=2)
    torch.set_default_dtype(torch.float32)
    try:
        narrow = DynamicGraphModel(_cfg(), seed=2)
    finally:
        torch.set_default_dtype(torch.float64)
    assert np.array_equal(parameter_vector(wide), parameter_vector(narrow))
    assert torch.get_default_dtype() == torch.float64
