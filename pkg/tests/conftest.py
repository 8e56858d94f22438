import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from detpond.config import build_model, default_config
from detpond.learning import q_learn
from detpond.synthesis import DecisionGrid, synthesize_safe

import tank_fixture


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def pond_model(cfg):
    return build_model(cfg)


@pytest.fixture(scope="session")
def pond_shield(cfg, pond_model):
    grid = DecisionGrid(pond_model.max_level_cm, cfg.n_w,
                        pond_model.axis2_max, cfg.n_s)
    return synthesize_safe(pond_model, grid, margin_m3=cfg.margin_m3,
                           dry_bucket_min=cfg.dry_bucket_min,
                           rain_bucket_min=cfg.rain_bucket_min)


@pytest.fixture(scope="session")
def pond_policy_empty(cfg, pond_model, pond_shield):
    """The learned strategy: trained from the empty pond, config seed."""
    policy, _ = q_learn(pond_model, pond_shield, 0.0, cfg.s0_mm,
                        params=cfg.learn, seed=cfg.seed)
    return policy


@pytest.fixture(scope="session")
def tank():
    """Tiny tank instance: (model, grid, shield)."""
    model = tank_fixture.make_model()
    grid = tank_fixture.make_grid(model)
    shield = synthesize_safe(model, grid)
    return model, grid, shield
