"""Shared fixtures: converged stationary states are expensive, so they are
computed once per session (optionally cached on disk via FLOCKSTAB_TEST_CACHE)
and reused by the unit and acceptance tests."""

import json
import os
from pathlib import Path

import numpy as np
import pytest

import flockstab as fs

FIXTURE_SEED = 12345

STANDARD_SPECS = {
    "morse": fs.morse(),
    "quasi_morse": fs.quasi_morse(),
    "generalized_morse": fs.generalized_morse(),
    "log_newtonian": fs.log_newtonian(),
}

# Refinement settings per (family, N): amplitude, horizon, and a step that
# keeps the stiffest Jacobian mode inside the RK4 stability interval.
REFINE_SETTINGS = {
    ("morse", 10): dict(refine_D=500.0, refine_T=300.0, dt=1e-3),
    ("morse", 25): dict(refine_D=500.0, refine_T=500.0, dt=1e-3),
    ("morse", 40): dict(refine_D=500.0, refine_T=500.0, dt=1e-3),
    ("morse", 100): dict(refine_D=500.0, refine_T=500.0, dt=4e-4),
    ("quasi_morse", 25): dict(refine_D=500.0, refine_T=500.0, dt=4e-3),
    ("quasi_morse", 40): dict(refine_D=500.0, refine_T=500.0, dt=4e-3),
    ("generalized_morse", 25): dict(refine_D=500.0, refine_T=500.0, dt=1e-3),
    ("generalized_morse", 40): dict(refine_D=500.0, refine_T=500.0, dt=8e-4),
    ("log_newtonian", 25): dict(refine_D=10.0, refine_T=600.0, dt=1e-3),
    ("log_newtonian", 40): dict(refine_D=10.0, refine_T=600.0, dt=1e-3),
}


def _cache_key(family: str, N: int) -> str:
    s = REFINE_SETTINGS[(family, N)]
    return (f"{family}_N{N}_seed{FIXTURE_SEED}"
            f"_D{s['refine_D']:g}_T{s['refine_T']:g}_dt{s['dt']:g}")


def compute_steady(family: str, N: int):
    """(Table1Row, StationaryConfig) at the normalized amplitude."""
    settings = REFINE_SETTINGS[(family, N)]
    row, config, _ = fs.table1_pipeline(
        STANDARD_SPECS[family], N, refine_D=settings["refine_D"],
        refine_T=settings["refine_T"], dt=settings["dt"], seed=FIXTURE_SEED)
    return row, config


def load_or_compute_steady(family: str, N: int):
    cache_dir = os.environ.get("FLOCKSTAB_TEST_CACHE")
    if not cache_dir:
        return compute_steady(family, N)
    path = Path(cache_dir) / (_cache_key(family, N) + ".json")
    if path.exists():
        with open(path) as fh:
            data = json.load(fh)
        config = fs.StationaryConfig.from_dict(data["config"])
        row = fs.Table1Row(**data["row"])
        return row, config
    row, config = compute_steady(family, N)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump({"config": config.to_dict(), "row": row.__dict__}, fh)
    return row, config


@pytest.fixture(scope="session")
def steady_cache():
    """Callable fixture: steady_cache(family, N) -> (Table1Row, StationaryConfig)."""
    memo = {}

    def get(family: str, N: int):
        key = (family, N)
        if key not in memo:
            memo[key] = load_or_compute_steady(family, N)
        return memo[key]

    return get


@pytest.fixture(scope="session")
def params():
    return fs.ModelParams(alpha=1.0, beta=5.0)


@pytest.fixture(scope="session")
def morse_n10(steady_cache):
    """Small converged Morse state for fast structural tests."""
    _, config = steady_cache("morse", 10)
    return config


def well_separated_positions(N: int, seed: int, spacing: float = 0.6,
                             box: float = 4.0) -> np.ndarray:
    """Random positions with a guaranteed minimum pair distance (flat 2N)."""
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < N:
        cand = rng.uniform(-box, box, size=2)
        if all(np.hypot(*(cand - p)) > spacing for p in pts):
            pts.append(cand)
    return np.asarray(pts).ravel()
