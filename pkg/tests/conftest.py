"""Shared fixtures: the canonical runs and the spinodal time ladder.

The three runs mirror the shipped configs one-to-one so that the suite
and the command line exercise the same problems.  Everything here is
session-scoped because the simulations dominate the suite's runtime;
consumers treat a Trajectory as immutable.
"""

from pathlib import Path

import pytest

from gelstep import load_config, run_simulation
from gelstep.verification import refinement_study

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

LADDER = [8, 16, 32, 64]


def canonical_config(name: str):
    return load_config(str(CONFIG_DIR / f"{name}.cfg"))


@pytest.fixture(scope="session")
def equilibrium_traj():
    """Identity boundary, flat concentration: nothing should move."""
    return run_simulation(canonical_config("equilibrium"))


@pytest.fixture(scope="session")
def spinodal_traj():
    """Identity boundary, seeded noise decomposing toward the wells."""
    return run_simulation(canonical_config("spinodal"))


@pytest.fixture(scope="session")
def stretch_traj():
    """Affine boundary ramp dragging the bulk through the stripe."""
    return run_simulation(canonical_config("stretch"))


@pytest.fixture(scope="session")
def canonical_trajs(equilibrium_traj, spinodal_traj, stretch_traj):
    return {
        "equilibrium": equilibrium_traj,
        "spinodal": spinodal_traj,
        "stretch": stretch_traj,
    }


@pytest.fixture(scope="session")
def spinodal_ladder():
    """Time-step refinement of the spinodal run, M in {8, 16, 32, 64}."""
    return refinement_study(canonical_config("spinodal"), LADDER, gate="psi")
