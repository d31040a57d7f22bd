"""Named experiment recipes reproducing the evaluation figures at desk scale.

Regression recipes share one tuned operating point (rho 0.85, observation
noise 1.6, FedAvg lr 0.25 matched to the flagship curve's initial rate);
classification recipes run the bundled digit data. Every recipe is a list of
named variants, each a full ExperimentConfig.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import List, Tuple

from .config import ExperimentConfig
from .errors import ConfigurationError
from .experiments import run_experiment

__all__ = ["Recipe", "RECIPES", "get_recipe", "recipe_summaries", "run_recipe"]


@dataclasses.dataclass
class Recipe:
    name: str
    description: str
    variants: List[Tuple[str, ExperimentConfig]]


def _regression(**overrides) -> ExperimentConfig:
    base = dict(
        algorithm="pgfl",
        task="ridge",
        num_servers=10,
        clients_per_server=15,
        avg_degree=3.0,
        num_clusters=3,
        d=60,
        d_k_min=2,
        d_k_max=9,
        noise_std=1.6,
        spread=0.15,
        rho=0.85,
        lam=0.01,
        iterations=300,
        replicates=20,
        master_seed=0,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def _mnist(**overrides) -> ExperimentConfig:
    # The classification figures run with client scheduling and privacy on;
    # one client per server per round keeps the per-round data scarce enough
    # that cross-cluster mixing has something to offer.
    base = dict(
        algorithm="pgfl",
        task="logistic",
        num_servers=10,
        clients_per_server=15,
        avg_degree=3.0,
        num_clusters=3,
        rho=1.0,
        lam=0.01,
        clip_bound=1.0,
        schedule_quota=1,
        privacy_on=True,
        phi0=0.5,
        zeta=0.995,
        iterations=100,
        replicates=5,
        master_seed=0,
        test_cap=500,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


_SINGLE_DIGIT_SETS = [[[1], [8]], [[1], [9]], [[7], [8]]]
_TRIPLET_SETS = [[[1, 2, 3], [6, 7, 8]], [[1, 2, 3], [7, 8, 9]], [[1, 2, 3], [6, 8, 9]]]

_TAU_GRID = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7, 0.9]
_PHI_GRID = [0.001, 0.01, 0.1, 1.0]
_MNIST_TAU_GRID = [0.0, 0.2, 0.4, 0.7, 0.9]


def _build_recipes() -> dict:
    recipes = {}

    recipes["fig-regression-main"] = Recipe(
        name="fig-regression-main",
        description=(
            "Steady-state NMSD ordering: mixing on vs off vs FedAvg vs no "
            "inter-server exchange (full participation, no privacy)"
        ),
        variants=[
            ("pgfl-tau04", _regression(tau0=0.4)),
            ("pgfl-tau00", _regression(tau0=0.0)),
            ("fedavg", _regression(algorithm="fedavg", fedavg_lr=0.25)),
            (
                "pgfl-no-exchange",
                _regression(tau0=0.4, disable_inter_server=True),
            ),
        ],
    )

    recipes["fig-regression-scheduling"] = Recipe(
        name="fig-regression-scheduling",
        description=(
            "Same comparison under client scheduling (3 of 15 per server) "
            "and privacy noise"
        ),
        variants=[
            (
                "pgfl-tau04",
                _regression(
                    tau0=0.4, schedule_quota=3, privacy_on=True, phi0=0.1
                ),
            ),
            (
                "pgfl-tau00",
                _regression(
                    tau0=0.0, schedule_quota=3, privacy_on=True, phi0=0.1
                ),
            ),
            (
                "fedavg",
                _regression(algorithm="fedavg", fedavg_lr=0.25, schedule_quota=3),
            ),
        ],
    )

    recipes["fig-regression-low-similarity"] = Recipe(
        name="fig-regression-low-similarity",
        description=(
            "Low cluster similarity (spread 0.5): decaying tau tracks the "
            "fixed-tau rate early and the tau=0 floor late"
        ),
        variants=[
            (
                "pgfl-tau-decay",
                _regression(
                    spread=0.5, tau_kind="exponential", tau0=0.4, tau_decay=0.98
                ),
            ),
            ("pgfl-tau04", _regression(spread=0.5, tau0=0.4)),
            ("pgfl-tau00", _regression(spread=0.5, tau0=0.0)),
        ],
    )

    recipes["tau-sweep"] = Recipe(
        name="tau-sweep",
        description="NMSD after 200 iterations over a fixed-tau grid "
        "(scheduling + privacy on)",
        variants=[
            (
                f"tau-{tau:g}",
                _regression(
                    tau0=tau,
                    iterations=200,
                    schedule_quota=3,
                    privacy_on=True,
                    phi0=0.1,
                ),
            )
            for tau in _TAU_GRID
        ],
    )

    recipes["phi-sweep"] = Recipe(
        name="phi-sweep",
        description="Privacy-accuracy trade-off: NMSD after 200 iterations "
        "over an initial-leakage grid",
        variants=[
            (
                f"phi-{phi:g}",
                _regression(
                    tau0=0.4,
                    iterations=200,
                    schedule_quota=3,
                    privacy_on=True,
                    phi0=phi,
                ),
            )
            for phi in _PHI_GRID
        ],
    )

    recipes["mnist-single-digit"] = Recipe(
        name="mnist-single-digit",
        description="Digit pairs 1v8 / 1v9 / 7v8 with 2-4 samples per client, "
        "scheduling and privacy on: mixing on vs off",
        variants=[
            (
                "pgfl-tau04",
                _mnist(mnist_class_sets=_SINGLE_DIGIT_SETS, d_k_min=2, d_k_max=4, tau0=0.4),
            ),
            (
                "pgfl-tau00",
                _mnist(mnist_class_sets=_SINGLE_DIGIT_SETS, d_k_min=2, d_k_max=4, tau0=0.0),
            ),
        ],
    )

    recipes["mnist-triplet"] = Recipe(
        name="mnist-triplet",
        description="Digit-triplet tasks with 6-12 samples per client, "
        "scheduling and privacy on: mixing on vs off",
        variants=[
            (
                "pgfl-tau04",
                _mnist(mnist_class_sets=_TRIPLET_SETS, d_k_min=6, d_k_max=12, tau0=0.4),
            ),
            (
                "pgfl-tau00",
                _mnist(mnist_class_sets=_TRIPLET_SETS, d_k_min=6, d_k_max=12, tau0=0.0),
            ),
        ],
    )

    recipes["mnist-tau-sweep"] = Recipe(
        name="mnist-tau-sweep",
        description="Accuracy over the tau grid on the digit-triplet setting",
        variants=[
            (
                f"tau-{tau:g}",
                _mnist(
                    mnist_class_sets=_TRIPLET_SETS,
                    d_k_min=6,
                    d_k_max=12,
                    tau0=tau,
                ),
            )
            for tau in _MNIST_TAU_GRID
        ],
    )

    recipes["smoke"] = Recipe(
        name="smoke",
        description="Ten-iteration miniature with scheduling and privacy; "
        "exercises every subsystem in seconds",
        variants=[
            (
                "pgfl",
                ExperimentConfig(
                    num_servers=3,
                    clients_per_server=4,
                    avg_degree=1.5,
                    num_clusters=2,
                    d=8,
                    d_k_min=2,
                    d_k_max=5,
                    noise_std=0.5,
                    rho=0.85,
                    tau0=0.4,
                    schedule_quota=2,
                    privacy_on=True,
                    phi0=0.1,
                    iterations=10,
                    replicates=2,
                ),
            ),
        ],
    )
    return recipes


RECIPES = _build_recipes()


def get_recipe(name: str) -> Recipe:
    try:
        return RECIPES[name]
    except KeyError:
        known = ", ".join(sorted(RECIPES))
        raise ConfigurationError(f"unknown recipe {name!r}; choose from: {known}")


def recipe_summaries() -> str:
    lines = []
    for name in sorted(RECIPES):
        lines.append(f"  {name:30s} {RECIPES[name].description}")
    return "\n".join(lines)


def run_recipe(
    name: str,
    out_dir,
    seed: int = None,
    iterations: int = None,
    replicates: int = None,
    quiet: bool = True,
) -> dict:
    """Run every variant of a recipe into ``<out_dir>/<name>/``."""
    recipe = get_recipe(name)
    base = Path(out_dir) / recipe.name
    results = {}
    for variant, config in recipe.variants:
        overrides = {}
        if seed is not None:
            overrides["master_seed"] = seed
        if iterations is not None:
            overrides["iterations"] = iterations
        if replicates is not None:
            overrides["replicates"] = replicates
        if overrides:
            config = config.replaced(**overrides)
        results[variant] = run_experiment(config, base, name=variant, quiet=quiet)
    return results
