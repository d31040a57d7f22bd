"""Experiment configuration: one flat, strictly-validated record.

Configs load from JSON with exact field names; unknown keys abort so a
result bundle's echoed config is always sufficient to reproduce it.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import List, Optional

from .core import TauSchedule
from .errors import ConfigurationError

__all__ = ["ExperimentConfig"]


@dataclasses.dataclass
class ExperimentConfig:
    algorithm: str = "pgfl"  # pgfl | fedavg
    task: str = "ridge"  # ridge | logistic

    # Topology
    num_servers: int = 10
    clients_per_server: int = 15
    avg_degree: float = 3.0
    num_clusters: int = 3

    # Regression data
    d: int = 60
    d_k_min: int = 2
    d_k_max: int = 9
    noise_std: float = 0.1
    spread: float = 0.15

    # Classification data: one [class_a_digits, class_b_digits] pair per cluster
    mnist_class_sets: Optional[List] = None
    mnist_dir: Optional[str] = None
    test_cap: int = 500

    # Objective / solver
    rho: float = 1.0
    lam: float = 0.01  # divided by clients-per-server inside the objective
    clip_bound: float = 1.0
    solver_tol: float = 1e-8
    solver_max_iters: int = 500
    clip_in_solver: Optional[bool] = None

    # Inter-cluster mixing
    tau_kind: str = "constant"
    tau0: float = 0.0
    tau_decay: float = 1.0

    # Privacy
    privacy_on: bool = False
    phi0: Optional[float] = None
    delta_sq0: Optional[float] = None
    zeta: float = 0.98
    dp_delta: float = 0.01
    privacy_advance_every_round: bool = False

    # Scheduling
    schedule_quota: Optional[int] = None  # None = full participation

    # Run shape
    iterations: int = 300
    replicates: int = 20
    master_seed: int = 0

    # Baseline knobs
    fedavg_local_steps: int = 1
    fedavg_lr: float = 0.05

    # Ablation
    disable_inter_server: bool = False

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.algorithm not in ("pgfl", "fedavg"):
            raise ConfigurationError(
                f"algorithm must be 'pgfl' or 'fedavg', got {self.algorithm!r}"
            )
        if self.task not in ("ridge", "logistic"):
            raise ConfigurationError(
                f"task must be 'ridge' or 'logistic', got {self.task!r}"
            )
        if self.num_servers < 1:
            raise ConfigurationError("num_servers must be at least 1")
        if self.clients_per_server < 1:
            raise ConfigurationError("clients_per_server must be at least 1")
        if self.avg_degree < 0:
            raise ConfigurationError("avg_degree must be nonnegative")
        if self.num_clusters < 1:
            raise ConfigurationError("num_clusters must be at least 1")
        if self.num_clusters > self.num_servers * self.clients_per_server:
            raise ConfigurationError("more clusters than clients")
        if self.d < 1:
            raise ConfigurationError("d must be at least 1")
        if not 1 <= self.d_k_min <= self.d_k_max:
            raise ConfigurationError("need 1 <= d_k_min <= d_k_max")
        if self.noise_std < 0:
            raise ConfigurationError("noise_std must be nonnegative")
        if self.spread < 0:
            raise ConfigurationError("spread must be nonnegative")
        if self.rho <= 0:
            raise ConfigurationError("rho must be positive")
        if self.lam < 0:
            raise ConfigurationError("lam must be nonnegative")
        if self.clip_bound <= 0:
            raise ConfigurationError("clip_bound must be positive")
        if self.solver_tol <= 0:
            raise ConfigurationError("solver_tol must be positive")
        if self.solver_max_iters < 1:
            raise ConfigurationError("solver_max_iters must be at least 1")
        # Constructing the schedule runs its own domain checks.
        TauSchedule(kind=self.tau_kind, tau0=self.tau0, decay=self.tau_decay)
        if self.num_clusters == 1 and self.tau0 > 0:
            raise ConfigurationError("inter-cluster mixing needs at least 2 clusters")
        if not 0.0 < self.zeta < 1.0:
            raise ConfigurationError("zeta must lie in (0, 1)")
        if not 0.0 < self.dp_delta < 1.0:
            raise ConfigurationError("dp_delta must lie in (0, 1)")
        if self.privacy_on:
            if (self.phi0 is None) == (self.delta_sq0 is None):
                raise ConfigurationError(
                    "privacy needs exactly one of phi0 or delta_sq0"
                )
            chosen = self.phi0 if self.phi0 is not None else self.delta_sq0
            if chosen <= 0:
                raise ConfigurationError("phi0 / delta_sq0 must be positive")
        if self.schedule_quota is not None and not (
            0 <= self.schedule_quota <= self.clients_per_server
        ):
            raise ConfigurationError(
                "schedule_quota must lie in [0, clients_per_server]"
            )
        if self.iterations < 1:
            raise ConfigurationError("iterations must be at least 1")
        if self.replicates < 1:
            raise ConfigurationError("replicates must be at least 1")
        if self.fedavg_local_steps < 1:
            raise ConfigurationError("fedavg_local_steps must be at least 1")
        if self.fedavg_lr < 0:
            raise ConfigurationError("fedavg_lr must be nonnegative")
        if self.test_cap < 1:
            raise ConfigurationError("test_cap must be at least 1")
        if self.task == "logistic":
            if self.mnist_class_sets is None:
                raise ConfigurationError("logistic task needs mnist_class_sets")
            if len(self.mnist_class_sets) != self.num_clusters:
                raise ConfigurationError(
                    "mnist_class_sets needs one [class_a, class_b] pair per cluster"
                )
            for pair in self.mnist_class_sets:
                if (
                    not isinstance(pair, (list, tuple))
                    or len(pair) != 2
                    or not all(isinstance(side, (list, tuple)) for side in pair)
                ):
                    raise ConfigurationError(
                        "each mnist_class_sets entry must be [class_a_list, class_b_list]"
                    )
        elif self.mnist_class_sets is not None:
            raise ConfigurationError("mnist_class_sets only applies to the logistic task")

    @property
    def lambda_over_Cs(self) -> float:
        return self.lam / self.clients_per_server

    def tau_schedule(self) -> TauSchedule:
        return TauSchedule(kind=self.tau_kind, tau0=self.tau0, decay=self.tau_decay)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def replaced(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def field_names(cls) -> set:
        return {f.name for f in dataclasses.fields(cls)}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - cls.field_names()
        if unknown:
            raise ConfigurationError(
                f"unknown config keys: {', '.join(sorted(unknown))}"
            )
        return cls(**data)

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"config is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError("config JSON must be an object")
        return cls.from_dict(data)
