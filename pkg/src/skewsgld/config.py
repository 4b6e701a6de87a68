"""Experiment configuration: JSON loading, strict validation, resolution.

Configs are plain JSON (see configs/schema.json for the shipped schema).
Validation is strict: unknown keys are rejected and every diagnostic names
the offending field path. A resolved copy of the config is written next to
every run's outputs so a directory is always self-describing.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .models import (
    DataSet,
    DoubleWellModel,
    Mixture2Model,
    Mixture10Model,
    QuadraticModel,
    generate_dataset_mixture2,
    generate_dataset_mixture10,
)
from .samplers import ALGORITHMS, SamplerConfig

MODEL_TYPES = ("mixture2", "mixture10", "quadratic", "double_well")
SKEW_INITS = ("zero", "tridiagonal")

_SAMPLER_KEYS = (
    "eps",
    "alpha",
    "beta",
    "mu",
    "inner_steps",
    "skew_bounds",
    "burn_in_fraction",
    "sigma_prop",
    "noise_enabled",
    "pool_spsa_chains",
)


class ConfigError(ValueError):
    """Invalid configuration; the message names the field path."""


def _require_keys(obj: dict, path: str, required: tuple, optional: tuple = ()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object, got {type(obj).__name__}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ConfigError(f"{path}: missing required key(s) {missing}")
    unknown = [k for k in obj if k not in required + optional]
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}")


def _as_number(obj, path: str, minimum=None, integer=False):
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {obj!r}")
    if integer and int(obj) != obj:
        raise ConfigError(f"{path}: expected an integer, got {obj!r}")
    if minimum is not None and obj < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {obj!r}")
    return int(obj) if integer else float(obj)


@dataclass
class AlgorithmSpec:
    """One sampler to run: algorithm name, its SamplerConfig, skew init."""

    name: str
    sampler: SamplerConfig
    skew_init: str = "zero"
    label: str | None = None

    @property
    def display(self) -> str:
        return self.label or self.name


@dataclass
class ExperimentConfig:
    name: str
    model_spec: dict
    dataset_spec: dict | None
    algorithms: list
    trials: int
    iterations: int
    base_seed: int
    theta0: list | None = None
    thin: int = 1
    snapshot_every: int | None = None
    record_cost: bool = False
    max_parallel: int | None = None
    output_dir: str = "out"

    def trial_seed(self, trial: int) -> int:
        """Seed policy: trial t uses base_seed + t, shared across algorithms."""
        return self.base_seed + trial

    def resolved(self) -> dict:
        out = {
            "name": self.name,
            "model": self.model_spec,
            "dataset": self.dataset_spec,
            "algorithms": [
                {
                    "name": a.name,
                    "label": a.display,
                    "skew_init": a.skew_init,
                    **{k: getattr(a.sampler, k) for k in _SAMPLER_KEYS},
                }
                for a in self.algorithms
            ],
            "trials": self.trials,
            "iterations": self.iterations,
            "base_seed": self.base_seed,
            "theta0": self.theta0,
            "thin": self.thin,
            "snapshot_every": self.snapshot_every,
            "record_cost": self.record_cost,
            "max_parallel": self.max_parallel,
            "output_dir": self.output_dir,
        }
        return json.loads(json.dumps(out))  # normalize tuples etc. to JSON types


def parse_algorithm(obj: dict, path: str) -> AlgorithmSpec:
    _require_keys(
        obj,
        path,
        required=("name",),
        optional=("skew_init", "label") + _SAMPLER_KEYS,
    )
    name = obj["name"]
    if name not in ALGORITHMS:
        raise ConfigError(f"{path}.name: unknown algorithm {name!r}, expected one of {ALGORITHMS}")
    skew_init = obj.get("skew_init", "zero")
    if skew_init not in SKEW_INITS:
        raise ConfigError(f"{path}.skew_init: expected one of {SKEW_INITS}, got {skew_init!r}")
    kwargs = {}
    for k in _SAMPLER_KEYS:
        if k in obj:
            kwargs[k] = tuple(obj[k]) if k == "skew_bounds" else obj[k]
    try:
        sampler = SamplerConfig(**kwargs)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{path}: {err}") from None
    return AlgorithmSpec(name=name, sampler=sampler, skew_init=skew_init, label=obj.get("label"))


def parse_experiment_config(raw: dict, source: str = "<config>") -> ExperimentConfig:
    _require_keys(
        raw,
        source,
        required=("name", "model", "algorithms", "trials", "base_seed"),
        optional=(
            "dataset",
            "iterations",
            "theta0",
            "thin",
            "snapshot_every",
            "record_cost",
            "max_parallel",
            "output_dir",
        ),
    )
    model_spec = _validate_model_spec(raw["model"], f"{source}.model")
    dataset_spec = raw.get("dataset")
    if dataset_spec is not None:
        dataset_spec = _validate_dataset_spec(dataset_spec, f"{source}.dataset", model_spec)
    elif model_spec["type"] in ("mixture2", "mixture10"):
        raise ConfigError(f"{source}.dataset: required for model type {model_spec['type']!r}")

    if not isinstance(raw["algorithms"], list) or not raw["algorithms"]:
        raise ConfigError(f"{source}.algorithms: expected a non-empty list")
    algorithms = [
        parse_algorithm(a, f"{source}.algorithms[{i}]") for i, a in enumerate(raw["algorithms"])
    ]
    labels = [a.display for a in algorithms]
    if len(set(labels)) != len(labels):
        raise ConfigError(
            f"{source}.algorithms: duplicate labels {labels}; disambiguate with 'label'"
        )

    trials = _as_number(raw["trials"], f"{source}.trials", minimum=1, integer=True)
    base_seed = _as_number(raw["base_seed"], f"{source}.base_seed", integer=True)

    iterations = raw.get("iterations")
    sweeps = dataset_spec.get("sweeps") if dataset_spec else None
    if iterations is None:
        if sweeps is None:
            raise ConfigError(f"{source}.iterations: required (or give dataset.sweeps)")
        iterations = sweeps * dataset_spec["T"]
    else:
        iterations = _as_number(raw["iterations"], f"{source}.iterations", minimum=1, integer=True)
        if sweeps is not None and sweeps * dataset_spec["T"] != iterations:
            raise ConfigError(
                f"{source}.iterations: {iterations} contradicts dataset.sweeps * T = "
                f"{sweeps * dataset_spec['T']}"
            )

    theta0 = raw.get("theta0")
    if theta0 is not None:
        if not isinstance(theta0, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in theta0
        ):
            raise ConfigError(f"{source}.theta0: expected a list of numbers")

    return ExperimentConfig(
        name=str(raw["name"]),
        model_spec=model_spec,
        dataset_spec=dataset_spec,
        algorithms=algorithms,
        trials=trials,
        iterations=iterations,
        base_seed=base_seed,
        theta0=theta0,
        thin=_as_number(raw.get("thin", 1), f"{source}.thin", minimum=1, integer=True),
        snapshot_every=(
            None
            if raw.get("snapshot_every") is None
            else _as_number(raw["snapshot_every"], f"{source}.snapshot_every", minimum=1, integer=True)
        ),
        record_cost=bool(raw.get("record_cost", False)),
        max_parallel=(
            None
            if raw.get("max_parallel") is None
            else _as_number(raw["max_parallel"], f"{source}.max_parallel", minimum=1, integer=True)
        ),
        output_dir=str(raw.get("output_dir", "out")),
    )


def _validate_model_spec(spec: dict, path: str) -> dict:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError(f"{path}: expected an object with a 'type' key")
    mtype = spec["type"]
    if mtype not in MODEL_TYPES:
        raise ConfigError(f"{path}.type: unknown model {mtype!r}, expected one of {MODEL_TYPES}")
    if mtype == "mixture2":
        _require_keys(spec, path, required=("type",), optional=())
    elif mtype == "mixture10":
        _require_keys(spec, path, required=("type", "seed"), optional=())
        _as_number(spec["seed"], f"{path}.seed", integer=True)
    elif mtype == "quadratic":
        _require_keys(spec, path, required=("type",), optional=("A", "A_diag", "sigma_g", "center"))
        if ("A" in spec) == ("A_diag" in spec):
            raise ConfigError(f"{path}: give exactly one of 'A' or 'A_diag'")
        if "sigma_g" in spec:
            _as_number(spec["sigma_g"], f"{path}.sigma_g", minimum=0.0)
    else:  # double_well
        _require_keys(spec, path, required=("type",), optional=("sigma_g",))
        if "sigma_g" in spec:
            _as_number(spec["sigma_g"], f"{path}.sigma_g", minimum=0.0)
    return spec


def _validate_dataset_spec(spec: dict, path: str, model_spec: dict) -> dict:
    _require_keys(
        spec,
        path,
        required=(),
        optional=("T", "theta_true", "seed", "sweeps", "path"),
    )
    if "path" in spec:
        if "T" in spec or "seed" in spec:
            raise ConfigError(f"{path}: 'path' excludes generation keys 'T'/'seed'")
        return spec
    for key in ("T", "seed"):
        if key not in spec:
            raise ConfigError(f"{path}.{key}: required when generating a dataset")
    _as_number(spec["T"], f"{path}.T", minimum=1, integer=True)
    _as_number(spec["seed"], f"{path}.seed", integer=True)
    if "sweeps" in spec:
        _as_number(spec["sweeps"], f"{path}.sweeps", minimum=1, integer=True)
    if model_spec["type"] == "mixture2" and "theta_true" not in spec:
        raise ConfigError(f"{path}.theta_true: required for mixture2 datasets")
    return spec


def load_experiment_config(path) -> ExperimentConfig:
    with open(path) as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None
    return parse_experiment_config(raw, source=str(path))


def build_model_and_dataset(cfg: ExperimentConfig):
    """Instantiate the model and dataset a config describes.

    Returns (model, dataset_or_None). Synthetic models run without a
    dataset; their gradient-noise data are drawn per chain.
    """
    spec = cfg.model_spec
    dspec = cfg.dataset_spec
    mtype = spec["type"]
    if mtype == "quadratic":
        A = np.asarray(spec["A"], dtype=float) if "A" in spec else np.diag(spec["A_diag"])
        model = QuadraticModel(
            A, sigma_g=float(spec.get("sigma_g", 0.0)), center=spec.get("center")
        )
        return model, None
    if mtype == "double_well":
        return DoubleWellModel(sigma_g=float(spec.get("sigma_g", 0.0))), None

    if dspec is None:
        raise ConfigError(f"dataset required for model type {mtype!r}")
    if mtype == "mixture2":
        if "path" in dspec:
            dataset = DataSet.load_csv(dspec["path"], true_theta=dspec.get("theta_true"))
        else:
            dataset = generate_dataset_mixture2(
                dspec["theta_true"], dspec["T"], np.random.default_rng(dspec["seed"])
            )
        return Mixture2Model(dataset), dataset

    hyper_rng = np.random.default_rng(spec["seed"])
    mu, sigma2 = Mixture10Model.draw_hyperparams(hyper_rng)
    if "path" in dspec:
        dataset = DataSet.load_csv(dspec["path"], true_theta=dspec.get("theta_true"))
    else:
        data_rng = np.random.default_rng(dspec["seed"])
        theta_true = dspec.get("theta_true")
        if theta_true is None:
            # generating parameter drawn from the prior, recorded in the dataset
            theta_true = mu + np.sqrt(sigma2) * data_rng.standard_normal(10)
        dataset = generate_dataset_mixture10(theta_true, dspec["T"], data_rng)
    return Mixture10Model(dataset, mu=mu, sigma2=sigma2), dataset


# ---------------------------------------------------------------------------
# Tracking configs
# ---------------------------------------------------------------------------

@dataclass
class TrackingConfig:
    name: str
    bank_spec: dict
    regime_spec: dict
    algorithm: AlgorithmSpec
    iterations: int
    trials: int
    base_seed: int
    theta0: list | None = None
    output_dir: str = "out"

    def trial_seed(self, trial: int) -> int:
        return self.base_seed + trial

    def resolved(self) -> dict:
        a = self.algorithm
        return json.loads(
            json.dumps(
                {
                    "name": self.name,
                    "bank": self.bank_spec,
                    "regime": self.regime_spec,
                    "algorithm": {
                        "name": a.name,
                        "skew_init": a.skew_init,
                        **{k: getattr(a.sampler, k) for k in _SAMPLER_KEYS},
                    },
                    "iterations": self.iterations,
                    "trials": self.trials,
                    "base_seed": self.base_seed,
                    "theta0": self.theta0,
                    "output_dir": self.output_dir,
                }
            )
        )


def parse_tracking_config(raw: dict, source: str = "<config>") -> TrackingConfig:
    _require_keys(
        raw,
        source,
        required=("name", "bank", "regime", "algorithm", "iterations", "trials", "base_seed"),
        optional=("theta0", "output_dir"),
    )
    bank = raw["bank"]
    _require_keys(bank, f"{source}.bank", required=("type",), optional=("dim", "offset", "sigma_g"))
    if bank["type"] != "quadratic_pair":
        raise ConfigError(f"{source}.bank.type: only 'quadratic_pair' is built in, got {bank['type']!r}")

    regime = raw["regime"]
    _require_keys(
        regime, f"{source}.regime", required=("Q", "alpha_chain"), optional=("initial_state",)
    )
    Q = regime["Q"]
    if not isinstance(Q, list) or not all(isinstance(row, list) for row in Q):
        raise ConfigError(f"{source}.regime.Q: expected a matrix (list of rows)")
    for i, row in enumerate(Q):
        if len(row) != len(Q):
            raise ConfigError(f"{source}.regime.Q: row {i} has length {len(row)}, expected {len(Q)}")
        s = sum(row)
        if abs(s) > 1e-9:
            raise ConfigError(f"{source}.regime.Q: row {i} sums to {s}, expected 0")
        for j, v in enumerate(row):
            if i != j and v < 0:
                raise ConfigError(f"{source}.regime.Q: off-diagonal entry ({i},{j}) is negative")
    _as_number(regime["alpha_chain"], f"{source}.regime.alpha_chain", minimum=0.0)

    algorithm = parse_algorithm(raw["algorithm"], f"{source}.algorithm")
    if algorithm.name not in ("sgld", "accelerated", "alg1", "alg2"):
        raise ConfigError(
            f"{source}.algorithm.name: tracking supports sgld/accelerated/alg1/alg2, "
            f"got {algorithm.name!r}"
        )
    return TrackingConfig(
        name=str(raw["name"]),
        bank_spec=bank,
        regime_spec=regime,
        algorithm=algorithm,
        iterations=_as_number(raw["iterations"], f"{source}.iterations", minimum=1, integer=True),
        trials=_as_number(raw["trials"], f"{source}.trials", minimum=1, integer=True),
        base_seed=_as_number(raw["base_seed"], f"{source}.base_seed", integer=True),
        theta0=raw.get("theta0"),
        output_dir=str(raw.get("output_dir", "out")),
    )


def load_tracking_config(path) -> TrackingConfig:
    with open(path) as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None
    return parse_tracking_config(raw, source=str(path))
