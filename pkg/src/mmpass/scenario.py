"""Scenario configuration: YAML schema, defaults, validation and dBm handling.

Powers are given in dBm in files and on the command line and held in watts
everywhere else.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .channel import UserLayout
from .swarm import Hyperparams
from .waveguide import GeometryError, WaveguideSpec

DEFAULT_MODE_BETAS = (1009.2378, 645.7996)

MANDATORY_KEYS = ("n_pas", "n_users")


class ScenarioError(ValueError):
    """Invalid scenario file or values; the message names the offending key."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((float(dbm) - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * np.log10(float(watts)) + 30.0


@dataclass(frozen=True)
class Scenario:
    n_pas: int
    n_users: int
    carrier_freq: float = 28e9
    waveguide_length: float = 20.0
    x_min: float = 0.0
    x_max: float | None = None
    mode_betas: tuple = DEFAULT_MODE_BETAS
    kappa: float | tuple = 150.0
    pa_length: float = 0.006
    pa_height: float = 3.0
    d_min: float = 0.01
    beta_min: float | None = None
    beta_max: float | None = None
    user_x_range: tuple | None = None
    user_y_range: tuple = (-5.0, 5.0)
    user_seed: int = 0
    users: tuple | None = None
    noise_dbm: float = -90.0
    p_max_dbm: float = 25.0
    pso: dict = field(default_factory=dict)

    def __post_init__(self):
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if isinstance(val, (list, np.ndarray)):
                object.__setattr__(self, f.name, _tupleize(np.asarray(val).tolist()))
        for key in ("n_pas", "n_users"):
            if int(getattr(self, key)) < 1:
                raise ScenarioError(f"{key}: must be a positive integer")
        for key in ("carrier_freq", "waveguide_length", "pa_length", "pa_height", "d_min"):
            val = getattr(self, key)
            if not (np.isfinite(val) and val > 0):
                raise ScenarioError(f"{key}: must be positive, got {val}")
        for key in ("noise_dbm", "p_max_dbm"):
            if not np.isfinite(getattr(self, key)):
                raise ScenarioError(f"{key}: must be finite")
        if len(self.mode_betas) < 1 or any(not b > 0 for b in self.mode_betas):
            raise ScenarioError("mode_betas: must be a nonempty list of positive values")
        if self.users is not None and len(self.users) != self.n_users:
            raise ScenarioError(f"users: expected {self.n_users} entries, got {len(self.users)}")
        unknown = set(self.pso) - {f.name for f in dataclasses.fields(Hyperparams)}
        if unknown:
            raise ScenarioError(f"pso.{sorted(unknown)[0]}: unknown hyperparameter")
        lo, hi = self.placement_bounds
        if (self.n_pas - 1) * self.d_min > hi - lo:
            raise ScenarioError(
                f"d_min: {self.n_pas} PAs spaced {self.d_min} m need "
                f"{(self.n_pas - 1) * self.d_min} m but only {hi - lo} m is available"
            )
        try:
            self.waveguide_spec()
        except GeometryError as exc:
            raise ScenarioError(str(exc)) from None

    # derived quantities

    @property
    def placement_bounds(self) -> tuple[float, float]:
        hi = self.waveguide_length if self.x_max is None else self.x_max
        return float(self.x_min), float(hi)

    @property
    def n_modes(self) -> int:
        return len(self.mode_betas)

    @property
    def p_max_watts(self) -> float:
        return dbm_to_watts(self.p_max_dbm)

    @property
    def sigma2_watts(self) -> float:
        return dbm_to_watts(self.noise_dbm)

    def kappa_matrix(self) -> np.ndarray:
        k = np.asarray(self.kappa, dtype=float)
        shape = (self.n_pas, self.n_modes)
        if k.ndim == 0:
            return np.full(shape, float(k))
        if k.ndim == 1 and k.size == self.n_modes:
            return np.tile(k, (self.n_pas, 1))
        if k.shape != shape:
            raise ScenarioError(f"kappa: expected a scalar, {self.n_modes} values or a {shape} matrix")
        return k

    def waveguide_spec(self) -> WaveguideSpec:
        lo, hi = self.placement_bounds
        return WaveguideSpec(
            mode_betas=np.asarray(self.mode_betas, dtype=float),
            kappa=self.kappa_matrix(),
            pa_length=self.pa_length, x_min=lo, x_max=hi, d_min=self.d_min,
            pa_height=self.pa_height, carrier_freq=self.carrier_freq,
        )

    def beta_range(self) -> tuple[float, float]:
        lo = 0.9 * min(self.mode_betas) if self.beta_min is None else self.beta_min
        hi = 1.1 * max(self.mode_betas) if self.beta_max is None else self.beta_max
        return float(lo), float(hi)

    def user_layout(self) -> UserLayout:
        if self.users is not None:
            return UserLayout(np.asarray(self.users, dtype=float))
        x_range = self.user_x_range or (0.0, self.waveguide_length)
        return UserLayout.random(self.n_users, x_range, self.user_y_range, self.user_seed)

    def user_positions(self) -> np.ndarray:
        return self.user_layout().positions

    def hyperparams(self) -> Hyperparams:
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in self.pso.items()}
        return Hyperparams(**kw)

    # serialization

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                val = _listify(val)
            out[f.name] = val
        return out

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)


def _listify(val):
    if isinstance(val, (tuple, list)):
        return [_listify(v) for v in val]
    return val


def _tupleize(val):
    if isinstance(val, list):
        return tuple(_tupleize(v) for v in val)
    return val


_FIELDS = {f.name: f for f in dataclasses.fields(Scenario)}


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario file must contain a mapping at top level")
    for key in data:
        if key not in _FIELDS:
            raise ScenarioError(f"{key}: unknown key")
    for key in MANDATORY_KEYS:
        if key not in data:
            raise ScenarioError(f"{key}: missing mandatory key")
    kwargs = {}
    for key, val in data.items():
        if key == "pso":
            if not isinstance(val, dict):
                raise ScenarioError("pso: must be a mapping")
            kwargs[key] = dict(val)
        elif key in ("n_pas", "n_users", "user_seed"):
            if isinstance(val, bool) or not isinstance(val, int):
                raise ScenarioError(f"{key}: must be an integer")
            kwargs[key] = val
        elif isinstance(val, list):
            kwargs[key] = _tupleize(val)
        elif val is None:
            kwargs[key] = None
        elif isinstance(val, (int, float, str)) and not isinstance(val, bool):
            # YAML 1.1 reads "28e9" as a string
            try:
                kwargs[key] = float(val)
            except ValueError:
                raise ScenarioError(f"{key}: expected a number, got {val!r}") from None
        else:
            raise ScenarioError(f"{key}: unsupported value {val!r}")
    try:
        return Scenario(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc)) from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"scenario file not found: {path}")
    with path.open() as fh:
        data = yaml.safe_load(fh)
    return scenario_from_dict(data or {})


def dump_scenario(scenario: Scenario, path) -> None:
    with Path(path).open("w") as fh:
        yaml.safe_dump(scenario.to_dict(), fh, sort_keys=False)


def default_scenario(**overrides) -> Scenario:
    """Two-mode 28 GHz setup with 8 PAs and 2 users."""
    base = dict(n_pas=8, n_users=2)
    base.update(overrides)
    return Scenario(**base)


def bundled_scenario_path(name: str = "reference") -> Path:
    return Path(__file__).parent / "scenarios" / f"{name}.yaml"
