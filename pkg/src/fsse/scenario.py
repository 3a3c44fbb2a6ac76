"""Scenario documents: JSON description of a plant, noise, controller and attack.

Sensor labels in documents are 1-based. Example::

    {
      "name": "three-inertia case 1",
      "A": [[...]], "B": [[...]], "C": [[...]],
      "tau": 6, "s_max": 2,
      "noise": {"w_bound": 0.01, "v_bounds": 0.001, "disturbance": [[...]]},
      "x0": [-0.2, 0.1, 0, 0.3, 0.1, 0.2],
      "horizon": 100,
      "control": {"gain": [[...]], "amplitude": 1.0, "frequency": 0.2},
      "attack": {"sensors": [5, 6], "ranges": [[0, 2], [0, 2]]},
      "estimator": "both", "agreement": "mean", "seed": 0
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .agreement import MEAN, MEDIAN
from .attack_sim import BOTH, EXHAUSTIVE, FSSE, AttackScenario, LinearController
from .system_model import DEFAULT_RANK_TOL, SystemModel

FIXTURES = Path(__file__).parent / "fixtures"


class ScenarioError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _matrix(doc: dict, key: str, required: bool = True) -> Optional[list]:
    if key not in doc or doc[key] is None:
        if required:
            raise ScenarioError(key, "missing")
        return None
    try:
        arr = np.array(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(key, f"not a numeric array ({exc})") from None
    if arr.ndim != 2:
        raise ScenarioError(key, f"expected a nested 2-D array, got {arr.ndim}-D")
    return arr.tolist()


def _vector(value, key: str) -> list:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(key, f"not numeric ({exc})") from None
    if arr.ndim != 1:
        raise ScenarioError(key, "expected a flat array")
    return arr.tolist()


def _choice(doc: dict, key: str, options, default):
    value = doc.get(key, default)
    if value not in options:
        raise ScenarioError(key, f"expected one of {sorted(options)}, got {value!r}")
    return value


@dataclass
class ScenarioDocument:
    name: str
    A: list
    B: list
    C: list
    s_max: int
    tau: Optional[int] = None
    w_bound: float = 0.0
    v_bounds: object = 0.0
    disturbance: Optional[list] = None
    x0: Optional[list] = None
    horizon: int = 0
    control: Optional[dict] = None
    attack_sensors: list = field(default_factory=list)
    attack_ranges: list = field(default_factory=list)
    attack_sequences: dict = field(default_factory=dict)
    estimator: str = FSSE
    agreement: str = MEAN
    seed: int = 0
    rank_tol: float = DEFAULT_RANK_TOL
    equiv_tol: Optional[float] = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioDocument":
        if not isinstance(doc, dict):
            raise ScenarioError("<root>", "expected a JSON object")
        A = _matrix(doc, "A")
        C = _matrix(doc, "C")
        n = len(A)
        B = _matrix(doc, "B", required=False)
        if B is None:
            B = [[0.0] for _ in range(n)]
        try:
            s_max = int(doc["s_max"])
        except KeyError:
            raise ScenarioError("s_max", "missing") from None
        except (TypeError, ValueError):
            raise ScenarioError("s_max", "not an integer") from None
        tau = doc.get("tau")
        if tau is not None and not isinstance(tau, int):
            raise ScenarioError("tau", "not an integer")

        noise = doc.get("noise") or {}
        w_bound = float(noise.get("w_bound", 0.0))
        if w_bound < 0:
            raise ScenarioError("noise.w_bound", "must be nonnegative")
        v_raw = noise.get("v_bounds", 0.0)
        v_bounds = float(v_raw) if np.isscalar(v_raw) else _vector(v_raw, "noise.v_bounds")
        if np.any(np.asarray(v_bounds) < 0):
            raise ScenarioError("noise.v_bounds", "must be nonnegative")
        disturbance = _matrix(noise, "disturbance", required=False)

        x0 = _vector(doc["x0"], "x0") if doc.get("x0") is not None else None
        horizon = doc.get("horizon", 0)
        if not isinstance(horizon, int) or horizon < 0:
            raise ScenarioError("horizon", "must be a nonnegative integer")

        control = doc.get("control")
        if control is not None:
            if "gain" not in control:
                raise ScenarioError("control.gain", "missing")
            control = {
                "gain": _matrix(control, "gain"),
                "amplitude": float(control.get("amplitude", 0.0)),
                "frequency": float(control.get("frequency", 0.0)),
            }

        attack = doc.get("attack") or {}
        sensors = [int(i) for i in attack.get("sensors", [])]
        ranges = [[float(lo), float(hi)] for lo, hi in attack.get("ranges", [])]
        if ranges and len(ranges) != len(sensors):
            raise ScenarioError("attack.ranges", "need one [lo, hi] pair per attacked sensor")
        sequences = {str(k): _vector(v, f"attack.sequences.{k}") for k, v in attack.get("sequences", {}).items()}

        tol = doc.get("tolerances") or {}
        out = cls(
            name=str(doc.get("name", "")),
            A=A, B=B, C=C, s_max=s_max, tau=tau,
            w_bound=w_bound, v_bounds=v_bounds, disturbance=disturbance,
            x0=x0, horizon=horizon, control=control,
            attack_sensors=sensors, attack_ranges=ranges, attack_sequences=sequences,
            estimator=_choice(doc, "estimator", {FSSE, EXHAUSTIVE, BOTH}, FSSE),
            agreement=_choice(doc, "agreement", {MEAN, MEDIAN}, MEAN),
            seed=int(doc.get("seed", 0)),
            rank_tol=float(tol.get("rank_tol", DEFAULT_RANK_TOL)),
            equiv_tol=None if tol.get("equiv_tol") is None else float(tol["equiv_tol"]),
        )
        out.to_model()  # dimension checks surface as field errors here
        out.to_attack()
        return out

    def to_dict(self) -> dict:
        doc = {
            "name": self.name,
            "A": self.A,
            "B": self.B,
            "C": self.C,
            "tau": self.tau,
            "s_max": self.s_max,
            "noise": {"w_bound": self.w_bound, "v_bounds": self.v_bounds, "disturbance": self.disturbance},
            "x0": self.x0,
            "horizon": self.horizon,
            "control": self.control,
            "attack": {
                "sensors": self.attack_sensors,
                "ranges": self.attack_ranges,
                "sequences": self.attack_sequences,
            },
            "estimator": self.estimator,
            "agreement": self.agreement,
            "seed": self.seed,
            "tolerances": {"rank_tol": self.rank_tol, "equiv_tol": self.equiv_tol},
        }
        return doc

    @classmethod
    def load(cls, path) -> "ScenarioDocument":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError("<document>", f"invalid JSON ({exc})") from None
        return cls.from_dict(doc)

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def to_model(self) -> SystemModel:
        try:
            return SystemModel(
                np.array(self.A), np.array(self.B), np.array(self.C),
                self.s_max, self.tau, self.rank_tol,
            )
        except ValueError as exc:
            raise ScenarioError("A/B/C/tau/s_max", str(exc)) from None

    def to_attack(self, seed: Optional[int] = None) -> AttackScenario:
        p = len(self.C)
        for i in self.attack_sensors:
            if not 1 <= i <= p:
                raise ScenarioError("attack.sensors", f"sensor {i} outside 1..{p}")
        if len(self.attack_sensors) > self.s_max:
            raise ScenarioError("attack.sensors", f"more than s_max={self.s_max} attacked sensors")
        sequences = {int(k) - 1: np.array(v) for k, v in self.attack_sequences.items()}
        return AttackScenario(
            attacked=tuple(i - 1 for i in self.attack_sensors),
            ranges=tuple(tuple(r) for r in self.attack_ranges),
            sequences=sequences,
            seed=self.seed if seed is None else seed,
        )

    def to_controller(self) -> Optional[LinearController]:
        if self.control is None:
            return None
        return LinearController(
            np.array(self.control["gain"]), self.control["amplitude"], self.control["frequency"]
        )


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.json"


def load_fixture(name: str) -> ScenarioDocument:
    return ScenarioDocument.load(fixture_path(name))
