"""Closed-loop simulation with bounded noise and fixed-support sensor attacks."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .agreement import MEAN, AgreementOperators, AgreementReport
from .categorization import Partition, de_partition
from .estimator import (
    BoundConstants,
    CandidateSet,
    Estimate,
    ExhaustionError,
    Pruner,
    SearchOperators,
    build_full_sigma,
    compute_bound_constants,
    default_epsilon,
    ex_search,
    fsse,
)
from .system_model import (
    NoiseBounds,
    ObservationStack,
    SystemModel,
    build_observation_stack,
    compute_noise_bounds,
    stack_window,
)

FSSE, EXHAUSTIVE, BOTH = "fsse", "exhaustive", "both"


@dataclass(frozen=True)
class AttackScenario:
    """Attacked sensors (0-based, fixed for the whole run) and their generators.

    Each attacked sensor draws a(t) i.i.d. uniform on its (lo, hi) range,
    unless ``sequences`` supplies explicit values for it.
    """

    attacked: tuple = ()
    ranges: tuple = ()
    sequences: Dict[int, np.ndarray] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        attacked = tuple(int(i) for i in self.attacked)
        if len(set(attacked)) != len(attacked):
            raise ValueError("attacked sensors must be distinct")
        ranges = tuple(tuple(map(float, r)) for r in self.ranges)
        if not ranges:
            ranges = tuple((0.0, 0.0) for _ in attacked)
        if len(ranges) != len(attacked):
            raise ValueError("need one (lo, hi) range per attacked sensor")
        for lo, hi in ranges:
            if lo > hi:
                raise ValueError(f"bad attack range ({lo}, {hi})")
        object.__setattr__(self, "attacked", attacked)
        object.__setattr__(self, "ranges", ranges)

    def validate(self, model: SystemModel) -> None:
        if len(self.attacked) > model.s_max:
            raise ValueError(
                f"{len(self.attacked)} attacked sensors exceed s_max={model.s_max}"
            )
        if any(not 0 <= i < model.p for i in self.attacked):
            raise ValueError("attacked sensor index out of range")

    def draw(self, rng: np.random.Generator, t: int, p: int) -> np.ndarray:
        a = np.zeros(p)
        for i, (lo, hi) in zip(self.attacked, self.ranges):
            seq = self.sequences.get(i)
            if seq is not None:
                a[i] = seq[t % len(seq)]
            else:
                a[i] = rng.uniform(lo, hi)
        return a


@dataclass
class LinearController:
    """u(t) = K x_hat(t) + amplitude * sin(frequency * t), t the step index.

    Before the first estimate is available only the reference term is applied.
    """

    gain: np.ndarray
    amplitude: float = 0.0
    frequency: float = 0.0

    def __call__(self, t: int, x_hat: Optional[np.ndarray]) -> np.ndarray:
        K = np.atleast_2d(np.asarray(self.gain, dtype=float))
        u = np.full(K.shape[0], self.amplitude * math.sin(self.frequency * t))
        if x_hat is not None:
            u = u + K @ x_hat
        return u


def zero_controller(m: int) -> Callable:
    return lambda t, x_hat: np.zeros(m)


@dataclass
class Pipeline:
    """Offline products shared by every window and every run of one model."""

    model: SystemModel
    stack: ObservationStack
    partition: Partition
    bounds: NoiseBounds
    constants: BoundConstants
    operators: SearchOperators
    full: CandidateSet
    pruner: Optional[Pruner] = None
    agreement_ops: Optional[AgreementOperators] = None

    def __post_init__(self):
        if self.pruner is None:
            self.pruner = Pruner(self.full)
        if self.agreement_ops is None:
            self.agreement_ops = AgreementOperators.build(self.partition, self.model.tau)

    @classmethod
    def prepare(
        cls,
        model: SystemModel,
        w_bound: float,
        v_bounds,
        disturbance=None,
        partition: Optional[Partition] = None,
        epsilon: Optional[float] = None,
        require_observable: bool = True,
        equiv_tol: Optional[float] = None,
    ) -> "Pipeline":
        stack = build_observation_stack(model)
        if partition is None:
            partition = de_partition(stack) if equiv_tol is None else de_partition(stack, equiv_tol)
        bounds = compute_noise_bounds(model, stack, w_bound, v_bounds, disturbance)
        eps = default_epsilon(bounds.psi_bar) if epsilon is None else epsilon
        constants = compute_bound_constants(
            stack, model.s_max, partition, eps, require_observable=require_observable
        )
        full = build_full_sigma(model.p, model.s_max)
        operators = SearchOperators(stack).warm(full)
        return cls(model, stack, partition, bounds, constants, operators, full)


@dataclass
class WindowRecord:
    t: int
    x_true: np.ndarray
    fsse: Optional[Estimate] = None
    exhaustive: Optional[Estimate] = None
    report: Optional[AgreementReport] = None
    fsse_failure: Optional[str] = None
    exhaustive_failure: Optional[str] = None
    fsse_seconds: float = 0.0
    exhaustive_seconds: float = 0.0
    # attacked member -> (||T_ij a_j||, detectable)
    detectability: Dict[int, tuple] = field(default_factory=dict)

    def error(self, which: str) -> Optional[float]:
        est = self.fsse if which == FSSE else self.exhaustive
        if est is None:
            return None
        return float(np.linalg.norm(est.x_hat - self.x_true))


@dataclass
class RunTrace:
    x: np.ndarray  # (horizon + 1, n)
    u: np.ndarray  # (horizon, m)
    y: np.ndarray  # (horizon, p)
    a: np.ndarray  # (horizon, p)
    windows: List[WindowRecord]
    attacked: tuple = ()

    @property
    def horizon(self) -> int:
        return self.y.shape[0]


def step(model: SystemModel, x, u, w, v, a):
    """One plant update; returns (x(t+1), y(t))."""
    x = np.asarray(x, dtype=float)
    y = model.C @ x + np.asarray(a, dtype=float) + np.asarray(v, dtype=float)
    x_next = model.A @ x + model.B @ np.asarray(u, dtype=float).reshape(-1) + np.asarray(w, dtype=float)
    return x_next, y


def draw_noise(rng: np.random.Generator, bounds: NoiseBounds, n: int):
    """Process noise E d with d uniform in the w_bound ball; v uniform in its box."""
    E = np.eye(n) if bounds.disturbance is None else bounds.disturbance
    q = E.shape[1]
    d = rng.standard_normal(q)
    nrm = np.linalg.norm(d)
    radius = bounds.w_bound * rng.random() ** (1.0 / q)
    d = d / nrm * radius if nrm > 0 else np.zeros(q)
    v = rng.uniform(-1.0, 1.0, size=bounds.v_bounds.shape[0]) * bounds.v_bounds
    return E @ d, v


def _propagate(model: SystemModel, x0: np.ndarray, inputs: Sequence[np.ndarray]) -> np.ndarray:
    x = x0
    for u in inputs:
        x = model.A @ x + model.B @ u
    return x


def detectability(
    partition: Partition, attacks: np.ndarray, threshold: float, attacked: Sequence[int]
) -> Dict[int, tuple]:
    """||T_ij a_j|| for attacked members of non-singleton types over one window.

    ``attacks`` is the (tau, p) block of attack samples in the window.
    """
    out = {}
    for j in attacked:
        stype = partition.type_of(j)
        if len(stype) < 2:
            continue
        norm = float(np.linalg.norm(stype.transforms[j] @ attacks[:, j]))
        out[j] = (norm, norm > threshold)
    return out


def run_scenario(
    pipeline: Pipeline,
    scenario: AttackScenario,
    controller: Optional[Callable],
    horizon: int,
    x0,
    mode: str = FSSE,
    agreement: str = MEAN,
) -> RunTrace:
    model = pipeline.model
    n, m, p, tau = model.n, model.m, model.p, model.tau
    if horizon < tau:
        raise ValueError(f"horizon {horizon} shorter than window length {tau}")
    if mode not in (FSSE, EXHAUSTIVE, BOTH):
        raise ValueError(f"unknown estimator mode {mode!r}")
    scenario.validate(model)
    controller = controller or zero_controller(m)

    noise_seq, attack_seq = np.random.SeedSequence(scenario.seed).spawn(2)
    noise_rng = np.random.default_rng(noise_seq)
    attack_rng = np.random.default_rng(attack_seq)

    xs = np.zeros((horizon + 1, n))
    us = np.zeros((horizon, m))
    ys = np.zeros((horizon, p))
    attacks = np.zeros((horizon, p))
    xs[0] = np.asarray(x0, dtype=float)
    det_threshold = 4.0 * (pipeline.partition.M_T or 0.0) * pipeline.bounds.psi_bar
    records: List[WindowRecord] = []
    x_pred: Optional[np.ndarray] = None

    for t in range(horizon):
        us[t] = controller(t, x_pred)
        w, v = draw_noise(noise_rng, pipeline.bounds, n)
        attacks[t] = scenario.draw(attack_rng, t, p)
        xs[t + 1], ys[t] = step(model, xs[t], us[t], w, v, attacks[t])

        if t < tau - 1:
            continue
        lo = t - tau + 1
        window = stack_window(model, pipeline.stack, ys[lo:t + 1], us[lo:t + 1], t)
        rec = WindowRecord(t=t, x_true=xs[lo].copy())
        if pipeline.partition.M_T is not None:
            rec.detectability = detectability(
                pipeline.partition, attacks[lo:t + 1], det_threshold, scenario.attacked
            )

        if mode in (FSSE, BOTH):
            reports: list = []
            start = time.perf_counter()
            try:
                rec.fsse = fsse(
                    model, pipeline.stack, pipeline.partition, window, pipeline.constants,
                    pipeline.bounds, agreement, pipeline.operators, pipeline.full, reports,
                    pipeline.pruner, pipeline.agreement_ops,
                )
            except ExhaustionError as exc:
                rec.fsse_failure = str(exc)
            rec.fsse_seconds = time.perf_counter() - start
            rec.report = reports[0] if reports else None
        if mode in (EXHAUSTIVE, BOTH):
            start = time.perf_counter()
            try:
                rec.exhaustive = ex_search(
                    pipeline.full, pipeline.constants.kappa_full, window, pipeline.stack,
                    pipeline.bounds, pipeline.constants.epsilon, pipeline.operators,
                    pipeline.constants.delta_2s,
                )
            except ExhaustionError as exc:
                rec.exhaustive_failure = str(exc)
            rec.exhaustive_seconds = time.perf_counter() - start
        records.append(rec)

        driving = rec.exhaustive if mode == EXHAUSTIVE else rec.fsse
        if driving is not None:
            x_pred = _propagate(model, driving.x_hat, us[lo:t + 1])
        elif x_pred is not None:
            x_pred = _propagate(model, x_pred, us[t:t + 1])

    return RunTrace(xs, us, ys, attacks, records, scenario.attacked)


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _gamma_label(gamma) -> str:
    return "-".join(str(g + 1) for g in gamma)


def write_trace_csv(trace: RunTrace, path) -> None:
    """One row per step: t, x_1..x_n, u_1..u_m, y_1..y_p, a_1..a_p."""
    n, m, p = trace.x.shape[1], trace.u.shape[1], trace.y.shape[1]
    header = (
        ["t"]
        + [f"x{i + 1}" for i in range(n)]
        + [f"u{i + 1}" for i in range(m)]
        + [f"y{i + 1}" for i in range(p)]
        + [f"a{i + 1}" for i in range(p)]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(trace.horizon):
            w.writerow(
                [t]
                + [_fmt(v) for v in trace.x[t]]
                + [_fmt(v) for v in trace.u[t]]
                + [_fmt(v) for v in trace.y[t]]
                + [_fmt(v) for v in trace.a[t]]
            )


ESTIMATE_COLUMNS = [
    "t", "estimator", "error_norm", "residual", "search_size",
    "candidates_evaluated", "chosen_gamma", "kappa", "bound", "status",
]


def write_estimates_csv(trace: RunTrace, path) -> None:
    """One row per window and estimator; x_hat components follow the fixed columns."""
    n = trace.x.shape[1]
    header = ESTIMATE_COLUMNS + [f"x_hat{i + 1}" for i in range(n)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for rec in trace.windows:
            for name, est, failure in (
                (FSSE, rec.fsse, rec.fsse_failure),
                (EXHAUSTIVE, rec.exhaustive, rec.exhaustive_failure),
            ):
                if est is None and failure is None:
                    continue
                if est is None:
                    w.writerow([rec.t, name, "", "", "", "", "", "", "", "exhausted"] + [""] * n)
                    continue
                w.writerow(
                    [
                        rec.t, name, _fmt(rec.error(name)), _fmt(est.residual),
                        est.search_size, est.candidates_evaluated,
                        _gamma_label(est.chosen_gamma), _fmt(est.kappa), _fmt(est.bound),
                        "fallback" if est.fallback else "ok",
                    ]
                    + [_fmt(v) for v in est.x_hat]
                )


def write_agreement_csv(trace: RunTrace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "representative", "class", "agreeable", "n_disagreeing"])
        for rec in trace.windows:
            if rec.report is not None:
                w.writerows(rec.report.csv_rows(rec.t))


def summarize(trace: RunTrace, pipeline: Pipeline) -> dict:
    """Per-estimator means over windows plus bound-violation counts."""
    psi = pipeline.bounds.psi_bar
    out = {}
    for name in (FSSE, EXHAUSTIVE):
        ests = [(r, getattr(r, name)) for r in trace.windows]
        ran = [(r, e) for r, e in ests if e is not None or getattr(r, f"{name}_failure")]
        if not ran:
            continue
        ok = [(r, e) for r, e in ran if e is not None]
        errors = [r.error(name) for r, _ in ok]
        kappa = pipeline.constants.kappa_fsse if name == FSSE else pipeline.constants.kappa_full
        radius = pipeline.constants.radius(kappa, psi)
        out[name] = {
            "windows": len(ran),
            "exhausted": len(ran) - len(ok),
            "mean_error_norm": float(np.mean(errors)) if errors else None,
            "max_error_norm": float(np.max(errors)) if errors else None,
            "mean_search_size": float(np.mean([e.search_size for _, e in ok])) if ok else None,
            "mean_candidates_evaluated": float(np.mean([e.candidates_evaluated for _, e in ok])) if ok else None,
            "fallbacks": sum(1 for _, e in ok if e.fallback),
            "wall_seconds": float(sum(getattr(r, f"{name}_seconds") for r, _ in ran)),
            "certified_radius": radius,
            "bound_violations": sum(1 for err in errors if err > radius),
        }
    return out
