"""Discrete-time LTI plant, stacked observation blocks and noise envelopes.

Sensors are indexed from 0 in the API. Serialized documents and printed
tables use 1-based labels (``S1`` ... ``Sp``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

DEFAULT_RANK_TOL = 1e-10


class DimensionError(ValueError):
    """Matrix shapes or window lengths are inconsistent."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def numerical_rank(M: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    """Count singular values above ``rank_tol * sigma_max``."""
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rank_tol * sv[0]))


@dataclass(frozen=True)
class SystemModel:
    """x(t+1) = A x(t) + B u(t) + w(t),  y(t) = C x(t) + a(t) + v(t).

    ``s_max`` is the assumed bound on the number of attacked sensors and
    ``tau`` the observation window length (defaults to n).
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    s_max: int
    tau: Optional[int] = None
    rank_tol: float = DEFAULT_RANK_TOL

    def __post_init__(self):
        A = _frozen(self.A)
        B = _frozen(self.B)
        C = _frozen(self.C)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        if B.ndim == 1:
            B = _frozen(B.reshape(n, -1) if B.size else np.zeros((n, 0)))
        if B.ndim != 2 or B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got shape {B.shape}")
        if C.ndim != 2 or C.shape[1] != n:
            raise DimensionError(f"C must have {n} columns, got shape {C.shape}")
        tau = n if self.tau is None else int(self.tau)
        if not 1 <= tau <= n:
            raise DimensionError(f"tau must lie in [1, {n}], got {tau}")
        p = C.shape[0]
        if self.s_max < 0 or 2 * self.s_max >= p:
            raise DimensionError(
                f"need 0 <= s_max and 2*s_max < p; got s_max={self.s_max}, p={p}"
            )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "s_max", int(self.s_max))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class ObservationStack:
    """Per-sensor window operators.

    ``O[i]`` is the tau x n block (C_i, C_i A, ..., C_i A^(tau-1)), ``F[i]``
    maps the stacked input U to sensor i's window, and ``G[i]`` maps the
    stacked process noise W to it. ``ranks[i]`` is the numerical rank of O[i].
    """

    O: np.ndarray  # (p, tau, n)
    F: np.ndarray  # (p, tau, tau*m)
    G: np.ndarray  # (p, tau, tau*n)
    ranks: tuple
    rank_tol: float = DEFAULT_RANK_TOL

    @property
    def p(self) -> int:
        return self.O.shape[0]

    @property
    def tau(self) -> int:
        return self.O.shape[1]

    @property
    def n(self) -> int:
        return self.O.shape[2]

    def stacked(self, sensors: Sequence[int]) -> np.ndarray:
        """Row-stack O_i for the given sensors (in the given order)."""
        return self.O[list(sensors)].reshape(-1, self.n)


@dataclass(frozen=True)
class NoiseBounds:
    w_bound: float
    v_bounds: np.ndarray
    psi_bar_i: np.ndarray
    psi_bar: float
    disturbance: Optional[np.ndarray] = None


@dataclass(frozen=True)
class MeasurementWindow:
    """Input-compensated outputs over the window ending at ``t``.

    ``Y`` and ``raw`` are (p, tau) arrays; row i holds sensor i's samples
    from t - tau + 1 to t.
    """

    t: int
    Y: np.ndarray
    U: np.ndarray
    raw: np.ndarray


def build_observation_stack(model: SystemModel) -> ObservationStack:
    n, m, p, tau = model.n, model.m, model.p, model.tau
    # powers[k] = A^k
    powers = [np.eye(n)]
    for _ in range(1, tau):
        powers.append(powers[-1] @ model.A)

    O = np.empty((p, tau, n))
    F = np.zeros((p, tau, tau * m))
    G = np.zeros((p, tau, tau * n))
    for i in range(p):
        c = model.C[i]
        rows = [c @ P for P in powers]
        O[i] = np.vstack(rows)
        for r in range(1, tau):
            for col in range(r):
                k = r - 1 - col
                F[i, r, col * m:(col + 1) * m] = rows[k] @ model.B
                G[i, r, col * n:(col + 1) * n] = rows[k]
    ranks = tuple(numerical_rank(O[i], model.rank_tol) for i in range(p))
    return ObservationStack(_frozen(O), _frozen(F), _frozen(G), ranks, model.rank_tol)


def compute_noise_bounds(
    model: SystemModel,
    stack: ObservationStack,
    w_bound: float,
    v_bounds,
    disturbance=None,
) -> NoiseBounds:
    """Window noise envelopes psi_bar_i >= ||Psi_i(t)||_2.

    Process noise is w(t) = E d(t) with ||d(t)||_2 <= w_bound, where E is
    ``disturbance`` (identity when omitted); measurement noise satisfies
    |v_i(t)| <= v_bounds[i]. The envelope is
    ||G_i (I_tau kron E)||_2 * sqrt(tau) * w_bound + sqrt(tau) * v_bounds[i].
    """
    p, tau, n = stack.p, stack.tau, stack.n
    v = np.broadcast_to(np.asarray(v_bounds, dtype=float), (p,)).copy()
    if w_bound < 0 or np.any(v < 0):
        raise ValueError("noise bounds must be nonnegative")
    E = np.eye(n) if disturbance is None else np.asarray(disturbance, dtype=float)
    if E.ndim == 1:
        E = E.reshape(n, 1)
    if E.shape[0] != n:
        raise DimensionError(f"disturbance matrix must have {n} rows, got {E.shape}")
    lifted = np.kron(np.eye(tau), E)
    root_tau = np.sqrt(tau)
    psi_i = np.empty(p)
    for i in range(p):
        gain = np.linalg.norm(stack.G[i] @ lifted, 2) if w_bound > 0 else 0.0
        psi_i[i] = gain * root_tau * w_bound + root_tau * v[i]
    psi = float(np.sqrt(np.sum(psi_i**2)))
    return NoiseBounds(
        float(w_bound),
        _frozen(v),
        _frozen(psi_i),
        psi,
        None if disturbance is None else _frozen(E),
    )


def stack_window(
    model: SystemModel,
    stack: ObservationStack,
    raw_history,
    input_history,
    t: Optional[int] = None,
) -> MeasurementWindow:
    """Form Y_i = Ytilde_i - F_i U from the last tau outputs and inputs.

    ``raw_history`` is (tau, p) and ``input_history`` is (tau, m), oldest
    sample first.
    """
    tau = stack.tau
    raw = np.asarray(raw_history, dtype=float)
    u = np.asarray(input_history, dtype=float)
    if u.ndim == 1:
        u = u.reshape(tau, -1) if u.size else np.zeros((tau, 0))
    if raw.shape != (tau, model.p):
        raise DimensionError(f"expected output history of shape {(tau, model.p)}, got {raw.shape}")
    if u.shape != (tau, model.m):
        raise DimensionError(f"expected input history of shape {(tau, model.m)}, got {u.shape}")
    U = u.reshape(-1)
    raw_by_sensor = raw.T.copy()
    Y = raw_by_sensor - stack.F @ U if model.m else raw_by_sensor.copy()
    return MeasurementWindow(
        t=tau - 1 if t is None else int(t),
        Y=_frozen(Y),
        U=_frozen(U),
        raw=_frozen(raw_by_sensor),
    )
