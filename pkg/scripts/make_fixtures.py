"""Regenerate the scenario fixtures shipped in src/fsse/fixtures.

The three-inertia plant is discretized with a zero-order hold (matrix
exponential of the augmented system). Run from the repository root:

    python3 scripts/make_fixtures.py
"""

import json
from pathlib import Path

import numpy as np
from scipy.linalg import expm

OUT = Path(__file__).resolve().parent.parent / "src" / "fsse" / "fixtures"

# inertia, damping, shaft stiffness, sampling period
J, DAMP, STIFF, H = 0.01, 0.005, 1.4, 0.1


def three_inertia():
    k, b = STIFF / J, DAMP / J
    Ac = np.array([
        [0, 1, 0, 0, 0, 0],
        [-k, -b, k, 0, 0, 0],
        [0, 0, 0, 1, 0, 0],
        [k, 0, -2 * k, -b, k, 0],
        [0, 0, 0, 0, 0, 1],
        [0, 0, k, 0, -k, -b],
    ])
    Bc = np.zeros((6, 1))
    Bc[1, 0] = 1 / J  # motor torque on the first inertia
    Dc = np.zeros((6, 1))
    Dc[5, 0] = 1 / J  # load torque disturbance on the last inertia
    n, q = 6, 2
    aug = np.zeros((n + q, n + q))
    aug[:n, :n] = Ac
    aug[:n, n:] = np.hstack([Bc, Dc])
    phi = expm(aug * H)
    A, Bd = phi[:n, :n], phi[:n, n:]
    C = np.array([
        [1, 0, 0, 0, 0, 0],
        [0, 0, 1, 0, 0, 0],
        [0, 0, 0, 0, 1, 0],
        [1, 0, -1, 0, 0, 0],
        [1, 0, 0, 0, -1, 0],
        [0, 0, 1, 0, -1, 0],
    ], dtype=float)
    return A, Bd[:, :1], Bd[:, 1:], C


def _doc(name, A, B, C, s_max, tau, **extra):
    doc = {
        "name": name,
        "A": A.tolist(),
        "B": B.tolist(),
        "C": C.tolist(),
        "tau": tau,
        "s_max": s_max,
    }
    doc.update(extra)
    return doc


def _write(name, doc):
    path = OUT / f"{name}.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print("wrote", path)


CASES = {
    "case1": ([5, 6], [[0.0, 2.0], [0.0, 2.0]]),
    "case2": ([2, 5], [[-5.0, 5.0], [-5.0, 5.0]]),
    "case3": ([3, 6], [[0.0, 2.0], [0.0, 2.0]]),
    "case4": ([4, 6], [[0.0, 1.0], [0.0, 1.0]]),
}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    A, B, E, C = three_inertia()
    base = dict(
        noise={"w_bound": 0.01, "v_bounds": 0.001, "disturbance": E.tolist()},
        x0=[-0.2, 0.1, 0.0, 0.3, 0.1, 0.2],
        horizon=100,
        control={
            "gain": [[0.7732, -0.0718, -0.8379, -0.0351, -0.0137, -0.0213]],
            "amplitude": 1.0,
            "frequency": 0.2,
        },
        estimator="both",
        agreement="mean",
        seed=0,
    )
    _write("three_inertia", _doc("three-inertia, attack free", A, B, C, 2, 6, **base))
    for key, (sensors, ranges) in CASES.items():
        doc = _doc(f"three-inertia {key}", A, B, C, 2, 6, **base)
        doc["attack"] = {"sensors": sensors, "ranges": ranges}
        _write(f"three_inertia_{key}", doc)

    f16 = np.array([
        [9.0649e-1, 8.1601e-2, -5.0128e-4],
        [7.4135e-2, 9.0121e-1, -7.0423e-3],
        [0.0, 0.0, 1.3266e-1],
    ])
    _write("f16", _doc("F-16 short period", f16, np.zeros((3, 1)), np.eye(3)[:2], 0, 3,
                       noise={"w_bound": 0.0, "v_bounds": 0.0}, x0=[0.1, 0.0, 0.0], horizon=20))

    b747 = np.array([
        [0.9337, 0.0, -0.0099, 0.0],
        [-0.0845, 0.9994, -0.4537, -0.9791],
        [0.0944, -0.0001, 0.9440, 0.0],
        [0.0967, 0.0, -0.0005, 1.0],
    ])
    _write("b747", _doc("B747-100/200 lateral", b747, np.zeros((4, 1)), np.eye(4), 1, 4,
                        noise={"w_bound": 0.0, "v_bounds": 0.0}, x0=[0.1, 0.0, 0.0, 0.0], horizon=20))


if __name__ == "__main__":
    main()
