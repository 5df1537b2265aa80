"""Regenerate the JSON model files in ``src/qsuff/fixtures``."""
import json
from pathlib import Path

import numpy as np

from qsuff.matcore import PAULI, spin_factor
from qsuff.modelfile import encode_matrix

OUT = Path(__file__).resolve().parents[1] / "src" / "qsuff" / "fixtures"
SX, SY, SZ = PAULI
I2 = np.eye(2)
E11 = np.diag([1.0, 0.0])


def model(rho, elements, **meta):
    return {"dim": int(rho.shape[0]), "reference": encode_matrix(rho),
            "elements": [{"kind": k, "label": lab, "matrix": encode_matrix(X)}
                         for k, lab, X in elements],
            "metadata": {k: str(v) for k, v in meta.items()}}


def fixtures():
    out = {}
    # a commuting family padded by a zero block: diag(rho_theta, 0)
    thetas = [np.diag([0.6, 0.4]), np.diag([0.7, 0.3]), np.diag([0.45, 0.55])]
    out["padded_commuting"] = model(
        np.kron(E11, thetas[0]),
        [("state", f"theta{i}", np.kron(E11, r)) for i, r in enumerate(thetas[1:], 1)],
        description="commuting qubit family embedded as diag(rho, 0) in C^4")
    out["commuting"] = model(
        np.diag([0.5, 0.5]), [("state", "x", np.diag([0.75, 0.25]))],
        description="two commuting qubit states")
    out["qubit_z"] = model(
        I2 / 2, [("derivative", "dz", SZ / 2)],
        description="maximally mixed qubit, one derivative along z")
    out["qubit_local"] = model(
        I2 / 2, [("derivative", "dx", SX / 2), ("derivative", "dz", SZ / 2)],
        description="maximally mixed qubit, derivatives along x and z")
    # X = x (x) diag(a, b) with x ranging over qubit operators generating M_2(C)
    w = np.diag([1.25, 0.75]) / 2
    x0 = np.array([[0.6, 0.1], [0.1, 0.4]], dtype=complex)
    xs = [(I2 + 0.3 * SX + 0.2 * SZ) / 2, (I2 + 0.25 * SY - 0.1 * SZ) / 2]
    out["ki_constructed"] = model(
        np.kron(x0, w),
        [("state", f"s{i}", np.kron(x, w)) for i, x in enumerate(xs)]
        + [("derivative", "d", np.kron(0.2 * SX + 0.1 * SY - 0.3 * SZ, w))],
        description="x (x) diag(1.25, 0.75) with x in M_2(C)", P="1.25,0.75")
    g4 = spin_factor(4).gammas
    out["spin_factor"] = model(
        np.eye(4) / 4, [("derivative", f"d{i}", g / 4) for i, g in enumerate(g4)],
        description="maximally mixed state on C^4, derivatives along the four gamma matrices")
    out["qubit_povm_z"] = {"elements": [encode_matrix(np.diag([1.0, 0.0])),
                                        encode_matrix(np.diag([0.0, 1.0]))]}
    out["qubit_povm_x"] = {"elements": [encode_matrix((I2 + SX) / 2),
                                        encode_matrix((I2 - SX) / 2)]}
    return out


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for name, obj in fixtures().items():
        (OUT / f"{name}.json").write_text(json.dumps(obj, indent=1) + "\n")
        print("wrote", name)
