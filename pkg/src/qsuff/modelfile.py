"""Model files and canonical JSON reports.

A model file is a JSON object::

    {"dim": 2,
     "reference": [[[0.5, 0], [0, 0]], [[0, 0], [0.5, 0]]],
     "elements": [{"kind": "derivative", "label": "dx", "matrix": ...}],
     "metadata": {"name": "..."}}

Matrices are row-major nested lists whose entries are ``[re, im]`` pairs
(a bare real number is accepted too).  The reference state is added to
the elements as a state labelled ``"rho"`` unless an element equal to it
is already present.
"""
import hashlib
import json
import math

import numpy as np

from .errors import InputError
from .matcore import DEFAULT_TOL, check_hermitian, check_psd
from .model import KINDS, STATE, Model, ModelElement


class MalformedFileError(InputError):
    """The file is not valid JSON or does not follow the model layout."""


# ------------------------------------------------------------------ matrices

def decode_matrix(obj, dim=None, what="matrix"):
    """Nested ``[re, im]`` lists to a complex array."""
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise MalformedFileError(f"{what}: expected a non-empty list of rows")
    n = len(obj)
    out = np.empty((n, n), dtype=complex)
    for i, row in enumerate(obj):
        if len(row) != n:
            raise InputError(f"{what}: row {i} has {len(row)} entries, expected {n}")
        for j, z in enumerate(row):
            if isinstance(z, (int, float)) and not isinstance(z, bool):
                out[i, j] = float(z)
            elif (isinstance(z, list) and len(z) == 2
                  and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in z)):
                out[i, j] = complex(z[0], z[1])
            else:
                raise MalformedFileError(f"{what}: entry ({i}, {j}) is not a number or [re, im]")
    if not np.all(np.isfinite(out)):
        raise InputError(f"{what}: non-finite entries")
    if dim is not None and n != dim:
        raise InputError(f"{what}: dimension mismatch, matrix is {n}x{n} but dim is {dim}")
    return out


def encode_matrix(A):
    A = np.asarray(A, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in A]


# --------------------------------------------------------------------- models

def _load_json(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(raw.decode("utf-8")), raw
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedFileError(f"malformed JSON in {path}: {exc}") from exc


def model_from_dict(obj, tol=DEFAULT_TOL):
    """Validate a decoded model file and build the (unrestricted) model."""
    if not isinstance(obj, dict):
        raise MalformedFileError("model file must be a JSON object")
    for key in ("dim", "reference", "elements"):
        if key not in obj:
            raise MalformedFileError(f"model file lacks {key!r}")
    dim = obj["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise MalformedFileError("'dim' must be a positive integer")
    rho = check_psd(decode_matrix(obj["reference"], dim, "reference"), tol.psd, "reference")
    if not isinstance(obj["elements"], list):
        raise MalformedFileError("'elements' must be a list")
    elems = []
    for i, e in enumerate(obj["elements"]):
        if not isinstance(e, dict) or "kind" not in e or "matrix" not in e:
            raise MalformedFileError(f"element {i} needs 'kind' and 'matrix'")
        kind, label = e["kind"], str(e.get("label", f"e{i}"))
        if kind not in KINDS:
            raise InputError(f"element {label!r}: kind must be one of {KINDS}")
        X = decode_matrix(e["matrix"], dim, f"element {label!r}")
        if kind == STATE:
            X = check_psd(X, tol.psd, f"state {label!r}")
        else:
            X = check_hermitian(X, tol.hermitian)
        elems.append(ModelElement(kind, X, label))
    scale = 1.0 + np.linalg.norm(rho)
    if not any(e.kind == STATE and np.linalg.norm(e.X - rho) <= 1e-12 * scale for e in elems):
        elems.insert(0, ModelElement(STATE, rho, "rho"))
    labels = [e.label for e in elems]
    if len(set(labels)) != len(labels):
        raise InputError("element labels must be unique")
    meta = obj.get("metadata", {}) or {}
    if not isinstance(meta, dict):
        raise MalformedFileError("'metadata' must be an object")
    return Model(rho=rho, elements=tuple(elems), metadata={str(k): str(v) for k, v in meta.items()})


def parse_model(path, tol=DEFAULT_TOL):
    """Read a model file; returns ``(model, raw_bytes)``."""
    obj, raw = _load_json(path)
    return model_from_dict(obj, tol), raw


def model_to_dict(m):
    return {
        "dim": m.dim,
        "reference": encode_matrix(m.rho),
        "elements": [{"kind": e.kind, "label": e.label, "matrix": encode_matrix(e.X)}
                     for e in m.elements],
        "metadata": {str(k): str(v) for k, v in m.metadata.items()},
    }


def parse_povm(path, dim):
    """POVM file ``{"elements": [matrix, ...]}``; returns ``(list, raw_bytes)``."""
    obj, raw = _load_json(path)
    if not isinstance(obj, dict) or not isinstance(obj.get("elements"), list) or not obj["elements"]:
        raise MalformedFileError("POVM file must be an object with a non-empty 'elements' list")
    return [decode_matrix(M, dim, f"POVM element {i}") for i, M in enumerate(obj["elements"])], raw


# ------------------------------------------------------------ canonical JSON

def _fmt_float(x):
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = format(x, ".17g")
    if s == "-0":
        s = "0"
    return s


def to_jsonable(obj):
    """Convert numpy arrays and scalars to plain lists and numbers.

    Complex arrays become nested ``[re, im]`` pairs.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return to_jsonable(np.stack([obj.real, obj.imag], axis=-1).tolist())
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _dump(obj, out):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_fmt_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, list):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _dump(v, out)
        out.append("]")
    elif isinstance(obj, dict):
        out.append("{")
        for i, k in enumerate(sorted(obj)):
            if i:
                out.append(",")
            out.append(json.dumps(k, ensure_ascii=True))
            out.append(":")
            _dump(obj[k], out)
        out.append("}")
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def canonical_json(obj):
    """Deterministic JSON text: sorted keys, no spaces, floats at 17 digits.

    Non-finite floats are written as the strings ``"nan"``, ``"inf"`` and
    ``"-inf"``.
    """
    out = []
    _dump(to_jsonable(obj), out)
    return "".join(out)


def digest(*chunks):
    """SHA-256 hex digest of byte strings (str chunks are UTF-8 encoded)."""
    h = hashlib.sha256()
    for c in chunks:
        b = c.encode("utf-8") if isinstance(c, str) else bytes(c)
        h.update(len(b).to_bytes(8, "little"))
        h.update(b)
    return h.hexdigest()
