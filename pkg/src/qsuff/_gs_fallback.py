"""Pure-Python version of the pivoted Gram-Schmidt append."""
import numpy as np


def _project_out(Q, k, v):
    if k:
        B = Q[:k]
        for _ in range(2):
            v = v - (v @ B.T) @ B
    return v


def gs_extend(Q, k, C, tol):
    """Append an orthonormal basis of the part of ``span(C)`` orthogonal to ``Q[:k]``.

    Same contract as the compiled kernel: the candidate with the largest
    remaining norm is taken first, ``tol`` is absolute, ``Q`` is filled in
    place and the new number of basis rows is returned.
    """
    cap = Q.shape[0]
    if C.shape[0] == 0 or k >= cap:
        return k
    R = _project_out(Q, k, np.array(C, dtype=float))
    nrm = np.linalg.norm(R, axis=1)
    while k < cap:
        best = int(np.argmax(nrm))
        if nrm[best] <= tol:
            break
        q = _project_out(Q, k, R[best])
        r = np.linalg.norm(q)
        if r <= tol:
            nrm[best] = 0.0
            continue
        q = q / r
        Q[k] = q
        k += 1
        R -= np.outer(R @ q, q)
        nrm = np.linalg.norm(R, axis=1)
        nrm[best] = 0.0
    return k
