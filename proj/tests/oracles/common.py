"""Shared numpy helpers for the independent oracles (cvxpy based)."""
import numpy as np


def tr_replace(W, dims, keep_out):
    """Trace out the factors in keep_out and replace them with normalized identity."""
    n = len(dims)
    res = W.reshape(dims + dims)
    for k in keep_out:
        res = np.trace(res, axis1=k, axis2=n + k)
        res = np.expand_dims(np.expand_dims(res, k), n + k)
        eye_shape = [1] * (2 * n)
        eye_shape[k] = dims[k]
        eye_shape[n + k] = dims[k]
        eye = np.eye(dims[k]).reshape(eye_shape) / dims[k]
        res = res * eye
    D = int(np.prod(dims))
    return res.reshape(D, D)


def ket(*bits):
    v = np.zeros(2 ** len(bits))
    v[int("".join(str(b) for b in bits), 2) if bits else 0] = 1
    return v


def kron(*xs):
    out = np.array([[1.0]])
    for x in xs:
        out = np.kron(out, x)
    return out


PLUS = np.array([1, 1]) / np.sqrt(2)
MINUS = np.array([1, -1]) / np.sqrt(2)
Z0 = np.array([1.0, 0.0])
Z1 = np.array([0.0, 1.0])


def proj(v):
    v = np.asarray(v, dtype=complex).reshape(-1, 1)
    return v @ v.conj().T


def fixed_instruments():
    """Two-setting, two-outcome qubit instruments on input (x) output."""
    A = [[proj(np.kron(Z0, Z0)), proj(np.kron(Z1, Z1))],
         [proj(np.kron(PLUS, PLUS)), proj(np.kron(MINUS, MINUS))]]
    M = [[proj(PLUS), proj(MINUS)]]
    return A, M


def switch_process(alpha=1 / np.sqrt(2), beta=1 / np.sqrt(2)):
    """Full switch on AI AO BI BO CIt CIc (all qubits) and its CIt-reduced version."""
    psi = Z0
    # index order: AI AO BI BO CIt CIc
    w = np.zeros(64, dtype=complex)
    for i in range(2):
        for j in range(2):
            # A first: AO-BI identity |ii>, BO-CIt identity |jj>
            v = np.zeros((2,) * 6, dtype=complex)
            v[0, i, i, j, j, 0] = 1
            w += alpha * psi[0] * v.reshape(-1)
            # B first: BO-AI identity |ii>, AO-CIt identity |jj>
            v = np.zeros((2,) * 6, dtype=complex)
            v[i, j, 0, i, j, 1] = 1
            w += beta * psi[0] * v.reshape(-1)
    W = np.outer(w, w.conj())
    T = W.reshape((2,) * 12)
    red = np.trace(T, axis1=4, axis2=10).reshape(32, 32)
    return W, red
