"""Independent cvxpy oracle for white-noise robustness of the reduced switch."""
import sys
import numpy as np
import cvxpy as cp
from common import tr_replace, switch_process, fixed_instruments, kron

DIMS = [2, 2, 2, 2, 2]  # AI AO BI BO C
AI, AO, BI, BO, C = range(5)


def map_matrix(f, D):
    M = np.zeros((D * D, D * D))
    for k in range(D * D):
        E = np.zeros(D * D)
        E[k] = 1
        M[:, k] = f(E.reshape(D, D)).reshape(-1).real
    return M


def vecC(X):
    n = X.shape[0]
    return cp.reshape(X, (n * n,), order="C")


def diff_map(dims, s1, s2):
    D = int(np.prod(dims))
    return map_matrix(lambda X: tr_replace(X, dims, s1) - tr_replace(X, dims, s2), D)


def solve(prob):
    prob.solve(solver=cp.SCS, eps=1e-9, max_iters=200000)
    return prob


def ttt(Wred):
    D = 32
    N = np.eye(D) / 8
    eta = cp.Variable()
    W1 = cp.Variable((D, D), hermitian=True)
    W2 = cp.Variable((D, D), hermitian=True)
    cons = [W1 >> 0, W2 >> 0, W1 + W2 == eta * N + (1 - eta) * Wred]
    for W, first, second in ((W1, AO, BO), (W2, BO, AO)):
        # _C W = _{second C} W ; _{first-party' in/out...}
        cons.append(diff_map(DIMS, [C], [second, C]) @ vecC(W) == 0)
        fin = AI if first == AO else BI
        sin = BI if first == AO else AI
        cons.append(diff_map(DIMS, [sin, second, C], [first, sin, second, C]) @ vecC(W) == 0)
    p = solve(cp.Problem(cp.Minimize(eta), cons))
    return eta.value


def contract(W, dims, parties, op):
    """Tr_parties[(op (x) 1) W] keeping the remaining factors in order."""
    n = len(dims)
    full = np.kron(op, np.eye(int(np.prod([d for i, d in enumerate(dims) if i not in parties]))))
    # permute W so parties come first
    order = list(parties) + [i for i in range(n) if i not in parties]
    T = W.reshape(dims + dims).transpose(order + [n + i for i in order])
    pd = [dims[i] for i in order]
    Wp = T.reshape(int(np.prod(pd)), -1)
    X = full @ Wp
    dp = int(np.prod([dims[i] for i in parties]))
    dr = Wp.shape[0] // dp
    return np.einsum("iaib->ab", X.reshape(dp, dr, dp, dr))


if __name__ == "__main__":
    _, R = switch_process()
    print("TTT", ttt(R))


def noisy(R, eta):
    return eta * np.eye(32) / 8 + (1 - eta) * R


def affine_assemblage(R, build):
    """Return (w_noise, w_switch) where build(W) gives a list of operators."""
    return build(np.eye(32) / 8), build(R)


def ttu(R, variant=0):
    A, M = fixed_instruments()
    build = lambda W: [contract(W, DIMS, [C], M[0][c]) for c in range(2)]
    wn, wr = affine_assemblage(R, build)
    eta = cp.Variable()
    dims4 = [2, 2, 2, 2]
    cons = []
    sums = []
    comps = []
    for k in range(2):
        ws = [cp.Variable((16, 16), hermitian=True) for _ in range(2)]
        comps.append(ws)
        cons += [w >> 0 for w in ws]
        S = ws[0] + ws[1]
        if k == 0:
            cons.append(diff_map(dims4, [], [3]) @ vecC(S) == 0)
            cons.append(diff_map(dims4, [2, 3], [1, 2, 3]) @ vecC(S) == 0)
        else:
            cons.append(diff_map(dims4, [], [1]) @ vecC(S) == 0)
            cons.append(diff_map(dims4, [0, 1], [0, 1, 3]) @ vecC(S) == 0)
    for c in range(2):
        cons.append(comps[0][c] + comps[1][c] == eta * wn[c] + (1 - eta) * wr[c])
    solve(cp.Problem(cp.Minimize(eta), cons))
    return eta.value


def tuu(R, variant=0):
    A, M = fixed_instruments()
    # w_{bc|y} on AI AO
    def build(W):
        out = {}
        for y in range(2):
            for b in range(2):
                for c in range(2):
                    out[(b, c, y)] = contract(W, DIMS, [BI, BO, C], np.kron(A[y][b], M[0][c]))
        return out
    wn, wr = build(np.eye(32) / 8), build(R)
    eta = cp.Variable()
    keys = list(wn.keys())
    comps = [{k: cp.Variable((4, 4), hermitian=True) for k in keys} for _ in range(2)]
    cons = []
    d2 = [2, 2]
    for comp in comps:
        cons += [v >> 0 for v in comp.values()]
    for k in keys:
        cons.append(comps[0][k] + comps[1][k] == eta * wn[k] + (1 - eta) * wr[k])
    # A<B<C: sum_bc independent of y
    s0 = [sum(comps[0][(b, c, y)] for b in range(2) for c in range(2)) for y in range(2)]
    cons.append(s0[0] == s0[1])
    cons.append(diff_map(d2, [], [1]) @ vecC(s0[0]) == 0)
    # B<A<C: sum_c w = _{AO} sum_c w
    for y in range(2):
        for b in range(2):
            s = comps[1][(b, 0, y)] + comps[1][(b, 1, y)]
            cons.append(diff_map(d2, [], [1]) @ vecC(s) == 0)
    if variant == 0:
        s1 = [sum(comps[1][(b, c, y)] for b in range(2) for c in range(2)) for y in range(2)]
        cons.append(cp.real(cp.trace(s1[0])) == cp.real(cp.trace(s1[1])))
    solve(cp.Problem(cp.Minimize(eta), cons))
    return eta.value


def ro_map(d3):
    return map_matrix(lambda X: tr_replace(X, d3, [2]), 8)


def utt(R, variant=0):
    A, M = fixed_instruments()
    # w_{a|x} on BI BO C
    build = lambda W: {(a, x): contract(W, DIMS, [AI, AO], A[x][a]) for a in range(2) for x in range(2)}
    wn, wr = build(np.eye(32) / 8), build(R)
    keys = list(wn.keys())
    eta = cp.Variable()
    comps = [{k: cp.Variable((8, 8), hermitian=True) for k in keys} for _ in range(2)]
    d3 = [2, 2, 2]  # BI BO C
    cons = []
    for comp in comps:
        cons += [v >> 0 for v in comp.values()]
    for k in keys:
        cons.append(comps[0][k] + comps[1][k] == eta * wn[k] + (1 - eta) * wr[k])
    for k in keys:
        cons.append(diff_map(d3, [2], [1, 2]) @ vecC(comps[0][k]) == 0)
    if variant == 0:
        s0 = [comps[0][(0, x)] + comps[0][(1, x)] for x in range(2)]
        cons.append(cp.real(cp.trace(s0[0])) == cp.real(cp.trace(s0[1])))
    s1 = [comps[1][(0, x)] + comps[1][(1, x)] for x in range(2)]
    L = ro_map(d3)
    cons.append(L @ vecC(s1[0] - s1[1]) == 0)
    cons.append(diff_map(d3, [2], [1, 2]) @ vecC(s1[0]) == 0)
    solve(cp.Problem(cp.Minimize(eta), cons))
    return eta.value
