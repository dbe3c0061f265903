"""Independent reference values, computed with exact rationals and dense numpy.

The printed numbers are frozen into tests/unit. Run: python3 tests/oracles/derive.py
"""

from fractions import Fraction as F

import numpy as np


def f1():
    # F1: r -> a, b; a -> a1, a2; w = (1, 2, 4)
    names = ["r", "a", "b", "a1", "a2"]
    level = [0, 1, 1, 2, 2]
    parent = [-1, 0, 0, 1, 1]
    w = [F(1), F(2), F(4)]
    n = 5
    U = [[w[len(common(i, j, parent))] for j in range(n)] for i in range(n)]
    Ud = np.array([[float(x) for x in row] for row in U])
    Q = -np.linalg.inv(Ud)
    print("F1 Q =\n", np.round(Q, 12))
    keep = [0, 1, 2]
    Qk = Q[np.ix_(keep, keep)]
    V1 = -np.linalg.inv(Qk)
    print("F1 3*V1 =\n", np.round(3 * V1, 12))
    H = Ud[np.ix_(keep, keep)] - V1
    print("F1 3*H =\n", np.round(3 * H, 12))
    # P_i{hit a before killing at level 2 or below r}: absorbing solve on {r, b}
    free = [0, 2]
    A = Qk[np.ix_(free, free)]
    b = -Qk[np.ix_(free, [1])]
    x = np.linalg.solve(A, b).ravel()
    print("F1 W column a on (r, a, b) =", [x[0], 1.0, x[1]])
    print("F1 Q row r dot H column r =", Qk[0] @ H[:, 0])
    _ = names, level


def common(i, j, parent):
    def anc(k):
        out = []
        while k >= 0:
            out.append(k)
            k = parent[k]
        return out[::-1]

    a, b = anc(i), anc(j)
    m = 0
    while m < min(len(a), len(b)) and a[m] == b[m]:
        m += 1
    return a[1:m]  # length = level of the meet


def homog2():
    p = 2
    # w_n = n + 1 gives unit jump rates; the root has p + 1 children and is killed at rate 1/w0 = 1.
    # e: escape inside the own subtree before hitting the parent, from a non-root node
    # e = (p/(p+1)) (e + (1 - e) e), nonzero root
    e = F(1) - F(1, p)
    assert e == F(p, p + 1) * (2 * e - e * e)
    # root escape s = ((p+1)/(p+2)) (e + (1 - e) s)
    a = F(p + 1, p + 2)
    s = a * e / (1 - a * (1 - e))
    print("homog2 absorbed escape P_r =", s, " g(r) =", 1 - s)
    # g(i) at level 1: return to r with prob 1 - e, then killed with prob g(r)
    print("g(level 1) =", (1 - e) * (1 - s))
    # P_r{T_i < inf}, |i| = 1: q = 1/(p+2) + (p/(p+2))(1 - e) q
    q = F(1, p + 2) / (1 - F(p, p + 2) * (1 - e))
    print("P_r{T_i<inf}, |i|=1 =", q)
    G0 = F(1) / s
    G1, G2 = F(2, 3), F(1, 3)
    print("G0, G1, G2 =", G0, G1, G2)
    mu1 = F(1, 3)
    # conditional U of i at level 1 against the ray through i, k = 0: average over mu
    print("cond_U(|i|=1, k=0) =", mu1 * 2 + (1 - mu1) * 1)
    # W^-1 kernel for meet level 0
    print("W^-1 kernel meet 0 =", -F(1) / (G0 * G1))
    # Martin kernel, absorbed, i on the ray at level 1: P_i{T_i}/P_r{T_i}
    print("kappa absorbed |i|=1 on ray =", 1 / q)
    # boundary kernel at meet 0 and 1, t = 1
    t = 1.0
    g0, g1, g2 = float(G0), float(G1), float(G2)
    p0 = np.exp(-t / g0) - np.exp(-t / g1)
    p1 = p0 + (np.exp(-t / g1) - np.exp(-t / g2)) / float(mu1)
    print("p(1, meet 0) =", repr(p0), " p(1, meet 1) =", repr(p1))
    # exit rate from C^1: beta_1 = (1/mu(C1)) [ mu(C1)/G0 + (1/G1)(mu(C1) - mu(C1)... )] closed form
    beta1 = F(1, 3) * (F(3, 5) + F(3, 2) * (3 - 1))
    print("beta_1 =", beta1)
    # reflected V_rr = p/((p+1)(p-1)), G0 = V_rr + w0
    vrr = F(p, (p + 1) * (p - 1))
    print("reflected V_rr =", vrr, " G0 =", vrr + 1)


def f4():
    U = np.array([[1, 1, 1], [1, 2, 1], [1, 1, 3]], dtype=float)
    print("F4 -Q =\n", np.round(np.linalg.inv(U), 12))
    P = np.array([[1, 1], [1, 2]], dtype=float)
    print("pair -Q =\n", np.round(np.linalg.inv(P), 12))
    # extension: added node k below root on the path to 3, value 2; rates of the tree generator
    # root(1) -> node(2) rate 1, root -> added rate 1, added -> node(3) rate 1, kill at root 1
    # hitting probabilities from the added node: up to 1 or down to 3 at equal rates
    print("hitting from added node: (1/2, 1/2)")


if __name__ == "__main__":
    f1()
    homog2()
    f4()
