"""Structure constants of sl_M and their contraction identities.

Basis: the elementary matrices E_ij (i != j) followed by the simple coroots
h_i = E_ii - E_{i+1,i+1}.  This basis is not orthonormal for the trace form,
so every contraction of a repeated index pair inserts one factor of the
inverse Gram matrix.  M * Gram^{-1} is integer-valued, which lets all
contractions run over the integers (numpy int64 with a certified overflow
bound per step, falling back to python-int arrays if a step's bound fails).

The identity suite checks, exactly:

  1.  f_ade f_bdg t_ceg  =  -M t_abc
  2.  t_abc t_dbc        =  2 (M^2-4)/M  (a,d form)
  3.  f_abc f_dbc        =  -2M          (a,d form)
  4.  f_ade t_bgd t_ceg  =  (M^2-4)/M  f_abc
  5.  f_ade f_dfg f_ehi t_bfh t_cgi          = 0
  6.  f_acd f_def f_egh f_fij t_bgi t_chj    = 0
  7.  f_acd f_def f_egh f_fij t_bhj t_cgi    = 0
  8.  sym_(bcd) t_eab t_cde  =  sym_(abcd) t_eab t_cde
"""

import itertools
import time

import numpy as np

from .rationals import ONE, Q, ZERO

_INT64_SAFE = 2**62


class SLBasis:
    """Basis data for sl_M: matrices, Gram form, inverse Gram, f and t tensors."""

    def __init__(self, M):
        self.M = M
        self.dim = M * M - 1
        mats = []
        labels = []
        for i in range(M):
            for j in range(M):
                if i != j:
                    m = np.zeros((M, M), dtype=np.int64)
                    m[i, j] = 1
                    mats.append(m)
                    labels.append(("e", i, j))
        for i in range(M - 1):
            m = np.zeros((M, M), dtype=np.int64)
            m[i, i] = 1
            m[i + 1, i + 1] = -1
            mats.append(m)
            labels.append(("h", i))
        self.mats = np.array(mats)
        self.labels = labels
        self.index = {lab: i for i, lab in enumerate(labels)}

        X = self.mats
        # T[a,b,c] = tr(X_a X_b X_c); f = T - T^(ba c), t = T + T^(ba c)
        T = np.einsum("aij,bjk,cki->abc", X, X, X)
        self.f = T - T.transpose(1, 0, 2)
        self.t = T + T.transpose(1, 0, 2)
        self.gram = np.einsum("aij,bji->ab", X, X)
        self.gram_inv = _invert_exact(self.gram)
        gs = [[self.gram_inv[i][j] * M for j in range(self.dim)] for i in range(self.dim)]
        for row in gs:
            for v in row:
                assert v.denominator == 1, "M * Gram^{-1} expected integral"
        self.gram_inv_scaled = np.array([[int(v) for v in row] for row in gs], dtype=np.int64)

        # commutators of basis elements expanded back in the basis (integer coeffs)
        self.comm = {}
        for a in range(self.dim):
            for b in range(a + 1, self.dim):
                mat = X[a] @ X[b] - X[b] @ X[a]
                exp = self.expand(mat)
                if exp:
                    self.comm[(a, b)] = tuple((k, c) for k, c in exp.items())

    def expand(self, mat):
        """Expand a traceless matrix in the basis; returns {index: Q} (exact)."""
        out = {}
        M = self.M
        for idx, lab in enumerate(self.labels):
            if lab[0] == "e":
                v = mat[lab[1], lab[2]]
                if v:
                    out[idx] = Q(int(v)) if not isinstance(v, Q) else v
        # diagonal part: coefficients of h_i are partial sums of the diagonal
        partial = ZERO
        for i in range(M - 1):
            d = mat[i, i]
            partial = partial + (Q(int(d)) if not isinstance(d, Q) else d)
            if partial:
                out[self.index[("h", i)]] = partial
        return out

    def comm_pair(self, a, b):
        """[X_a, X_b] as a sparse tuple of (basis index, integer coeff)."""
        if a == b:
            return ()
        if a < b:
            return self.comm.get((a, b), ())
        return tuple((k, -c) for k, c in self.comm.get((b, a), ()))

    def pairing(self, a, b):
        """(X_a | X_b) = tr(X_a X_b), as an int."""
        return int(self.gram[a, b])

    def raise_tensor(self, tensor, slots):
        """Contract the given slots of an integer tensor with Gram^{-1}.

        Returns a sparse dict {multi_index: Q}.  Used for the dual-basis
        expansions of the quadratic and cubic state builders.
        """
        arr = np.array(tensor, dtype=object)
        ginv = np.array([[self.gram_inv[i][j] for j in range(self.dim)]
                         for i in range(self.dim)], dtype=object)
        for s in slots:
            arr = np.tensordot(arr, ginv, ([s], [0]))
            arr = np.moveaxis(arr, -1, s)
        out = {}
        it = np.nditer(np.zeros(arr.shape), flags=["multi_index"])
        for _ in it:
            v = arr[it.multi_index]
            if v:
                out[it.multi_index] = Q(v)
        return out


def _invert_exact(mat):
    """Exact inverse of an integer matrix via rational Gauss-Jordan."""
    n = len(mat)
    a = [[Q(int(mat[i, j])) for j in range(n)] for i in range(n)]
    inv = [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col])
        a[col], a[piv] = a[piv], a[col]
        inv[col], inv[piv] = inv[piv], inv[col]
        s = ONE / a[col][col]
        a[col] = [v * s for v in a[col]]
        inv[col] = [v * s for v in inv[col]]
        for r in range(n):
            if r != col and a[r][col]:
                c = a[r][col]
                a[r] = [v - c * w for v, w in zip(a[r], a[col])]
                inv[r] = [v - c * w for v, w in zip(inv[r], inv[col])]
    return inv


# --- certified exact contraction engine --------------------------------

def _maxabs(arr):
    if arr.size == 0:
        return 0
    return int(np.max(np.abs(arr)))


def _cert_tensordot(A, B, axes_a, axes_b):
    """tensordot that is exact: int64 when a per-step bound certifies no
    overflow, python-int (object dtype) otherwise."""
    k = 1
    for ax in axes_a:
        k *= A.shape[ax]
    if (A.dtype != object and B.dtype != object
            and k * _maxabs(A) * _maxabs(B) < _INT64_SAFE):
        return np.tensordot(A, B, (axes_a, axes_b))
    return np.tensordot(A.astype(object), B.astype(object), (axes_a, axes_b))


def _apply_ginv(arr, letters, pos, ginv_s):
    out = _cert_tensordot(arr, ginv_s, [pos], [0])
    out = np.moveaxis(out, -1, pos)
    return out


def _contract_chain(tensors, ginv_s):
    """Contract a list of (array, letters) left to right.

    Each index letter appears at most twice across the network; the second
    occurrence is pre-multiplied by the scaled inverse Gram (tracked in the
    returned count so the caller can divide by M**count).  Returns
    (array, letters, ginv_count).
    """
    seen = set()
    count = 0
    prepared = []
    for arr, letters in tensors:
        for pos, l in enumerate(letters):
            if l in seen:
                arr = _apply_ginv(arr, letters, pos, ginv_s)
                count += 1
            else:
                seen.add(l)
        prepared.append((arr, list(letters)))
    cur, curl = prepared[0]
    for arr, letters in prepared[1:]:
        common = [l for l in curl if l in letters]
        ax_a = [curl.index(l) for l in common]
        ax_b = [letters.index(l) for l in common]
        cur = _cert_tensordot(cur, arr, ax_a, ax_b)
        curl = [l for l in curl if l not in common] + [l for l in letters if l not in common]
    return cur, curl, count


def _contract_batched(tensors, ginv_s, batch_letter):
    """Contract with an outer python loop over one free index, to keep the
    intermediate arrays at most rank 4."""
    host = next(i for i, (_, ls) in enumerate(tensors) if batch_letter in ls)
    arr, letters = tensors[host]
    ax = letters.index(batch_letter)
    rest_letters = letters[:ax] + letters[ax + 1:]
    dim = arr.shape[ax]
    slices = []
    out_letters = None
    count = 0
    for v in range(dim):
        sl = np.take(arr, v, axis=ax)
        mod = list(tensors)
        mod[host] = (sl, rest_letters)
        r, rl, cnt = _contract_chain(mod, ginv_s)
        slices.append(r)
        out_letters, count = rl, cnt
    if any(s.dtype == object for s in slices):
        slices = [s.astype(object) for s in slices]
    stacked = np.stack(slices, axis=0)
    return stacked, [batch_letter] + out_letters, count


def _reorder(arr, letters, target):
    perm = [letters.index(l) for l in target]
    return np.transpose(arr, perm)


def _eq_scaled(lhs, mpow, M, coeff, rhs):
    """Check lhs / M**mpow == coeff * rhs exactly (integer cross-multiply)."""
    coeff = Q(coeff)
    left = lhs.astype(object) * int(coeff.denominator)
    right = rhs.astype(object) * (int(coeff.numerator) * M**mpow)
    return bool(np.array_equal(left, right))


def _is_zero(arr):
    if arr.dtype == object:
        return all(v == 0 for v in arr.flat)
    return not np.any(arr)


def verify_tensor_identities(M, t_override=None):
    """Run the eight contraction identities for sl_M; returns a list of
    {name, exactZero, runtimeMs} records.  `t_override` substitutes a wrong
    symmetric tensor (fault injection hook for the CLI self-test)."""
    basis = SLBasis(M)
    f, t, G, Gs = basis.f, basis.t, basis.gram, basis.gram_inv_scaled
    if t_override is not None:
        t = t_override
    records = []

    def run(name, fn):
        t0 = time.time()
        ok = fn()
        records.append({
            "name": name,
            "exactZero": bool(ok),
            "runtimeMs": round(1000 * (time.time() - t0), 2),
        })

    def id1():
        lhs, ls, c = _contract_chain([(f, "ade"), (f, "bdg"), (t, "ceg")], Gs)
        return _eq_scaled(_reorder(lhs, ls, "abc"), c, M, Q(-M), t)

    def id2():
        lhs, ls, c = _contract_chain([(t, "abc"), (t, "dbc")], Gs)
        return _eq_scaled(_reorder(lhs, ls, "ad"), c, M, Q(2 * (M * M - 4), M), G)

    def id3():
        lhs, ls, c = _contract_chain([(f, "abc"), (f, "dbc")], Gs)
        return _eq_scaled(_reorder(lhs, ls, "ad"), c, M, Q(-2 * M), G)

    def id4():
        lhs, ls, c = _contract_chain([(f, "ade"), (t, "bgd"), (t, "ceg")], Gs)
        return _eq_scaled(_reorder(lhs, ls, "abc"), c, M, Q(M * M - 4, M), f)

    def id5():
        lhs, ls, _ = _contract_batched(
            [(f, "ade"), (f, "dfg"), (f, "ehi"), (t, "bfh"), (t, "cgi")], Gs, "a")
        return _is_zero(lhs)

    def id6():
        lhs, ls, _ = _contract_batched(
            [(t, "bgi"), (f, "egh"), (f, "fij"), (t, "chj"), (f, "def"), (f, "acd")],
            Gs, "b")
        return _is_zero(lhs)

    def id7():
        lhs, ls, _ = _contract_batched(
            [(t, "bhj"), (f, "egh"), (f, "fij"), (t, "cgi"), (f, "def"), (f, "acd")],
            Gs, "b")
        return _is_zero(lhs)

    def id8():
        U, ls, c = _contract_chain([(t, "eab"), (t, "cde")], Gs)
        U = _reorder(U, ls, "abcd").astype(object)
        perms3 = [(0, 1, 2, 3), (0, 1, 3, 2), (0, 2, 1, 3),
                  (0, 2, 3, 1), (0, 3, 1, 2), (0, 3, 2, 1)]
        X = sum(np.transpose(U, p) for p in perms3)
        Y = sum(np.transpose(U, p) for p in itertools.permutations(range(4)))
        return bool(np.array_equal(4 * X, Y))

    run("ff.t = -M t", id1)
    run("t.t = 2(M^2-4)/M form", id2)
    run("f.f = -2M form", id3)
    run("f.tt = (M^2-4)/M f", id4)
    run("quintic fff.tt (3-index) = 0", id5)
    run("quintic ffff.tt (first pairing) = 0", id6)
    run("quintic ffff.tt (second pairing) = 0", id7)
    run("partial vs full symmetrization of tt", id8)
    return records
