# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: active-set projection, cascade loop, Monte Carlo block.

Signatures mirror ``cascadia._pykernels``. Flows inside the cascade loop are
computed by a grounded Laplacian solve per connected component, which equals
V(d - g) whenever every component is balanced (always true after balance
restoration).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY
from libc.stdlib cimport malloc, free

from .errors import NumericalFailure

cnp.import_array()

BACKEND = "compiled"

DEPENDENT_TOL = 1e-10
STEP_TOL = 1e-12
MULT_TOL = 1e-12
EQ_TOL = 1e-12
RATIO_TOL = 1e-13
ZERO_FLOW = 1e-12
NEG_GEN_TOL = 1e-9

cdef double _DEP = 1e-10
cdef double _STEP = 1e-12
cdef double _MULT = 1e-12
cdef double _EQ = 1e-12
cdef double _RATIO = 1e-13
cdef double _ZERO_FLOW = 1e-12
cdef double _NEG_GEN = 1e-9


# ---------------------------------------------------------------------------
# small dense helpers
# ---------------------------------------------------------------------------

cdef inline double _dot(const double* a, const double* b, int n) noexcept nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(n):
        s += a[i] * b[i]
    return s


cdef inline const double* _row(const double* V, const double* ones, int cid, int m, int n) noexcept nogil:
    if cid == 0:
        return ones
    if cid <= m:
        return V + (cid - 1) * n
    return V + (cid - m - 1) * n


cdef inline double _rhs(double total, const double* lo, const double* hi, int cid, int m) noexcept nogil:
    if cid == 0:
        return total
    if cid <= m:
        return lo[cid - 1]
    return hi[cid - m - 1]


# ---------------------------------------------------------------------------
# active-set projection
# ---------------------------------------------------------------------------

cdef struct QPWork:
    double* z
    double* ones
    double* proj
    double* step
    double* vx
    double* vp
    double* rownorm
    double* Q
    double* C
    double* T
    double* beta
    double* yk
    double* a
    double* y
    int* kept
    int* work
    char* inset
    char* eq


cdef int _qp_alloc(QPWork* w, int m, int n) noexcept nogil:
    cdef int kc = 2 * m + 1
    w.z = <double*> malloc(n * sizeof(double))
    w.ones = <double*> malloc(n * sizeof(double))
    w.proj = <double*> malloc(n * sizeof(double))
    w.step = <double*> malloc(n * sizeof(double))
    w.a = <double*> malloc(n * sizeof(double))
    w.vx = <double*> malloc(m * sizeof(double))
    w.vp = <double*> malloc(m * sizeof(double))
    w.rownorm = <double*> malloc(m * sizeof(double))
    w.Q = <double*> malloc(kc * n * sizeof(double))
    w.C = <double*> malloc(kc * sizeof(double))
    w.T = <double*> malloc(kc * kc * sizeof(double))
    w.beta = <double*> malloc(kc * sizeof(double))
    w.yk = <double*> malloc(kc * sizeof(double))
    w.y = <double*> malloc(kc * sizeof(double))
    w.kept = <int*> malloc(kc * sizeof(int))
    w.work = <int*> malloc(kc * sizeof(int))
    w.inset = <char*> malloc(kc * sizeof(char))
    w.eq = <char*> malloc(m * sizeof(char))
    if (w.z == NULL or w.ones == NULL or w.proj == NULL or w.step == NULL or w.a == NULL
            or w.vx == NULL or w.vp == NULL or w.rownorm == NULL or w.Q == NULL or w.C == NULL
            or w.T == NULL or w.beta == NULL or w.yk == NULL or w.y == NULL or w.kept == NULL
            or w.work == NULL or w.inset == NULL or w.eq == NULL):
        return -1
    return 0


cdef void _qp_free(QPWork* w) noexcept nogil:
    free(w.z); free(w.ones); free(w.proj); free(w.step); free(w.a)
    free(w.vx); free(w.vp); free(w.rownorm); free(w.Q); free(w.C)
    free(w.T); free(w.beta); free(w.yk); free(w.y); free(w.kept)
    free(w.work); free(w.inset); free(w.eq)


cdef void _project(QPWork* w, const double* V, const double* lo, const double* hi,
                   double total, int m, int n, int k) noexcept nogil:
    """Project w.z onto the face w.work[:k]; fills w.proj and w.y[:k]."""
    cdef int kc = 2 * m + 1
    cdef int i, j, t, r = 0, rep
    cdef double b, norm0, nrm, c, s
    cdef const double* row
    for i in range(k):
        row = _row(V, w.ones, w.work[i], m, n)
        b = _rhs(total, lo, hi, w.work[i], m)
        for t in range(n):
            w.a[t] = row[t]
        norm0 = sqrt(_dot(w.a, w.a, n))
        for j in range(r + 1):
            w.T[j * kc + r] = 0.0
        for rep in range(2):
            for j in range(r):
                c = _dot(w.Q + j * n, w.a, n)
                for t in range(n):
                    w.a[t] -= c * w.Q[j * n + t]
                b -= c * w.C[j]
                w.T[j * kc + r] += c
        nrm = sqrt(_dot(w.a, w.a, n))
        if norm0 == 0.0 or nrm <= _DEP * norm0:
            continue
        w.T[r * kc + r] = nrm
        for t in range(n):
            w.Q[r * n + t] = w.a[t] / nrm
        w.C[r] = b / nrm
        w.kept[r] = i
        r += 1
    for t in range(n):
        w.proj[t] = w.z[t]
    for j in range(r):
        w.beta[j] = w.C[j] - _dot(w.Q + j * n, w.z, n)
        for t in range(n):
            w.proj[t] += w.beta[j] * w.Q[j * n + t]
    for i in range(k):
        w.y[i] = 0.0
    for i in range(r - 1, -1, -1):
        s = w.beta[i]
        for j in range(i + 1, r):
            s -= w.T[i * kc + j] * w.yk[j]
        w.yk[i] = s / w.T[i * kc + i]
    for i in range(r):
        w.y[w.kept[i]] = w.yk[i]


cdef int _qp(QPWork* w, const double* V, const double* lo, const double* hi, const double* d,
             int m, int n, int max_pivots, double* x, int* nwork) noexcept nogil:
    """Active-set projection; returns the pivot count or -1 on overflow."""
    cdef int i, e, t, k, pos, cid, at, block, pivot
    cdef double total = 0.0, scale = 0.0, wmax = 0.0, stepmax, worst, lam, pnorm, thr, alpha, aa
    for t in range(n):
        total += d[t]
        if fabs(d[t]) > scale:
            scale = fabs(d[t])
    if scale < 1e-300:
        scale = 1e-300
    for t in range(n):
        w.z[t] = total / n
        w.ones[t] = 1.0
        x[t] = d[t]
    for e in range(m):
        if hi[e] - lo[e] > wmax:
            wmax = hi[e] - lo[e]
    if wmax < 1e-300:
        wmax = 1e-300
    for e in range(m):
        w.eq[e] = 1 if hi[e] - lo[e] <= _EQ * wmax else 0
        w.rownorm[e] = sqrt(_dot(V + e * n, V + e * n, n))
    for i in range(2 * m + 1):
        w.inset[i] = 0
    k = 0
    w.work[k] = 0
    w.inset[0] = 1
    k += 1
    for e in range(m):
        if w.eq[e]:
            w.work[k] = e + 1
            w.inset[e + 1] = 1
            k += 1
    for pivot in range(1, max_pivots + 1):
        _project(w, V, lo, hi, total, m, n, k)
        stepmax = 0.0
        for t in range(n):
            w.step[t] = w.proj[t] - x[t]
            if fabs(w.step[t]) > stepmax:
                stepmax = fabs(w.step[t])
        if stepmax <= _STEP * scale:
            for t in range(n):
                x[t] = w.proj[t]
            worst = -_MULT * scale
            at = -1
            for pos in range(k):
                cid = w.work[pos]
                if cid == 0 or (cid <= m and w.eq[cid - 1]):
                    continue
                lam = w.y[pos] if cid <= m else -w.y[pos]
                if lam < worst:
                    worst = lam
                    at = pos
            if at < 0:
                nwork[0] = k
                return pivot
            w.inset[w.work[at]] = 0
            for pos in range(at, k - 1):
                w.work[pos] = w.work[pos + 1]
            k -= 1
            continue
        pnorm = sqrt(_dot(w.step, w.step, n))
        alpha = 1.0
        block = -1
        for e in range(m):
            if w.eq[e]:
                continue
            w.vx[e] = _dot(V + e * n, x, n)
            w.vp[e] = _dot(V + e * n, w.step, n)
            thr = _RATIO * w.rownorm[e] * pnorm
            if w.vp[e] < -thr and not w.inset[e + 1]:
                aa = (w.vx[e] - lo[e]) / -w.vp[e]
                if aa < alpha:
                    alpha = aa
                    block = e + 1
            if w.vp[e] > thr and not w.inset[m + e + 1]:
                aa = (hi[e] - w.vx[e]) / w.vp[e]
                if aa < alpha:
                    alpha = aa
                    block = m + e + 1
        if alpha < 0.0:
            alpha = 0.0
        for t in range(n):
            x[t] += alpha * w.step[t]
        if block >= 0:
            w.work[k] = block
            w.inset[block] = 1
            k += 1
    return -1


def solve_generation(vrows, lower, upper, demand, int max_pivots):
    cdef cnp.ndarray[double, ndim=2, mode="c"] V = np.ascontiguousarray(vrows, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] lo = np.ascontiguousarray(lower, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] hi = np.ascontiguousarray(upper, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] d = np.ascontiguousarray(demand, dtype=np.float64)
    cdef int m = V.shape[0], n = V.shape[1]
    cdef cnp.ndarray[double, ndim=1, mode="c"] x = np.empty(n)
    cdef QPWork w
    cdef int nwork = 0, pivots, i
    if _qp_alloc(&w, m, n) != 0:
        _qp_free(&w)
        raise MemoryError()
    try:
        pivots = _qp(&w, &V[0, 0], &lo[0], &hi[0], &d[0], m, n, max_pivots, &x[0], &nwork)
        work = [w.work[i] for i in range(nwork)]
        y = np.array([w.y[i] for i in range(nwork)])
    finally:
        _qp_free(&w)
    if pivots < 0:
        raise NumericalFailure(f"active-set iteration exceeded {max_pivots} pivots")
    return x, work, y, pivots


# ---------------------------------------------------------------------------
# cascade loop
# ---------------------------------------------------------------------------

cdef struct CascWork:
    int* parent
    int* label
    int* local
    int* members
    int* root_label
    double* sd
    double* sg
    double* L
    double* theta
    double* rhs
    double* f
    double* psi
    int* failed


cdef int _casc_alloc(CascWork* w, int m, int n) noexcept nogil:
    w.parent = <int*> malloc(n * sizeof(int))
    w.label = <int*> malloc(n * sizeof(int))
    w.local = <int*> malloc(n * sizeof(int))
    w.members = <int*> malloc(n * sizeof(int))
    w.root_label = <int*> malloc(n * sizeof(int))
    w.sd = <double*> malloc(n * sizeof(double))
    w.sg = <double*> malloc(n * sizeof(double))
    w.L = <double*> malloc(n * n * sizeof(double))
    w.theta = <double*> malloc(n * sizeof(double))
    w.rhs = <double*> malloc(n * sizeof(double))
    w.f = <double*> malloc(m * sizeof(double))
    w.psi = <double*> malloc(m * sizeof(double))
    w.failed = <int*> malloc(m * sizeof(int))
    if (w.parent == NULL or w.label == NULL or w.local == NULL or w.members == NULL
            or w.root_label == NULL or w.sd == NULL or w.sg == NULL or w.L == NULL
            or w.theta == NULL or w.rhs == NULL or w.f == NULL or w.psi == NULL or w.failed == NULL):
        return -1
    return 0


cdef void _casc_free(CascWork* w) noexcept nogil:
    free(w.parent); free(w.label); free(w.local); free(w.members); free(w.root_label)
    free(w.sd); free(w.sg); free(w.L); free(w.theta); free(w.rhs)
    free(w.f); free(w.psi); free(w.failed)


cdef inline int _find(int* parent, int x) noexcept nogil:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


cdef int _components(CascWork* w, int n, int m, const int* tails, const int* heads,
                     const char* alive) noexcept nogil:
    """Label nodes 0..count-1 in order of each component's smallest node."""
    cdef int v, e, a, b, count = 0
    for v in range(n):
        w.parent[v] = v
        w.root_label[v] = -1
    for e in range(m):
        if alive[e]:
            a = _find(w.parent, tails[e])
            b = _find(w.parent, heads[e])
            if a != b:
                if a < b:
                    w.parent[b] = a
                else:
                    w.parent[a] = b
    for v in range(n):
        a = _find(w.parent, v)
        if w.root_label[a] < 0:
            w.root_label[a] = count
            count += 1
        w.label[v] = w.root_label[a]
    return count


cdef void _restore_balance(CascWork* w, int n, int ncomp, double* d, double* g) noexcept nogil:
    cdef int v, c
    cdef double theta
    for c in range(ncomp):
        w.sd[c] = 0.0
        w.sg[c] = 0.0
    for v in range(n):
        w.sd[w.label[v]] += d[v]
        w.sg[w.label[v]] += g[v]
    for v in range(n):
        c = w.label[v]
        if w.sd[c] == w.sg[c]:
            continue
        if w.sg[c] == 0.0:
            d[v] = 0.0
        elif w.sd[c] == 0.0:
            g[v] = 0.0
        else:
            theta = w.sd[c] / w.sg[c]
            if theta >= 1.0:
                d[v] = d[v] / theta
            else:
                g[v] = g[v] * theta


cdef int _flows(CascWork* w, int n, int m, int ncomp, const int* tails, const int* heads,
                const char* alive, const double* d, const double* g) noexcept nogil:
    """Flows on alive edges via a grounded Laplacian solve per component."""
    cdef int c, v, e, k, i, j, p, a, b, kk
    cdef double s
    for v in range(n):
        w.theta[v] = 0.0
    for c in range(ncomp):
        k = 0
        for v in range(n):
            if w.label[v] == c:
                w.local[v] = k - 1          # the first (smallest) node is grounded
                w.members[k] = v
                k += 1
        kk = k - 1
        if kk <= 0:
            continue
        for i in range(kk * kk):
            w.L[i] = 0.0
        for e in range(m):
            if not alive[e] or w.label[tails[e]] != c:
                continue
            a = w.local[tails[e]]
            b = w.local[heads[e]]
            if a >= 0:
                w.L[a * kk + a] += 1.0
            if b >= 0:
                w.L[b * kk + b] += 1.0
            if a >= 0 and b >= 0:
                w.L[a * kk + b] -= 1.0
                w.L[b * kk + a] -= 1.0
        for i in range(kk):
            v = w.members[i + 1]
            w.rhs[i] = d[v] - g[v]
        # Cholesky, lower triangle in place
        for j in range(kk):
            s = w.L[j * kk + j]
            for p in range(j):
                s -= w.L[j * kk + p] * w.L[j * kk + p]
            if s <= 0.0:
                return -1
            w.L[j * kk + j] = sqrt(s)
            for i in range(j + 1, kk):
                s = w.L[i * kk + j]
                for p in range(j):
                    s -= w.L[i * kk + p] * w.L[j * kk + p]
                w.L[i * kk + j] = s / w.L[j * kk + j]
        for i in range(kk):
            s = w.rhs[i]
            for p in range(i):
                s -= w.L[i * kk + p] * w.rhs[p]
            w.rhs[i] = s / w.L[i * kk + i]
        for i in range(kk - 1, -1, -1):
            s = w.rhs[i]
            for p in range(i + 1, kk):
                s -= w.L[p * kk + i] * w.rhs[p]
            w.rhs[i] = s / w.L[i * kk + i]
        for i in range(kk):
            w.theta[w.members[i + 1]] = w.rhs[i]
    for e in range(m):
        if alive[e]:
            w.f[e] = w.theta[heads[e]] - w.theta[tails[e]]
    return 0


cdef int _cascade(CascWork* w, int n, int m, const int* tails, const int* heads,
                  double* d, double* g, const double* cap, int first_edge, int rule,
                  double rel_tol, char* alive, int* order, int* step_sizes,
                  int* nsteps, int* ncomp_out) noexcept nogil:
    """Run the emergency stage in place on (d, g, alive); returns failures or -1."""
    cdef int e, ncomp, nfail = 0, nstep = 0, nsel, i
    cdef double top, a
    for e in range(m):
        alive[e] = 1
    alive[first_edge] = 0
    order[nfail] = first_edge + 1
    nfail += 1
    step_sizes[nstep] = 1
    nstep += 1
    while True:
        ncomp = _components(w, n, m, tails, heads, alive)
        _restore_balance(w, n, ncomp, d, g)
        if _flows(w, n, m, ncomp, tails, heads, alive, d, g) != 0:
            return -1
        top = -1.0
        for e in range(m):
            if not alive[e]:
                continue
            a = fabs(w.f[e])
            if cap[e] > 0.0:
                w.psi[e] = a / cap[e]
            elif a > _ZERO_FLOW:
                w.psi[e] = INFINITY
            else:
                w.psi[e] = 0.0
            if w.psi[e] > top:
                top = w.psi[e]
        if not top > 1.0 + rel_tol:
            break
        nsel = 0
        for e in range(m):
            if not alive[e]:
                continue
            if top == INFINITY:
                if w.psi[e] == INFINITY:
                    w.failed[nsel] = e
                    nsel += 1
            elif w.psi[e] >= (1.0 - rel_tol) * top and w.psi[e] > 1.0 + rel_tol:
                w.failed[nsel] = e
                nsel += 1
        if rule == 1:
            nsel = 1
        elif rule == 2:
            w.failed[0] = w.failed[nsel - 1]
            nsel = 1
        for i in range(nsel):
            alive[w.failed[i]] = 0
            order[nfail] = w.failed[i] + 1
            nfail += 1
        step_sizes[nstep] = nsel
        nstep += 1
    nsteps[0] = nstep
    ncomp_out[0] = ncomp
    return nfail


def cascade_outcome(tails, heads, int n, demand, generation, capacity, int first_edge,
                    int rule, double rel_tol):
    """Failure order, per-step failure counts, end demand and end component labels.

    ``tails``/``heads`` are 1-based node ids, ``first_edge`` a 1-based edge id.
    Labels are 1-based component ids numbered by smallest member node.
    """
    cdef cnp.ndarray[int, ndim=1, mode="c"] t = np.ascontiguousarray(tails, dtype=np.intc) - 1
    cdef cnp.ndarray[int, ndim=1, mode="c"] h = np.ascontiguousarray(heads, dtype=np.intc) - 1
    cdef cnp.ndarray[double, ndim=1, mode="c"] d = np.array(demand, dtype=np.float64, order="C")
    cdef cnp.ndarray[double, ndim=1, mode="c"] g = np.array(generation, dtype=np.float64, order="C")
    cdef cnp.ndarray[double, ndim=1, mode="c"] cap = np.ascontiguousarray(capacity, dtype=np.float64)
    cdef int m = t.shape[0]
    cdef cnp.ndarray[cnp.int8_t, ndim=1, mode="c"] alive = np.zeros(m, dtype=np.int8)
    cdef cnp.ndarray[int, ndim=1, mode="c"] order = np.zeros(m, dtype=np.intc)
    cdef cnp.ndarray[int, ndim=1, mode="c"] sizes = np.zeros(m, dtype=np.intc)
    cdef int nsteps = 0, ncomp = 0, nfail, v
    cdef CascWork w
    if not 1 <= first_edge <= m:
        raise ValueError(f"first edge {first_edge} outside [1, {m}]")
    if _casc_alloc(&w, m, n) != 0:
        _casc_free(&w)
        raise MemoryError()
    try:
        nfail = _cascade(&w, n, m, &t[0], &h[0], &d[0], &g[0], &cap[0], first_edge - 1, rule,
                         rel_tol, <char*> &alive[0], &order[0], &sizes[0], &nsteps, &ncomp)
        labels = np.array([w.label[v] + 1 for v in range(n)], dtype=np.intp)
    finally:
        _casc_free(&w)
    if nfail < 0:
        raise NumericalFailure("grounded Laplacian is not positive definite")
    return order[:nfail].astype(np.intp), sizes[:nsteps].astype(np.intp), d, labels


# ---------------------------------------------------------------------------
# Monte Carlo block: orient, plan, dispatch, fail, cascade
# ---------------------------------------------------------------------------

def simulate_block(tails, heads, int n, vfull, demands, first_edges, double lam,
                   double lam_star, int rule, double rel_tol, int max_pivots):
    """Failure size for each row of ``demands``.

    Returns (sizes, status) where status is 0 on success, 1 when the active
    set overflows, 2 on negative optimal generation, 3 on a singular solve.
    """
    cdef cnp.ndarray[int, ndim=1, mode="c"] t = np.ascontiguousarray(tails, dtype=np.intc) - 1
    cdef cnp.ndarray[int, ndim=1, mode="c"] h = np.ascontiguousarray(heads, dtype=np.intc) - 1
    cdef cnp.ndarray[double, ndim=2, mode="c"] V = np.ascontiguousarray(vfull, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] D = np.ascontiguousarray(demands, dtype=np.float64)
    cdef cnp.ndarray[long, ndim=1, mode="c"] first = np.ascontiguousarray(first_edges, dtype=np.int_)
    cdef int m = t.shape[0], B = D.shape[0]
    cdef cnp.ndarray[double, ndim=1, mode="c"] sizes = np.zeros(B)
    cdef cnp.ndarray[int, ndim=1, mode="c"] status = np.zeros(B, dtype=np.intc)
    cdef double* vrows = <double*> malloc(m * n * sizeof(double))
    cdef double* lo = <double*> malloc(m * sizeof(double))
    cdef double* hi = <double*> malloc(m * sizeof(double))
    cdef double* cap = <double*> malloc(m * sizeof(double))
    cdef double* d = <double*> malloc(n * sizeof(double))
    cdef double* g = <double*> malloc(n * sizeof(double))
    cdef char* alive = <char*> malloc(m * sizeof(char))
    cdef int* order = <int*> malloc(m * sizeof(int))
    cdef int* ssz = <int*> malloc(m * sizeof(int))
    cdef QPWork qw
    cdef CascWork cw
    cdef int b, e, v, nwork, nsteps, ncomp, piv, nf
    cdef double vd, sgn, scale, gmin, total0, total1
    cdef int ok_qp = _qp_alloc(&qw, m, n)
    cdef int ok_casc = _casc_alloc(&cw, m, n)
    cdef int ok = (vrows != NULL and lo != NULL and hi != NULL and cap != NULL and d != NULL
                   and g != NULL and alive != NULL and order != NULL and ssz != NULL
                   and ok_qp == 0 and ok_casc == 0)
    try:
        if not ok:
            raise MemoryError()
        with nogil:
            for b in range(B):
                for e in range(m):
                    vd = _dot(&V[e, 0], &D[b, 0], n)
                    sgn = -1.0 if vd < 0.0 else 1.0
                    for v in range(n):
                        vrows[e * n + v] = sgn * V[e, v]
                    vd = fabs(vd)
                    lo[e] = (1.0 - lam) * vd
                    hi[e] = (1.0 + lam) * vd
                    cap[e] = lam_star * vd
                piv = _qp(&qw, vrows, lo, hi, &D[b, 0], m, n, max_pivots, g, &nwork)
                if piv < 0:
                    status[b] = 1
                    continue
                scale = 1.0
                gmin = 0.0
                total0 = 0.0
                for v in range(n):
                    d[v] = D[b, v]
                    total0 += d[v]
                    if fabs(d[v]) > scale:
                        scale = fabs(d[v])
                    if g[v] < gmin:
                        gmin = g[v]
                if gmin < -_NEG_GEN * scale:
                    status[b] = 2
                    continue
                nf = _cascade(&cw, n, m, &t[0], &h[0], d, g, cap, <int> first[b] - 1, rule,
                              rel_tol, alive, order, ssz, &nsteps, &ncomp)
                if nf < 0:
                    status[b] = 3
                    continue
                total1 = 0.0
                for v in range(n):
                    total1 += D[b, v] - d[v]
                sizes[b] = total1
    finally:
        _qp_free(&qw)
        _casc_free(&cw)
        free(vrows); free(lo); free(hi); free(cap); free(d); free(g)
        free(alive); free(order); free(ssz)
    return sizes, status
