# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same algorithms and random-draw order as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport INFINITY
from libc.stdint cimport int64_t, uint8_t
from libc.stdlib cimport malloc, free
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_binomial, binomial_t

from ._kernels_py import PopulationOverflow

cnp.import_array()

BACKEND = "cython"


cdef bitgen_t *_bitgen(object rng) except NULL:
    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("rng does not expose a BitGenerator capsule")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline int64_t _binom(bitgen_t *bg, int64_t n, double p, binomial_t *cache) noexcept nogil:
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    return random_binomial(bg, p, n, cache)


def brw_occupation(const int64_t[::1] indptr, const int64_t[::1] indices,
                   const double[::1] weights, Py_ssize_t root,
                   root_probs, probs, Py_ssize_t horizon, rng,
                   int64_t max_population):
    cdef Py_ssize_t n_states = indptr.shape[0] - 1
    cdef cnp.ndarray[int64_t, ndim=1] cur_a = np.zeros(n_states, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] nxt_a = np.zeros(n_states, dtype=np.int64)
    cdef int64_t[::1] cur = cur_a
    cdef int64_t[::1] nxt = nxt_a
    cdef int64_t[::1] tmp
    root_counts_a = np.zeros(horizon + 1, dtype=np.int64)
    population_a = np.zeros(horizon + 1, dtype=np.int64)
    cdef int64_t[::1] root_counts = root_counts_a
    cdef int64_t[::1] population = population_a
    cdef double[::1] row_total = np.zeros(n_states, dtype=np.float64)

    rk = [k for k, p in enumerate(root_probs) if p > 0.0]
    lk = [k for k, p in enumerate(probs) if p > 0.0]
    cdef int64_t[::1] root_k = np.asarray(rk, dtype=np.int64)
    cdef double[::1] root_p = np.asarray([float(root_probs[k]) for k in rk], dtype=np.float64)
    cdef int64_t[::1] law_k = np.asarray(lk, dtype=np.int64)
    cdef double[::1] law_p = np.asarray([float(probs[k]) for k in lk], dtype=np.float64)
    cdef int64_t[::1] off_k
    cdef double[::1] off_p

    cdef bitgen_t *bg = _bitgen(rng)
    cdef binomial_t cache
    cache.has_binomial = 0
    cdef Py_ssize_t s, j, i, t, lo, hi, last
    cdef int64_t rem, nk, nj, children, total_pop
    cdef double mass, wrem, acc
    cdef bint overflow = False

    for s in range(n_states):
        acc = 0.0
        for j in range(indptr[s], indptr[s + 1]):
            acc += weights[j]
        row_total[s] = acc

    cur[root] = 1
    root_counts[0] = 1
    population[0] = 1
    with rng.bit_generator.lock:
        for t in range(1, horizon + 1):
            off_k = root_k if t == 1 else law_k
            off_p = root_p if t == 1 else law_p
            with nogil:
                nxt[:] = 0
                total_pop = 0
                last = off_k.shape[0] - 1
                for s in range(n_states):
                    if cur[s] == 0:
                        continue
                    rem = cur[s]
                    mass = 1.0
                    children = 0
                    for i in range(last + 1):
                        if rem == 0:
                            break
                        if i == last:
                            nk = rem
                        else:
                            nk = _binom(bg, rem, off_p[i] / mass, &cache)
                        children += off_k[i] * nk
                        rem -= nk
                        mass -= off_p[i]
                    lo = indptr[s]
                    hi = indptr[s + 1]
                    if hi == lo:
                        continue
                    rem = children
                    wrem = row_total[s]
                    for j in range(lo, hi):
                        if rem == 0:
                            break
                        if j == hi - 1:
                            nj = rem
                        else:
                            nj = _binom(bg, rem, weights[j] / wrem, &cache)
                        nxt[indices[j]] += nj
                        rem -= nj
                        wrem -= weights[j]
                    total_pop += children
                    if total_pop > max_population:
                        overflow = True
                        break
            if overflow:
                raise PopulationOverflow(
                    f"population exceeded max_population={max_population} at generation {t}")
            tmp = cur
            cur = nxt
            nxt = tmp
            root_counts[t] = cur[root]
            population[t] = total_pop
    return root_counts_a, population_a


def walk(const int64_t[::1] indptr, const int64_t[::1] indices,
         const double[::1] weights, Py_ssize_t root, Py_ssize_t steps,
         Py_ssize_t replicas, const uint8_t[::1] sink, rng):
    cdef Py_ssize_t n_states = indptr.shape[0] - 1
    cdef double[::1] row_total = np.zeros(n_states, dtype=np.float64)
    returns_a = np.zeros(replicas, dtype=np.int64)
    absorbed_a = np.full(replicas, -1, dtype=np.int64)
    cdef int64_t[::1] returns = returns_a
    cdef int64_t[::1] absorbed = absorbed_a
    cdef bitgen_t *bg = _bitgen(rng)
    cdef Py_ssize_t r, t, j, x, nxt, lo, hi, s
    cdef int64_t count
    cdef double u, acc

    for s in range(n_states):
        acc = 0.0
        for j in range(indptr[s], indptr[s + 1]):
            acc += weights[j]
        row_total[s] = acc

    with rng.bit_generator.lock, nogil:
        for r in range(replicas):
            x = root
            count = 0
            for t in range(1, steps + 1):
                lo = indptr[x]
                hi = indptr[x + 1]
                u = bg.next_double(bg.state) * row_total[x]
                acc = 0.0
                nxt = indices[hi - 1]
                for j in range(lo, hi):
                    acc += weights[j]
                    if u < acc:
                        nxt = indices[j]
                        break
                x = nxt
                if x == root:
                    count += 1
                if sink[x]:
                    absorbed[r] = t
                    break
            returns[r] = count
    return returns_a, absorbed_a


cdef inline Py_ssize_t _find(Py_ssize_t *parent, Py_ssize_t a) noexcept nogil:
    cdef Py_ssize_t root = a
    cdef Py_ssize_t nxt
    while parent[root] != root:
        root = parent[root]
    while parent[a] != root:
        nxt = parent[a]
        parent[a] = root
        a = nxt
    return root


def crossing_thresholds(Py_ssize_t n_vertices, const int64_t[::1] edge_u,
                        const int64_t[::1] edge_v, const double[:, ::1] uniforms,
                        const uint8_t[::1] far, Py_ssize_t root):
    cdef Py_ssize_t replicas = uniforms.shape[0]
    out_a = np.full(replicas, np.inf)
    cdef double[::1] out = out_a
    if far[root]:
        out_a[:] = 0.0
        return out_a
    cdef cnp.ndarray order_a = np.argsort(np.asarray(uniforms), axis=1, kind="stable").astype(np.int64)
    cdef int64_t[:, ::1] order = order_a
    cdef Py_ssize_t n_edges = uniforms.shape[1]
    cdef Py_ssize_t *parent = <Py_ssize_t *> malloc(n_vertices * sizeof(Py_ssize_t))
    cdef Py_ssize_t *size = <Py_ssize_t *> malloc(n_vertices * sizeof(Py_ssize_t))
    cdef uint8_t *has_far = <uint8_t *> malloc(n_vertices * sizeof(uint8_t))
    cdef Py_ssize_t r, i, e, a, b, v
    if parent == NULL or size == NULL or has_far == NULL:
        free(parent); free(size); free(has_far)
        raise MemoryError()
    try:
        with nogil:
            for r in range(replicas):
                for v in range(n_vertices):
                    parent[v] = v
                    size[v] = 1
                    has_far[v] = far[v]
                for i in range(n_edges):
                    e = order[r, i]
                    a = _find(parent, edge_u[e])
                    b = _find(parent, edge_v[e])
                    if a == b:
                        continue
                    if size[a] < size[b]:
                        a, b = b, a
                    parent[b] = a
                    size[a] += size[b]
                    has_far[a] = has_far[a] or has_far[b]
                    if has_far[a] and _find(parent, root) == a:
                        out[r] = uniforms[r, e]
                        break
    finally:
        free(parent)
        free(size)
        free(has_far)
    return out_a
