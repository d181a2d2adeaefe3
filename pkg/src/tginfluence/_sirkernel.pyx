# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled weighted-SIR inner loop.

Consumes uniform doubles from a numpy bit generator in exactly the same
order as ``_sirpure.sir_counts``, so both backends return identical counts
for the same generator state.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t

import numpy as np

cimport numpy as cnp

cnp.import_array()


def sir_counts(cnp.int64_t[:, ::1] indptr,
               cnp.int64_t[::1] offsets,
               cnp.int32_t[::1] indices,
               cnp.float64_t[::1] probs,
               int n_nodes,
               int seed_node,
               double mu,
               long runs,
               object bit_generator):
    """Simulate ``runs`` epidemics over a concatenated snapshot window.

    ``indptr`` is the per-snapshot CSR row pointer (L, n+1); ``offsets``
    locate each snapshot's slice of ``indices``/``probs``.  Returns the
    infected+recovered count of each run as an int64 array.
    """
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(
        bit_generator.capsule, "BitGenerator")
    cdef Py_ssize_t n_steps = indptr.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.empty(runs, dtype=np.int64)
    cdef cnp.int64_t[::1] counts_v = counts
    cdef cnp.int8_t[::1] state = np.zeros(n_nodes, dtype=np.int8)
    cdef cnp.int32_t[::1] infected = np.empty(n_nodes, dtype=np.int32)
    cdef cnp.int32_t[::1] newly = np.empty(n_nodes, dtype=np.int32)
    cdef cnp.int32_t[::1] merged = np.empty(n_nodes, dtype=np.int32)
    cdef long r, total
    cdef Py_ssize_t t, i, j, m, n_inf, n_new, n_rem
    cdef int v, u
    cdef cnp.int64_t e, start, end, base

    for r in range(runs):
        for i in range(n_nodes):
            state[i] = 0
        state[seed_node] = 1
        infected[0] = seed_node
        n_inf = 1
        total = 1
        for t in range(n_steps):
            if n_inf == 0:
                break
            base = offsets[t]
            n_new = 0
            # infection attempts, infected nodes in ascending id order
            for i in range(n_inf):
                v = infected[i]
                start = base + indptr[t, v]
                end = base + indptr[t, v + 1]
                for e in range(start, end):
                    u = indices[e]
                    if state[u] == 0:
                        if rng.next_double(rng.state) < probs[e]:
                            state[u] = 3
                            newly[n_new] = u
                            n_new += 1
                            total += 1
            # recovery draws after the interval's infection attempts
            n_rem = 0
            for i in range(n_inf):
                v = infected[i]
                if rng.next_double(rng.state) < mu:
                    state[v] = 2
                else:
                    infected[n_rem] = v
                    n_rem += 1
            # newly infected become transmitting next interval
            for i in range(1, n_new):
                u = newly[i]
                j = i - 1
                while j >= 0 and newly[j] > u:
                    newly[j + 1] = newly[j]
                    j -= 1
                newly[j + 1] = u
            for i in range(n_new):
                state[newly[i]] = 1
            i = 0
            j = 0
            m = 0
            while i < n_rem and j < n_new:
                if infected[i] < newly[j]:
                    merged[m] = infected[i]
                    i += 1
                else:
                    merged[m] = newly[j]
                    j += 1
                m += 1
            while i < n_rem:
                merged[m] = infected[i]
                i += 1
                m += 1
            while j < n_new:
                merged[m] = newly[j]
                j += 1
                m += 1
            for i in range(m):
                infected[i] = merged[i]
            n_inf = m
        counts_v[r] = total
    return counts
