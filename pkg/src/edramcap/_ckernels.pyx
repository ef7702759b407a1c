# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled netlist solver kernels. Mirrors ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t x) noexcept nogil:
    cdef Py_ssize_t root = x
    cdef Py_ssize_t nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def component_labels(Py_ssize_t n_nodes, a, b):
    cdef const cnp.int64_t[::1] av = np.ascontiguousarray(a, dtype=np.int64)
    cdef const cnp.int64_t[::1] bv = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t[::1] parent = np.arange(n_nodes, dtype=np.intp)
    cdef Py_ssize_t[::1] remap = np.full(n_nodes, -1, dtype=np.intp)
    labels_arr = np.empty(n_nodes, dtype=np.int64)
    cdef cnp.int64_t[::1] labels = labels_arr
    cdef Py_ssize_t i, ru, rv, root, n_comp = 0
    with nogil:
        for i in range(av.shape[0]):
            ru = _find(parent, av[i])
            rv = _find(parent, bv[i])
            if ru != rv:
                if ru < rv:
                    parent[rv] = ru
                else:
                    parent[ru] = rv
        for i in range(n_nodes):
            root = _find(parent, i)
            if remap[root] < 0:
                remap[root] = n_comp
                n_comp += 1
            labels[i] = remap[root]
    return labels_arr, int(n_comp)


def component_charge(labels, Py_ssize_t n_comp, cap_a, cap_b, charge):
    cdef const cnp.int64_t[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef const cnp.int64_t[::1] ca = np.ascontiguousarray(cap_a, dtype=np.int64)
    cdef const cnp.int64_t[::1] cb = np.ascontiguousarray(cap_b, dtype=np.int64)
    cdef const double[::1] q = np.ascontiguousarray(charge, dtype=np.float64)
    out_arr = np.zeros(n_comp)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(q.shape[0]):
            out[lab[ca[i]]] += q[i]
            out[lab[cb[i]]] -= q[i]
    return out_arr


def assemble(labels, float_index, comp_v, cap_a, cap_b, cap_c, Py_ssize_t n_float):
    cdef const cnp.int64_t[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef const cnp.int64_t[::1] fidx = np.ascontiguousarray(float_index, dtype=np.int64)
    cdef const double[::1] cv = np.ascontiguousarray(comp_v, dtype=np.float64)
    cdef const cnp.int64_t[::1] ca = np.ascontiguousarray(cap_a, dtype=np.int64)
    cdef const cnp.int64_t[::1] cb = np.ascontiguousarray(cap_b, dtype=np.int64)
    cdef const double[::1] cc = np.ascontiguousarray(cap_c, dtype=np.float64)
    M_arr = np.zeros((n_float, n_float))
    drive_arr = np.zeros(n_float)
    cdrv_arr = np.zeros(n_float)
    cdef double[:, ::1] M = M_arr
    cdef double[::1] drive = drive_arr
    cdef double[::1] cdrv = cdrv_arr
    edges_arr = np.empty((2, cc.shape[0]), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] edges = edges_arr
    cdef Py_ssize_t i, ka, kb, fa, fb, n_edges = 0
    cdef double c
    with nogil:
        for i in range(cc.shape[0]):
            c = cc[i]
            if c <= 0.0:
                continue
            ka = lab[ca[i]]
            kb = lab[cb[i]]
            if ka == kb:
                continue
            fa = fidx[ka]
            fb = fidx[kb]
            if fa >= 0:
                M[fa, fa] += c
                if fb >= 0:
                    M[fa, fb] -= c
                    edges[0, n_edges] = fa
                    edges[1, n_edges] = fb
                    n_edges += 1
                else:
                    drive[fa] += c * cv[kb]
                    cdrv[fa] += c
            if fb >= 0:
                M[fb, fb] += c
                if fa >= 0:
                    M[fb, fa] -= c
                else:
                    drive[fb] += c * cv[ka]
                    cdrv[fb] += c
    return M_arr, drive_arr, cdrv_arr, np.ascontiguousarray(edges_arr[:, :n_edges])
