"""Pure-Python/numpy implementations of the netlist solver kernels.

Used when the compiled ``_ckernels`` extension is unavailable. Both backends
must agree bit for bit: same labelling convention, same summation order.
"""

import numpy as np


def component_labels(n_nodes, a, b):
    """Label connected components of an undirected graph given as edge lists.

    Components are numbered in order of their smallest node index, so node 0
    always lands in component 0.

    Returns
    -------
    labels : ndarray of int64, shape (n_nodes,)
    n_comp : int
    """
    parent = list(range(n_nodes))

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for u, v in zip(a.tolist(), b.tolist()):
        ru, rv = find(u), find(v)
        if ru != rv:
            # keep the smaller index as root
            if ru < rv:
                parent[rv] = ru
            else:
                parent[ru] = rv

    labels = np.empty(n_nodes, dtype=np.int64)
    remap = {}
    for node in range(n_nodes):
        root = find(node)
        if root not in remap:
            remap[root] = len(remap)
        labels[node] = remap[root]
    return labels, len(remap)


def component_charge(labels, n_comp, cap_a, cap_b, charge):
    """Net charge held on the terminals inside each component (fC)."""
    out = np.zeros(n_comp)
    for i in range(len(charge)):
        out[labels[cap_a[i]]] += charge[i]
        out[labels[cap_b[i]]] -= charge[i]
    return out


def assemble(labels, float_index, comp_v, cap_a, cap_b, cap_c, n_float):
    """Capacitance matrix of the floating components.

    Returns ``(M, drive, c_driven, edges)`` where ``M`` is the
    (n_float, n_float) Maxwell capacitance matrix, ``drive[k]`` is the sum of
    ``C * V`` over capacitors linking floating component ``k`` to a driven
    component, ``c_driven[k]`` is the total of those capacitances and
    ``edges`` is a (2, m) int64 array of floating-floating couplings.
    """
    M = np.zeros((n_float, n_float))
    drive = np.zeros(n_float)
    c_driven = np.zeros(n_float)
    ea, eb = [], []
    for i in range(len(cap_c)):
        c = cap_c[i]
        if c <= 0.0:
            continue
        ka = labels[cap_a[i]]
        kb = labels[cap_b[i]]
        if ka == kb:
            continue
        fa = float_index[ka]
        fb = float_index[kb]
        if fa >= 0:
            M[fa, fa] += c
            if fb >= 0:
                M[fa, fb] -= c
                ea.append(fa)
                eb.append(fb)
            else:
                drive[fa] += c * comp_v[kb]
                c_driven[fa] += c
        if fb >= 0:
            M[fb, fb] += c
            if fa >= 0:
                M[fb, fa] -= c
            else:
                drive[fb] += c * comp_v[ka]
                c_driven[fb] += c
    return M, drive, c_driven, np.array([ea, eb], dtype=np.int64).reshape(2, -1)
