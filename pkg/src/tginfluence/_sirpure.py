"""Pure-Python twin of the compiled SIR kernel.

Selected at import time when the extension is unavailable (or forced via
``TGINFLUENCE_PURE_PYTHON``).  Draw-for-draw identical to ``_sirkernel``:
one uniform per susceptible out-neighbor of each infected node (ascending
node id, CSR column order), then one recovery uniform per infected node.
"""

from __future__ import annotations

import numpy as np


def sir_counts(indptr, offsets, indices, probs, n_nodes, seed_node,
               mu, runs, bit_generator):
    next_u = np.random.Generator(bit_generator).random
    n_steps = indptr.shape[0]
    counts = np.empty(runs, dtype=np.int64)
    indices = indices.tolist()
    probs = probs.tolist()
    ptr = indptr.tolist()
    off = offsets.tolist()

    for r in range(runs):
        state = bytearray(n_nodes)          # 0=S, 1=I, 2=R, 3=newly infected
        state[seed_node] = 1
        infected = [seed_node]
        total = 1
        for t in range(n_steps):
            if not infected:
                break
            base = off[t]
            row = ptr[t]
            newly = []
            for v in infected:
                for e in range(base + row[v], base + row[v + 1]):
                    u = indices[e]
                    if state[u] == 0 and next_u() < probs[e]:
                        state[u] = 3
                        newly.append(u)
                        total += 1
            survivors = []
            for v in infected:
                if next_u() < mu:
                    state[v] = 2
                else:
                    survivors.append(v)
            for u in newly:
                state[u] = 1
            infected = sorted(survivors + newly)
        counts[r] = total
    return counts
