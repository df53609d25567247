# %% [markdown]
# # Naive vs indexed loading, and a 2D slice
#
# Both loaders build the same workspace. The naive one rescans the file from
# the root for every experiment and allocates per dataset; the indexed one
# builds the index once and fills one arena per experiment.

# %%
import time

import numpy as np

from mdensemble import EnsembleConfig, generate_ensemble, load_indexed, load_naive, slice_2d, workspace_digest
from mdensemble.container import dumps

data = dumps(generate_ensemble(EnsembleConfig(n_experiments=20, events_per_experiment=5000)))

# %%
for loader in (load_naive, load_indexed):
    t0 = time.perf_counter()
    ws, inst = loader(data)
    ms = (time.perf_counter() - t0) * 1e3
    print(f"{loader.__name__:13s} {ms:8.1f} ms  visits={inst.entries_visited:8d} "
          f"allocations={inst.buffer_allocations:6d}  digest={workspace_digest(ws)[:12]}")
    print("   phases (ms):", {k: round(v, 1) for k, v in inst.phase_ms.items()})

# %% [markdown]
# Slice the summed signal over Qx and Qz, as in a slice viewer.

# %%
grid = slice_2d(ws, 0, 2, (60, 60), ((-8.0, 8.0), (-8.0, 8.0)))
print(grid.shape, grid.sum(), ws.signal.astype(np.float64).sum())

# %%
try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots()
    ax.imshow(grid.T, origin="lower", extent=(-8, 8, -8, 8), aspect="equal")
    ax.set_xlabel("Qx (1/Å)")
    ax.set_ylabel("Qz (1/Å)")
    fig.savefig("slice_qx_qz.png", dpi=100)
    print("wrote slice_qx_qz.png")
except ImportError:
    pass
