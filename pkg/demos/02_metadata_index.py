# %% [markdown]
# # The class-keyed metadata index
#
# One pass over the tree files every group under its `NX_class` and every
# dataset under `SDS`, each bucket sorted by absolute path. Per-experiment
# queries then become range scans instead of walks over the hierarchy.

# %%
from mdensemble import EnsembleConfig, build_index, generate_ensemble, index_stats
from mdensemble.schema import count_entries

root = generate_ensemble(EnsembleConfig(n_experiments=10, events_per_experiment=100))
ix = build_index(root)
print(index_stats(ix))
print("entries visited while building:", ix.entries_visited, "==", count_entries(root).total)

# %%
print(ix.lookup_class("NXentry"))
print(ix.lookup_class("NXpositioner")[:3])

# %%
instrument = ix.lookup_prefix("SDS", "/MDEventWorkspace/experiment0/instrument")
print(len(instrument), instrument[:4])

# %% [markdown]
# `experiment1` does not swallow `experiment10`: the prefix match is on whole
# path components.

# %%
print(ix.lookup_prefix("NXgroup", "/MDEventWorkspace/experiment1"))

# %%
print(ix.dump().splitlines()[:5])
