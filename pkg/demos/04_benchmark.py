# %% [markdown]
# # Interleaved wall-clock benchmark
#
# Runs alternate naive/indexed so machine drift affects both modes. Medians
# are the headline number; the CSV keeps every raw sample so plots and
# summary values can be regenerated from it.

# %%
import io
import tempfile
from pathlib import Path

from mdensemble import BenchConfig, EnsembleConfig, emit_report, generate_ensemble, run_benchmark, write_tree

path = Path(tempfile.mkdtemp()) / "meta_heavy.nxp"
write_tree(generate_ensemble(EnsembleConfig(n_experiments=10, events_per_experiment=1000)), path)

# %%
report = run_benchmark(BenchConfig(str(path), reps=9, warmup=1))
for mode, st in report.stats.items():
    print(f"{mode:8s} median {st.median:7.1f} ms  stddev {st.stddev:6.1f} ms  "
          f"five-number {tuple(round(v, 1) for v in st.five_number)}")
print(f"speedup of the median: {report.speedup_pct:.1f}%")

# %%
buf = io.StringIO()
emit_report(report, "csv", buf)
print(buf.getvalue().split("\n\n")[1])
