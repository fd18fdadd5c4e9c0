# %% [markdown]
# Bench harness end to end: write a small grid, run it, read the CSV back.

# %%
import io
import tempfile
from pathlib import Path

from qipsolver import bench
from qipsolver.instances import GRIDS, write_grid

# a throwaway grid, much smaller than the built-in ones
GRIDS["demo"] = [
    ("selection", {"n": [6], "N": [3], "T": [1, 2]}, 3),
    ("runway", {"A": [2], "b": [1], "S": [4], "T": [1, 2]}, 2),
]
work = Path(tempfile.mkdtemp())
manifest = write_grid("demo", work)
print(manifest.read_text())

# %%
tasks = bench.plan(bench.load_manifest(manifest), mode="s", sbars=(0, 2, 4))
print(len(tasks), "runs")
records = bench.run_bench(tasks)

buf = io.StringIO()
bench.write_csv(records, buf)
print(buf.getvalue())

# %%
# the report only needs the CSV
again = bench.read_csv(io.StringIO(buf.getvalue()))
print(bench.format_report(again))

# %%
for r in bench.dr_table(again):
    print(f"{r.instance_id:<22} sbar={r.sbar} {r.scenario_mode:<9} {r.baseline_nodes:>5} -> {r.nodes:>5}  D_r={r.d_r:+.3f}")
