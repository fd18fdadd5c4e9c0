# %% [markdown]
# How much does a larger scenario set save?
#
# Multistage selection: pick p of n items, part of them up front and the
# rest after costs are revealed in T periods.  We count decision nodes with
# scenario capacities 0, 2, 8 and compare each against capacity 0.

# %%
import statistics

from qipsolver.instances import generate
from qipsolver.search import SearchConfig, relative_difference, solve

SBARS = (0, 2, 8)
rows = []
for k in range(8):
    T = 1 + k % 3
    inst = generate("selection", n=8, N=3, T=T, seed=500 + k)
    nodes = {}
    for sbar in SBARS:
        res = solve(inst, SearchConfig(relaxation_mode="s", sbar=sbar, seed=k))
        nodes[sbar] = max(res.stats.decision_nodes, 1)
    rows.append((k, T, res.value, nodes))
    print(f"instance {k} T={T} value={res.value} nodes={nodes}")

# %%
# Negative means the scenario set helped.
for sbar in SBARS[1:]:
    d = [relative_difference(n[sbar], n[0]) for *_, n in rows]
    print(f"sbar {sbar}: median D_r {statistics.median(d):+.3f}  (min {min(d):+.3f}, max {max(d):+.3f})")

# %%
# Selection rarely hits a conflict, so restarts show up on a runway instance.
# The set is rebuilt from the most visited scenario prefixes at each restart.
inst = generate("runway", A=3, S=3, b=2, T=2, seed=666649887)
res = solve(inst, SearchConfig(relaxation_mode="s", sbar=4, restart_first=2), trace=print)
print(res.status.value, res.value, res.stats)
