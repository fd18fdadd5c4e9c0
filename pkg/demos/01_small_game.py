# %% [markdown]
# A four-variable game, solved three ways
#
# x1 is ours, x2 is the adversary's, x3 is ours again, x4 the adversary's.
# We minimize -2x1 + x2 - x3 - x4 and lose outright if either row breaks.

# %%
import numpy as np

from qipsolver.model import evaluate_play, golden_game, write_instance
from qipsolver.oracle import enumerate_uncertainty_set, minimax_oracle
from qipsolver.relax import build_dep, fixed_scenario_lp, solve_dep, solve_relaxation_lp
from qipsolver.search import SearchConfig, solve

inst = golden_game()
print(write_instance(inst))

# %%
# brute force first, so we know what to expect
ref = minimax_oracle(inst)
print("value", ref.value, "pv", ref.principal_variation, "nodes", ref.nodes)

# every full play and its payoff; "loss" marks a broken row
for play in np.ndindex(2, 2, 2, 2):
    print(play, evaluate_play(inst, play))

# %%
# The adversary may pick anything here, so the uncertainty set is the full square.
scenarios = enumerate_uncertainty_set(inst)
print(scenarios)

for s in [(1, 0), (1, 1)]:
    out = solve_relaxation_lp(inst, fixed_scenario_lp(inst, s))
    print(s, "bound", round(out.bound, 6), "x =", np.round(out.node_assignment, 3))

# %%
# Both single-scenario bounds say -2. Solving them jointly with shared
# copies of x3 per revealed x2 tightens that to the true value.
lp, dmap = build_dep(inst, [(1, 0), (1, 1)])
print("columns:", dmap.names())
print("joint bound:", round(solve_dep(inst, [(1, 0), (1, 1)]).bound, 6))

# %%
# the search agrees, whichever bound it uses
for mode, sbar in [("plain", 0), ("fixed", 0), ("s", 2)]:
    res = solve(inst, SearchConfig(relaxation_mode=mode, sbar=sbar))
    print(f"{mode:>5} sbar={sbar}: value {res.value}, pv {res.principal_variation}, "
          f"nodes {res.stats.decision_nodes}")
