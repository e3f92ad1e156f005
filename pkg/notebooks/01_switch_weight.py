# %% [markdown]
# # Contribution switches and the switch weight
#
# A developer who commits to service `a`, then `b`, then `a` again keeps moving
# between two codebases. The switch count `k` records those moves and the weight
# `S = k / (2(n - 1))` scales it to [0, 1] over the developer's `n` commits on the pair.

# %%
from orgcoupling import count_switches, switch_weight

a, b, ab = {"a"}, {"b"}, {"a", "b"}

# %% [markdown]
# A commit touching both services counts two switches. A single-service commit
# counts one when the previous commit did not touch its service.

# %%
patterns = {
    "alternating": [a, b, a, b, a, b, a, b],
    "mixed": [a, b, ab, ab, a, b, a, b],
    "all both": [ab] * 8,
    "one service": [a] * 8,
    "both then stay": [ab, a, a, a],
}
for name, seq in patterns.items():
    k = count_switches(seq)
    print(f"{name:15s} n={len(seq)} k={k:2d} S={switch_weight(len(seq), k):.3f}")

# %% [markdown]
# The maximum `k` for `n` commits is `2(n - 1)`, reached only when every commit
# touches both services. A lone commit has no switch, so its weight is 0.

# %%
for n in range(1, 6):
    print(n, [round(switch_weight(n, k), 3) for k in range(0, 2 * max(n - 1, 0) + 1)])
