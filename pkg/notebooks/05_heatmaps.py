# %% [markdown]
# # Heatmaps
#
# Cells are colored by band: red for 10,000 and above, orange from 1,000,
# yellow from 100 and green below. The diagonal stays blank.

# %%
import sys
import tempfile
from datetime import timedelta
from pathlib import Path

import numpy as np

from orgcoupling import CouplingMatrix, WindowSpec, classify, windowed_matrices
from orgcoupling.report import render_heatmap, write_series
from orgcoupling.testkit import SynthSpec, generate_history

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
out.mkdir(parents=True, exist_ok=True)

# %%
for value in (84_837.13, 10_000, 9_999.99, 1_000, 250, 99.99):
    band = classify(value)
    print(f"{value:>10,.2f} -> {band.value:9s} {band.color}")

# %% [markdown]
# A hand-made matrix with one value per band.

# %%
names = ("orca", "clouddriver", "gate", "deck")
values = np.array([[0, 84_837.13, 2_500, 120],
                   [84_837.13, 0, 40, 0],
                   [2_500, 40, 0, 999.99],
                   [120, 0, 999.99, 0]])
matrix = CouplingMatrix(names, values, np.zeros((4, 4), dtype=np.int64))
svg = render_heatmap(matrix, out / "bands.svg", title="one value per band")
print(len(svg), "bytes ->", out / "bands.svg")

# %% [markdown]
# A series renders as a grid of per-window heatmaps.

# %%
history = generate_history(SynthSpec(seed=8, n_services=4, n_developers=8, n_commits=500,
                                     cross_contribution_rate=0.4, churn_range=(20, 400)))
series = windowed_matrices(history, WindowSpec(history.commits[0].timestamp,
                                               timedelta(days=60), 6))
for path in write_series(series, out / "series", formats=("json", "svg")):
    print(path)
