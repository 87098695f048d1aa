"""Two single photons, one beamsplitter, one homodyne herald.

Walk through the ideal breeding step in Fock space and compare the heralded
state with the squeezed even cat it resembles.  Run with ``python3
demos/heralded_cat.py``; takes a few seconds.
"""

from __future__ import annotations

import numpy as np

from catbreed import (
    FockVector,
    SqueezedCatSpec,
    best_fit_cat,
    breed_fock,
    fidelity,
    make_squeezed_cat,
    wigner_of_state,
)
from catbreed.fock import eq1_state
from catbreed.phasespace import GridAxis

one = FockVector.basis(1)

# A very narrow window around x0 = 0 leaves (|0> + sqrt2 |2>) / sqrt3 in mode 1.
narrow = breed_fock(one, one, 1e-4, units="internal")
print("photon-number populations :", np.round(np.diag(narrow.rho.entries).real[:4], 6))
print("acceptance at width 1e-4  :", f"{narrow.acceptance:.2e}")

cat = make_squeezed_cat(SqueezedCatSpec(1.63, 1.52), 20)
print("overlap with cat(1.63,1.52):", f"{fidelity(eq1_state(), cat):.4f}")
fit = best_fit_cat(eq1_state())
print(f"best-fit cat               : alpha={fit.alpha:.3f} s={fit.s:.3f} F={fit.fidelity:.4f}")

# Wider windows herald more often but admit more odd-parity admixture.
print("\nwindow (homodyne)  acceptance  F(cat)")
for w in (0.05, 0.1, 0.2, 0.4, 0.8):
    r = breed_fock(one, one, w)
    print(f"{w:17.2f}  {r.acceptance:10.4f}  {fidelity(r.rho, cat):.4f}")

grid = wigner_of_state(eq1_state(), GridAxis.symmetric(4.0, 161))
cut = grid.values[80]  # the p = 0 line
dips = np.sum(np.diff((cut < 0).astype(int)) == 1)
print(f"\nWigner minimum {grid.values.min():.4f}; negative dips along the p = 0 line: {dips}")
