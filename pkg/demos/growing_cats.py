"""Feed bred states back into the beamsplitter and watch the cat grow.

Each generation mixes two copies of the previous output and heralds on the
same window; the best-fit squeezed cat amplitude increases from one
generation to the next.
"""

from __future__ import annotations

import tempfile

from catbreed.pipeline import RunConfig, cmd_iterate

with tempfile.TemporaryDirectory() as out:
    rows = cmd_iterate(RunConfig(outdir=out, route="fock"), generations=3, ideal=True)

print("gen  alpha   s      F(fit)  W min")
for k, r in enumerate(rows, start=1):
    print(f"{k:3d}  {r['fock_alpha']:.3f}  {r['fock_s']:.3f}  {r['fock_fit_fidelity']:.4f}  {r['fock_negativity']:+.4f}")
