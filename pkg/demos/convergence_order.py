"""Observed spatial order of the upwind scheme on periodic heat flow.

Refines a 1-d periodic grid, compares each final state against the
continuum Fourier solution, and prints log2 error ratios. The scheme is
first-order accurate; the orders climb towards 1 from below because the
upwind error competes with opposite-signed spectral dispersion on coarse
grids (run with a small amplitude, e.g. 0.2, to see the cancellation
regime where coarse-grid orders come out low or even negative).
"""

import sys

from graphfp import periodic_heat_convergence

amplitude = float(sys.argv[1]) if len(sys.argv) > 1 else 0.8
rows = periodic_heat_convergence(levels=4, n0=16, amplitude=amplitude)

print(f"amplitude = {amplitude}")
print(f"{'n':>6} {'dx':>10} {'sup error':>14} {'order':>8} {'steps':>8}")
for r in rows:
    order = "-" if r["order"] != r["order"] else f"{r['order']:.3f}"
    print(f"{r['n']:>6d} {r['dx']:>10.5g} {r['error']:>14.6e} "
          f"{order:>8} {r['steps']:>8d}")
