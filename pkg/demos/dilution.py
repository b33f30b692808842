"""Dilution by an independent quasirandom overlay, and its exact inverse.

A density vector lists, for every overlay U of edges on a fixed base model,
the density of the base with U marked. Intersecting the overlay with an
independent t-quasirandom hypergraph keeps each marked edge with probability t.

    python3 demos/dilution.py
"""

import itertools
from fractions import Fraction

from theonlab import theories as th
from theonlab.calculus import DensityVector, dilute, mobius_inverse

base = th.graph_model(3, [(1, 2), (2, 3)])
fam = tuple(itertools.combinations(range(1, 4), 2))
weights = [Fraction(1, 20), Fraction(1, 10), Fraction(3, 40), Fraction(1, 8)]
vals = {u: weights[len(u)] for r in range(4) for u in itertools.combinations(fam, r)}
v = DensityVector(base, 2, fam, vals)

t = Fraction(2, 3)
d = dilute(v, t)
back = mobius_inverse(d, t)
print(f"{'overlay':28s} {'xi':>8s} {'diluted':>10s} {'inverted':>10s}")
for u in sorted(vals, key=lambda u: (len(u), u)):
    print(f"{str(list(u)):28s} {str(v[u]):>8s} {str(d[u]):>10s} {str(back[u]):>10s}")
print("total mass", v.total(), "->", d.total())
print("round trip exact:", back == v)
