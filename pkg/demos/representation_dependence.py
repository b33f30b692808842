"""Two representations of the same graphon.

The constant graphon reads only x_{12}. The skew one also looks at x_1 and x_2,
yet samples the same random graph. Structural probes see the difference;
every sampling-based property does not.

    python3 demos/representation_dependence.py
"""

import math

from theonlab import testlab as tl
from theonlab import theories as th
from theonlab.relational import enumerate_labeled
from theonlab.theon import catalog as cat
from theonlab.theon.sampling import estimate_flattening, estimate_models

P = 0.3
const, skew = cat.constant_graphon(P), cat.skew_graphon(P)

for t in (const, skew):
    probe = tl.independence_probe(t, 1, 10_000, 1)
    print(f"{t.name:22s} independence probe: {probe.decision:6s} flips {probe.details['flips']['E']}")
print(f"expected skew flip rate 2p(1-p) = {2 * P * (1 - P):.2f}")

print("\nflattening W^1 at a few low points (both should read p):")
for low in ({1: 0.1, 2: 0.2}, {1: 0.6, 2: 0.9}, {1: 0.95, 2: 0.05}):
    vals = [estimate_flattening(t, "E", 1, low, 50_000, 2).value for t in (const, skew)]
    print(f"  x_1={low[1]:.2f} x_2={low[2]:.2f}   constant {vals[0]:.3f}   skew {vals[1]:.3f}")

print("\nlabelled 3-vertex densities:")
graphs = list(enumerate_labeled(th.graph(), 3))
a = estimate_models(const, graphs, 300_000, 3)
b = estimate_models(skew, graphs, 300_000, 4)
for g, x, y in zip(graphs, a, b):
    z = (x.value - y.value) / math.hypot(x.stderr, y.stderr)
    print(f"  {len(g.relations['E']) // 2} edges {sorted(e for e in g.relations['E'] if e[0] < e[1])!s:26s}"
          f" {x.value:.4f} vs {y.value:.4f}  z={z:+.2f}")

for t in (const, skew):
    r = tl.clique_disc_test(t, 1, probes=40, inner_samples=3000, n_samples=100_000, seed=5)
    print(f"{t.name:22s} clique disc, level 1: {r.decision}")
