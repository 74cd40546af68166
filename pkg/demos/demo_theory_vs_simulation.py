#!/usr/bin/env python3
"""Closed-form predictions against exhaustive simulation on (K_5)^6.

Under fully uniform losses the expected number of local minima is exactly
n/(s+1); the within-eps success curve has a closed-form series driven by
the graph's branching fractions.  The minima count matches simulation to a
fraction of a percent; the curve's series is a structural underestimate at
larger eps (it undercounts deep preimages on dense product graphs), which
this demo makes visible side by side.
"""

import numpy as np

import hillscape as hs

t = hs.make_clique_power(5, 6)
b = hs.branching_fractions(t)
print("branching fractions b_1..b_6:", np.round(b, 4))

counts = []
for i in range(50):
    scape = hs.sample_uniform(t, seed=hs.mix64(2, i))
    view = hs.LandscapeView(scape, hs.NoiseSpec.none(), seed=0)
    counts.append(len(hs.find_local_minima(view)))
print(f"local minima: simulated mean {np.mean(counts):.1f} over 50 seeds, "
      f"closed form {hs.uniform_closed_form_minima(t.n, t.degree):.0f}")

eps = np.linspace(0.001, 0.1, 34)
sims = []
for i in range(50):
    scape = hs.sample_uniform(t, seed=hs.mix64(2, i))
    view = hs.LandscapeView(scape, hs.NoiseSpec.none(), seed=0)
    sims.append([f for _, f in hs.within_epsilon_curve(view, eps)])
sim = np.asarray(sims).mean(axis=0)
theo = np.asarray([f for _, f in hs.uniform_closed_form_curve(t.n, t.degree, b, eps)])

print()
print(f"{'eps':>7} {'simulated':>10} {'series':>8} {'gap':>8}")
for j in range(0, len(eps), 3):
    print(f"{eps[j]:>7.3f} {sim[j]:>10.4f} {theo[j]:>8.4f} {sim[j] - theo[j]:>+8.4f}")
print()
print("the series is near-exact for small eps and saturates around "
      f"{theo[-1]:.3f} while basins cover everything; see the quadrature "
      "route for arbitrary pdfs:")

params = hs.TheoryParams.from_topology(t)
u = hs.PdfSpec.uniform01()
curve = hs.success_curve(u, hs.LocalPdfSpec.independent(u), params, eps, max_k=5)
quad = np.asarray([f for _, f in curve])
print(f"max |quadrature - series(depth<=5)| = "
      f"{np.max(np.abs(quad - [f for _, f in hs.uniform_closed_form_curve(t.n, t.degree, b[:4], eps)])):.2e}")
