#!/usr/bin/env python3
"""Random-walk autocorrelation as a locality probe, and parameter fitting.

The RWA of a 100k-step uniform-neighbor walk measures how quickly loss
correlation decays with edit distance.  Correlated landscapes show a clear
signal at small lags that vanishes by sqrt(lag) ~ 3.5; i.i.d. losses sit at
the revisit floor.  The same curves drive the local-sigma fit; a histogram
grid search recovers the global pdf parameters.
"""

import numpy as np

import hillscape as hs

t = hs.make_clique_power(5, 6)

print("RWA rho(t) by landscape smoothness (walk length 100000):")
lags = [1, 2, 4, 9, 16, 25, 36]
print(f"{'sigma_local':>12}" + "".join(f"  t={lag:<6}" for lag in lags))
for sig in (0.1, 0.2, 0.35):
    scape = hs.sample_markov_truncnorm(t, sig, 0.25, 0.18, seed=5)
    view = hs.LandscapeView(scape, hs.NoiseSpec.none(), seed=0)
    rows = hs.rwa(view, walk_len=100_000, max_lag=36, seed=11)
    rho = {lag: r for lag, _, r in rows}
    print(f"{sig:>12}" + "".join(f"  {rho[lag]:<7.3f}" for lag in lags))
scape = hs.sample_uniform(t, seed=5)
view = hs.LandscapeView(scape, hs.NoiseSpec.none(), seed=0)
rows = hs.rwa(view, walk_len=100_000, max_lag=36, seed=11)
rho = {lag: r for lag, _, r in rows}
print(f"{'iid uniform':>12}" + "".join(f"  {rho[lag]:<7.3f}" for lag in lags))

print("\nlocal-sigma recovery from an observed RWA curve:")
observed_scape = hs.sample_markov_truncnorm(t, 0.35, 0.25, 0.18, seed=99)
observed_view = hs.LandscapeView(observed_scape, hs.NoiseSpec.none(), seed=0)
observed = np.asarray(hs.rwa(observed_view, walk_len=100_000, max_lag=36, seed=31))
fit = hs.fit_local_sigma_via_rwa(observed, t, [0.2, 0.35, 0.5], seed=32)
print(f"  candidates (0.2, 0.35, 0.5) -> sigma_local = {fit.sigma} "
      f"(objective {fit.objective:.4f})")

print("\nglobal pdf recovery from a loss histogram (100k draws):")
for sigma in (0.10, 0.18, 0.22):
    rng = np.random.default_rng(hs.mix64(7, int(100 * sigma)))
    losses = hs.sample_truncnorm(0.25, sigma, rng, size=100_000)
    g = hs.fit_global_truncnorm(losses)
    print(f"  true (sigma={sigma}, center=0.25) -> fitted "
          f"(sigma={g.sigma:.2f}, center={g.center:.2f})")
