"""
Normally ordered moments and the CF from quadrature records
===========================================================

A two-photon Fock state seen through 80 % efficient detection. The sampled
moments are compared with the lossy state, for which
<a^dag^k a^k> scales by eta^k, and the CF at a few points is estimated
with both estimators (phase-binned and derivative sampling).
"""

import math

from gbmcheck import bhdsim, estimator, states

eta = 0.8
state = states.Fock(2)
data = bhdsim.generate(bhdsim.SimConfig(state, efficiency=eta, samples=400_000, seed=3))

print(f"{'k':>2} {'l':>2} {'estimate':>22} {'std err':>9} {'lossy exact':>12}")
for k, l in [(1, 1), (2, 2), (1, 0), (2, 0), (3, 3)]:
    est = estimator.sample_moment(data, k, l)
    exact = eta ** k * states.moment(state, k, l).real + 0.0 if k == l else 0.0
    print(f"{k:2d} {l:2d} {est.value.real:11.4f}{est.value.imag:+10.4f}j {est.std_error[0]:9.4f} {exact:12.4f}")

# the CF of the lossy Fock state is Phi(sqrt(eta) beta) of the ideal one
print(f"\n{'beta':>10} {'direct':>10} {'derivative':>11} {'exact':>9}")
for beta in [0.5, 1.0j, 1.2 * complex(math.cos(1), math.sin(1))]:
    d = estimator.sample_cf_direct(data, beta)
    s = estimator.sample_cf_derivative(data, (0, 0), beta)
    exact = states.cf(state, math.sqrt(eta) * beta).real
    print(f"{beta:10.2f} {d.value.real:10.4f} {s.value.real:11.4f} {exact:9.4f}")
