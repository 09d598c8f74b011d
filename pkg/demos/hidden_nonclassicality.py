"""
A nonclassical state that simple tests miss
===========================================

A thermal state mixed with a few percent of photon-added thermal light.
Neither the plain Bochner minor 1 - |Phi(beta)|^2 nor the 2x2 matrix of
moments sees anything unusual, but a second-order Bochner matrix that mixes
the CF with its derivatives turns negative near |beta| = 5.8.
"""

import numpy as np

from gbmcheck import gbm, states

state = states.photon_added_mixture()
print("mean photon number:", round(states.mean_photon_number(state), 4))

# the state is phase insensitive, so a radial cut along real beta is enough
radii = np.linspace(0, 7, 71)
bochner = 1 - np.abs(states.cf(state, radii)) ** 2
second = gbm.grid_scan(state, gbm.gbm2, radii).det

print(f"\n{'|beta|':>7} {'1-|Phi|^2':>12} {'gbm2 det':>12}")
for r, b, d in zip(radii[::5], bochner[::5], second[::5]):
    print(f"{r:7.2f} {b:12.5f} {d:12.5f}")

k = np.argmin(second)
print(f"\nsmallest gbm2 determinant {second[k]:.4f} at |beta| = {radii[k]:.1f}")
print("1 - |Phi|^2 never negative:", bool(bochner.min() >= 0))
print("matrix of moments:", round(gbm.evaluate(state, gbm.mom2()).det, 5))

# any custom matrix works the same way; here the 3x3 example at the same radius
print("example3x3 at beta=5.8:", round(gbm.evaluate(state, gbm.example3x3(5.8)).det, 5))
