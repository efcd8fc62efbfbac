"""Power iteration converging to the spectral norm, with the exact oracle.

Demonstrates the two independent routes to the largest singular value:
the training-time estimator (one persistent-u step at a time) and the
cyclic-Jacobi eigensolve used in the tests.
"""

import numpy as np

from abcas.linalg import init_power_iter_state, power_iteration_step, spectral_norm_exact

rng = np.random.default_rng(0)
W = rng.standard_normal((24, 36))

exact = spectral_norm_exact(W)
print(f"matrix 24x36, exact spectral norm (Jacobi oracle): {exact:.12f}")
print(f"lapack cross-check:                                {np.linalg.svd(W, compute_uv=False)[0]:.12f}")
print()
print("step   sigma_hat        rel error")

state = init_power_iter_state(24, seed=1)
for step in range(1, 101):
    state = power_iteration_step(W, state)
    if step in (1, 2, 3, 5, 10, 20, 50, 100):
        rel = abs(state.sigma_hat - exact) / exact
        print(f"{step:4d}   {state.sigma_hat:.12f}   {rel:.2e}")

print()
print("the estimate approaches from below: the Rayleigh quotient is a lower bound")
