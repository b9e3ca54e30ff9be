# Oustaloup approximation of s^gamma and a fractional PI closed loop.
import numpy as np

from smallsig.fractional import (
    OraSpec, example_ch4_closed_loop, fractional_stability, ora_frequency_response, ora_realize, ora_step_error,
    ora_step_simulation,
)

spec = OraSpec(gamma=-0.7, omega_b=1e-3, omega_h=1e3, N=11)
real = ora_realize(spec)
print("nonzeros:", real.nnz())

w = np.logspace(-4, 4, 9)
H = ora_frequency_response(real, w)
print("\n   omega    |H| dB   phase    ideal phase")
for wi, h in zip(w, H):
    print(f"{wi:8.0e}  {20 * np.log10(abs(h)):7.2f}  {np.degrees(np.angle(h)):7.2f}  {90 * spec.gamma:7.2f}")
# flat outside the band: w_b^gamma below, w_h^gamma above

# unity feedback around 10 * ORA(s^-0.5): the final error is set by the DC gain
K, g, wb = 10.0, -0.5, 1e-4
t, e = ora_step_simulation(K, OraSpec(g, wb, 1e4, 8))
print(f"\nstep error at t = {t[-1]:.0f} s: {e[-1]:.6f}, predicted {ora_step_error(K, g, wb):.6f}")

# the doubled pencil does not depend on gamma; only the cone threshold does
for gamma in (0.3, 0.6, 0.9):
    v = fractional_stability(example_ch4_closed_loop(gamma=gamma))
    print(f"gamma {gamma}: {v.eigenvalues.size} finite, min |arg| {v.args.min():.3f} vs {v.threshold:.3f} ->",
          "stable" if v.stable else "unstable")

# the integral gain does move the poles
for K_i in (1.0, 10.0, 40.0):
    v = fractional_stability(example_ch4_closed_loop(K_i=K_i))
    print(f"K_i {K_i:4.0f}: min |arg| {v.args.min():.3f} ->", "stable" if v.stable else "unstable")
