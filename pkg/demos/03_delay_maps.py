# Retarded speed feedback on a machine against an infinite bus.
import numpy as np

from smallsig.dae import omib_linear
from smallsig.delay import delay_independent_band, delay_margin, omib_pr, stability_map

lin = omib_linear()
print(f"b = {lin.meta['b']:.4f}, delta_o = {lin.meta['delta_o']:.4f} rad")
eps = 1 / lin.meta["Omega_b"]

for c in (-0.4, 0.0, 0.4):
    band = delay_independent_band(c, eps)
    dm = delay_margin(omib_pr(c))
    print(f"c = {c:+.1f}: |K| < {band.high:7.2f} is delay-independent {band.kind:8s}  margin {dm.tau:.4f} s at K = {dm.K:.4g}")

# coarse sigma map at c = -0.4; '#' stable, '.' unstable
sys_ = omib_pr(-0.4)
taus = np.linspace(0, 0.4, 17)
gains = np.linspace(-1000, 1000, 41)
m = stability_map(lambda t, k: sys_.delay_lti(t, k), taus, gains, N_C=12)
print("\ntau \\ K  -1000 ... +1000")
for i, t in enumerate(taus):
    print(f"{t:5.3f}  " + "".join("#" if v < 0 else "." for v in m.metric[i]))
print("stable island at (0.30, -763) reachable from tau = 0:", m.connected_to_zero_delay(0.30, -763.4))
