# Eigenstructure of singular pencils and what participates in each mode.
import numpy as np

from smallsig.dae import example_ch3, example_ch4_plant
from smallsig.participation import generalized_pf, jordan_pf
from smallsig.pencil import MoebiusCoeffs, eigen, moebius_transform, prime_spectrum, stability_verdict

np.set_printoptions(precision=4, suppress=True)

# the 7x7 pencil: five finite modes, two at infinity
P4 = example_ch4_plant().pencil
sol = eigen(P4)
print("example_ch4 finite:", sol.finite_eigs.real, " infinite:", sol.inf_multiplicity)
print(stability_verdict(sol).summary())

# shift-invert around sigma = 0.9 puts the unstable mode s = 1 at the top of |z|
co = MoebiusCoeffs.shift_invert(0.9)
z = eigen(moebius_transform(P4, co))
k = np.argmax(np.abs(z.finite_eigs))
print("largest |z| =", abs(z.finite_eigs[k]), "-> s =", prime_spectrum(z, co)[k].real)

# the 5x5 pencil has a defective double eigenvalue at -2
P3 = example_ch3()
sol3 = eigen(P3)
print("\nexample_ch3 finite:", sol3.finite_eigs.real, " infinite:", sol3.inf_multiplicity)

jp = jordan_pf(P3, eigenvalue=-2.0)
k3 = int(np.argmin(np.abs(sol3.finite_eigs + 3)))
pf3 = generalized_pf(P3, sol3, [k3])
print("\nvar   pi(-2) const   pi(-2) t-coef   pi(-3)")
for i in range(5):
    print(f"x{i + 1}    {jp.values[i, 0].real:10.4f}   {jp.time_poly[i, 0, 1].real:12.4f}   {pf3.values[i, 0].real:8.4f}")
# constant terms of the double mode add up to its multiplicity
print("column sums:", jp.values[:, 0].sum().real, pf3.values[:, 0].sum().real)
