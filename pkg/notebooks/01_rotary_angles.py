"""
Rotary angles and wavelengths
=============================

Each dimension pair ``i`` of a rotary embedding turns by ``theta_i`` radians
per position. Low pairs spin fast, high pairs barely move inside the
pre-training window.
"""

import numpy as np

from ropedist import LLAMA2, base_theta, rotary_angle, wavelength, wavelength_ratio

th = base_theta(LLAMA2)

# rotations completed inside the 4096-token window, per pair
r = wavelength_ratio(LLAMA2, th.values)
for i in (0, 6, 22, 40, 63):
    print(f"pair {i:2d}: theta={th[i]:.6g} wavelength={wavelength(th[i]):10.1f} rotations={r[i]:9.3f}")

# pairs that never complete one full turn over the window
print("pairs with r < 1:", np.flatnonzero(r < 1).tolist())

# angles are reduced against the true 2*pi, so large positions stay accurate
print(rotary_angle(10**6, th[0]), rotary_angle(np.arange(5), th[6]))
