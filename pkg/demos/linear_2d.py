"""
Two-dimensional linear drift G x with G = [[0, 1], [1, 0]].

The Euler-Lagrange equation decouples into psi'' = psi, so each coordinate is
a combination of sinh(t) and sinh(l - t). Compare that with the bridge-ODE
path for both endpoint pairs.
"""
import numpy as np

from mptp import LinearModel, integrate_ivp
from mptp.lineardyn import linear_bridge_field

m = LinearModel([[0.0, 1.0], [1.0, 0.0]], [0.0, 0.0], sigma=1.0)

for x0, xl in (((1, -1), (-1, 1)), ((1, -1), (1, 1))):
    x0, xl = np.array(x0, float), np.array(xl, float)
    for l in (2.0, 3.0, 4.0):
        path = integrate_ivp(linear_bridge_field(m, xl, l), x0, l, 1e-4)
        t = path.times[:, None]
        exact = (xl * np.sinh(t) + x0 * np.sinh(l - t)) / np.sinh(l)
        mid = path.values[path.n_steps // 2]
        print(f"{x0} -> {xl}, l={l:g}: midpoint {np.round(mid, 4) + 0.0}, "
              f"gap {np.max(np.abs(path.values - exact)):.1e}")
