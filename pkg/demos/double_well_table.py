"""
Transition from -1 to 1 in the double well U(x) = x^2/2 - x^4/4.

For each horizon l we compute the two small-noise bridge approximations and
the shooting solution, and print their discrete Freidlin-Wentzell actions.
The first approximation flattens out near 1.49 for long horizons while the
shooting action keeps decreasing towards 1, which is why appr1 is only
trusted for short horizons. Takes about a minute.
"""
from mptp.routes import TABLE1_L, TABLE1_ROWS, table1

cells = table1()
print("l      " + "".join(f"{l:>9}" for l in TABLE1_L))
for row in TABLE1_ROWS:
    print(f"{row:<7}" + "".join("       NC" if v is None else f"{v:9.4f}" for v in cells[row]))
