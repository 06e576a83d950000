"""Writes crates/core/tests/data/tau_reference.csv using 50-digit arithmetic."""
import itertools
import pathlib

from mpmath import mp, mpf, log, sqrt, pi

mp.dps = 50
M = 8


def tau(sigma, n, l):
    p = 4 * l * log(6 * l + log(n))
    t = 8 * sqrt(sigma * M) / (7 - 8 / p) * sqrt(2 * l * log(17) + log(pi * n * p + 1) + 1)
    return t, p


out = pathlib.Path(__file__).resolve().parents[1] / "crates/core/tests/data/tau_reference.csv"
rows = ["sigma,M,N,L,tau,p"]
for s, l, n in itertools.product(["0.01", "1", "37.5"], [1, 4, 8], [12, 30, 100]):
    t, p = tau(mpf(s), mpf(n), mpf(l))
    rows.append(f"{s},{M},{n},{l},{mp.nstr(t, 20)},{mp.nstr(p, 20)}")
out.write_text("\n".join(rows) + "\n")
print(out)
