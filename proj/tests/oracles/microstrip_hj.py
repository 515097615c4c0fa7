"""Standalone Hammerstad-Jensen microstrip evaluation used to freeze test values.

Run: python3 microstrip_hj.py h w t eps_r   (dimensions in mm)
"""
import math
import sys

ETA0 = 376.730313668


def z_air(u):
    f = 6 + (2 * math.pi - 6) * math.exp(-((30.666 / u) ** 0.7528))
    return ETA0 / (2 * math.pi) * math.log(f / u + math.sqrt(1 + (2 / u) ** 2))


def e_thin(u, er):
    a = 1 + math.log((u ** 4 + (u / 52) ** 2) / (u ** 4 + 0.432)) / 49 + math.log(1 + (u / 18.1) ** 3) / 18.7
    b = 0.564 * ((er - 0.9) / (er + 3)) ** 0.053
    return (er + 1) / 2 + (er - 1) / 2 * (1 + 10 / u) ** (-a * b)


def microstrip(h, w, t, er):
    u, tn = w / h, t / h
    d1 = 0.0
    if tn > 0:
        x = math.sqrt(6.517 * u)
        coth = math.cosh(x) / math.sinh(x)
        d1 = tn / math.pi * math.log(1 + 4 * math.e / (tn * coth ** 2))
    dr = 0.5 * (1 + 1 / math.cosh(math.sqrt(er - 1))) * d1
    u1, ur = u + d1, u + dr
    z0 = z_air(ur) / math.sqrt(e_thin(ur, er))
    ee = e_thin(ur, er) * (z_air(u1) / z_air(ur)) ** 2
    return z0, ee


if __name__ == "__main__":
    h, w, t, er = (float(a) for a in sys.argv[1:5])
    z0, ee = microstrip(h, w, t, er)
    print(f"{z0:.10f} {ee:.10f}")
