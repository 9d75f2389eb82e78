"""Quadrature oracle for the twisted-normal experiment.

With theta_1, theta_2 ~ N(0, 1) and y = theta_1 + theta_2^2 observed at y = 1,
the h -> 0 limit of the ABC posterior puts theta_1 = 1 - t^2 with t = theta_2
distributed with density proportional to exp(-(1 - t^2)^2 / 2 - t^2 / 2).
The target functional is E(theta_1 - theta_2) = E(1 - t^2 - t).

Prints the constants stored in include/recal/models/twisted_oracle.hpp.
"""

import numpy as np
from scipy import integrate


def density(t):
    return np.exp(-0.5 * (1.0 - t * t) ** 2 - 0.5 * t * t)


def integral(f):
    value, _ = integrate.quad(f, -6.0, 6.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    return value


def main():
    z = integral(density)
    g = lambda t: 1.0 - t * t - t
    mean = integral(lambda t: g(t) * density(t)) / z
    second = integral(lambda t: g(t) ** 2 * density(t)) / z
    # prior expectation of theta_1 - theta_2 is 0
    print(f"normaliser      {z!r}")
    print(f"posterior_mean  {mean!r}")
    print(f"posterior_var   {second - mean * mean!r}")


if __name__ == "__main__":
    main()
