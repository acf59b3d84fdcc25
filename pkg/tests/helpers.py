"""Shared test utilities."""

import numpy as np


def random_spd(rng, n, log10_min=-3.0, log10_max=3.0):
    """Random SPD matrix with eigenvalues in [10^log10_min, 10^log10_max].

    The default range bounds the condition number by 1e6.
    """
    eigvals = 10.0 ** rng.uniform(log10_min, log10_max, n)
    basis, _ = np.linalg.qr(rng.normal(size=(n, n)))
    mat = (basis * eigvals) @ basis.T
    return 0.5 * (mat + mat.T)
