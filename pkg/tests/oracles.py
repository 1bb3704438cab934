"""Independent reference values and brute-force helpers for the tests.

Frozen constants were computed with mpmath at 30 digits from the closed-form
expressions (preparation populations, effective temperatures, heat flows);
the matrix helpers below build everything from explicit 4x4 arrays and do
not touch the package's gate or trace kernels.
"""

import numpy as np

BETA_C = 0.510825623765990683  # ln(5/3)
BETA_H = 0.134175532139972778  # ln(1 + 2 tan^2(pi/12))
KAPPA = 9.19615242270663188
ETA = -0.418258151868903953
P00 = 0.158493649053890338
INV_ZC = 0.625
INV_ZH = 0.533493649053890338

QQ_AT_01 = 0.0821830497695660797
QSC_AT_01 = -0.000912017361808151081
I_AT_01 = 0.0737959990982235402
I_AT_PI_MINUS_01 = 0.0756200338218398424
QQ_AT_PI2 = -0.0915063509461096617
QSC_AT_PI2 = -0.0915063509461096617
I_AT_PI2 = -0.75

HC = np.diag([0.0, 0.0, 1.0, 1.0])
HH = np.diag([0.0, 1.0, 0.0, 1.0])


def givens(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1]], dtype=float)


def rho_closed(t_c, t_h, eta_shift=0.0):
    cc, ch = np.cos(t_c / 2), np.cos(t_h / 2)
    p00 = 1 - (cc**2 + ch**2) / 2
    a, b = 1 - cc**2 / 2 - p00, 1 - ch**2 / 2 - p00
    eta = -cc * ch / 2 + eta_shift
    return np.array([[p00, 0, 0, 0], [0, a, eta, 0], [0, eta, b, 0], [0, 0, 0, 1 - a - b - p00]])


def heats(rho, start, theta):
    u = givens(theta)
    fin = u @ start @ u.T
    return (np.trace(rho @ HC) - np.trace(fin @ HC), np.trace(rho @ HH) - np.trace(fin @ HH))


def kdq_brute(rho, theta):
    u = givens(theta)
    out = np.zeros((4, 4))
    for i in range(4):
        for f in range(4):
            pi_i = np.zeros((4, 4)); pi_i[i, i] = 1
            pi_f = np.zeros((4, 4)); pi_f[f, f] = 1
            out[i, f] = np.real(np.trace(u.T @ pi_f @ u @ pi_i @ rho))
    return out


def random_density(rng, n):
    d = 2**n
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = g @ g.conj().T
    return r / np.trace(r).real
