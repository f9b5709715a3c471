"""Compiled closed-loop engine.

Mirrors the pure-Python engine in :mod:`pmsm_gp.sim` step for step; the
test suite checks both against each other on short horizons.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

STRATEGY_CODES = {"none": 0, "moe": 1, "gpoe": 2, "coaoe-mean": 3, "coaoe-eta": 4, "perfect": 5}

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def _map(phi, omega, upsilon, omega_max):
    w = (upsilon * phi) % TWO_PI
    if w >= TWO_PI:
        w = 0.0
    return w - math.pi, omega / omega_max


@njit(cache=True)
def _torque(phi_m, omega_m):
    return 2.0 * math.sin(phi_m) + 2e-4 * math.cos(phi_m) * omega_m**2 + 10.0


@njit(cache=True)
def _domega(phi, omega, drive, J, B, upsilon, omega_max, load_offset, compensate):
    pm, om = _map(phi, omega, upsilon, omega_max)
    load = _torque(pm, om)
    if compensate:
        # continuous compensation: the field cancels and only the held estimate remains
        load = load_offset
    return (-B * omega + drive - load) / J


@njit(cache=True)
def _rk4(phi, omega, dt, drive, J, B, upsilon, omega_max, load_offset, compensate):
    k1p = omega
    k1w = _domega(phi, omega, drive, J, B, upsilon, omega_max, load_offset, compensate)
    k2p = omega + 0.5 * dt * k1w
    k2w = _domega(phi + 0.5 * dt * k1p, k2p, drive, J, B, upsilon, omega_max, load_offset, compensate)
    k3p = omega + 0.5 * dt * k2w
    k3w = _domega(phi + 0.5 * dt * k2p, k3p, drive, J, B, upsilon, omega_max, load_offset, compensate)
    k4p = omega + dt * k3w
    k4w = _domega(phi + dt * k3p, k4p, drive, J, B, upsilon, omega_max, load_offset, compensate)
    phi_new = phi + (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    omega_new = omega + (dt / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    return phi_new, omega_new


@njit(cache=True)
def _gp_query(pm, om, X, alpha, L, M, sigma_f, ell, need_var, means, variances, kbuf, vbuf):
    sf2 = sigma_f * sigma_f
    inv2l2 = 1.0 / (2.0 * ell * ell)
    for i in range(X.shape[0]):
        mu = 0.0
        for j in range(M[i]):
            d0 = pm - X[i, j, 0]
            d1 = om - X[i, j, 1]
            kj = sf2 * math.exp(-(d0 * d0 + d1 * d1) * inv2l2)
            kbuf[j] = kj
            mu += kj * alpha[i, j]
        means[i] = mu
        if need_var:
            # forward substitution L v = k
            acc = 0.0
            for r in range(M[i]):
                s = kbuf[r]
                for c in range(r):
                    s -= L[i, r, c] * vbuf[c]
                vbuf[r] = s / L[i, r, r]
                acc += vbuf[r] * vbuf[r]
            var = sf2 - acc
            variances[i] = var if var > 0.0 else 0.0


@njit(cache=True)
def simulate(n_ticks, n_sub, dt_ctrl, J, p, B, psi, upsilon, omega_max, alpha_ref, t_acc,
             lam1, lam2, P, code, X, alpha, L, M, sigma_f, ell, sqrt_beta, gamma, phi0, omega0, out):
    """Fill ``out`` row by row; return the first non-finite tick index or -1."""
    N = X.shape[0]
    kt = 1.5 * p * psi
    dt_sim = dt_ctrl / n_sub
    means = np.zeros(N)
    variances = np.zeros(N)
    w = np.zeros(N)
    mmax = X.shape[1]
    kbuf = np.zeros(mmax)
    vbuf = np.zeros(mmax)
    need_var = code == 2 or code == 4
    phi = phi0
    omega = omega0
    for k in range(n_ticks + 1):
        t = k * dt_ctrl
        if t <= t_acc:
            phi_d = 0.5 * alpha_ref * t * t
            omega_d = alpha_ref * t
            acc_d = alpha_ref
        else:
            phi_d = alpha_ref * t_acc * t - 0.5 * alpha_ref * t_acc * t_acc
            omega_d = alpha_ref * t_acc
            acc_d = 0.0
        e1 = phi - phi_d
        e2 = omega - omega_d
        pm, om = _map(phi, omega, upsilon, omega_max)
        T_true = _torque(pm, om)

        for i in range(N):
            w[i] = 0.0
        if code == 0 or code == 5:
            for i in range(N):
                w[i] = 1.0 / N
            T_hat = 0.0 if code == 0 else T_true
        else:
            _gp_query(pm, om, X, alpha, L, M, sigma_f, ell, need_var, means, variances, kbuf, vbuf)
            if code == 1:
                T_hat = 0.0
                for i in range(N):
                    w[i] = 1.0 / N
                    T_hat += w[i] * means[i]
            elif code == 2:
                zero = -1
                for i in range(N):
                    w[i] = 1.0 / N
                    if zero < 0 and variances[i] == 0.0:
                        zero = i
                if zero >= 0:
                    T_hat = means[zero]
                else:
                    prec_sum = 0.0
                    num = 0.0
                    for i in range(N):
                        prec = w[i] / variances[i]
                        prec_sum += prec
                        num += prec * means[i]
                    T_hat = (1.0 / prec_sum) * num
            elif code == 3:
                s = (P[0, 1] * e1 + P[1, 1] * e2)
                best = 0
                best_val = means[0] * s
                for i in range(1, N):
                    v = means[i] * s
                    if v < best_val:
                        best = i
                        best_val = v
                w[best] = 1.0
                T_hat = means[best]
            else:
                best = 0
                best_val = sqrt_beta[0] * math.sqrt(variances[0]) + gamma[0]
                for i in range(1, N):
                    v = sqrt_beta[i] * math.sqrt(variances[i]) + gamma[i]
                    if v < best_val:
                        best = i
                        best_val = v
                w[best] = 1.0
                T_hat = means[best]

        torque_cmd = (T_hat + J * lam1 * e1 + J * lam2 * e2 + B * omega + J * acc_d)
        i_q = torque_cmd / kt
        V = P[0, 0] * e1 * e1 + 2.0 * P[0, 1] * e1 * e2 + P[1, 1] * e2 * e2

        out[k, 0] = t
        out[k, 1] = phi
        out[k, 2] = omega
        out[k, 3] = phi_d
        out[k, 4] = omega_d
        out[k, 5] = e1
        out[k, 6] = e2
        out[k, 7] = math.sqrt(e1 * e1 + e2 * e2)
        out[k, 8] = T_true
        out[k, 9] = T_hat
        out[k, 10] = i_q
        for i in range(N):
            out[k, 11 + i] = w[i]
        out[k, 11 + N] = V

        if k == n_ticks:
            break
        drive = kt * i_q
        for _ in range(n_sub):
            phi, omega = _rk4(phi, omega, dt_sim, drive, J, B, upsilon, omega_max, T_hat, code == 5)
        if not (math.isfinite(phi) and math.isfinite(omega)):
            return k + 1
    return -1
