"""Pure NumPy implementations of the hot loops.

Signatures and semantics match ``_core.pyx`` exactly; see the package
``__init__`` for the contract of each kernel.
"""

import numpy as np

_SMALL = 1e-8


def _int_cos(nu, tau):
    # int_0^tau cos(nu s) ds
    out = np.empty_like(nu)
    small = np.abs(nu * tau) < _SMALL
    out[small] = tau
    big = ~small
    out[big] = np.sin(nu[big] * tau) / nu[big]
    return out


def _int_sin(nu, tau):
    # int_0^tau sin(nu s) ds = 2 sin^2(nu tau / 2) / nu
    out = np.zeros_like(nu)
    nz = nu != 0.0
    half = np.sin(0.5 * nu[nz] * tau)
    out[nz] = 2.0 * half * half / nu[nz]
    return out


def segment_gram(omega, qm, pm, tau):
    """G_ij = int_0^tau x_i(s) x_j(s) ds for x = (q~(s), p~(s)) under free flow."""
    freq = np.concatenate([omega, omega])
    amp_c = np.concatenate([qm, pm])
    amp_s = np.concatenate([pm / omega, -omega * qm])
    a = freq[:, None]
    b = freq[None, :]
    ic_m, ic_p = _int_cos(a - b, tau), _int_cos(a + b, tau)
    is_p = _int_sin(a + b, tau)
    is_ba = _int_sin(b - a, tau)
    cc = 0.5 * (ic_m + ic_p)
    ss = 0.5 * (ic_m - ic_p)
    cs = 0.5 * (is_p + is_ba)  # int cos(a s) sin(b s)
    return (
        np.outer(amp_c, amp_c) * cc
        + np.outer(amp_c, amp_s) * cs
        + np.outer(amp_s, amp_c) * cs.T
        + np.outer(amp_s, amp_s) * ss
    )


def pdmp_run(omega, beta, qm, pm, taus, t_elapsed, t_end, forms):
    """Advance the flip process through a block of gaps.

    Returns ``(n_flips, t_elapsed, integrals, qm, pm, done)``.
    """
    omega = np.asarray(omega, dtype=float)
    beta = np.asarray(beta, dtype=float)
    qm = np.array(qm, dtype=float)
    pm = np.array(pm, dtype=float)
    forms = np.asarray(forms, dtype=float)
    integrals = np.zeros(forms.shape[0])
    n_flips = 0
    done = False
    for tau in taus:
        nxt = t_elapsed + tau
        seg = tau if nxt <= t_end else t_end - t_elapsed
        if forms.shape[0] and seg > 0:
            g = segment_gram(omega, qm, pm, seg)
            integrals += np.einsum("kij,ij->k", forms, g)
        c = np.cos(omega * seg)
        s = np.sin(omega * seg)
        qm, pm = c * qm + (s / omega) * pm, -omega * s * qm + c * pm
        if nxt <= t_end:
            pm = pm - 2.0 * (beta @ pm) * beta
            t_elapsed = nxt
            n_flips += 1
            if nxt == t_end:
                done = True
                break
        else:
            t_elapsed = t_end
            done = True
            break
    return n_flips, t_elapsed, integrals, qm, pm, done


def chain_run(omega, beta, qm, pm, taus, skip, thin):
    """States after each flip; drop the first ``skip``, keep every ``thin``-th.

    Returns ``(kept, qm, pm)`` with ``kept`` of shape (k, 2N) in modal
    coordinates (q~ then p~).
    """
    omega = np.asarray(omega, dtype=float)
    beta = np.asarray(beta, dtype=float)
    qm = np.array(qm, dtype=float)
    pm = np.array(pm, dtype=float)
    n = omega.size
    m = len(taus)
    n_keep = 0 if m <= skip else (m - skip + thin - 1) // thin
    kept = np.empty((n_keep, 2 * n))
    j = 0
    for i, tau in enumerate(taus):
        c = np.cos(omega * tau)
        s = np.sin(omega * tau)
        qm, pm = c * qm + (s / omega) * pm, -omega * s * qm + c * pm
        pm = pm - 2.0 * (beta @ pm) * beta
        if i >= skip and (i - skip) % thin == 0:
            kept[j, :n] = qm
            kept[j, n:] = pm
            j += 1
    return kept, qm, pm


_CHUNK = 65536


def scan_modal_distance(qm, pm, omega, qt, pt, wq, wp, t0, dt, count):
    """argmin over t_i = t0 + i dt of sum wq (q~(t)-qt)^2 + wp (p~(t)-pt)^2."""
    best_i, best_v = 0, np.inf
    for start in range(0, count, _CHUNK):
        idx = np.arange(start, min(count, start + _CHUNK))
        t = (t0 + idx * dt)[:, None]
        c, s = np.cos(omega * t), np.sin(omega * t)
        dq = c * qm + s / omega * pm - qt
        dp = -omega * s * qm + c * pm - pt
        val = (dq * dq) @ wq + (dp * dp) @ wp
        k = int(np.argmin(val))
        if val[k] < best_v:
            best_i, best_v = int(idx[k]), float(val[k])
    return best_i, best_v


def scan_flip_delta(qm, pm, omega, beta, t0, dt, count):
    """argmin over the grid of Delta(Psi(r, p~(t))) for a flip at time t."""
    r2 = pm * pm + omega * omega * qm * qm
    b2 = beta * beta
    best_i, best_v = 0, np.inf
    for start in range(0, count, _CHUNK):
        idx = np.arange(start, min(count, start + _CHUNK))
        t = (t0 + idx * dt)[:, None]
        p = -omega * np.sin(omega * t) * qm + np.cos(omega * t) * pm
        p1 = p @ beta
        sq = r2 + 4.0 * (p1 * p1)[:, None] * b2 - 4.0 * p1[:, None] * beta * p
        g2 = np.maximum(sq, 0.0) / b2
        val = g2.max(axis=1) - g2.min(axis=1)
        k = int(np.argmin(val))
        if val[k] < best_v:
            best_i, best_v = int(idx[k]), float(val[k])
    return best_i, best_v
