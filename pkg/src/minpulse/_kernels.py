"""Hot numerical kernels: per-interval control rules and sequential propagation.

Plain scalar-loop implementations compiled with numba when the active
backend allows (see `_backend`).  Every function here is pure, operates
on floats and preallocated arrays, and reports failures through integer
status codes instead of exceptions so that the compiled and fallback
paths behave identically; the public modules translate codes into the
package exception types.

Status codes
------------
0   success
1   degenerate moments (P parallel to X, or a full-period interval)
2   extremal-phase quadratic has no real root
3   no real root maximizes the interval Hamiltonian
4   zero generator (both amplitudes vanish)
"""

import math

import numpy as np

from ._backend import maybe_njit

__all__ = [
    "OK", "DEGENERATE", "NO_REAL_ROOT", "NO_ALIGNED_ROOT", "ZERO_GENERATOR",
    "FAMILY_TWO_CONTROL", "FAMILY_ONE_CONTROL", "FAMILY_LANDAU_ZENER",
    "rotate", "phase_rule", "interval_moment_integrals", "integral_of_l",
    "gamma_omega", "omega_rule", "gamma_delta", "delta_rule",
    "interval_control", "propagate_full", "shoot_final", "map_grid_distances",
    "su2_step", "grape_states", "grape_gradient_pmp", "grape_gradient_split",
    "grape_fidelity", "ascent_pmp",
]

OK = 0
DEGENERATE = 1
NO_REAL_ROOT = 2
NO_ALIGNED_ROOT = 3
ZERO_GENERATOR = 4

FAMILY_TWO_CONTROL = 0
FAMILY_ONE_CONTROL = 1
FAMILY_LANDAU_ZENER = 2

AMPLITUDE_GRID = 101
BISECTION_STEPS = 60

# 32-point Gauss-Legendre rule on [0, 1], used for the detuning-control
# switching average where no closed form is implemented.
_nodes, _weights = np.polynomial.legendre.leggauss(32)
GL_NODES = np.ascontiguousarray(0.5 * (_nodes + 1.0))
GL_WEIGHTS = np.ascontiguousarray(0.5 * _weights)
del _nodes, _weights


@maybe_njit
def rotate(nx, ny, nz, angle, vx, vy, vz):
    """Rotate (vx,vy,vz) by `angle` about the unit axis (nx,ny,nz)."""
    c = math.cos(angle)
    s = math.sin(angle)
    dot = nx * vx + ny * vy + nz * vz
    crx = ny * vz - nz * vy
    cry = nz * vx - nx * vz
    crz = nx * vy - ny * vx
    k = (1.0 - c) * dot
    return (vx * c + crx * s + nx * k,
            vy * c + cry * s + ny * k,
            vz * c + crz * s + nz * k)


@maybe_njit
def phase_rule(lx, ly, lz, tau, mirror):
    """Extremal phase for the two-control interval from L = X x P.

    Solves a h^2 + b h + c = 0 with h = tan(phi/2), keeps the root(s)
    whose averaged field is aligned with the control direction
    (cos(phi) L_x + sin(phi) L_y >= 0, the genuine maximizers), and
    among two such roots picks the larger h unless `mirror` is set.
    Returns (status, phi).
    """
    s = math.sin(tau)
    cm = 1.0 - math.cos(tau)
    a = ly * s + cm * lz
    b = 2.0 * lx * s
    c = cm * lz - ly * s
    lnorm = math.sqrt(lx * lx + ly * ly + lz * lz)
    scale = max(abs(a), max(abs(b), abs(c)))
    if scale <= 1e-13 * max(1.0, lnorm):
        return DEGENERATE, 0.0
    align_tol = -1e-12 * max(1.0, lnorm)

    h1 = 0.0
    h2 = 0.0
    nroots = 0
    has_pi = False
    if abs(a) <= 1e-12 * scale:
        # linear in h; the second root escapes to phi = pi
        has_pi = True
        if abs(b) > 1e-12 * scale:
            h1 = -c / b
            nroots = 1
    else:
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            return NO_REAL_ROOT, 0.0
        sq = math.sqrt(disc)
        q = -0.5 * (b + sq) if b >= 0.0 else -0.5 * (b - sq)
        if q == 0.0:
            h1 = 0.0
            h2 = 0.0
        else:
            h1 = q / a
            h2 = c / q
        nroots = 2

    best = 0.0
    alt = 0.0
    found = 0
    for idx in range(nroots):
        h = h1 if idx == 0 else h2
        phi = 2.0 * math.atan(h)
        g = lx * math.cos(phi) + ly * math.sin(phi)
        if g >= align_tol:
            if found == 0:
                best = phi
            else:
                alt = phi
            found += 1
    if has_pi and -lx >= align_tol:
        if found == 0:
            best = math.pi
        else:
            alt = math.pi
        found += 1

    if found == 0:
        return NO_ALIGNED_ROOT, 0.0
    if found == 1:
        return OK, best
    # two admissible roots: order by h and honor the branch flag
    hb = math.tan(0.5 * best)
    ha = math.tan(0.5 * alt)
    if mirror:
        return OK, (best if hb <= ha else alt)
    return OK, (best if hb >= ha else alt)


@maybe_njit
def interval_moment_integrals(lx, ly, lz, phi, tau):
    """Closed-form integrals (J_x, J_y) of P^T M_{x,y} X over one interval.

    J_a = (row a of the integrated rotation matrix) . L, for the interval
    generated by the phase `phi`.
    """
    s = math.sin(tau)
    cm = 1.0 - math.cos(tau)
    sp = math.sin(phi)
    cp = math.cos(phi)
    jx = (sp * sp * s + cp * cp * tau) * lx + (tau - s) * sp * cp * ly + cm * sp * lz
    jy = (tau - s) * sp * cp * lx + (sp * sp * tau + s * cp * cp) * ly - cm * cp * lz
    return jx, jy


@maybe_njit
def integral_of_l(lx, ly, lz, nx, ny, nz, om0, tau):
    """Integral of L(t) over [0, tau] for L rotating about n at rate om0."""
    th = om0 * tau
    if om0 <= 0.0:
        return lx * tau, ly * tau, lz * tau
    ic = math.sin(th) / om0
    is_ = (1.0 - math.cos(th)) / om0
    ik = tau - ic
    dot = nx * lx + ny * ly + nz * lz
    crx = ny * lz - nz * ly
    cry = nz * lx - nx * lz
    crz = nx * ly - ny * lx
    return (lx * ic + crx * is_ + nx * dot * ik,
            ly * ic + cry * is_ + ny * dot * ik,
            lz * ic + crz * is_ + nz * dot * ik)


@maybe_njit
def gamma_omega(lx, ly, lz, delta, om, tau):
    """Interval-averaged switching function (1/tau) * integral of L_x.

    Closed form for the generator of amplitude `om` and detuning `delta`.
    """
    om0 = math.hypot(om, delta)
    if om0 * tau < 1e-8:
        # leading order; also covers the zero-generator limit smoothly
        return lx - 0.5 * delta * ly * tau
    ilx, _, _ = integral_of_l(lx, ly, lz, om / om0, 0.0, delta / om0, om0, tau)
    return ilx / tau


@maybe_njit
def _interval_h_one_control(lx, ly, lz, delta, om, tau):
    """Interval-integrated Pontryagin Hamiltonian for the (om, delta) generator."""
    om0 = math.hypot(om, delta)
    if om0 == 0.0:
        return 0.0
    ilx, _, ilz = integral_of_l(lx, ly, lz, om / om0, 0.0, delta / om0, om0, tau)
    return om * ilx + delta * ilz


@maybe_njit
def omega_rule(lx, ly, lz, delta, tau, bound):
    """Extremal amplitude for the one-control interval.

    Three-case rule on the averaged switching function Gamma: all-positive
    gives +bound, all-negative gives -bound, otherwise an interior root
    (bracketed on a 101-point grid, bisected; ties broken by the larger
    interval Hamiltonian).  Returns (status, omega).
    """
    lnorm = math.sqrt(lx * lx + ly * ly + lz * lz)
    if lnorm <= 1e-13:
        return DEGENERATE, 0.0
    if delta == 0.0:
        # Gamma(om) = L_x for every om: bang by sign, degenerate at zero
        if abs(lx) <= 1e-13 * max(1.0, lnorm):
            return DEGENERATE, 0.0
        return OK, (bound if lx > 0.0 else -bound)

    gmin = 1e300
    gmax = -1e300
    step = 2.0 * bound / (AMPLITUDE_GRID - 1)
    for i in range(AMPLITUDE_GRID):
        g = gamma_omega(lx, ly, lz, delta, -bound + i * step, tau)
        if g < gmin:
            gmin = g
        if g > gmax:
            gmax = g
    if gmin > 0.0:
        return OK, bound
    if gmax < 0.0:
        return OK, -bound

    best = 0.0
    best_h = -1e300
    found = False
    gprev = gamma_omega(lx, ly, lz, delta, -bound, tau)
    for i in range(1, AMPLITUDE_GRID):
        om_hi = -bound + i * step
        gcur = gamma_omega(lx, ly, lz, delta, om_hi, tau)
        root = 1e300
        if gprev == 0.0:
            root = om_hi - step
        elif gprev * gcur < 0.0:
            lo = om_hi - step
            hi = om_hi
            glo = gprev
            for _ in range(BISECTION_STEPS):
                mid = 0.5 * (lo + hi)
                gm = gamma_omega(lx, ly, lz, delta, mid, tau)
                if glo * gm <= 0.0:
                    hi = mid
                else:
                    lo = mid
                    glo = gm
            root = 0.5 * (lo + hi)
        if root < 1e299:
            h = _interval_h_one_control(lx, ly, lz, delta, root, tau)
            if h > best_h:
                best_h = h
                best = root
                found = True
        gprev = gcur
    if gprev == 0.0:
        h = _interval_h_one_control(lx, ly, lz, delta, bound, tau)
        if h > best_h:
            best = bound
            found = True
    if not found:
        return DEGENERATE, 0.0
    return OK, best


@maybe_njit
def gamma_delta(lx, ly, lz, omega, dlt, tau, gl_nodes, gl_weights):
    """Averaged detuning switching function (1/tau) * integral of L_z.

    Gauss-Legendre quadrature over the closed-form rotation of L.
    """
    om0 = math.hypot(omega, dlt)
    if om0 == 0.0:
        return lz
    nx = omega / om0
    nz = dlt / om0
    acc = 0.0
    for i in range(gl_nodes.shape[0]):
        _, _, lzt = rotate(nx, 0.0, nz, om0 * tau * gl_nodes[i], lx, ly, lz)
        acc += gl_weights[i] * lzt
    return acc


@maybe_njit
def _interval_h_lz(lx, ly, lz, omega, dlt, tau):
    """Interval-integrated Pontryagin Hamiltonian for the fixed-coupling family."""
    om0 = math.hypot(omega, dlt)
    if om0 == 0.0:
        return 0.0
    ilx, _, ilz = integral_of_l(lx, ly, lz, omega / om0, 0.0, dlt / om0, om0, tau)
    return omega * ilx + dlt * ilz


@maybe_njit
def delta_rule(lx, ly, lz, omega, tau, bound, gl_nodes, gl_weights):
    """Extremal detuning for the fixed-coupling interval; returns (status, delta).

    Same three-case rule as `omega_rule` applied to the averaged
    d H_P / d Delta = mean of L_z(t).
    """
    lnorm = math.sqrt(lx * lx + ly * ly + lz * lz)
    if lnorm <= 1e-13:
        return DEGENERATE, 0.0

    gmin = 1e300
    gmax = -1e300
    step = 2.0 * bound / (AMPLITUDE_GRID - 1)
    for i in range(AMPLITUDE_GRID):
        g = gamma_delta(lx, ly, lz, omega, -bound + i * step, tau,
                        gl_nodes, gl_weights)
        if g < gmin:
            gmin = g
        if g > gmax:
            gmax = g
    if gmin > 0.0:
        return OK, bound
    if gmax < 0.0:
        return OK, -bound

    best = 0.0
    best_h = -1e300
    found = False
    gprev = gamma_delta(lx, ly, lz, omega, -bound, tau, gl_nodes, gl_weights)
    for i in range(1, AMPLITUDE_GRID):
        d_hi = -bound + i * step
        gcur = gamma_delta(lx, ly, lz, omega, d_hi, tau, gl_nodes, gl_weights)
        root = 1e300
        if gprev == 0.0:
            root = d_hi - step
        elif gprev * gcur < 0.0:
            lo = d_hi - step
            hi = d_hi
            glo = gprev
            for _ in range(BISECTION_STEPS):
                mid = 0.5 * (lo + hi)
                gm = gamma_delta(lx, ly, lz, omega, mid, tau,
                                 gl_nodes, gl_weights)
                if glo * gm <= 0.0:
                    hi = mid
                else:
                    lo = mid
                    glo = gm
            root = 0.5 * (lo + hi)
        if root < 1e299:
            h = _interval_h_lz(lx, ly, lz, omega, root, tau)
            if h > best_h:
                best_h = h
                best = root
                found = True
        gprev = gcur
    if gprev == 0.0:
        h = _interval_h_lz(lx, ly, lz, omega, bound, tau)
        if h > best_h:
            best = bound
            found = True
    if not found:
        return DEGENERATE, 0.0
    return OK, best


@maybe_njit
def interval_control(family, par1, par2, mirror, lx, ly, lz, tau,
                     gl_nodes, gl_weights):
    """Dispatch the per-interval extremal control rule.

    Returns (status, control, axis_x, axis_y, axis_z, angle) describing the
    selected control together with the rotation it generates over `tau`.
    """
    if family == FAMILY_TWO_CONTROL:
        status, phi = phase_rule(lx, ly, lz, tau, mirror)
        if status != OK:
            return status, 0.0, 0.0, 0.0, 0.0, 0.0
        return OK, phi, math.cos(phi), math.sin(phi), 0.0, tau
    if family == FAMILY_ONE_CONTROL:
        delta = par1
        status, om = omega_rule(lx, ly, lz, delta, tau, par2)
        if status != OK:
            return status, 0.0, 0.0, 0.0, 0.0, 0.0
        om0 = math.hypot(om, delta)
        if om0 == 0.0:
            return ZERO_GENERATOR, 0.0, 0.0, 0.0, 0.0, 0.0
        return OK, om, om / om0, 0.0, delta / om0, om0 * tau
    # fixed-coupling detuning control
    omega = par1
    status, dlt = delta_rule(lx, ly, lz, omega, tau, par2, gl_nodes, gl_weights)
    if status != OK:
        return status, 0.0, 0.0, 0.0, 0.0, 0.0
    om0 = math.hypot(omega, dlt)
    return OK, dlt, omega / om0, 0.0, dlt / om0, om0 * tau


@maybe_njit
def propagate_full(x0, p0, family, par1, par2, mirror, n, t_step, t_tail,
                   gl_nodes, gl_weights, states, adjoints, controls, hams):
    """Sequential extremal propagation recording every interval.

    Fills states (n+1, 3), adjoints (n+1, 3), controls (n,), hams (n,)
    with the interval-averaged H_P.  Returns (status, failed_interval).
    """
    xx, xy, xz = x0[0], x0[1], x0[2]
    px, py, pz = p0[0], p0[1], p0[2]
    states[0, 0] = xx
    states[0, 1] = xy
    states[0, 2] = xz
    adjoints[0, 0] = px
    adjoints[0, 1] = py
    adjoints[0, 2] = pz
    for k in range(n):
        tau = t_tail if k == n - 1 else t_step
        lx = xy * pz - xz * py
        ly = xz * px - xx * pz
        lz = xx * py - xy * px
        status, u, nx, ny, nz, ang = interval_control(
            family, par1, par2, mirror, lx, ly, lz, tau, gl_nodes, gl_weights)
        if status != OK:
            return status, k
        controls[k] = u
        if family == FAMILY_TWO_CONTROL:
            hams[k] = lx * nx + ly * ny
        elif family == FAMILY_ONE_CONTROL:
            hams[k] = u * lx + par1 * lz
        else:
            hams[k] = par1 * lx + u * lz
        xx, xy, xz = rotate(nx, ny, nz, ang, xx, xy, xz)
        px, py, pz = rotate(nx, ny, nz, ang, px, py, pz)
        states[k + 1, 0] = xx
        states[k + 1, 1] = xy
        states[k + 1, 2] = xz
        adjoints[k + 1, 0] = px
        adjoints[k + 1, 1] = py
        adjoints[k + 1, 2] = pz
    return OK, -1


@maybe_njit
def shoot_final(x0, p0, family, par1, par2, mirror, n, t_step, t_tail,
                gl_nodes, gl_weights):
    """Light propagation returning (status, x, y, z, H_P of the last interval)."""
    xx, xy, xz = x0[0], x0[1], x0[2]
    px, py, pz = p0[0], p0[1], p0[2]
    h_last = 0.0
    for k in range(n):
        tau = t_tail if k == n - 1 else t_step
        lx = xy * pz - xz * py
        ly = xz * px - xx * pz
        lz = xx * py - xy * px
        status, u, nx, ny, nz, ang = interval_control(
            family, par1, par2, mirror, lx, ly, lz, tau, gl_nodes, gl_weights)
        if status != OK:
            return status, 0.0, 0.0, 0.0, 0.0
        if family == FAMILY_TWO_CONTROL:
            h_last = lx * nx + ly * ny
        elif family == FAMILY_ONE_CONTROL:
            h_last = u * lx + par1 * lz
        else:
            h_last = par1 * lx + u * lz
        xx, xy, xz = rotate(nx, ny, nz, ang, xx, xy, xz)
        px, py, pz = rotate(nx, ny, nz, ang, px, py, pz)
    return OK, xx, xy, xz, h_last


@maybe_njit
def map_grid_distances(p0s, x0, family, par1, par2, mirror, n, t_step, t_tail,
                       target, gl_nodes, gl_weights, out):
    """Final-state distance to `target` for a batch of initial adjoints.

    Failed propagations record NaN.  Fills out (m,).
    """
    for i in range(p0s.shape[0]):
        status, xx, xy, xz, _ = shoot_final(
            x0, p0s[i], family, par1, par2, mirror, n, t_step, t_tail,
            gl_nodes, gl_weights)
        if status != OK:
            out[i] = np.nan
        else:
            out[i] = math.sqrt((xx - target[0]) ** 2 + (xy - target[1]) ** 2
                               + (xz - target[2]) ** 2)


# ---------------------------------------------------------------------------
# spinor kernels for the gradient optimizer
# ---------------------------------------------------------------------------

@maybe_njit
def su2_step(phi, tau, a0, a1):
    """Apply the interval propagator exp(-i tau (cos phi sx + sin phi sy)/2)."""
    c = math.cos(0.5 * tau)
    s = math.sin(0.5 * tau)
    eminus = complex(math.cos(phi), -math.sin(phi))
    b0 = c * a0 - 1j * s * eminus * a1
    b1 = c * a1 - 1j * s * eminus.conjugate() * a0
    return b0, b1


@maybe_njit
def su2_step_dagger(phi, tau, a0, a1):
    """Apply the adjoint of the interval propagator."""
    c = math.cos(0.5 * tau)
    s = math.sin(0.5 * tau)
    eminus = complex(math.cos(phi), -math.sin(phi))
    b0 = c * a0 + 1j * s * eminus * a1
    b1 = c * a1 + 1j * s * eminus.conjugate() * a0
    return b0, b1


@maybe_njit
def grape_states(phis, t_step, psi0, psif, psis, chis):
    """Forward/backward state sweep; fills psis, chis (n+1, 2); returns J."""
    n = phis.shape[0]
    a0, a1 = psi0[0], psi0[1]
    psis[0, 0] = a0
    psis[0, 1] = a1
    for k in range(n):
        a0, a1 = su2_step(phis[k], t_step, a0, a1)
        psis[k + 1, 0] = a0
        psis[k + 1, 1] = a1
    b0, b1 = psif[0], psif[1]
    chis[n, 0] = b0
    chis[n, 1] = b1
    for k in range(n - 1, -1, -1):
        b0, b1 = su2_step_dagger(phis[k], t_step, b0, b1)
        chis[k, 0] = b0
        chis[k, 1] = b1
    ov = (psif[0].conjugate() * psis[n, 0] + psif[1].conjugate() * psis[n, 1])
    return (ov * ov.conjugate()).real


@maybe_njit
def grape_fidelity(phis, t_step, psi0, psif):
    """Fidelity |<psif|psi_N>|^2 without recording intermediate states."""
    n = phis.shape[0]
    a0, a1 = psi0[0], psi0[1]
    for k in range(n):
        a0, a1 = su2_step(phis[k], t_step, a0, a1)
    ov = psif[0].conjugate() * a0 + psif[1].conjugate() * a1
    return (ov * ov.conjugate()).real


@maybe_njit
def _sigma_dot(wx, wy, wz, a0, a1):
    """Apply sigma . w to the spinor (a0, a1)."""
    return (wz * a0 + complex(wx, -wy) * a1,
            complex(wx, wy) * a0 - wz * a1)


@maybe_njit
def grape_gradient_pmp(phis, t_step, psis, chis, grad):
    """Exact gradient from the closed-form interval moment integrals.

    dJ/dphi_k = -sin(phi_k) I_x + cos(phi_k) I_y with
    I_a = Im[<psi_N|psi_f> <chi_k| sigma . w_a |psi_k>] and w_a the rows of
    the integrated interval rotation matrix.
    """
    n = phis.shape[0]
    # overlap c = <psi_N|psi_f> stored implicitly: chis[n] is psi_f
    ov = (psis[n, 0].conjugate() * chis[n, 0]
          + psis[n, 1].conjugate() * chis[n, 1])
    s = math.sin(t_step)
    cm = 1.0 - math.cos(t_step)
    for k in range(n):
        sp = math.sin(phis[k])
        cp = math.cos(phis[k])
        wxx = sp * sp * s + cp * cp * t_step
        wxy = (t_step - s) * sp * cp
        wxz = cm * sp
        wyx = wxy
        wyy = sp * sp * t_step + s * cp * cp
        wyz = -cm * cp
        m0, m1 = _sigma_dot(wxx, wxy, wxz, psis[k, 0], psis[k, 1])
        ix = (ov * (chis[k, 0].conjugate() * m0 + chis[k, 1].conjugate() * m1)).imag
        m0, m1 = _sigma_dot(wyx, wyy, wyz, psis[k, 0], psis[k, 1])
        iy = (ov * (chis[k, 0].conjugate() * m0 + chis[k, 1].conjugate() * m1)).imag
        grad[k] = -sp * ix + cp * iy


@maybe_njit
def grape_gradient_split(phis, t_step, psis, chis, grad):
    """First-order gradient: dU_k approximated by -i T (dH/dphi) U_k."""
    n = phis.shape[0]
    ov = (psis[n, 0].conjugate() * chis[n, 0]
          + psis[n, 1].conjugate() * chis[n, 1])
    for k in range(n):
        sp = math.sin(phis[k])
        cp = math.cos(phis[k])
        m0, m1 = _sigma_dot(-sp, cp, 0.0, psis[k + 1, 0], psis[k + 1, 1])
        val = (ov * (chis[k + 1, 0].conjugate() * m0
                     + chis[k + 1, 1].conjugate() * m1)).imag
        grad[k] = t_step * val


@maybe_njit
def ascent_pmp(phis, t_step, psi0, psif, grad_tol, max_iter,
               armijo_c, psis, chis, grad, trial):
    """In-place gradient ascent with Armijo backtracking, exact gradient.

    Returns (status, J, grad_norm, iterations); status 0 = gradient below
    tolerance, 1 = iteration budget exhausted, 2 = line search stalled.
    """
    n = phis.shape[0]
    j_cur = grape_states(phis, t_step, psi0, psif, psis, chis)
    for it in range(max_iter):
        grape_gradient_pmp(phis, t_step, psis, chis, grad)
        gsq = 0.0
        for k in range(n):
            gsq += grad[k] * grad[k]
        gnorm = math.sqrt(gsq)
        if gnorm < grad_tol:
            return 0, j_cur, gnorm, it
        alpha = 1.0
        accepted = False
        for _ in range(60):
            for k in range(n):
                trial[k] = phis[k] + alpha * grad[k]
            j_new = grape_fidelity(trial, t_step, psi0, psif)
            if j_new >= j_cur + armijo_c * alpha * gsq:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            return 2, j_cur, gnorm, it
        for k in range(n):
            phis[k] = trial[k]
        j_cur = grape_states(phis, t_step, psi0, psif, psis, chis)
    grape_gradient_pmp(phis, t_step, psis, chis, grad)
    gsq = 0.0
    for k in range(n):
        gsq += grad[k] * grad[k]
    return 1, j_cur, math.sqrt(gsq), max_iter
