"""Compiled inner loops.

Everything here is scalar-indexed numba code: the batch integrators step
blocks of trajectories in a cache-resident layout so the hot loops
auto-vectorize, and the rigid-body substepper advances the contact physics
between control ticks.  The public modules wrap these with validated,
documented APIs; tests pin the kernels against the plain-numpy reference
implementations.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# trajectories per cache block in the batch integrators; 64 keeps a block's
# state (64 x 9 doubles) inside L1 while still giving the vectorizer room
_BLOCK = 64


@njit(cache=True)
def error_batch_lyapunov(
    Z, a1, a2, gm, g0, dt, nsteps, floor2, viol, max_margin, v_final, norm2_final
):
    """Integrate the autonomous error ODE for N trajectories with certificates.

    Z is (9, N): rows 0-2 velocity error, 3-5 free-tilt error, 6-8 the unit
    direction u = e_z - tilt_error.  Per step and per trajectory this checks
    that the quadratic certificate V never increases (while the error norm
    is above the floor) and that its analytic derivative stays below the
    closed-form bound.  viol counts V increases; max_margin records the
    worst (vdot - bound).
    """
    n = Z.shape[1]
    c1 = a2 / (8.0 * a1 * g0)
    c2 = 1.0 / (8.0 * a1 * g0)
    c3 = a1 * g0 / (4.0 * a2)
    c4 = 1.0 / (2.0 * gm)
    q1 = a1 * a1 / (4.0 * g0)
    q2 = g0 / 4.0
    k = a2 / g0
    vprev = np.empty(_BLOCK)
    for b0 in range(0, n, _BLOCK):
        b1 = min(b0 + _BLOCK, n)
        for step in range(nsteps + 1):
            for j in range(b0, b1):
                z1x = Z[0, j]
                z1y = Z[1, j]
                z1z = Z[2, j]
                px = Z[3, j]
                py = Z[4, j]
                pz = Z[5, j]
                ux = Z[6, j]
                uy = Z[7, j]
                uz = Z[8, j]
                z2x = -ux
                z2y = -uy
                z2z = 1.0 - uz
                wx = z2x - px
                wy = z2y - py
                wz = z2z - pz
                udw = ux * wx + uy * wy + uz * wz
                sx = ux * udw - wx
                sy = uy * udw - wy
                sz = uz * udw - wz
                n1 = z1x * z1x + z1y * z1y + z1z * z1z
                npp = px * px + py * py + pz * pz
                nz2 = z2x * z2x + z2y * z2y + z2z * z2z
                nw = z2x * z2x + z2y * z2y
                hx = a1 * z1x + g0 * px
                hy = a1 * z1y + g0 * py
                hz = a1 * z1z + g0 * pz
                vcur = c1 * n1 + c2 * (hx * hx + hy * hy + hz * hz) + c3 * npp + c4 * nz2
                if step > 0 and n1 + npp + nz2 > floor2 and vcur > vprev[j - b0]:
                    viol[j] += 1
                vprev[j - b0] = vcur
                t3 = z2x * sx + z2y * sy + z2z * sz
                vdot = -q1 * n1 - q2 * npp + t3
                bound = -(q1 * n1 + q2 * npp + nw - np.sqrt(npp * nw))
                margin = vdot - bound
                if margin > max_margin[j]:
                    max_margin[j] = margin
                if step < nsteps:
                    Z[0, j] = z1x + dt * (-a1 * z1x - g0 * px)
                    Z[1, j] = z1y + dt * (-a1 * z1y - g0 * py)
                    Z[2, j] = z1z + dt * (-a1 * z1z - g0 * pz)
                    Z[3, j] = px + dt * k * z1x
                    Z[4, j] = py + dt * k * z1y
                    Z[5, j] = pz + dt * k * z1z
                    nux = ux - dt * gm * sx
                    nuy = uy - dt * gm * sy
                    nuz = uz - dt * gm * sz
                    inv = 1.0 / np.sqrt(nux * nux + nuy * nuy + nuz * nuz)
                    Z[6, j] = nux * inv
                    Z[7, j] = nuy * inv
                    Z[8, j] = nuz * inv
                else:
                    v_final[j] = vcur
                    norm2_final[j] = n1 + npp + nz2


@njit(cache=True)
def error_batch_converge(Z, a1, a2, gm, g0, dt, nsteps, thresh2, first_pass, norm2_final):
    """Integrate N error trajectories, recording the first step whose total
    error norm drops below the threshold (-1 when it never does)."""
    n = Z.shape[1]
    k = a2 / g0
    for b0 in range(0, n, _BLOCK):
        b1 = min(b0 + _BLOCK, n)
        for step in range(nsteps + 1):
            for j in range(b0, b1):
                z1x = Z[0, j]
                z1y = Z[1, j]
                z1z = Z[2, j]
                px = Z[3, j]
                py = Z[4, j]
                pz = Z[5, j]
                ux = Z[6, j]
                uy = Z[7, j]
                uz = Z[8, j]
                z2x = -ux
                z2y = -uy
                z2z = 1.0 - uz
                norm2 = (
                    z1x * z1x + z1y * z1y + z1z * z1z
                    + px * px + py * py + pz * pz
                    + z2x * z2x + z2y * z2y + z2z * z2z
                )
                if norm2 < thresh2 and first_pass[j] < 0:
                    first_pass[j] = step
                if step < nsteps:
                    wx = z2x - px
                    wy = z2y - py
                    wz = z2z - pz
                    udw = ux * wx + uy * wy + uz * wz
                    sx = ux * udw - wx
                    sy = uy * udw - wy
                    sz = uz * udw - wz
                    Z[0, j] = z1x + dt * (-a1 * z1x - g0 * px)
                    Z[1, j] = z1y + dt * (-a1 * z1y - g0 * py)
                    Z[2, j] = z1z + dt * (-a1 * z1z - g0 * pz)
                    Z[3, j] = px + dt * k * z1x
                    Z[4, j] = py + dt * k * z1y
                    Z[5, j] = pz + dt * k * z1z
                    nux = ux - dt * gm * sx
                    nuy = uy - dt * gm * sy
                    nuz = uz - dt * gm * sz
                    inv = 1.0 / np.sqrt(nux * nux + nuy * nuy + nuz * nuz)
                    Z[6, j] = nux * inv
                    Z[7, j] = nuy * inv
                    Z[8, j] = nuz * inv
                else:
                    norm2_final[j] = norm2


@njit(cache=True)
def error_single_trajectory(z, a1, a2, gm, g0, dt, stride, norms_out, states_out):
    """Integrate one error trajectory, saving the state every `stride` steps.

    z is the length-9 state (modified in place); norms_out has one slot per
    saved sample, states_out is (nsave, 9).  Total steps = (nsave-1)*stride.
    """
    k = a2 / g0
    nsave = norms_out.shape[0]
    for rec in range(nsave):
        z2x = -z[6]
        z2y = -z[7]
        z2z = 1.0 - z[8]
        norm2 = (
            z[0] * z[0] + z[1] * z[1] + z[2] * z[2]
            + z[3] * z[3] + z[4] * z[4] + z[5] * z[5]
            + z2x * z2x + z2y * z2y + z2z * z2z
        )
        norms_out[rec] = np.sqrt(norm2)
        for c in range(6):
            states_out[rec, c] = z[c]
        states_out[rec, 6] = z2x
        states_out[rec, 7] = z2y
        states_out[rec, 8] = z2z
        if rec == nsave - 1:
            break
        for _ in range(stride):
            z1x = z[0]
            z1y = z[1]
            z1z = z[2]
            px = z[3]
            py = z[4]
            pz = z[5]
            ux = z[6]
            uy = z[7]
            uz = z[8]
            wx = -ux - px
            wy = -uy - py
            wz = 1.0 - uz - pz
            udw = ux * wx + uy * wy + uz * wz
            sx = ux * udw - wx
            sy = uy * udw - wy
            sz = uz * udw - wz
            z[0] = z1x + dt * (-a1 * z1x - g0 * px)
            z[1] = z1y + dt * (-a1 * z1y - g0 * py)
            z[2] = z1z + dt * (-a1 * z1z - g0 * pz)
            z[3] = px + dt * k * z1x
            z[4] = py + dt * k * z1y
            z[5] = pz + dt * k * z1z
            nux = ux - dt * gm * sx
            nuy = uy - dt * gm * sy
            nuz = uz - dt * gm * sz
            inv = 1.0 / np.sqrt(nux * nux + nuy * nuy + nuz * nuz)
            z[6] = nux * inv
            z[7] = nuy * inv
            z[8] = nuz * inv


@njit(cache=True)
def observer_replay(gyro, accel, velm, a1, a2, gm, g0, dt, state, full, out):
    """Run the observer over a measurement stream of T samples.

    state is the length-9 packed state [velocity, tilt_free, tilt], updated
    in place; out is (T, 9) and receives the post-step state per sample.
    With full=False only the velocity/tilt_free stage advances.
    """
    kq = a2 / g0
    for t in range(gyro.shape[0]):
        gx = gyro[t, 0]
        gy = gyro[t, 1]
        gz = gyro[t, 2]
        vx = state[0]
        vy = state[1]
        vz = state[2]
        px = state[3]
        py = state[4]
        pz = state[5]
        ex = velm[t, 0] - vx
        ey = velm[t, 1] - vy
        ez = velm[t, 2] - vz
        # d(velocity) = -S(g) v - g0 p + a + a1 e
        dvx = -(gy * vz - gz * vy) - g0 * px + accel[t, 0] + a1 * ex
        dvy = -(gz * vx - gx * vz) - g0 * py + accel[t, 1] + a1 * ey
        dvz = -(gx * vy - gy * vx) - g0 * pz + accel[t, 2] + a1 * ez
        dpx = -(gy * pz - gz * py) - kq * ex
        dpy = -(gz * px - gx * pz) - kq * ey
        dpz = -(gx * py - gy * px) - kq * ez
        if full:
            ux = state[6]
            uy = state[7]
            uz = state[8]
            # c = g - gamma S(u) p ; du = -S(c) u
            cx = gx - gm * (uy * pz - uz * py)
            cy = gy - gm * (uz * px - ux * pz)
            cz = gz - gm * (ux * py - uy * px)
            dux = -(cy * uz - cz * uy)
            duy = -(cz * ux - cx * uz)
            duz = -(cx * uy - cy * ux)
            nux = ux + dt * dux
            nuy = uy + dt * duy
            nuz = uz + dt * duz
            inv = 1.0 / np.sqrt(nux * nux + nuy * nuy + nuz * nuz)
            state[6] = nux * inv
            state[7] = nuy * inv
            state[8] = nuz * inv
        state[0] = vx + dt * dvx
        state[1] = vy + dt * dvy
        state[2] = vz + dt * dvz
        state[3] = px + dt * dpx
        state[4] = py + dt * dpy
        state[5] = pz + dt * dpz
        for c in range(9):
            out[t, c] = state[c]


@njit(cache=True)
def _contact_pass(p, R, v, om, pts, anchors, active, kn, cn, kt, ct, grab, forces, corners):
    """Contact forces at the current state; fills forces/corners per point.

    With grab=True a newly penetrating point records its tangential anchor.
    Returns the force and world-torque totals (about the center of mass).
    """
    fx_tot = 0.0
    fy_tot = 0.0
    fz_tot = 0.0
    tx = 0.0
    ty = 0.0
    tz = 0.0
    m = pts.shape[0]
    for i in range(m):
        bx = pts[i, 0]
        by = pts[i, 1]
        bz = pts[i, 2]
        # world position and velocity of the point
        cx = p[0] + R[0, 0] * bx + R[0, 1] * by + R[0, 2] * bz
        cy = p[1] + R[1, 0] * bx + R[1, 1] * by + R[1, 2] * bz
        cz = p[2] + R[2, 0] * bx + R[2, 1] * by + R[2, 2] * bz
        wx = om[1] * bz - om[2] * by
        wy = om[2] * bx - om[0] * bz
        wz = om[0] * by - om[1] * bx
        vcx = v[0] + R[0, 0] * wx + R[0, 1] * wy + R[0, 2] * wz
        vcy = v[1] + R[1, 0] * wx + R[1, 1] * wy + R[1, 2] * wz
        vcz = v[2] + R[2, 0] * wx + R[2, 1] * wy + R[2, 2] * wz
        corners[i, 0] = cx
        corners[i, 1] = cy
        corners[i, 2] = cz
        if cz < 0.0:
            pen = -cz
            damp = -vcz if vcz < 0.0 else 0.0
            fz = kn * pen + cn * damp
            if active[i] == 0:
                if grab:
                    anchors[i, 0] = cx
                    anchors[i, 1] = cy
                    active[i] = 1
                ftx = -ct * vcx
                fty = -ct * vcy
            else:
                ftx = -kt * (cx - anchors[i, 0]) - ct * vcx
                fty = -kt * (cy - anchors[i, 1]) - ct * vcy
            forces[i, 0] = ftx
            forces[i, 1] = fty
            forces[i, 2] = fz
            fx_tot += ftx
            fy_tot += fty
            fz_tot += fz
            rx = cx - p[0]
            ry = cy - p[1]
            rz = cz - p[2]
            tx += ry * fz - rz * fty
            ty += rz * ftx - rx * fz
            tz += rx * fty - ry * ftx
        else:
            forces[i, 0] = 0.0
            forces[i, 1] = 0.0
            forces[i, 2] = 0.0
            if grab:
                active[i] = 0
    return fx_tot, fy_tot, fz_tot, tx, ty, tz


@njit(cache=True)
def rigid_substeps(
    p, R, v, om, pts, anchors, active,
    mass, inertia, kn, cn, kt, ct, g0,
    push_f, push_pt, dt, nsub,
    forces, corners, accel_out,
):
    """Advance the rigid body nsub semi-implicit Euler substeps of size dt.

    State arrays (p, R, v, om, anchors, active) are updated in place.  After
    the last substep the contact forces are re-evaluated at the final state
    and left in forces/corners, and accel_out receives the world linear
    acceleration of the center of mass (gravity included) followed by the
    body angular acceleration.  Returns 0, or 1 when the state went
    non-finite (divergence).
    """
    invm = 1.0 / mass
    for _ in range(nsub):
        fx, fy, fz, tx, ty, tz = _contact_pass(
            p, R, v, om, pts, anchors, active, kn, cn, kt, ct, True, forces, corners
        )
        # external push: world force at a body-frame point
        ax_ = push_pt[0]
        ay_ = push_pt[1]
        az_ = push_pt[2]
        rx = R[0, 0] * ax_ + R[0, 1] * ay_ + R[0, 2] * az_
        ry = R[1, 0] * ax_ + R[1, 1] * ay_ + R[1, 2] * az_
        rz = R[2, 0] * ax_ + R[2, 1] * ay_ + R[2, 2] * az_
        fx += push_f[0]
        fy += push_f[1]
        fz += push_f[2]
        tx += ry * push_f[2] - rz * push_f[1]
        ty += rz * push_f[0] - rx * push_f[2]
        tz += rx * push_f[1] - ry * push_f[0]
        # body-frame torque and Euler's equation with a diagonal inertia
        tbx = R[0, 0] * tx + R[1, 0] * ty + R[2, 0] * tz
        tby = R[0, 1] * tx + R[1, 1] * ty + R[2, 1] * tz
        tbz = R[0, 2] * tx + R[1, 2] * ty + R[2, 2] * tz
        hx = inertia[0] * om[0]
        hy = inertia[1] * om[1]
        hz = inertia[2] * om[2]
        domx = (tbx - (om[1] * hz - om[2] * hy)) / inertia[0]
        domy = (tby - (om[2] * hx - om[0] * hz)) / inertia[1]
        domz = (tbz - (om[0] * hy - om[1] * hx)) / inertia[2]
        v[0] += dt * fx * invm
        v[1] += dt * fy * invm
        v[2] += dt * (fz * invm - g0)
        om[0] += dt * domx
        om[1] += dt * domy
        om[2] += dt * domz
        p[0] += dt * v[0]
        p[1] += dt * v[1]
        p[2] += dt * v[2]
        # R <- R Exp(S(om dt)), closed form
        phx = om[0] * dt
        phy = om[1] * dt
        phz = om[2] * dt
        ang2 = phx * phx + phy * phy + phz * phz
        ang = np.sqrt(ang2)
        if ang < 1e-8:
            sa = 1.0 - ang2 / 6.0
            sb = 0.5 - ang2 / 24.0
        else:
            sa = np.sin(ang) / ang
            sb = (1.0 - np.cos(ang)) / ang2
        e00 = 1.0 + sb * (-phz * phz - phy * phy)
        e01 = -sa * phz + sb * phx * phy
        e02 = sa * phy + sb * phx * phz
        e10 = sa * phz + sb * phx * phy
        e11 = 1.0 + sb * (-phz * phz - phx * phx)
        e12 = -sa * phx + sb * phy * phz
        e20 = -sa * phy + sb * phx * phz
        e21 = sa * phx + sb * phy * phz
        e22 = 1.0 + sb * (-phy * phy - phx * phx)
        for r in range(3):
            r0 = R[r, 0]
            r1 = R[r, 1]
            r2 = R[r, 2]
            R[r, 0] = r0 * e00 + r1 * e10 + r2 * e20
            R[r, 1] = r0 * e01 + r1 * e11 + r2 * e21
            R[r, 2] = r0 * e02 + r1 * e12 + r2 * e22
    if not (
        np.isfinite(p[0]) and np.isfinite(p[1]) and np.isfinite(p[2])
        and np.isfinite(v[0]) and np.isfinite(v[1]) and np.isfinite(v[2])
        and np.isfinite(om[0]) and np.isfinite(om[1]) and np.isfinite(om[2])
    ):
        return 1
    # forces and accelerations at the final state, for measurement models
    fx, fy, fz, tx, ty, tz = _contact_pass(
        p, R, v, om, pts, anchors, active, kn, cn, kt, ct, False, forces, corners
    )
    rx = R[0, 0] * push_pt[0] + R[0, 1] * push_pt[1] + R[0, 2] * push_pt[2]
    ry = R[1, 0] * push_pt[0] + R[1, 1] * push_pt[1] + R[1, 2] * push_pt[2]
    rz = R[2, 0] * push_pt[0] + R[2, 1] * push_pt[1] + R[2, 2] * push_pt[2]
    fx += push_f[0]
    fy += push_f[1]
    fz += push_f[2]
    tx += ry * push_f[2] - rz * push_f[1]
    ty += rz * push_f[0] - rx * push_f[2]
    tz += rx * push_f[1] - ry * push_f[0]
    tbx = R[0, 0] * tx + R[1, 0] * ty + R[2, 0] * tz
    tby = R[0, 1] * tx + R[1, 1] * ty + R[2, 1] * tz
    tbz = R[0, 2] * tx + R[1, 2] * ty + R[2, 2] * tz
    hx = inertia[0] * om[0]
    hy = inertia[1] * om[1]
    hz = inertia[2] * om[2]
    accel_out[0] = fx * invm
    accel_out[1] = fy * invm
    accel_out[2] = fz * invm - g0
    accel_out[3] = (tbx - (om[1] * hz - om[2] * hy)) / inertia[0]
    accel_out[4] = (tby - (om[2] * hx - om[0] * hz)) / inertia[1]
    accel_out[5] = (tbz - (om[0] * hy - om[1] * hx)) / inertia[2]
    return 0
