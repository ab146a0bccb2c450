"""Potential-energy model of the plant: kinematics, contacts, friction.

The configuration vector q stacks, in order: each finger's joint angles,
the object pose (x, y, theta) when an object is present, then the enabled
carrier axes. Total potential energy is the sum of

  * torsional joint springs with actuation-shifted rest angles,
  * carrier springs pulling the hand base to its commanded rest position,
  * gravity and an optional external wrench acting on the object,
  * quadratic penalty terms for every penetrating contact,
  * tangential stick springs attached to friction anchors.

Friction anchors are updated OUTSIDE the inner minimization (Coulomb return
mapping), so within one solve the energy is smooth and a Gauss-Newton
Hessian of the penalty terms is positive semidefinite by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import PlantConfig


def perp(v: np.ndarray) -> np.ndarray:
    """90 degree counterclockwise rotation."""
    return np.array([-v[1], v[0]])


def cross_z(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def shape_fn(a, curve: float):
    """Monotone actuation-to-rest-offset curve on [0, 1], fixed endpoints."""
    a = np.asarray(a, dtype=np.float64)
    return (a + curve * a * a) / (1.0 + curve)


@dataclass(frozen=True)
class FrictionAnchor:
    """Stick spring attachment for one contact pair.

    `local_point` is in the obstacle frame: object-local coordinates for
    object contacts, world coordinates for wall contacts. `normal` is the
    frozen contact normal (world frame, pointing from obstacle to node).
    """

    local_point: np.ndarray
    normal: np.ndarray

    def tangent(self) -> np.ndarray:
        return perp(self.normal)


@dataclass
class ContactRecord:
    """Diagnostic record of one active contact at equilibrium."""

    node_key: tuple
    obstacle: str
    point: np.ndarray
    normal: np.ndarray
    depth: float
    normal_force: float
    tangent_force: float
    force_on_obstacle: np.ndarray
    feature: str = ""


@dataclass
class Wrench:
    fx: float = 0.0
    fy: float = 0.0
    torque: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.fx, self.fy, self.torque])


class DofMap:
    def __init__(self, config: PlantConfig):
        self.finger_slices: dict[str, slice] = {}
        off = 0
        for f in config.fingers:
            self.finger_slices[f.name] = slice(off, off + f.n_joints)
            off += f.n_joints
        self.object_slice = None
        if config.object is not None:
            self.object_slice = slice(off, off + 3)
            off += 3
        self.carrier_slice = None
        self.carrier_axes: tuple[int, ...] = ()
        if config.carrier.enabled:
            axes = tuple(0 if a == "x" else 1 for a in config.carrier.axes)
            self.carrier_axes = axes
            self.carrier_slice = slice(off, off + len(axes))
            off += len(axes)
        self.n = off


class _FingerArrays:
    """Per-finger static arrays derived from the spec."""

    def __init__(self, spec, contact_spec, chan_offset: int):
        self.name = spec.name
        self.base = np.array(spec.base, dtype=np.float64)
        self.base_angle = math.radians(spec.base_angle_deg)
        self.curve = spec.actuation_curve
        lengths, stiff, rest0, gain, chan = [], [], [], [], []
        c = chan_offset
        for sj in spec.scaffold:
            lengths.append(sj.length)
            stiff.append(sj.stiffness)
            rest0.append(sj.rest_angle)
            gain.append(sj.gain)
            chan.append(c)
            c += 1
        for comp in spec.compartments:
            for _ in range(comp.segments):
                lengths.append(comp.segment_length)
                stiff.append(comp.stiffness)
                rest0.append(comp.rest_angle)
                gain.append(comp.joint_gain)
                chan.append(c)
            c += 1
        self.n_channels = c - chan_offset
        self.L = np.array(lengths)
        self.k = np.array(stiff)
        self.rest0 = np.array(rest0)
        self.gain = np.array(gain)
        self.chan = np.array(chan, dtype=np.intp)
        nj = len(lengths)
        fracs = {1: (1.0,), 2: (0.5, 1.0), 3: (1.0 / 3.0, 2.0 / 3.0, 1.0)}[
            max(1, min(3, contact_spec.samples_per_segment))
        ]
        self.node_seg = np.repeat(np.arange(nj), len(fracs))
        self.node_frac = np.tile(np.array(fracs), nj)

    def rest_angles(self, act: np.ndarray) -> np.ndarray:
        return self.rest0 + self.gain * shape_fn(act[self.chan], self.curve)


@dataclass
class FKResult:
    carrier_offset: np.ndarray
    psi: list[np.ndarray]          # absolute segment angles per finger
    joint_pts: list[np.ndarray]    # (J+1, 2) per finger; row j is joint j, last is tip
    node_pts: list[np.ndarray]     # (N_f, 2) per finger
    object_pose: np.ndarray | None
    corners: np.ndarray | None     # square: (4, 2) rounded-corner centers


class EnergyModel:
    def __init__(self, config: PlantConfig):
        config.validate()
        self.config = config
        self.dof = DofMap(config)
        self.fingers = []
        off = 0
        for f in config.fingers:
            fa = _FingerArrays(f, config.contact, off)
            off += fa.n_channels
            self.fingers.append(fa)
        self.n_finger_channels = off
        self.act_labels = config.actuation_labels()
        self.n_channels = len(self.act_labels)
        obj = config.object
        self.obj = obj
        if obj is not None and obj.shape == "square":
            hc = obj.size - obj.corner_radius
            self.core_corners = np.array(
                [[hc, hc], [-hc, hc], [-hc, -hc], [hc, -hc]]
            )
        else:
            self.core_corners = None
        self.walls = [
            (np.array(w.normal) / np.linalg.norm(w.normal), w.offset,
             config.contact.mu if w.mu is None else w.mu)
            for w in config.walls
        ]
        self.gvec = config.gravity_vector()

    # -- kinematics -----------------------------------------------------------

    def fk(self, q: np.ndarray) -> FKResult:
        carrier_offset = np.zeros(2)
        if self.dof.carrier_slice is not None:
            for i, ax in enumerate(self.dof.carrier_axes):
                carrier_offset[ax] = q[self.dof.carrier_slice][i]
        psi_all, joints_all, nodes_all = [], [], []
        for fa, name in zip(self.fingers, self.dof.finger_slices):
            th = q[self.dof.finger_slices[name]]
            psi = fa.base_angle + np.cumsum(th)
            seg = fa.L[:, None] * np.stack([np.cos(psi), np.sin(psi)], axis=1)
            pts = np.empty((len(th) + 1, 2))
            pts[0] = fa.base + carrier_offset
            np.cumsum(seg, axis=0, out=pts[1:])
            pts[1:] += pts[0]
            nodes = pts[fa.node_seg] + fa.node_frac[:, None] * seg[fa.node_seg]
            psi_all.append(psi)
            joints_all.append(pts)
            nodes_all.append(nodes)
        pose = None
        corners = None
        if self.dof.object_slice is not None:
            pose = q[self.dof.object_slice]
            if self.core_corners is not None:
                corners = pose[:2] + self.core_corners @ rot(pose[2]).T
        return FKResult(carrier_offset, psi_all, joints_all, nodes_all, pose, corners)

    # -- signed distance to the object ---------------------------------------

    def object_sdf(self, pose: np.ndarray, pts: np.ndarray):
        """Signed distance and world-frame outward gradient at points pts."""
        rel = pts - pose[:2]
        if self.obj.shape == "circle":
            dist = np.linalg.norm(rel, axis=1)
            safe = np.maximum(dist, 1e-12)
            g = rel / safe[:, None]
            return dist - self.obj.size, g
        R = rot(pose[2])
        loc = rel @ R  # R(-theta) @ rel
        hc = self.obj.size - self.obj.corner_radius
        sgn = np.where(loc >= 0.0, 1.0, -1.0)
        qd = np.abs(loc) - hc
        qpos = np.maximum(qd, 0.0)
        outside = np.sqrt((qpos ** 2).sum(axis=1))
        inside = np.minimum(np.maximum(qd[:, 0], qd[:, 1]), 0.0)
        sd = outside + inside - self.obj.corner_radius
        g_loc = np.zeros_like(pts)
        out_mask = outside > 0.0
        g_loc[out_mask] = sgn[out_mask] * qpos[out_mask] / outside[out_mask, None]
        in_mask = ~out_mask
        if in_mask.any():
            axis = (qd[in_mask, 1] > qd[in_mask, 0]).astype(np.intp)
            rows = np.nonzero(in_mask)[0]
            g_loc[rows, axis] = sgn[rows, axis]
        return sd, g_loc @ R.T

    def object_feature(self, pose: np.ndarray, pt: np.ndarray) -> str:
        if self.obj.shape == "circle":
            return "rim"
        loc = (pt - pose[:2]) @ rot(pose[2])
        hc = self.obj.size - self.obj.corner_radius
        qd = np.abs(loc) - hc
        return "corner" if (qd > 0).all() else "face"

    # -- contact candidate enumeration ---------------------------------------

    def _node_contacts(self, fk: FKResult):
        """Active contacts of finger nodes against object and walls.

        Yields (node_key, obstacle_key, depth, normal, node_point, finger_idx).
        """
        r = self.config.contact.node_radius
        out = []
        for fi, nodes in enumerate(fk.node_pts):
            if fk.object_pose is not None:
                sd, g = self.object_sdf(fk.object_pose, nodes)
                depth = r - sd
                for ni in np.nonzero(depth > 0.0)[0]:
                    out.append((("n", fi, int(ni)), "object", float(depth[ni]),
                                g[ni], nodes[ni], fi))
            for wi, (n_w, c_w, _mu) in enumerate(self.walls):
                depth = c_w + r - nodes @ n_w
                for ni in np.nonzero(depth > 0.0)[0]:
                    out.append((("n", fi, int(ni)), f"wall{wi}", float(depth[ni]),
                                n_w, nodes[ni], fi))
        return out

    def _object_wall_contacts(self, fk: FKResult):
        """Active contacts of the object against walls."""
        out = []
        if fk.object_pose is None:
            return out
        if self.obj.shape == "circle":
            pts = fk.object_pose[None, :2]
            rad = self.obj.size
        else:
            pts = fk.corners
            rad = self.obj.corner_radius
        for wi, (n_w, c_w, _mu) in enumerate(self.walls):
            depth = c_w + rad - pts @ n_w
            for pi in np.nonzero(depth > 0.0)[0]:
                out.append((("o", int(pi)), f"wall{wi}", float(depth[pi]),
                            n_w, pts[pi]))
        return out

    # -- gradient rows for scalar contact quantities --------------------------

    def _node_row(self, fk: FKResult, fi: int, ni: int, direction: np.ndarray,
                  row: np.ndarray) -> None:
        """Accumulate d(direction . p_node)/dq into row for a finger node."""
        fa = self.fingers[fi]
        name = fa.name
        seg = int(fa.node_seg[ni])
        joints = fk.joint_pts[fi][: seg + 1]
        arms = fk.node_pts[fi][ni] - joints
        # d p/d theta_j = perp(p - joint_j); direction . perp(a) = cross_z(a, dir)
        sl = self.dof.finger_slices[name]
        row[sl.start: sl.start + seg + 1] += cross_z(arms, direction)
        if self.dof.carrier_slice is not None:
            for i, ax in enumerate(self.dof.carrier_axes):
                row[self.dof.carrier_slice.start + i] += direction[ax]

    def _object_point_row(self, fk: FKResult, pt: np.ndarray,
                          direction: np.ndarray, row: np.ndarray) -> None:
        """Accumulate d(direction . p)/dq for a point rigidly on the object."""
        sl = self.dof.object_slice
        row[sl.start] += direction[0]
        row[sl.start + 1] += direction[1]
        row[sl.start + 2] += float(cross_z(pt - fk.object_pose[:2], direction))

    # -- energy / gradient / Gauss-Newton Hessian -----------------------------

    def energy(self, q: np.ndarray, act: np.ndarray,
               wrench: np.ndarray | None, anchors: dict) -> float:
        return self._assemble(q, act, wrench, anchors, order=0)[0]

    def energy_grad(self, q, act, wrench, anchors):
        e, g, _ = self._assemble(q, act, wrench, anchors, order=1)
        return e, g

    def energy_grad_hess(self, q, act, wrench, anchors):
        return self._assemble(q, act, wrench, anchors, order=2)

    def _assemble(self, q, act, wrench, anchors, order: int):
        n = self.dof.n
        E = 0.0
        g = np.zeros(n) if order >= 1 else None
        H = np.zeros((n, n)) if order >= 2 else None
        fk = self.fk(q)

        # joint springs
        for fa, name in zip(self.fingers, self.dof.finger_slices):
            sl = self.dof.finger_slices[name]
            dev = q[sl] - fa.rest_angles(act)
            E += 0.5 * float(fa.k @ dev ** 2)
            if order >= 1:
                g[sl] += fa.k * dev
            if order >= 2:
                idx = np.arange(sl.start, sl.stop)
                H[idx, idx] += fa.k

        # carrier springs
        if self.dof.carrier_slice is not None:
            car = self.config.carrier
            chan0 = self.n_finger_channels
            for i, ax in enumerate(self.dof.carrier_axes):
                rest = car.rest[ax] + car.gain * act[chan0 + i]
                e_i = q[self.dof.carrier_slice][i] - rest
                E += 0.5 * car.stiffness * e_i ** 2
                if order >= 1:
                    g[self.dof.carrier_slice.start + i] += car.stiffness * e_i
                if order >= 2:
                    j = self.dof.carrier_slice.start + i
                    H[j, j] += car.stiffness

        # gravity and external wrench on the object
        if fk.object_pose is not None:
            E -= self.obj.mass * float(self.gvec @ fk.object_pose[:2])
            if order >= 1:
                sl = self.dof.object_slice
                g[sl.start: sl.start + 2] -= self.obj.mass * self.gvec
            if wrench is not None:
                E -= float(wrench @ fk.object_pose)
                if order >= 1:
                    g[self.dof.object_slice] -= wrench

        kn = self.config.contact.normal_stiffness
        kt = self.config.contact.tangent_stiffness

        # normal penalties: finger nodes
        for key, obs, depth, normal, pt, fi in self._node_contacts(fk):
            E += 0.5 * kn * depth * depth
            if order >= 1:
                row = np.zeros(n)
                # depth = r - sd  (object) or c + r - n.p (wall); both give
                # d(depth)/dq = -(normal . dp/dq) + object terms
                self._node_row(fk, fi, key[2], -normal, row)
                if obs == "object":
                    # object motion changes sd through the relative position
                    self._object_point_row(fk, pt, normal, row)
                g += kn * depth * row
                if order >= 2:
                    H += kn * np.outer(row, row)

        # normal penalties: object corners on walls
        for key, obs, depth, normal, pt in self._object_wall_contacts(fk):
            E += 0.5 * kn * depth * depth
            if order >= 1:
                row = np.zeros(n)
                self._object_point_row(fk, pt, -normal, row)
                g += kn * depth * row
                if order >= 2:
                    H += kn * np.outer(row, row)

        # friction stick springs
        for (node_key, obs_key), anchor in anchors.items():
            t_hat = anchor.tangent()
            if node_key[0] == "n":
                _, fi, ni = node_key
                p = fk.node_pts[fi][ni]
                if obs_key == "object":
                    if fk.object_pose is None:
                        continue
                    a_world = fk.object_pose[:2] + rot(fk.object_pose[2]) @ anchor.local_point
                else:
                    a_world = anchor.local_point
                u = float((p - a_world) @ t_hat)
                E += 0.5 * kt * u * u
                if order >= 1:
                    row = np.zeros(n)
                    self._node_row(fk, fi, ni, t_hat, row)
                    if obs_key == "object":
                        self._object_point_row(fk, a_world, -t_hat, row)
                    g += kt * u * row
                    if order >= 2:
                        H += kt * np.outer(row, row)
            else:
                # object corner stuck on a wall
                if fk.object_pose is None:
                    continue
                pi = node_key[1]
                p = fk.object_pose[None, :2][0] if self.obj.shape == "circle" \
                    else fk.corners[pi]
                u = float((p - anchor.local_point) @ t_hat)
                E += 0.5 * kt * u * u
                if order >= 1:
                    row = np.zeros(n)
                    self._object_point_row(fk, p, t_hat, row)
                    g += kt * u * row
                    if order >= 2:
                        H += kt * np.outer(row, row)
        return E, g, H

    # -- friction anchor return mapping ---------------------------------------

    def update_anchors(self, q, anchors: dict) -> tuple[dict, bool]:
        """Coulomb return mapping at a settled configuration.

        Creates anchors for new contacts, drops separated ones, slides any
        anchor whose tangential force exceeds mu times the normal force, and
        refreshes frozen normals. Returns (new_anchors, changed).
        """
        fk = self.fk(q)
        kn = self.config.contact.normal_stiffness
        kt = self.config.contact.tangent_stiffness
        mu_default = self.config.contact.mu
        new: dict = {}
        changed = False

        def obstacle_mu(obs_key: str) -> float:
            if obs_key == "object":
                return mu_default
            return self.walls[int(obs_key[4:])][2]

        def anchor_world(anchor: FrictionAnchor, obs_key: str) -> np.ndarray:
            if obs_key == "object":
                return fk.object_pose[:2] + rot(fk.object_pose[2]) @ anchor.local_point
            return anchor.local_point

        def to_local(p_world: np.ndarray, obs_key: str) -> np.ndarray:
            if obs_key == "object":
                return rot(-fk.object_pose[2]) @ (p_world - fk.object_pose[:2])
            return p_world

        pairs = [(key, obs, d, nrm, pt)
                 for key, obs, d, nrm, pt, _fi in self._node_contacts(fk)]
        pairs += list(self._object_wall_contacts(fk))
        for node_key, obs_key, depth, normal, pt in pairs:
            key = (node_key, obs_key)
            mu = obstacle_mu(obs_key)
            cap = mu * kn * depth
            old = anchors.get(key)
            if old is None:
                new[key] = FrictionAnchor(to_local(pt.copy(), obs_key), normal.copy())
                changed = True
                continue
            t_old = old.tangent()
            u = float((pt - anchor_world(old, obs_key)) @ t_old)
            u_kept = u
            if abs(kt * u) > cap:
                u_kept = math.copysign(cap / kt, u)
                changed = True
            if float(np.linalg.norm(normal - old.normal)) > 1e-9:
                changed = True
            t_new = perp(normal)
            stick_world = pt - u_kept * t_new
            new[key] = FrictionAnchor(to_local(stick_world, obs_key), normal.copy())
        if len(new) != len(anchors):
            changed = True
        return new, changed

    # -- diagnostics -----------------------------------------------------------

    def contact_records(self, q, anchors: dict) -> list[ContactRecord]:
        fk = self.fk(q)
        kn = self.config.contact.normal_stiffness
        kt = self.config.contact.tangent_stiffness
        records = []

        def tangent_force(node_key, obs_key, pt):
            anchor = anchors.get((node_key, obs_key))
            if anchor is None:
                return 0.0, np.zeros(2)
            if obs_key == "object":
                a_world = fk.object_pose[:2] + rot(fk.object_pose[2]) @ anchor.local_point
            else:
                a_world = anchor.local_point
            t_hat = anchor.tangent()
            u = float((pt - a_world) @ t_hat)
            # force on the obstacle from the stick spring
            return kt * u, kt * u * t_hat

        for node_key, obs_key, depth, normal, pt, _fi in self._node_contacts(fk):
            fn = kn * depth
            ft, ft_vec = tangent_force(node_key, obs_key, pt)
            feature = ""
            if obs_key == "object":
                feature = self.object_feature(fk.object_pose, pt)
            records.append(ContactRecord(
                node_key=node_key, obstacle=obs_key, point=pt.copy(),
                normal=normal.copy(), depth=depth, normal_force=fn,
                tangent_force=ft,
                force_on_obstacle=-fn * normal + ft_vec,
                feature=feature,
            ))
        for node_key, obs_key, depth, normal, pt in self._object_wall_contacts(fk):
            fn = kn * depth
            ft, ft_vec = tangent_force(node_key, obs_key, pt)
            records.append(ContactRecord(
                node_key=node_key, obstacle=obs_key, point=pt.copy(),
                normal=normal.copy(), depth=depth, normal_force=fn,
                tangent_force=ft,
                force_on_obstacle=-fn * normal + ft_vec,
                feature="corner",
            ))
        return records

    # -- geometry helpers ------------------------------------------------------

    def rest_configuration(self, act: np.ndarray,
                           object_pose=None, carrier=None) -> np.ndarray:
        """Configuration with every joint at its actuation-shifted rest angle."""
        q = np.zeros(self.dof.n)
        for fa, name in zip(self.fingers, self.dof.finger_slices):
            q[self.dof.finger_slices[name]] = fa.rest_angles(act)
        if self.dof.object_slice is not None:
            q[self.dof.object_slice] = (self.obj.pose if object_pose is None
                                        else object_pose)
        if self.dof.carrier_slice is not None:
            car = self.config.carrier
            chan0 = self.n_finger_channels
            for i, ax in enumerate(self.dof.carrier_axes):
                q[self.dof.carrier_slice.start + i] = (
                    car.rest[ax] + car.gain * act[chan0 + i]
                    if carrier is None else carrier[i]
                )
        return q

    def chain_segments(self, q: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        fk = self.fk(q)
        segs = []
        for pts in fk.joint_pts:
            for a, b in zip(pts[:-1], pts[1:]):
                segs.append((a, b))
        return segs


def segments_intersect(p1, p2, p3, p4) -> bool:
    """Proper intersection test between segments p1p2 and p3p4."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(v) < 1e-14:
            return 0
        return 1 if v > 0 else -1

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)
