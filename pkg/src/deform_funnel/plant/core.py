"""The quasi-static plant: equilibrium stepping, raw sensors, diagnostics."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..errors import ObjectEscaped, SolverDiverged
from .config import PlantConfig, SensorLayout
from .mechanics import ContactRecord, EnergyModel, Wrench, segments_intersect
from .solver import IterateAbort, minimize_energy


@dataclass
class PlantState:
    """One settled configuration plus the contact memory it was reached with."""

    q: np.ndarray
    actuation: np.ndarray
    anchors: dict
    contacts: list[ContactRecord]
    residual: float
    energy: float
    external_wrench: np.ndarray | None = None
    friction_converged: bool = True
    solver_iterations: int = 0
    energy_trace: list[float] = field(default_factory=list)

    def copy(self) -> "PlantState":
        return PlantState(
            q=self.q.copy(),
            actuation=self.actuation.copy(),
            anchors=dict(self.anchors),
            contacts=list(self.contacts),
            residual=self.residual,
            energy=self.energy,
            external_wrench=None if self.external_wrench is None
            else self.external_wrench.copy(),
            friction_converged=self.friction_converged,
            solver_iterations=self.solver_iterations,
            energy_trace=list(self.energy_trace),
        )


class Plant:
    """2D quasi-static compliant hand with an optional rigid object.

    A plant instance owns a mutable current state and is single threaded;
    run separate instances for parallel work.
    """

    def __init__(self, config: PlantConfig):
        self.config = config
        self.model = EnergyModel(config)
        self.layout = SensorLayout.from_config(config)
        self.act_labels = tuple(self.model.act_labels)
        act = self._initial_actuation()
        q0 = self.model.rest_configuration(act)
        self.state = PlantState(
            q=q0, actuation=act, anchors={}, contacts=[], residual=np.inf,
            energy=self.model.energy(q0, act, None, {}),
        )
        self.state = self.step_to_equilibrium(act)

    def _initial_actuation(self) -> np.ndarray:
        act = np.zeros(len(self.act_labels))
        for lab, val in self.config.initial_actuation.items():
            if lab not in self.act_labels:
                raise ValueError(f"initial actuation for unknown channel {lab!r}")
            act[self.act_labels.index(lab)] = float(val)
        return act

    # -- stepping ---------------------------------------------------------------

    def step_to_equilibrium(self, actuation: np.ndarray,
                            external: Wrench | np.ndarray | None = None,
                            state: PlantState | None = None) -> PlantState:
        """Settle to a local minimum of total potential energy.

        Starts from `state` (default: the plant's current state), carrying its
        friction anchors; runs Coulomb return-mapping passes until the anchor
        set is stationary. Updates and returns the plant's current state.
        """
        cfg = self.config.solver
        prev = self.state if state is None else state
        act = np.asarray(actuation, dtype=np.float64)
        if act.shape != (len(self.act_labels),):
            raise ValueError("actuation vector has wrong length")
        wrench = None
        if external is not None:
            wrench = external.as_array() if isinstance(external, Wrench) \
                else np.asarray(external, dtype=np.float64)
        anchors = dict(prev.anchors)
        x = prev.q.copy()
        escape_radius = self.config.workspace_radius
        obj_slice = self.model.dof.object_slice

        energy_trace: list[float] = []

        def on_iterate(xi, ei):
            energy_trace.append(ei)
            if obj_slice is not None:
                pos = xi[obj_slice][:2]
                if float(np.hypot(pos[0], pos[1])) > 1.5 * escape_radius:
                    raise IterateAbort

        result = None
        friction_converged = False
        try:
            for _ in range(cfg.friction_passes):
                result = minimize_energy(
                    lambda xx: self.model.energy(xx, act, wrench, anchors),
                    lambda xx: self.model.energy_grad_hess(xx, act, wrench, anchors),
                    x, cfg.tol, cfg.max_iters, on_iterate=on_iterate,
                )
                x = result.x
                anchors, changed = self.model.update_anchors(x, anchors)
                if not changed:
                    friction_converged = True
                    break
            if not friction_converged and result is not None:
                # one extra solve so the stored residual matches the final anchors
                result = minimize_energy(
                    lambda xx: self.model.energy(xx, act, wrench, anchors),
                    lambda xx: self.model.energy_grad_hess(xx, act, wrench, anchors),
                    x, cfg.tol, cfg.max_iters, on_iterate=on_iterate,
                )
                x = result.x
        except IterateAbort:
            raise ObjectEscaped(
                "object left the workspace during an equilibrium solve"
            ) from None
        except SolverDiverged:
            if obj_slice is not None:
                pos = x[obj_slice][:2]
                no_contact = not any(c.obstacle == "object"
                                     for c in self.model.contact_records(x, anchors))
                if no_contact and float(np.hypot(pos[0], pos[1])) > escape_radius:
                    raise ObjectEscaped(
                        "object lost all contacts and left the workspace"
                    ) from None
            raise

        contacts = self.model.contact_records(x, anchors)
        new_state = PlantState(
            q=x, actuation=act.copy(), anchors=anchors, contacts=contacts,
            residual=result.residual, energy=result.energy,
            external_wrench=wrench, friction_converged=friction_converged,
            solver_iterations=result.iterations, energy_trace=energy_trace,
        )
        if obj_slice is not None:
            pos = x[obj_slice][:2]
            touching = any(c.obstacle == "object" for c in contacts) or any(
                c.node_key[0] == "o" for c in contacts)
            if not touching and float(np.hypot(pos[0], pos[1])) > escape_radius:
                raise ObjectEscaped("object lost all contacts and left the workspace")
            if self.config.check_tunneling and prev.q is not x:
                old_pos = prev.q[obj_slice][:2]
                if self.object_crossed_chain(prev.q, old_pos, pos):
                    raise SolverDiverged(
                        "object center crossed a finger chain between equilibria"
                    )
        self.state = new_state
        return new_state

    def object_crossed_chain(self, q_prev: np.ndarray, old_pos, new_pos) -> bool:
        """Segment-intersection check of the object center path vs the hand."""
        if float(np.hypot(*(np.asarray(new_pos) - np.asarray(old_pos)))) < 1e-12:
            return False
        for a, b in self.model.chain_segments(q_prev):
            if segments_intersect(old_pos, new_pos, a, b):
                return True
        return False

    # -- readouts ---------------------------------------------------------------

    def read_raw(self, state: PlantState | None = None) -> np.ndarray:
        """Raw kinematic sensor readings (no normalization, no rest subtraction)."""
        st = self.state if state is None else state
        vals = []
        for fname, j in self.layout.bends:
            sl = self.model.dof.finger_slices[fname]
            vals.append(st.q[sl][j])
        for fname, lo, hi in self.layout.strains:
            sl = self.model.dof.finger_slices[fname]
            vals.append(float(np.sum(st.q[sl][lo:hi])))
        return np.array(vals)

    def object_pose(self, state: PlantState | None = None) -> np.ndarray | None:
        st = self.state if state is None else state
        if self.model.dof.object_slice is None:
            return None
        return st.q[self.model.dof.object_slice].copy()

    def carrier_position(self, state: PlantState | None = None) -> np.ndarray | None:
        st = self.state if state is None else state
        if self.model.dof.carrier_slice is None:
            return None
        return st.q[self.model.dof.carrier_slice].copy()

    def joint_angles(self, finger: str, state: PlantState | None = None) -> np.ndarray:
        st = self.state if state is None else state
        return st.q[self.model.dof.finger_slices[finger]].copy()

    def total_contact_force(self, state: PlantState | None = None) -> np.ndarray:
        """Net force the hand exerts on its environment through contact.

        Sums hand-object and hand-wall contact forces; object-wall contacts
        are not hand contacts and are excluded.
        """
        st = self.state if state is None else state
        total = np.zeros(2)
        for c in st.contacts:
            if c.node_key[0] == "n":
                total += c.force_on_obstacle
        return total

    def max_penetration(self, state: PlantState | None = None) -> float:
        st = self.state if state is None else state
        return max((c.depth for c in st.contacts), default=0.0)

    def residual_of(self, state: PlantState) -> float:
        """Independent recomputation of the equilibrium residual for a state."""
        _, g = self.model.energy_grad(state.q, state.actuation,
                                      state.external_wrench, state.anchors)
        return float(np.abs(g).max())

    def set_gravity(self, angle: float, magnitude: float | None = None) -> None:
        """Update the gravity direction; takes effect on the next equilibrium."""
        self.config.gravity_angle = float(angle)
        if magnitude is not None:
            self.config.gravity_magnitude = float(magnitude)
        self.model.gvec = self.config.gravity_vector()
