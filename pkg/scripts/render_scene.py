#!/usr/bin/env python3
"""Dev helper: render a scene state to PNG for visual tuning."""
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

sys.path.insert(0, "src")
from deform_funnel.plant.core import Plant
from deform_funnel.plant.scenes import nominal_scene, slide_scene


def render(plant, path, title=""):
    fig, ax = plt.subplots(figsize=(7, 7))
    model = plant.model
    fk = model.fk(plant.state.q)
    for pts, fa in zip(fk.joint_pts, model.fingers):
        ax.plot(pts[:, 0], pts[:, 1], "o-", lw=2, ms=3, label=fa.name)
    for nodes in fk.node_pts:
        for p in nodes:
            ax.add_patch(plt.Circle(p, model.config.contact.node_radius,
                                    fill=False, color="gray", lw=0.4))
    if fk.object_pose is not None:
        o = fk.object_pose
        obj = model.obj
        if obj.shape == "circle":
            ax.add_patch(plt.Circle(o[:2], obj.size, fill=False, color="k", lw=2))
        else:
            hc = obj.size - obj.corner_radius
            c, s = np.cos(o[2]), np.sin(o[2])
            R = np.array([[c, -s], [s, c]])
            corners = np.array([[hc, hc], [-hc, hc], [-hc, -hc], [hc, -hc]])
            world = o[:2] + corners @ R.T
            ax.plot(np.append(world[:, 0], world[0, 0]),
                    np.append(world[:, 1], world[0, 1]), "k-", lw=1)
            full = np.array([[obj.size, obj.size], [-obj.size, obj.size],
                             [-obj.size, -obj.size], [obj.size, -obj.size]])
            worldf = o[:2] + full @ R.T
            ax.plot(np.append(worldf[:, 0], worldf[0, 0]),
                    np.append(worldf[:, 1], worldf[0, 1]), "k--", lw=1)
    for n_w, c_w, _mu in model.walls:
        t = np.array([-n_w[1], n_w[0]])
        p0 = n_w * c_w
        seg = np.array([p0 - 20 * t, p0 + 20 * t])
        ax.plot(seg[:, 0], seg[:, 1], "k-", lw=3, alpha=0.4)
    for c in plant.state.contacts:
        ax.plot(*c.point, "rx", ms=6)
        ax.arrow(*c.point, *(c.normal * c.normal_force * 1.5), color="r",
                 head_width=0.1)
    ax.set_xlim(-11, 11)
    ax.set_ylim(-11, 11)
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=7)
    ax.grid(alpha=0.2)
    ax.set_title(f"{title} residual={plant.state.residual:.2e} "
                 f"pen={plant.max_penetration():.3f}")
    fig.savefig(path, dpi=90)
    plt.close(fig)


if __name__ == "__main__":
    which = sys.argv[1] if len(sys.argv) > 1 else "nominal"
    if which == "nominal":
        plant = Plant(nominal_scene())
    else:
        plant = Plant(slide_scene())
    force = plant.total_contact_force()
    print("residual", plant.state.residual, "contacts", len(plant.state.contacts),
          "pen", plant.max_penetration())
    print("object pose", plant.object_pose(), "hand force", force)
    render(plant, f"/tmp/scene_{which}.png", which)
    print(f"wrote /tmp/scene_{which}.png")
