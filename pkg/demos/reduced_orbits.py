"""Reduced-model orbits, turning points and the (f, delta) regime map.

Runs in a second or two:

    python3 demos/reduced_orbits.py
"""
import numpy as np

from jcpackets import variational as var
from jcpackets.classifier import classify, phase_diagram
from jcpackets.model import SystemParams


def main():
    f = 15.0
    p = SystemParams(1.0, 0.1)
    print(f"f = {f:g} g, delta = {p.delta:g} g, class {classify(f, p.delta, p).label}")
    for b in (1, 2):
        tr = var.evolve_branch(0j, b, f, p, 2 * var.half_period(b, f, p))
        crossings = var.real_axis_crossings(tr)
        om = var.oscillation_frequency(b, f, p).omega
        print(f"  branch {b}: turning point {var.turning_point(b, f, p):+8.3f}, "
              f"integrated {crossings[0][1].real:+8.3f}, max <n> = {np.max(np.abs(tr.z)**2):7.1f}, "
              f"Omega = {om:.5f}, energy residual {np.ptp(tr.energy_residual()):.1e}")

    fs = np.linspace(1.0, 20.0, 20)
    deltas = np.geomspace(0.005, 0.5, 12)
    grid = phase_diagram(fs, deltas)
    print("\nregime map (rows: delta, columns: f from 1 to 20)")
    for j in range(len(deltas) - 1, -1, -1):
        row = "".join(grid[:, j])
        print(f"  {deltas[j]:6.3f}  {row}")


if __name__ == "__main__":
    main()
