"""Scratch: validate field solver against analytic oracles and probe CPW behavior."""
import time
import numpy as np
from scipy.constants import epsilon_0
from scipy.special import ellipk

from qloss.fieldsolver import (CpwGeometry, PlateGeometry, InterfaceLayer,
                               solve_cross_section, compute_participations,
                               refine_until_converged, capacitance_from_energy,
                               capacitance_from_charge, default_interface_layers)

# --- sealed plate, vacuum medium ---
d, wdt = 1e-6, 50e-6
t_l, eps_l = 2e-9, 5.0
geom = PlateGeometry(width=wdt, separation=d, medium_epsilon=1.0,
                     layers={"sm": InterfaceLayer(t_l, eps_l),
                             "mv": InterfaceLayer(t_l, eps_l)},
                     cells_per_gap=16)
sol = solve_cross_section(geom, 1.0)
print("plate vacuum:")
print(f"  |E| uniform: max dev {np.max(np.abs(np.abs(sol.e_y[1:-1]) - 1/d))*d:.2e}")
c_exact = epsilon_0 * wdt / d
print(f"  C_energy {capacitance_from_energy(sol):.6e} vs exact {c_exact:.6e} "
      f"rel {(capacitance_from_energy(sol)-c_exact)/c_exact:.2e}")
print(f"  C_charge rel {(capacitance_from_charge(sol)-c_exact)/c_exact:.2e}")
ps = compute_participations(sol, geom)
p_exact = t_l / (eps_l * d)
print(f"  p_sm {ps.p_sm:.6e} vs exact {p_exact:.6e} rel {(ps.p_sm-p_exact)/p_exact:.2e}")
print(f"  p_mv {ps.p_mv:.6e} rel {(ps.p_mv-p_exact)/p_exact:.2e}")

# --- sealed plate, substrate medium (SM with eps_s factor) ---
eps_s = 11.6
geom2 = PlateGeometry(width=wdt, separation=d, medium_epsilon=eps_s,
                      layers={"sm": InterfaceLayer(t_l, eps_l)}, cells_per_gap=16)
sol2 = solve_cross_section(geom2, 1.0)
ps2 = compute_participations(sol2, geom2)
p2_exact = t_l * eps_s / (eps_l * d)
print(f"plate eps_s: p_sm {ps2.p_sm:.6e} vs exact {p2_exact:.6e} "
      f"rel {(ps2.p_sm-p2_exact)/p2_exact:.2e}")

# --- split plate for SV ---
geom3 = PlateGeometry(width=wdt, separation=d, medium_epsilon=eps_s,
                      split_interface=True,
                      layers={"sv": InterfaceLayer(t_l, 4.0)}, cells_per_gap=16)
sol3 = solve_cross_section(geom3, 1.0)
ps3 = compute_participations(sol3, geom3)
# analytic: 2 t eps_sv / (W (eps_s + 1)) -- but discrete widths: left half has
# i_split cells, right nx-1-i_split cells
p3_exact = 4.0 * t_l * d * (1/d)**2 / ((1/d)**2 * d * (eps_s * wdt/2 + wdt/2))
print(f"split plate: p_sv {ps3.p_sv:.6e} vs exact {p3_exact:.6e} "
      f"rel {(ps3.p_sv-p3_exact)/p3_exact:.2e}")

# --- refinement on plate ---
t0 = time.time()
ps_ref = refine_until_converged(geom, tolerance=0.01)
print(f"plate refine: cpg {ps_ref.cells_per_gap} err {ps_ref.error_estimate:.2e} "
      f"({time.time()-t0:.2f}s)")

# --- CPW: paper default w=g=24um ---
for cpg in (4, 8, 16):
    geom_cpw = CpwGeometry(center_width=24e-6, gap=24e-6, cells_per_gap=cpg)
    t0 = time.time()
    sol_c = solve_cross_section(geom_cpw, 1.0)
    dt = time.time() - t0
    ce = capacitance_from_energy(sol_c)
    cq = capacitance_from_charge(sol_c)
    k = 24 / (24 + 2 * 24)
    kp = np.sqrt(1 - k * k)
    c_cpw = 2 * epsilon_0 * (11.6 + 1) * ellipk(k**2) / ellipk(kp**2)
    ps_c = compute_participations(sol_c, geom_cpw)
    print(f"CPW cpg={cpg}: {sol_c.labels.shape} nodes, solve {dt:.2f}s")
    print(f"  C_energy {ce:.4e}  C_charge {cq:.4e}  rel(e-q) {(ce-cq)/cq:.2e}")
    print(f"  C vs elliptic {c_cpw:.4e}: rel {(ce-c_cpw)/c_cpw:.2e}")
    print(f"  p_sm {ps_c.p_sm:.4e}  p_sv {ps_c.p_sv:.4e}  p_mv {ps_c.p_mv:.4e}")
    print(f"  center share sm: {ps_c.per_conductor['center']['sm']:.4e}")

# --- CPW w=15/g=10 with 3.9nm SM layer (loss-tangent chain) ---
layers = default_interface_layers()
layers["sm"] = InterfaceLayer(thickness=3.9e-9, epsilon=11.6)
for cpg in (8, 16, 32):
    geom_lt = CpwGeometry(center_width=15e-6, gap=10e-6, layers=layers,
                          cells_per_gap=cpg)
    t0 = time.time()
    sol_lt = solve_cross_section(geom_lt, 1.0)
    ps_lt = compute_participations(sol_lt, geom_lt)
    p_c = ps_lt.per_conductor["center"]["sm"]
    excess = 1/2e5 - 1/2e6
    print(f"w15g10 cpg={cpg}: p_sm_center {p_c:.4e} -> delta_TLS {excess/p_c:.4e} "
          f"({time.time()-t0:.1f}s, {sol_lt.labels.shape})")
