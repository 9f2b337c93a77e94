"""Which physical motions are unconstrained? Detection and characterization on simple scenes."""

import numpy as np

from schur_icp import SceneSpec, SpatialIndex, assemble_system, detect, find_correspondences, gen_scene
from schur_icp.characterize import format_report, report_rows
from schur_icp.se3 import RigidTransform, exp_so3

for kind in ("plane", "corridor", "room", "cylinder"):
    cloud = gen_scene(SceneSpec(kind=kind))
    corrs = find_correspondences(cloud, SpatialIndex(cloud), RigidTransform.identity(), 1.0)
    spec, mask = detect(assemble_system(corrs))
    rb, tb = mask.bits()
    print(f"== {kind}: kappa_R {spec.kappa_r:.3g}, kappa_t {spec.kappa_t:.3g}, mask rot {rb} trans {tb}")
    print(format_report(report_rows(spec, mask)), "\n")

# Tilting the corridor mixes the free direction across axes; the contribution
# columns show how much of the degenerate motion each world axis carries.
tilt = RigidTransform(exp_so3(np.radians([0.0, 0.0, 12.0])), np.zeros(3))
cloud = gen_scene(SceneSpec(kind="corridor")).transformed(tilt)
corrs = find_correspondences(cloud, SpatialIndex(cloud), RigidTransform.identity(), 1.0)
spec, mask = detect(assemble_system(corrs))
print("== corridor yawed by 12 deg")
print(format_report(report_rows(spec, mask, subspace="trans")))
