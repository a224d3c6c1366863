"""
Building the two-panel in-context input
=======================================

End to end: transform a mesh into an appearance reference and target mask,
blank the source and target regions of a scene, and concatenate reference
and masked scene into the paired guidance input.
"""

from pathlib import Path

import numpy as np

from esattn import (
    Mesh,
    Raster,
    Rotation,
    TransformSpec,
    apply_transform,
    compose_incontext,
    prepare_masked_scene,
)
from esattn.imaging import save_image, save_mask

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

# A synthetic scene with a "floor" and an object-shaped blob to move.
rng = np.random.default_rng(3)
scene = Raster.blank(128, 128, color=(190, 200, 210))
scene.pixels[90:, :] = (120, 110, 100)
source_mask = np.zeros((128, 128), bool)
source_mask[60:90, 20:50] = True
scene.pixels[source_mask] = (60, 140, 60)

# The object as a mesh (a pyramid), rotated and dropped at a new location.
pyramid = Mesh(
    vertices=np.array([[0, 0, 0], [2, 0, 0], [2, 0, 2], [0, 0, 2], [1, 2, 1]], float),
    faces=np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4], [0, 2, 1], [0, 3, 2]]),
    colors=np.array([[0.9, 0.6, 0.1]] * 4 + [[0.8, 0.1, 0.1]]),
)
spec = TransformSpec(kind="composite", rotation=Rotation(yaw=30, pitch=-15),
                     scale=0.8, target_resolution=128, target_center=(88, 62))
reference, target_mask = apply_transform(pyramid, spec, scene)
print("reference bbox:", reference.bbox())
print("target mask pixels:", int(target_mask.mask.sum()))

# Blank both regions, then compose the panels.
masked = prepare_masked_scene(
    scene,
    Raster(pixels=scene.pixels, mask=source_mask),
    target_mask,
)
pair = compose_incontext(reference, masked, target_mask)
print("composite shape:", pair.composite().shape)
print("pair mask width:", pair.pair_mask.shape[1], "(twice the panel width)")

save_image(out_dir / "incontext_pair.png", pair.composite())
save_mask(out_dir / "incontext_pairmask.png", pair.pair_mask)
save_image(out_dir / "reference.png", reference.pixels)
save_mask(out_dir / "target_mask.png", target_mask.mask)
print(f"wrote panels to {out_dir}")
