"""
Rotating, scaling and placing an object
=======================================

Renders a coloured house-shaped mesh at several orientations, scales one
render, and writes every stage to demos/output/.
"""

from pathlib import Path

import numpy as np

from esattn import Mesh, Raster, Rotation, place_at, render_rotated, scale_object
from esattn.imaging import save_image, save_mask

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

# A house: red gabled roof over a blue box (front/back faces only, which is
# plenty for orthographic views).
vertices = np.array([
    [0, 0, 0], [2, 0, 0], [2, 2, 0], [0, 2, 0],   # front wall
    [0, 0, 1], [2, 0, 1], [2, 2, 1], [0, 2, 1],   # back wall
    [1, 3, 0], [1, 3, 1],                          # roof ridge
], float)
colors = np.array([[0.2, 0.3, 0.9]] * 8 + [[0.9, 0.15, 0.1]] * 2)
faces = np.array([
    [0, 1, 2], [0, 2, 3],          # front
    [4, 6, 5], [4, 7, 6],          # back
    [3, 2, 8],                     # front gable
    [7, 9, 6],                     # back gable
    [2, 6, 8], [6, 9, 8],          # roof right
    [3, 8, 7], [8, 9, 7],          # roof left
])
house = Mesh(vertices=vertices, faces=faces, colors=colors)

for yaw, pitch in [(0, 0), (45, 0), (90, 0), (30, -25)]:
    render = render_rotated(house, Rotation(yaw=yaw, pitch=pitch), 128)
    x0, y0, x1, y1 = render.bbox()
    print(f"yaw={yaw:>3} pitch={pitch:>3}: bbox {x1 - x0 + 1}x{y1 - y0 + 1}, "
          f"{render.mask.sum()} object pixels")
    save_image(out_dir / f"house_y{yaw}_p{pitch}.png", render.pixels)
    save_mask(out_dir / f"house_y{yaw}_p{pitch}_mask.png", render.mask)

# Rescale one view and drop it onto a gradient scene.
render = render_rotated(house, Rotation(yaw=45), 128)
small = scale_object(render, 0.6)
scene = Raster.blank(192, 128, color=(210, 225, 240))
scene.pixels[:, :, :] = np.linspace(140, 235, 192, dtype=np.uint8)[None, :, None]
placed = place_at(small, scene, target_center=(140, 70))
save_image(out_dir / "house_in_scene.png", placed.pixels)
save_mask(out_dir / "house_in_scene_mask.png", placed.mask)
print("placed object bbox:", placed.bbox())
print(f"wrote renders to {out_dir}")
