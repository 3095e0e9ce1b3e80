"""How accuracy depends on the initial number of superpixels.

Too few superpixels merge classes; too many leave little spatial
smoothing. Each K is repeated over several training draws.
"""
from sgl import GraphConfig, RunConfig, generate_synthetic_scene, make_scene_spec, sweep_k, sweep_to_csv

cube, gt = generate_synthetic_scene(make_scene_spec(64, 64, 20, 4, noise_factor=0.15, tiles=(3, 3), seed=0))
cfg = RunConfig(graph=GraphConfig(sigma_l=40.0), per_class=5)
rows = sweep_k(cfg, cube, gt, k_values=[30, 80, 150, 250], repetitions=3)
print(sweep_to_csv(rows), end="")
