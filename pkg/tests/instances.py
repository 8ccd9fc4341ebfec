"""Random objective instances for gradient audits."""

import math

import numpy as np

from gradexplore.boundariness import compute_boundariness_map
from gradexplore.geometry import Path
from gradexplore.gridmap import L_MAX, L_MIN, LogOddsMap
from gradexplore.optimizer import Objective
from gradexplore.world import SensorSpec

RES = 0.3
MIN_MARGIN = 1e-3


def random_odds(rng, m, n):
    vals = rng.choice([0.0, L_MIN, L_MAX], size=(m, n), p=[0.4, 0.45, 0.15])
    vals = vals * rng.uniform(0.3, 1.0, size=(m, n))
    return LogOddsMap(m, n, RES, values=vals)


def gradient_instance(rng, max_tries: int = 200):
    """Objective on a random map and a 3-8 vertex path kept off every branch boundary."""
    m, n = (int(v) for v in rng.integers(8, 17, size=2))
    bd = compute_boundariness_map(random_odds(rng, m, n))
    spec = SensorSpec(max_range=float(rng.choice([0.6, 0.9, 1.2])),
                      fov=float(rng.uniform(math.radians(40), math.radians(300))))
    k = int(rng.integers(3, 9))
    poses = np.column_stack([rng.uniform(0.2, m * RES - 0.2, k), rng.uniform(0.2, n * RES - 0.2, k),
                             rng.uniform(-math.pi, math.pi, k)])
    obj = Objective.for_path(Path(poses), bd, spec, RES, rng, alpha=float(rng.uniform(0, 2)),
                             endpoint_mode=str(rng.choice(["exclude", "ignore"])))
    X = poses[1:-1]
    for _ in range(max_tries):
        if obj.branch_margin(X) >= MIN_MARGIN:
            return obj, X
        X = poses[1:-1] + rng.normal(0, [0.02, 0.02, 0.05], size=X.shape)
    return None
