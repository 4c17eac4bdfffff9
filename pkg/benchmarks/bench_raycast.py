"""Compare the compiled and numpy lidar kernels on a crowded 20 x 15 m scene.

    python benchmarks/bench_raycast.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from semnav import _raycast_py
from semnav.scenario import sample_random_scenario
from semnav.sensing import MAX_RANGE, N_BEAMS
from semnav.env import make_world

try:
    from semnav import _raycast_ext
except ImportError:
    _raycast_ext = None


def scene(n_peds: int, seed: int = 0):
    world = make_world(sample_random_scenario(seed, n_peds))
    r = world.robot
    return (r.x, r.y, r.theta, N_BEAMS, MAX_RANGE, np.ascontiguousarray(world.segments), world.pedestrian_circles())


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()
    backends = {"python": _raycast_py.cast_rays}
    if _raycast_ext is not None:
        backends["cython"] = _raycast_ext.cast_rays
    else:
        print("compiled kernel not built; timing the numpy fallback only")
    print(f"{'peds':>5} {'backend':>8} {'us/scan':>10} {'speedup':>8}")
    for n in (0, 3, 9):
        s = scene(n)
        times = {}
        for name, fn in backends.items():
            times[name] = min(timeit.repeat(lambda: fn(*s), number=args.repeat, repeat=3)) / args.repeat
        if len(backends) == 2:
            np.testing.assert_allclose(backends["python"](*s), backends["cython"](*s), atol=1e-12)
        for name, t in times.items():
            print(f"{n:>5} {name:>8} {t * 1e6:>10.1f} {times['python'] / t:>8.1f}x")


if __name__ == "__main__":
    main()
