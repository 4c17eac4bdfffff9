"""Builders for synthetic episode records."""
import random

from semnav.metrics import EpisodeRecord

CLASS_NAMES = ["adult", "child", "elder"]


def scenario_dict(classes):
    return {
        "version": 1,
        "name": "synthetic",
        "seed": 0,
        "map": {"size": [20.0, 15.0], "walls": [], "rects": []},
        "robot": {"start": [0.0, 0.0, 0.0], "goal": [10.0, 0.0]},
        "peds": [{"class": CLASS_NAMES[c], "start": [5.0, 5.0], "waypoints": [[5.0, 5.0]]} for c in classes],
    }


def make_record(classes, d_rows, flags=None, cause="goal", dt=0.1, step=(0.3, 0.4)):
    """``d_rows[k][j]`` is the distance to pedestrian j at step k."""
    rows = []
    for k, ds in enumerate(d_rows):
        peds = []
        for j, (c, d) in enumerate(zip(classes, ds)):
            inside = bool(flags[k][j]) if flags else False
            peds.append({"id": j, "class": c, "x": 1.0, "y": 2.0, "d_ah": d, "in_sz": inside, "in_dz": inside})
        rows.append(
            {
                "t": round((k + 1) * dt, 10),
                "x": (k + 1) * step[0],
                "y": (k + 1) * step[1],
                "theta": 0.0,
                "v": 0.5,
                "w": 0.0,
                "reward": {},
                "peds": peds,
            }
        )
    return EpisodeRecord(scenario_dict(classes), rows, cause, dt)


def synthetic_records(n=20, seed=0):
    rng = random.Random(seed)
    records = []
    for _ in range(n):
        classes = [rng.randrange(3) for _ in range(rng.randrange(0, 4))]
        steps = rng.randrange(1, 40)
        d_rows = [[rng.uniform(0.3, 6.0) for _ in classes] for _ in range(steps)]
        flags = [[rng.random() < 0.3 for _ in classes] for _ in range(steps)]
        cause = rng.choice(["goal", "goal", "collision", "timeout"])
        rec = make_record(classes, d_rows, flags, cause, step=(rng.uniform(0, 0.06), rng.uniform(-0.06, 0.06)))
        records.append(rec)
    return records


def assert_matches(report, expected, tol=1e-9):
    got = report.to_dict()
    assert got.keys() == expected.keys()
    for k, v in expected.items():
        if isinstance(v, dict):
            for cls, p in v.items():
                assert (got[k][cls] is None) == (p is None), (k, cls)
                if p is not None:
                    assert abs(got[k][cls] - p) <= tol
        elif v is None:
            assert got[k] is None, k
        else:
            assert abs(got[k] - v) <= tol, k
