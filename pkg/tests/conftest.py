import numpy as np
import pytest

from trajkit.core import AgentMetadata, AgentType, Extent, SceneFrame
from trajkit.ingest import SceneCache
from trajkit.kinematics import complete_track
from trajkit.vecmap import Polyline, PolygonArea, RoadLane, TrafficLightStatus, VectorMap


@pytest.fixture
def cache(tmp_path):
    return SceneCache(tmp_path / "cache")


def random_scene(
    rng: np.random.Generator,
    n_agents: int = 4,
    n_timesteps: int = 40,
    dt: float = 0.1,
    gap_prob: float = 0.15,
    dataset: str = "rand",
    scene_id: str = "scene-0",
    with_extent: bool = True,
) -> SceneFrame:
    """Valid random scene built through the normal imputation/derivation pipeline."""
    agents = []
    tracks = []
    for k in range(n_agents):
        first = int(rng.integers(0, max(1, n_timesteps // 3)))
        last = int(rng.integers(first + 2, n_timesteps))
        ts_all = np.arange(first, last + 1)
        keep = rng.random(len(ts_all)) > gap_prob
        keep[0] = keep[-1] = True
        ts_obs = ts_all[keep]
        steps = rng.normal(0.0, 0.5, size=(len(ts_obs), 2))
        pos = np.cumsum(steps, axis=0) + rng.uniform(-50, 50, size=2)
        first_ts, track, _ = complete_track(ts_obs, pos[:, 0], pos[:, 1], np.zeros(len(ts_obs)), dt)
        last_ts = first_ts + len(track["x"]) - 1
        agent_type = rng.choice(list(AgentType))
        extent = Extent(4.0, 2.0, 1.5) if with_extent else None
        agents.append(AgentMetadata(f"a{k}", agent_type, extent, first_ts, last_ts))
        tracks.append(track)
    return SceneFrame.from_tracks(scene_id, dataset, "nowhere", dt, agents, tracks)


def random_lane_map(rng: np.random.Generator, n_lanes: int = 20, pts_per_lane: int = 12, span: float = 200.0):
    """Centerline-only random map plus the raw segment arrays for brute-force oracles."""
    lanes = []
    for k in range(n_lanes):
        start = rng.uniform(-span, span, size=2)
        steps = rng.uniform(-8.0, 8.0, size=(pts_per_lane - 1, 2))
        xy = np.vstack([start, start + np.cumsum(steps, axis=0)])
        pts = np.zeros((pts_per_lane, 3))
        pts[:, :2] = xy
        lanes.append(RoadLane(f"lane{k:03d}", Polyline(pts)))
    vmap = VectorMap("rand:flat", lanes)
    return vmap


def convex_polygon(rng: np.random.Generator, center, scale: float, n_pts: int = 12) -> np.ndarray:
    """Random convex ring (guaranteed simple) around a center."""
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=n_pts))
    radii = rng.uniform(0.4 * scale, scale, size=n_pts)
    ring = np.stack([np.cos(angles) * radii, np.sin(angles) * radii], axis=1) + center
    return ring


def straight_lane(lane_id: str, y: float, length: float = 100.0, half_width: float | None = None) -> RoadLane:
    center = Polyline([(0.0, y, 0.0), (length, y, 0.0)])
    left = right = None
    if half_width is not None:
        left = Polyline([(0.0, y + half_width, 0.0), (length, y + half_width, 0.0)])
        right = Polyline([(0.0, y - half_width, 0.0), (length, y - half_width, 0.0)])
    return RoadLane(lane_id, center, left_edge=left, right_edge=right)


def square_area(x0: float, y0: float, side: float, holes=()) -> PolygonArea:
    ring = np.array([(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side)])
    return PolygonArea(ring, [np.asarray(h, dtype=float) for h in holes])


def tiny_traffic_map() -> VectorMap:
    return VectorMap(
        "toy:flat",
        [straight_lane("L1", 0.0, half_width=2.0), straight_lane("L2", 10.0)],
        traffic_lights={("L1", 5): TrafficLightStatus.RED},
    )
