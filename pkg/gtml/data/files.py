"""
Text formats for trajectories, fitted models and experiment tables.

trajectory: t,b_label,h_label,query,c1,c2   (t starts at 1)
model:      signal,behavior,<one column per next behavior>, 17 significant digits
tables:     one "# generated_at=<ISO timestamp>" line, then a CSV header row
"""
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from gtml.core.environment import Environment
from gtml.core.errors import InputError
from gtml.core.model import BehaviorModel, Trajectory

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
TRAJECTORY_COLUMNS = ["t", "b_label", "h_label", "query", "c1", "c2"]
FLOAT_FORMAT = "%.17g"
STAMP_PREFIX = "# generated_at="


def _ensure_parent(path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    users = traj.user_dist
    clicks = users.clicks(traj.users)
    return pd.DataFrame({
        "t": np.arange(1, len(traj) + 1),
        "b_label": [traj.behavior_space.label(b) for b in traj.behaviors],
        "h_label": [traj.signal_space.label(h) for h in traj.signals],
        "query": [users.queries[q] for q in users.query_index(traj.users)],
        "c1": clicks[:, 0],
        "c2": clicks[:, 1],
    })


def write_trajectory(traj: Trajectory, path: PathLike) -> Path:
    path = _ensure_parent(path)
    trajectory_frame(traj).to_csv(path, index=False)
    return path


def read_trajectory(path: PathLike, env: Environment) -> Trajectory:
    df = pd.read_csv(path, dtype={"b_label": str, "h_label": str, "query": str})
    if list(df.columns) != TRAJECTORY_COLUMNS:
        raise InputError(f"trajectory header must be {','.join(TRAJECTORY_COLUMNS)}, got {','.join(df.columns)}")
    if len(df) < 1:
        raise InputError(f"trajectory file {path} holds no records")
    support = {(u.query, u.clicks): i for i, u in enumerate(env.users.support)}
    try:
        users = [support[(q, (int(c1), int(c2)))] for q, c1, c2 in zip(df["query"], df["c1"], df["c2"])]
    except KeyError as e:
        raise InputError(f"trajectory user {e.args[0]} is not in the support") from None
    return Trajectory(
        np.array([env.behaviors.index(b) for b in df["b_label"]]),
        np.array([env.signals.index(h) for h in df["h_label"]]),
        np.array(users),
        env.behaviors, env.signals, env.users,
    )


def model_frame(model: BehaviorModel) -> pd.DataFrame:
    n_h, n_b = model.signals.size, model.behaviors.size
    df = pd.DataFrame(model.matrices.reshape(n_h * n_b, n_b), columns=list(model.behaviors.labels))
    df.insert(0, "behavior", list(model.behaviors.labels) * n_h)
    df.insert(0, "signal", np.repeat(model.signals.labels, n_b))
    return df


def write_model(model: BehaviorModel, path: PathLike) -> Path:
    path = _ensure_parent(path)
    model_frame(model).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def read_model(path: PathLike, env: Environment, name: str = "loaded") -> BehaviorModel:
    df = pd.read_csv(path, dtype={"signal": str, "behavior": str}, float_precision="round_trip")
    expected = ["signal", "behavior", *env.behaviors.labels]
    if list(df.columns) != expected:
        raise InputError(f"model columns do not match the behavior space of {env.name!r}")
    n_h, n_b = env.signals.size, env.behaviors.size
    if list(df["signal"]) != list(np.repeat(env.signals.labels, n_b)) or list(df["behavior"]) != list(env.behaviors.labels) * n_h:
        raise InputError("model rows must follow the signal-major, behavior-minor label order")
    matrices = df[list(env.behaviors.labels)].to_numpy(dtype=float).reshape(n_h, n_b, n_b)
    return BehaviorModel(env.behaviors, env.signals, matrices, name=name)


def write_table(df: pd.DataFrame, path: PathLike) -> Path:
    """Timestamp line, then the header row and data with 17 significant digits."""
    path = _ensure_parent(path)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"{STAMP_PREFIX}{stamp}\n")
        df.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug("wrote %s rows to %s", len(df), path)
    return path


def read_table(path: PathLike) -> pd.DataFrame:
    with open(path, encoding="utf-8") as f:
        first = f.readline()
    if not first.startswith(STAMP_PREFIX):
        raise InputError(f"{path} does not start with a {STAMP_PREFIX!r} line")
    return pd.read_csv(path, skiprows=1)
