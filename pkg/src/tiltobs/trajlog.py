"""Trajectory log container with a fixed, versioned CSV schema.

The column order is part of the output contract and is covered by a
golden-header regression test; change LOG_VERSION when it changes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np

LOG_VERSION = "1"

COLUMNS = (
    "t",
    "x2_true_x", "x2_true_y", "x2_true_z",
    "y_g_x", "y_g_y", "y_g_z",
    "y_a_x", "y_a_y", "y_a_z",
    "y_v_x", "y_v_y", "y_v_z",
    "x1hat_x", "x1hat_y", "x1hat_z",
    "x2phat_x", "x2phat_y", "x2phat_z",
    "x2hat_x", "x2hat_y", "x2hat_z",
    "err_angle_rad",
    "lyapunov_V",
)


@dataclass
class TrajectoryLog:
    """Per-tick scenario record: metadata plus a (rows, 24) data matrix."""

    metadata: dict
    data: np.ndarray

    columns: ClassVar[tuple] = COLUMNS

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] != len(COLUMNS):
            raise ValueError(
                f"data must have {len(COLUMNS)} columns, got shape {self.data.shape}"
            )
        t = self.data[:, 0]
        if len(t) > 1 and not (np.diff(t) > 0).all():
            raise ValueError("rows must be strictly time-ordered")

    def column(self, name: str) -> np.ndarray:
        return self.data[:, COLUMNS.index(name)]

    def vector(self, prefix: str) -> np.ndarray:
        """The (rows, 3) block for a vector quantity, e.g. 'x2hat'."""
        i = COLUMNS.index(prefix + "_x")
        return self.data[:, i:i + 3]

    def equals(self, other: "TrajectoryLog") -> bool:
        """Bit-exact comparison used by the determinism contract."""
        return (
            self.metadata == other.metadata
            and self.data.shape == other.data.shape
            and np.array_equal(self.data, other.data)
        )

    def write_csv(self, path) -> None:
        with open(path, "w") as f:
            for key, value in self.metadata.items():
                f.write(f"# {key} = {value}\n")
            f.write(",".join(COLUMNS) + "\n")
            for row in self.data:
                f.write(",".join(f"{x:.17g}" for x in row) + "\n")

    @classmethod
    def read_csv(cls, path) -> "TrajectoryLog":
        metadata = {}
        rows = []
        with open(path) as f:
            for line in f:
                line = line.rstrip("\n")
                if line.startswith("#"):
                    key, _, value = line[1:].partition("=")
                    metadata[key.strip()] = value.strip()
                elif line.startswith("t,"):
                    if line != ",".join(COLUMNS):
                        raise ValueError("unrecognized column header")
                else:
                    rows.append([float(x) for x in line.split(",")])
        return cls(metadata=metadata, data=np.array(rows))
