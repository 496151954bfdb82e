"""Grid deployment and unit-disk radio graph."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Position:
    x: float
    y: float


@dataclass(frozen=True)
class GridTopology:
    """A cols x rows lattice with node 0 (the root/sink) at the origin corner.

    Node ids are row-major from the root corner: id = row * cols + col.
    Immutable after construction, safe to share across concurrent runs.
    """

    cols: int
    rows: int
    spacing: float
    tx_range: float
    positions: dict[int, Position] = field(hash=False)

    @property
    def node_count(self) -> int:
        return self.cols * self.rows

    @property
    def root(self) -> int:
        return 0

    def neighbors(self, node: int) -> set[int]:
        """Nodes within Euclidean distance tx_range, excluding node itself."""
        if node not in self.positions:
            raise KeyError(f"unknown node id {node}")
        p = self.positions[node]
        out = set()
        for other, q in self.positions.items():
            if other == node:
                continue
            if math.hypot(p.x - q.x, p.y - q.y) <= self.tx_range:
                out.add(other)
        return out

    def hop_distance(self, a: int, b: int) -> int:
        """BFS hop count between a and b over the radio graph."""
        if a == b:
            return 0
        seen = {a: 0}
        queue = deque([a])
        while queue:
            cur = queue.popleft()
            for nxt in self.neighbors(cur):
                if nxt not in seen:
                    seen[nxt] = seen[cur] + 1
                    if nxt == b:
                        return seen[nxt]
                    queue.append(nxt)
        raise ValueError(f"no path between {a} and {b}")

    def levels(self) -> dict[int, int]:
        """Hop distance of every node from the root (DODAG level under 4-adjacency)."""
        levels = {self.root: 0}
        queue = deque([self.root])
        while queue:
            cur = queue.popleft()
            for nxt in self.neighbors(cur):
                if nxt not in levels:
                    levels[nxt] = levels[cur] + 1
                    queue.append(nxt)
        return levels

    def dump_rows(self) -> list[tuple[int, float, float, int]]:
        """(id, x, y, level) rows, the audit table emitted with every run."""
        lv = self.levels()
        return [(n, self.positions[n].x, self.positions[n].y, lv[n]) for n in sorted(self.positions)]

    def dump_text(self) -> str:
        lines = ["id,x,y,level"]
        lines += [f"{n},{x:g},{y:g},{lvl}" for n, x, y, lvl in self.dump_rows()]
        return "\n".join(lines) + "\n"


def build_grid(cols: int, rows: int, spacing: float, tx_range: float) -> GridTopology:
    """Build the lattice and reject configurations that cannot form one connected DODAG."""
    if cols < 1 or rows < 1 or cols * rows < 2:
        raise ValueError("grid needs at least 2 nodes (cols*rows >= 2, both positive)")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if tx_range <= 0:
        raise ValueError("tx_range must be positive")
    if tx_range < spacing:
        raise ValueError(
            f"disconnected topology: tx_range {tx_range} m < spacing {spacing} m"
        )
    positions = {
        row * cols + col: Position(col * spacing, row * spacing)
        for row in range(rows)
        for col in range(cols)
    }
    return GridTopology(cols=cols, rows=rows, spacing=spacing, tx_range=tx_range, positions=positions)


def default_grid(cfg=None) -> GridTopology:
    """The 30-node 6x5 / 20 m / 25 m deployment used by all experiments."""
    if cfg is None:
        from .config import DEFAULT_CONFIG as cfg  # noqa: PLC0415
    return build_grid(cfg.grid_cols, cfg.grid_rows, cfg.grid_spacing_m, cfg.tx_range_m)


def topology_digest(topo: GridTopology) -> str:
    """Stable 16-hex-digit content hash of the deployment."""
    import hashlib  # noqa: PLC0415

    text = f"{topo.cols}|{topo.rows}|{topo.spacing}|{topo.tx_range}"
    return hashlib.blake2b(text.encode(), digest_size=8).hexdigest()
