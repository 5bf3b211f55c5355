"""The memory bank container and its on-disk format."""

from __future__ import annotations

import json
import os
import threading
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Iterator

from ..domain import MemoryNode, SchemaError, _check_keys, dumps

SCHEMA_VERSION = 1


class MemoryBank:
    """Insertion-ordered collection of memory nodes with an optional size cap.

    Nodes are immutable; updates swap in a new node under the bank lock.
    ``write_lock()`` gives a writer exclusive access for a multi-step update.
    """

    def __init__(self, nodes: Iterable[MemoryNode] = (), capacity: int | None = None):
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be a positive integer")
        self.capacity = capacity
        self._nodes: dict[str, MemoryNode] = {}
        self._lock = threading.RLock()
        for node in nodes:
            self.add(node, evict=False)
        if capacity is not None and len(self._nodes) > capacity:
            raise ValueError(f"bank holds {len(self._nodes)} nodes, above its capacity {capacity}")

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MemoryBank):
            return NotImplemented
        return self.capacity == other.capacity and list(self._nodes.values()) == list(other._nodes.values())

    def __repr__(self) -> str:
        return f"MemoryBank({len(self)} nodes, capacity={self.capacity})"

    @property
    def nodes(self) -> list[MemoryNode]:
        with self._lock:
            return list(self._nodes.values())

    def get(self, node_id: str) -> MemoryNode:
        with self._lock:
            return self._nodes[node_id]

    @contextmanager
    def write_lock(self) -> Iterator["MemoryBank"]:
        with self._lock:
            yield self

    def add(self, node: MemoryNode, evict: bool = True) -> list[str]:
        """Insert a node; returns the ids evicted to respect the capacity."""
        with self._lock:
            if node.id in self._nodes:
                raise ValueError(f"duplicate node id {node.id}")
            self._nodes[node.id] = node
            return self._evict(protect=node.id) if evict else []

    def put(self, node: MemoryNode) -> None:
        with self._lock:
            if node.id not in self._nodes:
                raise KeyError(node.id)
            self._nodes[node.id] = node

    def remove(self, node_id: str) -> None:
        with self._lock:
            del self._nodes[node_id]

    def bump_activation(self, node_ids: Iterable[str]) -> None:
        with self._lock:
            for node_id in node_ids:
                node = self._nodes[node_id]
                self._nodes[node_id] = replace(node, activation_count=node.activation_count + 1)

    def copy(self) -> "MemoryBank":
        with self._lock:
            return MemoryBank(self._nodes.values(), self.capacity)

    def _evict(self, protect: str | None) -> list[str]:
        if self.capacity is None:
            return []
        evicted = []
        while len(self._nodes) > self.capacity:
            order = {node_id: i for i, node_id in enumerate(self._nodes)}
            victims = [n for n in self._nodes.values() if n.id != protect]
            victim = min(victims, key=lambda n: (n.activation_count, n.updated_at, order[n.id]))
            del self._nodes[victim.id]
            evicted.append(victim.id)
        return evicted

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "capacity": self.capacity,
            "nodes": [n.to_dict() for n in self.nodes],
        }

    @classmethod
    def from_dict(cls, d: object) -> "MemoryBank":
        d = _check_keys(d, "", ("schema_version", "nodes"), ("capacity",))
        if d["schema_version"] != SCHEMA_VERSION:
            raise SchemaError("schema_version", f"unsupported schema version {d['schema_version']!r}")
        capacity = d.get("capacity")
        if capacity is not None and (isinstance(capacity, bool) or not isinstance(capacity, int) or capacity < 1):
            raise SchemaError("capacity", "expected a positive integer or null")
        if not isinstance(d["nodes"], list):
            raise SchemaError("nodes", "expected a list")
        nodes = [MemoryNode.from_dict(n, f"nodes[{i}]") for i, n in enumerate(d["nodes"])]
        seen: set[str] = set()
        for i, node in enumerate(nodes):
            if node.id in seen:
                raise SchemaError(f"nodes[{i}].id", f"duplicate id {node.id}")
            seen.add(node.id)
        try:
            return cls(nodes, capacity)
        except ValueError as exc:
            raise SchemaError("capacity", str(exc)) from None


def save_bank(bank: MemoryBank, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(dumps(bank.to_dict()), encoding="utf-8")
    os.replace(tmp, path)


def load_bank(path: str | Path) -> MemoryBank:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}", exc.msg) from None
    try:
        return MemoryBank.from_dict(data)
    except SchemaError as exc:
        raise SchemaError(f"{path}: {exc.path}", str(exc).split(": ", 1)[-1]) from None
