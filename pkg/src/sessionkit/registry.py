"""A contract repository with a precomputed server preorder.

Servers register their contracts; on registration the store decides the
substitutability preorder against every stored contract and keeps the edge
set.  A client query "which stored servers satisfy me" is answered from the
index: compliance is decided directly only on the minimal contracts of the
preorder (one representative per equivalence class) and positive answers
propagate upward along precomputed edges, so most stored contracts are never
re-checked.  A ``scan`` mode bypasses the index for differential testing;
both modes return exactly the compliant set.

Persistence is an append-only JSON-lines log replayed on startup.  Writers
are serialized; readers work on immutable snapshots and never observe a
half-updated index.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Iterable, Optional

from .errors import ContractError, StoreError
from .syntax import Behaviour, contract, render
from .compliance import check_skp
from .preorder import subbehaviour

__all__ = [
    "ContractRecord",
    "PreorderIndex",
    "ContractStore",
    "make_http_server",
]


@dataclass(frozen=True, slots=True)
class ContractRecord:
    id: int
    name: str
    contract: Behaviour
    text: str  # canonical concrete syntax
    registered_at: str

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "contract": self.text,
            "registeredAt": self.registered_at,
        }


class PreorderIndex:
    """Immutable preorder snapshot over record ids.

    ``edges`` holds (i, j) whenever contract i is substitutable by contract
    j; reflexive pairs are always present and the set is transitively closed
    because the underlying relation is a preorder (every edge is decided
    directly, never inferred).
    """

    def __init__(self, ids: tuple[int, ...], edges: frozenset[tuple[int, int]]):
        self.ids = ids
        self.edges = edges
        self._comp_of, self._comp_members, self._comp_succ, self._topo = self._condense()

    def _condense(self):
        idset = set(self.ids)
        mutual: dict[int, set[int]] = {i: {i} for i in self.ids}
        for i, j in self.edges:
            if i != j and (j, i) in self.edges:
                mutual[i].add(j)
        comp_of: dict[int, int] = {}
        comp_members: list[tuple[int, ...]] = []
        for i in sorted(idset):
            if i in comp_of:
                continue
            comp = tuple(sorted(mutual[i]))
            idx = len(comp_members)
            comp_members.append(comp)
            for m in comp:
                comp_of[m] = idx
        comp_succ: list[set[int]] = [set() for _ in comp_members]
        comp_pred: list[set[int]] = [set() for _ in comp_members]
        for i, j in self.edges:
            ci, cj = comp_of[i], comp_of[j]
            if ci != cj:
                comp_succ[ci].add(cj)
                comp_pred[cj].add(ci)
        # Kahn order over the condensation
        degree = [len(p) for p in comp_pred]
        queue = sorted(c for c in range(len(comp_members)) if degree[c] == 0)
        topo: list[int] = []
        qi = 0
        while qi < len(queue):
            cur = queue[qi]
            qi += 1
            topo.append(cur)
            for nxt in sorted(comp_succ[cur]):
                degree[nxt] -= 1
                if degree[nxt] == 0:
                    queue.append(nxt)
        return comp_of, comp_members, comp_succ, topo

    @property
    def minimal_ids(self) -> frozenset[int]:
        """Members of components with no incoming edge from another component."""
        incoming = set()
        for succ in self._comp_succ:
            incoming.update(succ)
        out = set()
        for cidx, members in enumerate(self._comp_members):
            if cidx not in incoming:
                out.update(members)
        return frozenset(out)

    def edges_json(self) -> list[list[int]]:
        return [list(e) for e in sorted(self.edges)]


_EMPTY_INDEX = PreorderIndex((), frozenset())


@dataclass(frozen=True)
class _Snapshot:
    records: tuple[ContractRecord, ...]
    index: PreorderIndex

    def record(self, rid: int) -> Optional[ContractRecord]:
        for r in self.records:
            if r.id == rid:
                return r
        return None


class ContractStore:
    """In-memory store with an optional append-only log behind it."""

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._next_id = 1
        self._snapshot = _Snapshot((), _EMPTY_INDEX)
        if self._path is not None and self._path.exists():
            self._replay()

    # -- queries (snapshot-based, no lock) ---------------------------------

    @property
    def snapshot(self) -> _Snapshot:
        return self._snapshot

    def records(self) -> tuple[ContractRecord, ...]:
        return self._snapshot.records

    def get(self, rid: int) -> Optional[ContractRecord]:
        return self._snapshot.record(rid)

    def query(self, client_text: str, scan: bool = False) -> list[ContractRecord]:
        """All stored contracts the querying client is skip-compliant with."""
        client = contract(client_text)
        snap = self._snapshot
        if scan:
            return [r for r in snap.records if check_skp(client, r.contract).compliant]
        index = snap.index
        by_id = {r.id: r for r in snap.records}
        matched_comps: set[int] = set()
        matched_ids: set[int] = set()
        for cidx in index._topo:
            members = index._comp_members[cidx]
            hit = any(
                cidx in index._comp_succ[pred]
                for pred in matched_comps
            )
            if not hit:
                rep = by_id[members[0]]
                hit = check_skp(client, rep.contract).compliant
            if hit:
                matched_comps.add(cidx)
                matched_ids.update(members)
        return [r for r in snap.records if r.id in matched_ids]

    # -- mutations (serialized) ---------------------------------------------

    def register(self, name: str, contract_text: str) -> ContractRecord:
        """Validate, persist and index a contract; synchronous end to end."""
        term = contract(contract_text)  # propagate parse/validation errors
        with self._lock:
            record = ContractRecord(
                id=self._next_id,
                name=name,
                contract=term,
                text=render(term),
                registered_at=datetime.now(timezone.utc).isoformat(),
            )
            self._append({"op": "add", "record": record.to_json()})
            self._install(record)
            self._next_id += 1
            return record

    def delete(self, rid: int) -> bool:
        with self._lock:
            snap = self._snapshot
            if snap.record(rid) is None:
                return False
            self._append({"op": "del", "id": rid})
            self._remove(rid)
            return True

    # -- internals -----------------------------------------------------------

    def _install(self, record: ContractRecord) -> None:
        snap = self._snapshot
        index = snap.index
        new_edges = set(index.edges)
        new_edges.add((record.id, record.id))
        for other in snap.records:
            if subbehaviour(other.contract, record.contract).is_sub:
                new_edges.add((other.id, record.id))
            if subbehaviour(record.contract, other.contract).is_sub:
                new_edges.add((record.id, other.id))
        records = snap.records + (record,)
        ids = tuple(r.id for r in records)
        self._snapshot = _Snapshot(records, PreorderIndex(ids, frozenset(new_edges)))

    def _remove(self, rid: int) -> None:
        snap = self._snapshot
        records = tuple(r for r in snap.records if r.id != rid)
        edges = frozenset(
            e for e in snap.index.edges if rid not in e
        )
        ids = tuple(r.id for r in records)
        self._snapshot = _Snapshot(records, PreorderIndex(ids, edges))

    def _append(self, entry: dict) -> None:
        if self._path is None:
            return
        with self._path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
            fh.flush()

    def _replay(self) -> None:
        assert self._path is not None
        max_id = 0
        with self._path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise StoreError(f"corrupt log entry: {exc.msg}", lineno) from exc
                op = entry.get("op")
                if op == "add":
                    raw = entry.get("record")
                    try:
                        record = ContractRecord(
                            id=int(raw["id"]),
                            name=str(raw["name"]),
                            contract=contract(raw["contract"]),
                            text=raw["contract"],
                            registered_at=str(raw["registeredAt"]),
                        )
                    except (KeyError, TypeError, ContractError) as exc:
                        raise StoreError(f"bad add entry: {exc}", lineno) from exc
                    self._install(record)
                    max_id = max(max_id, record.id)
                elif op == "del":
                    try:
                        self._remove(int(entry["id"]))
                    except (KeyError, TypeError) as exc:
                        raise StoreError(f"bad del entry: {exc}", lineno) from exc
                else:
                    raise StoreError(f"unknown op {op!r}", lineno)
        self._next_id = max_id + 1


# ---------------------------------------------------------------------------
# HTTP front end
# ---------------------------------------------------------------------------

class _Handler(BaseHTTPRequestHandler):
    server_version = "sessionkit-registry/0.1"

    @property
    def store(self) -> ContractStore:
        return self.server.store  # type: ignore[attr-defined]

    def log_message(self, *args) -> None:  # keep test output clean
        pass

    def _send(self, code: int, payload: dict | list) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b"{}"
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise ValueError("request body is not valid JSON")
        if not isinstance(doc, dict):
            raise ValueError("request body must be a JSON object")
        return doc

    def do_GET(self) -> None:
        parts = [p for p in self.path.split("/") if p]
        if parts == ["contracts"]:
            self._send(200, [r.to_json() for r in self.store.records()])
            return
        if len(parts) == 2 and parts[0] == "contracts" and parts[1].isdigit():
            record = self.store.get(int(parts[1]))
            if record is None:
                self._send(404, {"error": f"no contract with id {parts[1]}"})
            else:
                self._send(200, record.to_json())
            return
        if parts == ["preorder"]:
            self._send(200, {"edges": self.store.snapshot.index.edges_json()})
            return
        self._send(404, {"error": f"unknown path {self.path}"})

    def do_POST(self) -> None:
        parts = [p for p in self.path.split("/") if p]
        try:
            doc = self._body()
            if parts == ["contracts"]:
                name = doc.get("name")
                text = doc.get("contract")
                if not isinstance(name, str) or not isinstance(text, str):
                    raise ValueError("expected string fields 'name' and 'contract'")
                record = self.store.register(name, text)
                self._send(201, {"id": record.id})
                return
            if parts == ["query"]:
                text = doc.get("client")
                if not isinstance(text, str):
                    raise ValueError("expected string field 'client'")
                matches = self.store.query(text)
                self._send(200, {"matches": [{"id": r.id, "name": r.name} for r in matches]})
                return
        except (ContractError, ValueError) as exc:
            self._send(400, {"error": str(exc)})
            return
        self._send(404, {"error": f"unknown path {self.path}"})

    def do_DELETE(self) -> None:
        parts = [p for p in self.path.split("/") if p]
        if len(parts) == 2 and parts[0] == "contracts" and parts[1].isdigit():
            if self.store.delete(int(parts[1])):
                self._send(200, {"deleted": int(parts[1])})
            else:
                self._send(404, {"error": f"no contract with id {parts[1]}"})
            return
        self._send(404, {"error": f"unknown path {self.path}"})


def make_http_server(store: ContractStore, host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), _Handler)
    server.store = store  # type: ignore[attr-defined]
    return server
