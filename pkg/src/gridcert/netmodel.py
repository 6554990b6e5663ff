"""Feeder case parsing and reduced network model construction.

Input is the MATPOWER ``mpc`` text structure (the subset actually needed:
``baseMVA``, ``bus``, ``branch``, ``gen``) or an equivalent JSON mirror with
the same field names. The network model keeps only what the certificates
need: the admittance submatrix with the slack row/column removed, the slack
voltage, the zero-injection voltage profile and the per-bus net injections.

Scope is deliberately narrow: single slack bus, PQ buses only. PV buses are
rejected outright rather than converted. Bus shunts are always ignored;
branch charging is ignored unless explicitly requested.
"""

from __future__ import annotations

import cmath
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .linalg import SingularMatrixError

BUS_PQ = 1
BUS_PV = 2
BUS_SLACK = 3


class ParseError(ValueError):
    """Malformed case text; carries the 1-based source line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CaseError(ValueError):
    """Structurally invalid case (no slack, duplicate ids, PV bus, ...)."""


@dataclass(frozen=True)
class BusRow:
    id: int
    type_code: int
    Pd: float = 0.0
    Qd: float = 0.0
    Vm: float = 0.0
    Va: float = 0.0


@dataclass(frozen=True)
class BranchRow:
    from_bus: int
    to_bus: int
    r: float = 0.0
    x: float = 0.0
    b: float = 0.0
    tap: float = 1.0
    shift: float = 0.0
    status: int = 1


@dataclass(frozen=True)
class GenRow:
    bus: int
    Pg: float = 0.0
    Qg: float = 0.0
    status: int = 1


@dataclass(frozen=True)
class RawCase:
    base_mva: float
    buses: tuple[BusRow, ...]
    branches: tuple[BranchRow, ...]
    gens: tuple[GenRow, ...] = ()


def _strip_comment(line: str) -> str:
    k = line.find("%")
    return line if k < 0 else line[:k]


_ASSIGN_RE = re.compile(r"mpc\.(\w+)\s*=\s*(.*)$", re.DOTALL)
_NUM_RE = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


def _parse_number(tok: str, line: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"expected a number, got {tok!r}", line) from None


def _scan_tables(text: str) -> dict[str, object]:
    """Extract ``mpc.<name> = ...;`` assignments, tracking source lines.

    Matrices come back as lists of (row_values, line_number); scalars as
    (value_text, line_number). Rows end at ';' or at end of line.
    """
    out: dict[str, object] = {}
    name: str | None = None  # matrix currently being read, if any
    rows: list[tuple[list[float], int]] = []
    pending: list[float] = []
    pending_line = 0

    def append_tokens(seg: str, lineno: int):
        nonlocal pending_line
        for tok in seg.replace(",", " ").split():
            if not pending:
                pending_line = lineno
            if _NUM_RE.fullmatch(tok) is None:
                raise ParseError(f"expected a number, got {tok!r}", lineno)
            pending.append(float(tok))

    def close_row():
        nonlocal pending
        if pending:
            rows.append((pending, pending_line))
            pending = []

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw_line)
        while line.strip():
            if name is None:
                m = _ASSIGN_RE.search(line)
                if m is None:
                    break
                key, rest = m.group(1), m.group(2).strip()
                if rest.startswith("["):
                    name, rows, pending = key, [], []
                    line = rest[1:]
                    continue
                end = rest.find(";")
                if end < 0:
                    raise ParseError(f"missing ';' after mpc.{key}", lineno)
                out[key] = (rest[:end].strip(), lineno)
                line = rest[end + 1:]
                continue

            # Inside a bracketed matrix: consume up to ']' if present.
            close = line.find("]")
            chunk = line if close < 0 else line[:close]
            segments = chunk.split(";")
            for i, seg in enumerate(segments):
                append_tokens(seg, lineno)
                if i < len(segments) - 1:
                    close_row()
            if close < 0:
                close_row()  # newline terminates a row
                line = ""
                continue
            close_row()
            rest = line[close + 1:].lstrip()
            if not rest.startswith(";"):
                raise ParseError(f"missing ';' after mpc.{name} matrix", lineno)
            out[name] = rows
            name = None
            line = rest[1:]
    if name is not None:
        raise ParseError(f"unterminated matrix mpc.{name}", len(text.splitlines()))
    return out


def _col(row: list[float], idx1: int, default: float = 0.0) -> float:
    """1-indexed column access with MATPOWER-style trailing defaults."""
    return row[idx1 - 1] if len(row) >= idx1 else default


def parse_matpower(text: str) -> RawCase:
    """Parse MATPOWER ``mpc`` case text into a RawCase.

    Only ``baseMVA``, ``bus``, ``branch`` and ``gen`` are read; every other
    assignment is ignored. ``%`` comments may appear anywhere. Missing
    trailing columns default to 0 except branch tap (1) and branch/gen
    status (1); a tap of exactly 0 also means nominal, as in MATPOWER.
    """
    tables = _scan_tables(text)

    if "baseMVA" not in tables:
        raise ParseError("missing mpc.baseMVA assignment")
    raw_base, base_line = tables["baseMVA"]
    base_mva = _parse_number(str(raw_base), base_line)
    if not base_mva > 0:
        raise CaseError(f"baseMVA must be positive, got {base_mva}")

    if "bus" not in tables or not isinstance(tables["bus"], list):
        raise ParseError("missing mpc.bus matrix")

    buses = []
    for row, line in tables["bus"]:
        if len(row) < 2:
            raise ParseError("bus row needs at least id and type", line)
        buses.append(BusRow(
            id=int(row[0]), type_code=int(row[1]),
            Pd=_col(row, 3), Qd=_col(row, 4),
            Vm=_col(row, 8), Va=_col(row, 9),
        ))

    branches = []
    for row, line in tables.get("branch", []):
        if len(row) < 2:
            raise ParseError("branch row needs at least from and to bus", line)
        tap = _col(row, 9, 1.0)
        branches.append(BranchRow(
            from_bus=int(row[0]), to_bus=int(row[1]),
            r=_col(row, 3), x=_col(row, 4), b=_col(row, 5),
            tap=tap if tap != 0.0 else 1.0,
            shift=_col(row, 10), status=int(_col(row, 11, 1.0)),
        ))

    gens = []
    for row, line in tables.get("gen", []):
        if len(row) < 1:
            raise ParseError("gen row needs at least a bus id", line)
        gens.append(GenRow(
            bus=int(row[0]), Pg=_col(row, 2), Qg=_col(row, 3),
            status=int(_col(row, 8, 1.0)),
        ))

    raw = RawCase(base_mva=base_mva, buses=tuple(buses),
                  branches=tuple(branches), gens=tuple(gens))
    _validate_case(raw)
    return raw


def _validate_case(raw: RawCase):
    ids = [b.id for b in raw.buses]
    seen: set[int] = set()
    for i in ids:
        if i in seen:
            raise CaseError(f"duplicate bus id {i}")
        seen.add(i)
    slack = [b.id for b in raw.buses if b.type_code == BUS_SLACK]
    if not slack:
        raise CaseError("no slack bus (type code 3) in case")
    if len(slack) > 1:
        raise CaseError(f"multiple slack buses: {slack}")
    for br in raw.branches:
        for end in (br.from_bus, br.to_bus):
            if end not in seen:
                raise CaseError(f"branch endpoint {end} is not a bus")
    for g in raw.gens:
        if g.bus not in seen:
            raise CaseError(f"generator bus {g.bus} is not a bus")
    if not raw.base_mva > 0:
        raise CaseError(f"baseMVA must be positive, got {raw.base_mva}")


def to_matpower_text(raw: RawCase) -> str:
    """Serialize a RawCase to canonical MATPOWER-style text.

    Re-parsing the output yields an identical RawCase (floats are written
    with repr, which round-trips exactly).
    """
    lines = ["function mpc = case", "mpc.version = '2';",
             f"mpc.baseMVA = {raw.base_mva!r};", "mpc.bus = ["]
    for b in raw.buses:
        lines.append(f"\t{b.id}\t{b.type_code}\t{b.Pd!r}\t{b.Qd!r}"
                     f"\t0\t0\t1\t{b.Vm!r}\t{b.Va!r};")
    lines.append("];")
    lines.append("mpc.gen = [")
    for g in raw.gens:
        lines.append(f"\t{g.bus}\t{g.Pg!r}\t{g.Qg!r}\t0\t0\t0\t0\t{g.status};")
    lines.append("];")
    lines.append("mpc.branch = [")
    for br in raw.branches:
        lines.append(f"\t{br.from_bus}\t{br.to_bus}\t{br.r!r}\t{br.x!r}\t{br.b!r}"
                     f"\t0\t0\t0\t{br.tap!r}\t{br.shift!r}\t{br.status}\t-360\t360;")
    lines.append("];")
    return "\n".join(lines) + "\n"


def raw_case_to_json(raw: RawCase) -> str:
    """JSON mirror of RawCase; field names match the case structure."""
    doc = {
        "base_mva": raw.base_mva,
        "buses": [{"id": b.id, "type_code": b.type_code, "Pd": b.Pd,
                   "Qd": b.Qd, "Vm": b.Vm, "Va": b.Va} for b in raw.buses],
        "branches": [{"from": br.from_bus, "to": br.to_bus, "r": br.r,
                      "x": br.x, "b": br.b, "tap": br.tap, "shift": br.shift,
                      "status": br.status} for br in raw.branches],
        "gens": [{"bus": g.bus, "Pg": g.Pg, "Qg": g.Qg, "status": g.status}
                 for g in raw.gens],
    }
    return json.dumps(doc, indent=2)


def raw_case_from_json(text: str) -> RawCase:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON case: {exc}", exc.lineno) from exc
    try:
        raw = RawCase(
            base_mva=float(doc["base_mva"]),
            buses=tuple(BusRow(id=int(b["id"]), type_code=int(b["type_code"]),
                               Pd=float(b.get("Pd", 0.0)), Qd=float(b.get("Qd", 0.0)),
                               Vm=float(b.get("Vm", 0.0)), Va=float(b.get("Va", 0.0)))
                        for b in doc["buses"]),
            branches=tuple(BranchRow(from_bus=int(r["from"]), to_bus=int(r["to"]),
                                     r=float(r.get("r", 0.0)), x=float(r.get("x", 0.0)),
                                     b=float(r.get("b", 0.0)),
                                     tap=float(r.get("tap", 1.0)) or 1.0,
                                     shift=float(r.get("shift", 0.0)),
                                     status=int(r.get("status", 1)))
                           for r in doc["branches"]),
            gens=tuple(GenRow(bus=int(g["bus"]), Pg=float(g.get("Pg", 0.0)),
                              Qg=float(g.get("Qg", 0.0)), status=int(g.get("status", 1)))
                       for g in doc.get("gens", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"invalid JSON case structure: {exc}") from exc
    _validate_case(raw)
    return raw


def load_case(path: str | Path) -> RawCase:
    """Load a case from a ``.m`` MATPOWER file or its ``.json`` mirror."""
    p = Path(path)
    text = p.read_text()
    if p.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        return raw_case_from_json(text)
    return parse_matpower(text)


@dataclass(frozen=True)
class NetworkModel:
    """Slack-reduced network: admittance submatrix plus certificate inputs.

    ``Y`` is the PQ-bus admittance submatrix (slack row/column removed),
    ``Y_slack_col`` the couplings to the slack bus, ``V_zero`` the voltage
    profile at zero injection (solves Y V0_vec + Y_slack_col * V0 = 0) and
    ``s_base`` the per-bus net injections from the case, consumption
    negative. PQ buses are indexed by ascending bus id.
    """

    n: int
    slack_bus_id: int
    slack_voltage: complex
    Y: np.ndarray
    Y_slack_col: np.ndarray
    V_zero: np.ndarray
    s_base: np.ndarray
    bus_ids: tuple[int, ...]
    base_mva: float

    @property
    def bus_index_map(self) -> dict[int, int]:
        return {b: i for i, b in enumerate(self.bus_ids)}

    def index_of(self, bus_id: int) -> int:
        try:
            return self.bus_index_map[bus_id]
        except KeyError:
            raise KeyError(f"bus {bus_id} is not a PQ bus of this model") from None


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def build_network(raw: RawCase, include_line_charging: bool = False) -> NetworkModel:
    """Assemble the slack-reduced admittance model from a RawCase.

    Branch admittances are standard pi-model stamps with off-nominal tap and
    phase shift. Bus shunts are always ignored; branch charging ``b`` only
    enters when ``include_line_charging`` is set. Out-of-service branches and
    generators are dropped before assembly.
    """
    _validate_case(raw)

    for b in raw.buses:
        if b.type_code == BUS_PV:
            raise CaseError(
                f"bus {b.id} is PV (type 2): model is PQ-only scope; "
                "convert or remove voltage-controlled buses explicitly"
            )
        if b.type_code not in (BUS_PQ, BUS_SLACK):
            raise CaseError(f"bus {b.id} has unsupported type code {b.type_code}")

    slack = next(b for b in raw.buses if b.type_code == BUS_SLACK)
    if slack.Vm <= 0:
        raise CaseError(f"slack bus {slack.id} has non-positive voltage magnitude")
    v0 = slack.Vm * cmath.exp(1j * np.deg2rad(slack.Va))

    all_ids = [b.id for b in raw.buses]
    pq_ids = sorted(b.id for b in raw.buses if b.type_code == BUS_PQ)
    pos = {bus_id: k for k, bus_id in enumerate(sorted(all_ids))}
    nb = len(all_ids)

    ybus = np.zeros((nb, nb), dtype=np.complex128)
    adj: dict[int, list[int]] = {i: [] for i in all_ids}
    for br in raw.branches:
        if br.status == 0:
            continue
        z = complex(br.r, br.x)
        if z == 0:
            raise CaseError(f"branch {br.from_bus}-{br.to_bus} has zero impedance")
        ys = 1.0 / z
        bc = br.b if include_line_charging else 0.0
        tap = br.tap if br.tap != 0.0 else 1.0
        tau = tap * cmath.exp(1j * np.deg2rad(br.shift))
        f, t = pos[br.from_bus], pos[br.to_bus]
        ybus[f, f] += (ys + 0.5j * bc) / (tau * np.conj(tau))
        ybus[t, t] += ys + 0.5j * bc
        ybus[f, t] += -ys / np.conj(tau)
        ybus[t, f] += -ys / tau
        adj[br.from_bus].append(br.to_bus)
        adj[br.to_bus].append(br.from_bus)

    # Reachability from the slack over in-service branches.
    reached = {slack.id}
    stack = [slack.id]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in reached:
                reached.add(nxt)
                stack.append(nxt)
    dead = [i for i in pq_ids if i not in reached]
    if dead:
        raise CaseError(f"PQ buses not connected to the slack: {dead}")

    pq_pos = [pos[i] for i in pq_ids]
    y_red = ybus[np.ix_(pq_pos, pq_pos)]
    y_col = ybus[pq_pos, pos[slack.id]]

    try:
        lu, piv = scipy.linalg.lu_factor(y_red, check_finite=False)
    except (ValueError, scipy.linalg.LinAlgError) as exc:
        raise SingularMatrixError(f"reduced admittance matrix unusable: {exc}") from exc
    if y_red.size:
        tiny = np.abs(np.diag(lu)) <= (len(pq_ids) * np.finfo(float).eps
                                       * max(float(np.max(np.abs(y_red))), 1.0))
        if np.any(tiny):
            raise SingularMatrixError("reduced admittance matrix is singular",
                                      pivot_index=int(np.argmax(tiny)))
    v_zero = scipy.linalg.lu_solve((lu, piv), -y_col * v0, check_finite=False) \
        if pq_ids else np.zeros(0, dtype=np.complex128)

    pg = {i: 0.0 for i in pq_ids}
    qg = {i: 0.0 for i in pq_ids}
    for g in raw.gens:
        if g.status != 0 and g.bus in pg:
            pg[g.bus] += g.Pg
            qg[g.bus] += g.Qg
    load = {b.id: (b.Pd, b.Qd) for b in raw.buses}
    s_base = np.array(
        [complex((-load[i][0] + pg[i]) / raw.base_mva,
                 (-load[i][1] + qg[i]) / raw.base_mva) for i in pq_ids],
        dtype=np.complex128,
    )

    return NetworkModel(
        n=len(pq_ids), slack_bus_id=slack.id, slack_voltage=v0,
        Y=_freeze(y_red), Y_slack_col=_freeze(y_col),
        V_zero=_freeze(np.asarray(v_zero, dtype=np.complex128)),
        s_base=_freeze(s_base), bus_ids=tuple(pq_ids), base_mva=raw.base_mva,
    )
