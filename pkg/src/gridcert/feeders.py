"""Bundled test feeders and a synthetic radial feeder generator.

Two cases ship with the package: the 2-bus toy feeder (r+jx = 0.03+j0.04,
zero base load) and a 33-bus, 12.66 kV radial feeder with the classic
3715 kW / 2300 kvar load pattern. Synthetic radial feeders of arbitrary
size are generated deterministically from a seed for scaling studies.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .netmodel import (BUS_PQ, BUS_SLACK, BranchRow, BusRow, GenRow, RawCase,
                       parse_matpower)


def bundled_case_text(name: str) -> str:
    """Return the text of a bundled case ('case2' or 'case33')."""
    ref = resources.files("gridcert.data").joinpath(f"{name}.m")
    try:
        return ref.read_text()
    except FileNotFoundError:
        raise KeyError(f"no bundled case named {name!r}") from None


def load_bundled(name: str) -> RawCase:
    return parse_matpower(bundled_case_text(name))


def two_bus_case(r: float, x: float, p_load: float = 0.0,
                 q_load: float = 0.0) -> RawCase:
    """A slack bus feeding one PQ bus through r+jx (p.u. on 1 MVA base)."""
    return RawCase(
        base_mva=1.0,
        buses=(BusRow(id=1, type_code=BUS_SLACK, Vm=1.0),
               BusRow(id=2, type_code=BUS_PQ, Pd=p_load, Qd=q_load, Vm=1.0)),
        branches=(BranchRow(from_bus=1, to_bus=2, r=r, x=x),),
        gens=(GenRow(bus=1),),
    )


def synthetic_radial_case(n_buses: int, seed: int = 0,
                          load_scale: float = 1.0) -> RawCase:
    """Deterministic random radial feeder with ``n_buses`` buses.

    Bus 1 is the slack; bus k >= 2 hangs off a uniformly chosen bus among
    the few preceding it, which keeps the tree shallow enough that feeders
    with 100+ buses stay comfortably solvable at base load. Impedances and
    loads are drawn in ranges typical of medium-voltage feeders (p.u. on a
    1 MVA base). ``load_scale`` scales every load.
    """
    if n_buses < 2:
        raise ValueError("need at least a slack and one PQ bus")
    rng = np.random.default_rng(seed)
    buses = [BusRow(id=1, type_code=BUS_SLACK, Vm=1.0)]
    branches = []
    for k in range(2, n_buses + 1):
        parent = int(rng.integers(max(1, k - 6), k))
        r = float(rng.uniform(0.005, 0.03))
        x = float(rng.uniform(0.005, 0.03))
        p = float(rng.uniform(0.002, 0.012)) * load_scale
        q = p * float(rng.uniform(0.3, 0.7))
        buses.append(BusRow(id=k, type_code=BUS_PQ, Pd=p, Qd=q, Vm=1.0))
        branches.append(BranchRow(from_bus=parent, to_bus=k, r=r, x=x))
    return RawCase(base_mva=1.0, buses=tuple(buses), branches=tuple(branches),
                   gens=(GenRow(bus=1),))
