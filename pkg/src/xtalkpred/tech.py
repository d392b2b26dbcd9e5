"""Synthetic technology: metal stack, driver library, reference two-net setup."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .layout import (HORIZONTAL, VERTICAL, Design, DelayTable, Driver, Layer, Net,
                     Segment, extract_coupling_pairs)

EPS0 = 8.854e-3  # fF/um
RHO = 0.04  # effective Cu resistivity incl. barrier/scattering, Ohm*um

SLEW_INDEX = (2.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0)
LOAD_INDEX = (0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0)


@dataclass(frozen=True)
class MetalSpec:
    direction: str
    width: float
    thickness: float
    ild: float
    eps_r: float


DEFAULT_STACK = (
    MetalSpec(HORIZONTAL, 0.050, 0.100, 0.100, 3.0),
    MetalSpec(VERTICAL, 0.050, 0.100, 0.100, 3.0),
    MetalSpec(HORIZONTAL, 0.080, 0.160, 0.140, 2.7),
    MetalSpec(VERTICAL, 0.080, 0.160, 0.140, 2.7),
)


def make_layer(layer_id: int, m: MetalSpec) -> Layer:
    """Electrical parameters from geometry (parallel-plate plus fringe terms)."""
    eps = EPS0 * m.eps_r
    return Layer(
        id=layer_id,
        direction=m.direction,
        M_W=m.width,
        M_T=m.thickness,
        M_H=m.ild,
        M_eps0=m.eps_r,
        r_sheet=RHO / m.thickness,
        c_area=eps * (2.0 * m.width / m.ild + 3.0),
        c_coup_unit=eps * m.thickness,
    )


def make_stack(n_layers: int = 4, specs=DEFAULT_STACK) -> dict[int, Layer]:
    return {i + 1: make_layer(i + 1, specs[i % len(specs)]) for i in range(n_layers)}


@dataclass(frozen=True)
class CellType:
    name: str
    r_drive: float  # kOhm
    d_intrinsic: float  # ps


DRIVER_LIBRARY = (
    CellType("INVX1", 3.0, 12.0),
    CellType("INVX2", 1.5, 10.0),
    CellType("INVX4", 0.75, 8.0),
)


def _ramp_rc(t, T, tau):
    """Normalized response of an RC (time constant tau) to a 0->1 ramp of duration T."""
    if t <= 0:
        return 0.0
    if t <= T:
        return (t - tau * (1.0 - math.exp(-t / tau))) / T
    return 1.0 - tau / T * (math.exp(-(t - T) / tau) - math.exp(-t / tau))


def characterize(cell: CellType, slew_index=SLEW_INDEX, load_index=LOAD_INDEX) -> DelayTable:
    """Delay/slew table of a ramp-behind-resistance driver into lumped loads.

    Delay runs from the input 50% point to the output 50% point and includes
    the intrinsic delay; slew is the output 10-90% time.
    """
    delay, slew = [], []
    for s_in in slew_index:
        T = s_in / 0.8
        drow, srow = [], []
        for c in load_index:
            tau = cell.r_drive * c
            hi = T + 40.0 * tau
            t10, t50, t90 = (brentq(lambda t, f=f: _ramp_rc(t, T, tau) - f, 0.0, hi, xtol=1e-10)
                             for f in (0.1, 0.5, 0.9))
            drow.append(cell.d_intrinsic + t50 - 0.5 * T)
            srow.append(t90 - t10)
        delay.append(tuple(drow))
        slew.append(tuple(srow))
    return DelayTable(tuple(slew_index), tuple(load_index), tuple(delay), tuple(slew))


_TABLE_CACHE: dict = {}


def cell_table(cell: CellType) -> DelayTable:
    if cell.name not in _TABLE_CACHE:
        _TABLE_CACHE[cell.name] = characterize(cell)
    return _TABLE_CACHE[cell.name]


def make_driver(net_id: int, cell: CellType, s_in: float, direction: str, at_in: float) -> Driver:
    return Driver(net_id, cell.r_drive, s_in, direction, at_in, cell_table(cell), cell.d_intrinsic)


def two_net_design(length: float = 100.0, spacing: float = 0.05, cell: CellType = DRIVER_LIBRARY[2],
                s_in: float = 20.0, sink_cap: float = 2.0, layer_id: int = 1) -> Design:
    """Victim (net 1) and aggressor (net 2) running in parallel over ``length`` um."""
    layers = make_stack()
    layer = layers[layer_id]
    pitch = spacing + layer.M_W
    segs = {
        1: Segment(1, 1, layer_id, (0.0, 0.0), (length, 0.0)),
        2: Segment(2, 2, layer_id, (0.0, pitch), (length, pitch)),
    }
    nets = {1: Net(1, "V", (1,), sink_cap), 2: Net(2, "A", (2,), sink_cap)}
    drivers = {1: make_driver(1, cell, s_in, "rise", 100.0), 2: make_driver(2, cell, s_in, "fall", 100.0)}
    return Design(layers, nets, segs, drivers, {"name": "two_net", "origin": "two_net_design"})


def two_net_config(direction: str = "opposite", segments_per_wire: int = 8, **kw):
    from .oracle import SweepConfig

    d = two_net_design(**kw)
    pairs = extract_coupling_pairs(d, 3.0 * kw.get("spacing", 0.05))
    return SweepConfig(d, 1, 2, pairs, 100.0, direction, segments_per_wire)
