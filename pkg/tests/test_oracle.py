import math
from dataclasses import replace

import numpy as np
import pytest
from conftest import line_design

from xtalkpred import oracle
from xtalkpred.layout import CouplingPair, Design, extract_coupling_pairs
from xtalkpred.oracle import (VDD, GlitchError, NoCrossingError, RampStimulus, SingularNetworkError,
                              build_network, crossing_time, default_dt, delta_delay, lumped_rc,
                              measure_delay, simulate_transient, sweep_skew, write_sweep)
from xtalkpred.tech import two_net_config, two_net_design

R, C = 1.0, 100.0  # kOhm, fF -> RC = 100 ps


def _step(direction="rise", v_high=VDD):
    return RampStimulus(0.0, 0.0, direction, 0.0, v_high)


def _lumped_delay(dt=None, direction="rise", v_high=VDD):
    net = lumped_rc(R, C, _step(direction, v_high))
    w = simulate_transient(net, dt=dt if dt is not None else R * C / 100, t_end=1000.0, vdd=v_high)
    return w, crossing_time(w.t, w.column(0), 0.5 * v_high)


def test_lumped_rc_delay_is_ln2_rc():
    _, t50 = _lumped_delay()
    assert t50 == pytest.approx(math.log(2) * R * C, rel=0.01)


def test_lumped_rc_default_dt_also_within_one_percent():
    net = lumped_rc(R, C, RampStimulus(0.0, 1e-3, "rise"))
    w = simulate_transient(net)
    assert default_dt(net) <= R * C / 50
    # the 1 fs ramp puts its own 50% point at 0.625 fs
    assert crossing_time(w.t, w.column(0), 0.5 * VDD) - 0.000625 == pytest.approx(69.31, rel=0.01)


def test_lumped_rc_matches_exponential():
    w, _ = _lumped_delay()
    exact = VDD * (1.0 - np.exp(-w.t / (R * C)))
    assert np.max(np.abs(w.column(0) - exact)) < 0.005 * VDD


def _ramp_delay(net, dt):
    w = simulate_transient(net, dt=dt, t_end=1000.0)
    return crossing_time(w.t, w.column(0), 0.5 * VDD) - net.sources[0].stimulus.t50


def test_halving_dt_moves_crossing_less_than_0p2_percent():
    net = lumped_rc(R, C, RampStimulus(0.0, 20.0, "rise"))
    dt = default_dt(net)
    a, b = (_ramp_delay(net, h) for h in (dt, dt / 2))
    assert abs(a - b) / b < 0.002


def test_zero_stimulus_stays_at_rail():
    d = two_net_design()
    pairs = extract_coupling_pairs(d, 0.15)
    net = build_network(d.nets[1], [d.nets[2]], pairs, d, 4, {1: None, 2: None})
    w = simulate_transient(net, dt=0.5, t_end=200.0)
    # net 1 rises (held low), net 2 falls (held high)
    for n, tap in net.taps.items():
        rail = 0.0 if d.drivers[n].direction == "rise" else VDD
        idx = [i for i, name in enumerate(net.names) if name.startswith(f"n{n}:")]
        assert np.all(w.v[:, idx] == pytest.approx(rail, abs=1e-12))


def test_node_identity_and_fall_mirror():
    w, t_rise = _lumped_delay()
    assert measure_delay(w, 0, 0) == 0.0
    _, t_fall = _lumped_delay(direction="fall")
    assert t_fall == pytest.approx(t_rise, rel=1e-9)


def test_scaling_rails_scales_voltages_not_delays():
    w1, t1 = _lumped_delay()
    w2, t2 = _lumped_delay(v_high=3.0 * VDD)
    assert np.allclose(w2.column(0), 3.0 * w1.column(0), atol=1e-12)
    assert t2 == pytest.approx(t1, rel=1e-9)


def test_smallest_ladder_structure():
    d = line_design([(1, (0, 0), (100, 0))], n_layers=1)
    net = build_network(d.nets[1], [], [], d, segments_per_wire=1)
    assert net.n_nodes == 2
    assert len(net.resistors) == 1 and len(net.sources) == 1
    seg = d.segments[1]
    layer = d.layers[1]
    c_wire = layer.c_area * seg.length
    assert net.cg[0] == pytest.approx(0.5 * c_wire)
    assert net.cg[1] == pytest.approx(0.5 * c_wire + d.nets[1].sink_cap)
    assert net.resistors[0][2] == pytest.approx(layer.r_sheet * 100 / layer.M_W / 1000.0)


def test_two_parallel_nets_one_coupling_cap():
    cfg = two_net_config()
    d = cfg.design
    net = build_network(d.nets[1], [d.nets[2]], cfg.pairs, d)
    assert len(cfg.pairs) == 1 and len(net.couplings) == 1


def test_pair_outside_nets_rejected():
    d = line_design([(1, (0, 0), (10, 0)), (1, (0, 0.15), (10, 0.15)), (1, (0, 0.3), (10, 0.3))], n_layers=1)
    with pytest.raises(oracle.OracleError, match="outside"):
        build_network(d.nets[1], [d.nets[2]], [CouplingPair(1, 3, 10.0, 0.25)], d)


def test_disconnected_node_names_node():
    net = lumped_rc(R, C, _step())
    bad = replace(net, n_nodes=2, cg=np.array([C, 1.0]), names=["out", "island"])
    with pytest.raises(SingularNetworkError, match="node 1"):
        simulate_transient(bad, dt=1.0, t_end=10.0)


def test_glitch_and_missing_crossing_reported():
    t = np.arange(6.0)
    with pytest.raises(NoCrossingError):
        crossing_time(t, np.zeros(6), 0.4)
    v = np.array([0.0, 0.6, 0.2, 0.6, 0.2, 0.8])
    with pytest.raises(GlitchError) as exc:
        crossing_time(t, v, 0.4, strict=True)
    assert len(exc.value.times) == 3
    assert crossing_time(t, v, 0.4) == pytest.approx(4.0 + 1.0 / 3.0)


def _two_net(direction="opposite", skew=0.0, **kw):
    cfg = two_net_config(direction=direction, **kw)
    d = cfg.design
    return delta_delay(d.nets[1], [d.nets[2]], cfg.pairs, d, [skew], [direction],
                       cfg.segments_per_wire)


def test_no_coupling_gives_zero_delta():
    d = two_net_design()
    res = delta_delay(d.nets[1], [d.nets[2]], [], d, [0.0])
    assert abs(res.delta) < 0.1
    assert res.delta == res.d_SI - res.d_noSI


def test_direction_sets_delta_sign():
    opp = _two_net("opposite")
    same = _two_net("same")
    assert opp.delta > 0
    assert same.delta < 0


def test_delta_nondecreasing_in_coupling():
    base = two_net_config()
    deltas = []
    for k in (0.5, 1.0, 1.5, 2.0):
        d = base.design
        layers = {i: replace(l, c_coup_unit=l.c_coup_unit * k) for i, l in d.layers.items()}
        d = Design(layers, d.nets, d.segments, d.drivers, d.meta)
        deltas.append(delta_delay(d.nets[1], [d.nets[2]], base.pairs, d, [0.0]).delta)
    assert all(b >= a for a, b in zip(deltas, deltas[1:]))


def test_quiet_network_relaxes_monotonically():
    cfg = two_net_config()
    d = cfg.design
    net = build_network(d.nets[1], [d.nets[2]], cfg.pairs, d, 8, {2: None})
    w = simulate_transient(net)
    sink = net.taps[1].sink
    stim_end = max(s.stimulus.t_end for s in net.sources if s.stimulus is not None)
    v = w.column(sink)[w.t > stim_end]
    assert np.all(np.diff(v) >= -1e-12)
    assert v[-1] == pytest.approx(VDD, abs=0.01 * VDD)


def test_refinement_changes_two_net_delays_little():
    base = _two_net()
    finer = _two_net(segments_per_wire=16)
    assert abs(finer.d_noSI - base.d_noSI) / base.d_noSI < 0.01
    assert abs(finer.d_SI - base.d_SI) / base.d_SI < 0.01
    cfg = two_net_config()
    d = cfg.design
    net = build_network(d.nets[1], [d.nets[2]], cfg.pairs, d)
    dt = default_dt(net)
    half = delta_delay(d.nets[1], [d.nets[2]], cfg.pairs, d, [0.0], dt=dt / 2)
    assert abs(half.d_noSI - base.d_noSI) / base.d_noSI < 0.002
    assert abs(half.d_SI - base.d_SI) / base.d_SI < 0.002


@pytest.fixture(scope="module")
def sweep_rows():
    return sweep_skew(two_net_config(), 0.0, 200.0, 5.0)


def test_sweep_shape(sweep_rows, tmp_path):
    assert len(sweep_rows) == 41
    skew = np.array([r[0] for r in sweep_rows])
    delta = np.array([r[3] for r in sweep_rows])
    s_in = two_net_design().drivers[1].s_in
    peak = np.argmax(np.abs(delta))
    assert delta[peak] > 0
    assert abs(skew[peak]) <= s_in
    assert abs(delta[0]) <= 0.10 * abs(delta[peak]) and abs(delta[-1]) <= 0.10 * abs(delta[peak])
    # 15 ps step: three 5 ps grid steps
    mag = np.abs(delta)
    span = mag.max() - min(mag[0], mag[-1])
    assert np.max(np.abs(mag[3:] - mag[:-3])) >= 0.5 * span
    p = tmp_path / "s.csv"
    write_sweep(sweep_rows, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "dskew_ps,d_netV_ps,d_netA_ps,delta_ps" and len(lines) == 42


def test_sweep_tail_small(sweep_rows):
    d = two_net_design()
    net = build_network(d.nets[1], [d.nets[2]], two_net_config().pairs, d)
    _, rc_max = net.time_constants()
    reach = 2 * d.drivers[1].s_in + 3 * rc_max
    delta = np.array([r[3] for r in sweep_rows])
    peak = np.abs(delta).max()
    far = [abs(r[3]) for r in sweep_rows if abs(r[0]) > reach]
    assert far, "sweep never leaves the coupling reach"
    assert max(far) < 0.05 * peak


def test_sweep_without_pairs_is_flat():
    cfg = replace(two_net_config(), pairs=[])
    rows = sweep_skew(cfg, 60.0, 140.0, 40.0)
    assert all(abs(r[3]) < 0.1 for r in rows)
    with pytest.raises(ValueError):
        sweep_skew(cfg, 0.0, 10.0, 0.0)
