import re

import numpy as np
import pytest

from gridcert import cert
from gridcert.feeders import bundled_case_text, load_bundled, two_bus_case
from gridcert.netmodel import (BUS_PQ, BUS_SLACK, BranchRow, BusRow, CaseError,
                               GenRow, ParseError, RawCase, build_network,
                               parse_matpower, raw_case_from_json,
                               raw_case_to_json, to_matpower_text)

MINIMAL = """\
mpc.baseMVA = 100;
mpc.bus = [
1 3 0 0 0 0 1 1.0 0;
2 1 5 2 0 0 1 1.0 0;
];
mpc.branch = [
1 2 0.03 0.04;
];
mpc.gen = [
1 0 0;
];
"""


def test_parse_minimal_case():
    raw = parse_matpower(MINIMAL)
    assert raw.base_mva == 100.0
    assert len(raw.buses) == 2
    assert len(raw.branches) == 1
    assert raw.buses[0].type_code == BUS_SLACK
    assert raw.buses[1] == BusRow(id=2, type_code=BUS_PQ, Pd=5.0, Qd=2.0,
                                  Vm=1.0, Va=0.0)
    br = raw.branches[0]
    assert (br.r, br.x) == (0.03, 0.04)
    # Missing trailing columns: b -> 0, tap -> 1, shift -> 0, status -> 1.
    assert (br.b, br.tap, br.shift, br.status) == (0.0, 1.0, 0.0, 1)
    assert raw.gens[0].status == 1


def test_comments_are_ignored():
    commented = "% header comment\n" + MINIMAL.replace(
        "mpc.branch", "% another comment\nmpc.branch"
    ).replace("1 2 0.03 0.04;", "1 2 0.03 0.04; % inline comment")
    assert parse_matpower(commented) == parse_matpower(MINIMAL)


def test_rows_split_on_semicolon_or_newline():
    one_line = ("mpc.baseMVA = 10;\n"
                "mpc.bus = [1 3 0 0 0 0 1 1 0; 2 1 1 1 0 0 1 1 0];\n"
                "mpc.branch = [\n1 2 0.01 0.02\n];\n"
                "mpc.gen = [];\n")
    raw = parse_matpower(one_line)
    assert len(raw.buses) == 2
    assert len(raw.branches) == 1


def count_rows_independently(text: str, table: str) -> int:
    """Independent row count: semicolon-terminated rows of one mpc table."""
    body = re.search(rf"mpc\.{table}\s*=\s*\[(.*?)\]", text, re.DOTALL).group(1)
    body = "\n".join(ln.split("%")[0] for ln in body.splitlines())
    return sum(1 for chunk in body.split(";") if chunk.strip())


def test_bundled_33_bus_counts():
    text = bundled_case_text("case33")
    raw = parse_matpower(text)
    assert len(raw.buses) == count_rows_independently(text, "bus") == 33
    assert len(raw.branches) == count_rows_independently(text, "branch") == 32


def test_syntax_error_carries_line_number():
    bad = MINIMAL.replace("1 2 0.03 0.04;", "1 2 oops 0.04;")
    with pytest.raises(ParseError, match="line 7"):
        parse_matpower(bad)
    with pytest.raises(ParseError, match="baseMVA"):
        parse_matpower("mpc.bus = [1 3 0 0 0 0 1 1 0;];")


def test_unterminated_matrix_rejected():
    with pytest.raises(ParseError, match="unterminated"):
        parse_matpower("mpc.baseMVA = 1;\nmpc.bus = [\n1 3 0 0;\n")


def test_no_slack_rejected():
    with pytest.raises(CaseError, match="no slack"):
        parse_matpower(MINIMAL.replace("1 3 0", "1 1 0"))


def test_duplicate_bus_id_rejected():
    with pytest.raises(CaseError, match="duplicate"):
        parse_matpower(MINIMAL.replace("2 1 5 2", "1 1 5 2"))


def test_roundtrip_text_is_stable():
    for name in ("case2", "case33"):
        raw = load_bundled(name)
        assert parse_matpower(to_matpower_text(raw)) == raw


def test_roundtrip_json_mirror():
    raw = load_bundled("case33")
    assert raw_case_from_json(raw_case_to_json(raw)) == raw


def test_build_two_bus_network(case2_model):
    m = case2_model
    assert m.n == 1
    assert m.Y.shape == (1, 1)
    assert m.Y[0, 0] == pytest.approx(1.0 / complex(0.03, 0.04))
    assert m.V_zero[0] == pytest.approx(m.slack_voltage)
    assert m.s_base[0] == 0.0


def test_v_zero_is_flat_without_shunts(case2_model, case33_model,
                                       ten_bus_model):
    for m in (case2_model, case33_model, ten_bus_model):
        assert np.max(np.abs(m.V_zero - m.slack_voltage)) < 1e-12


def stamp_ybus(raw: RawCase):
    """Independent Y-bus assembly: plain per-branch stamps, no taps/shunts."""
    ids = sorted(b.id for b in raw.buses)
    pos = {b: i for i, b in enumerate(ids)}
    y = np.zeros((len(ids), len(ids)), dtype=complex)
    for br in raw.branches:
        if br.status == 0:
            continue
        ys = 1.0 / complex(br.r, br.x)
        f, t = pos[br.from_bus], pos[br.to_bus]
        y[f, f] += ys
        y[t, t] += ys
        y[f, t] -= ys
        y[t, f] -= ys
    return y, pos


def test_33_bus_admittance_against_independent_stamps(case33_model):
    raw = load_bundled("case33")
    m = case33_model
    assert m.Y.shape == (32, 32)
    assert np.allclose(m.Y, m.Y.T)
    full, pos = stamp_ybus(raw)
    pq = [pos[i] for i in m.bus_ids]
    assert np.allclose(m.Y, full[np.ix_(pq, pq)], atol=1e-14)
    assert np.allclose(m.Y_slack_col, full[pq, pos[m.slack_bus_id]], atol=1e-14)
    # Shunt-free rows of the full Y-bus sum to zero.
    assert np.max(np.abs(m.Y @ np.ones(32) + m.Y_slack_col)) < 1e-9


def test_build_is_deterministic():
    raw = load_bundled("case33")
    a = build_network(raw)
    b = build_network(raw)
    assert a.Y.tobytes() == b.Y.tobytes()
    assert a.V_zero.tobytes() == b.V_zero.tobytes()
    assert a.s_base.tobytes() == b.s_base.tobytes()


def test_bus_row_permutation_changes_nothing_downstream():
    raw = load_bundled("case33")
    rng = np.random.default_rng(11)
    order = rng.permutation(len(raw.buses))
    permuted = RawCase(base_mva=raw.base_mva,
                       buses=tuple(raw.buses[i] for i in order),
                       branches=tuple(reversed(raw.branches)), gens=raw.gens)
    a = build_network(raw)
    b = build_network(permuted)
    assert a.bus_ids == b.bus_ids
    assert np.allclose(a.Y, b.Y, atol=0)
    base_a = cert.base_point(a, a.s_base)
    base_b = cert.base_point(b, b.s_base)
    probe = 1.2 * a.s_base
    assert cert.certify(base_a, probe).lhs == pytest.approx(
        cert.certify(base_b, probe).lhs, rel=1e-12)


def test_pv_bus_rejected_with_scope_error():
    raw = parse_matpower(MINIMAL.replace("2 1 5 2", "2 2 5 2"))
    with pytest.raises(CaseError, match="PQ-only scope"):
        build_network(raw)


def test_disconnected_pq_bus_rejected():
    raw = RawCase(
        base_mva=1.0,
        buses=(BusRow(1, BUS_SLACK, Vm=1.0), BusRow(2, BUS_PQ, Vm=1.0),
               BusRow(3, BUS_PQ, Vm=1.0)),
        branches=(BranchRow(1, 2, 0.01, 0.01),
                  BranchRow(2, 3, 0.01, 0.01, status=0)),
    )
    with pytest.raises(CaseError, match="not connected"):
        build_network(raw)


def test_line_charging_flag():
    raw = RawCase(
        base_mva=1.0,
        buses=(BusRow(1, BUS_SLACK, Vm=1.0), BusRow(2, BUS_PQ, Vm=1.0)),
        branches=(BranchRow(1, 2, 0.03, 0.04, b=0.2),),
    )
    off = build_network(raw)
    on = build_network(raw, include_line_charging=True)
    assert off.Y[0, 0] == pytest.approx(1.0 / complex(0.03, 0.04))
    assert on.Y[0, 0] == pytest.approx(1.0 / complex(0.03, 0.04) + 0.1j)
    # With charging the zero-injection profile is no longer flat.
    assert abs(off.V_zero[0] - 1.0) < 1e-12
    assert abs(on.V_zero[0] - 1.0) > 1e-6


def test_out_of_service_gen_dropped_and_aggregation():
    raw = RawCase(
        base_mva=2.0,
        buses=(BusRow(1, BUS_SLACK, Vm=1.0),
               BusRow(2, BUS_PQ, Pd=1.0, Qd=0.5, Vm=1.0)),
        branches=(BranchRow(1, 2, 0.01, 0.02),),
        gens=(GenRow(2, Pg=0.4, Qg=0.1), GenRow(2, Pg=0.2, Qg=0.1),
              GenRow(2, Pg=9.9, Qg=9.9, status=0)),
    )
    m = build_network(raw)
    assert m.s_base[0] == pytest.approx(complex((-1.0 + 0.6) / 2.0,
                                                (-0.5 + 0.2) / 2.0))


def test_two_bus_case_helper_matches_bundled(case2_model):
    m = build_network(two_bus_case(0.03, 0.04))
    assert m.Y[0, 0] == pytest.approx(case2_model.Y[0, 0])


def test_tap_and_shift_enter_stamps():
    raw = RawCase(
        base_mva=1.0,
        buses=(BusRow(1, BUS_SLACK, Vm=1.0), BusRow(2, BUS_PQ, Vm=1.0)),
        branches=(BranchRow(1, 2, 0.0, 0.1, tap=1.05, shift=30.0),),
    )
    m = build_network(raw)
    ys = 1.0 / 0.1j
    tau = 1.05 * np.exp(1j * np.deg2rad(30.0))
    assert m.Y[0, 0] == pytest.approx(ys)                 # bus 2 self term
    assert m.Y_slack_col[0] == pytest.approx(-ys / tau)   # bus2-slack coupling
