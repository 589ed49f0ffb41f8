import math

import pytest
from hypothesis import given, settings, strategies as st

from ssfp.milp_core import (
    LpSyntaxError,
    MilpModel,
    ModelError,
    export_lp,
    parse_lp,
    relax,
)
from ssfp.models import build_do_u
from ssfp.instances import fig2_instance
from ssfp.solver import solve_lp


def toy_model():
    m = MilpModel("toy")
    x = m.add_variable("x", "binary", objective=2.0)
    y = m.add_variable("y", "continuous", 0.0, 5.0, objective=3.0)
    m.add_constraint("c1", [(x, 1.0), (y, 2.0)], "<=", 3.0)
    m.add_constraint("c2", [(y, 1.0)], ">=", 1.0)
    return m


class TestBuilder:
    def test_handles_usable_in_constraints(self):
        m = MilpModel()
        x = m.add_variable("x_1_8_9", "binary")
        m.add_constraint("row", [(x, 1.0)], "<=", 1.0)
        assert m.num_variables == 1 and m.num_constraints == 1

    def test_duplicate_names_rejected(self):
        m = MilpModel()
        m.add_variable("x", "binary")
        with pytest.raises(ModelError):
            m.add_variable("x", "continuous")
        m.add_constraint("c", [], "=", 0.0)
        with pytest.raises(ModelError):
            m.add_constraint("c", [], "=", 0.0)

    def test_unknown_handle_rejected(self):
        m = MilpModel()
        with pytest.raises(ModelError):
            m.add_constraint("c", [(4, 1.0)], "<=", 1.0)
        with pytest.raises(ModelError):
            m.set_objective({7: 1.0})

    def test_binary_bounds_forced_to_unit_interval(self):
        m = MilpModel()
        h = m.add_variable("b", "binary", lower=-3.0, upper=9.0)
        assert (m.variables[h].lower, m.variables[h].upper) == (0.0, 1.0)

    def test_zero_coefficients_dropped_and_duplicates_merged(self):
        m = MilpModel()
        x = m.add_variable("x")
        y = m.add_variable("y")
        c = m.add_constraint("c", [(x, 1.0), (x, -1.0), (y, 2.0)], "<=", 1.0)
        assert m.constraints[c].terms == ((y, 2.0),)


class TestRelax:
    def test_binaries_become_unit_continuous(self):
        relaxed = relax(toy_model())
        kinds = {v.name: v.kind for v in relaxed.variables}
        assert kinds == {"x": "continuous", "y": "continuous"}
        assert relaxed.variables[0].upper == 1.0

    def test_idempotent_and_fixed_point_on_continuous(self):
        m = toy_model()
        once = relax(m)
        assert relax(once) == once
        continuous = MilpModel()
        continuous.add_variable("y", "continuous", 0.0, 2.0, 1.0)
        assert relax(continuous) == continuous

    def test_solutions_remain_feasible_for_the_relaxation(self):
        # relax() only widens variable kinds, so any solved point must
        # satisfy the relaxed model's rows verbatim
        from ssfp.solver import solve_milp

        m = toy_model()
        solution = solve_milp(m)
        relaxed = relax(m)
        values = [solution.values[v.name] for v in relaxed.variables]
        for con in relaxed.constraints:
            lhs = sum(coef * values[h] for h, coef in con.terms)
            if con.sense == "<=":
                assert lhs <= con.rhs + 1e-9
            elif con.sense == ">=":
                assert lhs >= con.rhs - 1e-9
            else:
                assert lhs == pytest.approx(con.rhs, abs=1e-9)
        for var, value in zip(relaxed.variables, values):
            assert var.lower - 1e-9 <= value <= var.upper + 1e-9

    def test_four_cycle_fractional_point_is_lp_feasible(self):
        # relaxing the undirected model admits the half-unit flow cycle of
        # total cost 2, strictly below the integer optimum 3
        from ssfp.instances import four_cycle_instance
        from ssfp.models import build_do_u

        built = build_do_u(four_cycle_instance())
        lp = solve_lp(relax(built.milp))
        assert lp.status == "optimal"
        assert lp.objective <= 2.0 + 1e-7


class TestLpFormat:
    def test_empty_model_round_trips(self):
        m = MilpModel()
        text = export_lp(m)
        assert "Minimize" in text and text.rstrip().endswith("End")
        assert parse_lp(text) == m

    def test_simple_row_exported_verbatim(self):
        m = MilpModel()
        x = m.add_variable("x")
        y = m.add_variable("y")
        m.add_constraint("c", [(x, 1.0), (y, 2.0)], "<=", 3.0)
        assert " c: 1 x + 2 y <= 3" in export_lp(m).splitlines()

    def test_round_trip_toy(self):
        m = toy_model()
        assert parse_lp(export_lp(m)) == m

    def test_round_trip_fig2_do_u(self):
        built = build_do_u(fig2_instance().first_stage)
        assert parse_lp(export_lp(built.milp)) == built.milp

    def test_negative_and_free_bounds(self):
        m = MilpModel()
        m.add_variable("a", "continuous", -math.inf, math.inf, -1.5)
        m.add_variable("b", "continuous", 2.0, math.inf)
        m.add_constraint("c", [(0, -2.5), (1, 1.0)], ">=", -4.0)
        assert parse_lp(export_lp(m)) == m

    def test_syntax_error_carries_line(self):
        bad = "Minimize\n obj: 1 x\nSubject To\n c1: x ?? 3\nEnd\n"
        with pytest.raises(LpSyntaxError) as err:
            parse_lp(bad)
        assert "line 4" in str(err.value)

    def test_missing_end_rejected(self):
        with pytest.raises(LpSyntaxError):
            parse_lp("Minimize\n obj:\nSubject To\n")


names = st.lists(
    st.text(alphabet="abcdxyz_", min_size=1, max_size=6).filter(lambda s: not s[0].isdigit()),
    min_size=1,
    max_size=8,
    unique=True,
)
coefs = st.floats(
    min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False
).filter(lambda c: c == 0.0 or abs(c) > 1e-9)


@settings(max_examples=80, deadline=None)
@given(data=st.data())
def test_export_parse_round_trip_random_models(data):
    m = MilpModel()
    var_names = data.draw(names)
    handles = []
    for name in var_names:
        kind = data.draw(st.sampled_from(["binary", "continuous"]))
        if kind == "binary":
            handles.append(m.add_variable(name, "binary", objective=data.draw(coefs)))
        else:
            lo = data.draw(st.floats(-100, 100, allow_nan=False))
            hi = data.draw(st.floats(-100, 100, allow_nan=False).map(lambda v: max(v, lo)))
            handles.append(m.add_variable(name, "continuous", lo, hi, data.draw(coefs)))
    n_rows = data.draw(st.integers(0, 5))
    for i in range(n_rows):
        terms = [
            (h, data.draw(coefs))
            for h in data.draw(st.lists(st.sampled_from(handles), max_size=4, unique=True))
        ]
        sense = data.draw(st.sampled_from(["<=", "=", ">="]))
        m.add_constraint(f"row{i}", terms, sense, data.draw(coefs))
    assert parse_lp(export_lp(m)) == m
