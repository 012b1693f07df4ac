import numpy as np
import pandas as pd
import pytest

from didlab.errors import ErrorCode, LabError
from didlab.model import MicroPanel, PanelData, PanelSchema
from didlab.modules.ingestionLayer import PanelIngestor, load_panel_csv, micro_to_csv, write_panel_csv
from didlab.modules.preprocessingLayer import PanelValidator, aggregate_micro, nabla_means, validate_panel, window_weights


def test_scalar_treat_start_applies_to_treated_only(two_by_two):
    assert list(two_by_two.treat_start) == [1, 1, 0, 0]
    assert two_by_two.t_star == 1
    assert two_by_two.n_treated == 2 and two_by_two.n_control == 2
    assert list(two_by_two.treated_index) == [0, 1]
    assert list(two_by_two.control_index) == [2, 3]


def test_panel_arrays_are_read_only(two_by_two):
    with pytest.raises(ValueError):
        two_by_two.outcomes[0, 0] = 99.0


def test_treatment_matrix_switches_on_after_t_star(staggered_panel):
    d = staggered_panel.treatment_matrix()
    assert d[0].tolist() == [False, False, True, True, True, True]
    assert d[3].tolist() == [False, False, False, False, True, True]
    assert not d[5:].any()


def test_t_star_refuses_staggered_panel(staggered_panel):
    assert staggered_panel.start_periods == [2, 4]
    assert not staggered_panel.is_uniform
    with pytest.raises(LabError) as exc:
        staggered_panel.t_star
    assert exc.value.code == ErrorCode.STAGGERED_UNSUPPORTED


def test_subset_periods_reindexes_t_star(staggered_panel):
    sub = staggered_panel.subset_periods([2, 3, 5])
    assert sub.n_periods == 3
    assert sub.treat_start.tolist() == [1, 1, 1, 2, 2, 0, 0, 0]
    np.testing.assert_allclose(sub.outcomes, staggered_panel.outcomes[:, [1, 2, 4]])


def test_subset_periods_rejects_out_of_range(two_by_two):
    with pytest.raises(LabError) as exc:
        two_by_two.subset_periods([0, 1])
    assert exc.value.code == ErrorCode.BAD_WINDOW


def test_mismatched_design_length_is_rejected():
    with pytest.raises(ValueError):
        PanelData(outcomes=np.zeros((3, 2)), treated=[True, False], treat_start=1)


def test_validate_flags_missing_cell():
    p = PanelData(outcomes=[[1.0, np.nan], [0.0, 1.0]], treated=[True, False], treat_start=1)
    with pytest.raises(LabError) as exc:
        validate_panel(p)
    assert exc.value.code == ErrorCode.UNBALANCED
    assert exc.value.details["group"] == 1 and exc.value.details["time"] == 2


@pytest.mark.parametrize(
    "treated, start, code",
    [
        ([False, False], 1, ErrorCode.NO_TREATED),
        ([True, True], 1, ErrorCode.NO_CONTROL),
        ([True, False], 2, ErrorCode.BAD_TSTAR),
    ],
)
def test_validate_design_errors(treated, start, code):
    p = PanelData(outcomes=np.zeros((2, 2)), treated=treated, treat_start=start)
    with pytest.raises(LabError) as exc:
        validate_panel(p)
    assert exc.value.code == code


def test_all_treated_allowed_for_not_yet_treated_comparisons():
    p = PanelData(outcomes=np.zeros((2, 4)), treated=[True, True], treat_start=[1, 2])
    validate_panel(p, allow_all_treated=True)


def test_design_free_panel_only_checks_balance():
    p = PanelData(outcomes=np.zeros((3, 4)))
    assert not p.has_design
    validate_panel(p)


def test_window_weights_sum_to_zero():
    w = window_weights(5, [1, 2], [4, 5])
    np.testing.assert_allclose(w, [-0.5, -0.5, 0.0, 0.5, 0.5])


@pytest.mark.parametrize(
    "pre, post, code",
    [([], [2], ErrorCode.EMPTY_WINDOW), ([1, 2], [2, 3], ErrorCode.BAD_WINDOW), ([1], [6], ErrorCode.BAD_WINDOW)],
)
def test_window_weights_errors(pre, post, code):
    with pytest.raises(LabError) as exc:
        window_weights(5, pre, post)
    assert exc.value.code == code


def test_nabla_means_matches_window_weights(random_panel):
    p = random_panel()
    np.testing.assert_allclose(nabla_means(p, [1, 2, 3], [4, 5, 6]), p.outcomes @ window_weights(6, [1, 2, 3], [4, 5, 6]))


def test_aggregate_micro_weighted_means(micro_panel):
    p = aggregate_micro(micro_panel)
    np.testing.assert_allclose(p.outcomes, [[2.0, 3.5], [0.0, 5.0]])
    assert p.group_ids == ("a", "b")
    assert p.clusters == ("x", "y")
    assert not p.has_design


def test_aggregate_micro_rejects_zero_weight_cell(micro_panel):
    frame = micro_panel.frame.copy()
    frame.loc[frame["group"].eq("b") & frame["time"].eq(1), "weight"] = 0.0
    with pytest.raises(LabError) as exc:
        aggregate_micro(MicroPanel(frame=frame))
    assert exc.value.code == ErrorCode.EMPTY_CELL
    assert exc.value.details == {"group": "b", "time": 1, "empty_cells": 1}


def test_micro_panel_requires_core_columns():
    with pytest.raises(LabError) as exc:
        MicroPanel(frame=pd.DataFrame({"group": [1], "time": [1], "outcome": [0.0]}))
    assert exc.value.code == ErrorCode.SCHEMA_ERROR


def test_csv_round_trip_keeps_design_and_clusters(tmp_path, staggered_panel):
    p = staggered_panel._rebuild(clusters=tuple("aabbccdd"))
    path = write_panel_csv(p, tmp_path / "panel.csv")
    back = load_panel_csv(path)
    np.testing.assert_allclose(back.outcomes, p.outcomes, rtol=1e-12)
    assert back.treated.tolist() == p.treated.tolist()
    assert back.treat_start.tolist() == p.treat_start.tolist()
    assert back.clusters == p.clusters


def test_load_panel_renames_columns(tmp_path):
    path = tmp_path / "renamed.csv"
    path.write_text("state,year,y\nA,2000,1.0\nA,2001,2.0\nB,2000,0.5\nB,2001,0.0\n")
    p = load_panel_csv(path, PanelSchema(group="state", time="year", outcome="y"))
    assert p.group_ids == ("A", "B") and p.time_ids == (2000, 2001)
    np.testing.assert_allclose(p.outcomes, [[1.0, 2.0], [0.5, 0.0]])


def test_load_missing_file(tmp_path):
    with pytest.raises(LabError) as exc:
        load_panel_csv(tmp_path / "nope.csv")
    assert exc.value.code == ErrorCode.DATA_NOT_FOUND
    assert exc.value.exit_code == 2


def test_load_reports_missing_columns(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("group,outcome\n1,2.0\n")
    with pytest.raises(LabError) as exc:
        load_panel_csv(path)
    assert exc.value.code == ErrorCode.SCHEMA_ERROR
    assert exc.value.details["missing"] == ["time"]


def test_load_reports_bad_number_with_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("group,time,outcome\n1,1,2.0\n1,2,abc\n")
    with pytest.raises(LabError) as exc:
        load_panel_csv(path)
    assert exc.value.code == ErrorCode.PARSE_ERROR
    assert exc.value.details["row"] == 3


def test_load_reports_duplicate_cell(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text("group,time,outcome\n1,1,2.0\n1,1,3.0\n")
    with pytest.raises(LabError) as exc:
        load_panel_csv(path)
    assert exc.value.code == ErrorCode.PARSE_ERROR
    assert exc.value.details["row"] == 3


def test_load_reports_unbalanced_panel(tmp_path):
    path = tmp_path / "hole.csv"
    path.write_text("group,time,outcome\n1,1,2.0\n1,2,3.0\n2,1,1.0\n")
    with pytest.raises(LabError) as exc:
        load_panel_csv(path)
    assert exc.value.code == ErrorCode.UNBALANCED


def test_unit_column_gives_micro_panel(tmp_path, micro_panel):
    path = micro_to_csv(micro_panel, tmp_path / "micro.csv")
    loaded = load_panel_csv(path)
    assert isinstance(loaded, MicroPanel)
    assert loaded.has_clusters and not loaded.has_cohorts
    np.testing.assert_allclose(aggregate_micro(loaded).outcomes, [[2.0, 3.5], [0.0, 5.0]])


@pytest.mark.parametrize(
    "header, rows, column",
    [
        ("group,time,outcome,treated", ["a,1,1.0,1", "a,2,2.0,1", "b,1,0.0,0", "b,2,1.0,1"], "treated"),
        (
            "group,time,outcome,treated,treat_start",
            ["a,1,1.0,1,1", "a,2,2.0,1,2", "b,1,0.0,0,0", "b,2,1.0,0,0"],
            "treat_start",
        ),
        ("group,time,outcome,cluster", ["a,1,1.0,x", "a,2,2.0,x", "b,1,0.0,y", "b,2,1.0,z"], "cluster"),
    ],
)
def test_load_rejects_conflicting_group_attributes(tmp_path, header, rows, column):
    path = tmp_path / "conflict.csv"
    path.write_text("\n".join([header, *rows]) + "\n")
    with pytest.raises(LabError) as exc:
        load_panel_csv(path)
    assert exc.value.code == ErrorCode.PARSE_ERROR
    assert exc.value.details["column"] == column
    assert exc.value.details["row"] in (3, 5)


def test_conflict_reports_first_offending_file_row(tmp_path):
    path = tmp_path / "conflict.csv"
    path.write_text("group,time,outcome,treated\nb,1,0.0,0\na,1,1.0,1\nb,2,1.0,1\na,2,2.0,0\n")
    with pytest.raises(LabError) as exc:
        load_panel_csv(path)
    assert exc.value.details == {"group": "b", "row": 4, "column": "treated"}
    assert exc.value.exit_code == 2


def test_missing_attribute_on_one_row_is_a_conflict(tmp_path):
    path = tmp_path / "gap.csv"
    path.write_text("group,time,outcome,cluster\na,1,1.0,x\na,2,2.0,\nb,1,0.0,y\nb,2,1.0,y\n")
    with pytest.raises(LabError) as exc:
        load_panel_csv(path)
    assert exc.value.details == {"group": "a", "row": 3, "column": "cluster"}


def test_aggregate_rejects_units_disagreeing_on_cluster(micro_panel):
    frame = micro_panel.frame.copy()
    frame.loc[6, "cluster"] = "z"
    with pytest.raises(LabError) as exc:
        aggregate_micro(MicroPanel(frame=frame))
    assert exc.value.code == ErrorCode.PARSE_ERROR
    assert exc.value.details == {"group": "b", "row": 8, "column": "cluster"}


def test_ingestor_keeps_schema_across_calls(tmp_path):
    ingestor = PanelIngestor(PanelSchema(group="state", time="year", outcome="y"))
    first, second = tmp_path / "one.csv", tmp_path / "two.csv"
    first.write_text("state,year,y\nA,1,1.0\nA,2,2.0\nB,1,0.5\nB,2,0.0\n")
    second.write_text("state,year,y\nC,1,3.0\nC,2,4.0\nD,1,1.0\nD,2,0.0\n")
    assert ingestor.load(first).group_ids == ("A", "B")
    assert ingestor.load(second).group_ids == ("C", "D")
    assert ingestor.schema.group == "state"


def test_ingestor_writes_through_its_validator(tmp_path, staggered_panel):
    validator = PanelValidator()
    ingestor = PanelIngestor(validator=validator)
    assert ingestor.validator is validator
    back = ingestor.load(ingestor.write(staggered_panel, tmp_path / "p.csv"))
    assert back.treat_start.tolist() == staggered_panel.treat_start.tolist()


def test_validator_methods_match_module_functions(random_panel):
    p = random_panel()
    validator = PanelValidator()
    validator.validate(p)
    np.testing.assert_allclose(validator.nabla_means(p, [1, 2], [5, 6]), nabla_means(p, [1, 2], [5, 6]))
    np.testing.assert_array_equal(PanelValidator.window_weights(6, [1], [6]), window_weights(6, [1], [6]))
