from __future__ import annotations

import pytest

from optverify.diagnostics import INFO, PASS, WARNING
from optverify.errors import ExtractionError, ParameterNotFound
from optverify.l2 import (
    CPT_FACTORS,
    OPT_FACTORS,
    CandidateConstraint,
    CandidateObjectiveTerm,
    build_cpt_extraction_prompt,
    build_opt_extraction_prompt,
    cpt,
    extract_constraints,
    extract_objective_terms,
    opt_test,
    perturb_parameter,
    perturb_record,
    perturb_source,
    run_l2,
)
from optverify.llm import CallableTransport, LlmClient, LlmConfig
from optverify.runtime import EXTERNAL_DICT, SELF_CONTAINED, CandidateProgram


def _client(fn):
    return LlmClient(LlmConfig(), CallableTransport(fn))


# --------------------------------------------------------------------------
# Extraction
# --------------------------------------------------------------------------

_GOOD_ARRAY = """Here you go:
```json
[
  {"description": "minimum protein requirement",
   "type": "demand", "parameters": ["min_protein"]},
  {"description": "capacity limit on production",
   "type": "capacity", "parameters": ["capacity"]}
]
```"""


def test_extract_constraints_parses_reply():
    out = extract_constraints("p", ["capacity"], _client(lambda _: _GOOD_ARRAY))
    assert out == [
        CandidateConstraint("minimum protein requirement", "demand", ("min_protein",)),
        CandidateConstraint("capacity limit on production", "capacity", ("capacity",)),
    ]


def test_extract_constraints_unparseable():
    with pytest.raises(ExtractionError):
        extract_constraints("p", [], _client(lambda _: "no constraints"))


def test_extract_truncates_to_limit():
    entries = ",".join(
        f'{{"description": "c{i}", "type": "capacity", "parameters": ["k{i}"]}}'
        for i in range(14)
    )
    out = extract_constraints("p", [], _client(lambda _: f"[{entries}]"))
    assert len(out) == 10
    assert out[0].description == "c0"


def test_extract_drops_malformed_entries():
    reply = """[
      {"description": "", "type": "capacity", "parameters": ["a"]},
      {"description": "ok", "type": "capacity", "parameters": []},
      {"description": "keep me", "type": "weird", "parameters": ["x"]},
      "just a string"
    ]"""
    out = extract_constraints("p", [], _client(lambda _: reply))
    assert len(out) == 1
    assert out[0].description == "keep me"
    assert out[0].ctype == "weird"


def test_extract_objective_terms():
    reply = """[
      {"description": "unit purchasing cost", "role": "cost", "parameters": ["unit_cost"]},
      {"description": "sales revenue per unit", "role": "revenue", "parameters": ["selling_price"]}
    ]"""
    out = extract_objective_terms("p", [], _client(lambda _: reply))
    assert out[0].role == "cost"
    assert out[1].role == "revenue"


def test_extract_empty_array_gives_empty_list():
    assert extract_objective_terms("p", [], _client(lambda _: "[]")) == []


def test_extraction_prompts_carry_problem_and_keys():
    text = build_cpt_extraction_prompt("THE PROBLEM", ["a", "b"])
    assert "THE PROBLEM" in text
    assert "['a', 'b']" in text
    assert "KEY CONSTRAINTS" in text
    text = build_opt_extraction_prompt("THE PROBLEM", ["a"])
    assert "KEY OBJECTIVE" in text
    assert "MUST appear in the objective" in text


def test_factor_tables_are_total():
    assert CPT_FACTORS.get("capacity") == 0.001
    assert CPT_FACTORS.get("demand") == 100.0
    assert CPT_FACTORS.get("unknown-kind", CPT_FACTORS["other"]) == 0.01
    assert OPT_FACTORS.get("cost") == 0.001
    assert OPT_FACTORS.get("revenue") == 100.0


# --------------------------------------------------------------------------
# Strategy 1: record perturbation
# --------------------------------------------------------------------------


def test_perturb_record_scales_map_values():
    record = {"cold_capacity": {"DC1": 100.0, "DC2": 50.0}, "other": 1}
    out = perturb_record(record, "cold_capacity", 0.001)
    assert out["cold_capacity"] == {"DC1": 0.1, "DC2": 0.05}
    assert out["other"] == 1
    assert record["cold_capacity"]["DC1"] == 100.0  # original untouched


def test_perturb_record_finds_nested_key():
    record = {"costs": {"inventory": {"A": 2.0}, "waste": {"A": 3.0}}}
    out = perturb_record(record, "inventory", 10.0)
    assert out["costs"]["inventory"]["A"] == 20.0
    assert out["costs"]["waste"]["A"] == 3.0


def test_perturb_record_dotted_path():
    record = {"costs": {"inventory": {"A": 2.0}}}
    out = perturb_record(record, "costs.inventory", 0.5)
    assert out["costs"]["inventory"]["A"] == 1.0


def test_perturb_record_scales_arrays_elementwise():
    record = {"demand": [1.0, 2.0, 3.0]}
    out = perturb_record(record, "demand", 100.0)
    assert out["demand"] == [100.0, 200.0, 300.0]


def test_perturb_record_normalized_match():
    record = {"coldCapacity": 4.0}
    out = perturb_record(record, "cold_capacity", 2.0)
    assert out["coldCapacity"] == 8.0


def test_perturb_record_missing_key():
    assert perturb_record({"a": 1.0}, "nope", 2.0) is None


def test_perturb_record_non_numeric_subtree():
    assert perturb_record({"name": "retail"}, "name", 2.0) is None


# --------------------------------------------------------------------------
# Strategy 2: source perturbation
# --------------------------------------------------------------------------


def test_perturb_source_scalar_literal():
    src = "capacity = 500\nprint(capacity)\n"
    out = perturb_source(src, "capacity", 0.001)
    assert "capacity = 0.5" in out
    assert "print(capacity)" in out


def test_perturb_source_list_literal():
    src = "demand = [10, 20, 30]\n"
    out = perturb_source(src, "demand", 100.0)
    assert "demand = [1000" in out


def test_perturb_source_fuzzy_snake_camel():
    src = "coldCapacity = 40\n"
    out = perturb_source(src, "cold_capacity", 0.5)
    assert "coldCapacity = 20" in out


def test_perturb_source_token_subset():
    src = "max_capacity_per_dc = 100\n"
    out = perturb_source(src, "capacity", 0.01)
    assert "max_capacity_per_dc = 1" in out


def test_perturb_source_prefers_exact_match():
    src = "capacity_limit = 7\ncapacity = 100\n"
    out = perturb_source(src, "capacity", 2.0)
    assert "capacity = 200" in out
    assert "capacity_limit = 7" in out


def test_perturb_source_no_match():
    assert perturb_source("x = 1\n", "capacity", 2.0) is None


def test_perturb_source_ignores_non_literal_assignments():
    assert perturb_source("capacity = compute()\n", "capacity", 2.0) is None


# --------------------------------------------------------------------------
# perturb_parameter dispatch
# --------------------------------------------------------------------------

# Candidate that honors data["capacity"]: objective shrinks when capacity does.
_USES_DATA = (
    "served = min(data['demand'], data['capacity'])\n"
    "print('status: 2')\n"
    "print(f\"objective: {served}\")\n"
)

# Candidate that reads data but hardcodes the capacity value.
_HARDCODES = (
    "capacity = 50\n"
    "served = min(data['demand'], capacity)\n"
    "print('status: 2')\n"
    "print(f\"objective: {served}\")\n"
)

_RECORD = {"demand": 100.0, "capacity": 50.0}


def test_strategy1_used_for_external_dict(runtime):
    prog = CandidateProgram(_USES_DATA, EXTERNAL_DICT)
    run = perturb_parameter(prog, _RECORD, "capacity", 0.001, runtime,
                            timeout_s=30, baseline_objective=50.0)
    assert run.strategy == "data"
    assert run.outcome.objective == pytest.approx(0.05)


def test_hybrid_fallback_to_source(runtime):
    prog = CandidateProgram(_HARDCODES, EXTERNAL_DICT)
    run = perturb_parameter(prog, _RECORD, "capacity", 0.001, runtime,
                            timeout_s=30, baseline_objective=50.0)
    # Data-side change moved nothing; the literal in source was scaled.
    assert run.strategy == "source"
    assert run.outcome.objective == pytest.approx(0.05)


def test_hybrid_keeps_data_result_when_source_lacks_literal(runtime):
    src = "served = data['demand'] * 0 + 7\nprint('status: 2')\nprint(f'objective: {served}')\n"
    prog = CandidateProgram(src, EXTERNAL_DICT)
    run = perturb_parameter(prog, {"demand": 3.0}, "demand", 100.0, runtime,
                            timeout_s=30, baseline_objective=7.0)
    assert run.strategy == "data"
    assert run.outcome.objective == pytest.approx(7.0)


def test_self_contained_uses_source(runtime):
    src = "capacity = 500\nprint('status: 2')\nprint(f'objective: {capacity}')\n"
    prog = CandidateProgram(src, SELF_CONTAINED)
    run = perturb_parameter(prog, None, "capacity", 0.001, runtime, timeout_s=30)
    assert run.strategy == "source"
    assert run.outcome.objective == pytest.approx(0.5)


def test_parameter_not_found_anywhere(runtime):
    prog = CandidateProgram("print('status: 2')\nprint('objective: 1')\n", SELF_CONTAINED)
    with pytest.raises(ParameterNotFound):
        perturb_parameter(prog, None, "ghost_param", 2.0, runtime, timeout_s=30)


# --------------------------------------------------------------------------
# CPT / OPT classification behaviour
# --------------------------------------------------------------------------


def _constraint(param="capacity", ctype="capacity"):
    return [CandidateConstraint(f"{param} limit", ctype, (param,))]


def test_cpt_missing_constraint_warning(runtime):
    # Ignores capacity entirely: extreme perturbation moves nothing.
    src = "print('status: 2')\nprint(f\"objective: {data['demand']}\")\n"
    prog = CandidateProgram(src, EXTERNAL_DICT)
    diags = cpt(prog, _RECORD, 100.0, _constraint(), runtime, timeout_s=30)
    assert len(diags) == 1
    assert diags[0].severity == WARNING
    assert diags[0].issue_type == "constraint_missing"
    assert "caused only 0.0% objective change" in diags[0].evidence


def test_cpt_present_constraint_passes(runtime):
    prog = CandidateProgram(_USES_DATA, EXTERNAL_DICT)
    diags = cpt(prog, _RECORD, 50.0, _constraint(), runtime, timeout_s=30)
    assert diags[0].severity == PASS
    assert diags[0].issue_type == "constraint_present"


def test_cpt_infeasible_outcome_passes(runtime):
    src = (
        "print('status: 3' if data['capacity'] < 1 else 'status: 2')\n"
        "print('objective: 10')\n"
    )
    prog = CandidateProgram(src, EXTERNAL_DICT)
    diags = cpt(prog, _RECORD, 10.0, _constraint(), runtime, timeout_s=30)
    assert diags[0].severity == PASS
    assert "infeasible" in diags[0].evidence


def test_cpt_crash_is_inconclusive_info(runtime):
    src = "assert data['capacity'] >= 1\nprint('status: 2')\nprint('objective: 10')\n"
    prog = CandidateProgram(src, EXTERNAL_DICT)
    diags = cpt(prog, _RECORD, 10.0, _constraint(), runtime, timeout_s=30)
    assert diags[0].severity == INFO
    assert diags[0].issue_type == "perturbation_inconclusive"


def test_cpt_unknown_parameter_skipped_with_info(runtime):
    prog = CandidateProgram(_USES_DATA, EXTERNAL_DICT)
    diags = cpt(prog, _RECORD, 50.0,
                [CandidateConstraint("phantom", "capacity", ("ghost",))],
                runtime, timeout_s=30)
    assert diags[0].severity == INFO
    assert diags[0].issue_type == "parameter_not_found"


def test_cpt_respects_max_candidates(runtime):
    prog = CandidateProgram(_USES_DATA, EXTERNAL_DICT)
    cands = [CandidateConstraint(f"c{i}", "capacity", ("capacity",)) for i in range(12)]
    diags = cpt(prog, _RECORD, 50.0, cands, runtime, timeout_s=30)
    assert len(diags) == 10


def test_opt_missing_term_warning(runtime):
    # Holding cost absent from the "objective": scaling it changes nothing.
    src = "print('status: 2')\nprint(f\"objective: {data['purchase_cost'] * 10}\")\n"
    prog = CandidateProgram(src, EXTERNAL_DICT)
    record = {"purchase_cost": 5.0, "holding_cost": 2.0}
    terms = [CandidateObjectiveTerm("holding cost", "cost", ("holding_cost",))]
    diags = opt_test(prog, record, 50.0, terms, runtime, timeout_s=30)
    assert diags[0].severity == WARNING
    assert diags[0].issue_type == "objective_term_missing"


def test_opt_present_term_passes(runtime):
    src = "print('status: 2')\nprint(f\"objective: {data['purchase_cost'] * 10}\")\n"
    prog = CandidateProgram(src, EXTERNAL_DICT)
    record = {"purchase_cost": 5.0}
    terms = [CandidateObjectiveTerm("purchasing cost", "cost", ("purchase_cost",))]
    diags = opt_test(prog, record, 50.0, terms, runtime, timeout_s=30)
    assert diags[0].severity == PASS


def test_opt_infeasible_outcome_skipped(runtime):
    src = "print('status: 3')\n"
    prog = CandidateProgram(src, EXTERNAL_DICT)
    terms = [CandidateObjectiveTerm("cost", "cost", ("purchase_cost",))]
    diags = opt_test(prog, {"purchase_cost": 1.0}, 10.0, terms, runtime, timeout_s=30)
    assert diags == []  # skipped, no diagnostic at all


def test_run_l2_extraction_failure_degrades_to_info(runtime):
    prog = CandidateProgram(_USES_DATA, EXTERNAL_DICT)
    llm = _client(lambda payload: "I cannot help with that")
    diags = run_l2(prog, _RECORD, 50.0, "problem", llm, runtime, timeout_s=30)
    assert {d.issue_type for d in diags} == {"extraction_failed"}
    assert all(d.severity == INFO for d in diags)


def test_run_l2_full_pass(runtime):
    def scripted(payload):
        if "KEY CONSTRAINTS" in payload["user"]:
            return '[{"description": "capacity limit", "type": "capacity", "parameters": ["capacity"]}]'
        return '[{"description": "demand value", "role": "cost", "parameters": ["demand"]}]'

    prog = CandidateProgram(_USES_DATA, EXTERNAL_DICT)
    diags = run_l2(prog, _RECORD, 50.0, "problem", _client(scripted), runtime, timeout_s=30)
    layers = {d.layer for d in diags}
    assert layers == {"L2_CPT", "L2_OPT"}
