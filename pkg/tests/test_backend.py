from __future__ import annotations

import itertools
import math
import random

import pytest

from optverify.backend import (
    DEFAULT_BACKEND,
    Constraint,
    ModelSpec,
    Objective,
    SolveParams,
    Variable,
    code_to_status,
    get_backend,
    status_to_code,
)
from optverify.errors import BackendError, NotInfeasible


def _model(variables, constraints, objective=None):
    return ModelSpec(
        variables=list(variables),
        constraints=list(constraints),
        objective=objective or Objective(),
    )


def test_min_with_lower_bound_constraint():
    m = _model(
        [Variable("x", lower=-math.inf)],
        [Constraint("lb", {"x": 1.0}, ">=", 3.0)],
        Objective("min", {"x": 1.0}),
    )
    res = DEFAULT_BACKEND.solve(m)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(3.0)
    assert res.values["x"] == pytest.approx(3.0)


def test_infeasible_pair():
    m = _model(
        [Variable("x", lower=-math.inf)],
        [Constraint("ge1", {"x": 1.0}, ">=", 1.0),
         Constraint("le0", {"x": 1.0}, "<=", 0.0)],
    )
    assert DEFAULT_BACKEND.solve(m).status == "infeasible"


def test_unbounded_reports_ray_variable():
    m = _model(
        [Variable("x", lower=-math.inf)],
        [],
        Objective("max", {"x": 1.0}),
    )
    res = DEFAULT_BACKEND.solve(m)
    assert res.status == "unbounded"
    assert "x" in res.ray_vars


def test_maximize_sign_handling():
    m = _model(
        [Variable("x", lower=0.0, upper=10.0)],
        [],
        Objective("max", {"x": 2.0}, constant=5.0),
    )
    res = DEFAULT_BACKEND.solve(m)
    assert res.objective == pytest.approx(25.0)


def test_integer_domain():
    m = _model(
        [Variable("n", domain="integer", lower=0.0, upper=10.0)],
        [Constraint("c", {"n": 1.0}, ">=", 2.5)],
        Objective("min", {"n": 1.0}),
    )
    res = DEFAULT_BACKEND.solve(m)
    assert res.objective == pytest.approx(3.0)


def test_solve_determinism():
    rng = random.Random(7)
    variables = [Variable(f"x{i}", lower=0.0, upper=50.0) for i in range(8)]
    constraints = [
        Constraint(
            f"c{j}",
            {f"x{i}": rng.uniform(-2, 2) for i in rng.sample(range(8), 4)},
            rng.choice(["<=", ">="]),
            rng.uniform(-5, 25),
        )
        for j in range(10)
    ]
    obj = Objective("min", {f"x{i}": rng.uniform(-1, 1) for i in range(8)})
    m = _model(variables, constraints, obj)
    first = DEFAULT_BACKEND.solve(m)
    second = DEFAULT_BACKEND.solve(m)
    assert first.status == second.status
    if first.objective is not None:
        assert abs(first.objective - second.objective) < 1e-9


def test_duplicate_variable_names_rejected():
    with pytest.raises(BackendError):
        DEFAULT_BACKEND.solve(_model(
            [Variable("x"), Variable("x")], []))


def test_unknown_variable_in_constraint_rejected():
    with pytest.raises(BackendError):
        DEFAULT_BACKEND.solve(_model(
            [Variable("x")], [Constraint("c", {"y": 1.0}, "<=", 1.0)]))


def test_bad_params_rejected():
    with pytest.raises(BackendError):
        SolveParams(time_limit_s=0)
    with pytest.raises(BackendError):
        SolveParams(mip_gap=1.5)


def test_empty_model_constant_objective():
    res = DEFAULT_BACKEND.solve(ModelSpec(objective=Objective(constant=4.2)))
    assert res.status == "optimal"
    assert res.objective == pytest.approx(4.2)


def test_status_code_mapping():
    assert status_to_code("optimal") == 2
    assert status_to_code("infeasible") == 3
    assert status_to_code("unbounded") == 5
    assert status_to_code("time_limit") == 9
    assert code_to_status(2) == "optimal"
    assert code_to_status(42) is None


def test_get_backend():
    assert get_backend("highs") is DEFAULT_BACKEND
    with pytest.raises(BackendError):
        get_backend("cplex")


# --------------------------------------------------------------------------
# IIS
# --------------------------------------------------------------------------


def test_iis_only_conflicting_pair():
    m = _model(
        [Variable("x", lower=-math.inf)],
        [Constraint("ge1", {"x": 1.0}, ">=", 1.0),
         Constraint("le0", {"x": 1.0}, "<=", 0.0),
         Constraint("ge_m5", {"x": 1.0}, ">=", -5.0)],
    )
    assert DEFAULT_BACKEND.compute_iis(m) == {"ge1", "le0"}


def test_iis_three_way_conflict_matches_bruteforce():
    # {x+y>=10, x<=2, y<=3, x>=0}: the minimal infeasible subset is the
    # first three (2+3 < 10); verified below by exhaustive search.
    m = _model(
        [Variable("x", lower=-math.inf), Variable("y", lower=-math.inf)],
        [
            Constraint("sum_ge10", {"x": 1.0, "y": 1.0}, ">=", 10.0),
            Constraint("x_le2", {"x": 1.0}, "<=", 2.0),
            Constraint("y_le3", {"y": 1.0}, "<=", 3.0),
            Constraint("x_ge0", {"x": 1.0}, ">=", 0.0),
        ],
    )
    oracle = _min_infeasible_subsets(m)
    assert {"sum_ge10", "x_le2", "y_le3"} in oracle
    assert DEFAULT_BACKEND.compute_iis(m) == {"sum_ge10", "x_le2", "y_le3"}


def test_iis_requires_infeasible_model():
    m = _model([Variable("x")], [Constraint("c", {"x": 1.0}, ">=", 1.0)])
    with pytest.raises(NotInfeasible):
        DEFAULT_BACKEND.compute_iis(m)


def _feasible(model, subset):
    probe = ModelSpec(
        variables=list(model.variables),
        constraints=[c for c in model.constraints if c.name in subset],
        objective=Objective(),
    )
    return DEFAULT_BACKEND.solve(probe).status != "infeasible"


def _min_infeasible_subsets(model):
    """All minimum-cardinality infeasible subsets (exhaustive oracle)."""
    names = [c.name for c in model.constraints]
    for size in range(1, len(names) + 1):
        hits = [set(combo) for combo in itertools.combinations(names, size)
                if not _feasible(model, set(combo))]
        if hits:
            return hits
    return []


def _random_infeasible_lp(rng: random.Random):
    """Small random LP over 2 vars, resampled until infeasible."""
    while True:
        n_vars = rng.randint(1, 2)
        variables = [Variable(f"v{i}", lower=-math.inf) for i in range(n_vars)]
        constraints = []
        for j in range(rng.randint(2, 6)):
            coeffs = {
                f"v{i}": rng.choice([-2, -1, 1, 2])
                for i in rng.sample(range(n_vars), rng.randint(1, n_vars))
            }
            constraints.append(Constraint(
                f"c{j}", coeffs, rng.choice(["<=", ">="]), rng.randint(-6, 6)))
        model = _model(variables, constraints)
        if DEFAULT_BACKEND.solve(model).status == "infeasible":
            return model


def test_iis_property_random_lps():
    """Deletion-filter output is infeasible and single-deletion feasible;
    cardinality matches the brute-force minimum on most cases."""
    rng = random.Random(20240917)
    total, cardinality_matches = 0, 0
    for _ in range(25):
        model = _random_infeasible_lp(rng)
        iis = DEFAULT_BACKEND.compute_iis(model)
        total += 1
        assert not _feasible(model, iis)
        for dropped in iis:
            assert _feasible(model, iis - {dropped})
        minimum = min(len(s) for s in _min_infeasible_subsets(model))
        if len(iis) == minimum:
            cardinality_matches += 1
    assert cardinality_matches / total >= 0.9
