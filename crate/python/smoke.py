"""Smoke test for the smart_rule_py extension module."""

import json
import math

import smart_rule_py as sr


def main():
    assert math.isclose(sr.majority_error(0.1, 3), 0.1224, abs_tol=1e-15)
    assert math.isclose(sr.majority_error(0.1, 1), 0.18, abs_tol=1e-15)
    assert sr.taylor_coeff(5) == 10
    assert math.isclose(sr.binomial_inside(0.5, 3, 0.25), 0.75, abs_tol=1e-15)
    cert = sr.find_n(3, 0.25)
    assert cert["big_n"] == 5, cert
    try:
        sr.majority_error(0.1, 4)
    except ValueError:
        pass
    else:
        raise AssertionError("even n accepted")

    problem = sr.LearningProblem.halves(0.1, 0.9)
    assert math.isclose(problem.bayes_error(), 0.1, abs_tol=1e-12)
    same = sr.LearningProblem(problem.to_json())
    assert same.sample(7, 50) == problem.sample(7, 50)
    assert math.isclose(problem.risk([0.0, 0.5], [0, 1]), 0.1, abs_tol=1e-12)

    schedule = sr.Schedule.polynomial(5)
    assert schedule.mode == "practical" and len(schedule) == 5
    horizon = schedule.horizon()
    rule = sr.SmartRule(schedule)
    state = rule.fit(problem.sample(3, horizon))
    assert state.stage == 5
    assert state.risk(problem) < 0.5
    assert len(state.log()) == 5
    assert state.predict(0.25) in (0, 1)

    exact = sr.Schedule.exact(3)
    assert exact.update_points()[:2] == [1, 165893]
    assert exact.failure is not None

    curve = sr.expected_error_curve(
        problem, schedule.update_points(), 40, seed=11, schedule=schedule
    )
    assert curve["monotonicity"]["pass"], json.dumps(curve["monotonicity"])
    zero = sr.expected_error_curve(
        sr.LearningProblem.uniform(0.0), [1, 2, 3, 50], 20, seed=1, schedule=schedule
    )
    assert all(p["mean_risk"] == 0.0 for p in zero["points"])

    report = sr.verify("counterexample", 5)
    assert report["pass"], report
    assert report == sr.verify("counterexample", 5)

    print("smoke ok:", sr.__version__, "E L1 =", report["results"]["counterexample"]["report"]["el1"])


if __name__ == "__main__":
    main()
