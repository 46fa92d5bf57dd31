import json

import pytest

from greencancel.cancellation import (TargetError, build_system, cross_validate,
                                      derived_target_terms, reference_target_m, read_solution,
                                      solution_text, target_vector, verify_cancellation)
from greencancel.identities import ALPHA, system_text
from greencancel.linalg import FIRST, SMALLEST, augmented_rank, solve, verify
from greencancel.terms import TermContainer, canonical_key, fterm, plain


def by_key(pairs):
    out = {}
    for c, t in pairs:
        k = canonical_key(t)
        out[k] = out.get(k, 0) + c
    return {k: v for k, v in out.items() if v}


@pytest.fixture(scope="module")
def m_report():
    return verify_cancellation("m")


def test_m_case_cancels(m_report):
    rep, system, x = m_report
    assert (rep.rows, rep.cols, rep.rank) == (110, 138, 98)
    assert rep.solved and rep.verified
    assert verify(system.matrix, x, system.rhs)


def test_m_case_first_nonzero_strategy_agrees():
    rep, system, x = verify_cancellation("m", strategy=FIRST)
    assert rep.rank == 98 and rep.verified


def test_reference_target_equals_derived_target():
    # the nine reference coefficients follow from differentiating the k = 3 sources
    derived, _ = derived_target_terms("m", flow_sign=1)
    assert by_key(derived) == by_key(reference_target_m())


def test_opposite_flow_sign_is_not_the_reference_target():
    derived, _ = derived_target_terms("m", flow_sign=-1)
    assert by_key(derived) != by_key(reference_target_m())


def test_target_rows():
    system, container = build_system("m")[:2]
    assert len(system.rhs) == 9
    row = system.class_row()
    assert system.rhs[row[container.find(plain(ALPHA, [(0, 1), (0, 1)]))]] == 12
    assert system.rhs[row[container.find(plain(ALPHA, [(0, 1), (0, 3), (1, 2), (2, 3)]))]] == 72


def test_f_target_contains_shift_term():
    derived, _ = derived_target_terms("F")
    keys = by_key(derived)
    assert canonical_key(fterm(ALPHA, [[(0, 0)]])) in keys


def test_tampered_target_is_infeasible(m_report):
    rep, system, _ = m_report
    A = system.matrix
    b = dict(system.rhs)
    r = min(b)
    b[r] += 1
    out = solve(A, b, SMALLEST)
    assert not out.feasible
    assert augmented_rank(A, b) == rep.rank + 1


def test_f_case_small_start_set_solves():
    rep, system, x = verify_cancellation("F", 2, target="derived")
    if rep.solved:
        assert rep.verified
    else:
        assert rep.certificate["augmented_rank"] == rep.rank + 1


def test_report_serialization(m_report):
    rep = m_report[0]
    d = json.loads(rep.to_json(timing=False))
    assert "solve_seconds" not in d and d["rank"] == 98
    assert "rank            98" in rep.to_text()


def test_cross_validate_on_own_files(tmp_path, m_report):
    rep, system, x = m_report
    (tmp_path / "system.txt").write_text(system_text(system))
    (tmp_path / "solution.txt").write_text(solution_text(x))
    res = cross_validate(tmp_path / "system.txt", tmp_path / "solution.txt")
    assert res["verified"] and res["integers_only"]
    # dense one-value-per-line layout
    dense = "".join(f"{x.get(c, 0)}\n" for c in range(system.matrix.ncols))
    assert read_solution(dense, system.matrix.ncols) == x
    bad = dict(x)
    k = next(iter(bad))
    bad[k] += 1
    (tmp_path / "bad.txt").write_text(solution_text(bad))
    assert not cross_validate(tmp_path / "system.txt", tmp_path / "bad.txt")["verified"]


def test_missing_target_term_is_an_error():
    c = TermContainer()
    with pytest.raises(TargetError):
        target_vector(c, reference_target_m())
