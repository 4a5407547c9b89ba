import numpy as np
import pytest
import scipy.sparse as sp

from meran import conic
from meran.conic import (BeamLayout, QuadCap, SocpProblem, beam_problem, build_rate_soc,
                         canonical_phase, problem_from_dict, rate_shortfall,
                         rate_soc_coefficient, solve)
from meran.dlda import min_tx_power

from conftest import crandn

B = 1e7


def test_rate_soc_coefficient_examples():
    assert rate_soc_coefficient(B, B) == pytest.approx(np.sqrt(0.5))
    assert rate_soc_coefficient(1e-9, B) == pytest.approx(0.0, abs=1e-6)


def test_slacked_cone_at_zero_beam_forces_slack():
    h = np.array([1.0 + 1j, 0.5])
    lay = BeamLayout(1, 2, slack_mask=[True])
    con = build_rate_soc(h, lay, 0, B, B, slack=True)
    coef = rate_soc_coefficient(B, B)
    x = lay.pack(np.zeros((1, 2)), y=np.array([coef]))
    assert con.residual(x) == pytest.approx(0.0, abs=1e-12)
    x_short = lay.pack(np.zeros((1, 2)), y=np.array([0.99 * coef]))
    assert con.residual(x_short) > 0


def test_halfspace_projection():
    # min ||v||^2 s.t. Re(h^H v) >= 1 with h = e1, written as ||0|| <= Re(v_1) - 1
    lay = BeamLayout(1, 2)
    c = np.zeros(lay.n_vars)
    c[lay.v_idx(0)[0]] = 1.0
    con = conic.SocConstraint(sp.csr_matrix((1, lay.n_vars)), np.zeros(1), c, -1.0)
    prob = SocpProblem(lay.n_vars, sp.identity(lay.n_vars), np.zeros(lay.n_vars), [con])
    sol = solve(prob)
    assert sol.status == conic.OPTIMAL
    assert np.allclose(lay.beamformers(sol.x), [[1, 0]], atol=1e-6)
    assert sol.objective_value == pytest.approx(1.0, rel=1e-6)


def test_single_user_matches_closed_form(rng):
    for _ in range(5):
        h = crandn(rng, 1, 4)
        r = rng.uniform(1e5, 1e7)
        prob, lay = beam_problem(h, [r], B)
        sol = solve(prob)
        assert sol.objective_value == pytest.approx(min_tx_power(r, h[0], 1.0, B), rel=1e-5)


def test_contradictory_cap_is_infeasible():
    h = np.array([[1.0, 0.0]], dtype=complex)
    prob, _ = beam_problem(h, [1e6], B, caps=[([1.0], -1.0)])
    assert solve(prob).status == conic.INFEASIBLE


def test_tighter_resolve_agrees(rng):
    H = crandn(rng, 3, 4)
    targets = rng.uniform(1e6, 5e6, size=3)
    prob, _ = beam_problem(H, targets, B, slack_mask=[False, True, True], big_M=1e3,
                           caps=[([1.0, 1.0, 1.0], 5.0)])
    a, b = solve(prob, tol=1e-6), solve(prob, tol=1e-7)
    assert a.status == b.status == conic.OPTIMAL
    assert a.objective_value == pytest.approx(b.objective_value, rel=1e-6)


def test_embedding_round_trip(rng):
    H = crandn(rng, 3, 5)
    V = crandn(rng, 3, 5)
    lay = BeamLayout(3, 5, slack_mask=[True, False, True])
    y = np.array([0.3, 0.0, 1.2])
    x = lay.pack(V, y)
    assert np.array_equal(lay.beamformers(x), V)
    assert np.array_equal(lay.slacks(x), y)
    targets = [1e6, 2e6, 3e6]
    prob, lay2 = beam_problem(H, targets, B, slack_mask=[True, False, True])
    coef = np.sqrt(1 - 2.0 ** (-np.array(targets) / B))
    for i, con in enumerate(prob.socs):
        direct = coef[i] * np.sqrt(np.sum(np.abs(H[i].conj() @ V.T) ** 2) + 1) \
            - np.real(np.vdot(H[i], V[i])) - y[i]
        assert con.residual(x) == pytest.approx(direct, abs=1e-10)


def test_rate_shortfall_is_the_minimal_slack(rng):
    H = crandn(rng, 3, 4)
    V = 0.3 * crandn(rng, 3, 4)
    targets = [2e6, 4e6, 1e6]
    y = rate_shortfall(H, V, targets, B)
    prob, lay = beam_problem(H, targets, B, slack_mask=[True] * 3)
    x = lay.pack(V, y)
    assert prob.max_violation(x) < 1e-10
    for i in np.nonzero(y > 0)[0]:
        y2 = y.copy()
        y2[i] *= 0.999
        assert prob.socs[i].residual(lay.pack(V, y2)) > 0


def test_canonical_phase(rng):
    H = crandn(rng, 2, 3)
    V = canonical_phase(crandn(rng, 2, 3), H)
    inner = np.sum(H.conj() * V, axis=1)
    assert np.allclose(inner.imag, 0, atol=1e-12) and np.all(inner.real >= 0)


def test_dump_and_reload(tmp_path, rng):
    H = crandn(rng, 2, 3)
    prob, _ = beam_problem(H, [1e6, 2e6], B, slack_mask=[False, True], big_M=10.0,
                           caps=[([1.0, 2.0], 3.0)])
    path = tmp_path / "p.json"
    prob.dump(path)
    import json
    back = problem_from_dict(json.loads(path.read_text()))
    a, b = solve(prob), solve(back)
    assert a.objective_value == pytest.approx(b.objective_value, rel=1e-12)


def test_quadcap_residual():
    cap = QuadCap(np.array([0, 2]), np.array([1.0, 2.0]), 3.0)
    assert cap.residual(np.array([1.0, 9.0, 1.0])) == pytest.approx(0.0)
