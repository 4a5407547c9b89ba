"""Centralized admission and resource allocation (CAR).

The dispatcher picks one of three regimes from the pooled capacity:

* Case I   - everybody fits: min-power beamforming, then prune optional
             offloaders whose transmit power exceeds their local power.
* Case II  - not even the mandatory set fits: admission control on OH by
             successive convex approximation of the smoothed l0 caps.
* Case III - OH fits: OH is served with hard rate targets and OL competes
             for the residual capacity through the same SCA machinery.

Internally powers are in ``cfg.power_unit`` watts with unit noise; they
are converted to watts when the :class:`~meran.model.Allocation` is built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .beamforming import (Infeasible, fixed_point_power, rate_uplink, sinr_all,
                          uplink_powers_from_duality)
from .dlda import classify
from .model import OH, OL, L, R, Allocation, Classification


class ConicFailure(RuntimeError):
    """A convex subproblem did not return an optimal point."""


def f_theta(x, theta):
    """Fractional surrogate ``x / (x + theta)`` of the l0 indicator."""
    return x / (x + theta)


def f_theta_grad(x, theta):
    return theta / (x + theta) ** 2


@dataclass
class SCAState:
    v: np.ndarray
    y: np.ndarray
    alpha: np.ndarray
    t: int = 0
    objective_trace: list = field(default_factory=list)
    status: str = conic.OPTIMAL


@dataclass
class PruneRecord:
    set_id: str
    members: list
    scores: list


@dataclass
class QosResult:
    """Minimum-power service of a fixed offloading set (internal units)."""

    members: list
    powers: np.ndarray
    receivers: np.ndarray
    V: np.ndarray
    vd_power: float


class Context:
    """Per-run view of a scenario: targets, local powers and the log."""

    def __init__(self, scenario, decisions, algorithm="CAR"):
        self.sc = scenario
        self.cfg = scenario.cfg
        self.decisions = decisions
        self.algorithm = algorithm
        self.H = scenario.channels
        self.B = self.cfg.bandwidth
        self.r_min = np.array([d.r_min for d in decisions])
        # local power at the optimal frequency, internal units
        self.p_local = scenario.to_internal([d.p_local_star for d in decisions])
        budgets = [d.p_local_max for d in decisions if math.isfinite(d.p_local_max)]
        if self.cfg.big_M is not None:
            self.big_M = float(self.cfg.big_M)
        else:
            peak = max(budgets, default=1.0) / self.cfg.power_unit
            self.big_M = 1e3 * scenario.n_ues * peak
        self.log = []
        self.traces = []
        self.n_socp = 0
        self.service = None

    def event(self, name, **data):
        self.log.append({"event": name, **_plain(data)})

    def solve(self, prob):
        self.n_socp += 1
        return conic.solve(prob, tol=self.cfg.solver_tol)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def _span(H):
    """Orthonormal basis of the channel span and reduced channel rows.

    Optimal beamformers of the min-power problems lie in this span, so
    solving in reduced coordinates is exact and cheaper.
    """
    Q, _ = np.linalg.qr(H.T)
    return Q, (Q.conj().T @ H.T).T


def solve_beams(ctx, members, slack_mask=None, caps=()):
    """Virtual-downlink problem over ``members``; returns (V, y, objective)."""
    H = ctx.H[members]
    Q, Hr = _span(H)
    prob, lay = conic.beam_problem(Hr, ctx.r_min[members], ctx.B, slack_mask,
                                   ctx.big_M, caps)
    sol = ctx.solve(prob)
    if sol.status == conic.INFEASIBLE:
        raise Infeasible(f"beamforming problem infeasible for {list(members)}")
    if sol.status != conic.OPTIMAL:
        raise ConicFailure(sol.info)
    V = conic.canonical_phase(lay.beamformers(sol.x) @ Q.T, H)
    return V, lay.slacks(sol.x), sol.objective_value


def qos(ctx, members) -> QosResult:
    """Min-power beamforming with hard rate targets plus uplink power
    recovery through the frozen-receiver power update."""
    members = list(members)
    if not members:
        return QosResult([], np.zeros(0), np.zeros((0, ctx.H.shape[1]), complex),
                         np.zeros((0, ctx.H.shape[1]), complex), 0.0)
    V, _, _ = solve_beams(ctx, members)
    H = ctx.H[members]
    try:
        pc = uplink_powers_from_duality(V, H, ctx.r_min[members], ctx.B)
    except Infeasible:
        # solver inaccuracy can leave v slightly short of the targets
        pc = fixed_point_power(H, ctx.r_min[members], ctx.B, ctx.cfg.fp_tol,
                               ctx.cfg.fp_max_iters)
        ctx.event("duality_fallback", members=members)
    return QosResult(members, pc.powers, pc.beamformers, V,
                     float(np.sum(np.abs(V) ** 2)))


def build_allocation(ctx, labels, service: QosResult | None, case: str) -> Allocation:
    sc = ctx.sc
    n, d = ctx.H.shape
    tx = np.zeros(n)
    M = np.zeros((n, d), dtype=complex)
    rates = np.zeros(n)
    if service is not None and service.members:
        idx = service.members
        tx[idx] = sc.to_watts(service.powers)
        M[idx] = service.receivers
        rates[idx] = rate_uplink(sinr_all(service.powers, service.receivers, ctx.H[idx]),
                                 ctx.B)
    local = np.zeros(n)
    for i, lab in enumerate(labels):
        if lab == L:
            local[i] = ctx.decisions[i].p_local_star
    cls = Classification(tuple(labels))
    off = cls.offloading
    if service is not None and sorted(off) != sorted(service.members):
        raise AssertionError("offloading labels disagree with the served set")
    total = float(tx[off].sum() + local[[i for i, x in enumerate(labels) if x == L]].sum())
    ctx.event("result", case=case, accepted=off, rejected=cls.members(R))
    ctx.service = service
    return Allocation(cls, tx, M, rates, local, total,
                      np.array([x != R for x in labels]), ctx.algorithm, case,
                      ctx.log, ctx.traces)


def _labels(n, base, oh=(), ol=(), local=(), rescheduled=()):
    labels = list(base)
    for i in oh:
        labels[i] = OH
    for i in ol:
        labels[i] = OL
    for i in local:
        labels[i] = L
    for i in rescheduled:
        labels[i] = R
    return labels


def fits(ctx, members, count_cap, rate_cap) -> bool:
    U = ctx.cfg.cycles_per_bit
    return len(members) <= count_cap and float(np.sum(ctx.r_min[list(members)]) * U) <= rate_cap


def argmax_lowest(scores: dict) -> int:
    """Key with the largest score; ties go to the lowest UE index."""
    best = max(scores.values())
    return min(i for i, s in scores.items() if s == best)


# -- Case I ------------------------------------------------------------------

class CaseIInfeasible(Infeasible):
    pass


def case1(scenario, O_H, O_L, decisions, ctx=None, base_labels=None) -> Allocation:
    """Serve every offloader; prune OL UEs that would spend more than locally."""
    ctx = ctx or Context(scenario, decisions)
    base = base_labels or [OH if i in O_H else L for i in range(scenario.n_ues)]
    ol = sorted(O_L)
    to_local = []
    while True:
        members = sorted(O_H) + ol
        try:
            srv = qos(ctx, members)
        except Infeasible:
            if ol:
                ctx.event("case1_infeasible_demote_OL", demoted=ol)
                to_local += ol
                ol = []
                continue
            raise CaseIInfeasible("OH set alone is infeasible")
        pos = {u: k for k, u in enumerate(members)}
        b1 = {i: (srv.powers[pos[i]] - ctx.p_local[i]) / ctx.p_local[i]
              for i in ol if srv.powers[pos[i]] >= ctx.p_local[i]}
        if not b1:
            break
        worst = argmax_lowest(b1)
        ctx.event("prune", set_id="B1", members=sorted(b1),
                  scores=[b1[i] for i in sorted(b1)], removed=worst)
        ol.remove(worst)
        to_local.append(worst)
    labels = _labels(scenario.n_ues, base, oh=O_H, ol=ol, local=to_local)
    return build_allocation(ctx, labels, srv, "I")


# -- SCA machinery -----------------------------------------------------------

def run_sca(ctx, members, slack_mask, cap_mask, count_cap, rate_cap, v0=None) -> SCAState:
    """Successive convex approximation of the smoothed capacity caps.

    ``members`` are scenario UE indices; ``cap_mask`` marks members subject
    to the clone-count cap ``count_cap`` and BBU cap ``rate_cap``.  The
    concave surrogate is replaced by its tangent at the current iterate, so
    every iterate is feasible for the smoothed problem and the objective
    trace does not increase.
    """
    cfg = ctx.cfg
    theta = cfg.theta
    members = list(members)
    n = len(members)
    H = ctx.H[members]
    Q, Hr = _span(H)
    cap_mask = np.asarray(cap_mask, bool)
    U = cfg.cycles_per_bit
    rates = ctx.r_min[members] * U
    rate_scale = max(float(np.max(rates[cap_mask], initial=0.0)), 1.0)
    V = np.zeros((n, H.shape[1]), complex) if v0 is None else np.array(v0, complex)
    st = SCAState(V, np.zeros(n), np.zeros(n))
    prev = None
    statuses = []
    for t in range(1, cfg.sca_max_iters + 1):
        x_t = np.sum(np.abs(V) ** 2, axis=1)
        alpha = np.where(cap_mask, f_theta_grad(x_t, theta), 0.0)
        const = np.where(cap_mask, f_theta(x_t, theta) - alpha * x_t, 0.0)
        caps = [
            (alpha, count_cap - const.sum()),
            (alpha * rates / rate_scale, (rate_cap - np.dot(rates, const)) / rate_scale),
        ]
        prob, lay = conic.beam_problem(Hr, ctx.r_min[members], ctx.B, slack_mask,
                                       ctx.big_M, caps)
        sol = ctx.solve(prob)
        if sol.status != conic.OPTIMAL:
            st.status = sol.status
            st.t = t - 1
            ctx.event("sca_failure", t=t, status=sol.status, info=sol.info)
            raise ConicFailure(f"SCA subproblem {t}: {sol.status} ({sol.info})")
        statuses.append(sol.info)
        V = lay.beamformers(sol.x) @ Q.T
        # objective with the exact minimal slacks, free of solver residuals
        y = np.where(slack_mask, conic.rate_shortfall(H, V, ctx.r_min[members], ctx.B), 0.0)
        obj = float(np.sum(np.abs(V) ** 2) + ctx.big_M * y.sum())
        st.objective_trace.append(obj)
        st.v, st.y, st.alpha, st.t = V, y, alpha, t
        if prev is not None and abs(prev - obj) <= cfg.sca_tol * max(abs(prev), 1e-12):
            break
        prev = obj
    st.v = conic.canonical_phase(st.v, H)
    ctx.traces.append(list(st.objective_trace))
    ctx.event("sca", members=members, iterations=st.t, trace=st.objective_trace,
              solver_status=statuses,
              power=np.sum(np.abs(st.v) ** 2, axis=1))
    return st


def admit(ctx, fixed, candidates, strength, count_cap, rate_cap):
    """Largest-strength-first admission of SCA survivors under the hard caps,
    shrunk until the min-power problem for the set is feasible.

    Returns (admitted candidates, QosResult for ``fixed + admitted``).
    """
    order = sorted(candidates, key=lambda i: (-strength[i], i))
    U = ctx.cfg.cycles_per_bit
    keep, used = [], 0.0
    for i in order:
        if len(keep) + 1 <= count_cap and used + ctx.r_min[i] * U <= rate_cap:
            keep.append(i)
            used += ctx.r_min[i] * U
    dropped_caps = [i for i in order if i not in keep]
    if dropped_caps:
        ctx.event("cap_repair", dropped=dropped_caps)
    while True:
        try:
            return keep, qos(ctx, sorted(fixed) + sorted(keep))
        except Infeasible:
            if not keep:
                raise
            weakest = keep.pop()
            ctx.event("feasibility_repair", dropped=weakest)


def _better(a: Allocation, b: Allocation, oh) -> bool:
    """Priority-lexicographic comparison: OH completions, then all
    completions, then sum power."""
    def key(x):
        return (-int(np.sum(x.completed[oh])), -x.completed_count(), x.sum_power)
    return key(a) < key(b)


def _greedy_starts(ctx, run_greedy):
    """Run CAR-P and CAR-D as SCA starting points.

    Returns ``[(name, allocation, service)]``.  Each greedy solution is
    feasible for the smoothed caps because every surrogate term is below
    one, so it is a valid first linearization point.
    """
    from . import fast

    out = []
    for name, fns in (("CAR-P", (fast.carp_case2, fast.carp_case3)),
                      ("CAR-D", (fast.card_case2, fast.card_case3))):
        saved = ctx.algorithm
        ctx.algorithm = name
        ctx.event("sca_start", source=name)
        try:
            alloc = run_greedy(*fns)
        finally:
            ctx.algorithm = saved
        alloc.algorithm = saved
        out.append((name, alloc, ctx.service))
    return out


def _start_beams(members, service, d):
    V = np.zeros((len(members), d), dtype=complex)
    pos = {u: k for k, u in enumerate(members)}
    for k, u in enumerate(service.members):
        if u in pos:
            V[pos[u]] = service.V[k]
    return V


def _multistart(ctx, oh, run_greedy, refine, case):
    """Greedy points, their SCA refinements, best of all by priority order."""
    cfg = ctx.cfg
    if cfg.sca_init == "zero":
        return refine(None)
    best = None
    for name, alloc, srv in _greedy_starts(ctx, run_greedy):
        cands = [alloc]
        if alloc.case == case and srv is not None:
            try:
                cands.append(refine(srv))
            except (ConicFailure, Infeasible) as exc:
                ctx.event("degraded_mode", reason=str(exc), fallback=name)
        for c in cands:
            if best is None or _better(c, best, oh):
                best = c
    ctx.event("sca_select", case=best.case, accepted=best.accepted,
              sum_power=best.sum_power)
    return best


# -- Case II -----------------------------------------------------------------

def case2(scenario, O_H, decisions, ctx=None, base_labels=None) -> Allocation:
    """Admission control among OH; rejected UEs are rescheduled."""
    ctx = ctx or Context(scenario, decisions)
    base = base_labels or [L] * scenario.n_ues
    oh = sorted(O_H)
    if not oh:
        return build_allocation(ctx, list(base), qos(ctx, []), "II")

    def greedy(c2, c3):
        return c2(scenario, oh, decisions, ctx=ctx, base_labels=base)

    def refine(srv):
        v0 = None if srv is None else _start_beams(oh, srv, ctx.H.shape[1])
        return _case2_sca(ctx, scenario, oh, decisions, base, v0)

    return _multistart(ctx, oh, greedy, refine, "II")


def _case2_sca(ctx, scenario, oh, decisions, base, v0):
    cfg = scenario.cfg
    if cfg.clone_capacity <= 0 or cfg.bbu_capacity <= 0:
        ctx.event("no_capacity", rescheduled=oh)
        return build_allocation(ctx, _labels(scenario.n_ues, base, rescheduled=oh),
                                qos(ctx, []), "II")
    try:
        st = run_sca(ctx, oh, np.ones(len(oh), bool), np.ones(len(oh), bool),
                     cfg.clone_capacity, cfg.bbu_capacity, v0)
    except (ConicFailure, Infeasible) as exc:
        from .fast import card_case2
        ctx.event("degraded_mode", reason=str(exc), fallback="CAR-D case II")
        return card_case2(scenario, oh, decisions, ctx=ctx, base_labels=base)
    power = dict(zip(oh, np.sum(np.abs(st.v) ** 2, axis=1)))
    survivors = [i for i in oh if power[i] >= cfg.zero_threshold]
    keep, srv = admit(ctx, [], survivors, power, cfg.clone_capacity, cfg.bbu_capacity)
    labels = _labels(scenario.n_ues, base, oh=keep,
                     rescheduled=[i for i in oh if i not in keep])
    return build_allocation(ctx, labels, srv, "II")


# -- Case III ----------------------------------------------------------------

def case3(scenario, O_H, O_L, decisions, ctx=None, base_labels=None) -> Allocation:
    """OH served in full; OL competes for the residual capacity."""
    ctx = ctx or Context(scenario, decisions)
    base = base_labels or [L] * scenario.n_ues
    oh, ol = sorted(O_H), sorted(O_L)

    def greedy(c2, c3):
        return c3(scenario, oh, ol, decisions, ctx=ctx, base_labels=base)

    def refine(srv):
        v0 = None if srv is None else _start_beams(oh + ol, srv, ctx.H.shape[1])
        return _case3_sca(ctx, scenario, oh, ol, decisions, base, v0)

    return _multistart(ctx, oh, greedy, refine, "III")


def _case3_sca(ctx, scenario, oh, ol, decisions, base, v_warm):
    cfg = scenario.cfg
    ol = list(ol)
    U = cfg.cycles_per_bit
    count_left = cfg.clone_capacity - len(oh)
    rate_left = cfg.bbu_capacity - float(np.sum(ctx.r_min[oh]) * U)
    to_local = []
    if count_left <= 0 or rate_left <= 0:
        # nothing left after OH: the caps force every OL beamformer to zero
        ctx.event("no_residual_capacity", to_local=ol)
        try:
            srv = qos(ctx, oh)
        except Infeasible:
            return case2(scenario, oh, decisions, ctx=ctx, base_labels=base)
        return build_allocation(ctx, _labels(scenario.n_ues, base, oh=oh, local=ol),
                                srv, "III")
    while True:
        members = oh + ol
        slack = np.array([i in ol for i in members])
        try:
            st = run_sca(ctx, members, slack, slack, count_left, rate_left, v_warm)
        except Infeasible as exc:
            ctx.event("case3_oh_infeasible", reason=str(exc))
            return case2(scenario, oh, decisions, ctx=ctx, base_labels=base)
        except ConicFailure as exc:
            from .fast import card_case3
            ctx.event("degraded_mode", reason=str(exc), fallback="CAR-D case III")
            return card_case3(scenario, oh, ol, decisions, ctx=ctx, base_labels=base)
        power = dict(zip(members, np.sum(np.abs(st.v) ** 2, axis=1)))
        survivors = [i for i in ol if power[i] >= cfg.zero_threshold]
        try:
            keep, srv = admit(ctx, oh, survivors, power, count_left, rate_left)
        except Infeasible:
            ctx.event("case3_oh_infeasible", reason="min-power problem for OH")
            return case2(scenario, oh, decisions, ctx=ctx, base_labels=base)
        pos = {u: k for k, u in enumerate(srv.members)}
        b2 = {i: (srv.powers[pos[i]] - ctx.p_local[i]) / ctx.p_local[i]
              for i in keep if srv.powers[pos[i]] >= ctx.p_local[i]}
        if not b2:
            break
        worst = argmax_lowest(b2)
        ctx.event("prune", set_id="B2", members=sorted(b2),
                  scores=[b2[i] for i in sorted(b2)], removed=worst)
        # the previous iterate minus the pruned UE still satisfies the caps
        v_warm = np.delete(st.v, members.index(worst), axis=0)
        ol.remove(worst)
        to_local.append(worst)
    to_local += [i for i in ol if i not in keep]
    labels = _labels(scenario.n_ues, base, oh=oh, ol=keep, local=to_local)
    return build_allocation(ctx, labels, srv, "III")


# -- dispatcher --------------------------------------------------------------

def select_case(ctx, O_H, O) -> str:
    cfg = ctx.cfg
    if fits(ctx, O, cfg.clone_capacity, cfg.bbu_capacity):
        return "I"
    if fits(ctx, O_H, cfg.clone_capacity, cfg.bbu_capacity):
        return "III"
    return "II"


def dispatch(scenario, classification, decisions, variant: str = "CAR") -> Allocation:
    """Centralized decision for a pre-screened scenario.

    ``variant`` selects the Case II/III solver: ``"CAR"`` (SCA),
    ``"CAR-P"`` (largest saved power first) or ``"CAR-D"`` (smallest
    required rate first).  Case I is shared.
    """
    from . import fast

    ctx = Context(scenario, decisions, variant)
    O_H = classification.members(OH)
    O_L = classification.members(OL)
    base = list(classification.labels)
    for i in O_L:
        base[i] = L
    case = select_case(ctx, O_H, O_H + O_L)
    ctx.event("dispatch", case=case, OH=O_H, OL=O_L,
              R=classification.members(R))
    solvers = {
        "CAR": (case2, case3),
        "CAR-P": (fast.carp_case2, fast.carp_case3),
        "CAR-D": (fast.card_case2, fast.card_case3),
    }
    if variant not in solvers:
        raise ValueError(f"unknown variant {variant!r}")
    c2, c3 = solvers[variant]
    if case == "I":
        try:
            return case1(scenario, O_H, O_L, decisions, ctx=ctx, base_labels=base)
        except CaseIInfeasible:
            ctx.event("case1_infeasible_route_case2")
            return c2(scenario, O_H, decisions, ctx=ctx, base_labels=base)
    if case == "III":
        return c3(scenario, O_H, O_L, decisions, ctx=ctx, base_labels=base)
    return c2(scenario, O_H, decisions, ctx=ctx, base_labels=base)


def run_car(scenario, variant: str = "CAR") -> Allocation:
    cls, decisions = classify(scenario)
    return dispatch(scenario, cls, decisions, variant)
