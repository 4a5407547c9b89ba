"""Greedy admission variants of the centralized step.

Both variants solve one capacity-free problem over the candidates, rank
them by a closed-form score and accept the longest prefix of the ranking
that respects the clone-count and BBU caps.  A final min-power problem
fixes the powers of the accepted set.

* CAR-P ranks by transmit power (Case II, smallest first) or by saved
  relative power (Case III, largest first).
* CAR-D ranks by required rate, smallest first.
"""

from __future__ import annotations

import numpy as np

from .beamforming import Infeasible, uplink_powers_from_duality
from .car import ConicFailure, Context, _labels, build_allocation, qos, solve_beams
from .model import OH, L


def _capacity_free_powers(ctx, members, slack_mask):
    """Uplink powers (internal units) from the slacked capacity-free problem.

    Falls back to the interference-free minimum powers when the slacked
    solution cannot be mapped back to uplink powers.
    """
    H = ctx.H[members]
    try:
        V, y, _ = solve_beams(ctx, members, slack_mask)
        return uplink_powers_from_duality(V, H, ctx.r_min[members], ctx.B).powers
    except (Infeasible, ConicFailure) as exc:
        ctx.event("ranking_fallback", reason=str(exc), members=members)
        return ctx.sc.to_internal([ctx.decisions[i].p_tr_min for i in members])


def _prefix(ctx, order, count_cap, rate_cap):
    """Longest prefix of ``order`` within both caps."""
    U = ctx.cfg.cycles_per_bit
    used, out = 0.0, []
    for i in order:
        if len(out) + 1 > count_cap or used + ctx.r_min[i] * U > rate_cap:
            ctx.event("greedy_stop", at=i, accepted=len(out))
            break
        out.append(i)
        used += ctx.r_min[i] * U
    return out


def _serve_prefix(ctx, fixed, accepted, budget=None):
    """Min-power service of ``fixed + accepted``, shortening the prefix until
    feasible and, when ``budget`` is given, until every accepted UE spends
    less than its local budget."""
    accepted = list(accepted)
    while True:
        try:
            srv = qos(ctx, sorted(fixed) + sorted(accepted))
        except Infeasible:
            if not accepted:
                raise
            ctx.event("prefix_shrink", dropped=accepted.pop(), reason="infeasible")
            continue
        if budget is not None and accepted:
            pos = {u: k for k, u in enumerate(srv.members)}
            if any(srv.powers[pos[i]] > budget[i] for i in accepted):
                ctx.event("prefix_shrink", dropped=accepted.pop(), reason="local budget")
                continue
        return accepted, srv


def _greedy_case2(ctx, sc, O_H, base, key):
    cfg = sc.cfg
    oh = sorted(O_H)
    if not oh:
        return build_allocation(ctx, list(base), qos(ctx, []), "II")
    p = _capacity_free_powers(ctx, oh, np.ones(len(oh), bool))
    order = sorted(oh, key=lambda i: (key(i, p[oh.index(i)]), i))
    acc = _prefix(ctx, order, cfg.clone_capacity, cfg.bbu_capacity)
    acc, srv = _serve_prefix(ctx, [], acc)
    labels = _labels(sc.n_ues, base, oh=acc, rescheduled=[i for i in oh if i not in acc])
    return build_allocation(ctx, labels, srv, "II")


def _greedy_case3(ctx, sc, O_H, O_L, decisions, base, key):
    cfg = sc.cfg
    oh, ol = sorted(O_H), sorted(O_L)
    members = oh + ol
    slack = np.array([i in ol for i in members])
    try:
        V, _, _ = solve_beams(ctx, members, slack)
    except Infeasible:
        ctx.event("case3_oh_infeasible", reason="capacity-free problem")
        return _case2_for(ctx)(sc, oh, decisions, ctx=ctx, base_labels=base)
    try:
        p = uplink_powers_from_duality(V, ctx.H[members], ctx.r_min[members], ctx.B).powers
    except Infeasible as exc:
        ctx.event("ranking_fallback", reason=str(exc), members=members)
        p = sc.to_internal([decisions[i].p_tr_min for i in members])
    pw = dict(zip(members, p))
    pl = ctx.p_local
    cand = [i for i in ol if pw[i] <= pl[i]]
    order = sorted(cand, key=lambda i: (key(i, pw[i]), i))
    U = cfg.cycles_per_bit
    acc = _prefix(ctx, order, cfg.clone_capacity - len(oh),
                  cfg.bbu_capacity - float(np.sum(ctx.r_min[oh]) * U))
    try:
        acc, srv = _serve_prefix(ctx, oh, acc, budget=pl)
    except Infeasible:
        ctx.event("case3_oh_infeasible", reason="min-power problem for OH")
        return _case2_for(ctx)(sc, oh, decisions, ctx=ctx, base_labels=base)
    labels = _labels(sc.n_ues, base, oh=oh, ol=acc, local=[i for i in ol if i not in acc])
    return build_allocation(ctx, labels, srv, "III")


def _case2_for(ctx):
    return carp_case2 if ctx.algorithm == "CAR-P" else card_case2


def _ctx(sc, decisions, ctx, name):
    return ctx if ctx is not None else Context(sc, decisions, name)


def carp_case2(scenario, O_H, decisions, ctx=None, base_labels=None):
    ctx = _ctx(scenario, decisions, ctx, "CAR-P")
    base = base_labels or [OH if i in O_H else L for i in range(scenario.n_ues)]
    return _greedy_case2(ctx, scenario, O_H, base, key=lambda i, p: p)


def card_case2(scenario, O_H, decisions, ctx=None, base_labels=None):
    ctx = _ctx(scenario, decisions, ctx, "CAR-D")
    base = base_labels or [OH if i in O_H else L for i in range(scenario.n_ues)]
    return _greedy_case2(ctx, scenario, O_H, base, key=lambda i, p: ctx.r_min[i])


def carp_case3(scenario, O_H, O_L, decisions, ctx=None, base_labels=None):
    ctx = _ctx(scenario, decisions, ctx, "CAR-P")
    base = base_labels or [L] * scenario.n_ues
    pl = ctx.p_local
    # largest relative saving first
    return _greedy_case3(ctx, scenario, O_H, O_L, decisions, base,
                         key=lambda i, p: -(pl[i] - p) / pl[i])


def card_case3(scenario, O_H, O_L, decisions, ctx=None, base_labels=None):
    ctx = _ctx(scenario, decisions, ctx, "CAR-D")
    base = base_labels or [L] * scenario.n_ues
    return _greedy_case3(ctx, scenario, O_H, O_L, decisions, base,
                         key=lambda i, p: ctx.r_min[i])
