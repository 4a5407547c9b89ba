"""Reference points: everything local, and exhaustive search over offload sets."""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .beamforming import Infeasible
from .car import ConicFailure, Context, _labels, build_allocation, qos
from .dlda import classify
from .model import OH, OL, L, R, Allocation


class SubsetTooLarge(ValueError):
    """The offloading candidate set is too large to enumerate."""


def local_only(scenario, decisions=None) -> Allocation:
    """Every UE computes locally at its optimal frequency.

    UEs whose deadline needs more than the local CPU can deliver are
    reported as rescheduled (not completed).
    """
    if decisions is None:
        _, decisions = classify(scenario)
    ctx = Context(scenario, decisions, "Local")
    labels = [L if d.w else R for d in decisions]
    ctx.event("local_only", incomplete=[i for i, x in enumerate(labels) if x == R])
    return build_allocation(ctx, labels, None, "local")


class SubsetCache:
    """Min-power solutions per offloading subset of one scenario.

    The beamforming problem for a subset does not depend on the capacity
    limits, so sweeps over ``F^B`` or ``F^C`` can share one cache.
    """

    def __init__(self, scenario):
        self.scenario = scenario
        self.store = {}
        self.hits = 0

    def rebind(self, scenario):
        """Reuse the stored solutions for ``scenario``.

        Allowed when only capacity limits changed: the channels and the
        modelling parameters that set rate targets must be identical.
        """
        old = self.scenario
        if old is not None:
            same = (np.array_equal(old.channels, scenario.channels)
                    and old.ues == scenario.ues
                    and old.cfg.replace(clone_capacity=0, bbu_capacity=1.0)
                    == scenario.cfg.replace(clone_capacity=0, bbu_capacity=1.0))
            if not same:
                raise ValueError("scenario differs beyond capacity limits")
        self.scenario = scenario

    def get(self, ctx, members):
        if ctx.sc is not self.scenario:
            raise ValueError("cache belongs to a different scenario")
        key = tuple(members)
        if key in self.store:
            self.hits += 1
            return self.store[key]
        try:
            srv = qos(ctx, members)
        except (Infeasible, ConicFailure):
            srv = None
        self.store[key] = srv
        return srv


def exhaustive_search(scenario, decisions=None, n_cap: int | None = None,
                      cache: SubsetCache | None = None) -> Allocation:
    """Best offloading subset under the priority-lexicographic order.

    Candidates are ranked by number of OH members, then number of OL
    members, then sum power (transmit power of the subset plus local power
    of the OL UEs left out).  Subsets are visited tier by tier in that
    order, so only the first tier holding a feasible subset is solved.

    Raises
    ------
    SubsetTooLarge
        If the candidate set has more than ``n_cap`` UEs.
    """
    if decisions is None:
        cls, decisions = classify(scenario)
    else:
        from .dlda import label_of
        from .model import Classification
        cls = Classification(tuple(label_of(d) for d in decisions))
    cfg = scenario.cfg
    n_cap = cfg.n_cap if n_cap is None else n_cap
    oh, ol = cls.members(OH), cls.members(OL)
    if len(oh) + len(ol) > n_cap:
        raise SubsetTooLarge(f"|O| = {len(oh) + len(ol)} exceeds n_cap = {n_cap}")
    ctx = Context(scenario, decisions, "ES")
    cache = cache if cache is not None else SubsetCache(scenario)
    U = cfg.cycles_per_bit
    p_local_w = np.array([d.p_local_star for d in decisions])

    best = None
    solved = 0
    for a in range(len(oh), -1, -1):
        for b in range(len(ol), -1, -1):
            for s_h in combinations(oh, a):
                for s_l in combinations(ol, b):
                    S = sorted(s_h + s_l)
                    if len(S) > cfg.clone_capacity or \
                            float(np.sum(ctx.r_min[S]) * U) > cfg.bbu_capacity:
                        continue
                    srv = cache.get(ctx, S)
                    solved += 1
                    if srv is None:
                        continue
                    tx = scenario.to_watts(srv.powers)
                    pos = {u: k for k, u in enumerate(S)}
                    if any(srv.powers[pos[i]] > ctx.p_local[i] for i in s_l):
                        continue
                    total = float(tx.sum() + sum(p_local_w[i] for i in ol if i not in s_l))
                    if best is None or total < best[0]:
                        best = (total, s_h, s_l, srv)
            if best is not None:
                break
        if best is not None:
            break
    ctx.event("es", candidates=2 ** (len(oh) + len(ol)), evaluated=solved,
              cache_hits=cache.hits)
    _, s_h, s_l, srv = best
    base = list(cls.labels)
    labels = _labels(scenario.n_ues, base, oh=s_h, ol=s_l,
                     local=[i for i in ol if i not in s_l],
                     rescheduled=[i for i in oh if i not in s_h])
    if not s_h and not s_l:
        srv = qos(ctx, [])
    return build_allocation(ctx, labels, srv, "ES")
