"""Vectorized one-step kernel for many agent lanes.

A lane is one agent in one replication. Continuous updates are computed for
all lanes at once; forced jumps inside the step are then processed one at a
time in (time, agent id) order from a heap, and each jump is delivered to
the sender's recipients, who re-check their guard from the delivery instant
to the end of the step.

Sources of coupling are indexed separately from lanes: sources ``0..L-1``
are the lanes themselves, further sources stand for agents simulated
elsewhere whose jumps arrive as external messages (used by the single-agent
stepping API).
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass

import numpy as np

from ..core.flow import rk4_step
from ..core.specs import affine_apply
from ..errors import GuardError, NonFiniteStateError, ZenoSuspected
from ..exact import sum3
from ..rng import CounterStream, lane_keys, lane_normals

EFFECTIVE = "effective"
MODIFIED = "modified"
PREDICATES = (EFFECTIVE, MODIFIED)

_JUMP = 0
_MESSAGE = 1


def guard_gap(beta, z, coupling, predicate: str):
    """Signed distance to the guard; the agent must jump where it is <= 0.

    ``effective`` measures beta - (z + I), ``modified`` measures
    (beta - I) - z. Both are evaluated with a single rounding of the exact
    three-term sum, so the two descriptions give the same bits.
    """
    if predicate == EFFECTIVE:
        return sum3(beta, -z, -coupling)
    if predicate == MODIFIED:
        return sum3(beta, -coupling, -z)
    raise ValueError(f"unknown hit predicate {predicate!r}")


# Plain two-operation differences are within 2 ulp-ish of the exact value;
# anything further from zero than this has a certain sign.
_SIGN_TOL = 4.0 * np.finfo(float).eps


def near_guard(beta, z, coupling):
    """Rows whose gap sign is not certain from plain arithmetic.

    Sign-certain rows are strictly positive in every component and cannot
    cross, so only the remaining rows need the exact gap.
    """
    approx = beta - z - coupling
    tol = _SIGN_TOL * (np.abs(beta) + np.abs(z) + np.abs(coupling))
    return (approx <= tol).any(axis=1)


def crossing(g_start, g_end):
    """Earliest crossing fraction and component for linearly interpolated gaps.

    Rows already violated at the start cross at 0. Rows that never cross get
    ``inf``. Ties go to the lowest component.
    """
    th = np.full(g_start.shape, np.inf)
    np.divide(g_start, g_start - g_end, out=th, where=(g_end <= 0) & (g_start > 0))
    th[g_start <= 0] = 0.0
    comp = np.argmin(th, axis=1)
    return th[np.arange(th.shape[0]), comp], comp


@dataclass
class JumpEvent:
    time: float
    agent: int
    lane: int
    component: int
    pre_mode: int
    pre_z: np.ndarray
    pre_z_tilde: np.ndarray
    pre_beta: np.ndarray
    post_mode: int
    post_z: np.ndarray
    post_beta: np.ndarray
    recipients: tuple[int, ...]


def _spec_key(obj) -> str:
    return json.dumps(obj.to_dict(), sort_keys=True)


def draw_reset(spec, stream: CounterStream, mode: int | None):
    """Guard seed, coordination state and mode after a jump (in that order).

    ``mode=None`` draws the initial state, which keeps the initial mode.
    """
    gamma = np.asarray(spec.guard.kernel.sample_position(stream), dtype=float)
    if not np.all(gamma > 0):
        raise GuardError(f"agent {spec.id}: guard seed {gamma.tolist()} is not positive")
    z = np.asarray(spec.z_kernel.sample_position(stream), dtype=float)
    if mode is None:
        return gamma, z, spec.initial_mode
    u = None if spec.transition == "cyclic" else stream.random()
    return gamma, z, spec.next_mode(mode, u)


class LaneKernel:
    """State and stepping for a block of lanes.

    Parameters
    ----------
    specs: agent specs referenced by ``lane_spec``.
    lane_spec: spec index of every lane.
    lane_id: agent id of every lane (ordering key for ties).
    noise_keys, reset_keys: per-lane counter-stream keys.
    edges: ``(recv_lane, source, weight)`` arrays sorted by receiving lane
        then by source agent id.
    source_ids: agent id of every source (lanes first, then external).
    """

    def __init__(
        self,
        specs,
        lane_spec,
        lane_id,
        noise_keys,
        reset_keys,
        edges,
        source_ids,
        dt: float,
        predicate: str = EFFECTIVE,
        max_jumps: int = 100_000,
    ):
        if predicate not in PREDICATES:
            raise ValueError(f"unknown hit predicate {predicate!r}")
        self.specs = list(specs)
        self.lane_spec = np.asarray(lane_spec, dtype=np.int64)
        self.lane_id = np.asarray(lane_id, dtype=np.int64)
        self.L = len(self.lane_spec)
        self.d = self.specs[0].dim
        self.noise_keys = lane_keys(noise_keys)
        self.reset_keys = [int(k) for k in reset_keys]
        self.dt = float(dt)
        self.sqdt = math.sqrt(self.dt)
        self.predicate = predicate
        self.max_jumps = max_jumps

        self.k = np.array([self.specs[s].guard.k for s in self.lane_spec], dtype=float)
        self.decay = np.exp(-self.k * self.dt)
        self.m = max(s.wiener_dim for s in self.specs)

        # distinct (field, diffusion) pairs across all agents and modes
        combos, index = [], {}
        n_modes = max(s.n_modes for s in self.specs)
        self.combo_table = np.full((len(self.specs), n_modes), -1, dtype=np.int64)
        for si, spec in enumerate(self.specs):
            for q, ms in enumerate(spec.modes):
                key = _spec_key(ms.field) + "|" + _spec_key(ms.diffusion)
                if key not in index:
                    index[key] = len(combos)
                    combos.append((ms.field, ms.diffusion.sigma, ms.diffusion.m))
                self.combo_table[si, q] = index[key]
        self.combos = combos

        rhs_groups, rindex = [], {}
        self.rhs_group = np.full(self.L, -1, dtype=np.int64)
        spec_group = []
        for spec in self.specs:
            rhs = spec.guard.rhs
            if rhs is None:
                spec_group.append(-1)
                continue
            key = _spec_key(rhs)
            if key not in rindex:
                rindex[key] = len(rhs_groups)
                rhs_groups.append(rhs)
            spec_group.append(rindex[key])
        self.rhs_groups = rhs_groups
        if rhs_groups:
            self.rhs_group = np.asarray(spec_group, dtype=np.int64)[self.lane_spec]

        recv, src, w = edges
        self.e_recv = np.asarray(recv, dtype=np.int64)
        self.e_src = np.asarray(src, dtype=np.int64)
        self.e_w = np.asarray(w, dtype=float).reshape(len(self.e_recv), self.d)
        self.e_k = self.k[self.e_recv]
        self.row_ptr = np.searchsorted(self.e_recv, np.arange(self.L + 1))
        self.source_ids = np.asarray(source_ids, dtype=np.int64)
        self.n_sources = len(self.source_ids)
        out_order = np.lexsort((self.lane_id[self.e_recv], self.e_src))
        self.out_edges = out_order
        self.out_ptr = np.searchsorted(self.e_src[out_order], np.arange(self.n_sources + 1))
        self.out_recv = self.e_recv[out_order]
        self.out_w = self.e_w[out_order]
        self.out_k = self.e_k[out_order]

        self.n = 0
        self.mode = np.zeros(self.L, dtype=np.int64)
        self.z = np.zeros((self.L, self.d))
        self.gamma = np.ones((self.L, self.d))
        self.beta = np.ones((self.L, self.d))
        self.I = np.zeros((self.L, self.d))
        self.last = np.zeros(self.L)
        self.src_last = np.full(self.n_sources, -np.inf)
        self.jumps = np.zeros(self.L, dtype=np.int64)
        self.reset_counter = np.zeros(self.L, dtype=np.int64)
        self.near = np.ones(self.L, dtype=bool)
        # heap entries carry a version; bumping it cancels stale candidates
        self.version = np.zeros(self.L, dtype=np.int64)
        self.cand_theta = np.zeros(self.L)
        self.cand_comp = np.zeros(self.L, dtype=np.int64)

    # ------------------------------------------------------------ setup

    def initialize(self) -> None:
        """Draw initial guard seeds and positions at t = 0."""
        for lane in range(self.L):
            spec = self.specs[self.lane_spec[lane]]
            stream = CounterStream(self.reset_keys[lane], 0)
            gamma, z, mode = draw_reset(spec, stream, None)
            self.gamma[lane], self.z[lane], self.mode[lane] = gamma, z, mode
            self.reset_counter[lane] = stream.counter
        self.beta = self.gamma.copy()
        self.I = np.zeros((self.L, self.d))
        self.last = np.zeros(self.L)
        self.n = 0
        self.refresh()

    def refresh(self) -> None:
        """Recompute cached per-lane flags after the state was set directly."""
        self.near = near_guard(self.beta, self.z, self.I)

    # ------------------------------------------------------------ pieces

    def time_of(self, n: int) -> float:
        return n * self.dt

    def guard_at(self, lanes, t, base_beta, base_t, jumped):
        """Guard of ``lanes`` at time ``t`` (scalar)."""
        out = self.gamma[lanes] * np.exp(-self.k[lanes] * (t - self.last[lanes]))[:, None]
        if self.rhs_groups:
            groups = self.rhs_group[lanes]
            for g in np.unique(groups[groups >= 0]):
                sel = np.flatnonzero(groups == g)
                ln = lanes[sel]
                fresh = jumped[ln]
                start = np.where(fresh[:, None], self.gamma[ln], base_beta[ln])
                h = np.where(fresh, t - self.last[ln], t - base_t)
                out[sel] = rk4_step(self.rhs_groups[g], start, h[:, None])
        return out

    def _edge_index(self, lanes):
        starts = self.row_ptr[lanes]
        counts = self.row_ptr[lanes + 1] - starts
        if len(lanes) == 1:
            return slice(int(starts[0]), int(starts[0] + counts[0])), np.zeros(int(counts[0]), np.int64)
        total = int(counts.sum())
        rows = np.repeat(np.arange(len(lanes)), counts)
        offs = np.repeat(starts - (np.cumsum(counts) - counts), counts)
        return np.arange(total) + offs, rows

    def coupling_at(self, lanes, *times):
        """Coupling input of ``lanes`` (None for all) at each of ``times``.

        Each row is accumulated sequentially in ascending source id, so the
        value of a lane does not depend on which other lanes are evaluated.
        """
        if lanes is None:
            idx, rows, n = slice(None), self.e_recv, self.L
        else:
            idx, rows = self._edge_index(lanes)
            n = len(lanes)
        outs = []
        if len(rows) == 0:
            return [np.zeros((n, self.d)) for _ in times]
        ts = self.src_last[self.e_src[idx]]
        member = ts >= self.last[self.e_recv[idx]]
        k = self.e_k[idx]
        w = self.e_w[idx]
        for t in times:
            # non-members get exponent 0 and are then zeroed by the mask
            fac = np.exp(-k * (t - np.where(member, ts, t))) * member
            out = np.empty((n, self.d))
            for c in range(self.d):
                out[:, c] = np.bincount(rows, weights=w[:, c] * fac, minlength=n)
            outs.append(out)
        return outs

    def _advance_continuous(self, n):
        xi = lane_normals(self.noise_keys, n, self.m)
        combo = self.combo_table[self.lane_spec, self.mode]
        z1 = np.empty_like(self.z)
        groups = [None] if len(self.combos) == 1 else np.unique(combo)
        for c in groups:
            if c is None:
                sel, (field, sigma, m) = slice(None), self.combos[0]
            else:
                sel = np.flatnonzero(combo == c)
                field, sigma, m = self.combos[c]
            y = self.z[sel]
            z1[sel] = y + field(y) * self.dt + affine_apply(sigma, None, xi[sel, :m]) * self.sqdt
        if not np.all(np.isfinite(z1)):
            bad = np.flatnonzero(~np.all(np.isfinite(z1), axis=1))
            raise NonFiniteStateError(
                f"non-finite coordination state for agents {self.lane_id[bad[:5]].tolist()}"
            )
        return z1

    # ------------------------------------------------------------ step

    def step(self, messages=()):
        """Advance all lanes by one step.

        ``messages`` are ``(time, source_index)`` jump announcements from
        external sources inside the step. Returns the step's jump events
        sorted by (time, agent id).
        """
        n = self.n
        t0, t1 = self.time_of(n), self.time_of(n + 1)
        L = self.L
        z0, beta0 = self.z, self.beta
        z1 = self._advance_continuous(n)
        jumped = np.zeros(L, dtype=bool)
        all_lanes = np.arange(L)
        beta1 = self.guard_at(all_lanes, t1, beta0, t0, jumped)
        # no neighbour jumped since the last closed-form evaluation of an
        # untouched lane, so its coupling only decays; touched lanes are
        # re-evaluated exactly at the end of the step
        I1 = self.I * self.decay[:, None]
        near1 = near_guard(beta1, z1, I1)
        check = np.flatnonzero(self.near | near1)
        cand = check[:0]
        if check.size:
            g0 = guard_gap(beta0[check], z0[check], self.I[check], self.predicate)
            g1 = guard_gap(beta1[check], z1[check], I1[check], self.predicate)
            theta, comp = crossing(g0, g1)
            hit = np.isfinite(theta)
            cand, theta, comp = check[hit], theta[hit], comp[hit]

        ctx = _StepContext(self, t0, t1, z0, beta0, z1, beta1, I1, jumped)
        if cand.size:
            s = np.minimum(t0 + theta * (t1 - t0), t1)
            for lane, s_l, th, c in zip(cand.tolist(), s.tolist(), theta.tolist(), comp.tolist()):
                ctx.push(lane, s_l, th, c)
        for time, src in messages:
            heapq.heappush(ctx.heap, (float(time), int(self.source_ids[src]), _MESSAGE, int(src), 0))
        ctx.run()

        if ctx.dirty:
            d = np.fromiter(sorted(ctx.dirty), dtype=np.int64)
            (I1[d],) = self.coupling_at(d, t1)
            near1[d] = near_guard(beta1[d], z1[d], I1[d])
        self.z, self.beta, self.I = z1, beta1, I1
        self.near = near1
        self.n = n + 1
        ctx.events.sort(key=lambda e: (e.time, e.agent))
        return ctx.events


class _StepContext:
    """Mutable bookkeeping for the jump phase of one step."""

    def __init__(self, kern: LaneKernel, t0, t1, z0, beta0, z1, beta1, I1, jumped):
        self.k = kern
        self.t0, self.t1 = t0, t1
        self.z0, self.beta0 = z0, beta0
        self.z1, self.beta1, self.I1 = z1, beta1, I1
        self.jumped = jumped
        self.heap = []
        # start of each lane's current linear segment; messages move it
        self.seg_t = np.full(kern.L, t0)
        self.seg_z = z0
        self._seg_z_owned = False
        self.dirty = set()
        self.events = []

    def push(self, lane, s, theta, comp):
        # a step owns the half-open interval (t0, t1]; grid samples at t0
        # therefore always show the state before any jump of this step
        floor = max(self.k.last[lane], self.t0)
        if s <= floor:
            s = float(np.nextafter(floor, np.inf))
        kern = self.k
        kern.version[lane] += 1
        kern.cand_theta[lane] = theta
        kern.cand_comp[lane] = comp
        heapq.heappush(self.heap, (s, int(kern.lane_id[lane]), _JUMP, lane, int(kern.version[lane])))

    def invalidate(self, lanes):
        self.k.version[lanes] += 1

    def run(self):
        while self.heap:
            s, _, kind, idx, ver = heapq.heappop(self.heap)
            if kind == _MESSAGE:
                self.deliver(idx, s)
                continue
            if self.k.version[idx] != ver or self.jumped[idx]:
                continue
            recipients = self.jump(idx, s)
            self.events[-1].recipients = recipients
            self.deliver(idx, s)

    def jump(self, lane, s):
        kern = self.k
        theta, comp = float(kern.cand_theta[lane]), int(kern.cand_comp[lane])
        z_seg = self.seg_z[lane]
        la = np.array([lane])
        z_pre = z_seg + theta * (self.z1[lane] - z_seg)
        if kern.rhs_groups:
            beta_pre = kern.guard_at(la, s, self.beta0, self.t0, self.jumped)[0]
        else:
            beta_pre = kern.gamma[lane] * np.exp(-kern.k[lane] * (s - kern.last[lane]))
        # every term of the coupling decays at the lane's own rate
        I_pre = self.I1[lane] / np.exp(-kern.k[lane] * (self.t1 - s))
        spec = kern.specs[kern.lane_spec[lane]]
        stream = CounterStream(kern.reset_keys[lane], int(kern.reset_counter[lane]))
        pre_mode = int(kern.mode[lane])
        gamma, z_new, mode = draw_reset(spec, stream, pre_mode)
        kern.reset_counter[lane] = stream.counter
        kern.jumps[lane] += 1
        if kern.jumps[lane] > kern.max_jumps:
            raise ZenoSuspected(
                f"agent {spec.id} exceeded {kern.max_jumps} jumps by t={s:.6g}"
            )
        kern.last[lane] = s
        kern.gamma[lane] = gamma
        kern.mode[lane] = mode
        self.z1[lane] = z_new
        self.jumped[lane] = True
        if kern.rhs_groups:
            self.beta1[lane] = kern.guard_at(la, self.t1, self.beta0, self.t0, self.jumped)[0]
        else:
            self.beta1[lane] = gamma * np.exp(-kern.k[lane] * (self.t1 - s))
        self.dirty.add(lane)
        self.events.append(
            JumpEvent(
                time=s,
                agent=int(kern.lane_id[lane]),
                lane=lane,
                component=int(comp),
                pre_mode=pre_mode,
                pre_z=z_pre,
                pre_z_tilde=z_pre + I_pre,
                pre_beta=beta_pre,
                post_mode=int(mode),
                post_z=z_new.copy(),
                post_beta=gamma.copy(),
                recipients=(),
            )
        )
        lo, hi = kern.out_ptr[lane], kern.out_ptr[lane + 1]
        return tuple(kern.lane_id[kern.out_recv[lo:hi]].tolist())

    def deliver(self, src, s):
        """Announce a jump of ``src`` at ``s`` and re-check its recipients."""
        kern = self.k
        prev = kern.src_last[src]
        kern.src_last[src] = s
        lo, hi = kern.out_ptr[src], kern.out_ptr[src + 1]
        if lo == hi:
            return
        active = kern.out_recv[lo:hi]
        w, k = kern.out_w[lo:hi], kern.out_k[lo:hi]
        keep = ~self.jumped[active]
        if not keep.all():
            active, w, k = active[keep], w[keep], k[keep]
            if active.size == 0:
                return
        t1 = self.t1
        t_seg = self.seg_t[active]
        z_seg = self.seg_z[active]
        span = t1 - t_seg
        frac = np.ones_like(span)
        np.divide(s - t_seg, span, out=frac, where=span > 0)
        z_e = self.z1[active]
        z_s = z_seg + frac[:, None] * (z_e - z_seg)
        if kern.rhs_groups:
            beta_s = kern.guard_at(active, s, self.beta0, self.t0, self.jumped)
        else:
            beta_s = kern.gamma[active] * np.exp(-k * (s - kern.last[active]))[:, None]
        # swap the sender's term in the end-of-step coupling, then carry
        # the sum back to s (all terms share the recipient's decay rate)
        I_e = self.I1[active]
        was = prev >= kern.last[active]
        if was.any():
            I_e[was] -= w[was] * np.exp(-k[was] * (t1 - prev))[:, None]
        fade = np.exp(-k * (t1 - s))[:, None]
        I_e += w * fade
        I_s = I_e / fade
        self.I1[active] = I_e
        beta_e = self.beta1[active]

        self.seg_t[active] = s
        if not self._seg_z_owned:
            self.seg_z = self.seg_z.copy()
            self._seg_z_owned = True
        self.seg_z[active] = z_s
        self.dirty.update(active.tolist())

        near = np.flatnonzero(near_guard(beta_s, z_s, I_s) | near_guard(beta_e, z_e, I_e))
        if near.size == 0:
            self.invalidate(active)
            return
        theta = np.full(active.size, np.inf)
        comp = np.zeros(active.size, dtype=np.int64)
        g_s = guard_gap(beta_s[near], z_s[near], I_s[near], kern.predicate)
        g_e = guard_gap(beta_e[near], z_e[near], I_e[near], kern.predicate)
        theta[near], comp[near] = crossing(g_s, g_e)
        s_new = np.minimum(s + theta * (t1 - s), t1)
        hit = np.isfinite(theta)
        self.invalidate(active[~hit])
        for j in np.flatnonzero(hit).tolist():
            self.push(int(active[j]), float(s_new[j]), float(theta[j]), int(comp[j]))
