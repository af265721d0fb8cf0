"""The five control policies mapping observations to states or actions.

"state" policies return the agent's next AgentState directly; "action"
policies return (accel, steer) pairs that the engine integrates through the
bicycle model. A None result means the policy has exhausted its input and
the agent should hold still (the engine resolves arrival).
"""

from __future__ import annotations

import math

from ..engine.world import AgentAction
from ..geometry import wrap_angle
from ..scenario.model import AgentState, SignalState
from .bicycle import pure_pursuit_action
from .idm import idm_accel
from .params import BicycleParams, IDMParams, MobilParams

LEADER_LOOKAHEAD = 80.0  # m of lane chain scanned for a leader
PATH_LOOKAHEAD = 60.0  # m of plan path scanned by TrajIDM
DEAD_END_MARGIN = 2.0  # m short of a dead end to park
MERGE_COMMIT_SLACK = 5.0  # m; a rival this much closer to a merge has priority


class ExpertPolicy:
    """Replays the reference route verbatim (interpolating off-grid times)."""

    kind = "state"
    proximity_arrival = False  # arrival == route exhaustion, never early

    def act(self, obs) -> AgentState | None:
        route = obs.route
        t_next = obs.view.time + obs.view.tick
        if route is None:
            return None
        if not route.covers(t_next):
            return None
        return route.state_at(t_next)


class BicycleExpertPolicy:
    """Route tracking through pure pursuit + proportional speed control."""

    kind = "action"

    def __init__(self, params: BicycleParams | None = None):
        self.params = params or BicycleParams()

    def act(self, obs) -> AgentAction | None:
        route = obs.route
        if route is None:
            return None
        t_next = obs.view.time + obs.view.tick
        target = route.state_at(min(t_next, route.end_time))
        accel, steer = pure_pursuit_action(
            obs.state,
            route.path(),
            target.speed if route.covers(t_next) else 0.0,
            self.params,
            obs.agent.attributes.length,
        )
        return AgentAction(accel, steer)


class ExternalPolicy:
    """Seat for externally injected (accel, steer) actions; coasts otherwise."""

    kind = "action"

    def __init__(self, params: BicycleParams | None = None):
        self.params = params or BicycleParams()

    def act(self, obs) -> AgentAction:
        action = obs.view.world.pending_actions.pop(obs.agent.id, None)
        return action if action is not None else AgentAction(0.0, 0.0)


class LaneIDMPolicy:
    """Centerline following with IDM longitudinal control and MOBIL changes."""

    kind = "state"

    def __init__(self, idm: IDMParams | None = None, mobil: MobilParams | None = None):
        self.idm = idm or IDMParams()
        self.mobil = mobil or MobilParams()

    def act(self, obs) -> AgentState | None:
        rt = obs.agent
        view = obs.view
        index = view.map
        st = rt.state
        tick = view.tick

        if rt.lane_id is None or rt.lane_id not in index.lanes:
            lid = index.current_lane(st.x, st.y, st.heading)
            if lid is None:
                view.world.log("no_lane", (rt.id,))
                return _coast(st, tick)
            rt.lane_id = lid
            rt.lane_s, rt.lane_offset = index.lanes[lid].geom.project((st.x, st.y))

        lane = index.lanes[rt.lane_id]
        v = st.speed

        leader = _find_leader(view, rt, rt.lane_id, rt.lane_s, LEADER_LOOKAHEAD)
        v0 = min(self.idm.v_target, lane.max_speed)
        if leader is None:
            a = idm_accel(v, None, None, self.idm, v_target=v0)
        else:
            gap, v_lead = leader
            a = idm_accel(v, v_lead, gap, self.idm, v_target=v0)

        # MOBIL lateral decision, only when not already mid-change
        if rt.lane_change is None:
            choice = self._mobil_choice(view, rt, a, leader)
            if choice is not None:
                target, _incentive = choice
                geom = index.lanes[target].geom
                s_t, d_t = geom.project((st.x, st.y))
                rt.lane_id = target
                rt.lane_s = s_t
                rt.lane_offset = d_t
                rt.lane_change = (target, self.mobil.change_duration)
                # leader in the target lane governs from now on
                leader = _find_leader(view, rt, target, s_t, LEADER_LOOKAHEAD)
                v0 = min(self.idm.v_target, index.lanes[target].max_speed)
                if leader is None:
                    a = idm_accel(v, None, None, self.idm, v_target=v0)
                else:
                    a = idm_accel(v, leader[1], leader[0], self.idm, v_target=v0)
                lane = index.lanes[target]

        v_next = max(0.0, v + a * tick)
        ds = 0.5 * (v + v_next) * tick
        s_next = rt.lane_s + ds

        # roll over lane ends onto the straightest successor; a dead end is
        # a network exit, so park short of the edge and finish the trip
        lane_id = rt.lane_id
        while s_next > index.lanes[lane_id].geom.length:
            nxt = _continuation(index, lane_id)
            if nxt is None:
                s_next = max(index.lanes[lane_id].geom.length - DEAD_END_MARGIN, 0.0)
                v_next = 0.0
                rt.arrived = True
                break
            s_next -= index.lanes[lane_id].geom.length
            lane_id = nxt
        rt.lane_id = lane_id
        rt.lane_s = s_next
        rt.lane_valid_step = view.world.step_count + 1  # holds at next prepare

        if rt.lane_change is not None:
            target, remaining = rt.lane_change
            remaining -= tick
            if remaining <= 0.0 or target != lane_id:
                rt.lane_change = None
                rt.lane_offset = 0.0
            else:
                rt.lane_change = (target, remaining)
                rt.lane_offset *= remaining / (remaining + tick)
        else:
            rt.lane_offset = 0.0

        geom = index.lanes[lane_id].geom
        x, y, heading = geom.pose_at(s_next)
        if rt.lane_offset != 0.0:
            nx, ny = -math.sin(heading), math.cos(heading)  # left normal
            x += rt.lane_offset * nx
            y += rt.lane_offset * ny
        return AgentState(x, y, v_next, wrap_angle(heading))

    def _mobil_choice(self, view, rt, a_self, leader):
        index = view.map
        st = rt.state
        v = st.speed
        best: tuple[float, int] | None = None
        lane = index.lanes[rt.lane_id]
        for target in (lane.left, lane.right):
            if target is None or target not in index.lanes:
                continue
            tgeom = index.lanes[target].geom
            s_t, d_t = tgeom.project((st.x, st.y))
            if abs(d_t) > 2.0 * index.lane_width:
                continue
            v0_t = min(self.idm.v_target, index.lanes[target].max_speed)
            new_leader = _find_leader(view, rt, target, s_t, LEADER_LOOKAHEAD)
            if new_leader is not None and new_leader[0] <= 0.5:
                continue  # no room alongside
            a_self_new = (
                idm_accel(v, None, None, self.idm, v_target=v0_t)
                if new_leader is None
                else idm_accel(v, new_leader[1], new_leader[0], self.idm, v_target=v0_t)
            )
            follower = _find_follower(view, rt, target, s_t)
            nf_delta = 0.0
            if follower is not None:
                gap_f, v_f, fid = follower
                if gap_f <= 0.5:
                    continue
                frt = view.runtime(fid)
                f_leader_before = _find_leader(view, frt, target, frt.lane_s, LEADER_LOOKAHEAD)
                a_nf_before = (
                    idm_accel(v_f, None, None, self.idm)
                    if f_leader_before is None
                    else idm_accel(v_f, f_leader_before[1], f_leader_before[0], self.idm)
                )
                gap_after = gap_f
                a_nf_after = idm_accel(v_f, v, gap_after, self.idm)
                if a_nf_after < -self.mobil.safe_decel:
                    continue  # safety criterion
                nf_delta = a_nf_after - a_nf_before
            of_delta = 0.0
            old_follower = _find_follower(view, rt, rt.lane_id, rt.lane_s)
            if old_follower is not None:
                gap_o, v_o, oid = old_follower
                a_of_before = idm_accel(v_o, v, max(gap_o, 1e-3), self.idm)
                # after we leave, the old follower closes on our leader: both
                # net gaps plus our own body length
                a_of_after = (
                    idm_accel(v_o, None, None, self.idm)
                    if leader is None
                    else idm_accel(
                        v_o, leader[1], gap_o + leader[0] + rt.attributes.length, self.idm
                    )
                )
                of_delta = a_of_after - a_of_before
            incentive = (a_self_new - a_self) + self.mobil.politeness * (nf_delta + of_delta)
            if incentive > self.mobil.accel_threshold:
                if best is None or incentive > best[0]:
                    best = (incentive, target)
        return (best[1], best[0]) if best else None


class TrajIDMPolicy:
    """Follows the motion-plan path; speed governed by IDM against agents
    blocking a corridor around the path."""

    kind = "state"

    def __init__(self, idm: IDMParams | None = None):
        self.idm = idm or IDMParams()

    def act(self, obs) -> AgentState | None:
        rt = obs.agent
        view = obs.view
        plan = rt.plan
        path = plan.path if plan is not None else (rt.route.path() if rt.route else None)
        if path is None:
            return None
        st = rt.state
        tick = view.tick
        s_self = rt.path_s
        if s_self >= path.length - 1e-6:
            return None  # plan exhausted

        v = st.speed
        corridor = rt.attributes.width  # half-width of the swept corridor
        leader = None
        for nid in obs.neighbors:
            other = view.runtime(nid)
            s_o, d_o = path.project((other.state.x, other.state.y))
            if abs(d_o) > corridor:
                continue
            ahead = s_o - s_self
            if ahead <= 0.1 or ahead > PATH_LOOKAHEAD:
                continue
            gap = ahead - 0.5 * (other.attributes.length + rt.attributes.length)
            v_lead = other.state.speed * max(
                math.cos(other.state.heading - st.heading), 0.0
            )
            if leader is None or gap < leader[0]:
                leader = (gap, v_lead)

        if plan is not None:
            v0 = max(plan.speed_at_arc(s_self), 0.05)
        else:
            v0 = self.idm.v_target
        if leader is None:
            a = idm_accel(v, None, None, self.idm, v_target=v0)
        else:
            a = idm_accel(v, leader[1], max(leader[0], 1e-3), self.idm, v_target=v0)
        v_next = max(0.0, v + a * tick)
        s_next = min(s_self + 0.5 * (v + v_next) * tick, path.length)
        rt.path_s = s_next
        x, y, heading = path.pose_at(s_next)
        return AgentState(x, y, v_next, wrap_angle(heading))


# ---------------------------------------------------------------------------
# helpers


def _coast(st: AgentState, tick: float) -> AgentState:
    return AgentState(
        st.x + st.speed * math.cos(st.heading) * tick,
        st.y + st.speed * math.sin(st.heading) * tick,
        st.speed,
        st.heading,
    )


def _continuation(index, lane_id: int) -> int | None:
    """Straightest driving successor; ties to the smaller id."""
    info = index.lanes[lane_id]
    end_heading = info.geom.headings[-1]
    best: tuple[float, int] | None = None
    for succ in info.successors:
        nxt = index.lanes.get(succ)
        if nxt is None or not nxt.driving:
            continue
        turn = abs(wrap_angle(nxt.geom.headings[0] - end_heading))
        key = (turn, succ)
        if best is None or key < best:
            best = key
    return best[1] if best else None


def _find_leader(view, rt, lane_id: int, s: float, lookahead: float):
    """(net gap, leader speed) of the nearest agent ahead on the lane chain.

    A red or yellow signal on the continuation lane appears as a stopped
    virtual leader at the stop line, and a rival closer to a shared merge
    point appears as a leader at that merge.
    """
    index = view.map
    occupancy = view.occupancy
    half_len = 0.5 * rt.attributes.length
    offset = -s
    lane = lane_id
    for _ in range(6):
        info = index.lanes[lane]
        for s_o, aid in occupancy.get(lane, ()):
            if aid == rt.id:
                continue
            if lane == lane_id and s_o <= s + 1e-9:
                continue
            other = view.runtime(aid)
            gap = offset + s_o - half_len - 0.5 * other.attributes.length
            return (gap, other.state.speed)
        offset += info.geom.length
        if offset > lookahead:
            return None
        nxt = _continuation(index, lane)
        if nxt is None:
            return None
        sig = view.signal(nxt)
        if sig in (SignalState.RED, SignalState.YELLOW):
            if lane == lane_id:
                # stop line at the end of the current lane
                return (offset - half_len, 0.0)
            return None  # chain blocked further out; ignore beyond the light
        rival = _merge_rival(view, rt, nxt, lane, offset)
        if rival is not None:
            return rival
        lane = nxt
    return None


def _merge_rival(view, rt, merge_lane: int, via_lane: int, my_dist: float):
    """Yield target when another branch reaches merge_lane sooner than we do."""
    preds = view.map.lanes[merge_lane].predecessors
    if len(preds) < 2:
        return None
    best = None
    for pred in preds:
        if pred == via_lane:
            continue
        geom_len = view.map.lanes[pred].geom.length
        for s_o, aid in view.occupancy.get(pred, ()):
            their_dist = geom_len - s_o
            if their_dist < my_dist - MERGE_COMMIT_SLACK or (
                their_dist < my_dist and view.runtime(aid).state.speed >= rt.state.speed
            ):
                other = view.runtime(aid)
                gap = my_dist - 0.5 * rt.attributes.length - 0.5 * other.attributes.length
                cand = (gap, other.state.speed)
                if best is None or cand[0] < best[0]:
                    best = cand
    return best


def _find_follower(view, rt, lane_id: int, s: float):
    """(net gap, follower speed, follower id) of the nearest agent behind."""
    index = view.map
    best = None
    for s_o, aid in view.occupancy.get(lane_id, ()):
        if aid == rt.id or s_o >= s:
            continue
        if best is None or s_o > best[0]:
            best = (s_o, aid)
    if best is None:
        return None
    other = view.runtime(best[1])
    gap = s - best[0] - 0.5 * (rt.attributes.length + other.attributes.length)
    return (gap, other.state.speed, best[1])


POLICY_NAMES = ("expert", "bicycle_expert", "lane_idm", "traj_idm", "external")


def make_policy(
    name: str,
    idm: IDMParams | None = None,
    mobil: MobilParams | None = None,
    bicycle: BicycleParams | None = None,
):
    if name == "expert":
        return ExpertPolicy()
    if name == "bicycle_expert":
        return BicycleExpertPolicy(bicycle)
    if name == "lane_idm":
        return LaneIDMPolicy(idm, mobil)
    if name == "traj_idm":
        return TrajIDMPolicy(idm)
    if name == "external":
        return ExternalPolicy(bicycle)
    raise ValueError(f"unknown policy {name!r} (known: {', '.join(POLICY_NAMES)})")
