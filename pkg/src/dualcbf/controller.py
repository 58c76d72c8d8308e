"""Dual-CBF control loop for the single integrator ``x' = u``.

Each step the controller

1. processes lifecycle events at the current sample (achievements, holds,
   recurrence resets),
2. builds the QP rows: the head subtask's primary CBF, one row per active
   Globally hold, the secondary CBF when two or more terms remain, and the
   polytopic speed bound,
3. solves for the minimum-norm input and integrates one Euler step.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from . import qp
from .cbf import CbfEvaluation, PrimaryCbf, primary_disjunction, primary_value, secondary_value
from .geometry import closest_point, diameter
from .sequencer import (
    PERMUTATION_CUTOFF,
    NoFeasibleSequence,
    SequenceTerm,
    SubtaskSequence,
    enumerate_alternatives,
    initial_remaining,
    make_term,
    remove_completed,
    resequence_for_recurrence,
    select,
)
from .stl.monitor import Trajectory, group_robustness
from .stl.smooth import DEFAULT_BETA
from .stl.syntax import FragmentError, InnerFormula, OpKind, SpecTree, Subtask, clause_set, horizon

CBF_TOL = 1e-9


class InitiallyInfeasible(RuntimeError):
    def __init__(self, message: str, values: dict | None = None):
        self.values = values or {}
        super().__init__(message)


class QpInfeasible(RuntimeError):
    def __init__(self, t: float, record: "StepRecord", trajectory: Trajectory | None = None):
        self.t = t
        self.record = record
        self.trajectory = trajectory
        super().__init__(
            f"QP infeasible at t={t:.3f}: head={record.active_subtask} h={record.h:.4g} "
            f"hold={record.h_hold:.4g} b={record.b:.4g}"
        )


@dataclass
class ScenarioConfig:
    spec: SpecTree
    x0: np.ndarray
    u_max: float
    dt: float = 0.05
    beta: float = DEFAULT_BETA
    alpha_gain: float = 1.0
    facets: int = 32
    relax_secondary: bool = False
    relax_penalty: float = 1e3
    dwell_credit: bool = True
    align_head: bool = True
    pin: dict[int, int] | None = None
    horizon: float | None = None
    name: str = ""

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.u_max > 0:
            raise ValueError("u_max must be positive")
        if not self.alpha_gain > 0:
            raise ValueError("alpha_gain must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.relax_penalty > 0:
            raise ValueError("relax_penalty must be positive")
        if self.spec.variables and len(self.x0) != self.spec.dim:
            raise ValueError(f"x0 has {len(self.x0)} entries but the state is {self.spec.variables}")

    @property
    def speed(self) -> float:
        """Speed available in every direction under the polytopic input bound."""
        return qp.inscribed_radius(self.u_max, len(self.x0), self.facets)


class Phase(str, Enum):
    PENDING = "pending"
    HOLDING = "holding"
    DONE = "done"


@dataclass
class SubtaskStatus:
    subtask: Subtask
    group: int
    cbf: PrimaryCbf
    phase: Phase = Phase.PENDING
    hold_start: float | None = None
    hold_end: float | None = None
    resets_done: int = 0
    left_cbf: PrimaryCbf | None = None
    was_inside: bool = False
    visiting: bool = False
    hold_target: object = None


@dataclass
class StepRecord:
    t: float
    x: np.ndarray
    u: np.ndarray
    h: float = math.nan
    h_hold: float = math.nan
    b: float = math.nan
    active_subtask: int | None = None
    critical_term: int | None = None
    qp_status: str = ""
    slack: float = 0.0
    solve_time: float = 0.0


@dataclass
class RunReport:
    name: str
    satisfied: bool
    robustness: float
    group_robustness: list
    cost: float
    min_h: float
    min_h_hold: float
    min_b: float
    steps: int
    solve_time_mean_ms: float
    solve_time_max_ms: float
    runtime_s: float
    sequence_history: list = field(default_factory=list)
    resequence_events: list = field(default_factory=list)
    gf_resets: dict = field(default_factory=dict)
    premise_violations: list = field(default_factory=list)
    reachability_violations: int = 0
    completions: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = None
        return d


def admissible(combo, spec: SpecTree, pin: dict[int, int] | None) -> bool:
    """Whether a choice of disjuncts respects ``pin`` (subtask id -> clause).

    Pinning one member of a disjunction group excludes the other members.
    """
    if not pin:
        return True
    for c in combo:
        sid = c.subtask.id
        if sid in pin:
            if pin[sid] != c.clause:
                return False
            continue
        group = next(g for g in spec.groups if any(s.id == sid for s in g))
        if any(s.id in pin for s in group):
            return False
    return True


def sampled_term(term: SequenceTerm, dt: float) -> SequenceTerm:
    # a sampled hold starts up to one step after the set is entered
    return replace(term, dwell=term.dwell + dt) if term.dwell > 0 else term


def initial_alternatives(cfg: ScenarioConfig) -> list[tuple[SequenceTerm, ...]]:
    """The term lists the controller chooses its first order from."""
    return [
        tuple(sampled_term(make_term(c), cfg.dt) for c in combo)
        for combo in enumerate_alternatives(cfg.spec)
        if admissible(combo, cfg.spec, cfg.pin)
    ]


def _row(ev: CbfEvaluation, gamma: float) -> tuple[np.ndarray, float]:
    # grad.u + dt_term + gamma*h >= 0
    return ev.grad_x, -(ev.dt_term + gamma * ev.value)


class Controller:
    """Stateful lifecycle of one run; see the module docstring."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.spec = cfg.spec
        self.dim = len(cfg.x0)
        self.speed = cfg.speed
        self.dt = cfg.dt
        self.status: dict[int, SubtaskStatus] = {}
        for g, members in enumerate(self.spec.groups):
            if len(members) > 1 and any(s.op.kind is not OpKind.F for s in members):
                raise FragmentError("disjunctions of temporal operators are supported for Finally members only")
            for s in members:
                cbf = PrimaryCbf(s.id, s.inner, initial_remaining(s), self.speed, cfg.beta)
                st = SubtaskStatus(s, g, cbf)
                if s.op.kind is OpKind.U:
                    st.left_cbf = PrimaryCbf(s.id, s.left_inner, cfg.dt, self.speed, cfg.beta, frozen=True, frozen_value=cfg.dt)
                self.status[s.id] = st
        self.ball = qp.ball_rows(cfg.u_max, self.dim, cfg.facets)
        self.sequence_history: list = []
        self.resequence_events: list = []
        self.premise_violations: list = []
        self.completions: dict = {}
        self.reachability_violations = 0
        self.warm: tuple[int, ...] | None = None
        self.hold: tuple[float, float] | None = None
        self.sequence = self._select(cfg.x0, 0.0)
        self._log_sequence(0.0, "initial")
        for st in self.status.values():
            st.was_inside = st.subtask.inner.exact(cfg.x0) >= 0.0
        self._check_initial(cfg.x0)

    # -- sequencing ------------------------------------------------------

    def _pending_groups(self) -> list[int]:
        out = []
        for g, members in enumerate(self.spec.groups):
            if all(self.status[s.id].phase is Phase.PENDING for s in members):
                out.append(g)
        return out

    def _alternatives(self, t: float):
        alts = []
        for combo in enumerate_alternatives(self.spec, self._pending_groups()):
            if admissible(combo, self.spec, self.cfg.pin):
                alts.append(tuple(self._term(c, t) for c in combo))
        return alts

    def _term(self, c, t: float):
        st = self.status[c.subtask.id]
        return sampled_term(make_term(c, remaining=st.cbf.remaining(t), t=t), self.dt)

    def _select(self, x, t: float, head_filter=None) -> SubtaskSequence:
        alts = self._alternatives(t)
        if not alts or not alts[0]:
            return SubtaskSequence((), (), (), (), t, self.speed, self.hold)
        return select(alts, x, t, self.speed, PERMUTATION_CUTOFF, self.cfg.dwell_credit, head_filter, self.hold)

    def _log_sequence(self, t: float, reason: str) -> None:
        self.sequence_history.append({"t": round(t, 10), "order": list(self.sequence.ids), "reason": reason})

    def _remove(self, sid: int, x, t: float, reason: str) -> None:
        group = self.status[sid].group
        ids = [s.id for s in self.spec.groups[group]]
        for term in self.sequence.terms:
            if term.subtask_id in ids:
                new = remove_completed(self.sequence, term.subtask_id, x, t, self.cfg.dwell_credit)
                if new.terms and not new.feasible:
                    self.premise_violations.append({"t": t, "order": list(new.ids), "slack": list(new.slack)})
                self.sequence = new if new.terms else SubtaskSequence((), (), (), (), t, self.speed, self.hold)
                self._log_sequence(t, reason)
                return

    def _resequence(self, x, t: float, gf_id: int) -> None:
        try:
            self.sequence = resequence_for_recurrence(
                self._alternatives(t), gf_id, x, t, self.speed, PERMUTATION_CUTOFF, self.cfg.dwell_credit, self.hold
            )
        except NoFeasibleSequence as exc:
            if not self.cfg.relax_secondary or exc.best is None:
                raise NoFeasibleSequence(exc.best, exc.deficit, f"resequencing at t={t:.2f} failed: {exc}") from None
            self.premise_violations.append({"t": t, "order": list(exc.best.ids), "slack": list(exc.best.slack)})
            self.sequence = exc.best
        self.resequence_events.append(round(t, 10))
        self._log_sequence(t, f"reset of subtask {gf_id}")

    def _set_hold(self, st: SubtaskStatus, t: float) -> None:
        credit = diameter(self.sequence_target(st)) / self.speed if self.cfg.dwell_credit else 0.0
        hold = (st.hold_end, credit)
        if self.hold is None or hold[0] - hold[1] > self.hold[0] - self.hold[1]:
            self.hold = hold
        self.sequence = SubtaskSequence(
            self.sequence.terms, self.sequence.required, self.sequence.slack,
            self.sequence.chain_times, self.sequence.constructed_at, self.sequence.u_max, self.hold,
        )

    def sequence_target(self, st: SubtaskStatus):
        for term in self.sequence.terms:
            if term.subtask_id == st.subtask.id:
                return term.target
        return clause_set(st.subtask.inner.clauses[0])

    # -- lifecycle -------------------------------------------------------

    def on_events(self, x, t: float) -> None:
        """Apply the lifecycle transitions triggered by the sample ``(x, t)``."""
        half = self.dt / 2
        for sid, st in self.status.items():
            s, op = st.subtask, st.subtask.op
            if st.phase is Phase.DONE:
                continue
            inside = s.inner.exact(x) >= 0.0
            entered = inside and not st.was_inside
            st.was_inside = inside
            if st.phase is Phase.HOLDING:
                if t >= st.hold_end - half:
                    st.phase = Phase.DONE
                    self.completions[sid] = round(t, 10)
                    if self.hold is not None and abs(self.hold[0] - st.hold_end) < 1e-12:
                        self.hold = self._next_hold()
                        self.sequence = SubtaskSequence(
                            self.sequence.terms, self.sequence.required, self.sequence.slack,
                            self.sequence.chain_times, self.sequence.constructed_at, self.sequence.u_max, self.hold,
                        )
                continue
            if st.phase is not Phase.PENDING or self._group_done(st.group):
                continue
            kind = op.kind
            if kind in (OpKind.F, OpKind.U):
                if inside and op.a - half <= t <= op.b + half:
                    self._finish_group(st, x, t)
            elif kind is OpKind.G:
                if t >= op.a - half and (inside or t > op.a + half):
                    self._start_hold(st, x, t, op.b)
            elif kind is OpKind.FG:
                if inside and op.a + op.c - half <= t <= op.b + op.c + half:
                    self._start_hold(st, x, t, t + op.d - op.c)
            elif kind is OpKind.GF:
                self._recurrence_event(st, x, t, inside, entered)

    def _recurrence_event(self, st: SubtaskStatus, x, t: float, inside: bool, entered: bool) -> None:
        # Entry and exit of a visit both reset the remaining time: the next
        # visit is due d after the last sample inside, so the order is only
        # recomputed on exit.  While inside, the subtask is off the sequence.
        op, half = st.subtask.op, self.dt / 2
        lo = op.a + op.c
        if st.visiting:
            if inside and t >= op.b + op.c - half:
                st.visiting = False
                self._finish_group(st, x, t)
            elif not inside:
                st.visiting = False
                st.cbf.reset(op.d - self.dt, t)
                st.resets_done += 1
                self._resequence(x, t, st.subtask.id)
            return
        first = abs(t - lo) <= half or (t < half and lo <= 0)
        if not inside or not (entered or first) or t < lo - half:
            return
        if t >= op.b + op.c - half:
            if t <= op.b + op.d + half:
                self._finish_group(st, x, t)
            return
        st.visiting = True
        st.cbf.reset(op.d, t)
        st.resets_done += 1
        self._remove(st.subtask.id, x, t, f"subtask {st.subtask.id} visited")

    def _next_hold(self):
        holds = [
            (st.hold_end, diameter(self.sequence_target(st)) / self.speed if self.cfg.dwell_credit else 0.0)
            for st in self.status.values()
            if st.phase is Phase.HOLDING
        ]
        return max(holds, key=lambda h: h[0] - h[1]) if holds else None

    def _group_done(self, g: int) -> bool:
        return any(self.status[s.id].phase is not Phase.PENDING for s in self.spec.groups[g])

    def _finish_group(self, st: SubtaskStatus, x, t: float) -> None:
        for s in self.spec.groups[st.group]:
            self.status[s.id].phase = Phase.DONE
        self.completions[st.subtask.id] = round(t, 10)
        self._remove(st.subtask.id, x, t, f"subtask {st.subtask.id} achieved")

    def _start_hold(self, st: SubtaskStatus, x, t: float, end: float) -> None:
        st.phase = Phase.HOLDING
        st.hold_start, st.hold_end = t, end
        st.hold_target = self.sequence_target(st)
        st.cbf.freeze(self.dt)
        self._set_hold(st, t)
        self._remove(st.subtask.id, x, t, f"subtask {st.subtask.id} hold started")

    # -- control ---------------------------------------------------------

    def head_evaluation(self, x, t: float) -> tuple[CbfEvaluation | None, int | None]:
        if not self.sequence.terms:
            return None, None
        term = self.sequence.terms[0]
        head = term.subtask_id
        holding = [h for h in self.status.values() if h.phase is Phase.HOLDING and h.hold_end > t]
        if holding:
            # the head is pursued from the point where the longest hold ends
            ev = self.exit_evaluation(max(holding, key=lambda h: h.hold_end), x, t)
            if ev is not None:
                return ev, head
        st = self.status[head]
        if len(self.sequence.terms) >= 2 and self.cfg.align_head:
            # steer to the set the secondary CBF assumes is reached first
            clause = InnerFormula((st.subtask.inner.clauses[term.clause],))
            return primary_value(replace(st.cbf, inner=clause), x, t), head
        group = self.spec.groups[st.group]
        cbfs = [self.status[s.id].cbf for s in group if self.status[s.id].phase is Phase.PENDING]
        if len(cbfs) > 1:
            return primary_disjunction(cbfs, x, t, self.cfg.beta), head
        return primary_value(st.cbf, x, t), head

    def exit_evaluation(self, st: SubtaskStatus, x, t: float) -> CbfEvaluation | None:
        """Keep the hold ending where the next head is still reachable in time.

        ``p`` is the point of the held set nearest the head target; the state
        must be within ``eps`` of it when the hold ends, where ``eps`` is the
        distance the head's remaining time affords beyond the gap.
        """
        if not self.sequence.terms or st.hold_end - t <= 0:
            return None
        term = self.sequence.terms[0]
        q = self.status[term.subtask_id].cbf.remaining(t) - (st.hold_end - t)
        p = np.asarray(closest_point(st.hold_target, term.target))
        gap = max(0.0, -term.target.signed_distance(p)[0])
        eps = max(0.0, self.speed * q - gap)
        dv = np.asarray(x, dtype=float) - p
        dist = float(np.linalg.norm(dv))
        grad = -dv / (dist * self.speed) if dist > 0 else np.zeros(self.dim)
        return CbfEvaluation((st.hold_end - t) + (eps - dist) / self.speed, grad, -1.0)

    def hold_evaluations(self, x, t: float) -> list[CbfEvaluation]:
        out = []
        for st in self.status.values():
            if st.phase is Phase.HOLDING:
                out.append(primary_value(st.cbf, x, t))
            elif st.left_cbf is not None and st.phase is Phase.PENDING:
                out.append(primary_value(st.left_cbf, x, t))
        return out

    def _check_initial(self, x0) -> None:
        values = {}
        head, _ = self.head_evaluation(x0, 0.0)
        if head is not None:
            values["h"] = head.value
        for i, ev in enumerate(self.hold_evaluations(x0, 0.0)):
            values[f"hold{i}"] = ev.value
        if len(self.sequence.terms) >= 2:
            values["b"] = secondary_value(self.sequence, x0, 0.0)[0].value
        bad = {k: v for k, v in values.items() if v < -CBF_TOL}
        if bad:
            raise InitiallyInfeasible(f"CBFs negative at the initial state: {bad}", values)

    def step(self, x, t: float) -> tuple[np.ndarray, StepRecord]:
        cfg = self.cfg
        gamma = cfg.alpha_gain
        rec = StepRecord(t, np.array(x, dtype=float), np.zeros(self.dim))
        rows = [(np.asarray(a, dtype=float), b) for a, b in self.ball]
        head, head_id = self.head_evaluation(x, t)
        if head is not None:
            rows.append(_row(head, gamma))
            rec.h, rec.active_subtask = head.value, head_id
        holds = self.hold_evaluations(x, t)
        for ev in holds:
            rows.append(_row(ev, gamma))
        if holds:
            rec.h_hold = min(ev.value for ev in holds)
        sec_row = None
        if len(self.sequence.terms) >= 2:
            sec, k = secondary_value(self.sequence, x, t)
            rec.b, rec.critical_term = sec.value, self.sequence.terms[k].subtask_id
            sec_row = _row(sec, gamma)
            self._check_reachability(x, t, sec.value)
        relax = cfg.relax_secondary and sec_row is not None
        if relax:
            n = self.dim
            H = np.eye(n + 1)
            H[n, n] = 2.0 * cfg.relax_penalty
            A = [np.append(a, 0.0) for a, _ in rows] + [np.append(sec_row[0], 1.0), np.eye(n + 1)[n]]
            b = [bb for _, bb in rows] + [sec_row[1], 0.0]
            problem = qp.QpProblem(H, None, np.array(A), np.array(b))
        else:
            if sec_row is not None:
                rows.append(sec_row)
            problem = qp.QpProblem.from_rows(self.dim, rows)
        t0 = time.perf_counter()
        sol = qp.solve(problem, warm_start=self.warm)
        rec.solve_time = time.perf_counter() - t0
        rec.qp_status = sol.status.value
        if not sol.ok:
            raise QpInfeasible(t, rec)
        self.warm = sol.active_set
        u = sol.u[: self.dim].copy()
        rec.slack = float(sol.u[self.dim]) if relax else 0.0
        rec.u = u
        return u, rec

    def _check_reachability(self, x, t: float, b: float) -> None:
        # b >= 0 should imply every sequenced term is still reachable in time
        if b < 0:
            return
        for term in self.sequence.terms:
            sd = term.target.signed_distance(np.asarray(x, dtype=float))[0]
            if self.status[term.subtask_id].cbf.remaining(t) + sd / self.speed < -1e-6:
                self.reachability_violations += 1
                return

    @property
    def finished(self) -> bool:
        return all(st.phase is Phase.DONE for st in self.status.values())


def init(cfg: ScenarioConfig) -> Controller:
    return Controller(cfg)


def simulate(cfg: ScenarioConfig, controller: Controller | None = None) -> tuple[Trajectory, RunReport, list[StepRecord]]:
    """Run the loop to the mission horizon and grade the result with the monitor."""
    wall = time.perf_counter()
    ctl = controller or Controller(cfg)
    T = cfg.horizon if cfg.horizon is not None else horizon(cfg.spec)
    n_steps = max(0, math.ceil(T / cfg.dt - 1e-9))
    x = cfg.x0.copy()
    records: list[StepRecord] = []
    xs, us, ts = [], [], []
    for k in range(n_steps + 1):
        t = k * cfg.dt
        ctl.on_events(x, t)
        if ctl.finished or k == n_steps:
            u = np.zeros(ctl.dim)
            rec = StepRecord(t, x.copy(), u, qp_status="idle")
        else:
            try:
                u, rec = ctl.step(x, t)
            except QpInfeasible as exc:
                ts.append(t), xs.append(x.copy()), us.append(np.zeros(ctl.dim))
                exc.trajectory = Trajectory(cfg.dt, ts, xs, us)
                raise
        records.append(rec)
        ts.append(t)
        xs.append(x.copy())
        us.append(u)
        x = x + cfg.dt * u
    traj = Trajectory(cfg.dt, ts, np.array(xs).reshape(len(ts), -1), np.array(us).reshape(len(ts), -1))
    report = _report(cfg, ctl, traj, records, time.perf_counter() - wall)
    return traj, report, records


def _report(cfg, ctl: Controller, traj: Trajectory, records, runtime: float) -> RunReport:
    rob = group_robustness(traj, cfg.spec) if cfg.spec.groups else []
    robustness = min(rob) if rob else math.inf
    solves = [r.solve_time for r in records if r.qp_status and r.qp_status != "idle"]
    hs = [r.h for r in records if not math.isnan(r.h)]
    holds = [r.h_hold for r in records if not math.isnan(r.h_hold)]
    bs = [r.b for r in records if not math.isnan(r.b)]
    return RunReport(
        name=cfg.name,
        satisfied=bool(robustness >= 0.0),
        robustness=float(robustness),
        group_robustness=[float(v) for v in rob],
        cost=float(np.sum(traj.u * traj.u) * cfg.dt),
        min_h=float(min(hs + holds)) if hs or holds else math.inf,
        min_h_hold=float(min(holds)) if holds else math.inf,
        min_b=float(min(bs)) if bs else math.inf,
        steps=len(records),
        solve_time_mean_ms=float(np.mean(solves) * 1e3) if solves else 0.0,
        solve_time_max_ms=float(np.max(solves) * 1e3) if solves else 0.0,
        runtime_s=runtime,
        sequence_history=ctl.sequence_history,
        resequence_events=ctl.resequence_events,
        gf_resets={str(sid): st.resets_done for sid, st in ctl.status.items() if st.subtask.op.kind is OpKind.GF},
        premise_violations=ctl.premise_violations,
        reachability_violations=ctl.reachability_violations,
        completions={str(k): v for k, v in ctl.completions.items()},
    )
