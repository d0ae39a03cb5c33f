//! Task supervision: goals become tasks running recipes, one at a time.
//!
//! A new goal preempts the running task, which waits on a stack and resumes
//! (last paused, first resumed) when the newer task ends. A running task
//! advances at most one step per tick; jumps and branches are free. Tasks
//! whose person goes unseen for `t_lost` ticks are aborted.

mod recipe;

pub use recipe::{
    guidance_recipe, quiz_recipe, route_description_recipe, AbortReason, CheckPredicate, ComputeOp, Condition,
    GuidanceParams, Instr, OnTimeout, PhysicalKind, PhysicalTarget, Program, Recipe, RecipeBook, RecipeError, Step,
    TextRef, Timeout,
};

use crate::dialogue::{
    quiz_turn, route_description_reply, DialogueAct, Mode, NluResult, PendingQuestion, QuizQuestion, QuizState,
    TaskGoal, Templates,
};
use crate::geometry::{Point2, Pose2};
use crate::grid::{Cell, OccupancyGrid};
use crate::rng::{self, SimRng};
use crate::semantic_map::{AccessKind, GuidanceAct, Route, RouteConstraints, SemanticMap};
use crate::svp::{
    compute_visibility_grid, plan_svp, GestureParams, Landmark, Placement, PointingAngles, SvpConfig, VisibilityGrid,
};
use crate::world_model::{PredicateKey, PredicateName, PredicateTracker, WorldSet};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Boundary samples per landmark footprint.
pub const LANDMARK_SAMPLES: usize = 8;
/// Bound on free control-flow instructions per tick; a recipe looping on
/// jumps alone is aborted.
const MAX_CONTROL_STEPS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SupervisionError {
    #[error("unknown goal kind '{0}'")]
    UnknownGoal(String),
    #[error(transparent)]
    Recipe(#[from] RecipeError),
}

/// Goal from its JSON form, e.g. `{"kind": "guidance", "place": "cafe"}`.
pub fn parse_goal(value: &serde_json::Value) -> Result<TaskGoal, SupervisionError> {
    let kind = value.get("kind").and_then(|k| k.as_str()).unwrap_or_default();
    if !matches!(kind, "guidance" | "route_description" | "quiz") {
        return Err(SupervisionError::UnknownGoal(kind.to_string()));
    }
    serde_json::from_value(value.clone()).map_err(|_| SupervisionError::UnknownGoal(kind.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Pending,
    Running,
    Paused,
    Done,
    Aborted(AbortReason),
}

impl TaskState {
    pub fn is_live(&self) -> bool {
        matches!(self, TaskState::Pending | TaskState::Running | TaskState::Paused)
    }
}

#[derive(Debug, Clone, Default)]
struct Memory {
    route: Option<Route>,
    placement: Option<Placement>,
    answer: Option<NluResult>,
    vars: BTreeMap<String, String>,
    /// Tick the current blocking step started waiting.
    since: Option<u64>,
    asked: bool,
    reprompt: bool,
    navigating: bool,
    point_tick: Option<u64>,
    pointed: Vec<String>,
    quiz: Option<QuizState>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Task {
    pub id: u64,
    pub goal: TaskGoal,
    pub person: String,
    pub state: TaskState,
    pub pc: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pending_question: Option<PendingQuestion>,
    pub repeats: u32,
    #[serde(skip)]
    mem: Memory,
}

impl Task {
    pub fn route(&self) -> Option<&Route> {
        self.mem.route.as_ref()
    }

    pub fn placement(&self) -> Option<&Placement> {
        self.mem.placement.as_ref()
    }

    pub fn quiz(&self) -> Option<&QuizState> {
        self.mem.quiz.as_ref()
    }
}

/// Something the robot does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Say {
        task: u64,
        text: String,
    },
    Ask {
        task: u64,
        text: String,
        expects: Vec<DialogueAct>,
    },
    Placement {
        task: u64,
        landmark: String,
        human_target: Point2,
        robot: Pose2,
        visibility: f64,
    },
    Navigate {
        task: u64,
        goal: Pose2,
    },
    Point {
        task: u64,
        target: String,
        at: Point2,
        height: f64,
        angles: PointingAngles,
    },
}

impl Action {
    pub fn task(&self) -> u64 {
        match self {
            Action::Say { task, .. }
            | Action::Ask { task, .. }
            | Action::Placement { task, .. }
            | Action::Navigate { task, .. }
            | Action::Point { task, .. } => *task,
        }
    }

    /// Spoken text, if any.
    pub fn speech(&self) -> Option<&str> {
        match self {
            Action::Say { text, .. } | Action::Ask { text, .. } => Some(text),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskEventKind {
    Started,
    Paused,
    Resumed,
    Done,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskEvent {
    pub task: u64,
    pub event: TaskEventKind,
    pub goal: TaskGoal,
    pub person: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<AbortReason>,
}

impl TaskEvent {
    /// Ends the person's interaction (for the engagement ledger).
    pub fn ends_interaction(&self) -> bool {
        matches!(self.event, TaskEventKind::Done | TaskEventKind::Aborted)
    }

    pub fn starts_interaction(&self) -> bool {
        matches!(self.event, TaskEventKind::Started | TaskEventKind::Resumed)
    }
}

/// Progress of the last navigation request, reported by the caller.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavStatus {
    #[default]
    Idle,
    Moving,
    Arrived,
    Failed,
}

/// An utterance routed to the task of `person`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskInput {
    pub person: String,
    pub nlu: NluResult,
}

/// What the supervisor sees on one tick.
#[derive(Debug, Clone, Copy)]
pub struct TickInput<'a> {
    pub tick: u64,
    /// Identities perceived this tick.
    pub present: &'a BTreeSet<String>,
    pub positions: &'a BTreeMap<String, Point2>,
    pub robot: Pose2,
    pub robot_region: &'a str,
    pub predicates: &'a PredicateTracker,
    pub worlds: &'a WorldSet,
    pub inputs: &'a [TaskInput],
    pub nav: NavStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TickOutput {
    pub actions: Vec<Action>,
    pub events: Vec<TaskEvent>,
}

/// `HumanLost` once `task`'s person has been unseen for `t_lost` ticks.
pub fn watchdog(task: &Task, absent_ticks: u64, params: &GuidanceParams) -> Option<AbortReason> {
    (task.state.is_live() && absent_ticks >= params.t_lost).then_some(AbortReason::HumanLost)
}

pub struct Supervisor {
    pub params: GuidanceParams,
    pub svp: SvpConfig,
    pub gesture: GestureParams,
    map: SemanticMap,
    grid: Option<OccupancyGrid>,
    templates: Templates,
    quiz_bank: Vec<QuizQuestion>,
    quiz_rng: SimRng,
    programs: [Program; 3],
    visibility: BTreeMap<String, VisibilityGrid>,
    tasks: BTreeMap<u64, Task>,
    running: Option<u64>,
    paused: Vec<u64>,
    next_id: u64,
    absent: BTreeMap<String, u64>,
    last_seen: BTreeMap<String, Point2>,
    out: TickOutput,
}

enum Flow {
    /// Step taken; stop for this tick.
    Yield,
    /// Waiting on the current step.
    Block,
    /// Control flow; keep going.
    Next,
}

impl Supervisor {
    pub fn new(map: SemanticMap, templates: Templates, quiz_bank: Vec<QuizQuestion>, seed: u64) -> Self {
        let params = GuidanceParams::default();
        let programs = RecipeBook::builtin(&params).compile().expect("built-in recipes compile");
        let grid = map.occupancy_grid();
        Supervisor {
            params,
            svp: SvpConfig::default(),
            gesture: GestureParams::default(),
            map,
            grid,
            templates,
            quiz_bank,
            quiz_rng: rng::stream(seed, "quiz"),
            programs,
            visibility: BTreeMap::new(),
            tasks: BTreeMap::new(),
            running: None,
            paused: Vec::new(),
            next_id: 1,
            absent: BTreeMap::new(),
            last_seen: BTreeMap::new(),
            out: TickOutput::default(),
        }
    }

    /// Replaces the guidance parameters and rebuilds the built-in recipes.
    pub fn set_params(&mut self, params: GuidanceParams) {
        self.programs = RecipeBook::builtin(&params).compile().expect("built-in recipes compile");
        self.params = params;
    }

    pub fn set_recipes(&mut self, book: &RecipeBook) -> Result<(), SupervisionError> {
        self.programs = book.compile()?;
        Ok(())
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    pub fn tasks(&self) -> impl Iterator<Item = &Task> {
        self.tasks.values()
    }

    pub fn task(&self, id: u64) -> Option<&Task> {
        self.tasks.get(&id)
    }

    pub fn running(&self) -> Option<&Task> {
        self.running.and_then(|id| self.tasks.get(&id))
    }

    /// Paused task ids, most recently paused last.
    pub fn paused(&self) -> &[u64] {
        &self.paused
    }

    /// Visibility grids computed so far, by landmark.
    pub fn visibility_grids(&self) -> &BTreeMap<String, VisibilityGrid> {
        &self.visibility
    }

    /// Dialogue mode implied by the running task.
    pub fn mode(&self) -> Option<Mode> {
        self.running().map(|t| match t.goal {
            TaskGoal::Quiz => Mode::Quiz,
            TaskGoal::Guidance { .. } | TaskGoal::RouteDescription { .. } => Mode::Guidance,
        })
    }

    pub fn pending_question(&self) -> Option<&PendingQuestion> {
        self.running().and_then(|t| t.pending_question.as_ref())
    }

    fn program(&self, goal: &TaskGoal) -> &Program {
        match goal {
            TaskGoal::Guidance { .. } => &self.programs[0],
            TaskGoal::Quiz => &self.programs[1],
            TaskGoal::RouteDescription { .. } => &self.programs[2],
        }
    }

    fn event(&mut self, id: u64, event: TaskEventKind, reason: Option<AbortReason>) {
        let t = &self.tasks[&id];
        self.out.events.push(TaskEvent { task: id, event, goal: t.goal.clone(), person: t.person.clone(), reason });
    }

    /// Starts a task for `goal`, pausing the running one.
    pub fn submit_goal(&mut self, goal: TaskGoal, person: &str) -> u64 {
        if let Some(prev) = self.running.take() {
            let t = self.tasks.get_mut(&prev).expect("running task exists");
            t.state = TaskState::Paused;
            t.mem.since = None;
            self.paused.push(prev);
            self.event(prev, TaskEventKind::Paused, None);
        }
        let id = self.next_id;
        self.next_id += 1;
        let mut mem = Memory::default();
        if let Some(place) = goal.place() {
            let label = self.map.place(place).map_or(place, |p| p.label.as_str());
            mem.vars.insert("place".into(), label.to_string());
        }
        self.tasks.insert(
            id,
            Task { id, goal, person: person.to_string(), state: TaskState::Running, pc: 0, pending_question: None, repeats: 0, mem },
        );
        self.running = Some(id);
        self.absent.entry(person.to_string()).or_insert(0);
        self.event(id, TaskEventKind::Started, None);
        id
    }

    /// [`submit_goal`](Self::submit_goal) from the goal's JSON form.
    pub fn submit_json(&mut self, goal: &serde_json::Value, person: &str) -> Result<u64, SupervisionError> {
        Ok(self.submit_goal(parse_goal(goal)?, person))
    }

    fn finish(&mut self, id: u64, state: TaskState) {
        let t = self.tasks.get_mut(&id).expect("task exists");
        if !t.state.is_live() {
            return;
        }
        t.state = state;
        t.pending_question = None;
        if self.running == Some(id) {
            self.running = None;
        }
        self.paused.retain(|p| *p != id);
        match state {
            TaskState::Aborted(r) => self.event(id, TaskEventKind::Aborted, Some(r)),
            _ => self.event(id, TaskEventKind::Done, None),
        }
    }

    /// Aborts every live task.
    pub fn abort_all(&mut self, reason: AbortReason) {
        let live: Vec<u64> = self.tasks.values().filter(|t| t.state.is_live()).map(|t| t.id).collect();
        for id in live {
            self.finish(id, TaskState::Aborted(reason));
        }
    }

    /// One tick: watchdog, deliver answers, advance the running task,
    /// resume a paused task if nothing runs.
    pub fn tick(&mut self, input: &TickInput) -> TickOutput {
        for (id, p) in input.positions {
            if input.present.contains(id) {
                self.last_seen.insert(id.clone(), *p);
            }
        }
        self.run_watchdog(input);

        if let Some(id) = self.running {
            let person = self.tasks[&id].person.clone();
            for inp in input.inputs.iter().filter(|i| i.person == person) {
                if self.running != Some(id) {
                    break;
                }
                self.deliver(id, &inp.nlu);
            }
        }
        if let Some(id) = self.running {
            self.advance(id, input);
        }
        if self.running.is_none() {
            if let Some(id) = self.paused.pop() {
                let t = self.tasks.get_mut(&id).expect("paused task exists");
                t.state = TaskState::Running;
                t.mem.reprompt = t.mem.asked;
                t.mem.since = None;
                self.running = Some(id);
                self.event(id, TaskEventKind::Resumed, None);
            }
        }
        std::mem::take(&mut self.out)
    }

    fn run_watchdog(&mut self, input: &TickInput) {
        let people: BTreeSet<String> =
            self.tasks.values().filter(|t| t.state.is_live()).map(|t| t.person.clone()).collect();
        self.absent.retain(|p, _| people.contains(p));
        for p in people {
            let n = self.absent.entry(p.clone()).or_insert(0);
            *n = if input.present.contains(&p) { 0 } else { *n + 1 };
            let absent = *n;
            let lost: Vec<u64> = self
                .tasks
                .values()
                .filter(|t| t.person == p && watchdog(t, absent, &self.params).is_some())
                .map(|t| t.id)
                .collect();
            for id in lost {
                self.finish(id, TaskState::Aborted(AbortReason::HumanLost));
            }
            if absent >= self.params.t_lost {
                self.absent.remove(&p);
            }
        }
    }

    fn deliver(&mut self, id: u64, nlu: &NluResult) {
        if nlu.act == DialogueAct::Quit {
            let t = &self.tasks[&id];
            if let Some(q) = t.mem.quiz.as_ref() {
                let text = quiz_turn(nlu, q, &self.templates).0;
                self.out.actions.push(Action::Say { task: id, text });
            }
            self.finish(id, TaskState::Aborted(AbortReason::UserQuit));
            return;
        }
        let instr = self.program(&self.tasks[&id].goal).instrs.get(self.tasks[&id].pc).cloned();
        let t = self.tasks.get_mut(&id).expect("task exists");
        if let Some(Instr::Ask { expects, .. }) = instr {
            if t.mem.asked && expects.contains(&nlu.act) {
                t.mem.answer = Some(nlu.clone());
            }
        }
    }

    fn text(&self, id: u64, r: &TextRef) -> String {
        let vars = &self.tasks[&id].mem.vars;
        match r {
            TextRef::Var(name) => vars.get(name).cloned().unwrap_or_default(),
            TextRef::Template(key) => {
                let slots: Vec<(&str, &str)> = vars.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
                self.templates.fill(key, &slots)
            }
        }
    }

    fn advance(&mut self, id: u64, input: &TickInput) {
        for _ in 0..MAX_CONTROL_STEPS {
            let pc = self.tasks[&id].pc;
            let Some(instr) = self.program(&self.tasks[&id].goal).instrs.get(pc).cloned() else {
                self.finish(id, TaskState::Done);
                return;
            };
            match self.exec(id, &instr, input) {
                Flow::Next => {}
                Flow::Yield | Flow::Block => return,
            }
            if !self.tasks[&id].state.is_live() {
                return;
            }
        }
        self.finish(id, TaskState::Aborted(AbortReason::PlanningFailed));
    }

    fn goto(&mut self, id: u64, pc: usize) {
        let t = self.tasks.get_mut(&id).expect("task exists");
        t.pc = pc;
        t.mem.since = None;
    }

    fn exec(&mut self, id: u64, instr: &Instr, input: &TickInput) -> Flow {
        let tick = input.tick;
        let pc = self.tasks[&id].pc;
        match instr {
            Instr::Jump(t) => {
                self.goto(id, *t);
                Flow::Next
            }
            Instr::JumpUnless(cond, t) => {
                let next = if self.condition(id, cond) { pc + 1 } else { *t };
                self.goto(id, next);
                Flow::Next
            }
            Instr::Say(r) => {
                let text = self.text(id, r);
                self.out.actions.push(Action::Say { task: id, text });
                self.goto(id, pc + 1);
                Flow::Yield
            }
            Instr::Ask { prompt, reask, expects } => {
                let t = &self.tasks[&id];
                if let Some(ans) = t.mem.answer.clone() {
                    let t = self.tasks.get_mut(&id).expect("task exists");
                    t.mem.answer = None;
                    t.mem.asked = false;
                    t.mem.reprompt = false;
                    t.pending_question = None;
                    t.mem.record_answer(ans);
                    self.goto(id, pc + 1);
                    return Flow::Yield;
                }
                let again = reask.as_ref().unwrap_or(prompt);
                let (first, reprompt) = (!t.mem.asked, t.mem.reprompt);
                if !first && !reprompt {
                    return Flow::Block;
                }
                let text = if first { self.text(id, prompt) } else { self.text(id, again) };
                let pending = self.text(id, again);
                let t = self.tasks.get_mut(&id).expect("task exists");
                t.mem.asked = true;
                t.mem.reprompt = false;
                t.pending_question = Some(PendingQuestion { text: pending, expects: expects.clone() });
                self.out.actions.push(Action::Ask { task: id, text, expects: expects.clone() });
                Flow::Yield
            }
            Instr::Physical { kind: PhysicalKind::Navigate, .. } => {
                let t = &self.tasks[&id];
                let Some(goal) = t.mem.placement.as_ref().map(|p| p.robot) else {
                    self.goto(id, pc + 1);
                    return Flow::Next;
                };
                if !t.mem.navigating {
                    let t = self.tasks.get_mut(&id).expect("task exists");
                    t.mem.navigating = true;
                    t.mem.since = Some(tick);
                    self.out.actions.push(Action::Navigate { task: id, goal });
                    return Flow::Yield;
                }
                let since = *self.tasks.get_mut(&id).expect("task exists").mem.since.get_or_insert(tick);
                let timed_out = tick.saturating_sub(since) >= self.params.navigate_timeout;
                if matches!(input.nav, NavStatus::Arrived | NavStatus::Failed) || timed_out {
                    self.tasks.get_mut(&id).expect("task exists").mem.navigating = false;
                    self.goto(id, pc + 1);
                    return Flow::Yield;
                }
                Flow::Block
            }
            Instr::Physical { kind: PhysicalKind::Point, target } => match self.point(id, *target, input) {
                Some(action) => {
                    self.out.actions.push(action);
                    self.goto(id, pc + 1);
                    Flow::Yield
                }
                None => {
                    self.goto(id, pc + 1);
                    Flow::Next
                }
            },
            Instr::Check { predicate, timeout, on_timeout } => {
                if self.check(id, predicate, input) {
                    self.goto(id, pc + 1);
                    return Flow::Yield;
                }
                let since = *self.tasks.get_mut(&id).expect("task exists").mem.since.get_or_insert(tick);
                if tick.saturating_sub(since) < *timeout {
                    return Flow::Block;
                }
                match on_timeout {
                    Timeout::Continue => self.goto(id, pc + 1),
                    Timeout::Jump(t) => self.goto(id, *t),
                    Timeout::Abort(r) => self.finish(id, TaskState::Aborted(*r)),
                }
                Flow::Yield
            }
            Instr::Compute(op) => {
                match self.compute(id, *op, input) {
                    Ok(()) => self.goto(id, pc + 1),
                    Err(apology) => {
                        self.out.actions.push(Action::Say { task: id, text: apology });
                        self.finish(id, TaskState::Aborted(AbortReason::PlanningFailed));
                    }
                }
                Flow::Yield
            }
            Instr::Abort(r) => {
                self.finish(id, TaskState::Aborted(*r));
                Flow::Yield
            }
        }
    }

    fn condition(&self, id: u64, c: &Condition) -> bool {
        let t = &self.tasks[&id];
        match c {
            Condition::RouteUsesStairs => t.mem.route.as_ref().is_some_and(|r| r.uses_kind(&self.map, AccessKind::Stairs)),
            Condition::Answered(act) => t.mem.vars.get("answered").is_some_and(|a| *a == act_name(*act)),
            Condition::RepeatsLeft => t.repeats < self.params.repeat_limit,
            Condition::NavigateEnabled => self.params.navigate,
            Condition::QuizFinished => t.mem.quiz.as_ref().is_none_or(|q| q.finished),
            Condition::All(cs) => cs.iter().all(|c| self.condition(id, c)),
        }
    }

    fn check(&self, id: u64, p: &CheckPredicate, input: &TickInput) -> bool {
        let t = &self.tasks[&id];
        match p {
            CheckPredicate::HumanReady => {
                let (Some(pl), Some(pos)) = (t.mem.placement.as_ref(), input.positions.get(&t.person)) else {
                    return false;
                };
                input.present.contains(&t.person)
                    && pos.distance(&pl.human_target) <= self.params.ready_radius
                    && input
                        .predicates
                        .is_live(&PredicateKey::new(PredicateName::IsVisibleFrom, &pl.landmark, &t.person))
            }
            CheckPredicate::Looked => {
                let Some(since) = t.mem.point_tick else { return false };
                t.mem
                    .pointed
                    .iter()
                    .any(|n| input.worlds.belief_stamp(&t.person, n).is_some_and(|s| s >= since))
            }
            CheckPredicate::Live { pattern } => {
                let landmark = t.mem.placement.as_ref().map_or("", |p| p.landmark.as_str());
                let mut pat = pattern.clone();
                for a in pat.args.iter_mut().flatten() {
                    *a = a.replace("$person", &t.person).replace("$landmark", landmark);
                }
                input.predicates.live().any(|s| pat.matches(s.name, &s.args))
            }
        }
    }

    fn point(&mut self, id: u64, target: PhysicalTarget, input: &TickInput) -> Option<Action> {
        let t = &self.tasks[&id];
        let route = t.mem.route.as_ref()?;
        let placement = match &t.mem.placement {
            Some(p) => Placement { robot: input.robot, ..p.clone() },
            None => Placement {
                landmark: route.destination.clone(),
                human_cell: Cell::new(0, 0),
                human_target: input.robot.position(),
                visibility: 0.0,
                score: 0.0,
                robot_cell: Cell::new(0, 0),
                robot: input.robot,
            },
        };
        let acts = self.map.guidance_acts(route, &placement, self.templates.language, self.gesture).ok()?;
        let mut points = acts.into_iter().filter_map(|a| match a {
            GuidanceAct::Point { target, at, height, angles } => Some((target, at, height, angles)),
            GuidanceAct::Say { .. } => None,
        });
        let (name, at, height, angles) = match target {
            PhysicalTarget::Destination => points.next()?,
            PhysicalTarget::AccessPoint => points.nth(1)?,
            PhysicalTarget::RobotPose => return None,
        };
        let t = self.tasks.get_mut(&id).expect("task exists");
        if target == PhysicalTarget::Destination {
            t.mem.point_tick = Some(input.tick);
            t.mem.pointed.clear();
        }
        t.mem.pointed.push(name.clone());
        Some(Action::Point { task: id, target: name, at, height, angles })
    }

    fn landmark_for(&self, route: &Route) -> Option<Landmark> {
        match route.first_access_point() {
            Some(ap) => {
                let ap = self.map.access_point(ap)?;
                Some(Landmark::from_footprint(&ap.id, &ap.visible_footprint(), LANDMARK_SAMPLES))
            }
            None => {
                let place = self.map.place(&route.destination)?;
                Some(Landmark::from_footprint(&place.id, &place.footprint, LANDMARK_SAMPLES))
            }
        }
    }

    fn compute(&mut self, id: u64, op: ComputeOp, input: &TickInput) -> Result<(), String> {
        let goal = self.tasks[&id].goal.clone();
        let place = goal.place().unwrap_or_default().to_string();
        let apology = |s: &Self, key: &str| s.text(id, &TextRef::Template(key.into()));
        match op {
            ComputeOp::Route | ComputeOp::RouteNoStairs => {
                let constraints = RouteConstraints { no_stairs: op == ComputeOp::RouteNoStairs };
                let route = self
                    .map
                    .compute_route_from(input.robot_region, input.robot.position(), &place, constraints)
                    .map_err(|_| apology(self, "planning_apology"))?;
                let text = self
                    .map
                    .verbalize_route(&route, self.templates.language)
                    .map_err(|_| apology(self, "planning_apology"))?;
                let t = self.tasks.get_mut(&id).expect("task exists");
                t.mem.vars.insert("route_text".into(), text);
                t.mem.route = Some(route);
            }
            ComputeOp::Svp | ComputeOp::SvpReplan => {
                let person = self.tasks[&id].person.clone();
                let route = self.tasks[&id].mem.route.clone().ok_or_else(|| apology(self, "visibility_apology"))?;
                let (Some(landmark), Some(grid)) = (self.landmark_for(&route), self.grid.as_ref()) else {
                    return Err(apology(self, "visibility_apology"));
                };
                if !self.visibility.contains_key(&landmark.id) {
                    let v = compute_visibility_grid(grid, &landmark).map_err(|_| apology(self, "visibility_apology"))?;
                    self.visibility.insert(landmark.id.clone(), v);
                }
                let human = self.last_seen.get(&person).copied().unwrap_or(input.robot.position());
                let placement = plan_svp(human, &landmark, &self.visibility[&landmark.id], grid, &self.svp)
                    .map_err(|_| apology(self, "visibility_apology"))?;
                self.out.actions.push(Action::Placement {
                    task: id,
                    landmark: placement.landmark.clone(),
                    human_target: placement.human_target,
                    robot: placement.robot,
                    visibility: placement.visibility,
                });
                let t = self.tasks.get_mut(&id).expect("task exists");
                t.mem.placement = Some(placement);
                t.mem.navigating = false;
            }
            ComputeOp::CountRepeat => {
                self.tasks.get_mut(&id).expect("task exists").repeats += 1;
            }
            ComputeOp::QuizStart => {
                let q = QuizState::new_session(&self.quiz_bank, &mut self.quiz_rng);
                let prompt = q.prompt(&self.templates).unwrap_or_default();
                let t = self.tasks.get_mut(&id).expect("task exists");
                t.mem.vars.insert("quiz_prompt".into(), prompt.clone());
                t.mem.vars.insert("quiz_question".into(), prompt);
                t.mem.quiz = Some(q);
            }
            ComputeOp::QuizAnswer => {
                let t = &self.tasks[&id];
                let (Some(q), Some(ans)) = (t.mem.quiz.clone(), t.mem.vars.get("answer_text").cloned()) else {
                    return Ok(());
                };
                let nlu = NluResult {
                    act: DialogueAct::Answer,
                    frames: Vec::new(),
                    value: ans.parse().ok(),
                    text: ans,
                };
                let (text, next, _) = quiz_turn(&nlu, &q, &self.templates);
                let question = next.prompt(&self.templates).unwrap_or_default();
                let t = self.tasks.get_mut(&id).expect("task exists");
                t.mem.vars.insert("quiz_prompt".into(), text);
                t.mem.vars.insert("quiz_question".into(), question);
                t.mem.quiz = Some(next);
            }
            ComputeOp::DescribeRoute => {
                let text = route_description_reply(
                    &place,
                    &self.map,
                    input.robot_region,
                    RouteConstraints::default(),
                    &self.templates,
                );
                self.tasks.get_mut(&id).expect("task exists").mem.vars.insert("route_text".into(), text);
            }
        }
        Ok(())
    }
}

fn act_name(act: DialogueAct) -> String {
    serde_json::to_value(act).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

impl Memory {
    /// Records the answer that completed an ask step.
    fn record_answer(&mut self, a: NluResult) {
        self.vars.insert("answered".into(), act_name(a.act));
        let text = a.value.map_or(a.text, |v| v.to_string());
        self.vars.insert("answer_text".into(), text);
    }
}
