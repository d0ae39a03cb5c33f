use super::scenario::{Look, Scenario, ScriptedPerson};
use super::{canonical, Channel, HarnessError, Record};
use crate::dialogue::{
    load_bank, parse, respond, Bots, ConversationContext, IdentityTranslator, Lexicon, Mode, Templates, Translator,
};
use crate::geometry::{wrap_angle, Point2, Pose2};
use crate::grid::OccupancyGrid;
use crate::navigation::{plan_on, step_local_on, Path};
use crate::perception::{assign_speech, descriptor_for, estimate_vfoa, GroundTruthPerson, Reidentifier, Sensor};
use crate::semantic_map::SemanticMap;
use crate::social_state::{attention_record, select_interactant, AttentionInput, AttentionRecord, EngagementEvent, EngagementLedger};
use crate::supervision::{parse_goal, Action, NavStatus, RecipeBook, Supervisor, TaskInput, TickInput};
use crate::world_model::{
    compute_predicates, PersonFact, PredicateTracker, SceneNode, StampedPredicate, VisibilityIndex, WorldSet,
    ROBOT_WORLD,
};
use crate::{assets, Language};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Dialogue lines kept for snapshots.
pub const DIALOGUE_HISTORY: usize = 20;
/// How long a person keeps looking where the robot pointed.
pub const REPLY_LOOK_TICKS: u64 = 20;
/// Ticks between a pointing gesture and the person turning to follow it.
const LOOK_DELAY: u64 = 3;
/// Scripted persons stop rather than step closer to the robot than this.
const PERSON_KEEPOUT: f64 = 0.6;
/// Distance of the screen target in front of the robot.
const SCREEN_OFFSET: f64 = 0.2;
/// The screen sits below the face: heads pitched below this look at it.
const SCREEN_PITCH: f64 = -0.05;
/// Pitch of a head looking at the screen.
const SCREEN_LOOK_PITCH: f64 = -0.1;
/// Everyone in the simulation shares the robot's storey.
const ROBOT_FLOOR: i32 = 1;

/// An operator instruction, applied at the next tick boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    Spawn {
        person: String,
        at: Point2,
        #[serde(default)]
        label: Option<String>,
    },
    Move {
        person: String,
        to: Point2,
    },
    Head {
        person: String,
        look: Look,
        #[serde(default)]
        pitch: f64,
    },
    Utter {
        person: String,
        text: String,
    },
    Speaking {
        person: String,
        on: bool,
    },
    Pause,
    Resume,
    /// Goal for a perceived identity.
    Goal {
        person: String,
        goal: Value,
    },
}

#[derive(Debug, Clone)]
struct Agent {
    script: ScriptedPerson,
    descriptor: Vec<f64>,
    position: Point2,
    present: bool,
    /// Walk target set by guidance or a command, with the tick it was set.
    guided: Option<(u64, Point2)>,
    head_cmd: Option<(u64, Look, f64)>,
    speaking_cmd: Option<bool>,
    glance: Option<(u64, u64, Point2)>,
    queued: BTreeMap<u64, Vec<String>>,
    replied: Vec<bool>,
}

impl Agent {
    fn new(script: ScriptedPerson) -> Self {
        Agent {
            descriptor: descriptor_for(script.label()),
            position: script.start,
            present: false,
            guided: None,
            head_cmd: None,
            speaking_cmd: None,
            glance: None,
            queued: BTreeMap::new(),
            replied: vec![false; script.replies.len()],
            script,
        }
    }

    fn scheduled_absent(&self, tick: u64) -> bool {
        self.script.absent.iter().any(|[a, b]| (*a..=*b).contains(&tick))
    }

    fn target(&self, tick: u64) -> Option<Point2> {
        let scripted = self.script.waypoints.iter().rev().find(|w| w.tick <= tick).map(|w| (w.tick, w.to));
        match (scripted, self.guided) {
            (Some(s), Some(g)) => Some(if s.0 > g.0 { s.1 } else { g.1 }),
            (s, g) => s.or(g).map(|x| x.1),
        }
    }

    fn head(&self, tick: u64, robot: &Pose2) -> (f64, f64) {
        let cue = self.script.head.iter().rev().find(|h| h.tick <= tick).map(|h| (h.tick, h.look, h.pitch));
        let (look, pitch) = match (cue, self.head_cmd) {
            (Some(c), Some(m)) if c.0 > m.0 => (c.1, c.2),
            (_, Some(m)) => (m.1, m.2),
            (Some(c), None) => (c.1, c.2),
            (None, None) => (Look::Robot, 0.0),
        };
        if let Some((from, to, at)) = self.glance {
            if (from..to).contains(&tick) {
                return (self.bearing_or(&at, 0.0), pitch);
            }
        }
        let rp = robot.position();
        let yaw = match look {
            Look::Robot => self.bearing_or(&rp, 0.0),
            Look::Screen => return (self.bearing_or(&screen_point(robot), 0.0), pitch + SCREEN_LOOK_PITCH),
            Look::Away => wrap_angle(self.bearing_or(&rp, 0.0) + std::f64::consts::PI),
            Look::Yaw(y) => wrap_angle(y),
            Look::At(p) => self.bearing_or(&p, 0.0),
        };
        (yaw, pitch)
    }

    fn bearing_or(&self, to: &Point2, fallback: f64) -> f64 {
        if self.position.distance(to) > 0.0 {
            self.position.bearing_to(to)
        } else {
            fallback
        }
    }

    fn speaking(&self, tick: u64) -> bool {
        self.speaking_cmd.unwrap_or(false) || self.script.speaking.iter().any(|[a, b]| (*a..=*b).contains(&tick))
    }
}

fn screen_point(robot: &Pose2) -> Point2 {
    Point2::new(robot.x + SCREEN_OFFSET * robot.yaw.cos(), robot.y + SCREEN_OFFSET * robot.yaw.sin())
}

#[derive(Debug, Clone, Default)]
struct Nav {
    status: NavStatus,
    task: Option<u64>,
    path: Option<Path>,
    goal: Option<Pose2>,
}

#[derive(Debug, Clone, Serialize)]
struct TrackView {
    track: u64,
    identity: String,
    position: Point2,
    head_yaw: f64,
    head_pitch: f64,
    distance: f64,
    azimuth: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    vfoa: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct SpeechView {
    azimuth: f64,
    p_speech: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    track: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    identity: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct Line {
    tick: u64,
    speaker: String,
    text: String,
}

/// The whole simulated world. One call to [`Simulation::step`] is one tick.
pub struct Simulation {
    scenario: Scenario,
    map: SemanticMap,
    nav_grid: Option<OccupancyGrid>,
    vis_grid: Option<OccupancyGrid>,
    vis_index: Option<VisibilityIndex>,
    dt: f64,
    tick: u64,
    robot: Pose2,
    agents: Vec<Agent>,
    sensor: Sensor,
    reid: Reidentifier,
    worlds: WorldSet,
    tracker: PredicateTracker,
    ledger: EngagementLedger,
    selected: Option<String>,
    lexicon: Lexicon,
    bots: Bots,
    translator: IdentityTranslator,
    contexts: BTreeMap<String, ConversationContext>,
    sup: Supervisor,
    nav: Nav,
    /// Recently pointed targets, newest last.
    pointed: Vec<(u64, String, Point2)>,
    known: BTreeMap<String, Point2>,
    /// Perceived identity to the scripted person behind it.
    agent_of: BTreeMap<String, String>,
    tracks: Vec<TrackView>,
    attention: Vec<AttentionRecord>,
    lines: VecDeque<Line>,
    min_distance: f64,
    any_task: bool,
    idle_since: Option<u64>,
    paused: bool,
    next_goal: usize,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Simulation, HarnessError> {
        scenario.validate()?;
        let map = match &scenario.map {
            None => SemanticMap::load(assets::MINIMALL_MAP)?,
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| HarnessError::Scenario(format!("cannot read map {path}: {e}")))?;
                SemanticMap::load(&text)?
            }
        };
        let lang = scenario.language;
        let templates = Templates::bundled(lang);
        let bank = load_bank(match lang {
            Language::En => assets::QUIZ_EN,
            Language::Fi => assets::QUIZ_FI,
        })
        .map_err(HarnessError::Scenario)?;
        let mut sup = Supervisor::new(map.clone(), templates.clone(), bank, scenario.seed);
        sup.svp = scenario.svp.clone();
        sup.set_params(scenario.guidance.clone());
        if let Some(overrides) = &scenario.recipes {
            let book = RecipeBook::with_overrides(&scenario.guidance, &overrides.to_string())
                .map_err(|e| HarnessError::Scenario(e.to_string()))?;
            sup.set_recipes(&book).map_err(|e| HarnessError::Scenario(e.to_string()))?;
        }
        let grid = map.occupancy_grid();
        let mut agents: Vec<Agent> = scenario.persons.iter().cloned().map(Agent::new).collect();
        agents.sort_by(|a, b| a.script.id.cmp(&b.script.id));
        Ok(Simulation {
            robot: scenario.robot.unwrap_or_else(|| map.robot_home()),
            nav_grid: grid.as_ref().map(|g| g.inflated(scenario.navigation.robot_radius)),
            vis_grid: grid,
            vis_index: None,
            dt: 1.0 / f64::from(scenario.tick_rate),
            tick: 0,
            agents,
            sensor: Sensor::new(scenario.sensor.clone(), scenario.seed),
            reid: Reidentifier::default(),
            worlds: WorldSet::from_map(&map),
            tracker: PredicateTracker::default(),
            ledger: EngagementLedger::default(),
            selected: None,
            lexicon: Lexicon::from_map(&map),
            bots: Bots::new(templates, &map),
            translator: IdentityTranslator,
            contexts: BTreeMap::new(),
            sup,
            nav: Nav::default(),
            pointed: Vec::new(),
            known: BTreeMap::new(),
            agent_of: BTreeMap::new(),
            tracks: Vec::new(),
            attention: Vec::new(),
            lines: VecDeque::new(),
            min_distance: f64::INFINITY,
            any_task: false,
            idle_since: None,
            paused: false,
            next_goal: 0,
            map,
            scenario,
        })
    }

    /// Next tick to run.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn robot(&self) -> Pose2 {
        self.robot
    }

    pub fn supervisor(&self) -> &Supervisor {
        &self.sup
    }

    pub fn predicates(&self) -> &PredicateTracker {
        &self.tracker
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    /// Ground-truth position of a scripted person.
    pub fn person_position(&self, id: &str) -> Option<Point2> {
        self.agents.iter().find(|a| a.script.id == id).map(|a| a.position)
    }

    /// Ground-truth positions of the persons currently in the scene.
    pub fn present_persons(&self) -> Vec<(&str, Point2)> {
        self.agents.iter().filter(|a| a.present).map(|a| (a.script.id.as_str(), a.position)).collect()
    }

    /// Smallest robot-person distance seen so far over present persons.
    pub fn min_human_distance(&self) -> Option<f64> {
        self.min_distance.is_finite().then_some(self.min_distance)
    }

    pub fn finished(&self) -> bool {
        if self.tick >= self.scenario.max_ticks {
            return true;
        }
        match (self.scenario.stop_when_idle, self.idle_since) {
            (Some(grace), Some(since)) => self.tick > since + grace,
            _ => false,
        }
    }

    fn agent_mut(&mut self, id: &str) -> Result<&mut Agent, String> {
        self.agents.iter_mut().find(|a| a.script.id == id).ok_or_else(|| format!("unknown person '{id}'"))
    }

    /// Applies an operator command; takes effect on the next tick.
    pub fn apply(&mut self, command: &Command) -> Result<(), String> {
        let now = self.tick;
        match command {
            Command::Spawn { person, at, label } => {
                if self.agents.iter().any(|a| &a.script.id == person) {
                    return Err(format!("person '{person}' already exists"));
                }
                if person.is_empty() || !at.is_finite() {
                    return Err("spawn needs an id and a finite position".into());
                }
                let mut script = ScriptedPerson::new(person, *at);
                script.label = label.clone();
                let i = self.agents.partition_point(|a| a.script.id < *person);
                self.agents.insert(i, Agent::new(script));
            }
            Command::Move { person, to } => {
                if !to.is_finite() {
                    return Err("move target must be finite".into());
                }
                self.agent_mut(person)?.guided = Some((now, *to));
            }
            Command::Head { person, look, pitch } => {
                self.agent_mut(person)?.head_cmd = Some((now, *look, *pitch));
            }
            Command::Utter { person, text } => {
                self.agent_mut(person)?.queued.entry(now).or_default().push(text.clone());
            }
            Command::Speaking { person, on } => {
                self.agent_mut(person)?.speaking_cmd = Some(*on);
            }
            Command::Pause => self.paused = true,
            Command::Resume => self.paused = false,
            Command::Goal { person, goal } => {
                let goal = parse_goal(goal).map_err(|e| e.to_string())?;
                self.sup.submit_goal(goal, person);
                self.any_task = true;
            }
        }
        Ok(())
    }

    /// Runs one tick and returns its records. Nothing happens while paused.
    pub fn step(&mut self) -> Vec<Record> {
        if self.paused {
            return Vec::new();
        }
        let t = self.tick;
        let mut out = Vec::new();
        let mut later = Vec::new();

        while let Some(g) = self.scenario.goals.get(self.next_goal).filter(|g| g.tick <= t).cloned() {
            self.next_goal += 1;
            match parse_goal(&g.goal) {
                Ok(goal) => {
                    self.sup.submit_goal(goal, &g.person);
                    self.any_task = true;
                }
                Err(e) => later.push(Record::new(t, Channel::Task, json!({"event": "rejected", "error": e.to_string()}))),
            }
        }

        self.move_agents(t);
        let truth = self.ground_truth(t);
        let gaze = self.gaze_pose();
        let obs = self.sensor.sense(&truth, &gaze, t);

        // Identities and VFOA.
        let ids: Vec<String> = obs.tracks.iter().map(|tr| self.reid.observe(tr.track_id, &tr.descriptor).0).collect();
        let mut positions = BTreeMap::new();
        for (tr, id) in obs.tracks.iter().zip(&ids) {
            positions.insert(id.clone(), tr.position);
            self.known.insert(id.clone(), tr.position);
            if let Some(a) = self
                .agents
                .iter()
                .filter(|a| a.present)
                .min_by(|a, b| a.position.distance(&tr.position).total_cmp(&b.position.distance(&tr.position)))
            {
                self.agent_of.insert(id.clone(), a.script.id.clone());
            }
            let _ = self.worlds.ensure_belief(id);
            let _ = self.worlds.set_node(ROBOT_WORLD, SceneNode::point(id.clone(), tr.position), t);
        }
        let mut targets = vec![("robot".to_string(), self.robot.position()), ("screen".to_string(), screen_point(&self.robot))];
        targets.extend(positions.iter().map(|(id, p)| (id.clone(), *p)));
        targets.extend(self.pointed.iter().map(|(_, id, at)| (id.clone(), *at)));
        let cone = self.scenario.sensor.vfoa_cone;
        let vfoa: Vec<Option<String>> = obs
            .tracks
            .iter()
            .zip(&ids)
            .map(|(tr, id)| {
                // Robot and screen share a bearing; pitch tells them apart.
                let skip = if tr.head_pitch < SCREEN_PITCH { "robot" } else { "screen" };
                let own: Vec<(String, Point2)> =
                    targets.iter().filter(|(n, _)| n != id && n != skip).cloned().collect();
                estimate_vfoa(tr, &own, cone).map(str::to_string)
            })
            .collect();

        // Speech.
        let mut speaking = BTreeSet::new();
        let mut heard: Vec<(String, String)> = Vec::new();
        let mut speech = Vec::new();
        for ev in &obs.speech {
            let mut view = SpeechView {
                azimuth: ev.azimuth,
                p_speech: ev.p_speech,
                track: None,
                identity: None,
                text: ev.text.clone(),
                error: None,
            };
            match assign_speech(ev, &obs.tracks, self.scenario.sensor.speech_tolerance) {
                Ok(Some(track)) => {
                    let i = obs.tracks.iter().position(|tr| tr.track_id == track).expect("assigned to a listed track");
                    view.track = Some(track);
                    view.identity = Some(ids[i].clone());
                    speaking.insert(ids[i].clone());
                    if let Some(text) = &ev.text {
                        heard.push((ids[i].clone(), text.clone()));
                    }
                }
                Ok(None) => {}
                Err(e) => view.error = Some(e.to_string()),
            }
            speech.push(view);
        }
        self.tracks = obs
            .tracks
            .iter()
            .zip(&ids)
            .zip(&vfoa)
            .map(|((tr, id), v)| TrackView {
                track: tr.track_id,
                identity: id.clone(),
                position: tr.position,
                head_yaw: tr.head_yaw,
                head_pitch: tr.head_pitch,
                distance: tr.distance,
                azimuth: tr.azimuth,
                vfoa: v.clone(),
            })
            .collect();
        out.push(Record::new(
            t,
            Channel::Perception,
            json!({"robot": self.robot, "gaze_yaw": gaze.yaw, "tracks": self.tracks, "speech": speech}),
        ));

        // Beliefs and predicates.
        for (id, v) in ids.iter().zip(&vfoa) {
            let _ = self.worlds.update_belief(id, v.as_deref(), t);
        }
        let facts: Vec<PersonFact> = ids
            .iter()
            .zip(&obs.tracks)
            .zip(&vfoa)
            .map(|((id, tr), v)| PersonFact {
                id: id.clone(),
                position: tr.position,
                looking_at: v.clone(),
                speaking: speaking.contains(id),
                floor: Some(ROBOT_FLOOR),
            })
            .collect();
        self.refresh_visibility_index();
        match compute_predicates(&self.worlds, ROBOT_WORLD, &facts, self.vis_index.as_ref()) {
            Ok(holding) => {
                let changes = self.tracker.update(t, &holding);
                let log = |event: &str, p: &StampedPredicate| {
                    Record::new(
                        t,
                        Channel::Predicate,
                        json!({"event": event, "name": p.name.as_str(), "args": p.args, "t_start": p.t_start, "t_end": p.t_end}),
                    )
                };
                out.extend(changes.closed.iter().map(|p| log("close", p)));
                out.extend(changes.opened.iter().map(|p| log("open", p)));
            }
            Err(e) => out.push(Record::new(t, Channel::Predicate, json!({"error": e.to_string()}))),
        }

        // Attention.
        let rp = self.robot.position();
        let mut records: Vec<AttentionRecord> = obs
            .tracks
            .iter()
            .zip(&ids)
            .zip(&vfoa)
            .map(|((tr, id), v)| {
                let to_robot = if tr.position.distance(&rp) > 0.0 { tr.position.bearing_to(&rp) } else { tr.head_yaw };
                let input = AttentionInput {
                    id: id.clone(),
                    head_yaw_rel: wrap_angle(tr.head_yaw - to_robot),
                    head_pitch: tr.head_pitch,
                    looking_at_robot: v.as_deref() == Some("robot"),
                    looking_at_screen: v.as_deref() == Some("screen"),
                    distance: tr.distance,
                };
                attention_record(&input, &self.scenario.fusion, t)
            })
            .collect();
        records.sort_by(|a, b| a.track.cmp(&b.track));
        self.ledger.expire(t);
        let selected = select_interactant(&records, &self.ledger, &self.scenario.fusion, t).map(str::to_string);
        let changed = selected != self.selected;
        if changed || !records.is_empty() {
            let rounded: Vec<AttentionRecord> = records.iter().map(AttentionRecord::rounded).collect();
            out.push(Record::new(
                t,
                Channel::Attention,
                json!({"records": rounded, "selected": selected, "previous": self.selected, "changed": changed}),
            ));
        }
        self.selected = selected;
        self.attention = records;

        // Dialogue.
        let mut inputs = Vec::new();
        for (person, text) in heard {
            self.line(t, &person, &text);
            let mut ctx = self.contexts.get(&person).cloned().unwrap_or_else(|| ConversationContext {
                person: Some(person.clone()),
                language: self.scenario.language,
                ..Default::default()
            });
            match self.sup.running().filter(|task| task.person == person) {
                Some(_) => {
                    ctx.mode = self.sup.mode().unwrap_or(Mode::Chat);
                    ctx.pending_question = self.sup.pending_question().cloned();
                }
                None => {
                    if matches!(ctx.mode, Mode::Quiz | Mode::Guidance) {
                        ctx.mode = Mode::Chat;
                    }
                    ctx.pending_question = None;
                }
            }
            let english = self.translator.to_english(&text);
            let nlu = parse(&english, &ctx, &self.lexicon);
            let (resp, next) = respond(&nlu, &ctx, &self.bots);
            self.contexts.insert(person.clone(), next);
            out.push(Record::new(t, Channel::Dialogue, json!({"person": person, "heard": text, "nlu": nlu, "response": resp})));
            if !resp.text.is_empty() {
                self.robot_said(t, &resp.text);
            }
            if let Some(goal) = resp.goal {
                self.sup.submit_goal(goal, &person);
                self.any_task = true;
            }
            if resp.task_input.is_some() {
                inputs.push(TaskInput { person: person.clone(), nlu });
            }
        }

        // Supervision.
        let present: BTreeSet<String> = ids.iter().cloned().collect();
        let region = self
            .map
            .region_at(&rp, ROBOT_FLOOR)
            .map(|r| r.id.clone())
            .or_else(|| self.map.occupancy_region().map(str::to_string))
            .unwrap_or_default();
        let result = self.sup.tick(&TickInput {
            tick: t,
            present: &present,
            positions: &positions,
            robot: self.robot,
            robot_region: &region,
            predicates: &self.tracker,
            worlds: &self.worlds,
            inputs: &inputs,
            nav: self.nav.status,
        });
        for a in &result.actions {
            out.push(Record::new(t, Channel::Action, a));
            self.on_action(t, a, &mut out);
        }
        for e in &result.events {
            out.push(Record::new(t, Channel::Task, e));
            let cfg = &self.scenario.fusion;
            if e.starts_interaction() {
                self.ledger.on_task_event(&EngagementEvent::Started(e.person.clone()), cfg, t);
            } else if e.ends_interaction() {
                self.ledger.on_task_event(&EngagementEvent::Ended(e.person.clone()), cfg, t);
            }
        }
        out.extend(later);

        self.navigate(t, &mut out);
        for a in self.agents.iter().filter(|a| a.present) {
            self.min_distance = self.min_distance.min(a.position.distance(&self.robot.position()));
        }
        self.pointed.retain(|(at, _, _)| t < at + LOOK_DELAY + REPLY_LOOK_TICKS);

        let live = self.sup.running().is_some() || !self.sup.paused().is_empty();
        self.idle_since = if self.any_task && !live { Some(self.idle_since.unwrap_or(t)) } else { None };
        self.tick += 1;
        out
    }

    fn move_agents(&mut self, t: u64) {
        let rp = self.robot.position();
        let step = self.dt;
        for a in &mut self.agents {
            if let Some(target) = a.target(t) {
                let d = a.position.distance(&target);
                let next = if d <= a.script.speed * step { target } else { a.position.lerp(&target, a.script.speed * step / d) };
                let near = next.distance(&rp);
                if near >= PERSON_KEEPOUT || near >= a.position.distance(&rp) {
                    a.position = next;
                }
            }
            let gone = a.scheduled_absent(t);
            // A person re-enters only where there is room next to the robot.
            a.present = !gone && (a.present || a.position.distance(&rp) >= PERSON_KEEPOUT);
        }
    }

    fn ground_truth(&mut self, t: u64) -> Vec<GroundTruthPerson> {
        let robot = self.robot;
        let mut out = Vec::new();
        for a in &mut self.agents {
            let mut said: Vec<String> = a.queued.remove(&t).unwrap_or_default();
            said.extend(a.script.utterances.iter().filter(|u| u.tick == t).map(|u| u.text.clone()));
            if !a.present {
                continue;
            }
            let (head_yaw, head_pitch) = a.head(t, &robot);
            let utterance = (!said.is_empty()).then(|| said.join(" "));
            out.push(GroundTruthPerson {
                id: a.script.id.clone(),
                position: a.position,
                head_yaw,
                head_pitch,
                speaking: utterance.is_some() || a.speaking(t),
                descriptor: a.descriptor.clone(),
                utterance,
            });
        }
        out
    }

    /// The head turns to the task's person, else the selected person.
    fn gaze_pose(&self) -> Pose2 {
        let focus = self
            .sup
            .running()
            .and_then(|task| self.known.get(&task.person))
            .or_else(|| self.selected.as_ref().and_then(|s| self.known.get(s)));
        let rp = self.robot.position();
        match focus {
            Some(p) if p.distance(&rp) > 0.0 => Pose2::at(rp, rp.bearing_to(p)),
            _ => self.robot,
        }
    }

    fn refresh_visibility_index(&mut self) {
        let grids = self.sup.visibility_grids();
        let stale = match &self.vis_index {
            None => !grids.is_empty(),
            Some(ix) => !ix.landmarks.keys().eq(grids.keys()),
        };
        if stale {
            if let Some(grid) = &self.vis_grid {
                self.vis_index = Some(VisibilityIndex {
                    grid: grid.clone(),
                    threshold: self.sup.svp.v_min,
                    landmarks: grids.clone(),
                });
            }
        }
    }

    fn line(&mut self, tick: u64, speaker: &str, text: &str) {
        self.lines.push_back(Line { tick, speaker: speaker.to_string(), text: text.to_string() });
        while self.lines.len() > DIALOGUE_HISTORY {
            self.lines.pop_front();
        }
    }

    /// Logs robot speech and arms the first unused reply it triggers per person.
    fn robot_said(&mut self, t: u64, text: &str) {
        self.line(t, "robot", text);
        for a in self.agents.iter_mut().filter(|a| a.present) {
            let hit = a.script.replies.iter().enumerate().find(|(i, r)| !a.replied[*i] && text.contains(&r.on));
            if let Some((i, r)) = hit {
                a.replied[i] = true;
                a.queued.entry(t + r.delay.max(1)).or_default().push(r.text.clone());
            }
        }
    }

    fn person_of_task(&self, task: u64) -> Option<&str> {
        let person = &self.sup.task(task)?.person;
        self.agent_of.get(person).map(String::as_str)
    }

    fn on_action(&mut self, t: u64, action: &Action, out: &mut Vec<Record>) {
        match action {
            Action::Say { text, .. } | Action::Ask { text, .. } => self.robot_said(t, text),
            Action::Placement { task, human_target, .. } => {
                if let Some(id) = self.person_of_task(*task).map(str::to_string) {
                    if let Ok(a) = self.agent_mut(&id) {
                        if a.script.follows_guidance {
                            a.guided = Some((t, *human_target));
                        }
                    }
                }
            }
            Action::Point { task, target, at, .. } => {
                self.pointed.push((t, target.clone(), *at));
                if let Some(id) = self.person_of_task(*task).map(str::to_string) {
                    if let Ok(a) = self.agent_mut(&id) {
                        if a.script.looks_at_pointing {
                            a.glance = Some((t + LOOK_DELAY, t + LOOK_DELAY + REPLY_LOOK_TICKS, *at));
                        }
                    }
                }
            }
            Action::Navigate { task, goal } => {
                let planned = match &self.nav_grid {
                    Some(g) => plan_on(g, self.robot.position(), goal.position()).map_err(|e| e.to_string()),
                    None => Err("map has no occupancy grid".to_string()),
                };
                self.nav = Nav { status: NavStatus::Moving, task: Some(*task), path: None, goal: Some(*goal) };
                match planned {
                    Ok(path) => self.nav.path = Some(path),
                    Err(e) => {
                        self.nav.status = NavStatus::Failed;
                        out.push(Record::new(t, Channel::Action, json!({"action": "nav_result", "task": task, "status": "failed", "error": e})));
                    }
                }
            }
        }
    }

    fn navigate(&mut self, t: u64, out: &mut Vec<Record>) {
        if self.nav.status != NavStatus::Moving {
            return;
        }
        if self.nav.task != self.sup.running().map(|task| task.id) {
            self.nav = Nav::default();
            return;
        }
        let (Some(path), Some(goal), Some(grid)) = (&self.nav.path, self.nav.goal, &self.nav_grid) else {
            return;
        };
        let humans: Vec<Point2> = self.agents.iter().filter(|a| a.present).map(|a| a.position).collect();
        let step = step_local_on(&self.robot, path, &humans, grid, &self.scenario.navigation, self.dt);
        self.robot = step.pose;
        if self.robot.position().distance(&path.goal()) <= 1e-9 {
            self.robot.yaw = goal.yaw;
            self.nav.status = NavStatus::Arrived;
            out.push(Record::new(
                t,
                Channel::Action,
                json!({"action": "nav_result", "task": self.nav.task, "status": "arrived", "pose": self.robot}),
            ));
        }
    }

    /// State for the operator UI. Floats rounded, keys sorted.
    pub fn snapshot(&self) -> Value {
        let persons: Vec<Value> = self
            .agents
            .iter()
            .map(|a| {
                let (yaw, pitch) = a.head(self.tick, &self.robot);
                json!({"id": a.script.id, "position": a.position, "head_yaw": yaw, "head_pitch": pitch, "present": a.present})
            })
            .collect();
        let task = self.sup.running().map(|task| json!(task));
        let placement = self.sup.running().and_then(|task| task.placement()).map(|p| json!(p));
        canonical(json!({
            "kind": "snapshot",
            "tick": self.tick,
            "paused": self.paused,
            "robot": self.robot,
            "nav": self.nav.status,
            "persons": persons,
            "tracks": self.tracks,
            "attention": self.attention,
            "selected": self.selected,
            "task": task,
            "paused_tasks": self.sup.paused(),
            "dialogue": self.lines,
            "visibility": {
                "landmarks": self.sup.visibility_grids().keys().collect::<Vec<_>>(),
                "placement": placement,
            },
        }))
    }
}
