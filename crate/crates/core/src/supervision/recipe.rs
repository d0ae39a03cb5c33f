//! Recipe steps, the built-in recipes and their compiled form.

use crate::dialogue::DialogueAct;
use crate::world_model::PredicatePattern;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecipeError {
    #[error("recipe '{recipe}': unknown label '{label}'")]
    UnknownLabel { recipe: String, label: String },
    #[error("recipe '{recipe}': duplicate label '{label}'")]
    DuplicateLabel { recipe: String, label: String },
    #[error("recipe '{recipe}': ask step declares no expected acts")]
    EmptyExpects { recipe: String },
    #[error("recipe '{recipe}': check timeout must be positive")]
    ZeroTimeout { recipe: String },
    #[error("recipe override: {0}")]
    Format(String),
}

/// Text to say: a template filled from the task's variables, or a variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextRef {
    Template(String),
    Var(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhysicalKind {
    Navigate,
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhysicalTarget {
    /// The planned robot pose.
    RobotPose,
    /// The destination place.
    Destination,
    /// The first access point of the route; skipped when the route has none.
    AccessPoint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckPredicate {
    /// The person stands near the human target and sees the landmark.
    HumanReady,
    /// The person looked at a pointed target since the pointing began.
    Looked,
    /// A live predicate matches; `$person` and `$landmark` in the pattern
    /// are substituted.
    Live { pattern: PredicatePattern },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "then", rename_all = "snake_case")]
pub enum OnTimeout {
    Continue,
    Goto { label: String },
    Abort { reason: AbortReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    UserQuit,
    HumanLost,
    PlanningFailed,
}

impl AbortReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            AbortReason::UserQuit => "user_quit",
            AbortReason::HumanLost => "human_lost",
            AbortReason::PlanningFailed => "planning_failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComputeOp {
    /// Route from the robot's region; on failure apologize and abort.
    Route,
    /// Route again with stairs excluded.
    RouteNoStairs,
    /// Shared-perspective placement for the route's landmark.
    Svp,
    /// Placement again from the person's current position.
    SvpReplan,
    /// Spend one repetition.
    CountRepeat,
    QuizStart,
    /// Grade the last answer and prepare the next prompt.
    QuizAnswer,
    /// Verbalize the route into the `route_text` variable.
    DescribeRoute,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    RouteUsesStairs,
    Answered(DialogueAct),
    RepeatsLeft,
    NavigateEnabled,
    QuizFinished,
    All(Vec<Condition>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    Say {
        text: TextRef,
    },
    /// Blocks until the person answers with one of `expects`. `reask` is
    /// the text used when the question is raised again.
    Ask {
        prompt: TextRef,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reask: Option<TextRef>,
        expects: Vec<DialogueAct>,
    },
    Physical {
        kind: PhysicalKind,
        target: PhysicalTarget,
    },
    Check {
        predicate: CheckPredicate,
        timeout: u64,
        on_timeout: OnTimeout,
    },
    Compute {
        op: ComputeOp,
    },
    Branch {
        condition: Condition,
        then: Vec<Step>,
        #[serde(default, rename = "else", skip_serializing_if = "Vec::is_empty")]
        otherwise: Vec<Step>,
    },
    Label {
        name: String,
    },
    Goto {
        label: String,
    },
    Abort {
        reason: AbortReason,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipe {
    pub name: String,
    pub steps: Vec<Step>,
}

/// Flattened instruction. Branches become conditional jumps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Say(TextRef),
    Ask { prompt: TextRef, reask: Option<TextRef>, expects: Vec<DialogueAct> },
    Physical { kind: PhysicalKind, target: PhysicalTarget },
    Check { predicate: CheckPredicate, timeout: u64, on_timeout: Timeout },
    Compute(ComputeOp),
    Jump(usize),
    JumpUnless(Condition, usize),
    Abort(AbortReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timeout {
    Continue,
    Jump(usize),
    Abort(AbortReason),
}

impl Instr {
    /// Control flow costs no tick.
    pub fn is_control(&self) -> bool {
        matches!(self, Instr::Jump(_) | Instr::JumpUnless(..))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub instrs: Vec<Instr>,
}

enum Pending {
    Goto(String),
    Timeout(String),
}

impl Recipe {
    pub fn compile(&self) -> Result<Program, RecipeError> {
        let mut instrs = Vec::new();
        let mut labels = BTreeMap::new();
        let mut fixups: Vec<(usize, Pending)> = Vec::new();
        self.emit(&self.steps, &mut instrs, &mut labels, &mut fixups)?;
        for (at, pending) in fixups {
            let label = match &pending {
                Pending::Goto(l) | Pending::Timeout(l) => l,
            };
            let target = *labels
                .get(label)
                .ok_or_else(|| RecipeError::UnknownLabel { recipe: self.name.clone(), label: label.clone() })?;
            match (&mut instrs[at], pending) {
                (Instr::Jump(t), Pending::Goto(_)) => *t = target,
                (Instr::Check { on_timeout, .. }, Pending::Timeout(_)) => *on_timeout = Timeout::Jump(target),
                _ => unreachable!("fixup points at its own instruction"),
            }
        }
        Ok(Program { name: self.name.clone(), instrs })
    }

    fn emit(
        &self,
        steps: &[Step],
        out: &mut Vec<Instr>,
        labels: &mut BTreeMap<String, usize>,
        fixups: &mut Vec<(usize, Pending)>,
    ) -> Result<(), RecipeError> {
        for step in steps {
            match step {
                Step::Say { text } => out.push(Instr::Say(text.clone())),
                Step::Ask { prompt, reask, expects } => {
                    if expects.is_empty() {
                        return Err(RecipeError::EmptyExpects { recipe: self.name.clone() });
                    }
                    out.push(Instr::Ask { prompt: prompt.clone(), reask: reask.clone(), expects: expects.clone() });
                }
                Step::Physical { kind, target } => out.push(Instr::Physical { kind: *kind, target: *target }),
                Step::Check { predicate, timeout, on_timeout } => {
                    if *timeout == 0 {
                        return Err(RecipeError::ZeroTimeout { recipe: self.name.clone() });
                    }
                    let t = match on_timeout {
                        OnTimeout::Continue => Timeout::Continue,
                        OnTimeout::Abort { reason } => Timeout::Abort(*reason),
                        OnTimeout::Goto { label } => {
                            fixups.push((out.len(), Pending::Timeout(label.clone())));
                            Timeout::Continue
                        }
                    };
                    out.push(Instr::Check { predicate: predicate.clone(), timeout: *timeout, on_timeout: t });
                }
                Step::Compute { op } => out.push(Instr::Compute(*op)),
                Step::Branch { condition, then, otherwise } => {
                    let jump_unless = out.len();
                    out.push(Instr::JumpUnless(condition.clone(), 0));
                    self.emit(then, out, labels, fixups)?;
                    if otherwise.is_empty() {
                        let end = out.len();
                        out[jump_unless] = Instr::JumpUnless(condition.clone(), end);
                    } else {
                        let skip = out.len();
                        out.push(Instr::Jump(0));
                        let else_at = out.len();
                        out[jump_unless] = Instr::JumpUnless(condition.clone(), else_at);
                        self.emit(otherwise, out, labels, fixups)?;
                        let end = out.len();
                        out[skip] = Instr::Jump(end);
                    }
                }
                Step::Label { name } => {
                    if labels.insert(name.clone(), out.len()).is_some() {
                        return Err(RecipeError::DuplicateLabel { recipe: self.name.clone(), label: name.clone() });
                    }
                }
                Step::Goto { label } => {
                    fixups.push((out.len(), Pending::Goto(label.clone())));
                    out.push(Instr::Jump(0));
                }
                Step::Abort { reason } => out.push(Instr::Abort(*reason)),
            }
        }
        Ok(())
    }
}

/// Timing knobs of the built-in guidance recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidanceParams {
    /// Consecutive ticks without seeing the person before their tasks end.
    pub t_lost: u64,
    pub repeat_limit: u32,
    pub navigate: bool,
    /// Ticks to wait for the person to reach the viewing spot.
    pub ready_timeout: u64,
    /// Ticks to wait for the person to look where the robot points.
    pub look_timeout: u64,
    /// How close to the human target counts as arrived, m.
    pub ready_radius: f64,
    /// Ticks after which a navigation step gives up.
    pub navigate_timeout: u64,
}

impl Default for GuidanceParams {
    fn default() -> Self {
        GuidanceParams {
            t_lost: 100,
            repeat_limit: 2,
            navigate: true,
            ready_timeout: 150,
            look_timeout: 40,
            ready_radius: 1.0,
            navigate_timeout: 600,
        }
    }
}

fn say(key: &str) -> Step {
    Step::Say { text: TextRef::Template(key.into()) }
}

fn label(name: &str) -> Step {
    Step::Label { name: name.into() }
}

fn goto(name: &str) -> Step {
    Step::Goto { label: name.into() }
}

fn ready_check(on_timeout: &str, timeout: u64) -> Step {
    Step::Check {
        predicate: CheckPredicate::HumanReady,
        timeout,
        on_timeout: OnTimeout::Goto { label: on_timeout.into() },
    }
}

/// Route guidance: route (asking about stairs when needed), placement,
/// optional navigation, wait for the person, point at the destination and
/// the access point while describing the route, check they looked, ask
/// whether they understood and repeat on request.
pub fn guidance_recipe(params: &GuidanceParams) -> Recipe {
    use DialogueAct::{Affirm, Deny};
    let steps = vec![
        Step::Compute { op: ComputeOp::Route },
        Step::Branch {
            condition: Condition::RouteUsesStairs,
            then: vec![
                Step::Ask {
                    prompt: TextRef::Template("stairs_question".into()),
                    reask: None,
                    expects: vec![Affirm, Deny],
                },
                Step::Branch {
                    condition: Condition::Answered(Deny),
                    then: vec![Step::Compute { op: ComputeOp::RouteNoStairs }],
                    otherwise: vec![],
                },
            ],
            otherwise: vec![],
        },
        Step::Compute { op: ComputeOp::Svp },
        say("join_request"),
        Step::Branch {
            condition: Condition::NavigateEnabled,
            then: vec![Step::Physical { kind: PhysicalKind::Navigate, target: PhysicalTarget::RobotPose }],
            otherwise: vec![],
        },
        ready_check("replan", params.ready_timeout),
        goto("point"),
        label("replan"),
        Step::Compute { op: ComputeOp::SvpReplan },
        say("join_request"),
        ready_check("give_up", params.ready_timeout),
        goto("point"),
        label("give_up"),
        say("visibility_apology"),
        Step::Abort { reason: AbortReason::PlanningFailed },
        label("point"),
        Step::Physical { kind: PhysicalKind::Point, target: PhysicalTarget::Destination },
        Step::Physical { kind: PhysicalKind::Point, target: PhysicalTarget::AccessPoint },
        Step::Say { text: TextRef::Var("route_text".into()) },
        Step::Check { predicate: CheckPredicate::Looked, timeout: params.look_timeout, on_timeout: OnTimeout::Continue },
        Step::Ask {
            prompt: TextRef::Template("understood_question".into()),
            reask: None,
            expects: vec![Affirm, Deny],
        },
        Step::Branch {
            condition: Condition::All(vec![Condition::Answered(Deny), Condition::RepeatsLeft]),
            then: vec![Step::Compute { op: ComputeOp::CountRepeat }, say("repeat_ack"), goto("point")],
            otherwise: vec![],
        },
        say("closing"),
    ];
    Recipe { name: "guidance".into(), steps }
}

/// Multiple-choice quiz over a seeded selection of questions.
pub fn quiz_recipe() -> Recipe {
    let steps = vec![
        Step::Compute { op: ComputeOp::QuizStart },
        label("ask"),
        Step::Ask {
            prompt: TextRef::Var("quiz_prompt".into()),
            reask: Some(TextRef::Var("quiz_question".into())),
            expects: vec![DialogueAct::Answer],
        },
        Step::Compute { op: ComputeOp::QuizAnswer },
        Step::Branch {
            condition: Condition::QuizFinished,
            then: vec![Step::Say { text: TextRef::Var("quiz_prompt".into()) }],
            otherwise: vec![goto("ask")],
        },
    ];
    Recipe { name: "quiz".into(), steps }
}

/// Spoken route only, no physical acts.
pub fn route_description_recipe() -> Recipe {
    Recipe {
        name: "route_description".into(),
        steps: vec![
            Step::Compute { op: ComputeOp::DescribeRoute },
            Step::Say { text: TextRef::Var("route_text".into()) },
        ],
    }
}

/// The recipe used for each goal kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipeBook {
    pub guidance: Recipe,
    pub quiz: Recipe,
    pub route_description: Recipe,
}

impl RecipeBook {
    pub fn builtin(params: &GuidanceParams) -> Self {
        RecipeBook {
            guidance: guidance_recipe(params),
            quiz: quiz_recipe(),
            route_description: route_description_recipe(),
        }
    }

    /// Built-in recipes with any of `guidance`, `quiz` or
    /// `route_description` replaced by the entries of a JSON object.
    pub fn with_overrides(params: &GuidanceParams, json: &str) -> Result<Self, RecipeError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Overrides {
            guidance: Option<Recipe>,
            quiz: Option<Recipe>,
            route_description: Option<Recipe>,
        }
        let o: Overrides = serde_json::from_str(json).map_err(|e| RecipeError::Format(e.to_string()))?;
        let mut book = RecipeBook::builtin(params);
        if let Some(r) = o.guidance {
            book.guidance = r;
        }
        if let Some(r) = o.quiz {
            book.quiz = r;
        }
        if let Some(r) = o.route_description {
            book.route_description = r;
        }
        book.compile()?;
        Ok(book)
    }

    pub fn compile(&self) -> Result<[Program; 3], RecipeError> {
        Ok([self.guidance.compile()?, self.quiz.compile()?, self.route_description.compile()?])
    }
}
