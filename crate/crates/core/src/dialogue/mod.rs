//! Rule-based dialogue: NLU, a small bot ensemble and priority arbitration.
//!
//! Bots only propose. The task bot turns directions and guidance requests
//! into task goals and forwards answers to whatever task is waiting for one;
//! the quiz bot starts quizzes; the chat bot handles small talk from a keyword
//! table; the fallback bot always has something to say. The highest priority
//! proposal wins.

mod nlu;
mod quiz;

pub use nlu::{normalize, parse, DialogueAct, Frame, FrameElement, FrameName, Lexicon, NluResult};
pub use quiz::{load_bank, quiz_turn, QuizOutcome, QuizQuestion, QuizState, QUESTIONS_PER_SESSION, RERAISE_AFTER};

use crate::semantic_map::{RouteConstraints, SemanticMap};
use crate::{assets, Language};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const TASK_BOT_PRIORITY: u32 = 30;
pub const QUIZ_BOT_PRIORITY: u32 = 20;
pub const CHAT_BOT_PRIORITY: u32 = 10;
pub const FALLBACK_PRIORITY: u32 = 0;
/// Consecutive fallback turns before the robot explains what it can do.
pub const STALEMATE_TURNS: u32 = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Idle,
    Chat,
    Quiz,
    Guidance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingQuestion {
    pub text: String,
    pub expects: Vec<DialogueAct>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationContext {
    pub mode: Mode,
    /// Set only while a task waits for an answer.
    pub pending_question: Option<PendingQuestion>,
    pub person: Option<String>,
    pub language: Language,
    /// Turns since the pending question was last asked that did not answer it.
    pub off_topic: u32,
    pub fallback_streak: u32,
    /// Physical guidance is unavailable; guidance requests become route descriptions.
    pub description_only: bool,
}

/// What a task should achieve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskGoal {
    Guidance { place: String },
    RouteDescription { place: String },
    Quiz,
}

impl TaskGoal {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskGoal::Guidance { .. } => "guidance",
            TaskGoal::RouteDescription { .. } => "route_description",
            TaskGoal::Quiz => "quiz",
        }
    }

    pub fn place(&self) -> Option<&str> {
        match self {
            TaskGoal::Guidance { place } | TaskGoal::RouteDescription { place } => Some(place),
            TaskGoal::Quiz => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BotResponse {
    pub bot: String,
    pub text: String,
    pub priority: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<TaskGoal>,
    /// The act is handed to the running task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_input: Option<DialogueAct>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRule {
    pub keywords: Vec<String>,
    pub reply: String,
}

/// Per-language surface text: named templates with `{slot}` fields, the
/// fallback rotation and the chat keyword table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub language: Language,
    pub templates: BTreeMap<String, String>,
    pub fallback: Vec<String>,
    #[serde(default)]
    pub chat: Vec<ChatRule>,
}

const REQUIRED_TEMPLATES: &[&str] = &[
    "greeting_reply",
    "capabilities",
    "unknown_place",
    "no_route",
    "guidance_ack",
    "description_ack",
    "quiz_start",
    "quiz_already",
    "quit_ack",
    "stairs_question",
    "understood_question",
    "repeat_ack",
    "closing",
    "join_request",
    "visibility_apology",
    "planning_apology",
    "quiz_question",
    "quiz_correct",
    "quiz_wrong",
    "quiz_clarify",
    "quiz_summary",
];

impl Templates {
    pub fn load(json: &str) -> Result<Self, String> {
        let t: Templates = serde_json::from_str(json).map_err(|e| e.to_string())?;
        if let Some(missing) = REQUIRED_TEMPLATES.iter().find(|k| !t.templates.contains_key(**k)) {
            return Err(format!("missing template '{missing}'"));
        }
        if t.fallback.is_empty() {
            return Err("fallback list is empty".into());
        }
        Ok(t)
    }

    pub fn bundled(lang: Language) -> Self {
        let src = match lang {
            Language::En => assets::TEMPLATES_EN,
            Language::Fi => assets::TEMPLATES_FI,
        };
        Templates::load(src).expect("bundled templates are valid")
    }

    /// The raw template, or the key itself when it is missing.
    pub fn get(&self, key: &str) -> String {
        self.templates.get(key).cloned().unwrap_or_else(|| key.to_string())
    }

    pub fn fill(&self, key: &str, slots: &[(&str, &str)]) -> String {
        let mut out = self.get(key);
        for (name, value) in slots {
            out = out.replace(&format!("{{{name}}}"), value);
        }
        out
    }

    fn chat_reply(&self, norm: &str) -> Option<&str> {
        let padded = format!(" {norm} ");
        self.chat
            .iter()
            .find(|r| r.keywords.iter().any(|k| padded.contains(&format!(" {k}"))))
            .map(|r| r.reply.as_str())
    }
}

/// Text-to-text hook applied before parsing non-English input.
pub trait Translator {
    fn to_english(&self, text: &str) -> String;
}

/// Leaves text unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn to_english(&self, text: &str) -> String {
        text.to_string()
    }
}

/// The bot ensemble for one language and map.
#[derive(Debug, Clone)]
pub struct Bots {
    pub templates: Templates,
    labels: BTreeMap<String, String>,
}

impl Bots {
    pub fn new(templates: Templates, map: &SemanticMap) -> Self {
        let labels = map.places().map(|p| (p.id.clone(), p.label.clone())).collect();
        Bots { templates, labels }
    }

    fn label<'a>(&'a self, place: &'a str) -> &'a str {
        self.labels.get(place).map_or(place, String::as_str)
    }

    fn task_bot(&self, nlu: &NluResult, ctx: &ConversationContext) -> Option<BotResponse> {
        let propose = |text: String, goal, task_input| BotResponse {
            bot: "task".into(),
            text,
            priority: TASK_BOT_PRIORITY,
            goal,
            task_input,
        };
        if let Some(q) = &ctx.pending_question {
            if q.expects.contains(&nlu.act) {
                return Some(propose(String::new(), None, Some(nlu.act)));
            }
        }
        if nlu.act == DialogueAct::Quit && matches!(ctx.mode, Mode::Guidance | Mode::Quiz) {
            let text = if ctx.mode == Mode::Guidance { self.templates.get("quit_ack") } else { String::new() };
            return Some(propose(text, None, Some(DialogueAct::Quit)));
        }
        let frame = nlu
            .frame(FrameName::RequestGuidance)
            .or_else(|| nlu.frame(FrameName::RequestDirections))?;
        let Some(place) = frame.element("place") else {
            return Some(propose(self.templates.get("unknown_place"), None, None));
        };
        let label = self.label(place);
        Some(if !ctx.description_only {
            propose(
                self.templates.fill("guidance_ack", &[("place", label)]),
                Some(TaskGoal::Guidance { place: place.to_string() }),
                None,
            )
        } else {
            propose(String::new(), Some(TaskGoal::RouteDescription { place: place.to_string() }), None)
        })
    }

    fn quiz_bot(&self, nlu: &NluResult, ctx: &ConversationContext) -> Option<BotResponse> {
        nlu.frame(FrameName::StartQuiz)?;
        let (text, goal) = if ctx.mode == Mode::Quiz {
            (self.templates.get("quiz_already"), None)
        } else {
            (self.templates.get("quiz_start"), Some(TaskGoal::Quiz))
        };
        Some(BotResponse { bot: "quiz".into(), text, priority: QUIZ_BOT_PRIORITY, goal, task_input: None })
    }

    fn chat_bot(&self, nlu: &NluResult) -> Option<BotResponse> {
        let text = match nlu.act {
            DialogueAct::Greeting => self.templates.get("greeting_reply"),
            _ => self.templates.chat_reply(&normalize(&nlu.text))?.to_string(),
        };
        Some(BotResponse { bot: "chat".into(), text, priority: CHAT_BOT_PRIORITY, goal: None, task_input: None })
    }

    fn fallback_bot(&self, ctx: &ConversationContext) -> BotResponse {
        let text = if ctx.fallback_streak + 1 >= STALEMATE_TURNS {
            self.templates.get("capabilities")
        } else {
            let f = &self.templates.fallback;
            f[ctx.fallback_streak as usize % f.len()].clone()
        };
        BotResponse { bot: "fallback".into(), text, priority: FALLBACK_PRIORITY, goal: None, task_input: None }
    }
}

/// Every bot proposes; the highest priority wins. Returns the winning
/// response and the context after the turn.
///
/// Turns that leave a pending question unanswered count as off topic; the
/// second such turn appends the question again.
pub fn respond(nlu: &NluResult, ctx: &ConversationContext, bots: &Bots) -> (BotResponse, ConversationContext) {
    let mut proposals: Vec<BotResponse> = [bots.task_bot(nlu, ctx), bots.quiz_bot(nlu, ctx), bots.chat_bot(nlu)]
        .into_iter()
        .flatten()
        .collect();
    proposals.push(bots.fallback_bot(ctx));
    // stable: equal priorities keep proposal order
    proposals.sort_by_key(|p| std::cmp::Reverse(p.priority));
    let mut winner = proposals.swap_remove(0);

    let mut next = ctx.clone();
    if winner.bot == "fallback" {
        next.fallback_streak = if ctx.fallback_streak + 1 >= STALEMATE_TURNS { 0 } else { ctx.fallback_streak + 1 };
    } else {
        next.fallback_streak = 0;
    }
    if next.mode == Mode::Idle && winner.goal.is_none() && winner.task_input.is_none() {
        next.mode = Mode::Chat;
    }
    match &ctx.pending_question {
        Some(_) if winner.task_input.is_some() || winner.goal.is_some() => next.off_topic = 0,
        Some(q) => {
            next.off_topic += 1;
            if next.off_topic >= RERAISE_AFTER {
                next.off_topic = 0;
                if !winner.text.is_empty() {
                    winner.text.push(' ');
                }
                winner.text.push_str(&q.text);
            }
        }
        None => next.off_topic = 0,
    }
    (winner, next)
}

/// Spoken route description to `place` (a place id or a free-text query)
/// starting from `region`.
pub fn route_description_reply(
    place: &str,
    map: &SemanticMap,
    region: &str,
    constraints: RouteConstraints,
    templates: &Templates,
) -> String {
    let Some(target) = map.place(place).or_else(|| map.best_place(place)) else {
        return templates.get("unknown_place");
    };
    let text = map
        .compute_route(region, &target.id, constraints)
        .and_then(|route| map.verbalize_route(&route, templates.language));
    match text {
        Ok(text) => text,
        Err(_) => templates.fill("no_route", &[("place", &target.label)]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map() -> SemanticMap {
        SemanticMap::load(assets::MINIMALL_MAP).unwrap()
    }

    fn bots(lang: Language) -> Bots {
        Bots::new(Templates::bundled(lang), &map())
    }

    fn turn(text: &str, ctx: &ConversationContext, b: &Bots) -> (BotResponse, ConversationContext) {
        let nlu = parse(text, ctx, &Lexicon::from_map(&map()));
        respond(&nlu, ctx, b)
    }

    #[test]
    fn guidance_request_yields_goal() {
        let (r, _) = turn("take me to the toy shop", &ConversationContext::default(), &bots(Language::En));
        assert_eq!(r.bot, "task");
        assert_eq!(r.priority, TASK_BOT_PRIORITY);
        assert_eq!(r.goal, Some(TaskGoal::Guidance { place: "toy_shop".into() }));
        assert_eq!(r.text, "Sure, let me show you the way to Toy Shop.");
    }

    #[test]
    fn directions_yield_guidance_unless_description_only() {
        let (r, _) = turn("where is the cafe", &ConversationContext::default(), &bots(Language::En));
        assert_eq!(r.goal, Some(TaskGoal::Guidance { place: "cafe".into() }));
        let ctx = ConversationContext { description_only: true, ..Default::default() };
        let (r, _) = turn("show me the toy shop", &ctx, &bots(Language::En));
        assert_eq!(r.goal, Some(TaskGoal::RouteDescription { place: "toy_shop".into() }));
    }

    #[test]
    fn unknown_shop() {
        let (r, _) = turn("where is the bank", &ConversationContext::default(), &bots(Language::En));
        assert_eq!((r.bot.as_str(), r.text.as_str()), ("task", "I don't know that shop."));
        assert!(r.goal.is_none());
    }

    #[test]
    fn fallback_then_capabilities() {
        let b = bots(Language::En);
        let mut ctx = ConversationContext::default();
        let mut texts = Vec::new();
        for _ in 0..4 {
            let (r, next) = turn("blorp", &ctx, &b);
            assert_eq!(r.bot, "fallback");
            texts.push(r.text);
            ctx = next;
        }
        assert_eq!(texts[0], "I see.");
        assert_eq!(texts[1], "Tell me more.");
        assert_eq!(texts[2], b.templates.get("capabilities"));
        assert_eq!(texts[3], "I see.");
    }

    #[test]
    fn off_topic_reraises_pending_question() {
        let b = bots(Language::En);
        let q = PendingQuestion { text: "Question 1: ...".into(), expects: vec![DialogueAct::Answer] };
        let ctx = ConversationContext { mode: Mode::Quiz, pending_question: Some(q), ..Default::default() };
        let (r1, c1) = turn("how are you", &ctx, &b);
        assert_eq!(r1.text, "I'm doing great, thanks for asking!");
        let (r2, c2) = turn("tell me a joke", &c1, &b);
        assert!(r2.text.ends_with(" Question 1: ..."), "{}", r2.text);
        assert_eq!(c2.off_topic, 0);
        let (r3, _) = turn("2", &c2, &b);
        assert_eq!(r3.task_input, Some(DialogueAct::Answer));
    }

    #[test]
    fn quiz_bot_starts_once() {
        let b = bots(Language::En);
        let (r, _) = turn("let's play a quiz", &ConversationContext::default(), &b);
        assert_eq!((r.bot.as_str(), r.goal.clone()), ("quiz", Some(TaskGoal::Quiz)));
        let ctx = ConversationContext { mode: Mode::Quiz, ..Default::default() };
        let (r, _) = turn("let's play a quiz", &ctx, &b);
        assert_eq!(r.goal, None);
    }

    #[test]
    fn quit_goes_to_running_task() {
        let b = bots(Language::En);
        let ctx = ConversationContext { mode: Mode::Guidance, ..Default::default() };
        let (r, _) = turn("stop", &ctx, &b);
        assert_eq!(r.task_input, Some(DialogueAct::Quit));
        assert_eq!(r.text, "Okay, let's stop here.");
    }

    #[test]
    fn route_descriptions() {
        let m = map();
        let en = Templates::bundled(Language::En);
        let c = RouteConstraints::default();
        assert_eq!(route_description_reply("cafe", &m, "square", c, &en), "Cafe is right here in this square.");
        assert_eq!(
            route_description_reply("toy_shop", &m, "square", c, &en),
            "Take the stairs up to floor 2. Toy Shop is there."
        );
        assert_eq!(route_description_reply("xyzzy", &m, "square", c, &en), "I don't know that shop.");
        let fi = Templates::bundled(Language::Fi);
        assert_eq!(route_description_reply("cafe", &m, "square", c, &fi), "Cafe on tässä aukiolla.");
    }

    #[test]
    fn translator_stub_is_identity() {
        assert_eq!(IdentityTranslator.to_english("missä on kahvila"), "missä on kahvila");
    }
}
