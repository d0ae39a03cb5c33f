//! Pattern-rule NLU producing a dialogue act plus frames.

use super::{ConversationContext, Mode};
use crate::semantic_map::SemanticMap;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DialogueAct {
    Greeting,
    Statement,
    Question,
    Command,
    Answer,
    Affirm,
    Deny,
    Quit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FrameName {
    RequestDirections,
    RequestGuidance,
    StartQuiz,
    Smalltalk,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameElement {
    pub role: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub name: FrameName,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub elements: Vec<FrameElement>,
}

impl Frame {
    fn bare(name: FrameName) -> Self {
        Frame { name, elements: Vec::new() }
    }

    pub fn element(&self, role: &str) -> Option<&str> {
        self.elements.iter().find(|e| e.role == role).map(|e| e.value.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NluResult {
    pub act: DialogueAct,
    pub frames: Vec<Frame>,
    /// Numeric value of an answer act.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<i64>,
    pub text: String,
}

impl NluResult {
    pub fn frame(&self, name: FrameName) -> Option<&Frame> {
        self.frames.iter().find(|f| f.name == name)
    }
}

/// Phrases that name places, longest first, each mapped to its best place.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: Vec<(String, String)>,
}

impl Lexicon {
    pub fn from_map(map: &SemanticMap) -> Self {
        let mut entries: Vec<(String, String)> = map
            .lexicon()
            .into_iter()
            .filter_map(|phrase| map.best_place(&phrase).map(|p| (phrase, p.id.clone())))
            .collect();
        entries.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Lexicon { entries }
    }

    /// Place named anywhere in already-normalized `text`.
    pub fn find(&self, text: &str) -> Option<&str> {
        let padded = format!(" {text} ");
        self.entries
            .iter()
            .find(|(phrase, _)| padded.contains(&format!(" {phrase} ")) || padded.contains(&format!(" {phrase}s ")))
            .map(|(_, id)| id.as_str())
    }
}

/// Lowercase words separated by single spaces; apostrophes kept.
pub fn normalize(text: &str) -> String {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

const NUMBER_WORDS: [&str; 10] = ["one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];

fn numeral(words: &[&str]) -> Option<i64> {
    let rest: Vec<&str> = words
        .iter()
        .copied()
        .skip_while(|w| matches!(*w, "number" | "answer" | "option" | "it's" | "it" | "is" | "i" | "think" | "the"))
        .collect();
    if rest.len() != 1 {
        return None;
    }
    let w = rest[0];
    if let Ok(n) = w.parse::<i64>() {
        return Some(n);
    }
    NUMBER_WORDS.iter().position(|n| *n == w).map(|i| i as i64 + 1)
}

fn has_phrase(padded: &str, phrases: &[&str]) -> bool {
    phrases.iter().any(|p| padded.contains(&format!(" {p} ")))
}

fn starts_with_any(text: &str, phrases: &[&str]) -> bool {
    phrases.iter().any(|p| text == *p || text.starts_with(&format!("{p} ")))
}

const QUIT: &[&str] = &["quit", "stop", "bye", "goodbye", "cancel", "exit", "never mind", "forget it", "i have to go"];
const GREETING: &[&str] = &["hello", "hi", "hey", "good morning", "good afternoon", "good evening", "moi", "hei"];
const AFFIRM: &[&str] = &["yes", "yeah", "yep", "sure", "ok", "okay", "of course", "i can", "i did", "got it", "i understood", "understood", "kyllä", "joo"];
const DENY: &[&str] = &["no", "nope", "not really", "i can't", "i cannot", "can't", "cannot", "i didn't", "i don't", "ei"];
const GUIDE: &[&str] = &["take me to", "show me", "guide me", "bring me", "lead me", "point me", "show the way", "can you show"];
const DIRECTIONS: &[&str] = &["where is", "where's", "where are", "where can i", "how do i get", "how can i get", "how to get", "way to", "looking for", "find", "i need", "i want to go"];
const QUIZ: &[&str] = &["quiz", "play a game", "play a quiz", "let's play", "play with me"];
const WH: &[&str] = &["what", "who", "why", "how", "when", "where", "which", "do", "does", "can", "are", "is"];

/// Text after the first trigger phrase, articles stripped; the words the
/// user used for an unknown place.
fn query_after(text: &str, triggers: &[&str]) -> Option<String> {
    let padded = format!(" {text} ");
    let (at, len) = triggers
        .iter()
        .filter_map(|t| padded.find(&format!(" {t} ")).map(|i| (i, t.len())))
        .min()?;
    let rest: Vec<&str> = padded[at + len + 2..]
        .split(' ')
        .filter(|w| !w.is_empty())
        .skip_while(|w| matches!(*w, "the" | "a" | "an" | "to" | "some" | "please"))
        .filter(|w| *w != "please")
        .collect();
    (!rest.is_empty()).then(|| rest.join(" "))
}

/// Deterministic parse; total over any input text.
pub fn parse(text: &str, context: &ConversationContext, lexicon: &Lexicon) -> NluResult {
    let norm = normalize(text);
    let words: Vec<&str> = norm.split(' ').filter(|w| !w.is_empty()).collect();
    let padded = format!(" {norm} ");
    let result = |act, frames: Vec<Frame>, value| NluResult { act, frames, value, text: text.to_string() };
    let smalltalk = || vec![Frame::bare(FrameName::Smalltalk)];

    if words.is_empty() {
        return result(DialogueAct::Statement, smalltalk(), None);
    }
    let expects_answer = context.mode == Mode::Quiz
        || context.pending_question.as_ref().is_some_and(|q| q.expects.contains(&DialogueAct::Answer));
    if expects_answer {
        if let Some(n) = numeral(&words) {
            return result(DialogueAct::Answer, vec![], Some(n));
        }
    }
    if starts_with_any(&norm, QUIT) {
        return result(DialogueAct::Quit, vec![], None);
    }

    let place = lexicon.find(&norm);
    let directed = |name: FrameName, triggers: &[&str]| {
        let element = match place {
            Some(id) => FrameElement { role: "place".into(), value: id.to_string() },
            None => FrameElement { role: "query".into(), value: query_after(&norm, triggers).unwrap_or_default() },
        };
        vec![Frame { name, elements: vec![element] }]
    };
    if has_phrase(&padded, GUIDE) {
        return result(DialogueAct::Command, directed(FrameName::RequestGuidance, GUIDE), None);
    }
    if has_phrase(&padded, DIRECTIONS) {
        return result(DialogueAct::Question, directed(FrameName::RequestDirections, DIRECTIONS), None);
    }
    if has_phrase(&padded, QUIZ) {
        return result(DialogueAct::Command, vec![Frame::bare(FrameName::StartQuiz)], None);
    }
    if starts_with_any(&norm, GREETING) {
        return result(DialogueAct::Greeting, smalltalk(), None);
    }
    if starts_with_any(&norm, DENY) {
        return result(DialogueAct::Deny, vec![], None);
    }
    if starts_with_any(&norm, AFFIRM) {
        return result(DialogueAct::Affirm, vec![], None);
    }
    if text.trim_end().ends_with('?') || WH.contains(&words[0]) {
        return result(DialogueAct::Question, smalltalk(), None);
    }
    result(DialogueAct::Statement, smalltalk(), None)
}
