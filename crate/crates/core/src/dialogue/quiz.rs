use super::nlu::{DialogueAct, NluResult};
use super::Templates;
use crate::rng::SimRng;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

/// Questions asked per quiz session.
pub const QUESTIONS_PER_SESSION: usize = 3;
/// Off-topic turns before the question is raised again.
pub const RERAISE_AFTER: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizQuestion {
    pub text: String,
    pub options: Vec<String>,
    /// 1-based.
    pub correct: usize,
}

pub fn load_bank(json: &str) -> Result<Vec<QuizQuestion>, String> {
    let bank: Vec<QuizQuestion> = serde_json::from_str(json).map_err(|e| e.to_string())?;
    for (i, q) in bank.iter().enumerate() {
        if q.options.len() < 2 {
            return Err(format!("question {} needs at least two options", i + 1));
        }
        if q.correct == 0 || q.correct > q.options.len() {
            return Err(format!("question {} has correct index {} out of range", i + 1, q.correct));
        }
    }
    if bank.is_empty() {
        return Err("quiz bank is empty".into());
    }
    Ok(bank)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizState {
    pub questions: Vec<QuizQuestion>,
    /// Index of the current question; equals `questions.len()` when finished.
    pub current: usize,
    pub asked: usize,
    pub off_topic: u32,
    pub score: usize,
    pub finished: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuizOutcome {
    Correct,
    Wrong,
    Clarify,
    OffTopic,
    Reraise,
    Finished,
}

impl QuizState {
    /// A session of up to three distinct questions drawn from `bank`.
    pub fn new_session(bank: &[QuizQuestion], rng: &mut SimRng) -> Self {
        let n = QUESTIONS_PER_SESSION.min(bank.len());
        let mut picked: Vec<usize> = sample(rng, bank.len(), n).into_vec();
        picked.sort_unstable();
        QuizState::with_questions(picked.into_iter().map(|i| bank[i].clone()).collect())
    }

    pub fn with_questions(questions: Vec<QuizQuestion>) -> Self {
        QuizState { questions, current: 0, asked: 0, off_topic: 0, score: 0, finished: false }
    }

    pub fn current_question(&self) -> Option<&QuizQuestion> {
        self.questions.get(self.current).filter(|_| !self.finished)
    }

    pub fn prompt(&self, templates: &Templates) -> Option<String> {
        let q = self.current_question()?;
        let options = q
            .options
            .iter()
            .enumerate()
            .map(|(i, o)| format!("{}) {o}", i + 1))
            .collect::<Vec<_>>()
            .join(", ");
        Some(templates.fill(
            "quiz_question",
            &[("number", &(self.current + 1).to_string()), ("text", &q.text), ("options", &format!("{options}."))],
        ))
    }

    pub fn summary(&self, templates: &Templates) -> String {
        templates.fill(
            "quiz_summary",
            &[("score", &self.score.to_string()), ("total", &self.questions.len().to_string())],
        )
    }

    fn advance(&mut self, templates: &Templates, mut text: String) -> String {
        self.current += 1;
        if self.current >= self.questions.len() {
            self.finished = true;
            text.push(' ');
            text.push_str(&self.summary(templates));
        } else if let Some(p) = self.prompt(templates) {
            text.push(' ');
            text.push_str(&p);
        }
        text
    }
}

/// One quiz turn: grade an answer, re-raise after repeated off-topic input,
/// or end the quiz with a summary on quit.
pub fn quiz_turn(nlu: &NluResult, state: &QuizState, templates: &Templates) -> (String, QuizState, QuizOutcome) {
    let mut s = state.clone();
    let Some(q) = s.current_question().cloned() else {
        return (s.summary(templates), s, QuizOutcome::Finished);
    };
    match (nlu.act, nlu.value) {
        (DialogueAct::Quit, _) => {
            s.finished = true;
            (s.summary(templates), s, QuizOutcome::Finished)
        }
        (DialogueAct::Answer, Some(v)) => {
            if v < 1 || v as usize > q.options.len() {
                let text = templates.fill("quiz_clarify", &[("count", &q.options.len().to_string())]);
                return (text, state.clone(), QuizOutcome::Clarify);
            }
            s.asked += 1;
            s.off_topic = 0;
            let (text, outcome) = if v as usize == q.correct {
                s.score += 1;
                (templates.get("quiz_correct"), QuizOutcome::Correct)
            } else {
                let opt = &q.options[q.correct - 1];
                (
                    templates.fill("quiz_wrong", &[("index", &q.correct.to_string()), ("option", opt)]),
                    QuizOutcome::Wrong,
                )
            };
            let text = s.advance(templates, text);
            let outcome = if s.finished { QuizOutcome::Finished } else { outcome };
            (text, s, outcome)
        }
        _ => {
            s.off_topic += 1;
            if s.off_topic >= RERAISE_AFTER {
                s.off_topic = 0;
                let p = s.prompt(templates).unwrap_or_default();
                (p, s, QuizOutcome::Reraise)
            } else {
                (String::new(), s, QuizOutcome::OffTopic)
            }
        }
    }
}
