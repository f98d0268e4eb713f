//! Agent prompt templates and placeholder substitution.
//!
//! Placeholders are `[UPPER CASE]` or `{lower case}` names. Rendering is a
//! single left-to-right pass, so bound values are never re-expanded.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("no binding for placeholder {0}")]
    MissingBinding(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateId {
    DebaterEd,
    DebaterEae,
    DebaterCrossExamination,
    CriticEd,
    CriticCrossExaminationEd,
    CriticEae,
    JudgeEd,
    JudgeEae,
    EventTypeList,
    AnswerFormatEd,
    AnswerFormatEae,
    Revise,
    Summarizer,
}

impl TemplateId {
    pub fn text(self) -> &'static str {
        match self {
            Self::DebaterEd => DEBATER_ED,
            Self::DebaterEae => DEBATER_EAE,
            Self::DebaterCrossExamination => DEBATER_CE,
            Self::CriticEd => CRITIC_ED,
            Self::CriticCrossExaminationEd => CRITIC_CE_ED,
            Self::CriticEae => CRITIC_EAE,
            Self::JudgeEd => JUDGE_ED,
            Self::JudgeEae => JUDGE_EAE,
            Self::EventTypeList => EVENT_TYPE_LIST,
            Self::AnswerFormatEd => ANSWER_FORMAT_ED,
            Self::AnswerFormatEae => ANSWER_FORMAT_EAE,
            Self::Revise => REVISE,
            Self::Summarizer => SUMMARIZER,
        }
    }

    /// Placeholder names used by the template, in first-appearance order.
    pub fn placeholders(self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        PLACEHOLDER
            .find_iter(self.text())
            .map(|m| m.as_str().to_string())
            .filter(|p| seen.insert(p.clone()))
            .collect()
    }
}

const DEBATER_ED: &str = "Consider the sentence: \"[SENT]\". Carefully read the event definition, event type, and trigger tokens in the given examples. Examine whether it mentions any possible event from the provided list. If no events are mentioned, respond with \"[]\". If an event are mentioned, determine the event type from the list. Then identify the event trigger, which is **one word** closely associated with the occurrence of a pre-defined event type. Respond in the format **[ROLE]: [\"event type\", \"trigger token\"]**, or **[ROLE]: []** if no event trigger is identified.";

const DEBATER_EAE: &str = "Give a sentence: **[SENT]**, it contains an event mention. The event type is **{event type}**, and the event is triggered by the token **{trigger}**. Now let's focus on the Argument Extraction task.\nThe list of argument roles corresponding to the event type **{event type}** is **{role list}**.\nEvent arguments are entities that directly relate to the event mention. Please extract the event arguments of the above sentence according to the argument roles, and return them in the form of a table.\nThe header of the table is | event type | argument role | argument content |.\nIf no entity in the sentence plays the corresponding argument role, its argument content returns **None**.";

const DEBATER_CE: &str = "Carefully review the information in the event definitions and retrieved examples. Defend your answer, or update your answer.";

const CRITIC_ED: &str = "Review the given sentence: \"[SENT]\". Thoroughly evaluate the event definitions, typical triggers, listed examples, and responses from Debater A and Debater B. For debaters' answers, rigorously examine: Is there an event mention? Does the identified event trigger indeed express an occurrence of the identified event type, based on the event definition? Does the identified trigger align with typical triggers and the examples provided? Considering the valid examples, is there a more suitable trigger token to express the event? Provide concise assessments.";

const CRITIC_CE_ED: &str = "After reviewing the event definition and examples, assess whether the identified event type and event trigger align with the event occurrence in the sentence. Consider whether there is any other event type that better matches the event mentioned in the sentence. Respond succinctly with your judgment.";

const CRITIC_EAE: &str = "Remember the given sentence: **[SENT]**. Now, please judge critically and identify possible errors. Do the identified argument roles correctly match the entity mentions? Are there extra or missing argument roles, or misclassified argument roles? Please reply concisely.";

const JUDGE_ED: &str = "If all agents state there is no event mention involved, reply **No event**. If all agents have agree with the same event type and event trigger answers, respond in a table. The header of the table is | event type | event trigger |. If there is any disagreement in responses, respond with **No agreement, debate continues** to encourage further discussion to resolve the differences.";

const JUDGE_EAE: &str = "If debaters agree with each other, reply the event arguments in the form of a table. The header of the table is | event type | argument role | argument content |. If no argument role has a corresponding argument content, the argument content returns **None**.\nIf debaters disagree on any argument content, require reply: **Disagreement observed, debate continues**.\nMake sure reply only a table or **Disagreement observed, debate continues**";

const EVENT_TYPE_LIST: &str = "The list of event types is: [EVENT TYPES].";

const ANSWER_FORMAT_ED: &str = "Respond in the format **[ROLE]: [\"event type\", \"trigger token\"]**, or **[ROLE]: []** if no event trigger is identified.";

const ANSWER_FORMAT_EAE: &str = "Return the event arguments in a table. The header of the table is | event type | argument role | argument content |.";

const REVISE: &str = "Your answer [ANSWER] was rejected because it is not sufficiently supported by the event definitions and retrieved examples. Carefully review the information in the event definitions and retrieved examples, and update your answer.";

const SUMMARIZER: &str = "Collect the commonly agreed solutions below and formalize the final solution as one table. The header of the table is | event type | event trigger | argument role | argument content |. Use one row per argument and **None** when an event has no arguments.\n[AGREED]";

static PLACEHOLDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[[A-Z][A-Z_ ]*\]|\{[a-z][a-z ]*\}").unwrap());

/// Substitutes every placeholder of `template` from `bindings`, keyed by the
/// full placeholder (e.g. `"[SENT]"`, `"{role list}"`).
pub fn render_text(template: &str, bindings: &[(&str, &str)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut last = 0;
    for m in PLACEHOLDER.find_iter(template) {
        let value = bindings
            .iter()
            .find(|(k, _)| *k == m.as_str())
            .map(|(_, v)| *v)
            .ok_or_else(|| PromptError::MissingBinding(m.as_str().to_string()))?;
        out.push_str(&template[last..m.start()]);
        out.push_str(value);
        last = m.end();
    }
    out.push_str(&template[last..]);
    Ok(out)
}

pub fn render_prompt(id: TemplateId, bindings: &[(&str, &str)]) -> Result<String, PromptError> {
    render_text(id.text(), bindings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn debater_ed_binds_sentence() {
        let p = render_prompt(
            TemplateId::DebaterEd,
            &[("[SENT]", "He quit ."), ("[ROLE]", "A")],
        )
        .unwrap();
        assert!(p.contains("Consider the sentence: \"He quit .\""));
        assert!(p.contains("**A: [\"event type\", \"trigger token\"]**"));
        assert!(p.contains("respond with \"[]\""));
    }

    #[test]
    fn eae_binds_trigger() {
        let p = render_prompt(
            TemplateId::DebaterEae,
            &[
                ("[SENT]", "McCarthy was formerly a top civil servant ."),
                ("{event type}", "Personnel:End-Position"),
                ("{trigger}", "formerly"),
                ("{role list}", "Person, Entity, Place"),
            ],
        )
        .unwrap();
        assert!(p.contains("triggered by the token **formerly**"));
        assert!(p.contains("**Person, Entity, Place**"));
        assert!(!p.contains('{'));
    }

    #[test]
    fn missing_binding_reported() {
        let err = render_prompt(
            TemplateId::DebaterEae,
            &[("[SENT]", "x"), ("{event type}", "A:B"), ("{trigger}", "t")],
        )
        .unwrap_err();
        assert_eq!(err, PromptError::MissingBinding("{role list}".into()));
    }

    #[test]
    fn bound_values_are_not_reexpanded() {
        let p = render_text("say [SENT]", &[("[SENT]", "[ROLE] {trigger}")]).unwrap();
        assert_eq!(p, "say [ROLE] {trigger}");
    }

    #[test]
    fn placeholder_inventory() {
        assert_eq!(TemplateId::DebaterEd.placeholders(), vec!["[SENT]", "[ROLE]"]);
        assert!(TemplateId::JudgeEd.placeholders().is_empty());
        assert!(TemplateId::JudgeEae.placeholders().is_empty());
        assert_eq!(
            TemplateId::DebaterEae.placeholders(),
            vec!["[SENT]", "{event type}", "{trigger}", "{role list}"]
        );
    }
}
