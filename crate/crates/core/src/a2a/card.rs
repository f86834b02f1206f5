//! Agent cards: the discovery document an agent serves at
//! `/.well-known/agent.json`.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical;

/// Path at which agents publish their card.
pub const WELL_KNOWN_PATH: &str = "/.well-known/agent.json";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CardError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("agent card must advertise at least one skill")]
    EmptySkills,
    #[error("duplicate skill id {0:?}")]
    DuplicateSkillId(String),
    #[error("invalid MIME type {0:?}")]
    InvalidMimeType(String),
}

/// Authentication the agent expects from clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuthScheme {
    None,
    Bearer,
}

impl fmt::Display for AuthScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AuthScheme::None => "none",
            AuthScheme::Bearer => "bearer",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Skill {
    pub id: String,
    pub name: String,
    pub description: String,
    pub tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub examples: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_modes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_modes: Option<Vec<String>>,
}

impl Skill {
    pub fn has_tags<S: AsRef<str>>(&self, required: &[S]) -> bool {
        required
            .iter()
            .all(|t| self.tags.iter().any(|own| own == t.as_ref()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentCard {
    pub name: String,
    pub description: String,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<String>,
    pub version: String,
    pub auth: AuthScheme,
    pub default_input_modes: Vec<String>,
    pub default_output_modes: Vec<String>,
    pub skills: Vec<Skill>,
}

const CARD_REQUIRED: &[&str] = &[
    "name",
    "description",
    "url",
    "version",
    "auth",
    "defaultInputModes",
    "defaultOutputModes",
    "skills",
];
const SKILL_REQUIRED: &[&str] = &["id", "name", "description", "tags"];

/// Parses a card document and checks every card invariant.
pub fn parse_and_validate_agent_card(document: &str) -> Result<AgentCard, CardError> {
    let value: Value =
        serde_json::from_str(document).map_err(|e| CardError::MalformedJson(e.to_string()))?;
    AgentCard::from_value(value)
}

impl AgentCard {
    pub fn from_value(value: Value) -> Result<AgentCard, CardError> {
        let obj = value
            .as_object()
            .ok_or_else(|| CardError::MalformedJson("agent card must be a JSON object".into()))?;
        for field in CARD_REQUIRED {
            if !obj.contains_key(*field) {
                return Err(CardError::MissingField((*field).to_string()));
            }
        }
        if let Some(skills) = obj.get("skills").and_then(Value::as_array) {
            for (i, skill) in skills.iter().enumerate() {
                let Some(skill) = skill.as_object() else {
                    continue;
                };
                for field in SKILL_REQUIRED {
                    if !skill.contains_key(*field) {
                        return Err(CardError::MissingField(format!("skills[{i}].{field}")));
                    }
                }
            }
        }
        let card: AgentCard =
            serde_json::from_value(value).map_err(|e| CardError::InvalidField(e.to_string()))?;
        card.validate()?;
        Ok(card)
    }

    pub fn validate(&self) -> Result<(), CardError> {
        if self.url.trim().is_empty() {
            return Err(CardError::InvalidField("url must be non-empty".into()));
        }
        if self.skills.is_empty() {
            return Err(CardError::EmptySkills);
        }
        let mut seen = HashSet::new();
        for skill in &self.skills {
            if skill.id.is_empty() {
                return Err(CardError::InvalidField("skill id must be non-empty".into()));
            }
            if !seen.insert(skill.id.as_str()) {
                return Err(CardError::DuplicateSkillId(skill.id.clone()));
            }
        }
        let skill_modes = self
            .skills
            .iter()
            .flat_map(|s| s.input_modes.iter().chain(s.output_modes.iter()).flatten());
        for mode in self
            .default_input_modes
            .iter()
            .chain(&self.default_output_modes)
            .chain(skill_modes)
        {
            check_mime(mode)?;
        }
        Ok(())
    }

    pub fn skill(&self, id: &str) -> Option<&Skill> {
        self.skills.iter().find(|s| s.id == id)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("agent card serializes")
    }

    pub fn to_canonical_json(&self) -> String {
        canonical::to_string(&self.to_value())
    }

    /// Output modes the skill produces, falling back to the card defaults.
    pub fn output_modes_for<'a>(&'a self, skill: &'a Skill) -> &'a [String] {
        skill
            .output_modes
            .as_deref()
            .unwrap_or(&self.default_output_modes)
    }

    /// Picks the first of the skill's output modes that the client accepts.
    pub fn negotiate_output_mode(&self, skill_id: &str, accepted: &[&str]) -> Option<String> {
        let skill = self.skill(skill_id)?;
        self.output_modes_for(skill)
            .iter()
            .find(|m| accepted.iter().any(|a| a.eq_ignore_ascii_case(m)))
            .cloned()
    }
}

/// Checks that `value` is a syntactically valid `type/subtype` MIME type,
/// optionally followed by `; name=value` parameters.
pub fn check_mime(value: &str) -> Result<(), CardError> {
    let invalid = || CardError::InvalidMimeType(value.to_string());
    let mut sections = value.split(';');
    let essence = sections.next().unwrap_or_default();
    let (ty, subtype) = essence.split_once('/').ok_or_else(invalid)?;
    if !is_token(ty) || !is_token(subtype) {
        return Err(invalid());
    }
    for param in sections {
        let (name, val) = param.trim_start().split_once('=').ok_or_else(invalid)?;
        let quoted = val.len() >= 2 && val.starts_with('"') && val.ends_with('"');
        if !is_token(name) || !(is_token(val) || quoted) {
            return Err(invalid());
        }
    }
    Ok(())
}

fn is_token(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b"!#$&-^_.+*".contains(&b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn recruiter() -> Value {
        json!({
            "name": "Recruiter Agent",
            "description": "Finds candidates",
            "url": "http://recruiter.local/a2a",
            "version": "1.0.0",
            "auth": "bearer",
            "defaultInputModes": ["text/plain"],
            "defaultOutputModes": ["application/json", "text/plain"],
            "skills": [{
                "id": "candidate-sourcing",
                "name": "Candidate sourcing",
                "description": "Find candidates with a skill in a location",
                "tags": ["source-candidates", "recruiting"],
                "examples": ["Find candidates with skill X in location Y"]
            }]
        })
    }

    #[test]
    fn hiring_card_parses() {
        let card = parse_and_validate_agent_card(&recruiter().to_string()).unwrap();
        assert_eq!(card.skills.len(), 1);
        assert_eq!(card.skills[0].id, "candidate-sourcing");
        assert_eq!(card.auth, AuthScheme::Bearer);
    }

    #[test]
    fn empty_skills_rejected() {
        let mut v = recruiter();
        v["skills"] = json!([]);
        assert_eq!(
            parse_and_validate_agent_card(&v.to_string()),
            Err(CardError::EmptySkills)
        );
    }

    #[test]
    fn missing_fields_are_named() {
        let mut v = recruiter();
        v.as_object_mut().unwrap().remove("url");
        assert_eq!(
            parse_and_validate_agent_card(&v.to_string()),
            Err(CardError::MissingField("url".into()))
        );
        let mut v = recruiter();
        v["skills"][0].as_object_mut().unwrap().remove("tags");
        assert_eq!(
            parse_and_validate_agent_card(&v.to_string()),
            Err(CardError::MissingField("skills[0].tags".into()))
        );
    }

    #[test]
    fn duplicate_skill_ids_rejected() {
        let mut v = recruiter();
        let skill = v["skills"][0].clone();
        v["skills"].as_array_mut().unwrap().push(skill);
        assert_eq!(
            parse_and_validate_agent_card(&v.to_string()),
            Err(CardError::DuplicateSkillId("candidate-sourcing".into()))
        );
    }

    #[test]
    fn bad_mime_rejected() {
        for bad in ["text", "text/", "/plain", " text/plain", "text plain"] {
            let mut v = recruiter();
            v["defaultInputModes"] = json!([bad]);
            assert_eq!(
                parse_and_validate_agent_card(&v.to_string()),
                Err(CardError::InvalidMimeType(bad.into())),
                "{bad}"
            );
        }
        let mut v = recruiter();
        v["skills"][0]["outputModes"] = json!(["nope"]);
        assert!(matches!(
            parse_and_validate_agent_card(&v.to_string()),
            Err(CardError::InvalidMimeType(_))
        ));
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(
            parse_and_validate_agent_card("{nope"),
            Err(CardError::MalformedJson(_))
        ));
        assert!(matches!(
            parse_and_validate_agent_card("[]"),
            Err(CardError::MalformedJson(_))
        ));
    }

    #[test]
    fn mode_negotiation_follows_skill_order() {
        let card = parse_and_validate_agent_card(&recruiter().to_string()).unwrap();
        assert_eq!(
            card.negotiate_output_mode("candidate-sourcing", &["text/plain", "application/json"]),
            Some("application/json".into())
        );
        assert_eq!(
            card.negotiate_output_mode("candidate-sourcing", &["image/png"]),
            None
        );
        assert_eq!(card.negotiate_output_mode("missing", &["text/plain"]), None);
    }
}
