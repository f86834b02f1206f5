//! Bundled agent cards and MCP descriptors, seeded candidate data, and the
//! tool handlers the scenarios run.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::a2a::{AgentCard, AgentDirectory};
use crate::canonical;
use crate::mcp::{McpServerDescriptor, ResourceBody, ToolHandler};

pub const RECRUITER_CARD: &str = include_str!("../../fixtures/cards/recruiter.json");
pub const CALENDAR_CARD: &str = include_str!("../../fixtures/cards/calendar.json");
pub const HR_CARD: &str = include_str!("../../fixtures/cards/hr.json");
pub const ASSISTANT_CARD: &str = include_str!("../../fixtures/cards/assistant.json");
pub const EMAIL_DESCRIPTOR: &str = include_str!("../../fixtures/mcp/email.json");
pub const CALENDAR_DESCRIPTOR: &str = include_str!("../../fixtures/mcp/calendar.json");
pub const HR_DESCRIPTOR: &str = include_str!("../../fixtures/mcp/hr.json");
pub const TALENT_DESCRIPTOR: &str = include_str!("../../fixtures/mcp/talent.json");

/// Candidate profiles in the talent pool.
pub const CANDIDATE_COUNT: usize = 5;

const FIRST_NAMES: [&str; 8] = [
    "Ada", "Bo", "Chen", "Dara", "Emil", "Farah", "Goran", "Hana",
];
const LAST_NAMES: [&str; 8] = [
    "Okafor", "Lind", "Moreau", "Tanaka", "Silva", "Novak", "Reyes", "Berg",
];
const CITIES: [&str; 4] = ["Berlin", "Lisbon", "Warsaw", "Remote"];

pub fn card(text: &str) -> AgentCard {
    crate::a2a::parse_and_validate_agent_card(text).expect("bundled card is valid")
}

pub fn descriptor(text: &str) -> McpServerDescriptor {
    McpServerDescriptor::parse(text).expect("bundled descriptor is valid")
}

/// The bundled files by name, as the CLI lists them.
pub fn bundled() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("cards/recruiter.json", RECRUITER_CARD),
        ("cards/calendar.json", CALENDAR_CARD),
        ("cards/hr.json", HR_CARD),
        ("cards/assistant.json", ASSISTANT_CARD),
        ("mcp/email.json", EMAIL_DESCRIPTOR),
        ("mcp/calendar.json", CALENDAR_DESCRIPTOR),
        ("mcp/hr.json", HR_DESCRIPTOR),
        ("mcp/talent.json", TALENT_DESCRIPTOR),
    ])
}

/// Five distinct profiles drawn from the seed.
pub fn candidate_profiles(seed: u64) -> Vec<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = Vec::with_capacity(CANDIDATE_COUNT);
    while ids.len() < CANDIDATE_COUNT {
        let id = format!("cand-{:04x}", rng.gen::<u16>());
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    ids.into_iter()
        .map(|id| {
            let first = FIRST_NAMES.choose(&mut rng).expect("non-empty");
            let last = LAST_NAMES.choose(&mut rng).expect("non-empty");
            json!({
                "candidateId": id,
                "name": format!("{first} {last}"),
                "city": CITIES.choose(&mut rng).expect("non-empty"),
                "yearsExperience": rng.gen_range(1..=15),
            })
        })
        .collect()
}

/// The talent descriptor with its candidate list filled in.
pub fn talent_descriptor(profiles: &[Value]) -> McpServerDescriptor {
    let mut d = descriptor(TALENT_DESCRIPTOR);
    let ids: Vec<&Value> = profiles.iter().map(|p| &p["candidateId"]).collect();
    for r in &mut d.resources {
        if r.uri == crate::bridge::CANDIDATES_URI {
            r.content = ResourceBody::Text(canonical::to_string(&json!(ids)));
        }
    }
    d
}

fn short_digest(v: &Value) -> String {
    canonical::sha256_hex(v)[..8].to_string()
}

/// Handlers per tool name, keyed by server.
pub fn handlers(
    profiles: &[Value],
) -> BTreeMap<(&'static str, &'static str), Arc<dyn ToolHandler>> {
    let by_id: BTreeMap<String, Value> = profiles
        .iter()
        .map(|p| {
            (
                p["candidateId"].as_str().unwrap_or_default().to_string(),
                p.clone(),
            )
        })
        .collect();
    let mut map: BTreeMap<(&'static str, &'static str), Arc<dyn ToolHandler>> = BTreeMap::new();
    map.insert(
        ("talent", "fetchProfile"),
        Arc::new(move |args: &Value| {
            let id = args["candidateId"].as_str().unwrap_or_default();
            let mut profile = by_id
                .get(id)
                .cloned()
                .ok_or_else(|| format!("unknown candidate {id}"))?;
            if let Some(skill) = args.get("skill") {
                profile["matchedSkill"] = skill.clone();
            }
            Ok(profile)
        }),
    );
    map.insert(
        ("calendar", "scheduleInterview"),
        Arc::new(|args: &Value| {
            Ok(json!({"confirmed": true, "candidateId": args["candidateId"], "slot": args["slot"], "eventId": format!("evt-{}", short_digest(args))}))
        }),
    );
    map.insert(
        ("calendar", "findSlots"),
        Arc::new(|args: &Value| {
            Ok(json!({"week": args["week"], "slots": ["Tue 14:00", "Wed 10:00", "Thu 16:00"]}))
        }),
    );
    map.insert(
        ("hr", "backgroundCheck"),
        Arc::new(|args: &Value| Ok(json!({"candidateId": args["candidateId"], "status": "clear"}))),
    );
    map.insert(
        ("email", "sendEmail"),
        Arc::new(|args: &Value| {
            Ok(json!({"messageId": format!("msg-{}", short_digest(args)), "to": args["to"]}))
        }),
    );
    map.insert(
        ("email", "searchThreads"),
        Arc::new(|args: &Value| {
            Ok(json!({"query": args["query"], "threads": ["mail://threads/latest"]}))
        }),
    );
    map
}

/// Fetches each card through `directory`, in the order given.
pub fn fetch_cards(
    directory: &dyn AgentDirectory,
    urls: &[String],
) -> Result<Vec<AgentCard>, String> {
    urls.iter()
        .map(|url| {
            let transport = directory.transport(url).map_err(|e| e.to_string())?;
            let client = crate::a2a::A2aClient::new(transport, crate::a2a::AuthContext::none());
            client.fetch_card().map_err(|e| format!("{url}: {e}"))
        })
        .collect()
}
