use std::collections::BTreeMap;

use crate::corpus::{normalize_topic, topic_order, MapPoint, TopicLabel};
use crate::gateway::{ChatRequest, Gateway, GatewayError, TOPICS_MARKER, TOPIC_TEMPERATURE};

pub const TOPIC_SYSTEM_PROMPT: &str = "You extract short research topic labels.";
pub const MAX_TOPICS_PER_RECORD: usize = 5;

pub fn topic_request(title: &str, description: &str) -> ChatRequest {
    ChatRequest::new(
        TOPIC_SYSTEM_PROMPT,
        format!(
            "{TOPICS_MARKER}\nTitle: {title}\nDescription: {description}\n\
             Return up to 5 short topic labels, comma-separated, no explanations."
        ),
        TOPIC_TEMPERATURE,
    )
}

/// Splits on newlines and commas, strips list bullets, lowercases, trims,
/// drops empties and duplicates, keeps at most five.
pub fn parse_topic_reply(reply: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for piece in reply.split(['\n', ',']) {
        let t = normalize_topic(piece.trim().trim_start_matches(['-', '*', '•']));
        if !t.is_empty() && !out.contains(&t) {
            out.push(t);
        }
        if out.len() == MAX_TOPICS_PER_RECORD {
            break;
        }
    }
    out
}

pub fn extract_topics(
    gateway: &Gateway,
    title: &str,
    description: &str,
) -> Result<Vec<String>, GatewayError> {
    let reply = gateway.complete_chat(&topic_request(title, description))?;
    Ok(parse_topic_reply(&reply))
}

/// One project's topics and map position, input to [`aggregate_topics`].
#[derive(Debug, Clone, Copy)]
pub struct TaggedProject<'a> {
    pub id: &'a str,
    pub topics: &'a [String],
    pub position: MapPoint,
}

/// One label per distinct normalized topic, counted over projects and placed
/// at the centroid of its projects. Sorted by count desc, text asc.
pub fn aggregate_topics(projects: &[TaggedProject<'_>]) -> Vec<TopicLabel> {
    let mut members: BTreeMap<String, Vec<(&str, MapPoint)>> = BTreeMap::new();
    for p in projects {
        for raw in p.topics {
            let text = normalize_topic(raw);
            if text.is_empty() {
                continue;
            }
            let entry = members.entry(text).or_default();
            if !entry.iter().any(|(id, _)| *id == p.id) {
                entry.push((p.id, p.position));
            }
        }
    }
    let mut labels: Vec<TopicLabel> = members
        .into_iter()
        .map(|(text, ms)| {
            let n = ms.len() as f64;
            let x = ms.iter().map(|(_, p)| p.x).sum::<f64>() / n;
            let y = ms.iter().map(|(_, p)| p.y).sum::<f64>() / n;
            TopicLabel {
                text,
                count: ms.len() as u32,
                project_ids: ms.iter().map(|(id, _)| id.to_string()).collect(),
                position: MapPoint::new(x, y),
            }
        })
        .collect();
    labels.sort_by(topic_order);
    labels
}
