//! Deterministic offline provider.
//!
//! Embeddings hash each lowercase alphanumeric token with FNV-1a (64 bit)
//! onto three coordinates (`h`, `h.rotate_left(21)`, `h.rotate_left(42)`,
//! each modulo the dimension), add weight 1 per hit and L2-normalize. Texts
//! sharing tokens therefore have positive cosine similarity.
//!
//! Chat replies:
//! * `ECHO:<rest>` returns `<rest>`;
//! * a message containing [`TOPICS_MARKER`] returns the comma-separated
//!   labels of [`TOPIC_KEYWORDS`] entries whose keyword occurs as a token;
//! * anything else returns `TITLE: Synthesized Idea\nDESCRIPTION: ` plus
//!   the first 200 characters of the user message.

use super::{ChatRequest, GatewayError, Provider};

/// Marker the topic-extraction prompt carries.
pub const TOPICS_MARKER: &str = "TOPICS REQUEST";

/// Keyword to topic-label table consulted by the mock for topic requests.
/// Labels are emitted in table order, deduplicated, at most five.
pub const TOPIC_KEYWORDS: &[(&str, &str)] = &[
    ("voting", "governance"),
    ("vote", "governance"),
    ("democracy", "governance"),
    ("election", "governance"),
    ("civic", "governance"),
    ("music", "music"),
    ("musical", "music"),
    ("composer", "music"),
    ("opera", "music"),
    ("orchestra", "music"),
    ("robot", "robotics"),
    ("robots", "robotics"),
    ("robotic", "robotics"),
    ("prosthetic", "prosthetics"),
    ("prosthesis", "prosthetics"),
    ("amputee", "prosthetics"),
    ("urban", "urban planning"),
    ("city", "urban planning"),
    ("housing", "urban planning"),
    ("transit", "urban planning"),
    ("ai", "artificial intelligence"),
    ("neural", "artificial intelligence"),
    ("health", "health"),
    ("clinical", "health"),
    ("patients", "health"),
    ("education", "education"),
    ("learning", "education"),
    ("students", "education"),
    ("wearable", "wearables"),
    ("sensor", "wearables"),
    ("sensors", "wearables"),
    ("climate", "sustainability"),
    ("energy", "sustainability"),
    ("quantum", "quantum computing"),
    ("artists", "art"),
    ("art", "art"),
];

const FALLBACK_TOPIC: &str = "general";
const OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(OFFSET_BASIS, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub(crate) fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_ascii_lowercase)
}

#[derive(Debug, Clone)]
pub struct MockProvider {
    dimension: usize,
}

impl MockProvider {
    pub fn new(dimension: usize) -> Self {
        Self { dimension }
    }

    fn topics_reply(user: &str) -> String {
        let toks: Vec<String> = tokens(user).collect();
        let mut labels: Vec<&str> = Vec::new();
        for (keyword, label) in TOPIC_KEYWORDS {
            if labels.len() == 5 {
                break;
            }
            if toks.iter().any(|t| t == keyword) && !labels.contains(label) {
                labels.push(label);
            }
        }
        if labels.is_empty() {
            labels.push(FALLBACK_TOPIC);
        }
        labels.join(", ")
    }
}

impl Provider for MockProvider {
    fn embed(&self, text: &str) -> Result<Vec<f32>, GatewayError> {
        let mut acc = vec![0.0f64; self.dimension];
        let d = self.dimension as u64;
        for tok in tokens(text) {
            let h = fnv1a64(tok.as_bytes());
            for r in [0, 21, 42] {
                acc[(h.rotate_left(r) % d) as usize] += 1.0;
            }
        }
        let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            // No alphanumeric token at all.
            return Err(GatewayError::EmptyInput);
        }
        Ok(acc.into_iter().map(|v| (v / norm) as f32).collect())
    }

    fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        if let Some(rest) = req.user.strip_prefix("ECHO:") {
            return Ok(rest.to_string());
        }
        if req.user.contains(TOPICS_MARKER) {
            return Ok(Self::topics_reply(&req.user));
        }
        let head: String = req.user.chars().take(200).collect();
        Ok(format!("TITLE: Synthesized Idea\nDESCRIPTION: {head}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::cosine_similarity;
    use crate::gateway::Gateway;

    #[test]
    fn fnv_reference_vectors() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"abc"), 0xe71fa2190541574b);
    }

    #[test]
    fn abc_hits_frozen_coordinates() {
        // Indices computed by an independent script.
        let v = MockProvider::new(1536).embed("abc").unwrap();
        let hot: Vec<usize> = (0..v.len()).filter(|&i| v[i] != 0.0).collect();
        assert_eq!(hot, vec![21, 843, 1524]);
    }

    #[test]
    fn deterministic_and_normalized() {
        let gw = Gateway::mock();
        let a = gw.embed_text("abc").unwrap();
        let b = gw.embed_text("abc").unwrap();
        assert_eq!(a.values(), b.values());
        let norm: f64 = a.values().iter().map(|&x| (x as f64).powi(2)).sum();
        assert!((norm - 1.0).abs() < 1e-6);
        assert_eq!(a.dimension(), 1536);
    }

    #[test]
    fn token_overlap_drives_similarity() {
        let gw = Gateway::mock();
        let e = |t| gw.embed_text(t).unwrap();
        let base = e("voting systems");
        let near = cosine_similarity(base.values(), e("quadratic voting").values());
        let far = cosine_similarity(base.values(), e("cat pictures").values());
        // Frozen from the independent oracle script: 0.5 and 0.0.
        assert!((near - 0.5).abs() < 1e-6);
        assert!(far.abs() < 1e-6);
        assert!(near > far);
    }

    #[test]
    fn punctuation_only_is_empty() {
        assert_eq!(
            MockProvider::new(8).embed("?!"),
            Err(GatewayError::EmptyInput)
        );
    }

    #[test]
    fn chat_modes() {
        let gw = Gateway::mock();
        let chat = |u: &str| gw.complete_chat(&ChatRequest::new("sys", u, 0.2)).unwrap();
        assert_eq!(chat("ECHO:hello"), "hello");
        let topics = chat("TOPICS REQUEST\nTitle: x\nDescription: a tool for musical AI");
        assert_eq!(topics, "music, artificial intelligence");
        assert_eq!(chat("TOPICS REQUEST\nTitle: x\nDescription: none"), "general");
        let long = "é".repeat(300);
        let idea = chat(&long);
        assert_eq!(
            idea,
            format!("TITLE: Synthesized Idea\nDESCRIPTION: {}", "é".repeat(200))
        );
    }

    #[test]
    fn at_most_five_topics() {
        let reply = MockProvider::topics_reply(
            "TOPICS REQUEST voting music robot amputee city ai health",
        );
        assert_eq!(reply.split(", ").count(), 5);
    }
}
