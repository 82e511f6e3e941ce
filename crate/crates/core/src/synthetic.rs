//! Deterministic synthetic corpus with planted topic groups, used by the
//! acceptance suite and as a demo dataset.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pipeline::RawRecord;

pub const SYNTHETIC_SEED: u64 = 42;
pub const SYNTHETIC_SIZE: usize = 500;
pub const FIRST_YEAR: i32 = 2010;
pub const LAST_YEAR: i32 = 2024;

/// A planted group: its name, the topic the mock provider should assign,
/// and the vocabulary its documents draw from.
#[derive(Debug, Clone, Copy)]
pub struct PlantedGroup {
    pub name: &'static str,
    pub topic: &'static str,
    pub anchors: &'static [&'static str],
    pub nouns: &'static [&'static str],
    pub verbs: &'static [&'static str],
}

pub const GROUPS: [PlantedGroup; 5] = [
    PlantedGroup {
        name: "Civic Media",
        topic: "governance",
        anchors: &["voting", "democracy", "election", "civic"],
        nouns: &["ballots", "deliberation", "legislators", "petitions", "townhall", "referendum", "constituents", "polling", "governance", "turnout"],
        verbs: &["deliberate", "legislate", "mobilize", "canvass", "petition"],
    },
    PlantedGroup {
        name: "Opera of the Future",
        topic: "music",
        anchors: &["music", "musical", "composer", "opera"],
        nouns: &["melody", "harmony", "symphony", "rhythm", "timbre", "chorus", "score", "concert", "sonata", "tempo"],
        verbs: &["compose", "perform", "improvise", "orchestrate", "harmonize"],
    },
    PlantedGroup {
        name: "Personal Robots",
        topic: "robotics",
        anchors: &["robot", "robots", "robotic"],
        nouns: &["actuators", "manipulators", "grippers", "companions", "servos", "locomotion", "humanoid", "teleoperation", "kinematics", "embodiment"],
        verbs: &["grasp", "navigate", "manipulate", "assemble", "gesture"],
    },
    PlantedGroup {
        name: "Biomechatronics",
        topic: "prosthetics",
        anchors: &["prosthetic", "prosthesis", "amputee"],
        nouns: &["limb", "ankle", "socket", "exoskeleton", "tendon", "musculature", "gait", "residual", "orthosis", "neuromuscular"],
        verbs: &["restore", "augment", "rehabilitate", "stabilize", "innervate"],
    },
    PlantedGroup {
        name: "City Science",
        topic: "urban planning",
        anchors: &["urban", "city", "housing", "transit"],
        nouns: &["neighborhoods", "zoning", "density", "mobility", "streets", "infrastructure", "parcels", "commuters", "districts", "blocks"],
        verbs: &["densify", "commute", "redevelop", "simulate", "rezone"],
    },
];

const OPENERS: [&str; 6] = ["We", "This project", "Our team", "The lab", "Researchers", "This work"];
const ADJECTIVES: [&str; 8] = ["Adaptive", "Open", "Distributed", "Living", "Responsive", "Collective", "Tangible", "Hybrid"];
const CROSS_CUTTING: &str = "The approach uses neural models trained on ai methods.";

/// Fraction of documents that mention the cross-cutting AI theme.
pub const CROSS_CUTTING_RATE: f64 = 0.2;

fn pick<'a>(rng: &mut ChaCha8Rng, items: &'a [&'a str]) -> &'a str {
    items.choose(rng).copied().expect("nonempty vocabulary")
}

fn sentence(rng: &mut ChaCha8Rng, g: &PlantedGroup) -> String {
    format!(
        "{} {} {} {} for {} {}.",
        pick(rng, &OPENERS),
        pick(rng, g.verbs),
        pick(rng, g.anchors),
        pick(rng, g.nouns),
        pick(rng, g.nouns),
        pick(rng, g.nouns),
    )
}

/// `n` records spread round-robin over the five groups.
pub fn generate(n: usize, seed: u64) -> Vec<RawRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let g = &GROUPS[i % GROUPS.len()];
            let title = format!(
                "{} {} {}",
                pick(&mut rng, &ADJECTIVES),
                capitalize(pick(&mut rng, g.anchors)),
                capitalize(pick(&mut rng, g.nouns)),
            );
            let mut parts: Vec<String> = (0..3).map(|_| sentence(&mut rng, g)).collect();
            if rng.random_bool(CROSS_CUTTING_RATE) {
                parts.push(CROSS_CUTTING.to_string());
            }
            let year = rng.random_range(FIRST_YEAR..=LAST_YEAR);
            let month = rng.random_range(1..=12);
            RawRecord {
                id: format!("p{i:03}"),
                title,
                description: parts.join(" "),
                group: g.name.to_string(),
                date: format!("{year}-{month:02}"),
            }
        })
        .collect()
}

/// The bundled 500-document corpus.
pub fn default_corpus() -> Vec<RawRecord> {
    generate(SYNTHETIC_SIZE, SYNTHETIC_SEED)
}

pub fn to_json(records: &[RawRecord]) -> String {
    let mut s = serde_json::to_string_pretty(records).expect("records serialize");
    s.push('\n');
    s
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
