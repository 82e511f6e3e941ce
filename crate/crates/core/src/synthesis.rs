//! Recipe-based idea generation with prompt provenance.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Project};
use crate::gateway::{ChatRequest, Gateway, GatewayError, IDEA_TEMPERATURE};

pub const MAX_RECIPE_ITEMS: usize = 8;
pub const IDEA_LOG_FILE: &str = "ideas.log.jsonl";
pub const SYNTHESIS_SYSTEM_PROMPT: &str =
    "You are a research ideation assistant. Combine the given elements into one novel, feasible research project.";
const REPLY_INSTRUCTIONS: &str = "Return exactly:\nTITLE: ...\nDESCRIPTION: ...";
const REPROMPT_SUFFIX: &str =
    "\n\nYour previous answer was not in the required format. Answer with a TITLE: line followed by a DESCRIPTION: line.";

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("recipe must have 1 to {MAX_RECIPE_ITEMS} items, got {0}")]
    RecipeSize(usize),
    #[error("recipe lists {project_id} / {aspect} twice")]
    DuplicateItem { project_id: String, aspect: Aspect },
    #[error("unknown project {0}")]
    UnknownProject(String),
    #[error("unknown aspect {0:?}")]
    UnknownAspect(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("model reply lacks TITLE/DESCRIPTION sections")]
    MalformedReply,
    #[error("idea log: {0}")]
    Log(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aspect {
    Whole,
    Community,
    ProblemStatement,
    Technology,
}

impl Aspect {
    pub const ALL: [Aspect; 4] = [
        Aspect::Whole,
        Aspect::Community,
        Aspect::ProblemStatement,
        Aspect::Technology,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Aspect::Whole => "whole",
            Aspect::Community => "community",
            Aspect::ProblemStatement => "problem_statement",
            Aspect::Technology => "technology",
        }
    }

    pub fn keywords(self) -> &'static [&'static str] {
        match self {
            Aspect::Whole => &[],
            Aspect::Community => &["community", "users", "people", "artists", "students", "public"],
            Aspect::ProblemStatement => &["problem", "challenge", "lack", "need", "gap", "difficult"],
            Aspect::Technology => &["system", "algorithm", "model", "sensor", "platform", "hardware", "software"],
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aspect {
    type Err = SynthesisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Aspect::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| SynthesisError::UnknownAspect(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RecipeItem {
    pub project_id: String,
    pub aspect: Aspect,
}

impl RecipeItem {
    pub fn new(project_id: impl Into<String>, aspect: Aspect) -> Self {
        Self {
            project_id: project_id.into(),
            aspect,
        }
    }
}

/// A validated, ordered list of 1..=8 distinct items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recipe(Vec<RecipeItem>);

impl Recipe {
    pub fn new(items: Vec<RecipeItem>) -> Result<Self, SynthesisError> {
        if items.is_empty() || items.len() > MAX_RECIPE_ITEMS {
            return Err(SynthesisError::RecipeSize(items.len()));
        }
        for (i, item) in items.iter().enumerate() {
            if items[..i].contains(item) {
                return Err(SynthesisError::DuplicateItem {
                    project_id: item.project_id.clone(),
                    aspect: item.aspect,
                });
            }
        }
        Ok(Self(items))
    }

    pub fn items(&self) -> &[RecipeItem] {
        &self.0
    }
}

/// Sentences of `text`, each keeping its terminator.
fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if matches!(c, '.' | '?' | '!') {
            out.push(text[start..i + 1].trim());
            start = i + 1;
        }
    }
    out.push(text[start..].trim());
    out.retain(|s| !s.is_empty());
    out
}

fn mentions_any(sentence: &str, keywords: &[&str]) -> bool {
    sentence
        .split(|c: char| !c.is_alphanumeric())
        .any(|w| keywords.iter().any(|k| w.eq_ignore_ascii_case(k)))
}

/// Text standing for one aspect of a project. Never empty.
pub fn extract_aspect(project: &Project, aspect: Aspect) -> String {
    let whole = || {
        if project.description.trim().is_empty() {
            project.title.clone()
        } else {
            format!("{}\n{}", project.title, project.description)
        }
    };
    if aspect == Aspect::Whole {
        return whole();
    }
    let picked: Vec<&str> = sentences(&project.description)
        .into_iter()
        .filter(|s| mentions_any(s, aspect.keywords()))
        .collect();
    if !picked.is_empty() {
        picked.join(" ")
    } else if !project.description.trim().is_empty() {
        project.description.clone()
    } else {
        project.title.clone()
    }
}

fn resolve<'c>(corpus: &'c Corpus, id: &str) -> Result<&'c Project, SynthesisError> {
    corpus
        .project(id)
        .ok_or_else(|| SynthesisError::UnknownProject(id.to_string()))
}

/// The user message for a recipe: one delimited block per item, in order.
pub fn assemble_prompt(recipe: &Recipe, corpus: &Corpus) -> Result<String, SynthesisError> {
    let mut prompt = String::new();
    for (i, item) in recipe.items().iter().enumerate() {
        let project = resolve(corpus, &item.project_id)?;
        prompt.push_str(&format!(
            "[ELEMENT {} — {} of \"{}\"]\n{}\n\n",
            i + 1,
            item.aspect,
            project.title,
            extract_aspect(project, item.aspect)
        ));
    }
    prompt.push_str(REPLY_INSTRUCTIONS);
    Ok(prompt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedIdea {
    pub title: String,
    pub description: String,
    pub prompt_used: String,
    pub created_at: DateTime<Utc>,
}

/// Pulls the `TITLE:` line and everything after `DESCRIPTION:` out of a reply.
pub fn parse_idea_reply(reply: &str) -> Option<(String, String)> {
    let t = reply.find("TITLE:")?;
    let d = reply.find("DESCRIPTION:")?;
    if d < t {
        return None;
    }
    let title = reply[t + "TITLE:".len()..d].trim();
    let title = title.lines().next().unwrap_or("").trim();
    let description = reply[d + "DESCRIPTION:".len()..].trim();
    if title.is_empty() || description.is_empty() {
        return None;
    }
    Some((title.to_string(), description.to_string()))
}

/// Asks the chat model for an idea, reprompting once on a malformed reply.
/// `prompt_used` is always the first, unmodified prompt.
pub fn generate_idea(
    recipe: &Recipe,
    corpus: &Corpus,
    gateway: &Gateway,
) -> Result<GeneratedIdea, SynthesisError> {
    let prompt = assemble_prompt(recipe, corpus)?;
    let first = ChatRequest::new(SYNTHESIS_SYSTEM_PROMPT, prompt.clone(), IDEA_TEMPERATURE);
    let parsed = match parse_idea_reply(&gateway.complete_chat(&first)?) {
        Some(p) => p,
        None => {
            let retry = ChatRequest::new(
                SYNTHESIS_SYSTEM_PROMPT,
                format!("{prompt}{REPROMPT_SUFFIX}"),
                IDEA_TEMPERATURE,
            );
            parse_idea_reply(&gateway.complete_chat(&retry)?).ok_or(SynthesisError::MalformedReply)?
        }
    };
    Ok(GeneratedIdea {
        title: parsed.0,
        description: parsed.1,
        prompt_used: prompt,
        created_at: Utc::now(),
    })
}

/// Append-only JSON-lines log of generated ideas. Writes are serialized.
#[derive(Debug)]
pub struct IdeaLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl IdeaLog {
    pub fn open(path: &Path) -> Result<Self, SynthesisError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, idea: &GeneratedIdea) -> Result<(), SynthesisError> {
        let mut line = serde_json::to_string(idea).expect("idea serializes");
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        f.write_all(line.as_bytes())?;
        f.flush()?;
        Ok(())
    }
}
