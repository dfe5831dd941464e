//! Filler phrases spoken while the full answer is still being computed.

use std::collections::BTreeMap;

use super::TurnsimError;
use crate::hashing::stable_hash64;

pub const FILLER_TEMPLATES_ASSET: &str = include_str!("../../assets/filler_templates.txt");

/// Template classes keyed by interrogative, plus `generic`.
pub const FILLER_CLASSES: [&str; 7] = ["how", "who", "what", "where", "when", "why", "generic"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FillerTemplates {
    classes: BTreeMap<String, Vec<String>>,
}

impl FillerTemplates {
    /// Parses `[class]` sections of one filler per line; `#` starts a
    /// comment line. A `generic` section is required.
    pub fn parse(text: &str) -> Result<Self, TurnsimError> {
        let mut classes: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(name.trim().to_lowercase());
                classes.entry(name.trim().to_lowercase()).or_default();
                continue;
            }
            let Some(class) = &current else {
                return Err(TurnsimError::EmptyTemplates(format!(
                    "line {}: filler outside a [class] section",
                    i + 1
                )));
            };
            classes
                .get_mut(class)
                .expect("section registered")
                .push(line.to_string());
        }
        classes.retain(|_, v| !v.is_empty());
        if !classes.contains_key("generic") {
            return Err(TurnsimError::EmptyTemplates("no [generic] fillers".into()));
        }
        Ok(Self { classes })
    }

    pub fn builtin() -> Self {
        Self::parse(FILLER_TEMPLATES_ASSET).expect("shipped filler asset parses")
    }

    pub fn class(&self, name: &str) -> Option<&[String]> {
        self.classes.get(name).map(Vec::as_slice)
    }
}

/// The first who/what/where/when/why/how token of the prefix, if any.
pub fn filler_class(prefix: &str) -> &'static str {
    prefix
        .split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .find_map(|w| FILLER_CLASSES[..6].iter().find(|c| **c == w).copied())
        .unwrap_or("generic")
}

/// Picks a filler from the prefix's class (generic when the class has no
/// templates). The pick rotates with `seed` and the prefix text, so the
/// same prefix and seed always give the same filler.
pub fn choose_filler<'t>(prefix: &str, templates: &'t FillerTemplates, seed: u64) -> &'t str {
    let class = templates
        .class(filler_class(prefix))
        .or_else(|| templates.class("generic"))
        .expect("generic present");
    let normalized = prefix
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    let idx = stable_hash64(normalized.as_bytes()).wrapping_add(seed) % class.len() as u64;
    &class[idx as usize]
}
