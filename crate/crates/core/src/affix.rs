use serde::{Deserialize, Serialize};

/// Marks synthetic column names, e.g. prefix `synth_` or suffix `_synth`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffixRule {
    Prefix(String),
    Suffix(String),
}

impl Default for AffixRule {
    fn default() -> Self {
        AffixRule::Prefix("synth_".to_string())
    }
}

impl AffixRule {
    /// Parses the CLI shorthand: a leading underscore means suffix
    /// (`_synth`), anything else is a prefix (`synth_`).
    pub fn parse_shorthand(text: &str) -> AffixRule {
        if text.starts_with('_') && !text.ends_with('_') {
            AffixRule::Suffix(text.to_string())
        } else {
            AffixRule::Prefix(text.to_string())
        }
    }

    pub fn token(&self) -> &str {
        match self {
            AffixRule::Prefix(s) | AffixRule::Suffix(s) => s,
        }
    }

    pub fn apply(&self, name: &str) -> String {
        match self {
            AffixRule::Prefix(p) => format!("{p}{name}"),
            AffixRule::Suffix(s) => format!("{name}{s}"),
        }
    }

    /// Returns the bare name if `name` carries the affix.
    pub fn strip<'a>(&self, name: &'a str) -> Option<&'a str> {
        let bare = match self {
            AffixRule::Prefix(p) => name.strip_prefix(p.as_str()),
            AffixRule::Suffix(s) => name.strip_suffix(s.as_str()),
        }?;
        (!bare.is_empty()).then_some(bare)
    }

    pub fn has(&self, name: &str) -> bool {
        self.strip(name).is_some()
    }
}

impl std::fmt::Display for AffixRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AffixRule::Prefix(p) => write!(f, "prefix '{p}'"),
            AffixRule::Suffix(s) => write!(f, "suffix '{s}'"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_round_trip() {
        let rule = AffixRule::default();
        assert_eq!(rule.apply("age"), "synth_age");
        assert_eq!(rule.strip("synth_age"), Some("age"));
        assert_eq!(rule.strip("age"), None);
        assert_eq!(rule.strip("synth_"), None);
    }

    #[test]
    fn suffix_round_trip() {
        let rule = AffixRule::Suffix("_synth".into());
        assert_eq!(rule.apply("age"), "age_synth");
        assert_eq!(rule.strip("age_synth"), Some("age"));
    }

    #[test]
    fn shorthand() {
        assert_eq!(AffixRule::parse_shorthand("synth_"), AffixRule::Prefix("synth_".into()));
        assert_eq!(AffixRule::parse_shorthand("_synth"), AffixRule::Suffix("_synth".into()));
    }
}
