use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GatewayError;

pub const ECHO_ENDPOINT: &str = "stub:echo";
pub const HASH32_ENDPOINT: &str = "stub:hash32";
pub const DEFAULT_MAX_TOKENS: u32 = 512;
pub const REASONING_MAX_TOKENS: u32 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Chat,
    Embedding,
}

fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}

/// One model behind an OpenAI-compatible endpoint, or a built-in stub.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelProfile {
    pub name: String,
    pub kind: ProfileKind,
    /// Base URL; `stub:echo` / `stub:hash32` select offline stubs. When
    /// absent, `CHEMRAG_API_BASE` is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Model id sent on the wire; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub reasoning: bool,
    /// Name of the env var holding this profile's key, overriding
    /// `CHEMRAG_API_KEY`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests_per_minute: Option<u32>,
    /// Seed for the hash32 stub.
    #[serde(default)]
    pub seed: u64,
}

impl ModelProfile {
    pub fn chat(name: &str, model: &str) -> Self {
        ModelProfile {
            name: name.into(),
            kind: ProfileKind::Chat,
            endpoint: None,
            model: Some(model.into()),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            reasoning: false,
            api_key_env: None,
            requests_per_minute: None,
            seed: 0,
        }
    }

    pub fn reasoning(name: &str, model: &str, temperature: f64) -> Self {
        ModelProfile {
            temperature,
            max_tokens: REASONING_MAX_TOKENS,
            reasoning: true,
            ..ModelProfile::chat(name, model)
        }
    }

    pub fn embedding(name: &str, model: &str) -> Self {
        ModelProfile {
            kind: ProfileKind::Embedding,
            ..ModelProfile::chat(name, model)
        }
    }

    pub fn stub(name: &str, kind: ProfileKind) -> Self {
        let endpoint = match kind {
            ProfileKind::Chat => ECHO_ENDPOINT,
            ProfileKind::Embedding => HASH32_ENDPOINT,
        };
        ModelProfile {
            kind,
            endpoint: Some(endpoint.into()),
            model: None,
            ..ModelProfile::chat(name, name)
        }
    }

    pub fn model_id(&self) -> &str {
        self.model.as_deref().unwrap_or(&self.name)
    }

    pub fn is_stub(&self) -> bool {
        self.endpoint.as_deref().is_some_and(|e| e.starts_with("stub:"))
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: String| Err(GatewayError::Config(format!("profile {:?}: {m}", self.name)));
        if self.name.trim().is_empty() {
            return bad("name is empty".into());
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be >= 1".into());
        }
        if self.reasoning {
            if self.kind != ProfileKind::Chat {
                return bad("only chat profiles can be reasoning profiles".into());
            }
            if self.max_tokens != REASONING_MAX_TOKENS {
                return bad(format!("reasoning profiles use max_tokens {REASONING_MAX_TOKENS}"));
            }
            if self.temperature != 0.6 && self.temperature != 1.0 {
                return bad("reasoning profiles use temperature 0.6 or 1".into());
            }
        }
        if self.requests_per_minute == Some(0) {
            return bad("requests_per_minute must be >= 1".into());
        }
        match (self.endpoint.as_deref(), self.kind) {
            (None, _) => {}
            (Some(ECHO_ENDPOINT), ProfileKind::Chat) | (Some(HASH32_ENDPOINT), ProfileKind::Embedding) => {}
            (Some(e), _) if e.starts_with("stub:") => {
                return bad(format!("stub endpoint {e} does not fit a {:?} profile", self.kind));
            }
            (Some(e), _) if e.starts_with("http://") || e.starts_with("https://") => {}
            (Some(e), _) => return bad(format!("endpoint {e:?} is not an http(s) URL")),
        }
        Ok(())
    }
}

/// Profiles by lowercase name.
#[derive(Clone, Debug, Default)]
pub struct ProfileRegistry {
    profiles: BTreeMap<String, ModelProfile>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProfileFile {
    Wrapped { profiles: Vec<ModelProfile> },
    Bare(Vec<ModelProfile>),
}

impl ProfileRegistry {
    pub fn empty() -> Self {
        ProfileRegistry::default()
    }

    /// The evaluated roster, the three dense retriever profiles, and the
    /// offline stubs `echo` and `hash32`.
    pub fn builtin() -> Self {
        let mut r = ProfileRegistry::default();
        for p in [
            ModelProfile::chat("llama-3.1-8b-instruct", "meta-llama/Llama-3.1-8B-Instruct"),
            ModelProfile::chat("llama-3.1-70b-instruct", "meta-llama/Llama-3.1-70B-Instruct"),
            ModelProfile::chat("mistral-7b-instruct-v0.2", "mistralai/Mistral-7B-Instruct-v0.2"),
            ModelProfile::chat("chemllm", "AI4Chem/ChemLLM-7B-Chat"),
            ModelProfile::chat("gpt-3.5-turbo", "gpt-3.5-turbo"),
            ModelProfile::chat("gpt-4o", "gpt-4o"),
            ModelProfile::reasoning("deepseek-r1-llama-8b", "deepseek-ai/DeepSeek-R1-Distill-Llama-8B", 0.6),
            ModelProfile::reasoning("o1", "o1", 1.0),
            ModelProfile::embedding("contriever", "facebook/contriever"),
            ModelProfile::embedding("specter", "allenai/specter"),
            ModelProfile::embedding("e5", "intfloat/e5-base-v2"),
            ModelProfile::stub("echo", ProfileKind::Chat),
            ModelProfile::stub("hash32", ProfileKind::Embedding),
        ] {
            r.insert(p).expect("builtin profiles are valid");
        }
        r
    }

    /// Adds or replaces a profile.
    pub fn insert(&mut self, profile: ModelProfile) -> Result<(), GatewayError> {
        profile.validate()?;
        self.profiles.insert(profile.name.to_lowercase(), profile);
        Ok(())
    }

    /// Merges profiles from a JSON file: either `{"profiles": [...]}` or a
    /// bare array.
    pub fn merge_file(&mut self, path: &Path) -> Result<(), GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        self.merge_json(&text)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))
    }

    pub fn merge_json(&mut self, text: &str) -> Result<(), GatewayError> {
        let file: ProfileFile =
            serde_json::from_str(text).map_err(|e| GatewayError::Config(format!("bad profile file: {e}")))?;
        let list = match file {
            ProfileFile::Wrapped { profiles } | ProfileFile::Bare(profiles) => profiles,
        };
        for p in list {
            self.insert(p)?;
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&ModelProfile, GatewayError> {
        self.profiles.get(&name.to_lowercase()).ok_or_else(|| {
            GatewayError::Config(format!(
                "unknown model profile {name:?}; known: {}",
                self.profiles.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.profiles.values().map(|p| p.name.as_str())
    }

    pub fn temperature_for(&self, name: &str) -> Result<f64, GatewayError> {
        Ok(self.get(name)?.temperature)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn temperatures() {
        let r = ProfileRegistry::builtin();
        assert_eq!(r.temperature_for("gpt-3.5-turbo").unwrap(), 0.0);
        assert_eq!(r.temperature_for("deepseek-r1-llama-8b").unwrap(), 0.6);
        assert_eq!(r.temperature_for("DeepSeek-R1-Llama-8B").unwrap(), 0.6);
        assert_eq!(r.temperature_for("o1").unwrap(), 1.0);
        assert!(matches!(r.temperature_for("gpt-5"), Err(GatewayError::Config(_))));
        assert_eq!(r.get("o1").unwrap().max_tokens, 10_000);
        assert_eq!(r.get("gpt-4o").unwrap().max_tokens, 512);
    }

    #[test]
    fn validation() {
        let mut p = ModelProfile::reasoning("r", "r", 0.6);
        p.max_tokens = 512;
        assert!(p.validate().is_err());
        let mut p = ModelProfile::chat("c", "c");
        p.temperature = -1.0;
        assert!(p.validate().is_err());
        let mut p = ModelProfile::chat("c", "c");
        p.endpoint = Some(HASH32_ENDPOINT.into());
        assert!(p.validate().is_err());
        p.endpoint = Some("ftp://x".into());
        assert!(p.validate().is_err());
    }

    #[test]
    fn merge_overrides() {
        let mut r = ProfileRegistry::builtin();
        r.merge_json(r#"{"profiles":[{"name":"contriever","kind":"embedding","endpoint":"stub:hash32","seed":7}]}"#)
            .unwrap();
        assert!(r.get("contriever").unwrap().is_stub());
        assert!(r.merge_json(r#"[{"name":"x","kind":"chat","bogus":1}]"#).is_err());
    }
}
