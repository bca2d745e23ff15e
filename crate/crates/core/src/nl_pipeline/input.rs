use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::endpoint::{EndpointConfig, EndpointError, Message, TextEndpoint};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Modality {
    Text,
    /// Opaque reference (path or URL) to recorded audio; only a translation
    /// endpoint can turn it into text.
    Audio { reference: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandInput {
    pub session_id: String,
    pub modality: Modality,
    pub raw_text: Option<String>,
    pub language_hint: Option<String>,
    pub timestamp: DateTime<Utc>,
}

impl CommandInput {
    pub fn text(session_id: impl Into<String>, text: impl Into<String>) -> Self {
        CommandInput {
            session_id: session_id.into(),
            modality: Modality::Text,
            raw_text: Some(text.into()),
            language_hint: None,
            timestamp: Utc::now(),
        }
    }

    pub fn with_language(mut self, tag: impl Into<String>) -> Self {
        self.language_hint = Some(tag.into());
        self
    }

    pub fn validate(&self) -> Result<(), InputError> {
        match (&self.modality, &self.raw_text) {
            (Modality::Text, None) => Err(InputError::MissingText),
            (Modality::Text, Some(t)) if t.trim().is_empty() => Err(InputError::MissingText),
            (Modality::Audio { reference }, _) if reference.trim().is_empty() => Err(InputError::MissingAudio),
            _ => Ok(()),
        }
    }

    /// English when the hint says so; with no hint, plain ASCII text is
    /// taken as English.
    pub fn is_english_text(&self) -> bool {
        if self.modality != Modality::Text {
            return false;
        }
        match &self.language_hint {
            Some(tag) => {
                let primary = tag.split(['-', '_']).next().unwrap_or_default();
                primary.eq_ignore_ascii_case("en")
            }
            None => self.raw_text.as_deref().is_some_and(|t| t.is_ascii()),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum InputError {
    #[error("text command without text")]
    MissingText,
    #[error("audio command without a reference")]
    MissingAudio,
    #[error("translation unavailable: no translation endpoint configured")]
    TranslationUnavailable,
    #[error("translation failed: {0}")]
    Translation(EndpointError),
    #[error("translation returned empty text")]
    EmptyTranslation,
}

const TRANSLATE_INSTRUCTION: &str =
    "Translate the operator command into one English sentence. Reply with the translation only.";

/// Produces the single English command the rest of the pipeline works on.
pub fn normalize_input(
    input: &CommandInput,
    translator: Option<(&dyn TextEndpoint, &EndpointConfig)>,
) -> Result<String, InputError> {
    input.validate()?;
    if input.is_english_text() {
        return Ok(input.raw_text.as_deref().unwrap_or_default().trim().to_string());
    }
    let (endpoint, config) = translator.ok_or(InputError::TranslationUnavailable)?;
    let mut user = match &input.modality {
        Modality::Text => input.raw_text.clone().unwrap_or_default(),
        Modality::Audio { reference } => format!("[audio] {reference}"),
    };
    if let Some(tag) = &input.language_hint {
        user = format!("[{tag}] {user}");
    }
    let request = config.request(vec![Message::system(TRANSLATE_INSTRUCTION), Message::user(user)]);
    let out = endpoint.complete(&request).map_err(InputError::Translation)?;
    let out = out.trim();
    if out.is_empty() {
        return Err(InputError::EmptyTranslation);
    }
    Ok(out.to_string())
}
