//! Command pipeline: normalize, safety gate, prompt, generate, validate,
//! then hand accepted trees to a session for execution.

mod config;
mod endpoint;
mod input;
mod prompt;
mod safety;
mod session;
mod trace;

use std::time::Instant;

use thiserror::Error;

use crate::bt_model::{default_whitelist, parse_document, NodeWhitelist};

pub use config::{CommandMode, ConfigError, PipelineConfig, ENV_LLM_URL, ENV_SAFETY_URL, ENV_TRANSLATOR_URL};
pub use endpoint::{
    CompletionRequest, EchoEndpoint, EndpointConfig, EndpointError, HttpEndpoint, Message, MockEndpoint,
    ReferenceModel, TextEndpoint, REFERENCE_MOCK_URL,
};
pub use input::{normalize_input, CommandInput, InputError, Modality};
pub use prompt::{
    build_prompt, example_bank, render_whitelist, PromptExample, PromptSpec, ShotsOutOfRange,
    EXAMPLE_BANK_VERSION, FORMAT_SKELETON, SYSTEM_INSTRUCTION,
};
pub use safety::{
    check_safety, content_words, BlocklistError, Decision, RuleSafety, SafetyVerdict, VerdictSource,
    DEFAULT_BLOCKLIST, SAFETY_UNAVAILABLE,
};
pub use session::{handle_command, Session, StepOutcome, StopAck, TRACE_RING_CAPACITY};
pub use trace::{AuditLog, ExecutionStatus, PipelineTrace, Stage, StageError, StageLatencies};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{which} endpoint: {source}")]
    Endpoint {
        which: &'static str,
        source: EndpointError,
    },
    #[error(transparent)]
    Blocklist(#[from] BlocklistError),
    #[error(transparent)]
    Shots(#[from] ShotsOutOfRange),
}

/// Endpoints, rules and whitelist shared by every session.
pub struct Pipeline {
    config: PipelineConfig,
    whitelist: NodeWhitelist,
    llm: Box<dyn TextEndpoint>,
    translator: Option<Box<dyn TextEndpoint>>,
    safety: Option<Box<dyn TextEndpoint>>,
    rules: RuleSafety,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("llm", &self.llm.describe())
            .field("translator", &self.translator.as_ref().map(|t| t.describe()))
            .field("safety", &self.safety.as_ref().map(|t| t.describe()))
            .finish_non_exhaustive()
    }
}

impl Pipeline {
    pub fn from_config(config: PipelineConfig) -> Result<Self, PipelineError> {
        let whitelist = default_whitelist();
        let connect = |which, c: &EndpointConfig| c.connect().map_err(|source| PipelineError::Endpoint { which, source });
        let llm = connect("llm", &config.llm)?;
        let translator = config.translator.as_ref().map(|c| connect("translator", c)).transpose()?;
        let safety = config.safety.as_ref().map(|c| connect("safety", c)).transpose()?;
        let rules = match &config.blocklist_path {
            Some(p) => RuleSafety::from_blocklist_file(&whitelist, p)?,
            None => RuleSafety::with_defaults(&whitelist),
        };
        if config.shots > 2 {
            return Err(ShotsOutOfRange(config.shots).into());
        }
        Ok(Pipeline {
            config,
            whitelist,
            llm,
            translator,
            safety,
            rules,
        })
    }

    /// Default whitelist and rules with the given endpoints.
    pub fn with_endpoints(
        config: PipelineConfig,
        llm: Box<dyn TextEndpoint>,
        translator: Option<Box<dyn TextEndpoint>>,
        safety: Option<Box<dyn TextEndpoint>>,
    ) -> Self {
        let whitelist = default_whitelist();
        let rules = RuleSafety::with_defaults(&whitelist);
        Pipeline {
            config,
            whitelist,
            llm,
            translator,
            safety,
            rules,
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn whitelist(&self) -> &NodeWhitelist {
        &self.whitelist
    }

    pub fn prepare(&self, input: CommandInput) -> PipelineTrace {
        self.prepare_observed(input, &mut |_, _| {})
    }

    /// Runs every stage up to validation. `on_stage` sees the trace after
    /// each stage that ran. Never executes anything.
    pub fn prepare_observed(
        &self,
        input: CommandInput,
        on_stage: &mut dyn FnMut(Stage, &PipelineTrace),
    ) -> PipelineTrace {
        self.prepare_with(input, None, on_stage)
    }

    /// As [`Pipeline::prepare_observed`], with a per-command shot count
    /// overriding the configured one.
    pub fn prepare_with(
        &self,
        input: CommandInput,
        shots: Option<u8>,
        on_stage: &mut dyn FnMut(Stage, &PipelineTrace),
    ) -> PipelineTrace {
        let mut trace = PipelineTrace::new(input);
        let mut timed = |trace: &mut PipelineTrace, stage: Stage, started: Instant| {
            trace.latencies_ms.set(stage, started.elapsed().as_secs_f64() * 1e3);
            on_stage(stage, trace);
        };

        let t = Instant::now();
        let translator = self.translator.as_deref().zip(self.config.translator.as_ref());
        let normalized = normalize_input(&trace.input, translator);
        match normalized {
            Ok(text) => trace.normalized_text = Some(text),
            Err(e) => {
                match &e {
                    InputError::Translation(err) if err.is_unavailable() => {
                        trace.endpoint_error(Stage::Normalize, e.to_string())
                    }
                    _ => trace.error(Stage::Normalize, e.to_string()),
                }
                timed(&mut trace, Stage::Normalize, t);
                return trace;
            }
        }
        timed(&mut trace, Stage::Normalize, t);
        let text = trace.normalized_text.clone().unwrap_or_default();

        let t = Instant::now();
        let classifier = self.safety.as_deref().zip(self.config.safety.as_ref());
        let verdict = check_safety(&text, classifier, &self.rules);
        let allowed = verdict.is_allowed();
        if verdict.source == VerdictSource::ExternalClassifier && verdict.reason == SAFETY_UNAVAILABLE {
            trace.endpoint_error(Stage::Safety, SAFETY_UNAVAILABLE);
        }
        trace.safety_verdict = Some(verdict);
        timed(&mut trace, Stage::Safety, t);
        if !allowed {
            return trace;
        }

        let t = Instant::now();
        let prompt = match build_prompt(&text, shots.unwrap_or(self.config.shots), &self.whitelist) {
            Ok(p) => p,
            Err(e) => {
                trace.error(Stage::Prompt, e.to_string());
                timed(&mut trace, Stage::Prompt, t);
                return trace;
            }
        };
        let rendered = prompt.render();
        trace.prompt = Some(prompt);
        timed(&mut trace, Stage::Prompt, t);

        let t = Instant::now();
        let request = self
            .config
            .llm
            .request(vec![Message::system(SYSTEM_INSTRUCTION), Message::user(rendered)]);
        match self.llm.complete(&request) {
            Ok(out) => trace.raw_model_output = Some(out),
            Err(e) => {
                if e.is_unavailable() {
                    trace.endpoint_error(Stage::Generate, e.to_string());
                } else {
                    trace.error(Stage::Generate, e.to_string());
                }
                timed(&mut trace, Stage::Generate, t);
                return trace;
            }
        }
        timed(&mut trace, Stage::Generate, t);

        let t = Instant::now();
        let raw = trace.raw_model_output.as_deref().unwrap_or_default();
        trace.validation_report = Some(parse_document(raw, &self.whitelist));
        timed(&mut trace, Stage::Validate, t);
        trace
    }

    /// Raw model output for an instruction, skipping normalization and the
    /// safety gate. Used to fill candidates when evaluating a corpus.
    pub fn generate_candidate(&self, instruction: &str, shots: u8) -> Result<String, PipelineError> {
        let prompt = build_prompt(instruction, shots, &self.whitelist)?;
        let request = self
            .config
            .llm
            .request(vec![Message::system(SYSTEM_INSTRUCTION), Message::user(prompt.render())]);
        self.llm
            .complete(&request)
            .map_err(|source| PipelineError::Endpoint { which: "llm", source })
    }
}
