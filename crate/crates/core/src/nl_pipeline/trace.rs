use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use super::input::CommandInput;
use super::prompt::PromptSpec;
use super::safety::SafetyVerdict;
use crate::bt_model::ValidationReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExecutionStatus {
    NotExecuted,
    Running,
    Succeeded,
    Failed,
    Stopped,
    Timeout,
}

impl ExecutionStatus {
    pub fn is_terminal(self) -> bool {
        !matches!(self, ExecutionStatus::Running)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Normalize,
    Safety,
    Prompt,
    Generate,
    Validate,
    Execute,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Normalize => "normalize",
            Stage::Safety => "safety",
            Stage::Prompt => "prompt",
            Stage::Generate => "generate",
            Stage::Validate => "validate",
            Stage::Execute => "execute",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
    /// An external endpoint could not be reached or answered with an error
    /// status.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub endpoint_unavailable: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageLatencies {
    pub normalize: Option<f64>,
    pub safety: Option<f64>,
    pub prompt: Option<f64>,
    pub generate: Option<f64>,
    pub validate: Option<f64>,
}

impl StageLatencies {
    pub fn set(&mut self, stage: Stage, ms: f64) {
        let slot = match stage {
            Stage::Normalize => &mut self.normalize,
            Stage::Safety => &mut self.safety,
            Stage::Prompt => &mut self.prompt,
            Stage::Generate => &mut self.generate,
            Stage::Validate => &mut self.validate,
            Stage::Execute => return,
        };
        *slot = Some(ms);
    }
}

/// Audit record of one command. Stages only ever fill in fields; nothing
/// recorded is rewritten except the execution status, whose history is kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub trace_id: String,
    pub input: CommandInput,
    pub normalized_text: Option<String>,
    pub safety_verdict: Option<SafetyVerdict>,
    pub prompt: Option<PromptSpec>,
    pub raw_model_output: Option<String>,
    pub validation_report: Option<ValidationReport>,
    pub execution_status: ExecutionStatus,
    pub status_history: Vec<ExecutionStatus>,
    pub latencies_ms: StageLatencies,
    pub errors: Vec<StageError>,
    /// Simulation ticks spent executing the tree.
    pub ticks: u64,
}

impl PipelineTrace {
    pub fn new(input: CommandInput) -> Self {
        PipelineTrace {
            trace_id: Uuid::new_v4().to_string(),
            input,
            normalized_text: None,
            safety_verdict: None,
            prompt: None,
            raw_model_output: None,
            validation_report: None,
            execution_status: ExecutionStatus::NotExecuted,
            status_history: vec![ExecutionStatus::NotExecuted],
            latencies_ms: StageLatencies::default(),
            errors: Vec::new(),
            ticks: 0,
        }
    }

    pub fn set_status(&mut self, status: ExecutionStatus) {
        if self.execution_status != status {
            self.execution_status = status;
            self.status_history.push(status);
        }
    }

    pub fn error(&mut self, stage: Stage, message: impl Into<String>) {
        self.errors.push(StageError {
            stage,
            message: message.into(),
            endpoint_unavailable: false,
        });
    }

    pub fn endpoint_error(&mut self, stage: Stage, message: impl Into<String>) {
        self.errors.push(StageError {
            stage,
            message: message.into(),
            endpoint_unavailable: true,
        });
    }

    /// Some stage failed closed because an external endpoint was down.
    pub fn endpoint_unavailable(&self) -> bool {
        self.errors.iter().any(|e| e.endpoint_unavailable)
    }

    pub fn is_accepted(&self) -> bool {
        self.validation_report.as_ref().is_some_and(ValidationReport::is_accepted)
    }
}

/// Append-only JSON-lines audit log.
#[derive(Debug)]
pub struct AuditLog {
    path: PathBuf,
    file: File,
}

impl AuditLog {
    pub fn open(path: impl Into<PathBuf>) -> std::io::Result<Self> {
        let path = path.into();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(AuditLog { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, trace: &PipelineTrace) -> std::io::Result<()> {
        let mut line = serde_json::to_string(trace).map_err(std::io::Error::other)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()
    }

    pub fn read_all(path: impl AsRef<Path>) -> std::io::Result<Vec<PipelineTrace>> {
        let reader = BufReader::new(File::open(path)?);
        reader
            .lines()
            .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|l| serde_json::from_str(&l?).map_err(std::io::Error::other))
            .collect()
    }
}
