use std::fmt;
use std::path::Path;

use hht_motion::analysis::AnalysisError;
use hht_motion::archive::ArchiveError;
use hht_motion::beat::BeatError;
use hht_motion::edit::EditError;
use hht_motion::memd::MemdError;
use hht_motion::mocap_io::MocapError;
use hht_motion::signal_core::SignalError;

/// Process exit codes.
pub mod code {
    pub const FAILURE: u8 = 1;
    pub const PARSE: u8 = 2;
    pub const CHANNELS: u8 = 3;
    pub const CONVERGENCE: u8 = 4;
    pub const NO_PERIODICITY: u8 = 5;
    pub const SPEC: u8 = 6;
    pub const USAGE: u8 = 64;
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(code::USAGE, message)
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::new(code::FAILURE, format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn signal_code(e: &SignalError) -> u8 {
    match e {
        SignalError::NoConvergence { .. } | SignalError::TooFewExtrema { .. } | SignalError::DegenerateSignal => {
            code::CONVERGENCE
        }
        SignalError::LengthMismatch(..) => code::CHANNELS,
        SignalError::BadParameter(_) | SignalError::BadRate(_) => code::USAGE,
        _ => code::FAILURE,
    }
}

fn memd_code(e: &MemdError) -> u8 {
    match e {
        MemdError::TooFewExtrema { .. } => code::CONVERGENCE,
        MemdError::ChannelMismatch(_) | MemdError::BadDimension(_) => code::CHANNELS,
        MemdError::Signal(s) => signal_code(s),
    }
}

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        Self::new(signal_code(&e), e.to_string())
    }
}

impl From<MemdError> for CliError {
    fn from(e: MemdError) -> Self {
        Self::new(memd_code(&e), e.to_string())
    }
}

impl From<MocapError> for CliError {
    fn from(e: MocapError) -> Self {
        let code = match &e {
            MocapError::UnknownChannel { .. } | MocapError::LengthMismatch { .. } => code::CHANNELS,
            MocapError::Series(m) => memd_code(m),
            _ => code::PARSE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<BeatError> for CliError {
    fn from(e: BeatError) -> Self {
        let code = match &e {
            BeatError::NoPeriodicity | BeatError::NoBeats => code::NO_PERIODICITY,
            BeatError::BadAudio(_) | BeatError::AudioTooShort(_) | BeatError::InvalidGrid(_) => code::PARSE,
            BeatError::GridOutsideClip => code::CHANNELS,
            BeatError::BadTempo(_) => code::USAGE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        let code = match &e {
            AnalysisError::Signal(s) => signal_code(s),
            AnalysisError::TooFewIMFs(_) | AnalysisError::TooFewFrequencies(_) => code::CHANNELS,
            AnalysisError::BadBinning(_) | AnalysisError::BadParameter(_) => code::USAGE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<ArchiveError> for CliError {
    fn from(e: ArchiveError) -> Self {
        let code = match &e {
            ArchiveError::Json(_) | ArchiveError::Unsupported { .. } => code::PARSE,
            ArchiveError::Shape(_) => code::CHANNELS,
            ArchiveError::Signal(s) => match signal_code(s) {
                code::FAILURE => code::CHANNELS,
                c => c,
            },
        };
        Self::new(code, e.to_string())
    }
}

impl From<EditError> for CliError {
    fn from(e: EditError) -> Self {
        let code = match e {
            EditError::Mocap(m) => return m.into(),
            EditError::ChannelMismatch { .. } => code::CHANNELS,
            EditError::BadSpec(_) | EditError::BadRange { .. } | EditError::SpecOutOfBounds { .. } => code::SPEC,
            EditError::Memd(ref m) => memd_code(m),
            EditError::Signal(ref s) => signal_code(s),
        };
        Self::new(code, e.to_string())
    }
}
