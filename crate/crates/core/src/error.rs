use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate direction: zero-length vector has no DOA")]
    DegenerateDirection,

    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("duplicate event (frame {frame}, class {class}, source {source_id})")]
    DuplicateEvent {
        frame: u32,
        class: usize,
        source_id: u32,
    },

    #[error("non-integral DOA at (frame {frame}, class {class}, source {source_id}); round before writing")]
    NonIntegralDoa {
        frame: u32,
        class: usize,
        source_id: u32,
    },

    #[error("class count mismatch: expected {expected}, found {found}")]
    ClassCountMismatch { expected: usize, found: usize },

    #[error("clip {clip}: {source}")]
    Clip {
        clip: String,
        #[source]
        source: Box<Error>,
    },

    #[error("frame {frame}, class {class}: {active} simultaneous events exceed {tracks} tracks")]
    TrackCapacity {
        frame: u32,
        class: usize,
        active: usize,
        tracks: usize,
    },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("insufficient samples: need {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("expected {expected} audio channels, found {found}")]
    ChannelCount { expected: usize, found: usize },

    #[error("expected sample rate {expected} Hz, found {found} Hz")]
    SampleRate { expected: u32, found: u32 },

    #[error("malformed bounding box: {0}")]
    MalformedBox(String),

    #[error("array format: {0}")]
    Format(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),
}

impl Error {
    pub(crate) fn in_clip(self, clip: impl Into<String>) -> Self {
        Error::Clip {
            clip: clip.into(),
            source: Box::new(self),
        }
    }
}
