use thiserror::Error;

pub type Result<T> = std::result::Result<T, TomoError>;

#[derive(Debug, Error)]
pub enum TomoError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("elevation {elevation_m} m lies outside the unambiguous window (±{half_window_m} m)")]
    OutsideWindow { elevation_m: f64, half_window_m: f64 },

    #[error(
        "sub-PRF {sub_prf_hz} Hz does not exceed the Doppler bandwidth {doppler_bandwidth_hz} Hz; \
         use at most {max_snapshots} snapshots"
    )]
    Aliasing {
        sub_prf_hz: f64,
        doppler_bandwidth_hz: f64,
        max_snapshots: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("steering matrix is rank deficient; colliding elevations {0:?}")]
    RankDeficient(Vec<f64>),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TomoError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        TomoError::InvalidInput(msg.into())
    }
}
