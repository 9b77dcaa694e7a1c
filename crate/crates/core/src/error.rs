use crate::Point2;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid arm: {0}")]
    InvalidArm(String),

    #[error("link index {index} out of range for a {dof}-link arm")]
    LinkIndexOutOfRange { index: usize, dof: usize },

    #[error("arc fraction {0} outside [0, 1]")]
    ArcFractionOutOfRange(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point ({:.4}, {:.4}) is not reachable by the arm: empty contact set", .0.x, .0.y)]
    Unreachable(Point2),

    #[error("initial state is in collision with obstacle {obstacle} (distance {distance:.4} m)")]
    InitialCollision { obstacle: usize, distance: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid scenario family: {0}")]
    InvalidFamily(String),

    #[error("contact cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
