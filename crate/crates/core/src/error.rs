use thiserror::Error;

use crate::geometry::Point;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid does not cover the domain boundary: {0}")]
    Coverage(String),

    #[error("{op} does not support domain kind `{kind}`")]
    UnsupportedKind { op: &'static str, kind: String },

    #[error("point {point:?} lies {distance:.3e} from the boundary (tolerance {tolerance:.3e})")]
    OffSurface {
        point: Point,
        distance: f64,
        tolerance: f64,
    },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("argument outside the domain of definition: {0}")]
    Domain(String),

    #[error("invalid nonlinearity: {0}")]
    Nonlinearity(String),

    #[error("solver: {0}")]
    Solver(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("schedule: {0}")]
    Schedule(String),

    #[error("profile undefined at {point:?}, t = {t:e}: solution value is {value:e}")]
    UndefinedProfile { point: Point, t: f64, value: f64 },

    #[error("touching ball meets the boundary at {contact_count} separated points; the heat-content limit needs exactly one")]
    ContactNotUnique { contact_count: usize },

    #[error("principal curvature {kappa} exceeds 1/R = {inverse_radius} beyond tolerance")]
    CurvatureInconsistent { kappa: f64, inverse_radius: f64 },

    #[error("curvature transfer undefined at sample {index}: kappa = {kappa}, 1/R = {inverse_radius}")]
    TransferUndefined {
        index: usize,
        kappa: f64,
        inverse_radius: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resolution: {0}")]
    Resolution(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
