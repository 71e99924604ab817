//! Relative tolerance family.
//!
//! Every threshold is a fixed multiple of one base relative tolerance (default
//! `1e-12`). The `WCO_TOL` environment variable overrides the base.
//!
//! | threshold | multiplier | default |
//! |-----------|-----------:|--------:|
//! | cozero / `J > 0` / `min |v| > 0` cut (times `max|f|`) | 1 | 1e-12 |
//! | exact identities (`W*W = M_J`, `W = V M_√J`, `V*V` projection) | 1e2 | 1e-10 |
//! | inverse round trip, numerical rank cut (times `σ_max`) | 1e3 | 1e-9 |
//! | eigen/SVD oracle agreement, `W^N = M_v` | 1e4 | 1e-8 |

pub const DEFAULT_RELATIVE: f64 = 1e-12;
pub const ENV_VAR: &str = "WCO_TOL";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub relative: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            relative: DEFAULT_RELATIVE,
        }
    }
}

impl Tolerances {
    /// Reads `WCO_TOL`; unset, unparsable or non-positive values fall back to the default.
    pub fn from_env() -> Self {
        std::env::var(ENV_VAR)
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|t| t.is_finite() && *t > 0.0)
            .map(|relative| Tolerances { relative })
            .unwrap_or_default()
    }

    /// Absolute cut for "nonzero" given the largest magnitude in play.
    pub fn cut(&self, scale: f64) -> f64 {
        self.relative * scale
    }

    pub fn identity(&self) -> f64 {
        self.relative * 1e2
    }

    pub fn roundtrip(&self) -> f64 {
        self.relative * 1e3
    }

    pub fn rank(&self) -> f64 {
        self.relative * 1e3
    }

    pub fn oracle(&self) -> f64 {
        self.relative * 1e4
    }
}
