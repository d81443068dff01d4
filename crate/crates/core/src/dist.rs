//! CDFs for the reference distributions used by the test battery.

use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Normal { mean: f64, sd: f64 },
    ChiSquared { df: f64 },
    F { d1: f64, d2: f64 },
    StudentT { df: f64 },
}

impl Family {
    pub const STANDARD_NORMAL: Family = Family::Normal { mean: 0.0, sd: 1.0 };
}

fn bad(family: Family) -> Error {
    Error::Domain(format!("invalid distribution parameters {family:?}"))
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

/// `P(X <= x)`.
pub fn dist_cdf(family: Family, x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("cdf evaluated at NaN".into()));
    }
    let v = match family {
        Family::Normal { mean, sd } if positive(sd) && mean.is_finite() => {
            Normal::new(mean, sd).map_err(|_| bad(family))?.cdf(x)
        }
        Family::ChiSquared { df } if positive(df) => {
            if x <= 0.0 {
                0.0
            } else {
                ChiSquared::new(df).map_err(|_| bad(family))?.cdf(x)
            }
        }
        Family::F { d1, d2 } if positive(d1) && positive(d2) => {
            if x <= 0.0 {
                0.0
            } else {
                FisherSnedecor::new(d1, d2).map_err(|_| bad(family))?.cdf(x)
            }
        }
        Family::StudentT { df } if positive(df) => StudentsT::new(0.0, 1.0, df).map_err(|_| bad(family))?.cdf(x),
        _ => return Err(bad(family)),
    };
    Ok(v.clamp(0.0, 1.0))
}

/// Upper tail `P(X > x)`, computed directly to keep precision for small p.
pub fn sf(family: Family, x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("survival function evaluated at NaN".into()));
    }
    let v = match family {
        Family::Normal { mean, sd } if positive(sd) && mean.is_finite() => {
            Normal::new(mean, sd).map_err(|_| bad(family))?.sf(x)
        }
        Family::ChiSquared { df } if positive(df) => {
            if x <= 0.0 {
                1.0
            } else {
                ChiSquared::new(df).map_err(|_| bad(family))?.sf(x)
            }
        }
        Family::F { d1, d2 } if positive(d1) && positive(d2) => {
            if x <= 0.0 {
                1.0
            } else {
                FisherSnedecor::new(d1, d2).map_err(|_| bad(family))?.sf(x)
            }
        }
        Family::StudentT { df } if positive(df) => StudentsT::new(0.0, 1.0, df).map_err(|_| bad(family))?.sf(x),
        _ => return Err(bad(family)),
    };
    Ok(v.clamp(0.0, 1.0))
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub fn normal_sf(x: f64) -> f64 {
    Normal::standard().sf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}
