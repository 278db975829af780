use std::str::FromStr;

use clap::{Args, ValueEnum};
use gdantzig::{BoxPolicy, LossSpec};

use crate::error::{usage, Failure};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RArg {
    Auto,
    Value(f64),
}

impl FromStr for RArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(RArg::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(RArg::Value(v)),
            _ => Err(format!("expected `auto` or a positive number, got {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BoxArg {
    Sample,
    L1,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Quadratic,
    Huber,
    /// Logistic loss: tuning and bounds only, no fitting.
    LogisticDiag,
}

#[derive(Args)]
pub struct LossArgs {
    #[arg(long, value_enum)]
    pub loss: LossArg,
    /// Bound K on |f_theta|; the Huber clip level is 2K + alpha.
    #[arg(long = "K")]
    pub k_bound: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

pub fn loss_spec(loss: LossArg, k_bound: Option<f64>, alpha: Option<f64>) -> Result<LossSpec, Failure> {
    let spec = match loss {
        LossArg::Quadratic => LossSpec::Quadratic,
        LossArg::Huber => match (k_bound, alpha) {
            (Some(k_bound), Some(alpha)) => LossSpec::Huber { k_bound, alpha },
            _ => return usage("--loss huber needs --K and --alpha"),
        },
        LossArg::LogisticDiag => match k_bound {
            Some(k_bound) => LossSpec::Logistic { k_bound },
            None => return usage("--loss logistic-diag needs --K"),
        },
    };
    spec.validate()?;
    Ok(spec)
}

impl LossArgs {
    pub fn spec(&self) -> Result<LossSpec, Failure> {
        loss_spec(self.loss, self.k_bound, self.alpha)
    }
}

pub fn box_policy(arg: Option<BoxArg>, k_bound: Option<f64>) -> Result<BoxPolicy, Failure> {
    let policy = match (arg, k_bound) {
        (Some(BoxArg::None), _) | (None, None) => BoxPolicy::None,
        (Some(BoxArg::Sample), Some(k_bound)) | (None, Some(k_bound)) => BoxPolicy::SampleSup { k_bound },
        (Some(BoxArg::L1), Some(k_bound)) => BoxPolicy::L1Surrogate { k_bound },
        (Some(_), None) => return usage("--box sample and --box l1 need --K"),
    };
    policy.validate()?;
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_radius() {
        assert_eq!("auto".parse::<RArg>(), Ok(RArg::Auto));
        assert_eq!("0.25".parse::<RArg>(), Ok(RArg::Value(0.25)));
        assert!("-1".parse::<RArg>().is_err());
        assert!("abc".parse::<RArg>().is_err());
    }

    #[test]
    fn default_box_follows_k() {
        assert_eq!(box_policy(None, None).unwrap(), BoxPolicy::None);
        assert_eq!(box_policy(None, Some(2.0)).unwrap(), BoxPolicy::SampleSup { k_bound: 2.0 });
        assert_eq!(box_policy(Some(BoxArg::None), Some(2.0)).unwrap(), BoxPolicy::None);
        assert!(box_policy(Some(BoxArg::L1), None).is_err());
    }

    #[test]
    fn huber_needs_both_parameters() {
        assert!(loss_spec(LossArg::Huber, Some(1.0), None).is_err());
        assert!(loss_spec(LossArg::Huber, Some(1.0), Some(-0.5)).is_err());
        assert!(loss_spec(LossArg::Huber, Some(1.0), Some(0.5)).is_ok());
    }
}
