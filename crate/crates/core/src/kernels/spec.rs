use serde::{Deserialize, Serialize};

use super::{Kernel, StretchFn};
use crate::error::Result;

/// Serializable kernel description, as read from problem files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Msm { a: f64, b: f64, mu: f64, nu: f64 },
    Ggbm { alpha: f64, beta: f64 },
    FractionalPower { beta: f64 },
    ConvPowerSum { beta: f64, betas: Vec<f64>, bs: Vec<f64> },
    ConvMultinomialMl { beta: f64, betas: Vec<f64>, bs: Vec<f64> },
    TimeStretched { base: Box<KernelSpec>, stretch: StretchSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StretchSpec {
    Identity,
    Power { p: f64 },
}

impl StretchSpec {
    pub fn to_fn(&self) -> StretchFn {
        match self {
            StretchSpec::Identity => StretchFn::Identity,
            StretchSpec::Power { p } => StretchFn::Power(*p),
        }
    }
}

pub fn make_kernel(spec: &KernelSpec) -> Result<Kernel> {
    match spec {
        KernelSpec::Msm { a, b, mu, nu } => Kernel::msm(*a, *b, *mu, *nu),
        KernelSpec::Ggbm { alpha, beta } => Kernel::ggbm(*alpha, *beta),
        KernelSpec::FractionalPower { beta } => Kernel::fractional_power(*beta),
        KernelSpec::ConvPowerSum { beta, betas, bs } => Kernel::conv_power_sum(*beta, betas.clone(), bs.clone()),
        KernelSpec::ConvMultinomialMl { beta, betas, bs } => Kernel::conv_multinomial_ml(*beta, betas.clone(), bs.clone()),
        KernelSpec::TimeStretched { base, stretch } => Kernel::time_stretched(make_kernel(base)?, stretch.to_fn()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_unknown_fields() {
        let s: KernelSpec = serde_json::from_str(r#"{"family":"ggbm","alpha":0.8,"beta":0.6}"#).unwrap();
        assert_eq!(make_kernel(&s).unwrap().theta(), Some(0.8));
        assert!(serde_json::from_str::<KernelSpec>(r#"{"family":"ggbm","alpha":0.8,"beta":0.6,"x":1}"#).is_err());
        let t = KernelSpec::TimeStretched {
            base: Box::new(KernelSpec::FractionalPower { beta: 0.5 }),
            stretch: StretchSpec::Power { p: 2.0 },
        };
        let j = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<KernelSpec>(&j).unwrap(), t);
    }
}
