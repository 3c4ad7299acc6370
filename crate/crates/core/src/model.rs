//! Model configuration: class, subclass and every prior constant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sv::SvPrior;

/// Law of motion of the coefficients, or a constant-coefficient benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Class {
    /// Random walk / white noise mixture: `φ_t = S_t`.
    Mix,
    /// Sparse finite location mixture on the states: `φ_t = 0`.
    Pool,
    /// Random walk: `φ_t = I`.
    Rw,
    /// Constant coefficients with Normal-Gamma shrinkage.
    ConstNg,
    /// Constant coefficients with a Minnesota prior.
    ConstMin,
}

/// State-variance treatment and indicator law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subclass {
    /// Two free variances, one Markov-switching indicator for all coefficients.
    FlexMs,
    /// Two free variances, independent Bernoulli indicators per coefficient.
    FlexMix,
    /// One state variance per coefficient.
    Single,
    /// Free regime-1 variance, regime-0 variance fixed at `κ·ψ̂₀`,
    /// Bernoulli indicators.
    SsvsMix,
}

/// Law governing the indicator matrix `S_t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Law {
    MarkovSwitching,
    Bernoulli,
}

/// How the Bernoulli probability update pairs counts with prior constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pairing {
    /// `p_i = P(s=1) ~ B(T_1 + c_0, T_0 + c_1)`.
    SuccessFirst,
    /// `p_i ~ B(T_0 + c_0, T_1 + c_1)`, so `p_i` is the probability of
    /// regime 0.
    Literal,
}

impl Class {
    pub fn is_tvp(self) -> bool {
        matches!(self, Class::Mix | Class::Pool | Class::Rw)
    }
}

impl Subclass {
    pub fn law(self) -> Option<Law> {
        match self {
            Subclass::FlexMs => Some(Law::MarkovSwitching),
            Subclass::FlexMix | Subclass::SsvsMix => Some(Law::Bernoulli),
            Subclass::Single => None,
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Class::Mix => "TVP-MIX",
            Class::Pool => "TVP-POOL",
            Class::Rw => "TVP-RW",
            Class::ConstNg => "CONST-NG",
            Class::ConstMin => "CONST-MIN",
        })
    }
}

impl fmt::Display for Subclass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subclass::FlexMs => "FLEX MS",
            Subclass::FlexMix => "FLEX MIX",
            Subclass::Single => "SINGLE",
            Subclass::SsvsMix => "SSVS MIX",
        })
    }
}

fn norm_token(s: &str) -> String {
    s.trim()
        .to_ascii_uppercase()
        .replace(['_', '-', '.', '(', ')'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

impl FromStr for Class {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match norm_token(s).as_str() {
            "TVP MIX" | "MIX" => Ok(Class::Mix),
            "TVP POOL" | "POOL" => Ok(Class::Pool),
            "TVP RW" | "RW" => Ok(Class::Rw),
            "CONST NG" | "CONST" | "NG" => Ok(Class::ConstNg),
            "CONST MIN" | "MIN" | "MINNESOTA" => Ok(Class::ConstMin),
            other => Err(Error::Config(format!("unknown class '{other}'"))),
        }
    }
}

impl FromStr for Subclass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match norm_token(s).as_str() {
            "FLEX MS" => Ok(Subclass::FlexMs),
            "FLEX MIX" => Ok(Subclass::FlexMix),
            "SINGLE" => Ok(Subclass::Single),
            "SSVS MIX" => Ok(Subclass::SsvsMix),
            "SINGLE MS" | "SINGLE MIX" => Err(Error::Config(format!(
                "'{s}': a single-variance model has no regime indicators"
            ))),
            other => Err(Error::Config(format!("unknown subclass '{other}'"))),
        }
    }
}

/// Minnesota tightness constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Minnesota {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl Default for Minnesota {
    fn default() -> Self {
        Self {
            l1: 0.2,
            l2: 0.5,
            l3: 100.0,
        }
    }
}

/// All prior constants.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyper {
    /// `(c00, c01, c10, c11)`: `p00 ~ B(c00, c10)`, `p11 ~ B(c01, c11)`.
    pub ms_counts: [f64; 4],
    /// `(c_{i,0}, c_{i,1})` shared by every coefficient.
    pub mix_counts: [f64; 2],
    pub pairing: Pairing,
    pub zeta: f64,
    pub d0: f64,
    pub e0: f64,
    pub e1: f64,
    pub kappa: f64,
    pub minnesota: Minnesota,
    pub sv: SvPrior,
    /// Inverse-Gamma `(shape, scale)` for the homoskedastic variance.
    pub const_var: (f64, f64),
    /// Initial random-walk scales for `ρ` and `log ξ`.
    pub rho_scale: f64,
    pub xi_scale: f64,
}

impl Hyper {
    /// Class-dependent defaults.
    pub fn for_class(class: Class) -> Self {
        let (ms_counts, mix_counts) = match class {
            Class::Mix => ([0.3, 30.0, 30.0, 0.3], [0.3, 30.0]),
            _ => ([0.3, 0.3, 3.0, 3.0], [0.3, 3.0]),
        };
        Self {
            ms_counts,
            mix_counts,
            pairing: Pairing::SuccessFirst,
            zeta: 0.01,
            d0: 10.0,
            e0: 0.6,
            e1: 0.6,
            kappa: 1e-6,
            minnesota: Minnesota::default(),
            sv: SvPrior::default(),
            const_var: (0.01, 0.01),
            rho_scale: 0.1,
            xi_scale: 0.2,
        }
    }
}

/// Full configuration of one equation-level model and its chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub class: Class,
    pub subclass: Option<Subclass>,
    /// VAR lag order.
    pub p: usize,
    pub sv: bool,
    /// Cluster cap of the pooling mixture.
    pub n_clusters: usize,
    pub hyper: Hyper,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Keep the full normalized state paths in the draw store.
    pub store_states: bool,
    /// Initial sweeps, counted within burn-in, during which the indicators
    /// and their probabilities are held at their starting values.
    pub indicator_warmup: usize,
    /// Scale MIX transitions by the ratio of adjacent state roots.
    pub rescale_transitions: bool,
}

impl ModelSpec {
    pub fn new(class: Class, subclass: Option<Subclass>) -> Result<Self> {
        let spec = Self {
            class,
            subclass,
            p: 1,
            sv: true,
            n_clusters: 10,
            hyper: Hyper::for_class(class),
            iterations: 20_000,
            burn_in: 10_000,
            thin: 1,
            store_states: true,
            indicator_warmup: 1_000,
            rescale_transitions: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn tvp(class: Class, subclass: Subclass) -> Result<Self> {
        Self::new(class, Some(subclass))
    }

    pub fn with_iterations(mut self, iterations: usize, burn_in: usize) -> Self {
        self.iterations = iterations;
        self.burn_in = burn_in;
        self.indicator_warmup = burn_in / 10;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match (self.class.is_tvp(), self.subclass) {
            (true, None) => {
                return Err(Error::Config(format!("{} needs a subclass", self.class)));
            }
            (false, Some(s)) => {
                return Err(Error::Config(format!("{} takes no subclass (got {s})", self.class)));
            }
            _ => {}
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in {} must be below the iteration count {}",
                self.burn_in, self.iterations
            )));
        }
        if self.indicator_warmup > self.burn_in {
            return Err(Error::Config("indicator warm-up must fit inside burn-in".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        if self.class == Class::Pool && self.n_clusters == 0 {
            return Err(Error::Config("cluster cap must be positive".into()));
        }
        if self.p == 0 {
            return Err(Error::Config("lag order must be positive".into()));
        }
        let positive = [
            self.hyper.zeta,
            self.hyper.d0,
            self.hyper.e0,
            self.hyper.e1,
            self.hyper.kappa,
            self.hyper.mix_counts[0],
            self.hyper.mix_counts[1],
        ];
        if positive.iter().chain(&self.hyper.ms_counts).any(|v| !(*v > 0.0)) {
            return Err(Error::Config("prior constants must be positive".into()));
        }
        Ok(())
    }

    pub fn law(&self) -> Option<Law> {
        self.subclass.and_then(Subclass::law)
    }

    /// Whether the indicator matrix is sampled at all.
    pub fn has_indicators(&self) -> bool {
        match self.subclass {
            Some(Subclass::Single) => self.class == Class::Mix,
            Some(_) => true,
            None => false,
        }
    }

    pub fn is_single(&self) -> bool {
        self.subclass == Some(Subclass::Single)
    }

    pub fn is_ssvs(&self) -> bool {
        self.subclass == Some(Subclass::SsvsMix)
    }

    /// Number of stored post-burn-in records.
    pub fn n_records(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    /// `"TVP-MIX FLEX MS"` style label.
    pub fn label(&self) -> String {
        match self.subclass {
            Some(s) => format!("{} {}", self.class, s),
            None => self.class.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_grid_cell_is_valid() {
        for c in [Class::Mix, Class::Pool, Class::Rw] {
            for s in [Subclass::FlexMs, Subclass::FlexMix, Subclass::Single, Subclass::SsvsMix] {
                ModelSpec::tvp(c, s).unwrap();
            }
        }
        ModelSpec::new(Class::ConstNg, None).unwrap();
        ModelSpec::new(Class::ConstMin, None).unwrap();
    }

    #[test]
    fn invalid_combinations() {
        assert!(ModelSpec::new(Class::Pool, None).is_err());
        assert!(ModelSpec::new(Class::ConstNg, Some(Subclass::FlexMs)).is_err());
        assert!("SINGLE MS".parse::<Subclass>().is_err());
        assert!(ModelSpec::tvp(Class::Mix, Subclass::FlexMs)
            .unwrap()
            .with_iterations(10, 10)
            .validate()
            .is_err());
    }

    #[test]
    fn parsing_round_trips_labels() {
        assert_eq!("tvp-mix".parse::<Class>().unwrap(), Class::Mix);
        assert_eq!("const (NG)".parse::<Class>().unwrap(), Class::ConstNg);
        assert_eq!("flex_ms".parse::<Subclass>().unwrap(), Subclass::FlexMs);
        let s = ModelSpec::tvp(Class::Pool, Subclass::SsvsMix).unwrap();
        assert_eq!(s.label(), "TVP-POOL SSVS MIX");
    }

    #[test]
    fn mix_prior_means() {
        let h = Hyper::for_class(Class::Mix);
        let [c00, c01, c10, c11] = h.ms_counts;
        assert!((c00 / (c00 + c10) - 0.0099).abs() < 1e-4);
        assert!((c01 / (c01 + c11) - 0.990).abs() < 1e-3);
    }

    #[test]
    fn record_count() {
        let s = ModelSpec::tvp(Class::Rw, Subclass::Single).unwrap().with_iterations(10, 5);
        assert_eq!(s.n_records(), 5);
    }
}
