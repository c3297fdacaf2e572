use std::fmt;
use std::str::FromStr;

use crate::protograph::CoupledProtograph;
use crate::{Error, Result};

/// Which coupled construction an ensemble uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// `(l,r,L)_P`: lifted coupled protograph.
    Protograph,
    /// `(l,r,L)`: each socket goes to a uniformly random check at its position.
    Random,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Protograph => "protograph",
            Family::Random => "random",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "protograph" | "P" | "p" => Ok(Family::Protograph),
            "random" => Ok(Family::Random),
            other => Err(Error::InvalidParameter(format!("unknown ensemble family {other:?}"))),
        }
    }
}

/// An SC-LDPC ensemble without the lifting size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnsembleSpec {
    pub family: Family,
    pub l: usize,
    pub r: usize,
    pub chain_len: usize,
    /// Protograph lifts only: also reject variable copies with identical check sets.
    pub avoid_twins: bool,
}

impl EnsembleSpec {
    pub fn new(family: Family, l: usize, r: usize, chain_len: usize) -> Result<Self> {
        let spec = Self { family, l, r, chain_len, avoid_twins: false };
        spec.validate()?;
        Ok(spec)
    }

    pub fn protograph(l: usize, r: usize, chain_len: usize) -> Self {
        Self { family: Family::Protograph, l, r, chain_len, avoid_twins: false }
    }

    pub fn random(l: usize, r: usize, chain_len: usize) -> Self {
        Self { family: Family::Random, l, r, chain_len, avoid_twins: false }
    }

    pub fn with_twin_guard(self, avoid_twins: bool) -> Self {
        Self { avoid_twins, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 2 || self.r < self.l {
            return Err(Error::InvalidParameter(format!(
                "need 2 <= l <= r, got l={}, r={}",
                self.l, self.r
            )));
        }
        if self.chain_len < 1 {
            return Err(Error::InvalidParameter("chain length L must be >= 1".into()));
        }
        Ok(())
    }

    /// Checks that `M` is a legal number of bits per position for this ensemble.
    pub fn validate_m(&self, bits_per_position: usize) -> Result<()> {
        self.validate()?;
        let ok = match self.family {
            Family::Protograph => {
                let k = self.coupled_protograph()?.k;
                bits_per_position % k == 0 && bits_per_position / k >= 2
            }
            Family::Random => bits_per_position > 0 && (bits_per_position * self.l) % self.r == 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("M={bits_per_position} is not valid for {self}")))
        }
    }

    pub fn coupled_protograph(&self) -> Result<CoupledProtograph> {
        CoupledProtograph::regular(self.l, self.r, self.chain_len)
    }

    pub fn n_check_positions(&self) -> usize {
        self.chain_len + self.l - 1
    }
}

impl fmt::Display for EnsembleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Protograph => write!(f, "({},{},{})_P", self.l, self.r, self.chain_len),
            Family::Random => write!(f, "({},{},{})", self.l, self.r, self.chain_len),
        }
    }
}
