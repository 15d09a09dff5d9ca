//! Particle-number labels.
//!
//! Every local state carries a pair of conserved counts `(n_up, n_down)`.
//! The spin-1/2 chain uses the same labels with exactly one particle per
//! site, so `n_down = L - n_up` encodes the magnetization sector.

use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::models::{BasisKind, SiteBasis};

/// Additive U(1)xU(1) quantum number. Operator charges may be negative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Charge {
    pub up: i32,
    pub down: i32,
}

impl Charge {
    pub const ZERO: Charge = Charge { up: 0, down: 0 };

    pub const fn new(up: i32, down: i32) -> Self {
        Charge { up, down }
    }
}

impl Add for Charge {
    type Output = Charge;
    fn add(self, o: Charge) -> Charge {
        Charge::new(self.up + o.up, self.down + o.down)
    }
}

impl AddAssign for Charge {
    fn add_assign(&mut self, o: Charge) {
        self.up += o.up;
        self.down += o.down;
    }
}

impl Sub for Charge {
    type Output = Charge;
    fn sub(self, o: Charge) -> Charge {
        Charge::new(self.up - o.up, self.down - o.down)
    }
}

impl Neg for Charge {
    type Output = Charge;
    fn neg(self) -> Charge {
        Charge::new(-self.up, -self.down)
    }
}

impl fmt::Display for Charge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.up, self.down)
    }
}

/// Fixed particle-number sector of a chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SymmetrySector {
    pub n_up: usize,
    pub n_down: usize,
}

impl SymmetrySector {
    /// Validates the counts against the capacity of `length` sites of `basis`.
    pub fn new(basis: &SiteBasis, length: usize, n_up: usize, n_down: usize) -> Result<Self> {
        match basis.kind() {
            BasisKind::SpinHalf => {
                if n_up + n_down != length {
                    return param(format!(
                        "spin-1/2 sector needs n_up + n_down = L ({n_up} + {n_down} != {length})"
                    ));
                }
            }
            BasisKind::TJ => {
                if n_up + n_down > length {
                    return param(format!("t-J sector ({n_up}, {n_down}) exceeds L = {length}"));
                }
            }
            BasisKind::Boson2Species => {
                let cap = length * basis.n_max();
                if n_up > cap || n_down > cap {
                    return param(format!(
                        "boson sector ({n_up}, {n_down}) exceeds L * n_max = {cap}"
                    ));
                }
            }
        }
        Ok(SymmetrySector { n_up, n_down })
    }

    pub fn charge(&self) -> Charge {
        Charge::new(self.n_up as i32, self.n_down as i32)
    }

    pub fn from_charge(q: Charge) -> Option<Self> {
        if q.up < 0 || q.down < 0 {
            return None;
        }
        Some(SymmetrySector { n_up: q.up as usize, n_down: q.down as usize })
    }
}

impl fmt::Display for SymmetrySector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(n_up={}, n_down={})", self.n_up, self.n_down)
    }
}
