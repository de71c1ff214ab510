//! Fixed-point price and money arithmetic.
//!
//! Prices are integer millipence per kWh so that midpoints of tick-aligned
//! bids and all settlement sums are exact. Bids live on a 0.1 p/kWh tick
//! grid, which keeps the midpoint of any two bids representable (a multiple
//! of 50 millipence). Money is integer micropence: a price in millipence/kWh
//! multiplied by an energy in Wh lands exactly on micropence, so payments
//! never round.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

/// A price in millipence (0.001 p) per kWh.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Price(i64);

impl Price {
    /// Bid grid resolution: 0.1 p/kWh.
    pub const TICK: Price = Price(100);
    pub const ZERO: Price = Price(0);

    pub const fn from_millipence(mp: i64) -> Self {
        Price(mp)
    }

    pub const fn millipence(self) -> i64 {
        self.0
    }

    /// Converts from a decimal price in p/kWh, rounding to the nearest
    /// millipence.
    pub fn from_p_per_kwh(pence: f64) -> Self {
        Price((pence * 1000.0).round() as i64)
    }

    pub fn as_p_per_kwh(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// Exact midpoint of two prices, rounding half-millipence toward
    /// negative infinity. Inputs on the bid tick grid always produce an
    /// exact result because their sum is a multiple of 200 millipence.
    pub fn midpoint(a: Price, b: Price) -> Price {
        Price((a.0 + b.0).div_euclid(2))
    }

    /// Rounds to the nearest bid tick, halves away from zero.
    pub fn quantize_tick(self) -> Price {
        let t = Price::TICK.0;
        let half = if self.0 >= 0 { t / 2 } else { -t / 2 };
        Price((self.0 + half) / t * t)
    }

    pub fn is_tick_aligned(self) -> bool {
        self.0 % Price::TICK.0 == 0
    }

    pub fn clamp(self, lo: Price, hi: Price) -> Price {
        Price(self.0.clamp(lo.0, hi.0))
    }

    pub fn abs_diff(self, other: Price) -> Price {
        Price((self.0 - other.0).abs())
    }
}

impl Add for Price {
    type Output = Price;
    fn add(self, rhs: Price) -> Price {
        Price(self.0 + rhs.0)
    }
}

impl Sub for Price {
    type Output = Price;
    fn sub(self, rhs: Price) -> Price {
        Price(self.0 - rhs.0)
    }
}

impl fmt::Display for Price {
    /// Formats as decimal p/kWh, e.g. `18.900`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:03}", abs / 1000, abs % 1000)
    }
}

/// A settlement amount in micropence (1e-6 p).
///
/// `price * energy` products are exact: millipence/kWh times Wh is
/// micropence by construction.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Money(i128);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_micropence(up: i128) -> Self {
        Money(up)
    }

    pub const fn micropence(self) -> i128 {
        self.0
    }

    /// Exact cost of `wh` watt-hours at `price`.
    pub fn from_price_wh(price: Price, wh: u64) -> Money {
        Money(price.millipence() as i128 * wh as i128)
    }

    pub fn as_pence(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Money {
    /// Formats as decimal pence, e.g. `18.900000`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:06}", abs / 1_000_000, abs % 1_000_000)
    }
}
