//! Exogenous parameters, strategy profiles and the primitive utility and
//! cost functions of vendors and consumers.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

/// Minimum separation `1 - a - b` between the two vendors. Every division by
/// the gap is guarded by this floor.
pub const EPS_LOC: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Vendor {
    /// Sits left of the base platform at `z1 = a`.
    One,
    /// Sits right of the base platform at `z2 = 1 - b`.
    Two,
}

impl Vendor {
    pub const BOTH: [Vendor; 2] = [Vendor::One, Vendor::Two];

    pub fn other(self) -> Vendor {
        match self {
            Vendor::One => Vendor::Two,
            Vendor::Two => Vendor::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Vendor::One => 0,
            Vendor::Two => 1,
        }
    }
}

impl std::fmt::Display for Vendor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Vendor::One => f.write_str("vendor 1"),
            Vendor::Two => f.write_str("vendor 2"),
        }
    }
}

/// Exogenous constants of the game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Location of the uncustomized base platform on `[0, 1]`.
    #[serde(rename = "Z_A")]
    pub z_a: f64,
    /// Consumer disutility per squared unit of taste distance.
    #[serde(rename = "T")]
    pub t: f64,
    /// Consumer utility per unit of security quality; zero for naive consumers.
    pub beta: f64,
    /// Customization cost coefficients.
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    /// Security cost coefficients (per squared quality times squared customization).
    #[serde(rename = "S1")]
    pub s1: f64,
    #[serde(rename = "S2")]
    pub s2: f64,
    /// Patch quality of the base platform; upper bound on vendor quality.
    #[serde(rename = "Q")]
    pub q_max: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            z_a: 0.5,
            t: 1.0,
            beta: 0.0,
            c1: 0.0,
            c2: 0.0,
            s1: 0.0,
            s2: 0.0,
            q_max: 1.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("Z_A", self.z_a),
            ("T", self.t),
            ("beta", self.beta),
            ("C1", self.c1),
            ("C2", self.c2),
            ("S1", self.s1),
            ("S2", self.s2),
            ("Q", self.q_max),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(GameError::domain(name, value, "must be finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.z_a) {
            return Err(GameError::domain("Z_A", self.z_a, "must lie in [0, 1]"));
        }
        if self.t <= 0.0 {
            return Err(GameError::domain("T", self.t, "must be positive"));
        }
        if self.beta < 0.0 {
            return Err(GameError::domain("beta", self.beta, "must be non-negative"));
        }
        for (name, value) in [
            ("C1", self.c1),
            ("C2", self.c2),
            ("S1", self.s1),
            ("S2", self.s2),
        ] {
            if value < 0.0 {
                return Err(GameError::domain(name, value, "must be non-negative"));
            }
        }
        if self.q_max <= 0.0 {
            return Err(GameError::domain("Q", self.q_max, "must be positive"));
        }
        Ok(())
    }

    /// `(C_i, S_i)` for the given vendor.
    pub fn cost_coefficients(&self, vendor: Vendor) -> (f64, f64) {
        match vendor {
            Vendor::One => (self.c1, self.s1),
            Vendor::Two => (self.c2, self.s2),
        }
    }

    /// Largest admissible offset for a vendor: `Z_A` for vendor 1 and
    /// `1 - Z_A` for vendor 2.
    pub fn max_offset(&self, vendor: Vendor) -> f64 {
        match vendor {
            Vendor::One => self.z_a,
            Vendor::Two => 1.0 - self.z_a,
        }
    }

    /// The same game seen from vendor 2's side: the line is reflected, so
    /// vendor 2 becomes the left vendor and `Z_A` maps to `1 - Z_A`.
    pub fn mirrored(&self) -> ModelParams {
        ModelParams {
            z_a: 1.0 - self.z_a,
            c1: self.c2,
            c2: self.c1,
            s1: self.s2,
            s2: self.s1,
            ..*self
        }
    }
}

/// First-stage choices: vendor 1 sits at `a`, vendor 2 at `1 - b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub a: f64,
    pub b: f64,
    pub q1: f64,
    pub q2: f64,
}

impl StrategyProfile {
    /// Builds a profile and checks it against the parameter bounds.
    pub fn new(params: &ModelParams, a: f64, b: f64, q1: f64, q2: f64) -> Result<Self> {
        let profile = StrategyProfile { a, b, q1, q2 };
        profile.validate(params)?;
        Ok(profile)
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        for (name, value) in [
            ("a", self.a),
            ("b", self.b),
            ("q1", self.q1),
            ("q2", self.q2),
        ] {
            if !value.is_finite() {
                return Err(GameError::domain(name, value, "must be finite"));
            }
        }
        if self.a < 0.0 || self.a > params.z_a {
            return Err(GameError::domain("a", self.a, "must lie in [0, Z_A]"));
        }
        if self.b < 0.0 || self.b > 1.0 - params.z_a {
            return Err(GameError::domain("b", self.b, "must lie in [0, 1 - Z_A]"));
        }
        for (name, value) in [("q1", self.q1), ("q2", self.q2)] {
            if value < 0.0 || value > params.q_max {
                return Err(GameError::domain(name, value, "must lie in [0, Q]"));
            }
        }
        self.gap().map(|_| ())
    }

    /// Distance `1 - a - b` between the vendors, rejected below [`EPS_LOC`].
    pub fn gap(&self) -> Result<f64> {
        let gap = 1.0 - self.a - self.b;
        if gap.is_nan() || gap < EPS_LOC {
            return Err(GameError::CoLocation { gap });
        }
        Ok(gap)
    }

    /// Offset of a vendor from its own end of the line (`a` or `b`).
    pub fn offset(&self, vendor: Vendor) -> f64 {
        match vendor {
            Vendor::One => self.a,
            Vendor::Two => self.b,
        }
    }

    /// Position on the line (`z1 = a`, `z2 = 1 - b`).
    pub fn position(&self, vendor: Vendor) -> f64 {
        match vendor {
            Vendor::One => self.a,
            Vendor::Two => 1.0 - self.b,
        }
    }

    pub fn quality(&self, vendor: Vendor) -> f64 {
        match vendor {
            Vendor::One => self.q1,
            Vendor::Two => self.q2,
        }
    }

    /// Replaces one vendor's choices, keeping the opponent's.
    pub fn with_choice(&self, vendor: Vendor, offset: f64, quality: f64) -> StrategyProfile {
        match vendor {
            Vendor::One => StrategyProfile {
                a: offset,
                q1: quality,
                ..*self
            },
            Vendor::Two => StrategyProfile {
                b: offset,
                q2: quality,
                ..*self
            },
        }
    }

    /// Vendor swap matching [`ModelParams::mirrored`].
    pub fn mirrored(&self) -> StrategyProfile {
        StrategyProfile {
            a: self.b,
            b: self.a,
            q1: self.q2,
            q2: self.q1,
        }
    }

    /// Sup-norm distance between two profiles.
    pub fn distance(&self, other: &StrategyProfile) -> f64 {
        (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.q1 - other.q1).abs())
            .max((self.q2 - other.q2).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceVector {
    pub p1: f64,
    pub p2: f64,
}

impl PriceVector {
    pub fn get(&self, vendor: Vendor) -> f64 {
        match vendor {
            Vendor::One => self.p1,
            Vendor::Two => self.p2,
        }
    }

    pub fn with(&self, vendor: Vendor, price: f64) -> PriceVector {
        match vendor {
            Vendor::One => PriceVector { p1: price, ..*self },
            Vendor::Two => PriceVector { p2: price, ..*self },
        }
    }

    pub fn mirrored(&self) -> PriceVector {
        PriceVector {
            p1: self.p2,
            p2: self.p1,
        }
    }
}

/// Second-stage outcome for a profile and price vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketOutcome {
    pub d1: f64,
    pub d2: f64,
    pub f1: f64,
    pub f2: f64,
    pub pi1: f64,
    pub pi2: f64,
}

impl MarketOutcome {
    pub fn utility(&self, vendor: Vendor) -> f64 {
        match vendor {
            Vendor::One => self.pi1,
            Vendor::Two => self.pi2,
        }
    }
}

/// What a vendor puts in front of consumers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offer {
    pub location: f64,
    pub price: f64,
    pub quality: f64,
}

/// Customization plus security cost `C_i d^2 + S_i q^2 d^2`, where `d` is
/// the distance of the vendor's position from `Z_A`.
pub fn vendor_cost(
    params: &ModelParams,
    vendor: Vendor,
    location: f64,
    quality: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&location) {
        return Err(GameError::domain(
            "location",
            location,
            "must lie in [0, 1]",
        ));
    }
    if !(0.0..=params.q_max).contains(&quality) {
        return Err(GameError::domain("quality", quality, "must lie in [0, Q]"));
    }
    let (c, s) = params.cost_coefficients(vendor);
    Ok(cost_terms(c, s, location - params.z_a, quality))
}

#[inline]
pub(crate) fn cost_terms(c: f64, s: f64, distance: f64, quality: f64) -> f64 {
    let d2 = distance * distance;
    c * d2 + s * quality * quality * d2
}

/// Vendor utilities `pi_i = (p_i - f_i) D_i - cost_i`. Pass zero fines for the
/// game without a regulator.
pub fn vendor_utility(
    params: &ModelParams,
    profile: &StrategyProfile,
    prices: &PriceVector,
    shares: (f64, f64),
    fines: (f64, f64),
) -> (f64, f64) {
    let cost1 = cost_terms(params.c1, params.s1, profile.a - params.z_a, profile.q1);
    let cost2 = cost_terms(
        params.c2,
        params.s2,
        1.0 - profile.b - params.z_a,
        profile.q2,
    );
    (
        (prices.p1 - fines.0) * shares.0 - cost1,
        (prices.p2 - fines.1) * shares.1 - cost2,
    )
}

/// Utility of a consumer at `x` buying `offer`: `beta q - p - T (x - z)^2`.
/// May be negative; the market is assumed fully covered regardless.
pub fn consumer_utility(params: &ModelParams, offer: &Offer, x: f64) -> f64 {
    let dx = x - offer.location;
    params.beta * offer.quality - offer.price - params.t * dx * dx
}
