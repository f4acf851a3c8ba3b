//! Fourier multipliers: `|ξ|^s`, `(1+|ξ|²)^{s/2}`, `∇⊥` and the
//! constitutive map `u = ∇⊥(−Δ)^{−1+β/2}θ`.
//!
//! Symbols whose power is negative are undefined at `ξ = 0`; a
//! [`MultiplierSpec`] carries the value used there. On the torus the velocity
//! is computed from the mean-zero part of `θ`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid2D;

/// Closed-form symbols selectable by name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Symbol {
    /// `|ξ|^s`.
    FracLaplacian(f64),
    /// `(1+|ξ|²)^{s/2}`.
    Bessel(f64),
    /// `i(−ξ₂, ξ₁)`.
    GradPerp,
    /// `i(−ξ₂, ξ₁)|ξ|^{β−2}`.
    BiotSavart(f64),
}

impl Symbol {
    fn is_vector(&self) -> bool {
        matches!(self, Symbol::GradPerp | Symbol::BiotSavart(_))
    }

    fn singular_at_origin(&self) -> bool {
        match *self {
            Symbol::FracLaplacian(s) => s < 0.0,
            Symbol::BiotSavart(beta) => beta < 1.0,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierSpec {
    pub symbol: Symbol,
    /// Factor applied to the `ξ = 0` coefficient; `None` is only legal for
    /// symbols that are finite there.
    pub zero_mode: Option<f64>,
}

impl MultiplierSpec {
    pub fn frac_laplacian(s: f64) -> Self {
        Self {
            symbol: Symbol::FracLaplacian(s),
            zero_mode: Some(0.0),
        }
    }

    pub fn bessel(s: f64) -> Self {
        Self {
            symbol: Symbol::Bessel(s),
            zero_mode: Some(1.0),
        }
    }

    pub fn grad_perp() -> Self {
        Self {
            symbol: Symbol::GradPerp,
            zero_mode: Some(0.0),
        }
    }

    pub fn biot_savart(beta: f64) -> Self {
        Self {
            symbol: Symbol::BiotSavart(beta),
            zero_mode: Some(0.0),
        }
    }

    pub fn with_zero_mode(mut self, zero_mode: Option<f64>) -> Self {
        self.zero_mode = zero_mode;
        self
    }

    pub fn is_vector(&self) -> bool {
        self.symbol.is_vector()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64| x.is_finite();
        let ok = match self.symbol {
            Symbol::FracLaplacian(s) | Symbol::Bessel(s) => finite(s),
            Symbol::BiotSavart(b) => finite(b),
            Symbol::GradPerp => true,
        };
        if !ok {
            return Err(Error::Config(format!("non-finite parameter in {self}")));
        }
        if self.symbol.singular_at_origin() && self.zero_mode.is_none() {
            return Err(Error::Config(format!(
                "{self} is singular at the zero mode and needs an explicit zero-mode value"
            )));
        }
        Ok(())
    }

    /// Radial factor `m(|ξ|)` of the symbol at a nonzero wavevector; vector
    /// symbols multiply it by `i(−ξ₂, ξ₁)`.
    pub fn radial_factor(&self, rho: f64) -> f64 {
        match self.symbol {
            Symbol::FracLaplacian(s) => rho.powf(s),
            Symbol::Bessel(s) => (1.0 + rho * rho).powf(0.5 * s),
            Symbol::GradPerp => 1.0,
            Symbol::BiotSavart(beta) => rho.powf(beta - 2.0),
        }
    }

    /// Symbol components at grid index `idx`.
    fn factors(&self, grid: &Grid2D, idx: usize) -> [Complex64; 2] {
        let zero = Complex64::new(0.0, 0.0);
        if idx == 0 {
            let z = match (self.zero_mode, self.symbol) {
                (Some(v), _) => v,
                (None, Symbol::FracLaplacian(0.0)) => 1.0,
                (None, Symbol::FracLaplacian(_) | Symbol::GradPerp) => 0.0,
                (None, Symbol::Bessel(_)) => 1.0,
                (None, Symbol::BiotSavart(beta)) if beta >= 2.0 => 0.0,
                (None, _) => unreachable!("validated"),
            };
            return [Complex64::new(z, 0.0); 2];
        }
        let rho = grid.wavenumber(idx);
        let m = self.radial_factor(rho);
        if self.is_vector() {
            if grid.is_nyquist(idx) {
                return [zero, zero];
            }
            let (k1, k2) = grid.wavevector(idx);
            [Complex64::new(0.0, -k2 * m), Complex64::new(0.0, k1 * m)]
        } else {
            [Complex64::new(m, 0.0); 2]
        }
    }
}

impl fmt::Display for MultiplierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.symbol {
            Symbol::FracLaplacian(s) => write!(f, "frac_laplacian:{s}"),
            Symbol::Bessel(s) => write!(f, "bessel:{s}"),
            Symbol::GradPerp => write!(f, "grad_perp"),
            Symbol::BiotSavart(b) => write!(f, "biot_savart:{b}"),
        }
    }
}

impl FromStr for MultiplierSpec {
    type Err = Error;

    /// Parses `frac_laplacian:s`, `bessel:s`, `biot_savart:beta`, `grad_perp`.
    fn from_str(text: &str) -> Result<Self> {
        let (name, param) = match text.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (text.trim(), None),
        };
        let number = || -> Result<f64> {
            let p = param.ok_or_else(|| Error::Config(format!("{name} needs a parameter")))?;
            p.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad parameter {p:?} for {name}")))
        };
        let spec = match name {
            "frac_laplacian" => Self::frac_laplacian(number()?),
            "bessel" => Self::bessel(number()?),
            "biot_savart" => Self::biot_savart(number()?),
            "grad_perp" if param.is_none() => Self::grad_perp(),
            "grad_perp" => return Err(Error::Config("grad_perp takes no parameter".into())),
            _ => return Err(Error::Config(format!("unknown multiplier {name:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Multiply the coefficients of `f` by the symbol of `m`.
///
/// Scalar symbols act componentwise; vector symbols need a scalar input and
/// return a vector field.
pub fn apply_multiplier(f: &SpectralField, m: &MultiplierSpec) -> Result<SpectralField> {
    m.validate()?;
    let g = *f.grid();
    if !m.is_vector() {
        return Ok(f.map_coefficients(|i, z| z * m.factors(&g, i)[0]));
    }
    if !f.is_scalar() {
        return Err(Error::Shape(format!("{m} needs a scalar field")));
    }
    let c = f.coefficients(0);
    let mut v1 = Vec::with_capacity(g.len());
    let mut v2 = Vec::with_capacity(g.len());
    for (i, &z) in c.iter().enumerate() {
        let [a, b] = m.factors(&g, i);
        v1.push(z * a);
        v2.push(z * b);
    }
    SpectralField::from_coefficients(g, vec![v1, v2])
}

/// `u = ∇⊥(−Δ)^{−1+β/2}θ`, zero mode of `θ` dropped.
pub fn biot_savart_velocity(theta: &SpectralField, beta: f64) -> Result<SpectralField> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta = {beta} outside (0, 1)")));
    }
    apply_multiplier(theta, &MultiplierSpec::biot_savart(beta))
}

/// `J^s(fg) − f·J^s g` with both factors dealiased before multiplying.
pub fn kato_ponce_commutator(f: &SpectralField, g: &SpectralField, s: f64) -> Result<SpectralField> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("commutator order s = {s} must be positive")));
    }
    if !f.is_scalar() || !g.is_scalar() {
        return Err(Error::Shape("commutator factors must be scalar".into()));
    }
    let j = MultiplierSpec::bessel(s);
    let f = f.dealias();
    let g = g.dealias();
    let fg = g.mul_scalar_field(&f).dealias();
    let jg = apply_multiplier(&g, &j)?;
    let f_jg = jg.mul_scalar_field(&f).dealias();
    Ok(apply_multiplier(&fg, &j)?.add_spectral(-1.0, &f_jg))
}
