//! Positive quadratic forms `Q(x, y) = α x² + 2β xy + γ y²` and the algebra of
//! the normalized anisotropy classes built from them.
//!
//! A form is normalized when its largest eigenvalue `Q_max` equals one. For a
//! level `a ∈ (0, 1]` the classes are
//!
//! * `𝒬^a`: normalized forms with `Q_min ≥ a`,
//! * `𝒬_a`: normalized forms with `Q_min = a` (the one-parameter family `Q_α`),
//! * `𝒬^a_nn`: forms with `a·Q_max ≤ Q_min` (no normalization),
//! * `𝒬^0`: all normalized forms.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used for every class-membership comparison.
pub const CLASS_TOL: f64 = 1e-12;

/// Tolerance for the two-route consistency check inside [`QuadForm::decompose`].
const DECOMPOSE_ROUTE_TOL: f64 = 1e-10;

/// Row-major 2×2 matrix.
pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormError {
    #[error("cross coefficient must be nonnegative (got beta = {0}); use `QuadForm::reflect_y` for beta < 0")]
    NegativeCrossTerm(f64),
    #[error("form ({alpha}, {beta}, {gamma}) is not positive definite")]
    NotPositiveDefinite { alpha: f64, beta: f64, gamma: f64 },
    #[error("coefficients must be finite")]
    NonFinite,
    #[error("parameter {name} = {value} outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("form is not in the coercivity class for a = {a} (Q_max = {q_max}, Q_min = {q_min})")]
    NotInClass { a: f64, q_min: f64, q_max: f64 },
    #[error("decomposition routes disagree: angle route gives {from_angle}, coefficient route gives {from_coeffs}")]
    Inconsistent { from_angle: f64, from_coeffs: f64 },
}

fn check_range(name: &'static str, value: f64, ok: bool, range: &'static str) -> Result<(), FormError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(FormError::OutOfRange { name, value, range })
    }
}

/// The form `α x² + 2β xy + γ y²`. `beta` is stored unhalved, i.e. the
/// symmetric matrix of the form is `[[alpha, beta], [beta, gamma]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawForm", into = "RawForm")]
pub struct QuadForm {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

#[derive(Serialize, Deserialize)]
struct RawForm {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl TryFrom<RawForm> for QuadForm {
    type Error = FormError;
    fn try_from(r: RawForm) -> Result<Self, FormError> {
        QuadForm::new(r.alpha, r.beta, r.gamma)
    }
}

impl From<QuadForm> for RawForm {
    fn from(q: QuadForm) -> Self {
        RawForm {
            alpha: q.alpha,
            beta: q.beta,
            gamma: q.gamma,
        }
    }
}

/// Eigen-data of a form: `Q ∘ R_θ = diag(mu_min, mu_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub mu_min: f64,
    pub mu_max: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassTag {
    /// `Q ∈ 𝒬_a`.
    InQaExact,
    /// `Q ∈ 𝒬^a \ 𝒬_a`.
    InQupperA,
    /// `Q ∈ 𝒬^a_nn`, not normalized.
    InQnnA,
    /// Normalized but `Q_min < a`.
    InQ0,
    NotNormalized,
}

/// `Q = w_aniso · Q_{alpha_param} + w_iso · |·|²` with `Q ∈ 𝒬_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub a: f64,
    pub b: f64,
    /// `None` when `b = 1`: the form is the identity and no `Q_α` is involved.
    pub alpha_param: Option<f64>,
    pub w_aniso: f64,
    pub w_iso: f64,
}

impl Decomposition {
    /// Rebuilds the decomposed form coefficientwise.
    pub fn reconstruct(&self) -> Result<QuadForm, FormError> {
        let (mut al, mut be, mut ga) = (self.w_iso, 0.0, self.w_iso);
        if let Some(alpha) = self.alpha_param {
            let qa = QuadForm::q_alpha(self.a, alpha)?;
            al += self.w_aniso * qa.alpha;
            be += self.w_aniso * qa.beta;
            ga += self.w_aniso * qa.gamma;
        }
        QuadForm::new(al, be, ga)
    }
}

impl QuadForm {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, FormError> {
        if !(alpha.is_finite() && beta.is_finite() && gamma.is_finite()) {
            return Err(FormError::NonFinite);
        }
        if beta < 0.0 {
            return Err(FormError::NegativeCrossTerm(beta));
        }
        if !(alpha > 0.0 && gamma > 0.0 && beta * beta < alpha * gamma) {
            return Err(FormError::NotPositiveDefinite { alpha, beta, gamma });
        }
        Ok(QuadForm { alpha, beta, gamma })
    }

    /// Conjugates by `y ↦ −y`, mapping a form with negative cross term into
    /// the admissible class. The eigenvalues are unchanged.
    pub fn reflect_y(alpha: f64, beta: f64, gamma: f64) -> Result<Self, FormError> {
        QuadForm::new(alpha, -beta, gamma)
    }

    pub fn identity() -> Self {
        QuadForm {
            alpha: 1.0,
            beta: 0.0,
            gamma: 1.0,
        }
    }

    /// `c·|·|²`.
    pub fn scalar(c: f64) -> Result<Self, FormError> {
        QuadForm::new(c, 0.0, c)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn coefficients(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    pub fn matrix(&self) -> Mat2 {
        [[self.alpha, self.beta], [self.beta, self.gamma]]
    }

    pub fn eval(&self, v: [f64; 2]) -> f64 {
        self.alpha * v[0] * v[0] + 2.0 * self.beta * v[0] * v[1] + self.gamma * v[1] * v[1]
    }

    pub fn spectral(&self) -> SpectralData {
        let mean = 0.5 * (self.alpha + self.gamma);
        let half_diff = 0.5 * (self.alpha - self.gamma);
        let rad = half_diff.hypot(self.beta);
        let mu_max = mean + rad;
        // product of eigenvalues is the determinant; avoids cancellation in mean - rad
        let mu_min = (self.alpha * self.gamma - self.beta * self.beta) / mu_max;
        // ties (isotropic forms) fall out as atan2(0, 0) = 0
        let theta = 0.5 * (2.0 * self.beta).atan2(self.gamma - self.alpha);
        SpectralData {
            mu_min,
            mu_max,
            theta: theta.clamp(0.0, FRAC_PI_2),
        }
    }

    pub fn q_min(&self) -> f64 {
        self.spectral().mu_min
    }

    pub fn q_max(&self) -> f64 {
        self.spectral().mu_max
    }

    /// Returns `(Q / Q_max, Q_max)`.
    pub fn normalize(&self) -> (QuadForm, f64) {
        let m = self.q_max();
        (
            QuadForm {
                alpha: self.alpha / m,
                beta: self.beta / m,
                gamma: self.gamma / m,
            },
            m,
        )
    }

    pub fn scaled(&self, c: f64) -> Result<QuadForm, FormError> {
        QuadForm::new(c * self.alpha, c * self.beta, c * self.gamma)
    }

    pub fn classify(&self, a: f64) -> Result<ClassTag, FormError> {
        check_range("a", a, a > 0.0 && a <= 1.0, "(0, 1]")?;
        let s = self.spectral();
        let tag = if (s.mu_max - 1.0).abs() <= CLASS_TOL {
            if (s.mu_min - a).abs() <= CLASS_TOL {
                ClassTag::InQaExact
            } else if s.mu_min >= a {
                ClassTag::InQupperA
            } else {
                ClassTag::InQ0
            }
        } else if a * s.mu_max <= s.mu_min + CLASS_TOL {
            ClassTag::InQnnA
        } else {
            ClassTag::NotNormalized
        };
        Ok(tag)
    }

    /// Member `Q_α` of `𝒬_a`: `(α, √((1−α)(α−a)), 1 + a − α)`.
    pub fn q_alpha(a: f64, alpha: f64) -> Result<QuadForm, FormError> {
        check_range("a", a, a > 0.0 && a < 1.0, "(0, 1)")?;
        check_range(
            "alpha",
            alpha,
            alpha >= a - CLASS_TOL && alpha <= 1.0 + CLASS_TOL,
            "[a, 1]",
        )?;
        let alpha = alpha.clamp(a, 1.0);
        let beta = ((1.0 - alpha) * (alpha - a)).max(0.0).sqrt();
        QuadForm::new(alpha, beta, 1.0 + a - alpha)
    }

    /// `(Q ∘ R)(v) = Q(R v)` expressed in coefficients.
    pub fn compose(&self, r: &Mat2) -> Result<QuadForm, FormError> {
        let m = self.matrix();
        // Rᵀ M R
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, o) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        s += r[k][i] * m[k][l] * r[l][j];
                    }
                }
                *o = s;
            }
        }
        let beta = 0.5 * (out[0][1] + out[1][0]);
        // rotations in [0, π/2] of forms in 𝒬_a keep beta ≥ 0 up to roundoff
        let beta = if beta < 0.0 && beta > -CLASS_TOL { 0.0 } else { beta };
        QuadForm::new(out[0][0], beta, out[1][1])
    }

    /// The extremal form `Q_a ∘ R_θᵀ` attached to the rotation angle `θ`.
    pub fn extremal_for_theta(a: f64, theta: f64) -> Result<QuadForm, FormError> {
        let alpha = alpha_of_theta(a, theta)?;
        QuadForm::q_alpha(a, alpha)
    }

    /// `self − other` is positive semidefinite, i.e. `other ≤ self` pointwise.
    pub fn dominates(&self, other: &QuadForm) -> bool {
        let da = self.alpha - other.alpha;
        let db = self.beta - other.beta;
        let dg = self.gamma - other.gamma;
        let scale = self.q_max().max(other.q_max());
        let tol = CLASS_TOL * scale;
        da >= -tol && dg >= -tol && db * db - da * dg <= tol * scale
    }

    /// Splits `Q ∈ 𝒬^a` as `(1−b)/(1−a)·Q_α + (b−a)/(1−a)·|·|²`.
    pub fn decompose(&self, a: f64) -> Result<Decomposition, FormError> {
        check_range("a", a, a > 0.0 && a < 1.0, "(0, 1)")?;
        let s = self.spectral();
        if (s.mu_max - 1.0).abs() > CLASS_TOL || s.mu_min < a - CLASS_TOL {
            return Err(FormError::NotInClass {
                a,
                q_min: s.mu_min,
                q_max: s.mu_max,
            });
        }
        let b = s.mu_min.clamp(a, 1.0);
        if 1.0 - b <= CLASS_TOL {
            return Ok(Decomposition {
                a,
                b: 1.0,
                alpha_param: None,
                w_aniso: 0.0,
                w_iso: 1.0,
            });
        }
        let from_angle = alpha_of_theta(a, s.theta)?;
        let from_coeffs = ((1.0 - a) * self.alpha + a - b) / (1.0 - b);
        // the coefficient route amplifies roundoff by 1/(1 − b)
        if (from_angle - from_coeffs).abs() > DECOMPOSE_ROUTE_TOL / (1.0 - b) {
            return Err(FormError::Inconsistent {
                from_angle,
                from_coeffs,
            });
        }
        Ok(Decomposition {
            a,
            b,
            alpha_param: Some(from_angle),
            w_aniso: (1.0 - b) / (1.0 - a),
            w_iso: (b - a) / (1.0 - a),
        })
    }
}

impl fmt::Display for QuadForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x² + 2·{}xy + {}y²", self.alpha, self.beta, self.gamma)
    }
}

/// Plane rotation `R_θ = [[cos θ, sin θ], [−sin θ, cos θ]]`.
pub fn rotation(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    [[c, s], [-s, c]]
}

pub fn transpose(m: &Mat2) -> Mat2 {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

pub fn apply(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// The orthogonal matrix `A_α` with `Q_α ∘ A_α = Q_a`.
pub fn rotation_for_alpha(a: f64, alpha: f64) -> Result<Mat2, FormError> {
    check_range("a", a, a > 0.0 && a < 1.0, "(0, 1)")?;
    check_range(
        "alpha",
        alpha,
        alpha >= a - CLASS_TOL && alpha <= 1.0 + CLASS_TOL,
        "[a, 1]",
    )?;
    let alpha = alpha.clamp(a, 1.0);
    let c = ((1.0 - alpha) / (1.0 - a)).sqrt();
    let s = ((alpha - a) / (1.0 - a)).sqrt();
    Ok([[c, s], [-s, c]])
}

/// `α = 1 − (1 − a) cos²θ`.
pub fn alpha_of_theta(a: f64, theta: f64) -> Result<f64, FormError> {
    check_range("a", a, a > 0.0 && a < 1.0, "(0, 1)")?;
    check_range(
        "theta",
        theta,
        (-CLASS_TOL..=FRAC_PI_2 + CLASS_TOL).contains(&theta),
        "[0, π/2]",
    )?;
    let c = theta.clamp(0.0, FRAC_PI_2).cos();
    Ok(1.0 - (1.0 - a) * c * c)
}

/// Inverse of [`alpha_of_theta`].
pub fn theta_of_alpha(a: f64, alpha: f64) -> Result<f64, FormError> {
    check_range("a", a, a > 0.0 && a < 1.0, "(0, 1)")?;
    check_range(
        "alpha",
        alpha,
        alpha >= a - CLASS_TOL && alpha <= 1.0 + CLASS_TOL,
        "[a, 1]",
    )?;
    let alpha = alpha.clamp(a, 1.0);
    Ok((alpha - a).sqrt().atan2((1.0 - alpha).sqrt()))
}

/// Upper quantitative bound on `λ^min(𝒬^b)/λ^min(𝒬^a) − 1`.
pub fn quant_upper_bound(a: f64, b: f64, p: f64) -> Result<f64, FormError> {
    check_range("a", a, a > 0.0 && a < 1.0, "(0, 1)")?;
    check_range("b", b, b >= a && b < 1.0, "[a, 1)")?;
    check_range("p", p, p > 1.0, "(1, ∞)")?;
    Ok(p * (b.powf(p - 1.0) * (b - a) / (a.powf(p) * (1.0 - a))).sqrt())
}

/// Constant `C(a, b, p, Ω)` of the lower quantitative inequality
/// `λ^min(𝒬^b) − λ^min(𝒬^a) ≥ C·(b − a)`, given the directional constant
/// `c0` and the isotropic eigenvalue `lam1p` of the domain.
pub fn quant_lower_constant(a: f64, b: f64, p: f64, c0: f64, lam1p: f64) -> Result<f64, FormError> {
    check_range("a", a, a > 0.0 && a < 1.0, "(0, 1)")?;
    check_range("b", b, b >= a && b < 1.0, "[a, 1)")?;
    check_range("p", p, p > 1.0, "(1, ∞)")?;
    check_range("c0", c0, c0 > 0.0, "(0, ∞)")?;
    check_range("lam1p", lam1p, lam1p > 0.0, "(0, ∞)")?;
    if p >= 2.0 {
        Ok(0.5 * p * a.powf(0.5 * (p - 2.0)) * c0)
    } else {
        Ok(0.5 * p * b.powf(0.5 * (2.0 - p)) * lam1p.powf(0.5 * (p - 2.0)) * c0.powf(2.0 / p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn q(a: f64, b: f64, c: f64) -> QuadForm {
        QuadForm::new(a, b, c).unwrap()
    }

    /// Brute-force extrema over unit-circle samples.
    fn sampled_extrema(f: &QuadForm, n: usize) -> (f64, f64) {
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                f.eval([t.cos(), t.sin()])
            })
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    #[test]
    fn eval_examples() {
        assert_eq!(q(1.0, 0.0, 1.0).eval([3.0, 4.0]), 25.0);
        assert_eq!(q(0.25, 0.0, 1.0).eval([1.0, 0.0]), 0.25);
        assert_eq!(q(0.5, 0.25, 0.5).eval([1.0, 1.0]), 1.5);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(QuadForm::new(1.0, -0.1, 1.0), Err(FormError::NegativeCrossTerm(_))));
        assert!(matches!(QuadForm::new(1.0, 1.0, 1.0), Err(FormError::NotPositiveDefinite { .. })));
        assert!(matches!(QuadForm::new(-1.0, 0.0, 1.0), Err(FormError::NotPositiveDefinite { .. })));
        assert!(matches!(QuadForm::new(f64::NAN, 0.0, 1.0), Err(FormError::NonFinite)));
        let r = QuadForm::reflect_y(0.5, -0.25, 0.5).unwrap();
        assert_eq!(r.coefficients(), [0.5, 0.25, 0.5]);
        // original form at (1, 1) equals the reflected one at (1, -1)
        assert_eq!(r.eval([1.0, -1.0]), 0.5 - 0.5 + 0.5);
    }

    #[test]
    fn spectral_examples() {
        let s = QuadForm::identity().spectral();
        assert_eq!((s.mu_min, s.mu_max, s.theta), (1.0, 1.0, 0.0));

        let s = q(0.5, 0.25, 0.5).spectral();
        assert_relative_eq!(s.mu_min, 0.25, epsilon = 1e-15);
        assert_relative_eq!(s.mu_max, 0.75, epsilon = 1e-15);
        assert_relative_eq!(s.theta, FRAC_PI_4, epsilon = 1e-15);

        let qa = QuadForm::q_alpha(0.25, 0.5).unwrap();
        let s = qa.spectral();
        assert_relative_eq!(s.mu_min, 0.25, epsilon = 1e-14);
        assert_relative_eq!(s.mu_max, 1.0, epsilon = 1e-14);
        let (lo, hi) = sampled_extrema(&qa, 10_000);
        assert!((lo - 0.25).abs() < 1e-6 && (hi - 1.0).abs() < 1e-6);
    }

    #[test]
    fn spectral_axis_cases() {
        assert_eq!(q(0.5, 0.0, 2.0).spectral().theta, 0.0);
        assert_relative_eq!(q(2.0, 0.0, 0.5).spectral().theta, FRAC_PI_2);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(q(2.0, 0.0, 2.0).normalize(), (QuadForm::identity(), 2.0));
        assert_eq!(q(0.5, 0.0, 2.0).normalize(), (q(0.25, 0.0, 1.0), 2.0));
        let qa = QuadForm::q_alpha(0.3, 0.3).unwrap();
        let (n, m) = qa.normalize();
        assert_eq!(m, 1.0);
        assert_eq!(n, qa);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(q(0.25, 0.0, 1.0).classify(0.25).unwrap(), ClassTag::InQaExact);
        assert_eq!(QuadForm::identity().classify(0.25).unwrap(), ClassTag::InQupperA);
        assert_eq!(q(0.1, 0.0, 0.2).classify(0.25).unwrap(), ClassTag::InQnnA);
        assert_eq!(q(0.1, 0.0, 1.0).classify(0.25).unwrap(), ClassTag::InQ0);
        assert_eq!(q(0.01, 0.0, 2.0).classify(0.25).unwrap(), ClassTag::NotNormalized);
        assert!(QuadForm::identity().classify(0.0).is_err());
        assert!(QuadForm::identity().classify(1.5).is_err());
    }

    #[test]
    fn q_alpha_examples() {
        assert_eq!(QuadForm::q_alpha(0.25, 0.25).unwrap().coefficients(), [0.25, 0.0, 1.0]);
        assert_eq!(QuadForm::q_alpha(0.25, 1.0).unwrap().coefficients(), [1.0, 0.0, 0.25]);
        let m = QuadForm::q_alpha(0.25, 0.5).unwrap();
        assert_eq!(m.alpha(), 0.5);
        assert_relative_eq!(m.beta(), 0.125f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(m.gamma(), 0.75, epsilon = 1e-15);
        assert!(QuadForm::q_alpha(0.25, 0.2).is_err());
        assert!(QuadForm::q_alpha(0.25, 1.1).is_err());
        assert!(QuadForm::q_alpha(1.0, 1.0).is_err());
    }

    #[test]
    fn rotation_for_alpha_examples() {
        assert_eq!(rotation_for_alpha(0.25, 0.25).unwrap(), [[1.0, 0.0], [-0.0, 1.0]]);
        assert_eq!(rotation_for_alpha(0.25, 1.0).unwrap(), [[0.0, 1.0], [-1.0, 0.0]]);
        let m = rotation_for_alpha(0.25, 0.625).unwrap();
        let r = 0.5f64.sqrt();
        for (x, y) in m.iter().flatten().zip([r, r, -r, r]) {
            assert_relative_eq!(*x, y, epsilon = 1e-15);
        }
        assert!(rotation_for_alpha(0.25, 0.1).is_err());
    }

    #[test]
    fn alpha_theta_examples() {
        assert_eq!(alpha_of_theta(0.25, 0.0).unwrap(), 0.25);
        assert_relative_eq!(alpha_of_theta(0.25, FRAC_PI_2).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(alpha_of_theta(0.25, FRAC_PI_4).unwrap(), 0.625, epsilon = 1e-15);
        assert_relative_eq!(theta_of_alpha(0.25, 0.625).unwrap(), FRAC_PI_4, epsilon = 1e-15);
        assert!(alpha_of_theta(0.25, 2.0).is_err());
    }

    #[test]
    fn decompose_examples() {
        let qa = QuadForm::q_alpha(0.25, 0.6).unwrap();
        let d = qa.decompose(0.25).unwrap();
        assert_relative_eq!(d.b, 0.25, epsilon = 1e-14);
        assert_relative_eq!(d.alpha_param.unwrap(), 0.6, epsilon = 1e-12);
        assert_relative_eq!(d.w_aniso, 1.0, epsilon = 1e-14);
        assert!(d.w_iso.abs() < 1e-14);

        let d = QuadForm::identity().decompose(0.25).unwrap();
        assert_eq!((d.w_aniso, d.w_iso, d.alpha_param), (0.0, 1.0, None));
        assert_eq!(d.reconstruct().unwrap(), QuadForm::identity());

        assert!(matches!(
            q(0.1, 0.0, 1.0).decompose(0.25),
            Err(FormError::NotInClass { .. })
        ));
        assert!(q(0.5, 0.0, 2.0).decompose(0.25).is_err());
    }

    #[test]
    fn quant_upper_examples() {
        assert_eq!(quant_upper_bound(0.25, 0.25, 2.0).unwrap(), 0.0);
        assert_relative_eq!(quant_upper_bound(0.25, 0.5, 2.0).unwrap(), 3.265986323710904, epsilon = 1e-12);
        assert_eq!(quant_upper_bound(0.5, 0.5, 3.0).unwrap(), 0.0);
        assert!(quant_upper_bound(0.5, 0.4, 2.0).is_err());
        assert!(quant_upper_bound(0.5, 0.6, 1.0).is_err());
    }

    #[test]
    fn quant_lower_examples() {
        assert_relative_eq!(quant_lower_constant(0.25, 0.5, 2.0, 3.0, 7.0).unwrap(), 3.0);
        assert_relative_eq!(quant_lower_constant(0.25, 0.5, 4.0, 2.0, 7.0).unwrap(), 1.0);
        assert_relative_eq!(
            quant_lower_constant(0.1, 0.25, 1.5, 1.0, 1.0).unwrap(),
            0.5303300858899106,
            epsilon = 1e-12
        );
        assert!(quant_lower_constant(0.25, 0.5, 2.0, 0.0, 1.0).is_err());
        assert!(quant_lower_constant(0.25, 0.5, 1.5, 1.0, -1.0).is_err());
    }

    #[test]
    fn serde_shape() {
        let s = serde_json::to_string(&q(0.5, 0.25, 0.75)).unwrap();
        assert_eq!(s, r#"{"alpha":0.5,"beta":0.25,"gamma":0.75}"#);
        assert!(serde_json::from_str::<QuadForm>(r#"{"alpha":1,"beta":-1,"gamma":3}"#).is_err());
    }

    fn random_form(rng: &mut ChaCha8Rng) -> QuadForm {
        loop {
            let al: f64 = rng.gen_range(0.01..3.0);
            let ga = rng.gen_range(0.01..3.0);
            let be = rng.gen_range(0.0..1.0) * (al * ga).sqrt();
            if let Ok(f) = QuadForm::new(al, be, ga) {
                return f;
            }
        }
    }

    #[test]
    fn eigen_bounds_on_unit_circle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let f = random_form(&mut rng);
            let s = f.spectral();
            for _ in 0..200 {
                let t: f64 = rng.gen_range(0.0..2.0 * PI);
                let v = f.eval([t.cos(), t.sin()]);
                assert!(v >= s.mu_min - 1e-12 && v <= s.mu_max + 1e-12);
            }
            let r = rotation(s.theta);
            assert_relative_eq!(f.eval([r[0][0], r[1][0]]), s.mu_min, epsilon = 1e-10);
            assert_relative_eq!(f.eval([r[0][1], r[1][1]]), s.mu_max, epsilon = 1e-10);
        }
    }

    #[test]
    fn spectral_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let f = random_form(&mut rng);
            let s = f.spectral();
            let d = QuadForm::new(s.mu_min, 0.0, s.mu_max).unwrap();
            // M = R D Rᵀ
            let back = d.compose(&transpose(&rotation(s.theta))).unwrap();
            let scale = s.mu_max;
            for (x, y) in back.coefficients().iter().zip(f.coefficients()) {
                assert!((x - y).abs() <= 1e-12 * scale, "{back} vs {f}");
            }
        }
    }

    #[test]
    fn q_alpha_family_is_the_exact_slice() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let a = rng.gen_range(0.01..0.99);
            let alpha = rng.gen_range(a..=1.0);
            let f = QuadForm::q_alpha(a, alpha).unwrap();
            assert_eq!(f.classify(a).unwrap(), ClassTag::InQaExact);
        }
        // the converse: members of 𝒬_a built from eigen-data are Q_α of their α-coefficient
        for _ in 0..1000 {
            let a = rng.gen_range(0.01..0.99);
            let theta = rng.gen_range(0.0..FRAC_PI_2);
            let d = QuadForm::new(a, 0.0, 1.0).unwrap();
            let f = d.compose(&transpose(&rotation(theta))).unwrap();
            assert_eq!(f.classify(a).unwrap(), ClassTag::InQaExact);
            let g = QuadForm::q_alpha(a, f.alpha()).unwrap();
            for (x, y) in g.coefficients().iter().zip(f.coefficients()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn composition_with_a_alpha(a in 0.01f64..0.99, t in 0.0f64..1.0, x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let alpha = a + t * (1.0 - a);
            let qa = QuadForm::q_alpha(a, alpha).unwrap();
            let base = QuadForm::q_alpha(a, a).unwrap();
            let m = rotation_for_alpha(a, alpha).unwrap();
            let lhs = qa.eval(apply(&m, [x, y]));
            prop_assert!((lhs - base.eval([x, y])).abs() <= 1e-12 * (1.0 + x * x + y * y));
            // A_α is the rotation R_θ with θ = theta_of_alpha
            let th = theta_of_alpha(a, alpha).unwrap();
            let r = rotation(th);
            for (u, v) in r.iter().flatten().zip(m.iter().flatten()) {
                prop_assert!((u - v).abs() < 1e-12);
            }
            prop_assert!((alpha_of_theta(a, th).unwrap() - alpha).abs() < 1e-12);
        }

        #[test]
        fn decomposition_round_trip(a in 0.01f64..0.98, s in 0.0f64..1.0, t in 0.0f64..1.0) {
            let b = a + s * (0.999 - a);
            let abar = b + t * (1.0 - b);
            let f = QuadForm::q_alpha(b, abar).unwrap();
            let d = f.decompose(a).unwrap();
            prop_assert!(d.w_aniso >= 0.0 && d.w_iso >= 0.0);
            let back = d.reconstruct().unwrap();
            for (x, y) in back.coefficients().iter().zip(f.coefficients()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            let qa = QuadForm::q_alpha(a, d.alpha_param.unwrap()).unwrap();
            // (β̄ − β)² − (ᾱ − α)(γ̄ − γ) ≤ 0
            let disc = (f.beta() - qa.beta()).powi(2) - (f.alpha() - qa.alpha()) * (f.gamma() - qa.gamma());
            prop_assert!(disc <= 1e-12);
            prop_assert!(f.dominates(&qa));
        }

        #[test]
        fn upper_bound_increasing_in_b(a in 0.01f64..0.9, s in 0.0f64..1.0, ds in 1e-6f64..0.05, p in 1.1f64..5.0) {
            let b1 = a + s * (0.95 - a);
            let b2 = (b1 + ds).min(0.999);
            prop_assume!(b2 > b1);
            prop_assert!(quant_upper_bound(a, b2, p).unwrap() > quant_upper_bound(a, b1, p).unwrap());
            prop_assert!(quant_upper_bound(a, b2, p).unwrap() > 0.0);
        }
    }
}
