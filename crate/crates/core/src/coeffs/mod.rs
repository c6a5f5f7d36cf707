//! Coefficient fields `C(x)` of the divergence-form operator `-Σ ∂ᵢ c_ij ∂ⱼ`.
//!
//! Degenerate families are built from the bounded profile
//! `(ρ²/(1+ρ²))^δ`, where `ρ` is the distance to the degeneracy set of the
//! family. A profile carries a viscosity shift `ε` so that `C + εI` is the
//! same object with `epsilon` recorded.

mod classify;
mod doc;
mod sampled;

use std::path::Path;

pub use classify::{Classification, IntegrabilityRow, QuadratureConfig, Side, Verdict, ZeroSite};
pub use doc::{CutSpec, FamilyDoc, ProfileDoc};
pub use sampled::SampledField;

use crate::error::{LabError, Result};

/// Symmetric `d × d` matrix with `d ∈ {1, 2}`. For `d = 1` only `a11` is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat {
    pub dim: usize,
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymMat {
    pub fn scalar(dim: usize, c: f64) -> Self {
        match dim {
            1 => SymMat { dim, a11: c, a12: 0.0, a22: 0.0 },
            _ => SymMat { dim, a11: c, a12: 0.0, a22: c },
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, 1.0)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.a11,
            (0, 1) | (1, 0) => self.a12,
            (1, 1) => self.a22,
            _ => panic!("index ({i},{j}) out of range for a {0}x{0} matrix", self.dim),
        }
    }

    pub fn shifted(&self, eps: f64) -> Self {
        let mut m = *self;
        m.a11 += eps;
        if m.dim == 2 {
            m.a22 += eps;
        }
        m
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        if self.dim == 1 {
            return (self.a11, self.a11);
        }
        let mean = 0.5 * (self.a11 + self.a22);
        let radius = (0.5 * (self.a11 - self.a22)).hypot(self.a12);
        (mean - radius, mean + radius)
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        self.eigenvalues().0
    }

    pub fn spectral_norm(&self) -> f64 {
        let (lo, hi) = self.eigenvalues();
        lo.abs().max(hi.abs())
    }

    pub fn is_scalar(&self) -> bool {
        self.dim == 1 || (self.a12 == 0.0 && self.a11 == self.a22)
    }

    pub fn has_cross_term(&self) -> bool {
        self.dim == 2 && self.a12 != 0.0
    }
}

/// Φ sampled on a uniform grid of the first coordinate, linearly interpolated
/// and held constant outside its range.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceCurve {
    pub range: [f64; 2],
    pub values: Vec<f64>,
}

impl SurfaceCurve {
    pub fn new(range: [f64; 2], values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !(range[1] > range[0]) && values.len() > 1 {
            return Err(LabError::Validation("surface needs a nonempty sample list over a nondegenerate range".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Validation("surface samples must be finite".into()));
        }
        Ok(SurfaceCurve { range, values })
    }

    pub fn eval(&self, y: f64) -> f64 {
        let n = self.values.len();
        if n == 1 {
            return self.values[0];
        }
        let t = ((y - self.range[0]) / (self.range[1] - self.range[0])).clamp(0.0, 1.0) * (n - 1) as f64;
        let i = (t.floor() as usize).min(n - 2);
        let f = t - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `c(x) = (ρ²/(1+ρ²))^δ` with `ρ` the distance to the nearest center.
    PowerDegenerate { delta: f64, centers: Vec<Vec<f64>> },
    /// Degenerate on the sphere `|x| = radius`.
    RadialShell { delta: f64, radius: f64 },
    /// Degenerate on the graph `z = Φ(y)` (2D only).
    SurfaceDegenerate { delta: f64, surface: SurfaceCurve },
    /// Constant symmetric positive-definite matrix.
    StronglyElliptic { matrix: SymMat },
    Sampled(SampledField),
}

impl Family {
    pub fn kind(&self) -> &'static str {
        match self {
            Family::PowerDegenerate { .. } => "power",
            Family::RadialShell { .. } => "radial_shell",
            Family::SurfaceDegenerate { .. } => "surface",
            Family::StronglyElliptic { .. } => "strongly_elliptic",
            Family::Sampled(_) => "sampled",
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match self {
            Family::PowerDegenerate { delta, .. }
            | Family::RadialShell { delta, .. }
            | Family::SurfaceDegenerate { delta, .. } => Some(*delta),
            _ => None,
        }
    }
}

/// The canonical bounded degeneracy profile.
#[inline]
pub fn degenerate_profile(rho: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        return 1.0;
    }
    let r2 = rho * rho;
    (r2 / (1.0 + r2)).powf(delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientProfile {
    dimension: usize,
    family: Family,
    domain: Vec<[f64; 2]>,
    epsilon: f64,
    predicted_gamma: Option<f64>,
    cut_set: Vec<CutSpec>,
    norm: f64,
}

impl CoefficientProfile {
    pub fn new(dimension: usize, family: Family, domain: Vec<[f64; 2]>) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return Err(LabError::Validation(format!("dimension must be 1 or 2, got {dimension}")));
        }
        if domain.len() != dimension {
            return Err(LabError::Validation(format!(
                "domain has {} axes for a {dimension}-dimensional profile",
                domain.len()
            )));
        }
        for iv in &domain {
            if !(iv[1] > iv[0]) || !iv[0].is_finite() || !iv[1].is_finite() {
                return Err(LabError::Validation(format!("degenerate domain interval {iv:?}")));
            }
        }
        validate_family(dimension, &family, &domain)?;
        let predicted_gamma = default_gamma(dimension, &family);
        let mut p = CoefficientProfile {
            dimension,
            family,
            domain,
            epsilon: 0.0,
            predicted_gamma,
            cut_set: Vec::new(),
            norm: 0.0,
        };
        p.norm = p.scan_norm();
        Ok(p)
    }

    /// `c(x) = (ρ²/(1+ρ²))^δ` around the given centers on `[a, b]`.
    pub fn power_1d(delta: f64, centers: &[f64], domain: [f64; 2]) -> Result<Self> {
        let centers = centers.iter().map(|c| vec![*c]).collect();
        Self::new(1, Family::PowerDegenerate { delta, centers }, vec![domain])
    }

    pub fn laplacian(dimension: usize, domain: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(dimension, Family::StronglyElliptic { matrix: SymMat::identity(dimension) }, domain)
    }

    pub fn with_predicted_gamma(mut self, gamma: Option<f64>) -> Self {
        self.predicted_gamma = gamma;
        self
    }

    pub fn with_cut_set(mut self, cuts: Vec<CutSpec>) -> Self {
        self.cut_set = cuts;
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn domain(&self) -> &[[f64; 2]] {
        &self.domain
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn predicted_gamma(&self) -> Option<f64> {
        self.predicted_gamma
    }

    pub fn cut_set(&self) -> &[CutSpec] {
        &self.cut_set
    }

    /// Essential bound `‖C‖`: maximum spectral norm over the sample scan.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension
            && x.iter().zip(&self.domain).all(|(v, iv)| {
                let slack = 1e-12 * (iv[1] - iv[0]);
                *v >= iv[0] - slack && *v <= iv[1] + slack
            })
    }

    /// Evaluates `C(x) + εI`.
    pub fn eval(&self, x: &[f64]) -> Result<SymMat> {
        if !self.contains(x) {
            return Err(LabError::Domain { point: x.to_vec(), domain: self.domain.clone() });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> SymMat {
        let base = match &self.family {
            Family::StronglyElliptic { matrix } => *matrix,
            Family::Sampled(field) => field.interpolate(x, &self.domain),
            _ => SymMat::scalar(self.dimension, self.base_scalar(x)),
        };
        base.shifted(self.epsilon)
    }

    /// Scalar coefficient `c(x) + ε` for scalar families; `None` otherwise.
    pub fn scalar(&self, x: &[f64]) -> Result<Option<f64>> {
        let m = self.eval(x)?;
        Ok(m.is_scalar().then_some(m.a11))
    }

    fn base_scalar(&self, x: &[f64]) -> f64 {
        match &self.family {
            Family::PowerDegenerate { delta, .. }
            | Family::RadialShell { delta, .. }
            | Family::SurfaceDegenerate { delta, .. } => degenerate_profile(self.rho(x), *delta),
            Family::StronglyElliptic { matrix } => matrix.a11,
            Family::Sampled(field) => field.interpolate(x, &self.domain).a11,
        }
    }

    /// Distance to the degeneracy set for the scalar families.
    pub fn rho(&self, x: &[f64]) -> f64 {
        match &self.family {
            Family::PowerDegenerate { centers, .. } => centers
                .iter()
                .map(|c| c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min),
            Family::RadialShell { radius, .. } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                (r - radius).abs()
            }
            Family::SurfaceDegenerate { surface, .. } => (x[1] - surface.eval(x[0])).abs(),
            _ => f64::INFINITY,
        }
    }

    /// Signed offset from a shell (`|x| − R`) or surface (`z − Φ(y)`); `None`
    /// for families without an inside and outside.
    pub fn signed_offset(&self, x: &[f64]) -> Option<f64> {
        match &self.family {
            Family::RadialShell { radius, .. } => Some(x.iter().map(|v| v * v).sum::<f64>().sqrt() - radius),
            Family::SurfaceDegenerate { surface, .. } => Some(x[1] - surface.eval(x[0])),
            _ => None,
        }
    }

    /// True when the segment from `p` to `q` crosses the degeneracy set. In 1D
    /// a center must lie strictly between the endpoints; for shells and
    /// surfaces the endpoints must lie on different sides, a point on the set
    /// counting as the outer (upper) side.
    pub fn crosses_degeneracy(&self, p: &[f64], q: &[f64]) -> bool {
        match &self.family {
            Family::PowerDegenerate { delta, centers } if *delta > 0.0 && self.dimension == 1 => {
                let (lo, hi) = if p[0] < q[0] { (p[0], q[0]) } else { (q[0], p[0]) };
                centers.iter().any(|c| lo < c[0] && c[0] < hi)
            }
            Family::RadialShell { delta, radius } if *delta > 0.0 => {
                let r = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt() - radius;
                (r(p) < 0.0) != (r(q) < 0.0)
            }
            Family::SurfaceDegenerate { delta, surface } if *delta > 0.0 => {
                let s = |x: &[f64]| x[1] - surface.eval(x[0]);
                (s(p) < 0.0) != (s(q) < 0.0)
            }
            _ => false,
        }
    }

    /// Smallest eigenvalue `μ_m(x)` of `C(x) + εI`, with values within
    /// `-1e-12 ‖C‖` of zero projected to zero.
    pub fn smallest_eigenvalue(&self, x: &[f64]) -> Result<f64> {
        let m = self.eval(x)?;
        let mu = m.smallest_eigenvalue();
        if mu < 0.0 && mu >= -1e-12 * self.norm.max(f64::MIN_POSITIVE) {
            return Ok(0.0);
        }
        Ok(mu)
    }

    pub(crate) fn smallest_eigenvalue_unchecked(&self, x: &[f64]) -> f64 {
        self.eval_unchecked(x).smallest_eigenvalue().max(0.0)
    }

    /// Returns the profile of `C + εI`. Shifts accumulate.
    pub fn viscosity_shift(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(LabError::arg(format!("viscosity shift must be a finite nonnegative number, got {epsilon}")));
        }
        let mut p = self.clone();
        p.epsilon += epsilon;
        p.norm += epsilon;
        Ok(p)
    }

    /// Profile with the viscosity shift removed.
    pub fn without_shift(&self) -> Self {
        let mut p = self.clone();
        p.norm -= p.epsilon;
        p.epsilon = 0.0;
        p
    }

    /// True when `C(x)` is a multiple of the identity at every point.
    pub fn is_scalar(&self) -> bool {
        match &self.family {
            Family::StronglyElliptic { matrix } => matrix.is_scalar(),
            Family::Sampled(field) => field.is_scalar(),
            _ => true,
        }
    }

    /// True when some `C(x)` has an off-diagonal entry.
    pub fn has_cross_terms(&self) -> bool {
        match &self.family {
            Family::StronglyElliptic { matrix } => matrix.has_cross_term(),
            Family::Sampled(field) => field.has_cross_terms(),
            _ => false,
        }
    }

    /// Degeneracy points of 1D analytic families that lie in the domain.
    /// Empty once a positive shift is applied. `None` when the zeros are not
    /// known in closed form (sampled fields).
    pub fn known_zeros_1d(&self) -> Option<Vec<f64>> {
        if self.dimension != 1 {
            return None;
        }
        if self.epsilon > 0.0 {
            return Some(Vec::new());
        }
        let [a, b] = self.domain[0];
        let mut zeros = match &self.family {
            Family::PowerDegenerate { delta, centers } if *delta > 0.0 => centers.iter().map(|c| c[0]).collect(),
            Family::RadialShell { delta, radius } if *delta > 0.0 => vec![-radius, *radius],
            Family::Sampled(_) => return None,
            _ => Vec::new(),
        };
        zeros.retain(|z| *z >= a && *z <= b);
        zeros.sort_by(f64::total_cmp);
        zeros.dedup();
        Some(zeros)
    }

    fn scan_norm(&self) -> f64 {
        let axis = |k: usize, n: usize| -> Vec<f64> {
            let [a, b] = self.domain[k];
            (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
        };
        let mut best: f64 = 0.0;
        if self.dimension == 1 {
            for x in axis(0, 10_000) {
                best = best.max(self.eval_unchecked(&[x]).spectral_norm());
            }
        } else {
            let xs = axis(0, 256);
            let ys = axis(1, 256);
            for x in &xs {
                for y in &ys {
                    best = best.max(self.eval_unchecked(&[*x, *y]).spectral_norm());
                }
            }
        }
        if let Family::StronglyElliptic { matrix } = &self.family {
            best = best.max(matrix.shifted(self.epsilon).spectral_norm());
        }
        best
    }

    pub fn from_json_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let doc: ProfileDoc = serde_json::from_str(text).map_err(|e| LabError::Schema {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        doc.into_profile(base_dir)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ProfileDoc::from_profile(self))?)
    }
}

fn validate_family(dimension: usize, family: &Family, domain: &[[f64; 2]]) -> Result<()> {
    let check_delta = |delta: f64| -> Result<()> {
        if !(0.0..1.0).contains(&delta) {
            return Err(LabError::Validation(format!("delta must lie in [0, 1), got {delta}")));
        }
        Ok(())
    };
    match family {
        Family::PowerDegenerate { delta, centers } => {
            check_delta(*delta)?;
            if centers.is_empty() {
                return Err(LabError::Validation("power family needs at least one center".into()));
            }
            if centers.iter().any(|c| c.len() != dimension) {
                return Err(LabError::Validation("center dimension does not match the profile".into()));
            }
        }
        Family::RadialShell { delta, radius } => {
            check_delta(*delta)?;
            if !(*radius > 0.0) {
                return Err(LabError::Validation("shell radius must be positive".into()));
            }
        }
        Family::SurfaceDegenerate { delta, .. } => {
            check_delta(*delta)?;
            if dimension != 2 {
                return Err(LabError::Validation("surface family requires dimension 2".into()));
            }
        }
        Family::StronglyElliptic { matrix } => {
            if matrix.dim != dimension {
                return Err(LabError::Validation("matrix dimension does not match the profile".into()));
            }
            if !(matrix.smallest_eigenvalue() > 0.0) {
                return Err(LabError::Validation("strongly elliptic matrix must be positive definite".into()));
            }
        }
        Family::Sampled(field) => field.validate(dimension, domain)?,
    }
    Ok(())
}

fn default_gamma(dimension: usize, family: &Family) -> Option<f64> {
    match family {
        Family::StronglyElliptic { .. } => Some(1.0),
        Family::PowerDegenerate { delta, .. } | Family::RadialShell { delta, .. } | Family::SurfaceDegenerate { delta, .. } => {
            // Order 1 - δ, except the borderline 1D case δ = 1/2 which is not
            // subelliptic of order 1/2.
            if dimension == 1 && *delta == 0.5 {
                None
            } else {
                Some(1.0 - delta)
            }
        }
        Family::Sampled(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn power(delta: f64) -> CoefficientProfile {
        CoefficientProfile::power_1d(delta, &[0.0], [-4.0, 4.0]).unwrap()
    }

    #[test]
    fn power_profile_vanishes_at_center() {
        let m = power(0.75).eval(&[0.0]).unwrap();
        assert_eq!(m.a11, 0.0);
    }

    #[test]
    fn delta_zero_is_identity() {
        let p = power(0.0);
        for x in [-3.9, -0.1, 0.0, 2.5] {
            assert_eq!(p.eval(&[x]).unwrap(), SymMat::identity(1));
        }
        let p2 = CoefficientProfile::new(
            2,
            Family::PowerDegenerate { delta: 0.0, centers: vec![vec![0.0, 0.0]] },
            vec![[-1.0, 1.0]; 2],
        )
        .unwrap();
        assert_eq!(p2.eval(&[0.0, 0.0]).unwrap(), SymMat::identity(2));
    }

    #[test]
    fn half_power_at_one() {
        let c = power(0.5).eval(&[1.0]).unwrap().a11;
        assert!((c - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((c - 0.7071).abs() < 1e-4);
    }

    #[test]
    fn outside_domain_is_an_error() {
        assert!(matches!(power(0.5).eval(&[5.0]), Err(LabError::Domain { .. })));
    }

    #[test]
    fn shift_adds_epsilon() {
        let p = power(0.75);
        let s0 = p.viscosity_shift(0.0).unwrap();
        for x in [-2.0, 0.0, 0.3] {
            assert_eq!(p.eval(&[x]).unwrap(), s0.eval(&[x]).unwrap());
        }
        let s = p.viscosity_shift(0.1).unwrap();
        assert!((s.eval(&[0.0]).unwrap().a11 - 0.1).abs() < 1e-15);
        assert_eq!(s.epsilon(), 0.1);
        assert!(matches!(p.viscosity_shift(-1e-3), Err(LabError::Argument(_))));
    }

    #[test]
    fn shift_moves_smallest_eigenvalue_by_epsilon() {
        // Dense symmetric eigensolver as the independent check.
        let p = CoefficientProfile::new(
            2,
            Family::StronglyElliptic { matrix: SymMat { dim: 2, a11: 2.0, a12: 0.7, a22: 1.2 } },
            vec![[-1.0, 1.0]; 2],
        )
        .unwrap();
        let radial = CoefficientProfile::new(2, Family::RadialShell { delta: 0.6, radius: 1.0 }, vec![[-2.0, 2.0]; 2]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for prof in [p, radial] {
            let eps = 0.037;
            let shifted = prof.viscosity_shift(eps).unwrap();
            for _ in 0..5 {
                let x = [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)];
                let m = shifted.eval(&x).unwrap();
                let dense = nalgebra::Matrix2::new(m.a11, m.a12, m.a12, m.a22);
                let lo = dense.symmetric_eigen().eigenvalues.min();
                let mu = prof.smallest_eigenvalue(&x).unwrap();
                assert!((lo - (mu + eps)).abs() < 1e-12, "{lo} vs {}", mu + eps);
            }
        }
    }

    #[test]
    fn smallest_eigenvalue_examples() {
        let p = power(0.25);
        for x in [0.0, 0.5, 3.0] {
            assert_eq!(p.smallest_eigenvalue(&[x]).unwrap(), p.eval(&[x]).unwrap().a11);
        }
        let diag = CoefficientProfile::new(
            2,
            Family::StronglyElliptic { matrix: SymMat { dim: 2, a11: 2.0, a12: 0.0, a22: 3.0 } },
            vec![[-1.0, 1.0]; 2],
        )
        .unwrap();
        assert_eq!(diag.smallest_eigenvalue(&[0.1, 0.2]).unwrap(), 2.0);
    }

    #[test]
    fn norm_is_cached_and_bounded() {
        let p = power(0.75);
        let expected = degenerate_profile(4.0, 0.75);
        assert!((p.norm() - expected).abs() < 1e-12);
        assert!((p.viscosity_shift(0.5).unwrap().norm() - expected - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_families_are_rejected() {
        assert!(CoefficientProfile::power_1d(1.0, &[0.0], [-1.0, 1.0]).is_err());
        assert!(CoefficientProfile::new(1, Family::RadialShell { delta: 0.5, radius: -1.0 }, vec![[-1.0, 1.0]]).is_err());
        let surf = SurfaceCurve::new([0.0, 1.0], vec![0.0, 0.1]).unwrap();
        assert!(CoefficientProfile::new(1, Family::SurfaceDegenerate { delta: 0.5, surface: surf }, vec![[-1.0, 1.0]]).is_err());
    }

    #[test]
    fn surface_rho_is_vertical_offset() {
        let surf = SurfaceCurve::new([-1.0, 1.0], vec![0.0, 0.2, 0.0]).unwrap();
        let p = CoefficientProfile::new(2, Family::SurfaceDegenerate { delta: 0.5, surface: surf }, vec![[-1.0, 1.0]; 2]).unwrap();
        assert!((p.rho(&[0.0, 0.5]) - 0.3).abs() < 1e-15);
        assert_eq!(p.eval(&[0.0, 0.2]).unwrap().a11, 0.0);
    }
}
