//! Gravity-model estimation of citation flows.
//!
//! The model `C = k · M_i^α · M_j^β / d^γ` is estimated on its log form
//!
//! ```text
//! ln C = ln k + α ln M_i + β ln M_j − γ ln d + ε
//! ```
//!
//! by ordinary least squares, or with distance replaced by band dummies
//! against a reference band. Estimation is fully signed internally; reports
//! show distance terms as decay magnitudes (the negated estimate), so a
//! positive γ or band value means flows fall with distance.
//!
//! Least squares is solved by Householder QR on a column-equilibrated design;
//! standard errors use the HC1 sandwich estimator.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::flows::{FlowEdge, MassTable};

#[derive(Debug, Error)]
pub enum GravityError {
    #[error("no mass recorded for territory `{0}`")]
    MissingMass(String),
    #[error("need more observations than coefficients: {n_obs} rows for {n_coef} coefficients")]
    TooFewRows { n_obs: usize, n_coef: usize },
    #[error("design matrix is rank deficient: {} are collinear", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("response has zero variance")]
    DegenerateResponse,
    #[error("band breakpoints must be positive and strictly increasing, got {0:?}")]
    InvalidBands(Vec<f64>),
    #[error("distance floor must be positive, got {0}")]
    InvalidFloor(f64),
    #[error("prediction inputs must be positive")]
    NonPositiveInput,
    #[error("distance {0} km falls outside the band specification")]
    UnsupportedPrediction(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Policy for pairs at zero distance under the continuous specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ZeroDistance {
    Exclude,
    /// Replace distances below this many km by the floor.
    Floor(f64),
}

impl fmt::Display for ZeroDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZeroDistance::Exclude => f.write_str("exclude"),
            ZeroDistance::Floor(km) => write!(f, "floor:{km}"),
        }
    }
}

impl std::str::FromStr for ZeroDistance {
    type Err = GravityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "exclude" {
            return Ok(ZeroDistance::Exclude);
        }
        let km: f64 = s
            .strip_prefix("floor:")
            .and_then(|v| v.parse().ok())
            .ok_or(GravityError::InvalidFloor(f64::NAN))?;
        if !(km > 0.0) || !km.is_finite() {
            return Err(GravityError::InvalidFloor(km));
        }
        Ok(ZeroDistance::Floor(km))
    }
}

/// Distance bands. With breakpoints `b0 < b1 < … < bm`, the reference band is
/// `[0, b0)`, band `k` is `[b(k-1), bk)` and the last band is closed at `bm`.
/// Distances beyond `bm` belong to no band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    breakpoints: Vec<f64>,
}

impl Default for BandSpec {
    fn default() -> Self {
        BandSpec {
            breakpoints: vec![50.0, 400.0, 800.0, 1200.0],
        }
    }
}

impl BandSpec {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self, GravityError> {
        let ok = breakpoints.len() >= 2
            && breakpoints.iter().all(|b| b.is_finite() && *b > 0.0)
            && breakpoints.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(GravityError::InvalidBands(breakpoints));
        }
        Ok(BandSpec { breakpoints })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Number of dummy columns (bands other than the reference).
    pub fn n_dummies(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// 0 for the reference band, `k` for dummy `k`, `None` beyond the last breakpoint.
    pub fn band_of(&self, distance_km: f64) -> Option<usize> {
        let last = *self.breakpoints.last().expect("validated non-empty");
        if !(distance_km >= 0.0) || distance_km > last {
            return None;
        }
        Some(
            self.breakpoints
                .iter()
                .take_while(|&&b| distance_km >= b)
                .count()
                .min(self.n_dummies()),
        )
    }

    pub fn dummies(&self, distance_km: f64) -> Option<Vec<f64>> {
        self.band_of(distance_km).map(|band| {
            (1..=self.n_dummies())
                .map(|k| if k == band { 1.0 } else { 0.0 })
                .collect()
        })
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.n_dummies())
            .map(|k| {
                let letter = (b'a' + (k % 26) as u8) as char;
                format!("dummy_{letter}")
            })
            .collect()
    }

    pub fn ranges(&self) -> Vec<(f64, f64)> {
        let mut lo = 0.0;
        self.breakpoints
            .iter()
            .map(|&hi| {
                let r = (lo, hi);
                lo = hi;
                r
            })
            .collect()
    }
}

impl fmt::Display for BandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.breakpoints.iter().map(|b| b.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DistanceSpec {
    Continuous(ZeroDistance),
    Bands(BandSpec),
}

impl DistanceSpec {
    pub fn label(&self) -> String {
        match self {
            DistanceSpec::Continuous(z) => format!("continuous(zero_distance={z})"),
            DistanceSpec::Bands(b) => format!("bands({b})"),
        }
    }
}

/// A flow between two territories with a real-valued volume.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowObservation {
    pub cited_id: String,
    pub citing_id: String,
    pub flow: f64,
    pub distance_km: f64,
}

impl From<&FlowEdge> for FlowObservation {
    fn from(e: &FlowEdge) -> Self {
        FlowObservation {
            cited_id: e.cited_id.clone(),
            citing_id: e.citing_id.clone(),
            flow: e.citations as f64,
            distance_km: e.distance_km,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DistanceTerm {
    Log(f64),
    Band(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    pub cited_id: String,
    pub citing_id: String,
    pub ln_c: f64,
    pub ln_mi: f64,
    pub ln_mj: f64,
    pub distance: DistanceTerm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    ZeroDistance,
    BeyondBands,
    ZeroMass,
    NonPositiveFlow,
}

impl ExclusionReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExclusionReason::ZeroDistance => "zero distance",
            ExclusionReason::BeyondBands => "beyond last band",
            ExclusionReason::ZeroMass => "zero mass",
            ExclusionReason::NonPositiveFlow => "non-positive flow",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub cited_id: String,
    pub citing_id: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone)]
pub struct Design {
    pub spec: DistanceSpec,
    pub rows: Vec<DesignRow>,
    pub exclusions: Vec<Exclusion>,
}

pub const NAME_MI: &str = "M_i";
pub const NAME_MJ: &str = "M_j";
pub const NAME_DISTANCE: &str = "d_ij";
pub const NAME_CONST: &str = "const";

impl Design {
    /// Column names in matrix order: constant, masses, distance terms.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec![NAME_CONST.to_string(), NAME_MI.to_string(), NAME_MJ.to_string()];
        match &self.spec {
            DistanceSpec::Continuous(_) => names.push(NAME_DISTANCE.to_string()),
            DistanceSpec::Bands(b) => names.extend(b.labels()),
        }
        names
    }

    pub fn matrix(&self) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.column_names().len();
        let n = self.rows.len();
        let mut x = DMatrix::zeros(n, p);
        let mut y = DVector::zeros(n);
        for (i, row) in self.rows.iter().enumerate() {
            y[i] = row.ln_c;
            x[(i, 0)] = 1.0;
            x[(i, 1)] = row.ln_mi;
            x[(i, 2)] = row.ln_mj;
            match &row.distance {
                DistanceTerm::Log(v) => x[(i, 3)] = *v,
                DistanceTerm::Band(d) => {
                    for (k, v) in d.iter().enumerate() {
                        x[(i, 3 + k)] = *v;
                    }
                }
            }
        }
        (x, y)
    }

    pub fn exclusion_counts(&self) -> BTreeMap<String, u64> {
        let mut counts = BTreeMap::new();
        for e in &self.exclusions {
            *counts.entry(e.reason.as_str().to_string()).or_default() += 1;
        }
        counts
    }
}

pub fn build_design(
    edges: &[FlowEdge],
    cited_masses: &MassTable,
    citing_masses: &MassTable,
    spec: &DistanceSpec,
) -> Result<Design, GravityError> {
    let obs: Vec<FlowObservation> = edges.iter().map(FlowObservation::from).collect();
    build_design_from(&obs, cited_masses, citing_masses, spec)
}

/// Log-transforms observations into design rows. Rows that cannot enter the
/// regression are listed in `exclusions` rather than dropped silently.
pub fn build_design_from(
    observations: &[FlowObservation],
    cited_masses: &MassTable,
    citing_masses: &MassTable,
    spec: &DistanceSpec,
) -> Result<Design, GravityError> {
    let mut rows = Vec::with_capacity(observations.len());
    let mut exclusions = Vec::new();
    for o in observations {
        let mi = cited_masses
            .get(&o.cited_id)
            .ok_or_else(|| GravityError::MissingMass(o.cited_id.clone()))?;
        let mj = citing_masses
            .get(&o.citing_id)
            .ok_or_else(|| GravityError::MissingMass(o.citing_id.clone()))?;
        let exclude = |reason| Exclusion {
            cited_id: o.cited_id.clone(),
            citing_id: o.citing_id.clone(),
            reason,
        };
        if !(o.flow > 0.0) {
            exclusions.push(exclude(ExclusionReason::NonPositiveFlow));
            continue;
        }
        if mi == 0 || mj == 0 {
            exclusions.push(exclude(ExclusionReason::ZeroMass));
            continue;
        }
        let distance = match spec {
            DistanceSpec::Continuous(policy) => match (policy, o.distance_km > 0.0) {
                (_, true) if !matches!(policy, ZeroDistance::Floor(f) if o.distance_km < *f) => {
                    DistanceTerm::Log(o.distance_km.ln())
                }
                (ZeroDistance::Floor(f), _) => DistanceTerm::Log(f.ln()),
                (ZeroDistance::Exclude, _) => {
                    exclusions.push(exclude(ExclusionReason::ZeroDistance));
                    continue;
                }
            },
            DistanceSpec::Bands(bands) => match bands.dummies(o.distance_km) {
                Some(d) => DistanceTerm::Band(d),
                None => {
                    exclusions.push(exclude(ExclusionReason::BeyondBands));
                    continue;
                }
            },
        };
        rows.push(DesignRow {
            cited_id: o.cited_id.clone(),
            citing_id: o.citing_id.clone(),
            ln_c: o.flow.ln(),
            ln_mi: (mi as f64).ln(),
            ln_mj: (mj as f64).ln(),
            distance,
        });
    }
    Ok(Design {
        spec: spec.clone(),
        rows,
        exclusions,
    })
}

/// Writes observations in the edges CSV layout; flows may be fractional.
pub fn write_observations<W: std::io::Write>(
    w: W,
    level: &str,
    observations: &[FlowObservation],
) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["level", "cited_id", "citing_id", "citations", "distance_km"])?;
    for o in observations {
        wtr.write_record([
            level,
            &o.cited_id,
            &o.citing_id,
            &o.flow.to_string(),
            &o.distance_km.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads an edges CSV, accepting integer or real flows. Returns the level
/// name of each row with the observation.
pub fn read_observations<R: std::io::Read>(
    r: R,
    file: &str,
) -> Result<Vec<(String, FlowObservation)>, crate::flows::FlowError> {
    use crate::flows::FlowError;
    let mut rdr = csv::Reader::from_reader(r);
    crate::geodesy::check_header(&mut rdr, file, &["level", "cited_id", "citing_id", "citations", "distance_km"])?;
    let mut out = Vec::new();
    for (n, row) in rdr.records().enumerate() {
        let row = row?;
        let bad = |what: &str| FlowError::InvalidFile {
            file: file.to_string(),
            message: format!("line {}: bad {what}", n + 2),
        };
        if row.len() != 5 {
            return Err(bad("field count"));
        }
        let flow: f64 = row[3].trim().parse().map_err(|_| bad("citations"))?;
        let distance_km: f64 = row[4].trim().parse().map_err(|_| bad("distance"))?;
        if !flow.is_finite() || !distance_km.is_finite() || distance_km < 0.0 {
            return Err(bad("edge values"));
        }
        out.push((
            row[0].trim().to_string(),
            FlowObservation {
                cited_id: row[1].trim().to_string(),
                citing_id: row[2].trim().to_string(),
                flow,
                distance_km,
            },
        ));
    }
    Ok(out)
}

/// Plain least-squares result on an arbitrary design.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub residuals: DVector<f64>,
    pub fitted: DVector<f64>,
    pub r2: f64,
    pub n_obs: usize,
}

impl OlsFit {
    pub fn robust_se(&self) -> Vec<f64> {
        (0..self.coefficients.len())
            .map(|i| self.covariance[(i, i)].max(0.0).sqrt())
            .collect()
    }
}

/// QR factors of the column-equilibrated design; `scale[j]` is the norm
/// column `j` was divided by.
struct Factored {
    qr: nalgebra::linalg::QR<f64, nalgebra::Dyn, nalgebra::Dyn>,
    scale: Vec<f64>,
}

const RANK_TOL: f64 = 1e-10;

fn factor(x: &DMatrix<f64>, names: &[String]) -> Result<Factored, GravityError> {
    let (n, p) = x.shape();
    if names.len() != p {
        return Err(GravityError::Dimension(format!("{} names for {p} columns", names.len())));
    }
    if n <= p {
        return Err(GravityError::TooFewRows { n_obs: n, n_coef: p });
    }
    let scale: Vec<f64> = (0..p).map(|j| x.column(j).norm()).collect();
    if let Some(j) = scale.iter().position(|&s| s == 0.0) {
        return Err(GravityError::RankDeficient(vec![names[j].clone()]));
    }
    let mut xs = x.clone();
    for (j, s) in scale.iter().enumerate() {
        xs.column_mut(j).unscale_mut(*s);
    }
    let qr = xs.clone().qr();
    let r = qr.r();
    if let Some(k) = (0..p).find(|&k| r[(k, k)].abs() < RANK_TOL) {
        return Err(GravityError::RankDeficient(collinear_set(&xs, k, names)));
    }
    Ok(Factored { qr, scale })
}

/// Names column `k` together with the earlier columns it is a combination of.
fn collinear_set(xs: &DMatrix<f64>, k: usize, names: &[String]) -> Vec<String> {
    let target = xs.column(k).into_owned();
    let prior = xs.columns(0, k).into_owned();
    let mut out = Vec::new();
    if let Ok(coef) = prior.svd(true, true).solve(&target, 1e-12) {
        out.extend(
            coef.iter()
                .enumerate()
                .filter(|(_, c)| c.abs() > 1e-8)
                .map(|(j, _)| names[j].clone()),
        );
    }
    out.push(names[k].clone());
    out
}

impl Factored {
    fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let p = self.scale.len();
        let mut qty = y.clone();
        self.qr.q_tr_mul(&mut qty);
        let r = self.qr.r();
        let beta_scaled = r
            .solve_upper_triangular(&qty.rows(0, p).into_owned())
            .expect("full rank checked in factor");
        DVector::from_iterator(p, beta_scaled.iter().zip(&self.scale).map(|(b, s)| b / s))
    }

    /// `(X'X)^-1` in the original column scale.
    fn xtx_inverse(&self) -> DMatrix<f64> {
        let p = self.scale.len();
        let r = self.qr.r();
        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .expect("full rank checked in factor");
        let mut inv = &r_inv * r_inv.transpose();
        for i in 0..p {
            for j in 0..p {
                inv[(i, j)] /= self.scale[i] * self.scale[j];
            }
        }
        inv
    }
}

fn sandwich(x: &DMatrix<f64>, residuals: &DVector<f64>, bread: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let mut meat = DMatrix::zeros(p, p);
    for i in 0..n {
        let e2 = residuals[i] * residuals[i];
        if e2 == 0.0 {
            continue;
        }
        for a in 0..p {
            let xa = x[(i, a)] * e2;
            for b in a..p {
                meat[(a, b)] += xa * x[(i, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            meat[(a, b)] = meat[(b, a)];
        }
    }
    let mut cov = bread * meat * bread;
    cov *= n as f64 / (n - p) as f64;
    // exact symmetry
    for a in 0..p {
        for b in 0..a {
            let v = 0.5 * (cov[(a, b)] + cov[(b, a)]);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    cov
}

/// HC1 covariance `n/(n-p) · (X'X)^-1 X' diag(e²) X (X'X)^-1`.
pub fn robust_covariance(x: &DMatrix<f64>, residuals: &DVector<f64>) -> Result<DMatrix<f64>, GravityError> {
    let names: Vec<String> = (0..x.ncols()).map(|j| format!("x{j}")).collect();
    if residuals.len() != x.nrows() {
        return Err(GravityError::Dimension(format!(
            "{} residuals for {} rows",
            residuals.len(),
            x.nrows()
        )));
    }
    let f = factor(x, &names)?;
    Ok(sandwich(x, residuals, &f.xtx_inverse()))
}

/// Homoskedastic covariance `s² (X'X)^-1`, for comparison with HC1.
pub fn classical_covariance(x: &DMatrix<f64>, residuals: &DVector<f64>) -> Result<DMatrix<f64>, GravityError> {
    let names: Vec<String> = (0..x.ncols()).map(|j| format!("x{j}")).collect();
    let f = factor(x, &names)?;
    let (n, p) = x.shape();
    let s2 = residuals.norm_squared() / (n - p) as f64;
    Ok(f.xtx_inverse() * s2)
}

/// Least squares of `y` on `x` (which must include any constant column).
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<OlsFit, GravityError> {
    if y.len() != x.nrows() {
        return Err(GravityError::Dimension(format!("{} responses for {} rows", y.len(), x.nrows())));
    }
    let f = factor(x, names)?;
    let coefficients = f.solve(y);
    let fitted = x * &coefficients;
    let residuals = y - &fitted;

    let n = y.len();
    let mean = {
        let mut v: Vec<f64> = y.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v.iter().sum::<f64>() / n as f64
    };
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(GravityError::DegenerateResponse);
    }
    let ssr = residuals.norm_squared();
    let r2 = (1.0 - ssr / sst).clamp(0.0, 1.0);
    let covariance = sandwich(x, &residuals, &f.xtx_inverse());
    Ok(OlsFit {
        names: names.to_vec(),
        coefficients,
        covariance,
        residuals,
        fitted,
        r2,
        n_obs: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stars {
    #[serde(rename = "***")]
    One,
    #[serde(rename = "**")]
    Five,
    #[serde(rename = "*")]
    Ten,
    #[serde(rename = "")]
    None,
}

impl Stars {
    /// Two-sided normal test.
    pub fn from_estimate(estimate: f64, se: f64) -> Stars {
        let p = two_sided_p(estimate, se);
        if p < 0.01 {
            Stars::One
        } else if p < 0.05 {
            Stars::Five
        } else if p < 0.1 {
            Stars::Ten
        } else {
            Stars::None
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Stars::One => "***",
            Stars::Five => "**",
            Stars::Ten => "*",
            Stars::None => "",
        }
    }
}

pub fn two_sided_p(estimate: f64, se: f64) -> f64 {
    if se == 0.0 {
        return if estimate == 0.0 { 1.0 } else { 0.0 };
    }
    let z = (estimate / se).abs();
    let normal = Normal::standard();
    2.0 * (1.0 - normal.cdf(z))
}

/// Fitted gravity model with signed coefficients in design-column order.
#[derive(Debug, Clone)]
pub struct GravityFit {
    pub spec: DistanceSpec,
    pub ols: OlsFit,
    pub exclusions: BTreeMap<String, u64>,
}

impl GravityFit {
    pub fn n_obs(&self) -> usize {
        self.ols.n_obs
    }

    pub fn r2(&self) -> f64 {
        self.ols.r2
    }

    /// `ln k`.
    pub fn intercept(&self) -> f64 {
        self.ols.coefficients[0]
    }

    pub fn alpha(&self) -> f64 {
        self.ols.coefficients[1]
    }

    pub fn beta(&self) -> f64 {
        self.ols.coefficients[2]
    }

    /// Distance elasticity magnitude (negated log-distance coefficient).
    pub fn gamma(&self) -> Option<f64> {
        match self.spec {
            DistanceSpec::Continuous(_) => Some(-self.ols.coefficients[3]),
            DistanceSpec::Bands(_) => None,
        }
    }

    /// Band decay magnitudes relative to the reference band.
    pub fn band_decays(&self) -> Option<Vec<f64>> {
        match &self.spec {
            DistanceSpec::Bands(b) => Some((0..b.n_dummies()).map(|k| -self.ols.coefficients[3 + k]).collect()),
            DistanceSpec::Continuous(_) => None,
        }
    }

    pub fn robust_se(&self) -> Vec<f64> {
        self.ols.robust_se()
    }

    /// Expected flow `exp(ln k + α ln M_i + β ln M_j + distance term)`.
    pub fn predict(&self, mi: f64, mj: f64, distance_km: f64) -> Result<f64, GravityError> {
        if !(mi > 0.0 && mj > 0.0) {
            return Err(GravityError::NonPositiveInput);
        }
        let c = &self.ols.coefficients;
        let base = c[0] + c[1] * mi.ln() + c[2] * mj.ln();
        let term = match &self.spec {
            DistanceSpec::Continuous(_) => {
                if !(distance_km > 0.0) {
                    return Err(GravityError::NonPositiveInput);
                }
                c[3] * distance_km.ln()
            }
            DistanceSpec::Bands(b) => {
                let d = b
                    .dummies(distance_km)
                    .ok_or(GravityError::UnsupportedPrediction(distance_km))?;
                d.iter().enumerate().map(|(k, v)| v * c[3 + k]).sum()
            }
        };
        Ok((base + term).exp())
    }

    pub fn report(&self) -> FitReport {
        FitReport::from_fit(self)
    }
}

/// Free-function form of [`GravityFit::predict`].
pub fn predict(fit: &GravityFit, mi: f64, mj: f64, distance_km: f64) -> Result<f64, GravityError> {
    fit.predict(mi, mj, distance_km)
}

pub fn ols_fit(design: &Design) -> Result<GravityFit, GravityError> {
    let (x, y) = design.matrix();
    let ols = ols(&x, &y, &design.column_names())?;
    Ok(GravityFit {
        spec: design.spec.clone(),
        ols,
        exclusions: design.exclusion_counts(),
    })
}

pub const SIGN_CONVENTION: &str =
    "distance terms are reported as decay magnitudes (negated estimates); masses and const are as estimated";

/// Serializable fit summary. Rows follow the table order: masses, distance
/// terms, constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub spec: String,
    pub sign_convention: String,
    pub coefficients: IndexMap<String, f64>,
    pub robust_se: IndexMap<String, f64>,
    pub stars: IndexMap<String, String>,
    pub r2: f64,
    pub n_obs: usize,
    pub exclusions: BTreeMap<String, u64>,
}

impl FitReport {
    fn from_fit(fit: &GravityFit) -> Self {
        let names = &fit.ols.names;
        let se = fit.robust_se();
        let p = names.len();
        // table order: 1..p then the constant
        let order: Vec<usize> = (1..p).chain(std::iter::once(0)).collect();
        let mut coefficients = IndexMap::new();
        let mut robust_se = IndexMap::new();
        let mut stars = IndexMap::new();
        for j in order {
            let est = fit.ols.coefficients[j];
            let shown = if j >= 3 { -est } else { est };
            coefficients.insert(names[j].clone(), shown);
            robust_se.insert(names[j].clone(), se[j]);
            stars.insert(names[j].clone(), Stars::from_estimate(est, se[j]).as_str().to_string());
        }
        FitReport {
            spec: fit.spec.label(),
            sign_convention: SIGN_CONVENTION.to_string(),
            coefficients,
            robust_se,
            stars,
            r2: fit.r2(),
            n_obs: fit.n_obs(),
            exclusions: fit.exclusions.clone(),
        }
    }
}

/// Aligned text table with one column group per fit; `None` prints a notice
/// that the group had no observations.
pub fn render_fit_table(columns: &[(&str, Option<&FitReport>)]) -> String {
    let mut variables: Vec<String> = Vec::new();
    for (_, r) in columns {
        if let Some(r) = r {
            for k in r.coefficients.keys() {
                if !variables.contains(k) {
                    variables.push(k.clone());
                }
            }
        }
    }
    // constant last
    if let Some(pos) = variables.iter().position(|v| v == NAME_CONST) {
        let c = variables.remove(pos);
        variables.push(c);
    }

    const W: usize = 26;
    let mut out = String::new();
    let _ = write!(out, "{:<10}", "Variable");
    for (label, _) in columns {
        let _ = write!(out, "{label:<W$}");
    }
    out.push('\n');
    let _ = write!(out, "{:<10}", "");
    for _ in columns {
        let _ = write!(out, "{:<W$}", "Coeff.      Robust SE");
    }
    out.push('\n');
    for v in &variables {
        let _ = write!(out, "{v:<10}");
        for (_, r) in columns {
            let cell = match r.and_then(|r| r.coefficients.get(v).map(|c| (c, r))) {
                Some((c, r)) => format!("{:>7.3} {:<3} {:>8.3}", c, r.stars[v], r.robust_se[v]),
                None => String::new(),
            };
            let _ = write!(out, "{cell:<W$}");
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<10}", "R2");
    for (_, r) in columns {
        let cell = r.map(|r| format!("{:>7.3}", r.r2)).unwrap_or_default();
        let _ = write!(out, "{cell:<W$}");
    }
    out.push('\n');
    let _ = write!(out, "{:<10}", "Obs");
    for (_, r) in columns {
        let cell = r.map(|r| format!("{:>7}", r.n_obs)).unwrap_or_default();
        let _ = write!(out, "{cell:<W$}");
    }
    out.push('\n');
    for (label, r) in columns {
        if r.is_none() {
            let _ = writeln!(out, "no {label} observations");
        }
    }
    out.push_str("Significance level: *** 0.01, ** 0.05, * 0.1 (two-sided normal test on HC1 errors).\n");
    out.push_str(&format!("Sign convention: {SIGN_CONVENTION}.\n"));
    out
}
