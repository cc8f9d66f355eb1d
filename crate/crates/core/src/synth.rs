//! Synthetic worlds whose flows follow the gravity law with known parameters.
//!
//! Every random draw comes from a ChaCha8 generator keyed by the world seed.
//! Territory attributes use one stream and each ordered pair uses its own
//! stream, so output does not depend on iteration order or threading.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flows::{FlowEdge, MassTable};
use crate::geodesy::{great_circle_distance, GeoPoint};
use crate::gravity::{
    build_design_from, ols_fit, DistanceSpec, FlowObservation, GravityError, GravityFit, ZeroDistance,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("need at least 2 territories, got {0}")]
    TooFewTerritories(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("all territories coincide; the sampling region is degenerate")]
    DegenerateRegion,
    #[error("exact count mode yields fractional flows; integer edges are unavailable")]
    FractionalFlows,
    #[error(transparent)]
    Fit(#[from] GravityError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GravityParams {
    pub ln_k: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Standard deviation of the multiplicative lognormal noise on C.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl GravityParams {
    /// National-level estimates from the Italian citation data.
    pub fn reference(noise_sigma: f64, seed: u64) -> Self {
        GravityParams {
            ln_k: -1.773,
            alpha: 0.437,
            beta: 0.437,
            gamma: 0.474,
            noise_sigma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let finite = [self.ln_k, self.alpha, self.beta, self.gamma, self.noise_sigma]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(SynthError::InvalidParams("parameters must be finite".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(SynthError::InvalidParams(format!(
                "noise_sigma must be nonnegative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    /// Expected flow `k · M_i^α · M_j^β / d^γ`.
    pub fn expected_flow(&self, mi: f64, mj: f64, distance_km: f64) -> f64 {
        (self.ln_k + self.alpha * mi.ln() + self.beta * mj.ln() - self.gamma * distance_km.ln()).exp()
    }
}

/// How a noisy expectation becomes a flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// Nearest integer; zeros omitted.
    Round,
    /// Keep the real value. Zero-noise data is then exactly log-linear.
    Exact,
    /// Poisson draw with the noisy expectation as mean; zeros omitted.
    Poisson,
}

impl std::str::FromStr for CountMode {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "round" => Ok(CountMode::Round),
            "exact" => Ok(CountMode::Exact),
            "poisson" => Ok(CountMode::Poisson),
            other => Err(SynthError::InvalidParams(format!("unknown count mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub lat_range: (f64, f64),
    pub lon_range: (f64, f64),
    /// Location of ln(mass).
    pub mass_mu: f64,
    /// Scale of ln(mass).
    pub mass_sigma: f64,
    pub count_mode: CountMode,
    pub country_code: String,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            lat_range: (35.0, 47.0),
            lon_range: (6.0, 19.0),
            mass_mu: 8.0,
            mass_sigma: 1.2,
            count_mode: CountMode::Round,
            country_code: "IT".to_string(),
        }
    }
}

impl WorldConfig {
    pub fn with_mode(mode: CountMode) -> Self {
        WorldConfig {
            count_mode: mode,
            ..WorldConfig::default()
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let (la, lb) = self.lat_range;
        let (oa, ob) = self.lon_range;
        let ok = la <= lb
            && oa <= ob
            && (-90.0..=90.0).contains(&la)
            && (-90.0..=90.0).contains(&lb)
            && oa.is_finite()
            && ob.is_finite()
            && self.mass_mu.is_finite()
            && self.mass_sigma.is_finite()
            && self.mass_sigma >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(SynthError::InvalidParams("invalid region or mass distribution".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTerritory {
    pub id: String,
    pub point: GeoPoint,
    pub mass: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub params: GravityParams,
    pub config: WorldConfig,
    pub territories: Vec<SyntheticTerritory>,
    /// Ordered pairs with a positive realized flow, sorted by (cited, citing).
    pub observations: Vec<FlowObservation>,
    /// Pairs omitted because their realized flow was zero.
    pub omitted_zero: u64,
    /// Pairs omitted because both territories sit on the same point.
    pub omitted_coincident: u64,
}

const TERRITORY_STREAM: u64 = u64::MAX;

fn pair_rng(seed: u64, pair: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pair);
    rng
}

/// Draws `n` territories and the flows between every ordered pair.
pub fn generate_world(n: usize, params: &GravityParams, config: &WorldConfig) -> Result<SyntheticWorld, SynthError> {
    if n < 2 {
        return Err(SynthError::TooFewTerritories(n));
    }
    params.validate()?;
    config.validate()?;

    let mut rng = pair_rng(params.seed, TERRITORY_STREAM);
    let mass_dist = LogNormal::new(config.mass_mu, config.mass_sigma)
        .map_err(|e| SynthError::InvalidParams(e.to_string()))?;
    let width = (n - 1).to_string().len().max(4);
    let mut territories = Vec::with_capacity(n);
    for i in 0..n {
        let lat = sample_in(&mut rng, config.lat_range);
        let lon = sample_in(&mut rng, config.lon_range);
        let point = GeoPoint::new(lat, lon).map_err(|e| SynthError::InvalidParams(e.to_string()))?;
        let mass = (mass_dist.sample(&mut rng).round() as u64).max(1);
        territories.push(SyntheticTerritory {
            id: format!("syn-{i:0width$}"),
            point,
            mass,
        });
    }
    if territories.iter().all(|t| t.point == territories[0].point) {
        return Err(SynthError::DegenerateRegion);
    }

    let mut observations = Vec::new();
    let mut omitted_zero = 0;
    let mut omitted_coincident = 0;
    for (i, ti) in territories.iter().enumerate() {
        for (j, tj) in territories.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = great_circle_distance(ti.point, tj.point);
            if d == 0.0 {
                omitted_coincident += 1;
                continue;
            }
            let mut prng = pair_rng(params.seed, (i * n + j) as u64);
            let z: f64 = prng.sample(StandardNormal);
            let noisy = params.expected_flow(ti.mass as f64, tj.mass as f64, d) * (params.noise_sigma * z).exp();
            let flow = match config.count_mode {
                CountMode::Exact => noisy,
                CountMode::Round => noisy.round(),
                CountMode::Poisson => {
                    if noisy > 0.0 {
                        Poisson::new(noisy)
                            .map_err(|e| SynthError::InvalidParams(e.to_string()))?
                            .sample(&mut prng)
                    } else {
                        0.0
                    }
                }
            };
            if flow <= 0.0 {
                omitted_zero += 1;
                continue;
            }
            observations.push(FlowObservation {
                cited_id: ti.id.clone(),
                citing_id: tj.id.clone(),
                flow,
                distance_km: d,
            });
        }
    }
    Ok(SyntheticWorld {
        params: *params,
        config: config.clone(),
        territories,
        observations,
        omitted_zero,
        omitted_coincident,
    })
}

fn sample_in(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

impl SyntheticWorld {
    pub fn masses(&self) -> MassTable {
        let mut m = MassTable::default();
        for t in &self.territories {
            m.insert(&t.id, t.mass);
        }
        m
    }

    /// Integer edges; unavailable in exact count mode.
    pub fn edges(&self) -> Result<Vec<FlowEdge>, SynthError> {
        if self.config.count_mode == CountMode::Exact {
            return Err(SynthError::FractionalFlows);
        }
        Ok(self
            .observations
            .iter()
            .map(|o| FlowEdge {
                cited_id: o.cited_id.clone(),
                citing_id: o.citing_id.clone(),
                citations: o.flow as u64,
                distance_km: o.distance_km,
            })
            .collect())
    }

    /// Gazetteer rows in the loader's format, all at LAU level.
    pub fn write_gazetteer<W: Write>(&self, w: W) -> Result<(), SynthError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["id", "level", "name", "country_code", "lat", "lon", "alt_names"])?;
        for t in &self.territories {
            wtr.write_record([
                t.id.as_str(),
                "LAU",
                t.id.as_str(),
                self.config.country_code.as_str(),
                &t.point.lat().to_string(),
                &t.point.lon().to_string(),
                "",
            ])?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Signed errors `fitted − true`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamDeltas {
    pub ln_k: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ParamDeltas {
    pub fn max_abs(&self) -> f64 {
        [self.ln_k, self.alpha, self.beta, self.gamma]
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryTrial {
    pub truth: GravityParams,
    pub fit: GravityFit,
    pub deltas: ParamDeltas,
    pub world_pairs: usize,
}

/// Generate, fit with the continuous specification, and compare.
pub fn recovery_trial(params: &GravityParams, n: usize, config: &WorldConfig) -> Result<RecoveryTrial, SynthError> {
    let world = generate_world(n, params, config)?;
    let masses = world.masses();
    let design = build_design_from(
        &world.observations,
        &masses,
        &masses,
        &DistanceSpec::Continuous(ZeroDistance::Exclude),
    )?;
    let fit = ols_fit(&design)?;
    let deltas = ParamDeltas {
        ln_k: fit.intercept() - params.ln_k,
        alpha: fit.alpha() - params.alpha,
        beta: fit.beta() - params.beta,
        gamma: fit.gamma().expect("continuous specification") - params.gamma,
    };
    Ok(RecoveryTrial {
        truth: *params,
        fit,
        deltas,
        world_pairs: world.observations.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_territories_match_direct_formula() {
        let p = GravityParams::reference(0.0, 7);
        let w = generate_world(2, &p, &WorldConfig::default()).unwrap();
        let (a, b) = (&w.territories[0], &w.territories[1]);
        let d = great_circle_distance(a.point, b.point);
        let direct = (-1.773f64).exp() * (a.mass as f64).powf(0.437) * (b.mass as f64).powf(0.437) / d.powf(0.474);
        let ab = w.observations.iter().find(|o| o.cited_id == a.id).map(|o| o.flow).unwrap_or(0.0);
        assert_eq!(ab, direct.round());
    }

    #[test]
    fn same_seed_same_world() {
        let p = GravityParams::reference(0.3, 99);
        let cfg = WorldConfig::default();
        let a = generate_world(40, &p, &cfg).unwrap();
        let b = generate_world(40, &p, &cfg).unwrap();
        assert_eq!(a.territories, b.territories);
        assert_eq!(a.observations, b.observations);
        let c = generate_world(40, &GravityParams { seed: 100, ..p }, &cfg).unwrap();
        assert_ne!(a.observations, c.observations);
    }

    #[test]
    fn degenerate_inputs_fail() {
        let p = GravityParams::reference(0.0, 1);
        let point = WorldConfig {
            lat_range: (44.0, 44.0),
            lon_range: (11.0, 11.0),
            ..WorldConfig::default()
        };
        assert!(matches!(generate_world(5, &p, &point), Err(SynthError::DegenerateRegion)));
        assert!(matches!(
            generate_world(1, &p, &WorldConfig::default()),
            Err(SynthError::TooFewTerritories(1))
        ));
        let bad = GravityParams { noise_sigma: -1.0, ..p };
        assert!(generate_world(5, &bad, &WorldConfig::default()).is_err());
    }

    #[test]
    fn exact_mode_recovers_parameters() {
        let p = GravityParams::reference(0.0, 3);
        let t = recovery_trial(&p, 60, &WorldConfig::with_mode(CountMode::Exact)).unwrap();
        assert!(t.deltas.max_abs() < 1e-9, "{:?}", t.deltas);
        assert_abs_diff_eq!(t.fit.r2(), 1.0, epsilon = 1e-12);
        let w = generate_world(5, &p, &WorldConfig::with_mode(CountMode::Exact)).unwrap();
        assert!(matches!(w.edges(), Err(SynthError::FractionalFlows)));
    }

    #[test]
    fn expected_flow_monotone_in_mass() {
        let p = GravityParams::reference(0.0, 0);
        let mut last = 0.0;
        for m in [1.0, 10.0, 100.0, 1000.0] {
            let c = p.expected_flow(m, 50.0, 300.0);
            assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn poisson_mode_is_deterministic() {
        let p = GravityParams::reference(0.1, 5);
        let cfg = WorldConfig::with_mode(CountMode::Poisson);
        let a = generate_world(20, &p, &cfg).unwrap();
        let b = generate_world(20, &p, &cfg).unwrap();
        assert_eq!(a.observations, b.observations);
        assert!(a.observations.iter().all(|o| o.flow.fract() == 0.0 && o.flow > 0.0));
    }

    #[test]
    fn gazetteer_output_loads() {
        let p = GravityParams::reference(0.0, 5);
        let w = generate_world(4, &p, &WorldConfig::default()).unwrap();
        let mut buf = Vec::new();
        w.write_gazetteer(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("id,level,name,country_code,lat,lon,alt_names\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
