//! Synthetic data generators and the rotation-sweep benchmark comparing the
//! sensitivity of the coefficient tests against the HSIC baseline.
//!
//! The protocol: draw every coordinate i.i.d. from a 1D Gaussian mixture (so
//! x and y are independent by construction), optionally pre-rotate inside
//! the x block (which preserves independence), then apply a cumulative
//! Givens rotation mixing one x coordinate with one y coordinate and test
//! independence at each angle.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::basis::BasisIndexSet;
use crate::coeffs::VarianceRule;
use crate::error::{Error, Result};
use crate::hsic::{hsic_gamma_test, BandwidthSpec, KernelExponent};
use crate::independence::{scores_for_pair, test_chi2, test_minmax, test_permutation_both};
use crate::ingest::{PairedSample, SampleMatrix};
use crate::scalar::Real;

/// One component of a 1D Gaussian mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent<T> {
    pub weight: T,
    pub mean: T,
    pub std: T,
}

/// A 1D Gaussian mixture; weights must be positive and sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec<T> {
    components: Vec<MixtureComponent<T>>,
}

impl<T: Real> MixtureSpec<T> {
    pub fn new(components: Vec<MixtureComponent<T>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        let mut total = T::zero();
        for c in &components {
            if !(c.weight > T::zero()) {
                return Err(Error::Config("mixture weights must be positive".into()));
            }
            if !(c.std > T::zero()) {
                return Err(Error::Config("mixture stddevs must be positive".into()));
            }
            total += c.weight;
        }
        if (total - T::one()).abs() > T::of(1e-9) {
            return Err(Error::Config(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self { components })
    }

    /// Two equal components at ±1 with σ = 0.5; bimodal marginals that
    /// exercise the rank transform.
    pub fn bimodal_default() -> Self {
        Self {
            components: vec![
                MixtureComponent { weight: T::of(0.5), mean: T::of(-1.0), std: T::of(0.5) },
                MixtureComponent { weight: T::of(0.5), mean: T::of(1.0), std: T::of(0.5) },
            ],
        }
    }

    pub fn components(&self) -> &[MixtureComponent<T>] {
        &self.components
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> T {
        let u = T::of(rng.random::<f64>());
        let mut acc = T::zero();
        let mut chosen = &self.components[self.components.len() - 1];
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        let z: f64 = StandardNormal.sample(rng);
        chosen.mean + chosen.std * T::of(z)
    }
}

/// Draw an n-row paired sample with every coordinate i.i.d. from `spec`;
/// x and y are independent by construction.
pub fn generate_mixture_pair<T: Real>(
    n: usize,
    dims: (usize, usize),
    spec: &MixtureSpec<T>,
    seed: u64,
) -> Result<PairedSample<T>> {
    let (dx, dy) = dims;
    if dx < 1 || dy < 1 {
        return Err(Error::Config("dimensions must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, dx), |_| spec.sample(&mut rng));
    let y = Array2::from_shape_fn((n, dy), |_| spec.sample(&mut rng));
    PairedSample::new(SampleMatrix::new(x, None)?, SampleMatrix::new(y, None)?)
}

/// Apply a Givens rotation by `theta_deg` to two coordinates of the
/// concatenated (x|y) space, then repartition. Plane indices are positions
/// in the concatenation: 0..d_x are x columns, d_x..d_x+d_y are y columns.
pub fn rotate<T: Real>(
    pair: &PairedSample<T>,
    theta_deg: T,
    plane: (usize, usize),
) -> Result<PairedSample<T>> {
    let (dx, dy) = pair.dims();
    let total = dx + dy;
    let (pa, pb) = plane;
    if pa == pb || pa >= total || pb >= total {
        return Err(Error::Config(format!(
            "rotation plane ({pa}, {pb}) invalid for {total} concatenated columns"
        )));
    }
    if theta_deg == T::zero() {
        return Ok(pair.clone());
    }
    let theta = theta_deg * T::of(std::f64::consts::PI / 180.0);
    let (s, c) = (theta.sin(), theta.cos());

    let mut x = pair.x.values().clone();
    let mut y = pair.y.values().clone();
    let n = pair.n();
    for i in 0..n {
        let read = |col: usize, x: &Array2<T>, y: &Array2<T>| {
            if col < dx {
                x[[i, col]]
            } else {
                y[[i, col - dx]]
            }
        };
        let a = read(pa, &x, &y);
        let b = read(pb, &x, &y);
        let (na, nb) = (c * a - s * b, s * a + c * b);
        let mut write = |col: usize, v: T| {
            if col < dx {
                x[[i, col]] = v;
            } else {
                y[[i, col - dx]] = v;
            }
        };
        write(pa, na);
        write(pb, nb);
    }
    PairedSample::new(SampleMatrix::new(x, None)?, SampleMatrix::new(y, None)?)
}

/// Identifier of a test method in the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    HsicGamma,
    HcrChi2,
    HcrPermSumZ2,
    HcrPermMaxZ,
    HcrMinmax,
}

impl MethodId {
    pub const ALL: [MethodId; 5] = [
        MethodId::HsicGamma,
        MethodId::HcrChi2,
        MethodId::HcrPermSumZ2,
        MethodId::HcrPermMaxZ,
        MethodId::HcrMinmax,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MethodId::HsicGamma => "hsic_gamma",
            MethodId::HcrChi2 => "hcr_chi2",
            MethodId::HcrPermSumZ2 => "hcr_perm_sum_z2",
            MethodId::HcrPermMaxZ => "hcr_perm_max_z",
            MethodId::HcrMinmax => "hcr_minmax",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hsic_gamma" => Ok(MethodId::HsicGamma),
            "hcr_chi2" => Ok(MethodId::HcrChi2),
            "hcr_perm_sum_z2" => Ok(MethodId::HcrPermSumZ2),
            "hcr_perm_max_z" => Ok(MethodId::HcrPermMaxZ),
            "hcr_minmax" => Ok(MethodId::HcrMinmax),
            other => Err(Error::Config(format!("unknown method id {other:?}"))),
        }
    }
}

/// Configuration of one rotation sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RotationSweepConfig<T> {
    pub n: usize,
    pub dims: (usize, usize),
    pub delta_theta_deg: T,
    pub max_theta_deg: T,
    pub within_block_deg: T,
    pub m: u32,
    pub b_perm: usize,
    pub alpha: T,
    pub seed: u64,
    pub methods: Vec<MethodId>,
    pub mixture: MixtureSpec<T>,
    /// Plane of the dependence-inducing rotation in concatenated
    /// coordinates; defaults to (d_x - 1, d_x), the last x coordinate
    /// against the first y coordinate.
    pub rotation_plane: Option<(usize, usize)>,
}

impl<T: Real> RotationSweepConfig<T> {
    /// Desk-scale defaults: n = 1000, 2+2 dimensions, Δθ = 0.25° up to 6°,
    /// a 50° independence-preserving pre-rotation, degree 6, B = 400.
    pub fn desk_default(seed: u64) -> Self {
        Self {
            n: 1000,
            dims: (2, 2),
            delta_theta_deg: T::of(0.25),
            max_theta_deg: T::of(6.0),
            within_block_deg: T::of(50.0),
            m: 6,
            b_perm: 400,
            alpha: T::of(0.05),
            seed,
            methods: MethodId::ALL.to_vec(),
            mixture: MixtureSpec::bimodal_default(),
            rotation_plane: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta_theta_deg > T::zero()) {
            return Err(Error::Config("delta theta must be positive".into()));
        }
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return Err(Error::Config("alpha must be in (0, 1)".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method required".into()));
        }
        if self.m < 1 {
            return Err(Error::Config("degree m must be at least 1".into()));
        }
        Ok(())
    }
}

/// One (angle, method) measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow<T> {
    pub theta_deg: T,
    pub method: MethodId,
    pub p_value: T,
}

/// Sweep output: all rows plus the first angle at which each method's
/// p-value dropped below alpha (None if it never did).
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult<T> {
    pub rows: Vec<SweepRow<T>>,
    pub first_reject: BTreeMap<MethodId, Option<T>>,
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 over (seed, salt)
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Run every configured method over the cumulative rotation angles;
/// deterministic given the config.
pub fn run_rotation_sweep<T: Real>(config: &RotationSweepConfig<T>) -> Result<SweepResult<T>> {
    config.validate()?;
    let (dx, dy) = config.dims;
    let base = generate_mixture_pair(config.n, config.dims, &config.mixture, config.seed)?;
    let prepared = if config.within_block_deg != T::zero() {
        if dx < 2 {
            return Err(Error::Config(
                "within-block rotation needs at least two x coordinates".into(),
            ));
        }
        rotate(&base, config.within_block_deg, (0, 1))?
    } else {
        base
    };
    let plane = config.rotation_plane.unwrap_or((dx - 1, dx));

    let steps = (config.max_theta_deg / config.delta_theta_deg)
        .to_f64()
        .map(|s| s.floor() as usize)
        .unwrap_or(0);
    let bx = BasisIndexSet::pairwise(dx, config.m)?;
    let by = BasisIndexSet::pairwise(dy, config.m)?;
    let wants = |m: MethodId| config.methods.contains(&m);

    let per_angle: Result<Vec<Vec<SweepRow<T>>>> = (0..=steps)
        .into_par_iter()
        .map(|step| {
            let theta = config.delta_theta_deg * T::from_count(step);
            let rotated = rotate(&prepared, theta, plane)?;
            let mut rows = Vec::new();
            let angle_seed = mix_seed(config.seed, step as u64 + 1);

            if wants(MethodId::HsicGamma) {
                let r = hsic_gamma_test(
                    &rotated,
                    config.alpha,
                    BandwidthSpec::Median,
                    KernelExponent::Squared,
                    mix_seed(angle_seed, 1),
                )?;
                rows.push(SweepRow { theta_deg: theta, method: MethodId::HsicGamma, p_value: r.p_value });
            }
            if wants(MethodId::HcrChi2) || wants(MethodId::HcrMinmax) {
                let table = scores_for_pair(&rotated, &bx, &by, VarianceRule::Unit)?;
                let z = table.flattened_scores().expect("scores populated");
                if wants(MethodId::HcrChi2) {
                    let r = test_chi2(&z, config.alpha)?;
                    rows.push(SweepRow { theta_deg: theta, method: MethodId::HcrChi2, p_value: r.p_or_pr });
                }
                if wants(MethodId::HcrMinmax) {
                    let r = test_minmax(&z, config.alpha)?;
                    rows.push(SweepRow { theta_deg: theta, method: MethodId::HcrMinmax, p_value: r.p_or_pr });
                }
            }
            if wants(MethodId::HcrPermSumZ2) || wants(MethodId::HcrPermMaxZ) {
                let both = test_permutation_both(
                    &rotated,
                    &bx,
                    &by,
                    VarianceRule::Unit,
                    config.b_perm,
                    mix_seed(angle_seed, 2),
                    config.alpha,
                )?;
                if wants(MethodId::HcrPermSumZ2) {
                    rows.push(SweepRow {
                        theta_deg: theta,
                        method: MethodId::HcrPermSumZ2,
                        p_value: both.sum_z2.p_or_pr,
                    });
                }
                if wants(MethodId::HcrPermMaxZ) {
                    rows.push(SweepRow {
                        theta_deg: theta,
                        method: MethodId::HcrPermMaxZ,
                        p_value: both.max_abs_z.p_or_pr,
                    });
                }
            }
            Ok(rows)
        })
        .collect();

    let rows: Vec<SweepRow<T>> = per_angle?.into_iter().flatten().collect();
    let mut first_reject: BTreeMap<MethodId, Option<T>> =
        config.methods.iter().map(|&m| (m, None)).collect();
    for row in &rows {
        if row.p_value < config.alpha {
            let slot = first_reject.entry(row.method).or_insert(None);
            match slot {
                Some(existing) if *existing <= row.theta_deg => {}
                _ => *slot = Some(row.theta_deg),
            }
        }
    }
    Ok(SweepResult { rows, first_reject })
}

impl<T: Real> SweepResult<T> {
    /// Rows as CSV: theta_deg, method, p_value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["theta_deg", "method", "p_value"])?;
        for row in &self.rows {
            w.write_record([
                format!("{}", row.theta_deg),
                row.method.to_string(),
                format!("{}", row.p_value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON summary with the first-reject angle per method.
    pub fn json_summary(&self, config: &RotationSweepConfig<T>) -> serde_json::Value
    where
        T: Serialize,
    {
        let first: BTreeMap<String, serde_json::Value> = self
            .first_reject
            .iter()
            .map(|(m, v)| {
                (
                    m.to_string(),
                    v.map_or(serde_json::Value::Null, |t| json!(t.to_f64().unwrap_or(f64::NAN))),
                )
            })
            .collect();
        json!({
            "schema": 1,
            "config": config,
            "first_reject": first,
            "rows": self.rows.len(),
        })
    }

    /// Gnuplot-friendly matrix: one row per angle, one column per method.
    pub fn write_gnuplot<W: Write>(&self, mut writer: W) -> Result<()> {
        let mut methods: Vec<MethodId> = self.first_reject.keys().copied().collect();
        methods.sort();
        write!(writer, "# theta_deg")?;
        for m in &methods {
            write!(writer, " {m}")?;
        }
        writeln!(writer)?;
        let mut angles: Vec<T> = self.rows.iter().map(|r| r.theta_deg).collect();
        angles.sort_by(|a, b| a.partial_cmp(b).expect("finite angles"));
        angles.dedup();
        for theta in angles {
            write!(writer, "{theta}")?;
            for m in &methods {
                let p = self
                    .rows
                    .iter()
                    .find(|r| r.theta_deg == theta && r.method == *m)
                    .map(|r| r.p_value);
                match p {
                    Some(p) => write!(writer, " {p}")?,
                    None => write!(writer, " nan")?,
                }
            }
            writeln!(writer)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_weights_validated() {
        let bad = MixtureSpec::new(vec![
            MixtureComponent { weight: 0.5f64, mean: 0.0, std: 1.0 },
            MixtureComponent { weight: 0.6, mean: 1.0, std: 1.0 },
        ]);
        assert!(matches!(bad, Err(Error::Config(_))));
        assert!(MixtureSpec::<f64>::new(vec![MixtureComponent {
            weight: 1.0,
            mean: 0.0,
            std: 2.0
        }])
        .is_ok());
    }

    #[test]
    fn single_component_mixture_is_plain_gaussian() {
        let spec = MixtureSpec::new(vec![MixtureComponent { weight: 1.0f64, mean: 3.0, std: 0.5 }])
            .unwrap();
        let pair = generate_mixture_pair(4000, (1, 1), &spec, 7).unwrap();
        let mean: f64 = pair.x.column(0).iter().sum::<f64>() / 4000.0;
        let var: f64 =
            pair.x.column(0).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3999.0;
        assert!((mean - 3.0).abs() < 0.05, "mean {mean}");
        assert!((var - 0.25).abs() < 0.05, "var {var}");
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = MixtureSpec::bimodal_default();
        let a = generate_mixture_pair::<f64>(50, (2, 2), &spec, 9).unwrap();
        let b = generate_mixture_pair::<f64>(50, (2, 2), &spec, 9).unwrap();
        assert_eq!(a.x.values(), b.x.values());
        assert_eq!(a.y.values(), b.y.values());
    }

    #[test]
    fn zero_rotation_is_bitwise_identity() {
        let spec = MixtureSpec::bimodal_default();
        let pair = generate_mixture_pair::<f64>(30, (2, 2), &spec, 1).unwrap();
        let rotated = rotate(&pair, 0.0, (1, 2)).unwrap();
        assert_eq!(pair.x.values(), rotated.x.values());
        assert_eq!(pair.y.values(), rotated.y.values());
    }

    #[test]
    fn full_turn_recovers_input() {
        let spec = MixtureSpec::bimodal_default();
        let pair = generate_mixture_pair::<f64>(30, (1, 1), &spec, 2).unwrap();
        let rotated = rotate(&pair, 360.0, (0, 1)).unwrap();
        for i in 0..30 {
            assert!((pair.x.values()[[i, 0]] - rotated.x.values()[[i, 0]]).abs() < 1e-12);
            assert!((pair.y.values()[[i, 0]] - rotated.y.values()[[i, 0]]).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_inverse_roundtrip() {
        let spec = MixtureSpec::bimodal_default();
        let pair = generate_mixture_pair::<f64>(40, (2, 2), &spec, 3).unwrap();
        let there = rotate(&pair, 33.0, (1, 2)).unwrap();
        let back = rotate(&there, -33.0, (1, 2)).unwrap();
        for ((i, j), v) in pair.x.values().indexed_iter() {
            assert!((v - back.x.values()[[i, j]]).abs() < 1e-12);
        }
        for ((i, j), v) in pair.y.values().indexed_iter() {
            assert!((v - back.y.values()[[i, j]]).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_plane_rejected() {
        let spec = MixtureSpec::bimodal_default();
        let pair = generate_mixture_pair::<f64>(20, (1, 1), &spec, 4).unwrap();
        assert!(matches!(rotate(&pair, 5.0, (0, 0)), Err(Error::Config(_))));
        assert!(matches!(rotate(&pair, 5.0, (0, 2)), Err(Error::Config(_))));
    }

    #[test]
    fn method_ids_roundtrip() {
        for m in MethodId::ALL {
            assert_eq!(m.as_str().parse::<MethodId>().unwrap(), m);
        }
        assert!("nope".parse::<MethodId>().is_err());
    }

    #[test]
    fn small_sweep_is_deterministic_and_monotone_logged() {
        let mut config = RotationSweepConfig::<f64>::desk_default(5);
        config.n = 250;
        config.b_perm = 100;
        config.delta_theta_deg = 2.0;
        config.max_theta_deg = 4.0;
        config.m = 4;
        config.methods = vec![MethodId::HcrChi2, MethodId::HcrPermMaxZ];
        let a = run_rotation_sweep(&config).unwrap();
        let b = run_rotation_sweep(&config).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        for (ra, rb) in a.rows.iter().zip(b.rows.iter()) {
            assert_eq!(ra.p_value.to_bits(), rb.p_value.to_bits());
        }
        // 3 angles x 2 methods
        assert_eq!(a.rows.len(), 6);
    }

    #[test]
    fn first_reject_is_smallest_rejecting_angle() {
        let rows = vec![
            SweepRow { theta_deg: 0.0f64, method: MethodId::HcrChi2, p_value: 0.8 },
            SweepRow { theta_deg: 1.0, method: MethodId::HcrChi2, p_value: 0.01 },
            SweepRow { theta_deg: 2.0, method: MethodId::HcrChi2, p_value: 0.001 },
        ];
        let mut config = RotationSweepConfig::<f64>::desk_default(1);
        config.methods = vec![MethodId::HcrChi2];
        let mut first_reject = BTreeMap::new();
        first_reject.insert(MethodId::HcrChi2, None);
        let mut result = SweepResult { rows, first_reject };
        for row in &result.rows.clone() {
            if row.p_value < config.alpha {
                let slot = result.first_reject.entry(row.method).or_insert(None);
                match slot {
                    Some(existing) if *existing <= row.theta_deg => {}
                    _ => *slot = Some(row.theta_deg),
                }
            }
        }
        assert_eq!(result.first_reject[&MethodId::HcrChi2], Some(1.0));
    }

    #[test]
    fn csv_and_gnuplot_outputs() {
        let result = SweepResult {
            rows: vec![
                SweepRow { theta_deg: 0.0f64, method: MethodId::HcrChi2, p_value: 0.5 },
                SweepRow { theta_deg: 0.0, method: MethodId::HsicGamma, p_value: 0.25 },
                SweepRow { theta_deg: 0.25, method: MethodId::HcrChi2, p_value: 0.125 },
                SweepRow { theta_deg: 0.25, method: MethodId::HsicGamma, p_value: 0.0625 },
            ],
            first_reject: BTreeMap::from([
                (MethodId::HcrChi2, None),
                (MethodId::HsicGamma, Some(0.25f64)),
            ]),
        };
        let mut csv_out = Vec::new();
        result.write_csv(&mut csv_out).unwrap();
        let text = String::from_utf8(csv_out).unwrap();
        assert!(text.starts_with("theta_deg,method,p_value\n"));
        assert!(text.contains("0.25,hcr_chi2,0.125"));

        let mut gp = Vec::new();
        result.write_gnuplot(&mut gp).unwrap();
        let text = String::from_utf8(gp).unwrap();
        assert!(text.starts_with("# theta_deg hsic_gamma hcr_chi2\n"));
        assert!(text.contains("0.25 0.0625 0.125"));
    }
}
