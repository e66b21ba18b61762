//! Simultaneous nonlinear least-squares extraction of the hyperfine
//! principal values and orientation angle from multi-field, multi-axis
//! resonance data, with peak assignment re-solved inside the residual.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::Serialize;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::field::MagneticField;
use crate::orientations;
use crate::spectra;
use crate::tensor::HyperfineTensor;

/// One observed resonance: field setpoint, frequency, uncertainty and
/// optional subset / transition-pair hints carried through from the data
/// file (informational; the fit re-derives assignments itself).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceRecord {
    pub field_t: Vector3<f64>,
    pub freq_mhz: f64,
    pub sigma_mhz: f64,
    pub subset: Option<String>,
    pub pair: Option<String>,
}

/// Observed transition frequencies with field setpoints and uncertainties.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ResonanceDataset {
    pub records: Vec<ResonanceRecord>,
}

impl ResonanceDataset {
    /// Parse the CSV format
    /// `Bx_T,By_T,Bz_T,freq_MHz,sigma_MHz[,subset][,pair]` (header required,
    /// `#` comments allowed, UTF-8).
    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        {
            let headers = rdr.headers()?;
            let expect = ["Bx_T", "By_T", "Bz_T", "freq_MHz", "sigma_MHz"];
            if headers.len() < 5 {
                return Err(Error::Dataset(format!(
                    "header has {} columns, expected at least 5 ({})",
                    headers.len(),
                    expect.join(",")
                )));
            }
            for (got, want) in headers.iter().zip(expect.iter()) {
                if !got.eq_ignore_ascii_case(want) {
                    return Err(Error::Dataset(format!(
                        "unexpected header column {got:?}, expected {want:?}"
                    )));
                }
            }
        }
        let mut records = Vec::new();
        for (line, row) in rdr.records().enumerate() {
            let row = row?;
            let get = |k: usize, name: &str| -> Result<f64> {
                row.get(k)
                    .ok_or_else(|| Error::Dataset(format!("record {line}: missing {name}")))?
                    .parse::<f64>()
                    .map_err(|e| Error::Dataset(format!("record {line}: bad {name}: {e}")))
            };
            let rec = ResonanceRecord {
                field_t: Vector3::new(get(0, "Bx_T")?, get(1, "By_T")?, get(2, "Bz_T")?),
                freq_mhz: get(3, "freq_MHz")?,
                sigma_mhz: get(4, "sigma_MHz")?,
                subset: row.get(5).filter(|s| !s.is_empty()).map(str::to_owned),
                pair: row.get(6).filter(|s| !s.is_empty()).map(str::to_owned),
            };
            if !(rec.sigma_mhz > 0.0) {
                return Err(Error::Dataset(format!(
                    "record {line}: sigma_MHz must be positive, got {}",
                    rec.sigma_mhz
                )));
            }
            records.push(rec);
        }
        Ok(ResonanceDataset { records })
    }

    pub fn to_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["Bx_T", "By_T", "Bz_T", "freq_MHz", "sigma_MHz", "subset", "pair"])?;
        for r in &self.records {
            wtr.write_record([
                format!("{:.12e}", r.field_t.x),
                format!("{:.12e}", r.field_t.y),
                format!("{:.12e}", r.field_t.z),
                format!("{:.9}", r.freq_mhz),
                format!("{:.9}", r.sigma_mhz),
                r.subset.clone().unwrap_or_default(),
                r.pair.clone().unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Well-posedness precheck: at least 8 records spanning at least two
    /// field directions.
    pub fn validate(&self) -> Result<()> {
        if self.records.len() < 8 {
            return Err(Error::Dataset(format!(
                "{} records; a well-posed fit needs at least 8",
                self.records.len()
            )));
        }
        let mut dirs: Vec<Vector3<f64>> = Vec::new();
        for r in &self.records {
            let n = r.field_t.norm();
            if n == 0.0 {
                continue;
            }
            let d = r.field_t / n;
            if !dirs.iter().any(|k| (k - d).norm() < 1e-9 || (k + d).norm() < 1e-9) {
                dirs.push(d);
            }
        }
        if dirs.len() < 2 {
            return Err(Error::Dataset(
                "records span fewer than 2 field directions".into(),
            ));
        }
        Ok(())
    }
}

/// One-to-one matching between predicted and observed frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// (predicted index, observed index) pairs, in ascending observed order.
    pub pairs: Vec<(usize, usize)>,
    /// Observed indices left unmatched (only when there are more
    /// observations than predictions).
    pub unmatched_observed: Vec<usize>,
    /// Total |predicted - observed| over the matched pairs, MHz.
    pub total_cost_mhz: f64,
}

/// Minimum-total-|df| one-to-one matching covering the smaller list.
///
/// For absolute-difference costs on a line an optimal assignment exists
/// that is monotone (non-crossing), so the bipartite problem reduces to a
/// sequence-alignment DP over the two sorted lists. Ties break toward the
/// lower predicted frequency.
pub fn assign_peaks(predicted_mhz: &[f64], observed_mhz: &[f64]) -> Assignment {
    let mut pred_idx: Vec<usize> = (0..predicted_mhz.len()).collect();
    pred_idx.sort_by(|&a, &b| predicted_mhz[a].total_cmp(&predicted_mhz[b]));
    let mut obs_idx: Vec<usize> = (0..observed_mhz.len()).collect();
    obs_idx.sort_by(|&a, &b| observed_mhz[a].total_cmp(&observed_mhz[b]));
    let pred_sorted: Vec<f64> = pred_idx.iter().map(|&i| predicted_mhz[i]).collect();
    let obs_sorted: Vec<f64> = obs_idx.iter().map(|&i| observed_mhz[i]).collect();

    let obs_into_pred = observed_mhz.len() <= predicted_mhz.len();
    let (small, large) = if obs_into_pred {
        (&obs_sorted, &pred_sorted)
    } else {
        (&pred_sorted, &obs_sorted)
    };

    let (ns, nl) = (small.len(), large.len());
    // dp[i][j]: min cost matching the first i of `small` into the first j
    // of `large`.
    let inf = f64::INFINITY;
    let mut dp = vec![vec![inf; nl + 1]; ns + 1];
    for j in 0..=nl {
        dp[0][j] = 0.0;
    }
    for i in 1..=ns {
        for j in i..=nl {
            let matched = dp[i - 1][j - 1] + (small[i - 1] - large[j - 1]).abs();
            let skipped = dp[i][j - 1];
            dp[i][j] = matched.min(skipped);
        }
    }
    // Traceback, preferring to skip the later `large` entry on ties so a
    // point equidistant between two candidates matches the earlier one.
    let mut pairs_sorted: Vec<(usize, usize)> = Vec::with_capacity(ns);
    let (mut i, mut j) = (ns, nl);
    while i > 0 {
        if j > i && dp[i][j - 1] <= dp[i - 1][j - 1] + (small[i - 1] - large[j - 1]).abs() {
            j -= 1;
        } else {
            pairs_sorted.push((i - 1, j - 1));
            i -= 1;
            j -= 1;
        }
    }
    pairs_sorted.reverse();

    let mut pairs: Vec<(usize, usize)> = pairs_sorted
        .iter()
        .map(|&(si, li)| {
            if obs_into_pred {
                (pred_idx[li], obs_idx[si])
            } else {
                (pred_idx[si], obs_idx[li])
            }
        })
        .collect();
    pairs.sort_by(|a, b| observed_mhz[a.1].total_cmp(&observed_mhz[b.1]));
    let total_cost_mhz = pairs
        .iter()
        .map(|&(p, o)| (predicted_mhz[p] - observed_mhz[o]).abs())
        .sum();
    let matched_obs: std::collections::BTreeSet<usize> = pairs.iter().map(|&(_, o)| o).collect();
    let unmatched_observed = (0..observed_mhz.len())
        .filter(|o| !matched_obs.contains(o))
        .collect();
    Assignment {
        pairs,
        unmatched_observed,
        total_cost_mhz,
    }
}

/// Which Euler angles are free in the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EulerMode {
    /// Fit gamma only, alpha and beta fixed (default). This pins the
    /// principal Z axis normal to the defect plane, matching the
    /// symmetry-constrained extraction.
    GammaOnly,
    /// Fit all three Euler angles. The cubic orientation orbit makes this
    /// parameterization gauge-redundant; use with care.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitOptions {
    pub mode: EulerMode,
    pub max_iterations: usize,
    /// Relative cost-decrease tolerance for convergence.
    pub relative_tolerance: f64,
    /// Fixed (alpha, beta) used in GammaOnly mode, degrees.
    pub alpha_beta_deg: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            mode: EulerMode::GammaOnly,
            max_iterations: 200,
            relative_tolerance: 1e-12,
            alpha_beta_deg: (135.0, 90.0),
        }
    }
}

/// An alternative parameter set producing an identical residual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerateSolution {
    pub tensor: HyperfineTensor,
    pub residual_rms_mhz: f64,
}

/// Converged fit: tensor, 1-sigma uncertainties, covariance, and the
/// gamma-degenerate mirror solution. The gamma degeneracy is not resolved
/// automatically; resolving it requires defect-geometry input (the
/// positive principal axis points from the bound electron site toward the
/// hydrogen nucleus).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub tensor: HyperfineTensor,
    pub parameter_names: Vec<String>,
    pub parameters: Vec<f64>,
    /// 1-sigma uncertainties (reduced-chi-square scaled), same order.
    pub sigmas: Vec<f64>,
    /// Parameter covariance matrix, row-major, same order.
    pub covariance: Vec<Vec<f64>>,
    pub residual_rms_mhz: f64,
    pub reduced_chi_square: f64,
    pub iterations: usize,
    pub n_residuals: usize,
    pub degenerate_solutions: Vec<DegenerateSolution>,
}

impl FitResult {
    pub fn principal_sigmas_mhz(&self) -> [f64; 3] {
        [self.sigmas[0], self.sigmas[1], self.sigmas[2]]
    }

    pub fn gamma_sigma_deg(&self) -> f64 {
        *self.sigmas.last().unwrap()
    }
}

fn normalize_deg(a: f64) -> f64 {
    let mut x = a % 360.0;
    if x <= -180.0 {
        x += 360.0;
    }
    if x > 180.0 {
        x -= 360.0;
    }
    x
}

struct FieldGroup {
    field: MagneticField,
    observed_mhz: Vec<f64>,
    sigma_mhz: Vec<f64>,
}

struct FitProblem {
    groups: Vec<FieldGroup>,
    consts: PhysicalConstants,
    options: FitOptions,
    orientation_set: Vec<orientations::OrientationId>,
    n_residuals: usize,
}

impl FitProblem {
    fn new(data: &ResonanceDataset, consts: &PhysicalConstants, options: FitOptions) -> Self {
        // Group records by field setpoint (exact bit pattern, -0 folded to 0)
        // so the grouping is independent of record order.
        let mut map: BTreeMap<[u64; 3], Vec<usize>> = BTreeMap::new();
        for (k, r) in data.records.iter().enumerate() {
            let key = [
                (r.field_t.x + 0.0).to_bits(),
                (r.field_t.y + 0.0).to_bits(),
                (r.field_t.z + 0.0).to_bits(),
            ];
            map.entry(key).or_default().push(k);
        }
        let mut groups = Vec::with_capacity(map.len());
        let mut n_residuals = 0;
        for idx in map.into_values() {
            let mut rows: Vec<(f64, f64)> = idx
                .iter()
                .map(|&k| (data.records[k].freq_mhz, data.records[k].sigma_mhz))
                .collect();
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            n_residuals += rows.len();
            groups.push(FieldGroup {
                field: MagneticField::new(data.records[idx[0]].field_t),
                observed_mhz: rows.iter().map(|r| r.0).collect(),
                sigma_mhz: rows.iter().map(|r| r.1).collect(),
            });
        }
        FitProblem {
            groups,
            consts: *consts,
            options,
            orientation_set: orientations::orientation_set(),
            n_residuals,
        }
    }

    fn tensor_from_params(&self, p: &[f64]) -> HyperfineTensor {
        match self.options.mode {
            EulerMode::GammaOnly => HyperfineTensor::new(
                [p[0], p[1], p[2]],
                [
                    self.options.alpha_beta_deg.0,
                    self.options.alpha_beta_deg.1,
                    normalize_deg(p[3]),
                ],
            ),
            EulerMode::Full => HyperfineTensor::new(
                [p[0], p[1], p[2]],
                [normalize_deg(p[3]), normalize_deg(p[4]), normalize_deg(p[5])],
            ),
        }
    }

    fn parameter_names(&self) -> Vec<String> {
        match self.options.mode {
            EulerMode::GammaOnly => vec![
                "A_X_MHz".into(),
                "A_Y_MHz".into(),
                "A_Z_MHz".into(),
                "gamma_deg".into(),
            ],
            EulerMode::Full => vec![
                "A_X_MHz".into(),
                "A_Y_MHz".into(),
                "A_Z_MHz".into(),
                "alpha_deg".into(),
                "beta_deg".into(),
                "gamma_deg".into(),
            ],
        }
    }

    /// Predicted line positions at one field: all six transitions of all
    /// twelve orientation classes, unsorted.
    fn predicted_lines(&self, tensor: &HyperfineTensor, field: &MagneticField) -> Result<Vec<f64>> {
        let mut lines = Vec::with_capacity(72);
        for id in &self.orientation_set {
            let m = orientations::tensor_for_orientation(tensor, id);
            let list = spectra::transition_frequencies(field, &m, &self.consts)?;
            lines.extend(list.frequencies_mhz());
        }
        Ok(lines)
    }

    /// Weighted residual vector (observed - assigned prediction) / sigma.
    fn residuals(&self, p: &[f64]) -> Result<DVector<f64>> {
        let tensor = self.tensor_from_params(p);
        let mut out = Vec::with_capacity(self.n_residuals);
        for g in &self.groups {
            let predicted = self.predicted_lines(&tensor, &g.field)?;
            let assignment = assign_peaks(&predicted, &g.observed_mhz);
            let mut matched: Vec<Option<usize>> = vec![None; g.observed_mhz.len()];
            for &(pi, oi) in &assignment.pairs {
                matched[oi] = Some(pi);
            }
            for (oi, m) in matched.iter().enumerate() {
                match m {
                    Some(pi) => {
                        out.push((g.observed_mhz[oi] - predicted[*pi]) / g.sigma_mhz[oi]);
                    }
                    // Over-complete observation lists are flagged upstream;
                    // they carry no weight in the cost.
                    None => out.push(0.0),
                }
            }
        }
        Ok(DVector::from_vec(out))
    }

    fn cost(&self, p: &[f64]) -> Result<f64> {
        Ok(self.residuals(p)?.norm_squared())
    }

    /// Central finite-difference Jacobian of the weighted residuals.
    fn jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n_residuals;
        let np = p.len();
        let mut j = DMatrix::zeros(n, np);
        for k in 0..np {
            let h = 1e-6 * p[k].abs().max(1.0);
            let mut hi = p.to_vec();
            hi[k] += h;
            let mut lo = p.to_vec();
            lo[k] -= h;
            let rhi = self.residuals(&hi)?;
            let rlo = self.residuals(&lo)?;
            j.set_column(k, &((rhi - rlo) / (2.0 * h)));
        }
        Ok(j)
    }
}

/// Rank check of the normal matrix; returns the unconstrained directions.
fn null_directions(jtj: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let eig = nalgebra::SymmetricEigen::new(jtj.clone());
    let max_eig = eig.eigenvalues.iter().fold(0.0f64, |m, &w| m.max(w.abs()));
    let mut dirs = Vec::new();
    for (k, &w) in eig.eigenvalues.iter().enumerate() {
        if w.abs() <= 1e-12 * max_eig.max(1e-300) {
            let v = eig.eigenvectors.column(k);
            let mut parts: Vec<(f64, &str)> = names
                .iter()
                .enumerate()
                .map(|(i, n)| (v[i].abs(), n.as_str()))
                .collect();
            parts.sort_by(|a, b| b.0.total_cmp(&a.0));
            let dominant: Vec<&str> = parts
                .iter()
                .filter(|(w, _)| *w > 0.4)
                .map(|(_, n)| *n)
                .collect();
            dirs.push(if dominant.is_empty() {
                format!("mixed({})", names.join("+"))
            } else {
                dominant.join("+")
            });
        }
    }
    dirs
}

/// Fit the tensor to a dataset. `init` seeds the optimizer; when absent the
/// default initialization derives principal-value candidates from the
/// zero-field transitions via the closed-form quarter-sum relations and
/// scans gamma coarsely.
pub fn fit_tensor(
    data: &ResonanceDataset,
    init: Option<HyperfineTensor>,
    options: FitOptions,
    consts: &PhysicalConstants,
) -> Result<FitResult> {
    data.validate()?;
    let problem = FitProblem::new(data, consts, options);
    let names = problem.parameter_names();

    let init = match init {
        Some(t) => t,
        None => default_initialization(data, &options, consts)?,
    };
    let mut p: Vec<f64> = match options.mode {
        EulerMode::GammaOnly => vec![
            init.principal_mhz[0],
            init.principal_mhz[1],
            init.principal_mhz[2],
            init.euler_deg[2],
        ],
        EulerMode::Full => {
            let mut v = init.principal_mhz.to_vec();
            v.extend_from_slice(&init.euler_deg);
            v
        }
    };

    // Damped least squares with multiplicative trust-region style damping:
    // accepted steps must not increase the cost.
    let mut cost = problem.cost(&p)?;
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut jacobian = problem.jacobian(&p)?;

    {
        let jtj = jacobian.transpose() * &jacobian;
        let dirs = null_directions(&jtj, &names);
        if !dirs.is_empty() {
            return Err(Error::Underdetermined { directions: dirs });
        }
    }

    let mut converged = false;
    while iterations < options.max_iterations {
        iterations += 1;
        let jtj = jacobian.transpose() * &jacobian;
        let r = problem.residuals(&p)?;
        let g = jacobian.transpose() * &r;

        let mut accepted = false;
        for _ in 0..40 {
            let mut damped = jtj.clone();
            for k in 0..p.len() {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-30);
            }
            let step = match damped.clone().lu().solve(&(-&g)) {
                Some(s) => s,
                None => {
                    lambda *= 8.0;
                    continue;
                }
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
            let trial_cost = problem.cost(&trial)?;
            if trial_cost <= cost {
                let decrease = cost - trial_cost;
                p = trial;
                let rel = decrease / cost.max(1e-300);
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-14);
                accepted = true;
                if rel < options.relative_tolerance || cost < 1e-28 {
                    converged = true;
                }
                break;
            }
            lambda *= 8.0;
            if lambda > 1e14 {
                break;
            }
        }
        if !accepted {
            // No downhill step exists at any damping: at a (possibly flat)
            // minimum.
            converged = true;
        }
        if converged {
            break;
        }
        jacobian = problem.jacobian(&p)?;
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations,
            best_cost: cost,
        });
    }

    jacobian = problem.jacobian(&p)?;
    let jtj = jacobian.transpose() * &jacobian;
    let dirs = null_directions(&jtj, &names);
    if !dirs.is_empty() {
        return Err(Error::Underdetermined { directions: dirs });
    }

    let n = problem.n_residuals;
    let dof = n.saturating_sub(p.len()).max(1) as f64;
    let reduced_chi_square = cost / dof;
    let cov = jtj
        .clone()
        .try_inverse()
        .ok_or(Error::Underdetermined {
            directions: names.clone(),
        })?
        .scale(reduced_chi_square);
    let sigmas: Vec<f64> = (0..p.len()).map(|k| cov[(k, k)].max(0.0).sqrt()).collect();

    // Unweighted residual RMS in MHz.
    let tensor = problem.tensor_from_params(&p);
    let residual_rms_mhz = {
        let mut ss = 0.0;
        let mut count = 0usize;
        for g in &problem.groups {
            let predicted = problem.predicted_lines(&tensor, &g.field)?;
            let assignment = assign_peaks(&predicted, &g.observed_mhz);
            for &(pi, oi) in &assignment.pairs {
                ss += (predicted[pi] - g.observed_mhz[oi]).powi(2);
                count += 1;
            }
        }
        (ss / count.max(1) as f64).sqrt()
    };

    // The cubic orbit cannot distinguish gamma from gamma - 90 degrees:
    // report the mirror solution alongside.
    let mut degenerate_solutions = Vec::new();
    {
        let mut mirror_p = p.clone();
        let gamma_index = mirror_p.len() - 1;
        mirror_p[gamma_index] = normalize_deg(mirror_p[gamma_index] - 90.0);
        let mirror_tensor = problem.tensor_from_params(&mirror_p);
        let mirror_cost = problem.cost(&mirror_p)?;
        let mut ss = 0.0;
        let mut count = 0usize;
        for g in &problem.groups {
            let predicted = problem.predicted_lines(&mirror_tensor, &g.field)?;
            let assignment = assign_peaks(&predicted, &g.observed_mhz);
            for &(pi, oi) in &assignment.pairs {
                ss += (predicted[pi] - g.observed_mhz[oi]).powi(2);
                count += 1;
            }
        }
        let _ = mirror_cost;
        degenerate_solutions.push(DegenerateSolution {
            tensor: mirror_tensor,
            residual_rms_mhz: (ss / count.max(1) as f64).sqrt(),
        });
    }

    Ok(FitResult {
        tensor,
        parameter_names: names,
        parameters: p,
        sigmas,
        covariance: (0..cov.nrows())
            .map(|i| (0..cov.ncols()).map(|j| cov[(i, j)]).collect())
            .collect(),
        residual_rms_mhz,
        reduced_chi_square,
        iterations,
        n_residuals: n,
        degenerate_solutions,
    })
}

/// Evaluate the weighted cost of an arbitrary tensor against a dataset.
pub fn evaluate_cost(
    data: &ResonanceDataset,
    tensor: &HyperfineTensor,
    options: FitOptions,
    consts: &PhysicalConstants,
) -> Result<f64> {
    let problem = FitProblem::new(data, consts, options);
    let mut p = tensor.principal_mhz.to_vec();
    match options.mode {
        EulerMode::GammaOnly => p.push(tensor.euler_deg[2]),
        EulerMode::Full => p.extend_from_slice(&tensor.euler_deg),
    }
    problem.cost(&p)
}

/// Default initialization from the zero-field transition structure.
///
/// The four zero-field levels are quarter-sums of the principal values, so
/// the three transitions from the lowest level determine the principal
/// values up to the assignment of levels to sign triples; every assignment
/// is tried against the data together with a coarse gamma grid, and the
/// cheapest candidate wins.
pub fn default_initialization(
    data: &ResonanceDataset,
    options: &FitOptions,
    consts: &PhysicalConstants,
) -> Result<HyperfineTensor> {
    let mut zero_field: Vec<f64> = data
        .records
        .iter()
        .filter(|r| r.field_t.norm() == 0.0)
        .map(|r| r.freq_mhz)
        .collect();
    zero_field.sort_by(f64::total_cmp);
    // Distinct frequencies (1 kHz clustering), largest three.
    let mut distinct: Vec<f64> = Vec::new();
    for f in zero_field {
        if distinct.last().map_or(true, |l| (f - l).abs() > 1e-3) {
            distinct.push(f);
        }
    }
    if distinct.is_empty() {
        return Err(Error::Dataset(
            "default initialization needs zero-field records; pass an explicit initial tensor"
                .into(),
        ));
    }
    while distinct.len() < 3 {
        // Degenerate structure (isotropic-like): duplicate the top line.
        let top = *distinct.last().unwrap();
        distinct.push(top);
    }
    let top3: Vec<f64> = distinct[distinct.len() - 3..].to_vec();
    let lowest = -(top3[0] + top3[1] + top3[2]) / 4.0;
    let levels = [lowest, lowest + top3[0], lowest + top3[1], lowest + top3[2]];

    // Level k corresponds to one of the sign triples; principal values
    // follow from pairwise sums: X = 2(e1 + e3), Y = 2(e2 + e3),
    // Z = 2(e1 + e2) for triples t1=(+,-,+), t2=(-,+,+), t3=(+,+,-).
    let mut candidates: Vec<[f64; 3]> = Vec::new();
    let perms4 = [
        [0usize, 1, 2, 3],
        [0, 1, 3, 2],
        [0, 2, 1, 3],
        [0, 2, 3, 1],
        [0, 3, 1, 2],
        [0, 3, 2, 1],
        [1, 0, 2, 3],
        [1, 0, 3, 2],
        [1, 2, 0, 3],
        [1, 2, 3, 0],
        [1, 3, 0, 2],
        [1, 3, 2, 0],
        [2, 0, 1, 3],
        [2, 0, 3, 1],
        [2, 1, 0, 3],
        [2, 1, 3, 0],
        [2, 3, 0, 1],
        [2, 3, 1, 0],
        [3, 0, 1, 2],
        [3, 0, 2, 1],
        [3, 1, 0, 2],
        [3, 1, 2, 0],
        [3, 2, 0, 1],
        [3, 2, 1, 0],
    ];
    for perm in perms4 {
        let e1 = levels[perm[0]];
        let e2 = levels[perm[1]];
        let e3 = levels[perm[2]];
        let cand = [2.0 * (e1 + e3), 2.0 * (e2 + e3), 2.0 * (e1 + e2)];
        if !candidates
            .iter()
            .any(|c| c.iter().zip(cand.iter()).all(|(a, b)| (a - b).abs() < 1e-12))
        {
            candidates.push(cand);
        }
    }

    // Score candidates on a subset of the data (the strongest-field group
    // of each direction) over a coarse gamma grid.
    let mut best: Option<(f64, HyperfineTensor)> = None;
    let subset = strongest_field_subset(data);
    for cand in &candidates {
        let mut gamma = -88.0;
        while gamma < 2.0 {
            let t = HyperfineTensor::new(
                *cand,
                [options.alpha_beta_deg.0, options.alpha_beta_deg.1, gamma],
            );
            let cost = evaluate_cost(&subset, &t, *options, consts)?;
            if best.as_ref().map_or(true, |(c, _)| cost < *c) {
                best = Some((cost, t));
            }
            gamma += 4.0;
        }
    }
    Ok(best.expect("candidate list is nonempty").1)
}

fn strongest_field_subset(data: &ResonanceDataset) -> ResonanceDataset {
    let mut best_per_dir: Vec<(Vector3<f64>, f64)> = Vec::new();
    for r in &data.records {
        let n = r.field_t.norm();
        if n == 0.0 {
            continue;
        }
        let d = r.field_t / n;
        match best_per_dir
            .iter_mut()
            .find(|(k, _)| (*k - d).norm() < 1e-9 || (*k + d).norm() < 1e-9)
        {
            Some((_, mag)) => *mag = mag.max(n),
            None => best_per_dir.push((d, n)),
        }
    }
    let records = data
        .records
        .iter()
        .filter(|r| {
            let n = r.field_t.norm();
            if n == 0.0 {
                return false;
            }
            let d = r.field_t / n;
            best_per_dir
                .iter()
                .any(|(k, mag)| ((k - d).norm() < 1e-9 || (k + d).norm() < 1e-9) && (n - mag).abs() < 1e-15)
        })
        .cloned()
        .collect();
    ResonanceDataset { records }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_assignment() {
        let p = [1.0, 2.0, 3.0];
        let a = assign_peaks(&p, &p);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(a.total_cost_mhz, 0.0);
        assert!(a.unmatched_observed.is_empty());
    }

    #[test]
    fn spec_example_matching() {
        let predicted = [3.48, 3.71, 4.27];
        let observed = [4.26, 3.49];
        let a = assign_peaks(&predicted, &observed);
        assert_eq!(a.pairs.len(), 2);
        assert!(a.pairs.contains(&(0, 1)), "3.49 matches 3.48");
        assert!(a.pairs.contains(&(2, 0)), "4.26 matches 4.27");
        assert!((a.total_cost_mhz - 0.02).abs() < 1e-12);
    }

    #[test]
    fn equidistant_tie_breaks_to_lower_prediction() {
        let predicted = [1.0, 3.0];
        let observed = [2.0];
        let a = assign_peaks(&predicted, &observed);
        assert_eq!(a.pairs, vec![(0, 0)]);
    }

    #[test]
    fn excess_observations_are_flagged() {
        let predicted = [1.0];
        let observed = [0.9, 1.2, 5.0];
        let a = assign_peaks(&predicted, &observed);
        assert_eq!(a.pairs.len(), 1);
        assert_eq!(a.unmatched_observed.len(), 2);
    }

    #[test]
    fn dp_matches_brute_force_on_random_instances() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let m = rng.gen_range(1..=6);
            let n = rng.gen_range(1..=m);
            let predicted: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..10.0)).collect();
            let observed: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
            let got = assign_peaks(&predicted, &observed).total_cost_mhz;
            let want = brute_force_cost(&predicted, &observed);
            assert!(
                (got - want).abs() < 1e-12,
                "dp {got} vs brute {want} for {predicted:?} {observed:?}"
            );
        }
    }

    fn brute_force_cost(predicted: &[f64], observed: &[f64]) -> f64 {
        fn rec(predicted: &[f64], used: &mut Vec<bool>, observed: &[f64], k: usize) -> f64 {
            if k == observed.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for (i, p) in predicted.iter().enumerate() {
                if !used[i] {
                    used[i] = true;
                    let c = (p - observed[k]).abs() + rec(predicted, used, observed, k + 1);
                    used[i] = false;
                    best = best.min(c);
                }
            }
            best
        }
        let mut used = vec![false; predicted.len()];
        rec(predicted, &mut used, observed, 0)
    }

    #[test]
    fn csv_round_trip() {
        let ds = ResonanceDataset {
            records: vec![
                ResonanceRecord {
                    field_t: Vector3::new(0.0, 0.0, 1e-3),
                    freq_mhz: 3.482,
                    sigma_mhz: 0.003,
                    subset: Some("001a".into()),
                    pair: None,
                },
                ResonanceRecord {
                    field_t: Vector3::new(0.0, 0.0, 0.0),
                    freq_mhz: 4.268,
                    sigma_mhz: 0.003,
                    subset: None,
                    pair: Some("0-3".into()),
                },
            ],
        };
        let mut buf = Vec::new();
        ds.to_csv(&mut buf).unwrap();
        let parsed = ResonanceDataset::from_csv(buf.as_slice()).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.records[0].subset.as_deref(), Some("001a"));
        assert_eq!(parsed.records[1].pair.as_deref(), Some("0-3"));
        assert!((parsed.records[0].freq_mhz - 3.482).abs() < 1e-9);
    }

    #[test]
    fn csv_rejects_bad_sigma_and_header() {
        let bad_sigma = "Bx_T,By_T,Bz_T,freq_MHz,sigma_MHz\n0,0,0,3.4,0\n";
        assert!(ResonanceDataset::from_csv(bad_sigma.as_bytes()).is_err());
        let bad_header = "Bx,By,Bz,f,s\n0,0,0,3.4,0.003\n";
        assert!(ResonanceDataset::from_csv(bad_header.as_bytes()).is_err());
    }

    #[test]
    fn csv_allows_comments() {
        let text = "Bx_T,By_T,Bz_T,freq_MHz,sigma_MHz\n# a comment\n0,0,0,3.482,0.003\n";
        let ds = ResonanceDataset::from_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.records.len(), 1);
    }

    #[test]
    fn validate_requires_enough_records_and_directions() {
        let mut ds = ResonanceDataset::default();
        for k in 0..8 {
            ds.records.push(ResonanceRecord {
                field_t: Vector3::new(0.0, 0.0, 1e-3),
                freq_mhz: 3.0 + k as f64,
                sigma_mhz: 0.003,
                subset: None,
                pair: None,
            });
        }
        assert!(ds.validate().is_err(), "single direction must fail");
        ds.records[0].field_t = Vector3::new(1e-3, 0.0, 0.0);
        assert!(ds.validate().is_ok());
        ds.records.truncate(7);
        assert!(ds.validate().is_err(), "7 records must fail");
    }
}
