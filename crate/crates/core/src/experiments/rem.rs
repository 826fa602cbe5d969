//! Radio-map reconstruction from a sampling mask, on synthetic prior fields
//! or on a supplied grid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{format_float, ExperimentError, ExperimentOutput, FileOr, RunContext, Scenario, Table};
use crate::rem::{
    bandlimited_signal, build_ap_basis, check_sampling, nmse, recover_bp, sample_field, synthetic_grids, DistanceRule, FieldGrid,
    GridFile, RemDictionary, SamplingMask, SimilarityParams, SyntheticSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemScenario {
    /// Eigenvectors per access point.
    #[serde(rename = "K")]
    pub bandwidth: usize,
    /// Similarity scale in field units.
    pub sigma: f64,
    /// Neighbour radius; defaults to `(1.5 · lattice spacing)²` in synthetic mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    pub rule: DistanceRule,
    pub noise_std: f64,
    /// Synthetic mode: prior fields from the generator and a band-limited
    /// truth on the blocks of `active` access points (all when absent).
    pub synthetic: SyntheticSpec,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active: Option<Vec<usize>>,
    /// Grid mode: prior fields, observed vertex indices and the true map.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<FileOr<GridFile>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<FileOr<Vec<f64>>>,
}

impl Default for RemScenario {
    fn default() -> Self {
        Self {
            bandwidth: 28,
            sigma: 5.0,
            r0: None,
            rule: DistanceRule::Squared,
            noise_std: 0.0,
            synthetic: SyntheticSpec::default(),
            samples: 115,
            active: None,
            grid: None,
            mask: None,
            truth: None,
        }
    }
}

fn dictionary(grids: &[FieldGrid], params: &SimilarityParams, k: usize) -> Result<RemDictionary, ExperimentError> {
    let bases = grids.par_iter().map(|g| build_ap_basis(g, params, k)).collect::<Result<Vec<_>, _>>()?;
    Ok(RemDictionary::from_bases(bases, k)?)
}

impl Scenario for RemScenario {
    const AXES: &'static [(&'static str, &'static str)] = &[];

    fn run(&self, ctx: &RunContext) -> Result<ExperimentOutput, ExperimentError> {
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        let (dict, mask, truth) = match &self.grid {
            Some(grid) => {
                let (Some(mask), Some(truth)) = (&self.mask, &self.truth) else {
                    return Err(ExperimentError::Schema("grid mode needs `mask` and `truth`".into()));
                };
                let r0 = self.r0.ok_or_else(|| ExperimentError::Schema("grid mode needs `r0`".into()))?;
                let grids = grid.load(ctx)?.grids();
                let params = SimilarityParams { sigma: self.sigma, r0, rule: self.rule };
                let dict = dictionary(&grids, &params, self.bandwidth)?;
                let mask = SamplingMask::new(mask.clone(), dict.num_vertices())?;
                let truth = truth.load(ctx)?;
                if truth.len() != dict.num_vertices() {
                    return Err(ExperimentError::Schema(format!(
                        "truth has {} entries for {} vertices",
                        truth.len(),
                        dict.num_vertices()
                    )));
                }
                (dict, mask, truth)
            }
            None => {
                let grids = synthetic_grids(&self.synthetic, ctx.seed)?;
                let r0 = self.r0.unwrap_or((1.5 * self.synthetic.spacing()).powi(2));
                let params = SimilarityParams { sigma: self.sigma, r0, rule: self.rule };
                let dict = dictionary(&grids, &params, self.bandwidth)?;
                let active: Vec<usize> = self.active.clone().unwrap_or_else(|| (0..dict.num_aps()).collect());
                if let Some(&m) = active.iter().find(|&&m| m >= dict.num_aps()) {
                    return Err(ExperimentError::Schema(format!("active access point {m} out of range")));
                }
                let (x, _) = bandlimited_signal(&dict, &active, &mut rng);
                let mask = SamplingMask::random(dict.num_vertices(), self.samples, &mut rng)?;
                (dict, mask, x)
            }
        };
        let check = check_sampling(&mask, &dict);
        let y = sample_field(&truth, &mask, self.noise_std, &mut rng)?;
        let rec = recover_bp(&y, &mask, &dict, self.noise_std)?;
        let err = nmse(&rec.map, &truth)?;

        let mut table = Table::new(&["vertex", "x_true", "x_hat"]);
        for (v, (t, h)) in truth.iter().zip(&rec.map).enumerate() {
            table.row(&[v.to_string(), format_float(*t), format_float(*h)]);
        }
        let mut summary = format!(
            "nmse={} samples={} rank={}/{} recoverable={}",
            format_float(err),
            mask.len(),
            check.rank,
            check.dictionary_rank,
            check.recoverable
        );
        for w in dict.warnings() {
            summary.push_str(&format!(" warning=\"{w}\""));
        }
        Ok(ExperimentOutput { csv: table.finish(), summary: Some(summary) })
    }
}
