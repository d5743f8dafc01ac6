//! Leave-one-out cross validation for the three reconstruction modes,
//! plus the error and correlation metrics used to score them.
//!
//! Holdout iterations run in parallel; results are aggregated in sample
//! order, so repeated runs produce identical reports.

use crate::error::{Error, Result};
use crate::pca::{Centering, PcaModel};
use crate::reconstruct::{
    self, apply_lincomb, fit_lincomb, reconstruct_from_bands, reconstruct_full, BandSelection,
};
use crate::spectrum::{SpectralDataset, Spectrum};
use rayon::prelude::*;

/// Truth values below this reflectance are excluded from relative-error
/// averaging (the ratio is meaningless against a near-zero denominator);
/// exclusions are counted in the report.
pub const RELATIVE_ERROR_TRUTH_FLOOR: f64 = 1e-6;

/// Mean relative error of a reconstruction, with the number of
/// wavelengths excluded by the near-zero-truth floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeError {
    pub mean: f64,
    pub excluded: usize,
}

/// Mean over wavelengths of `|recon - truth| / truth`, excluding
/// wavelengths where the truth is below [`RELATIVE_ERROR_TRUTH_FLOOR`].
pub fn mean_relative_error(truth: &Spectrum, recon: &Spectrum) -> Result<RelativeError> {
    if truth.grid() != recon.grid() {
        return Err(Error::invalid_argument(
            "truth and reconstruction are on different grids".to_string(),
        ));
    }
    relative_error_values(truth.values(), recon.values())
}

fn relative_error_values(truth: &[f64], recon: &[f64]) -> Result<RelativeError> {
    let mut sum = 0.0;
    let mut used = 0usize;
    for (&t, &r) in truth.iter().zip(recon) {
        if t < RELATIVE_ERROR_TRUTH_FLOOR {
            continue;
        }
        sum += (r - t).abs() / t;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Degenerate(
            "every wavelength was excluded by the near-zero-truth floor".to_string(),
        ));
    }
    Ok(RelativeError {
        mean: sum / used as f64,
        excluded: truth.len() - used,
    })
}

/// Squared Pearson correlation between pooled truth and reconstruction
/// values. Both inputs need at least two points and nonzero variance.
pub fn r_squared(truth: &[f64], recon: &[f64]) -> Result<f64> {
    if truth.len() != recon.len() {
        return Err(Error::invalid_argument(format!(
            "length mismatch: {} truth values vs {} reconstructed",
            truth.len(),
            recon.len()
        )));
    }
    if truth.len() < 2 {
        return Err(Error::invalid_argument(
            "correlation needs at least two points".to_string(),
        ));
    }
    let n = truth.len() as f64;
    let mt = truth.iter().sum::<f64>() / n;
    let mr = recon.iter().sum::<f64>() / n;
    let mut ctt = 0.0;
    let mut crr = 0.0;
    let mut ctr = 0.0;
    for (&t, &r) in truth.iter().zip(recon) {
        let dt = t - mt;
        let dr = r - mr;
        ctt += dt * dt;
        crr += dr * dr;
        ctr += dt * dr;
    }
    if ctt == 0.0 || crr == 0.0 {
        return Err(Error::Degenerate(
            "zero variance in truth or reconstruction".to_string(),
        ));
    }
    Ok((ctr * ctr) / (ctt * crr))
}

/// Which reconstruction mode a report describes.
#[derive(Debug, Clone, PartialEq)]
pub enum ReconProtocol {
    /// Projection of the complete holdout spectrum onto `m` components.
    Full { m: usize },
    /// Weight solve from reflectance at the selected bands, `m` components.
    Bands { bands_nm: Vec<f64>, m: usize },
    /// Linear combination predicting one band from the source bands.
    LinComb {
        source_bands_nm: Vec<f64>,
        target_nm: f64,
    },
}

/// Identifies the run that produced a report.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolDescriptor {
    pub dataset: String,
    pub samples: usize,
    pub mode: ReconProtocol,
    /// `None` for the linear-combination mode, which has no centering.
    pub centering: Option<Centering>,
}

/// Scores for one held-out sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleScore {
    pub label: String,
    /// Reconstruction minus truth: one entry per wavelength for the
    /// spectral modes, a single entry for the linear-combination mode.
    pub residual: Vec<f64>,
    pub mean_relative_error: f64,
    pub mean_absolute_error: f64,
    /// `‖residual‖₂ / ‖truth‖₂`, reported alongside the per-wavelength
    /// average for comparability.
    pub norm_ratio_error: f64,
    /// Per-sample squared correlation; `None` for single-value scores or
    /// degenerate (constant) holdouts.
    pub r_squared: Option<f64>,
    pub excluded_wavelengths: usize,
}

/// Full leave-one-out validation report for one protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionReport {
    pub protocol: ProtocolDescriptor,
    pub samples: Vec<SampleScore>,
    /// Mean over samples of the per-sample mean relative error.
    pub mean_relative_error: f64,
    /// Mean over samples of the per-sample mean absolute error.
    pub mean_absolute_error: f64,
    /// Mean over samples of the norm-ratio error.
    pub mean_norm_ratio_error: f64,
    /// Squared correlation over all pooled (truth, reconstruction) pairs.
    pub pooled_r_squared: f64,
    pub excluded_total: usize,
    /// Pooled truth/reconstruction pairs behind `pooled_r_squared`, in
    /// sample order; scatter-plot data.
    pub pooled_truth: Vec<f64>,
    pub pooled_recon: Vec<f64>,
}

impl ReconstructionReport {
    /// True when every per-sample figure and aggregate of two reports is
    /// bit-identical; the protocol descriptors are not compared.
    pub fn same_numbers(&self, other: &ReconstructionReport) -> bool {
        self.samples == other.samples
            && self.mean_relative_error == other.mean_relative_error
            && self.mean_absolute_error == other.mean_absolute_error
            && self.mean_norm_ratio_error == other.mean_norm_ratio_error
            && self.pooled_r_squared == other.pooled_r_squared
            && self.excluded_total == other.excluded_total
            && self.pooled_truth == other.pooled_truth
            && self.pooled_recon == other.pooled_recon
    }
}

fn score_spectrum(label: &str, truth: &Spectrum, recon: &Spectrum) -> Result<SampleScore> {
    let rel = mean_relative_error(truth, recon)?;
    let residual: Vec<f64> = recon
        .values()
        .iter()
        .zip(truth.values())
        .map(|(&r, &t)| r - t)
        .collect();
    let abs = residual.iter().map(|e| e.abs()).sum::<f64>() / residual.len() as f64;
    let res_norm = residual.iter().map(|e| e * e).sum::<f64>().sqrt();
    let truth_norm = truth.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let norm_ratio = if truth_norm > 0.0 {
        res_norm / truth_norm
    } else {
        f64::INFINITY
    };
    let r2 = r_squared(truth.values(), recon.values()).ok();
    Ok(SampleScore {
        label: label.to_string(),
        residual,
        mean_relative_error: rel.mean,
        mean_absolute_error: abs,
        norm_ratio_error: norm_ratio,
        r_squared: r2,
        excluded_wavelengths: rel.excluded,
    })
}

fn assemble_report(
    protocol: ProtocolDescriptor,
    scored: Vec<(SampleScore, Vec<f64>, Vec<f64>)>,
) -> Result<ReconstructionReport> {
    let n = scored.len();
    let mut samples = Vec::with_capacity(n);
    let mut pooled_truth = Vec::new();
    let mut pooled_recon = Vec::new();
    let mut rel = 0.0;
    let mut abs = 0.0;
    let mut norm_ratio = 0.0;
    let mut excluded_total = 0usize;
    for (score, truth, recon) in scored {
        rel += score.mean_relative_error;
        abs += score.mean_absolute_error;
        norm_ratio += score.norm_ratio_error;
        excluded_total += score.excluded_wavelengths;
        pooled_truth.extend(truth);
        pooled_recon.extend(recon);
        samples.push(score);
    }
    let pooled_r_squared = r_squared(&pooled_truth, &pooled_recon)?;
    Ok(ReconstructionReport {
        protocol,
        samples,
        mean_relative_error: rel / n as f64,
        mean_absolute_error: abs / n as f64,
        mean_norm_ratio_error: norm_ratio / n as f64,
        pooled_r_squared,
        excluded_total,
        pooled_truth,
        pooled_recon,
    })
}

fn check_loocv_size(ds: &SpectralDataset) -> Result<()> {
    if ds.len() < 3 {
        return Err(Error::invalid_argument(format!(
            "leave-one-out validation needs at least 3 samples, got {}",
            ds.len()
        )));
    }
    Ok(())
}

/// Leave-one-out validation of full-spectrum reconstruction with `m`
/// components: each sample is scored against its reconstruction from a
/// model fitted on the remaining samples.
pub fn loocv_full(
    ds: &SpectralDataset,
    m: usize,
    centering: Centering,
) -> Result<ReconstructionReport> {
    let mut reports = loocv_full_multi(ds, &[m], centering)?;
    Ok(reports.pop().expect("one report per requested order"))
}

/// Full-spectrum leave-one-out validation at several component counts,
/// sharing the per-holdout model fits. Each returned report is identical
/// to what [`loocv_full`] produces for that `m` alone.
pub fn loocv_full_multi(
    ds: &SpectralDataset,
    ms: &[usize],
    centering: Centering,
) -> Result<Vec<ReconstructionReport>> {
    check_loocv_size(ds)?;
    if ms.is_empty() {
        return Err(Error::invalid_argument("no component counts given".to_string()));
    }
    let d = ds.grid().count();
    for &m in ms {
        if m == 0 || m > d {
            return Err(Error::invalid_argument(format!(
                "component count m={m} must satisfy 1 <= m <= {d}"
            )));
        }
    }

    // One entry per holdout, each holding one score triple per requested m.
    let per_holdout: Vec<Vec<(SampleScore, Vec<f64>, Vec<f64>)>> = (0..ds.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<(SampleScore, Vec<f64>, Vec<f64>)>> {
            let train = ds.without_sample(i)?;
            let model = PcaModel::fit(&train, centering)?;
            let holdout = ds.spectrum(i);
            ms.iter()
                .map(|&m| {
                    let w = reconstruct::project(&model, holdout, m)?;
                    let recon = reconstruct_full(&model, &w)?;
                    let score = score_spectrum(holdout.label(), holdout, &recon)?;
                    Ok((score, holdout.values().to_vec(), recon.values().to_vec()))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    ms.iter()
        .enumerate()
        .map(|(mi, &m)| {
            let scored: Vec<_> = per_holdout.iter().map(|h| h[mi].clone()).collect();
            assemble_report(
                ProtocolDescriptor {
                    dataset: ds.name().to_string(),
                    samples: ds.len(),
                    mode: ReconProtocol::Full { m },
                    centering: Some(centering),
                },
                scored,
            )
        })
        .collect()
}

/// Leave-one-out validation of selected-band reconstruction: per holdout,
/// the model is fitted on the rest, the holdout's reflectance is read at
/// the selected bands only, and the reconstruction is scored against the
/// complete holdout spectrum.
pub fn loocv_bands(
    ds: &SpectralDataset,
    sel: &BandSelection,
    m: usize,
    centering: Centering,
) -> Result<ReconstructionReport> {
    check_loocv_size(ds)?;
    if sel.grid() != ds.grid() {
        return Err(Error::invalid_argument(
            "band selection grid does not match the dataset grid".to_string(),
        ));
    }
    if sel.len() < m {
        return Err(Error::invalid_argument(format!(
            "under-determined solve: {} bands for m={m} components",
            sel.len()
        )));
    }

    let scored: Vec<(SampleScore, Vec<f64>, Vec<f64>)> = (0..ds.len())
        .into_par_iter()
        .map(|i| -> Result<(SampleScore, Vec<f64>, Vec<f64>)> {
            let train = ds.without_sample(i)?;
            let model = PcaModel::fit(&train, centering)?;
            let holdout = ds.spectrum(i);
            let rho = holdout.values_at(sel.indices());
            let recon = reconstruct_from_bands(&model, sel, &rho, m)?;
            let score = score_spectrum(holdout.label(), holdout, &recon)?;
            Ok((score, holdout.values().to_vec(), recon.values().to_vec()))
        })
        .collect::<Result<Vec<_>>>()?;

    assemble_report(
        ProtocolDescriptor {
            dataset: ds.name().to_string(),
            samples: ds.len(),
            mode: ReconProtocol::Bands {
                bands_nm: sel.wavelengths_nm().to_vec(),
                m,
            },
            centering: Some(centering),
        },
        scored,
    )
}

/// Leave-one-out validation of the linear-combination predictor: per
/// holdout, coefficients are fitted on the rest and applied to the
/// holdout's source-band reflectances; the scalar prediction is scored
/// against the holdout's target-band value.
pub fn loocv_lincomb(
    ds: &SpectralDataset,
    source: &BandSelection,
    target_nm: f64,
) -> Result<ReconstructionReport> {
    let k = source.len();
    if ds.len() < k + 1 {
        return Err(Error::invalid_argument(format!(
            "leave-one-out linear-combination validation needs at least {} samples, got {}",
            k + 1,
            ds.len()
        )));
    }
    let target_index = ds.grid().index_of(target_nm).ok_or_else(|| {
        Error::invalid_argument(format!("target band {target_nm} nm is not on the grid"))
    })?;

    let scored: Vec<(SampleScore, Vec<f64>, Vec<f64>)> = (0..ds.len())
        .into_par_iter()
        .map(|i| -> Result<(SampleScore, Vec<f64>, Vec<f64>)> {
            let train = ds.without_sample(i)?;
            let lc = fit_lincomb(&train, source, target_nm)?;
            let holdout = ds.spectrum(i);
            let pred = apply_lincomb(&lc, &holdout.values_at(source.indices()))?;
            let truth = holdout.values()[target_index];
            if truth < RELATIVE_ERROR_TRUTH_FLOOR {
                return Err(Error::Degenerate(format!(
                    "sample '{}' has near-zero truth at the target band",
                    holdout.label()
                )));
            }
            let err = pred - truth;
            let score = SampleScore {
                label: holdout.label().to_string(),
                residual: vec![err],
                mean_relative_error: err.abs() / truth,
                mean_absolute_error: err.abs(),
                norm_ratio_error: err.abs() / truth,
                r_squared: None,
                excluded_wavelengths: 0,
            };
            Ok((score, vec![truth], vec![pred]))
        })
        .collect::<Result<Vec<_>>>()?;

    assemble_report(
        ProtocolDescriptor {
            dataset: ds.name().to_string(),
            samples: ds.len(),
            mode: ReconProtocol::LinComb {
                source_bands_nm: source.wavelengths_nm().to_vec(),
                target_nm,
            },
            centering: None,
        },
        scored,
    )
}
