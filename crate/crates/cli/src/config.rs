//! Experiment configuration: JSON file plus command-line overrides.

use std::collections::BTreeSet;
use std::path::Path;

use quasiloc::hull::{Cutoff, SpectralWeight};
use quasiloc::interp::Majorant;
use quasiloc::lattice::LatticeBox;
use quasiloc::msa::{EnergyGrid, MsaParams, Selector};
use quasiloc::torus::{diophantine_profile, FrequencyMatrix, TorusPoint};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every key is optional in the file; each subcommand lists the ones it needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<usize>,
    /// Frequency matrix, `nu` rows of `d` entries, row-major.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    /// `exp:C:zeta`, `power:C:delta`, `table:v0,v1,...` or `majorant:P` for
    /// `M(2 pi |n|) / (1 + |n|^P)` with the configured majorant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
    /// Fixed mode cutoff; automatic when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    /// `sqrt` or `exp:C:zeta`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub majorant: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub msa: Option<MsaParams>,
    /// Sites per axis of the box `[0, box_side - 1]^d`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_side: Option<u64>,
    /// Explicit MSA window as `[lo, hi]` per axis.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<Vec<(i64, i64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of consecutive seeds, starting at `seed`, for the census.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_cut: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lmax: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    /// `uniform:N`, `adapted:FILL` or `list:E1,E2,...`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra_omegas: Option<usize>,
    /// `index:K`, `window:LO:HI`, `middle:N` or `centered:N`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selector: Option<String>,
    /// Source site of the Green's function column.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Half-width of the census box.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub census_l: Option<u64>,
    /// Number of census slabs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub census_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Validation {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ExperimentConfig {
    /// Parses JSON, rejecting unknown keys (all of them are listed).
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let mut unknown = BTreeSet::new();
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_ignored::deserialize(de, |path| {
            unknown.insert(path.to_string().replace(".?", ""));
        })
        .map_err(|e| CliError::Validation(vec![format!("malformed config: {e}")]))?;
        if !unknown.is_empty() {
            return Err(CliError::Validation(
                unknown.into_iter().map(|k| format!("unknown key `{k}`")).collect(),
            ));
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fields set in `other` replace those of `self`.
    pub fn overlay(self, other: ExperimentConfig) -> ExperimentConfig {
        macro_rules! pick {
            ($($f:ident),*) => { ExperimentConfig { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            d, nu, alpha, omega, weight, cutoff, majorant, g, g_list, msa, box_side, window, seed, samples,
            eps_list, grid_n, jitter, j_cut, lmax, energy, energy_grid, k_max, extra_omegas, selector, source,
            kappa, census_l, census_k, out
        )
    }

    fn is_set(&self, key: &str) -> bool {
        serde_json::to_value(self).ok().and_then(|v| v.get(key).cloned()).is_some()
    }

    pub fn dims(&self) -> Result<(usize, usize), CliError> {
        Ok((need(self.d, "d")?, need(self.nu, "nu")?))
    }

    pub fn frequency(&self) -> Result<FrequencyMatrix, CliError> {
        let (d, nu) = self.dims()?;
        let alpha = need(self.alpha.clone(), "alpha")?;
        Ok(FrequencyMatrix::new(nu, d, alpha)?)
    }

    pub fn phase(&self) -> Result<TorusPoint, CliError> {
        let nu = need(self.nu, "nu")?;
        match &self.omega {
            None => Ok(TorusPoint::origin(nu)),
            Some(w) if w.len() != nu => {
                Err(CliError::Validation(vec![format!("omega has {} entries, expected nu = {nu}", w.len())]))
            }
            Some(w) => Ok(TorusPoint::new(w.clone())?),
        }
    }

    pub fn cutoff_rule(&self) -> Cutoff {
        self.cutoff.map_or_else(Cutoff::default, Cutoff::Fixed)
    }

    pub fn majorant_spec(&self) -> Result<Majorant, CliError> {
        parse_majorant(&need(self.majorant.clone(), "majorant")?)
    }

    pub fn spectral_weight(&self) -> Result<SpectralWeight, CliError> {
        let nu = need(self.nu, "nu")?;
        let spec = need(self.weight.clone(), "weight")?;
        let cutoff = self.cutoff_rule();
        let fields: Vec<&str> = spec.split(':').collect();
        let bad = || CliError::Validation(vec![format!("cannot parse weight `{spec}`")]);
        let w = match fields.as_slice() {
            ["exp", c, zeta] => SpectralWeight::exponential(num(c).ok_or_else(bad)?, num(zeta).ok_or_else(bad)?, nu, cutoff)?,
            ["power", c, delta] => SpectralWeight::power(num(c).ok_or_else(bad)?, num(delta).ok_or_else(bad)?, nu, cutoff)?,
            ["table", values] => SpectralWeight::table(list(values).ok_or_else(bad)?, nu, cutoff)?,
            ["majorant", p] => {
                let p = num(p).ok_or_else(bad)?;
                let m = self.majorant_spec()?;
                SpectralWeight::from_radial_fn(nu, self.cutoff.unwrap_or(64), |t, r| m.eval(t) / (1.0 + (r as f64).powf(p)))?
            }
            _ => return Err(bad()),
        };
        Ok(w)
    }

    /// Exponent `zeta` of a stretched-exponential weight, if that is the configured kind.
    pub fn zeta(&self) -> Option<f64> {
        let spec = self.weight.as_deref()?;
        match spec.split(':').collect::<Vec<_>>().as_slice() {
            ["exp", _, z] => num(z),
            _ => None,
        }
    }

    pub fn lattice_box(&self) -> Result<LatticeBox, CliError> {
        let d = need(self.d, "d")?;
        let side = need(self.box_side, "box_side")?;
        if side == 0 {
            return Err(CliError::Validation(vec!["box_side must be positive".into()]));
        }
        Ok(LatticeBox::new(vec![(0, side as i64 - 1); d])?)
    }

    pub fn energy_grid_spec(&self) -> Result<EnergyGrid, CliError> {
        let spec = self.energy_grid.clone().unwrap_or_else(|| "adapted:16".into());
        let bad = || CliError::Validation(vec![format!("cannot parse energy_grid `{spec}`")]);
        match spec.split_once(':') {
            Some(("uniform", n)) => Ok(EnergyGrid::Uniform(n.parse().map_err(|_| bad())?)),
            Some(("adapted", n)) => Ok(EnergyGrid::SpectrumAdapted { fill: n.parse().map_err(|_| bad())? }),
            Some(("list", v)) => Ok(EnergyGrid::Explicit(list(v).ok_or_else(bad)?)),
            _ => Err(bad()),
        }
    }

    pub fn selector_spec(&self) -> Result<Selector, CliError> {
        let spec = self.selector.clone().unwrap_or_else(|| "middle:1".into());
        let fields: Vec<&str> = spec.split(':').collect();
        let bad = || CliError::Validation(vec![format!("cannot parse selector `{spec}`")]);
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
        match fields.as_slice() {
            ["index", k] => Ok(Selector::Index(int(k)?)),
            ["middle", n] => Ok(Selector::MidSpectrum(int(n)?)),
            ["centered", n] => Ok(Selector::Centered(int(n)?)),
            ["window", lo, hi] => Ok(Selector::Window { lo: num(lo).ok_or_else(bad)?, hi: num(hi).ok_or_else(bad)? }),
            _ => Err(bad()),
        }
    }
}

pub fn parse_majorant(spec: &str) -> Result<Majorant, CliError> {
    let bad = || CliError::Validation(vec![format!("cannot parse majorant `{spec}`")]);
    match spec.split(':').collect::<Vec<_>>().as_slice() {
        ["sqrt"] => Ok(Majorant::sqrt()),
        ["exp", c, zeta] => Ok(Majorant::exponential(num(c).ok_or_else(bad)?, num(zeta).ok_or_else(bad)?)?),
        _ => Err(bad()),
    }
}

fn num(s: &str) -> Option<f64> {
    s.trim().parse().ok()
}

fn list(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(num).collect()
}

pub fn need<T>(value: Option<T>, key: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Validation(vec![format!("missing required key `{key}`")]))
}

/// Keys each subcommand cannot run without; `None` stands for the operator keys.
/// Fills keys that have a default for `command`: `nu = 1` for `variance` and `bump`.
pub fn resolve_defaults(mut cfg: ExperimentConfig, command: Option<&str>) -> ExperimentConfig {
    if matches!(command, Some("variance") | Some("bump")) && cfg.nu.is_none() {
        cfg.nu = Some(1);
    }
    cfg
}

pub fn required_keys(command: Option<&str>) -> &'static [&'static str] {
    match command {
        Some("dioph") => &["d", "nu", "alpha", "lmax"],
        Some("hull") => &["nu", "weight", "seed", "grid_n"],
        Some("variance") => &["weight", "majorant", "eps_list"],
        Some("bump") => &["majorant", "eps_list"],
        Some("spectrum") | Some("decay") => &["d", "nu", "alpha", "weight", "g", "seed", "box_side"],
        Some("green") => &["d", "nu", "alpha", "weight", "g", "seed", "box_side", "energy"],
        Some("msa") => &["d", "nu", "alpha", "weight", "g", "seed", "msa"],
        Some("sweep") => &["d", "nu", "alpha", "weight", "g_list", "seed", "box_side"],
        Some("census") => &["d", "nu", "alpha", "weight", "g", "seed", "samples", "census_l", "census_k", "msa"],
        _ => &["d", "nu", "alpha", "weight", "g", "seed"],
    }
}

/// Violations of the preconditions of `command` and warnings about the
/// localization hypotheses `(A + 1) zeta < 1` and `A eta < 1`.
pub fn validate(cfg: &ExperimentConfig, command: Option<&str>) -> Validation {
    let mut out = Validation::default();
    for key in required_keys(command) {
        if !cfg.is_set(key) {
            out.violations.push(format!("missing required key `{key}`"));
        }
    }
    if let (Some(d), Some(nu)) = (cfg.d, cfg.nu) {
        if d == 0 || nu == 0 {
            note(&mut out.violations, Err(CliError::Validation(vec!["d and nu must be positive".into()])));
        }
        if cfg.alpha.is_some() {
            note(&mut out.violations, cfg.frequency().map(|_| ()));
        }
        note(&mut out.violations, cfg.phase().map(|_| ()));
    }
    if cfg.weight.is_some() && cfg.nu.is_some() {
        note(&mut out.violations, cfg.spectral_weight().map(|_| ()));
    }
    if cfg.majorant.is_some() {
        note(&mut out.violations, cfg.majorant_spec().map(|_| ()));
    }
    if let Some(p) = &cfg.msa {
        out.violations.extend(p.violations());
    }
    if let Some(eps) = &cfg.eps_list {
        if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            out.violations.push("eps_list entries must lie in (0, 1]".into());
        }
    }
    if cfg.energy_grid.is_some() {
        note(&mut out.violations, cfg.energy_grid_spec().map(|_| ()));
    }
    if cfg.selector.is_some() {
        note(&mut out.violations, cfg.selector_spec().map(|_| ()));
    }
    if let Some(j) = cfg.jitter {
        if !(j >= 0.0) {
            out.violations.push("jitter must be nonnegative".into());
        }
    }
    if let (Some(zeta), Ok(alpha)) = (cfg.zeta(), cfg.frequency()) {
        if let Ok(fit) = diophantine_profile(&alpha, cfg.lmax.unwrap_or(1000).min(100_000)) {
            out.warnings.extend(hypothesis_warnings(fit.fitted_a, zeta));
        }
    }
    out
}

fn note(violations: &mut Vec<String>, r: Result<(), CliError>) {
    if let Err(e) = r {
        violations.extend(e.messages());
    }
}

/// Warnings when `(A + 1) zeta >= 1` or `A zeta / (1 - zeta) >= 1`.
pub fn hypothesis_warnings(a: f64, zeta: f64) -> Vec<String> {
    let mut out = Vec::new();
    let lhs = (a + 1.0) * zeta;
    if lhs >= 1.0 {
        out.push(format!("(A+1)ζ = {} ≥ 1: the localization hypothesis (A+1)ζ < 1 fails", short(lhs)));
    }
    let eta = zeta / (1.0 - zeta);
    if zeta < 1.0 && a * eta >= 1.0 {
        out.push(format!("Aη = {} ≥ 1 with η = ζ/(1−ζ): the hypothesis Aη < 1 fails", short(a * eta)));
    }
    out
}

fn short(x: f64) -> String {
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
