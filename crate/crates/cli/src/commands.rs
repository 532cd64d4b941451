//! One function per subcommand, each returning a CSV table and a JSON report.

use quasiloc::hull::{holder_estimate, sample_hull};
use quasiloc::interp::bump::RECONSTRUCTION_POINTS;
use quasiloc::interp::variance::DEFAULT_JITTER;
use quasiloc::interp::{build_bump, fit_eta, variance_sweep};
use quasiloc::lattice::{l1_dist, LatticeBox};
use quasiloc::msa::{
    check_msa_assumptions, eigen_decays, resonance_census, CensusConfig, MsaOptions, MsaSetup,
};
use quasiloc::operator::{assemble, FiniteOperator, Resolvent};
use quasiloc::stats::{linear_fit, median};
use quasiloc::torus::diophantine_profile;
use serde_json::{json, Value};

use crate::config::{need, ExperimentConfig};
use crate::output::{site, Cell, Table};
use crate::CliError;

pub const COMMANDS: &[&str] =
    &["dioph", "hull", "variance", "bump", "spectrum", "green", "msa", "decay", "sweep", "census"];

/// Largest number of grid points written by `hull`.
const HULL_GRID_LIMIT: usize = 1 << 20;

pub struct Artifacts {
    pub table: Table,
    pub report: Value,
}

pub fn run(command: &str, cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    match command {
        "dioph" => dioph(cfg),
        "hull" => hull(cfg),
        "variance" => variance(cfg),
        "bump" => bump(cfg),
        "spectrum" => spectrum(cfg),
        "green" => green(cfg),
        "msa" => msa(cfg),
        "decay" => decay(cfg),
        "sweep" => sweep(cfg),
        "census" => census(cfg),
        other => Err(CliError::Validation(vec![format!("unknown subcommand `{other}`")])),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("serializable report")
}

fn operator(cfg: &ExperimentConfig, g: f64) -> Result<FiniteOperator, CliError> {
    let hull = sample_hull(&cfg.spectral_weight()?, need(cfg.seed, "seed")?);
    Ok(assemble(&cfg.lattice_box()?, &cfg.phase()?, &cfg.frequency()?, &hull, g)?)
}

fn dioph(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let fit = diophantine_profile(&cfg.frequency()?, need(cfg.lmax, "lmax")?)?;
    let mut table = Table::new(&["L", "min_dist", "witness"]);
    for r in &fit.records {
        table.push(vec![r.l.into(), r.min_dist.into(), site(&r.witness).into()]);
    }
    let report = json!({
        "fitted_a": fit.fitted_a,
        "fitted_c": fit.fitted_c,
        "r_squared": fit.r_squared,
        "exact": fit.exact,
        "records": fit.records.len(),
    });
    Ok(Artifacts { table, report })
}

fn hull(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let w = cfg.spectral_weight()?;
    let grid_n = need(cfg.grid_n, "grid_n")?;
    let nu = w.nu();
    if grid_n == 0 || (grid_n as f64).powi(nu as i32) > HULL_GRID_LIMIT as f64 {
        return Err(CliError::Validation(vec![format!("grid_n^nu must lie in [1, {HULL_GRID_LIMIT}]")]));
    }
    let sample = sample_hull(&w, need(cfg.seed, "seed")?);
    let values = sample.eval_grid(grid_n);
    let mut header: Vec<String> = (1..=nu).map(|i| format!("omega_{i}")).collect();
    header.push("value".into());
    let mut table = Table { header, rows: Vec::with_capacity(values.len()) };
    for (idx, v) in values.iter().enumerate() {
        let mut row: Vec<Cell> = Vec::with_capacity(nu + 1);
        let mut rest = idx;
        let mut coords = vec![0usize; nu];
        for slot in coords.iter_mut().rev() {
            *slot = rest % grid_n;
            rest /= grid_n;
        }
        row.extend(coords.iter().map(|&k| Cell::Real(k as f64 / grid_n as f64)));
        row.push((*v).into());
        table.rows.push(row);
    }
    let holder = match cfg.kappa {
        Some(kappa) => to_json(&holder_estimate(&sample, kappa, grid_n)?),
        None => Value::Null,
    };
    let report = json!({
        "variance": w.variance(),
        "tail": w.tail(),
        "cutoff": w.cutoff(),
        "modes": w.modes().len(),
        "sample_max": values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)),
        "sample_min": values.iter().fold(f64::INFINITY, |m, &v| m.min(v)),
        "holder": holder,
    });
    Ok(Artifacts { table, report })
}

fn variance(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let w = cfg.spectral_weight()?;
    let m = cfg.majorant_spec()?;
    let eps = need(cfg.eps_list.clone(), "eps_list")?;
    let reports = variance_sweep(&w, &m, &eps, cfg.grid_n.unwrap_or(256), cfg.jitter.unwrap_or(DEFAULT_JITTER))?;
    let mut table = Table::new(&[
        "epsilon",
        "grid_upper",
        "karhunen_lower",
        "analytic_bound",
        "chain_holds",
        "unconditional",
        "jitter",
        "cutoff",
    ]);
    for r in &reports {
        table.push(vec![
            r.epsilon.into(),
            r.grid_upper.into(),
            r.karhunen_lower.into(),
            r.analytic_bound.into(),
            r.chain_holds(quasiloc::interp::variance::DEFAULT_SLACK).into(),
            r.unconditional.into(),
            r.jitter.into(),
            r.cutoff.into(),
        ]);
    }
    let curve: Vec<(f64, f64)> = reports.iter().map(|r| (r.epsilon, r.grid_upper / r.unconditional)).collect();
    let eta = fit_eta(&curve).ok();
    let report = json!({
        "reports": to_json(&reports),
        "fitted_eta": eta,
        "eta_from_zeta": cfg.zeta().map(|z| z / (1.0 - z)),
    });
    Ok(Artifacts { table, report })
}

fn bump(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let m = cfg.majorant_spec()?;
    let nu = need(cfg.nu, "nu")?;
    let mut table = Table::new(&["epsilon", "xi", "g"]);
    let mut bumps = Vec::new();
    for eps in need(cfg.eps_list.clone(), "eps_list")? {
        let b = build_bump(&m, eps, nu, cfg.j_cut)?;
        for (xi, g) in b.reconstruct_1d(RECONSTRUCTION_POINTS) {
            table.push(vec![eps.into(), xi.into(), g.into()]);
        }
        bumps.push(json!({
            "epsilon": eps,
            "k0": b.k0,
            "j_cut": b.j_cut,
            "half_support": b.half_support(),
            "period": b.period(),
            "g_zero": b.g_zero(),
            "decay_range": b.decay_range(),
            "radii": b.radii,
        }));
    }
    Ok(Artifacts { table, report: json!({ "bumps": bumps }) })
}

fn spectrum(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let h = operator(cfg, need(cfg.g, "g")?)?;
    let ev = h.eigenvalues();
    let mut table = Table::new(&["index", "eigenvalue"]);
    for (k, e) in ev.iter().enumerate() {
        table.push(vec![k.into(), (*e).into()]);
    }
    let (lo, hi) = h.spectral_hull();
    let report = json!({ "sites": h.len(), "gershgorin": [lo, hi], "min": ev.first(), "max": ev.last() });
    Ok(Artifacts { table, report })
}

fn green(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let h = operator(cfg, need(cfg.g, "g")?)?;
    let energy = need(cfg.energy, "energy")?;
    let source = match &cfg.source {
        Some(s) => s.clone(),
        None => {
            let b = cfg.lattice_box()?;
            b.intervals().iter().map(|(a, z)| (a + z).div_euclid(2)).collect()
        }
    };
    let j = h
        .index_of(&source)
        .ok_or_else(|| CliError::Validation(vec![format!("source {source:?} lies outside the box")]))?;
    let mut res = Resolvent::new(&h, energy)?;
    let column = res.column(j).to_vec();
    res.check()?;
    let mut table = Table::new(&["x", "y", "G", "distance"]);
    let mut shells: Vec<f64> = Vec::new();
    for (x, g) in h.sites().iter().zip(&column) {
        let r = l1_dist(x, &source) as usize;
        if shells.len() <= r {
            shells.resize(r + 1, 0.0);
        }
        shells[r] = shells[r].max(g.abs());
        table.push(vec![site(x).into(), site(&source).into(), (*g).into(), (r as u64).into()]);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = shells
        .iter()
        .enumerate()
        .filter(|(_, a)| **a > 0.0)
        .map(|(r, a)| (r as f64, -a.ln()))
        .unzip();
    let rate = (xs.len() >= 2).then(|| linear_fit(&xs, &ys).slope);
    let report = json!({
        "energy": energy,
        "source": source,
        "condition_estimate": res.condition_estimate(),
        "decay_rate": rate,
    });
    Ok(Artifacts { table, report })
}

fn msa(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let params = need(cfg.msa.clone(), "msa")?;
    let setup = MsaSetup {
        hull: sample_hull(&cfg.spectral_weight()?, need(cfg.seed, "seed")?),
        alpha: cfg.frequency()?,
        omega: cfg.phase()?,
        g: need(cfg.g, "g")?,
    };
    let window = cfg.window.clone().map(LatticeBox::new).transpose()?;
    let opts = MsaOptions {
        k_max: cfg.k_max.unwrap_or(0),
        window,
        energies: cfg.energy_grid_spec()?,
        extra_omegas: cfg.extra_omegas.unwrap_or(0),
        ..MsaOptions::default()
    };
    let cert = check_msa_assumptions(&params, &setup, &opts)?;
    let mut table = Table::new(&[
        "energy",
        "omega_index",
        "k",
        "assumption",
        "passed",
        "bad_count",
        "container",
        "member",
        "subset",
        "value",
    ]);
    let bounds = |b: &LatticeBox| {
        b.intervals().iter().map(|(a, z)| format!("[{a},{z}]")).collect::<Vec<_>>().join("x")
    };
    for c in &cert.checks {
        let k = c.k.map_or(Cell::Text(String::new()), |k| Cell::Int(k as i64));
        let head = |passed: bool| -> Vec<Cell> {
            vec![
                c.energy.into(),
                c.omega_index.into(),
                k.clone(),
                to_json(&c.assumption).as_str().unwrap_or_default().into(),
                passed.into(),
                c.bad_count.into(),
            ]
        };
        match &c.witness {
            None => {
                let mut row = head(true);
                row.extend(["", "", "", ""].map(Cell::from));
                table.push(row);
            }
            Some(w) => {
                for m in &w.members {
                    let mut row = head(false);
                    let subset = m.subset.as_ref().map_or(String::new(), |s| match &s.inner {
                        None => bounds(&s.outer),
                        Some(inner) => format!("{} minus {}", bounds(&s.outer), bounds(inner)),
                    });
                    row.extend([bounds(&w.container).into(), bounds(&m.rect).into(), subset.into(), m.value.into()]);
                    table.push(row);
                }
            }
        }
    }
    Ok(Artifacts { table, report: to_json(&cert) })
}

fn decay_table() -> Table {
    Table::new(&["g", "index", "eigenvalue", "fitted_mass", "residual", "shells_fitted", "floor_limited", "center"])
}

fn decay_rows(table: &mut Table, g: f64, reports: &[quasiloc::msa::DecayReport]) {
    for r in reports {
        table.push(vec![
            g.into(),
            r.index.into(),
            r.eigenvalue.into(),
            r.fitted_mass.into(),
            r.residual.into(),
            r.shells_fitted.into(),
            r.floor_limited.into(),
            site(&r.center).into(),
        ]);
    }
}

fn decay(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let g = need(cfg.g, "g")?;
    let h = operator(cfg, g)?;
    let reports = eigen_decays(&h, &cfg.selector_spec()?, None)?;
    let mut table = decay_table();
    decay_rows(&mut table, g, &reports);
    Ok(Artifacts { table, report: json!({ "reports": to_json(&reports) }) })
}

fn sweep(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let selector = match &cfg.selector {
        Some(_) => cfg.selector_spec()?,
        None => quasiloc::msa::Selector::MidSpectrum(20),
    };
    let mut table = decay_table();
    let mut medians = Vec::new();
    for g in need(cfg.g_list.clone(), "g_list")? {
        let reports = eigen_decays(&operator(cfg, g)?, &selector, None)?;
        decay_rows(&mut table, g, &reports);
        let masses: Vec<f64> = reports.iter().map(|r| r.fitted_mass).collect();
        medians.push(json!({ "g": g, "median_mass": median(&masses), "states": masses.len() }));
    }
    let values: Vec<f64> = medians.iter().map(|m| m["median_mass"].as_f64().unwrap_or(f64::NAN)).collect();
    let nondecreasing = values.windows(2).all(|w| w[1] >= w[0] - 0.02);
    Ok(Artifacts { table, report: json!({ "medians": medians, "nondecreasing_within_0.02": nondecreasing }) })
}

fn census(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let seed = need(cfg.seed, "seed")?;
    let samples = need(cfg.samples, "samples")?;
    let census = CensusConfig {
        weight: cfg.spectral_weight()?,
        alpha: cfg.frequency()?,
        omega: cfg.phase()?,
        g: need(cfg.g, "g")?,
        l: need(cfg.census_l, "census_l")?,
        r: need(cfg.msa.clone(), "msa")?.r,
        k_max: need(cfg.census_k, "census_k")?,
        seeds: (seed..seed + samples).collect(),
    };
    let report = resonance_census(&census)?;
    let mut table = Table::new(&["k", "count", "frequency"]);
    for (i, (c, f)) in report.counts.iter().zip(&report.frequencies).enumerate() {
        table.push(vec![(i + 1).into(), (*c).into(), (*f).into()]);
    }
    Ok(Artifacts { table, report: to_json(&report) })
}
