//! Level sweeps and scheme comparisons behind the command-line tool.

use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use crate::diagnostics::{final_time_errors, ConvergenceTable, ErrorReport, SummedErrors};
use crate::error::{Error, Result};
use crate::manufactured::{case_by_name, default_order, ManufacturedCase};
use crate::schemes::{run_in_context, Retention, SchemeConfig, SchemeContext, Variant};

/// Highest level accepted without `allow_large`.
pub const DEFAULT_MAX_LEVEL: u32 = 6;
/// Hard ceiling on the level, whatever the flags say.
pub const LEVEL_CEILING: u32 = 8;

/// Settings shared by all subcommands; any field may come from a flat TOML
/// file and be overridden on the command line.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: String,
    pub variant: String,
    pub kmin: u32,
    pub kmax: u32,
    pub alpha: f64,
    pub order: Option<usize>,
    pub final_time: f64,
    pub jobs: Option<usize>,
    pub allow_large: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            case: "example1".into(),
            variant: "improved".into(),
            kmin: 3,
            kmax: 6,
            alpha: 4.0,
            order: None,
            final_time: 0.25,
            jobs: None,
            allow_large: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn variant(&self) -> Result<Variant> {
        self.variant.parse()
    }

    pub fn case(&self) -> Result<ManufacturedCase> {
        case_by_name(&self.case)
    }

    pub fn fe_order(&self) -> usize {
        self.order.unwrap_or_else(|| default_order(&self.case))
    }

    pub fn check_level(&self, level: u32) -> Result<()> {
        if level > LEVEL_CEILING {
            return Err(Error::ResourceLimit(format!(
                "level {level} exceeds the ceiling {LEVEL_CEILING}"
            )));
        }
        if level > DEFAULT_MAX_LEVEL && !self.allow_large {
            return Err(Error::ResourceLimit(format!(
                "level {level} above {DEFAULT_MAX_LEVEL} needs the large-run opt-in"
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.case()?;
        self.variant()?;
        if self.kmin > self.kmax {
            return Err(Error::config(format!(
                "empty level range {}..={}",
                self.kmin, self.kmax
            )));
        }
        self.check_level(self.kmax)?;
        if !(self.alpha > 0.0) {
            return Err(Error::config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !matches!(self.fe_order(), 1 | 2) {
            return Err(Error::config(format!("order must be 1 or 2, got {}", self.fe_order())));
        }
        if self.jobs == Some(0) {
            return Err(Error::config("jobs must be at least 1"));
        }
        Ok(())
    }

    pub fn scheme_config(&self, variant: Variant, level: u32) -> Result<SchemeConfig> {
        let case = self.case()?;
        Ok(SchemeConfig::for_level(
            &case,
            variant,
            level,
            self.alpha,
            self.final_time,
            self.fe_order(),
        ))
    }
}

/// Runs one scheme configuration and measures every error quantity.
pub fn run_and_measure(
    case: &ManufacturedCase,
    config: &SchemeConfig,
    level: Option<u32>,
) -> Result<ErrorReport> {
    let mut ctx = SchemeContext::new(case, config)?;
    let mut sums = SummedErrors::new(config.dt);
    let traj = run_in_context(&mut ctx, Retention::LastThree, &mut |ctx, state| {
        sums.observe(&ctx.spaces, &ctx.case, state)
    })?;
    let (e_u, e_du, e_dw, e_gdu) = final_time_errors(&traj, case, &ctx.spaces)?;
    let (e_gdus, e_gdws, e_dls, e_gdu2s, e_ggdus) = sums.finish();
    Ok(ErrorReport {
        level,
        dt: config.dt,
        h: 1.0 / config.nx as f64,
        n_steps: traj.n_steps,
        e_u,
        e_du,
        e_dw,
        e_gdu,
        e_gdus,
        e_gdws,
        e_dls,
        e_gdu2s,
        e_ggdus,
    })
}

pub fn run_level(cfg: &ExperimentConfig, variant: Variant, level: u32) -> Result<ErrorReport> {
    cfg.check_level(level)?;
    let case = cfg.case()?;
    run_and_measure(&case, &cfg.scheme_config(variant, level)?, Some(level))
}

/// Reports of a level sweep; on failure the completed lower levels are kept.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub variant: Variant,
    pub reports: Vec<ErrorReport>,
    pub failure: Option<(u32, String)>,
}

impl Sweep {
    pub fn is_partial(&self) -> bool {
        self.failure.is_some()
    }

    pub fn final_table(&self) -> ConvergenceTable {
        ConvergenceTable::new(&ErrorReport::FINAL_COLUMNS, self.reports.clone())
    }

    /// Summed quantities; the broken-H² column only makes sense above P1.
    pub fn sums_table(&self, fe_order: usize) -> ConvergenceTable {
        let cols: Vec<&str> = ErrorReport::SUM_COLUMNS
            .iter()
            .copied()
            .filter(|c| fe_order > 1 || *c != "e_ggdus")
            .collect();
        ConvergenceTable::new(&cols, self.reports.clone())
    }
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs levels `kmin..=kmax` in parallel; results come back in level order.
pub fn convergence(cfg: &ExperimentConfig, variant: Variant) -> Result<Sweep> {
    cfg.validate()?;
    let levels: Vec<u32> = (cfg.kmin..=cfg.kmax).collect();
    let results: Vec<Result<ErrorReport>> = with_pool(cfg.jobs, || {
        levels.par_iter().map(|&k| run_level(cfg, variant, k)).collect()
    })?;
    let mut reports = Vec::new();
    let mut failure = None;
    for (k, r) in levels.iter().zip(results) {
        match r {
            Ok(rep) if failure.is_none() => reports.push(rep),
            Ok(_) => {}
            Err(e) => {
                if failure.is_none() {
                    failure = Some((*k, e.to_string()));
                }
            }
        }
    }
    Ok(Sweep {
        variant,
        reports,
        failure,
    })
}

/// The same levels under several variants.
pub fn compare(cfg: &ExperimentConfig, variants: &[Variant]) -> Result<Vec<Sweep>> {
    variants.iter().map(|&v| convergence(cfg, v)).collect()
}

/// Wide table: one row per level, value and order of `columns` per variant.
pub fn write_compare_csv(sweeps: &[Sweep], columns: &[&str], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["k".to_string()];
    for s in sweeps {
        for c in columns {
            header.push(format!("{}_{c}", s.variant));
            header.push(format!("{}_{c}_order", s.variant));
        }
    }
    w.write_record(&header)?;
    let levels: Vec<u32> = sweeps
        .iter()
        .flat_map(|s| s.reports.iter().filter_map(|r| r.level))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    for k in levels {
        let mut row = vec![k.to_string()];
        for s in sweeps {
            let table = s.final_table();
            let idx = s.reports.iter().position(|r| r.level == Some(k));
            for c in columns {
                match idx {
                    Some(i) => {
                        row.push(format!("{:e}", s.reports[i].get(c).unwrap_or(f64::NAN)));
                        row.push(table.orders(c)[i].map_or(String::new(), |o| o.to_string()));
                    }
                    None => {
                        row.push(String::new());
                        row.push(String::new());
                    }
                }
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Single-run CSV: one header and one data row.
pub fn write_run_csv(variant: Variant, report: &ErrorReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["variant", "k", "dt", "h", "n_steps"];
    header.extend(ErrorReport::FINAL_COLUMNS);
    header.extend(ErrorReport::SUM_COLUMNS);
    w.write_record(&header)?;
    let mut row = vec![
        variant.to_string(),
        report.level.map_or(String::new(), |k| k.to_string()),
        format!("{:e}", report.dt),
        format!("{:e}", report.h),
        report.n_steps.to_string(),
    ];
    for c in ErrorReport::FINAL_COLUMNS.iter().chain(&ErrorReport::SUM_COLUMNS) {
        row.push(format!("{:e}", report.get(c).unwrap_or(f64::NAN)));
    }
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_limits() {
        let mut cfg = ExperimentConfig::default();
        cfg.kmax = 7;
        assert!(matches!(cfg.validate(), Err(Error::ResourceLimit(_))));
        cfg.allow_large = true;
        cfg.validate().unwrap();
        cfg.kmax = 9;
        assert!(matches!(cfg.validate(), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn toml_overrides_defaults() {
        let cfg: ExperimentConfig = toml::from_str("case = \"example3\"\nalpha = 2.0\n").unwrap();
        assert_eq!(cfg.case, "example3");
        assert_eq!(cfg.alpha, 2.0);
        assert_eq!(cfg.fe_order(), 2);
        assert_eq!(cfg.kmin, 3);
        assert!(toml::from_str::<ExperimentConfig>("bogus = 1").is_err());
    }

    #[test]
    fn bad_inputs_are_config_errors() {
        let cfg = ExperimentConfig {
            case: "nope".into(),
            ..Default::default()
        };
        assert!(cfg.validate().unwrap_err().is_config());
        let cfg = ExperimentConfig {
            alpha: -1.0,
            ..Default::default()
        };
        assert!(cfg.validate().unwrap_err().is_config());
    }
}
