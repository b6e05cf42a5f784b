//! Benchmark schemes, experiment configuration and sweeps, and CSV/JSON
//! persistence.
//!
//! A config is a TOML file:
//!
//! ```toml
//! name = "lx-sweep"            # prefix of scenario_id
//! pipeline = "multi_oma"       # ergodic_single | ergodic_multi | single_tdma | multi_oma
//! schemes = ["DF-PAS", "SF-PAS", "RANDOM-PA", "CONVENTIONAL"]
//! seeds = [0, 1, 2]
//! output = "lx.csv"            # optional
//! record_runtime = true        # false writes runtime_ms = 0
//!
//! [scenario]                   # any ScenarioParams field
//! transmit_power_dbm = 30
//!
//! [optimizer]                  # any OptimizerConfig field
//! epsilon = 1e-6
//!
//! [montecarlo]                 # any McConfig field
//! num_drops = 100000
//!
//! [sweep]                      # optional; one row group per value
//! parameter = "service_length_m"
//! values = [10, 20, 30]
//! ```
//!
//! The ergodic pipelines support DF-PAS and SF-PAS only and report the
//! closed form (`erate_closed`) and a Monte Carlo estimate (`erate_mc`) whose
//! seed is the row seed. The other pipelines draw the scenario from the row
//! seed and report `sum_rate`.

mod io;
mod schemes;

pub use io::{
    emit_csv, emit_json, read_csv, read_json, write_csv, ResultRow, TraceDocument, CSV_COLUMNS, TRACE_SCHEMA_VERSION,
};
pub use schemes::{multi_oma, single_tdma, MultiOutcome, SchemeId, TdmaOutcome};

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::{mc_ergodic_rate_multi, mc_ergodic_rate_single, FeedRule, McConfig};
use crate::multi_wg::{ergodic_rate_multi_closed, ergodic_rate_multi_closed_sf};
use crate::optimizer::OptimizerConfig;
use crate::phys::{propagated_power, watts_to_dbm};
use crate::scenario::{ScenarioParams, SWEEPABLE};
use crate::single_wg::{ergodic_rate_df_closed, ergodic_rate_sf_closed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    ErgodicSingle,
    ErgodicMulti,
    SingleTdma,
    MultiOma,
}

impl Pipeline {
    const NAMES: [(&'static str, Pipeline); 4] = [
        ("ergodic_single", Pipeline::ErgodicSingle),
        ("ergodic_multi", Pipeline::ErgodicMulti),
        ("single_tdma", Pipeline::SingleTdma),
        ("multi_oma", Pipeline::MultiOma),
    ];

    fn parse(s: &str) -> Result<Self> {
        Self::NAMES
            .iter()
            .find(|(name, _)| *name == s)
            .map(|(_, p)| *p)
            .ok_or_else(|| {
                let known: Vec<_> = Self::NAMES.iter().map(|(n, _)| *n).collect();
                Error::config(
                    "pipeline",
                    format!("unknown pipeline `{s}`; expected one of {}", known.join(", ")),
                )
            })
    }

    fn supports(self, scheme: SchemeId) -> bool {
        match self {
            Pipeline::ErgodicSingle | Pipeline::ErgodicMulti => {
                matches!(scheme, SchemeId::DfPas | SchemeId::SfPas)
            }
            Pipeline::SingleTdma | Pipeline::MultiOma => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub pipeline: Pipeline,
    pub schemes: Vec<SchemeId>,
    pub seeds: Vec<u64>,
    pub output: Option<PathBuf>,
    pub record_runtime: bool,
    pub scenario: ScenarioParams,
    pub optimizer: OptimizerConfig,
    pub montecarlo: McConfig,
    pub sweep: Option<SweepAxis>,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    pipeline: String,
    schemes: Option<Vec<String>>,
    seeds: Option<Vec<u64>>,
    output: Option<PathBuf>,
    #[serde(default = "yes")]
    record_runtime: bool,
    #[serde(default)]
    scenario: ScenarioParams,
    #[serde(default)]
    optimizer: OptimizerConfig,
    #[serde(default)]
    montecarlo: McConfig,
    sweep: Option<SweepAxis>,
}

impl ScenarioConfig {
    /// DF-PAS and SF-PAS at seed 0 with default parameters and no sweep.
    pub fn new(pipeline: Pipeline) -> Self {
        Self {
            name: "run".into(),
            pipeline,
            schemes: vec![SchemeId::DfPas, SchemeId::SfPas],
            seeds: vec![0],
            output: None,
            record_runtime: true,
            scenario: ScenarioParams::default(),
            optimizer: OptimizerConfig::default(),
            montecarlo: McConfig::default(),
            sweep: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))?;
        let pipeline = Pipeline::parse(&raw.pipeline)?;
        let defaults = Self::new(pipeline);
        let schemes = match raw.schemes {
            Some(names) => names.iter().map(|s| s.parse()).collect::<Result<_>>()?,
            None => defaults.schemes,
        };
        let cfg = Self {
            name: raw.name.unwrap_or(defaults.name),
            pipeline,
            schemes,
            seeds: raw.seeds.unwrap_or(defaults.seeds),
            output: raw.output,
            record_runtime: raw.record_runtime,
            scenario: raw.scenario,
            optimizer: raw.optimizer,
            montecarlo: raw.montecarlo,
            sweep: raw.sweep,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        for scheme in &self.schemes {
            if !self.pipeline.supports(*scheme) {
                return Err(Error::config(
                    "schemes",
                    format!("{scheme} is not available for pipeline {:?}", self.pipeline),
                ));
            }
        }
        self.scenario.validate()?;
        self.optimizer.validate()?;
        self.montecarlo.validate()?;
        if let Some(axis) = &self.sweep {
            if !SWEEPABLE.contains(&axis.parameter.as_str()) {
                return Err(Error::config(
                    "sweep.parameter",
                    format!(
                        "unknown parameter `{}`; expected one of {}",
                        axis.parameter,
                        SWEEPABLE.join(", ")
                    ),
                ));
            }
            for &v in &axis.values {
                self.params_at(&axis.parameter, v)?.validate()?;
            }
        }
        Ok(())
    }

    fn params_at(&self, parameter: &str, value: f64) -> Result<ScenarioParams> {
        let mut p = self.scenario.clone();
        p.set(parameter, value)?;
        Ok(p)
    }
}

struct Cell {
    scenario_id: String,
    swept: Option<(String, f64)>,
    params: ScenarioParams,
    scheme: SchemeId,
    seed: u64,
}

/// Runs every (sweep value, scheme, seed) cell in parallel and returns the
/// rows in that nested order.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let points: Vec<(Option<(String, f64)>, ScenarioParams)> = match &cfg.sweep {
        Some(axis) => axis
            .values
            .iter()
            .map(|&v| Ok((Some((axis.parameter.clone(), v)), cfg.params_at(&axis.parameter, v)?)))
            .collect::<Result<_>>()?,
        None => vec![(None, cfg.scenario.clone())],
    };
    let mut cells = Vec::new();
    for (i, (swept, params)) in points.iter().enumerate() {
        for &scheme in &cfg.schemes {
            for &seed in &cfg.seeds {
                cells.push(Cell {
                    scenario_id: format!("{}-{i}", cfg.name),
                    swept: swept.clone(),
                    params: params.clone(),
                    scheme,
                    seed,
                });
            }
        }
    }
    let rows: Vec<Vec<ResultRow>> = cells.par_iter().map(|c| run_cell(cfg, c)).collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

fn run_cell(cfg: &ScenarioConfig, cell: &Cell) -> Result<Vec<ResultRow>> {
    let started = Instant::now();
    let p = &cell.params;
    let mc = McConfig {
        rng_seed: cell.seed,
        ..cfg.montecarlo.clone()
    };
    let dual = cell.scheme == SchemeId::DfPas;
    let rule = if dual { FeedRule::Nearest } else { FeedRule::Left };
    let metrics: Vec<(&str, f64, Option<f64>)> = match cfg.pipeline {
        Pipeline::ErgodicSingle => {
            let s = p.single_scenario(cell.seed)?;
            let closed = if dual {
                ergodic_rate_df_closed(&s)
            } else {
                ergodic_rate_sf_closed(&s)
            };
            let est = mc_ergodic_rate_single(&s, rule, &mc)?;
            vec![
                ("erate_closed", closed, None),
                ("erate_mc", est.mean_rate, Some(est.ci_halfwidth)),
            ]
        }
        Pipeline::ErgodicMulti => {
            let s = p.multi_scenario(cell.seed)?;
            let closed = if dual {
                ergodic_rate_multi_closed(&s)
            } else {
                ergodic_rate_multi_closed_sf(&s)
            };
            let est = mc_ergodic_rate_multi(&s, rule, &mc)?;
            vec![
                ("erate_closed", closed, None),
                ("erate_mc", est.mean_rate, Some(est.ci_halfwidth)),
            ]
        }
        Pipeline::SingleTdma => {
            let s = p.single_scenario(cell.seed)?;
            vec![("sum_rate", single_tdma(&s, cell.scheme, cell.seed)?.sum_rate, None)]
        }
        Pipeline::MultiOma => {
            let s = p.multi_scenario(cell.seed)?;
            let out = multi_oma(&s, cell.scheme, &cfg.optimizer, cell.seed)?;
            let mut m = vec![("sum_rate", out.report.sum_rate, None)];
            if let Some(opt) = &out.optimization {
                m.push(("phase_one_rate", opt.phase_one_rate, None));
                m.push(("outer_iterations", opt.outer_iterations as f64, None));
            }
            m
        }
    };
    let runtime_ms = if cfg.record_runtime {
        started.elapsed().as_millis() as u64
    } else {
        0
    };
    let (swept_name, swept_value) = match &cell.swept {
        Some((name, v)) => (name.clone(), Some(*v)),
        None => (String::new(), None),
    };
    Ok(metrics
        .into_iter()
        .map(|(metric, value, ci)| ResultRow {
            scenario_id: cell.scenario_id.clone(),
            scheme: cell.scheme.to_string(),
            seed: cell.seed,
            swept_name: swept_name.clone(),
            swept_value,
            metric: metric.into(),
            value,
            ci_halfwidth: ci,
            runtime_ms,
        })
        .collect())
}

/// Power left in the waveguide after `z` meters for `z` on a uniform grid
/// over `[0, max_length_m]`, in watts and dBm.
pub fn attenuation_curve(params: &ScenarioParams, max_length_m: f64, points: usize) -> Result<Vec<ResultRow>> {
    params.validate()?;
    if !(max_length_m.is_finite() && max_length_m >= 0.0) {
        return Err(Error::config(
            "max_length_m",
            format!("must be non-negative, got {max_length_m}"),
        ));
    }
    if points < 2 {
        return Err(Error::config("points", "need at least 2 grid points"));
    }
    let alpha = params.alpha()?;
    let p_in = params.transmit_power_w();
    let mut rows = Vec::with_capacity(2 * points);
    for i in 0..points {
        let z = max_length_m * i as f64 / (points - 1) as f64;
        let p = propagated_power(p_in, alpha, z)?;
        for (metric, value) in [("power_w", p), ("power_dbm", watts_to_dbm(p))] {
            rows.push(ResultRow {
                scenario_id: "attenuation".into(),
                scheme: "waveguide".into(),
                seed: 0,
                swept_name: "z_m".into(),
                swept_value: Some(z),
                metric: metric.into(),
                value,
                ci_halfwidth: None,
                runtime_ms: 0,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_config_parses_with_defaults() {
        let cfg = ScenarioConfig::from_toml_str(
            r#"
            pipeline = "single_tdma"
            schemes = ["DF-PAS", "conventional"]
            [scenario]
            transmit_power_dbm = 40
            [sweep]
            parameter = "service_length_m"
            values = [10, 20.5]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.schemes, vec![SchemeId::DfPas, SchemeId::Conventional]);
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.scenario.transmit_power_dbm, 40.0);
        assert_eq!(cfg.sweep.unwrap().values, vec![10.0, 20.5]);
    }

    fn config_field(text: &str) -> String {
        match ScenarioConfig::from_toml_str(text) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_errors_name_the_field() {
        assert_eq!(config_field("pipeline = \"x\""), "pipeline");
        assert_eq!(
            config_field("pipeline = \"multi_oma\"\nschemes = [\"NOMA\"]"),
            "schemes"
        );
        assert_eq!(
            config_field("pipeline = \"ergodic_single\"\nschemes = [\"RANDOM-PA\"]"),
            "schemes"
        );
        assert_eq!(
            config_field("pipeline = \"multi_oma\"\n[sweep]\nparameter = \"warp\"\nvalues = [1]"),
            "sweep.parameter"
        );
        assert_eq!(
            config_field("pipeline = \"multi_oma\"\n[sweep]\nparameter = \"num_users\"\nvalues = [1.5]"),
            "num_users"
        );
        assert_eq!(
            config_field("pipeline = \"multi_oma\"\n[optimizer]\nbls_contraction = 2"),
            "bls_contraction"
        );
        match ScenarioConfig::from_toml_str("pipeline = \"multi_oma\"\nbogus = 1") {
            Err(Error::Config { message, .. }) => assert!(message.contains("bogus")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_sweep_gives_no_rows() {
        let mut cfg = ScenarioConfig::new(Pipeline::SingleTdma);
        cfg.sweep = Some(SweepAxis {
            parameter: "transmit_power_dbm".into(),
            values: vec![],
        });
        assert!(run_sweep(&cfg).unwrap().is_empty());
    }

    #[test]
    fn repeated_runs_are_identical_and_ordered() {
        let mut cfg = ScenarioConfig::new(Pipeline::MultiOma);
        cfg.record_runtime = false;
        cfg.schemes = SchemeId::ALL.to_vec();
        cfg.seeds = vec![3, 3, 4];
        cfg.scenario.num_waveguides = 2;
        cfg.scenario.num_users = 2;
        cfg.sweep = Some(SweepAxis {
            parameter: "service_length_m".into(),
            values: vec![10.0, 20.0],
        });
        let a = run_sweep(&cfg).unwrap();
        assert_eq!(a, run_sweep(&cfg).unwrap());
        let sum_rates: Vec<_> = a.iter().filter(|r| r.metric == "sum_rate").collect();
        assert_eq!(sum_rates.len(), 2 * 4 * 3);
        assert_eq!(sum_rates[0].value, sum_rates[1].value);
        assert_eq!(sum_rates[0].scheme, "DF-PAS");
        assert_eq!(sum_rates[3].scheme, "SF-PAS");
        assert_eq!(sum_rates[12].swept_value, Some(20.0));
        assert_eq!(sum_rates[12].scenario_id, "run-1");
    }

    #[test]
    fn dual_feed_tdma_dominates_across_power_sweep() {
        let mut cfg = ScenarioConfig::new(Pipeline::SingleTdma);
        cfg.seeds = (0..5).collect();
        cfg.sweep = Some(SweepAxis {
            parameter: "transmit_power_dbm".into(),
            values: vec![20.0, 25.0, 30.0, 35.0, 40.0],
        });
        let rows = run_sweep(&cfg).unwrap();
        let (df, sf): (Vec<_>, Vec<_>) = rows.iter().partition(|r| r.scheme == "DF-PAS");
        assert_eq!(df.len(), sf.len());
        for (d, s) in df.iter().zip(&sf) {
            assert_eq!((d.seed, d.swept_value), (s.seed, s.swept_value));
            assert!(d.value >= s.value);
        }
    }

    #[test]
    fn ergodic_rows_carry_ci_only_for_monte_carlo() {
        let mut cfg = ScenarioConfig::new(Pipeline::ErgodicSingle);
        cfg.montecarlo.num_drops = 2000;
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        for r in rows {
            assert_eq!(r.ci_halfwidth.is_some(), r.metric == "erate_mc");
        }
    }

    #[test]
    fn attenuation_curve_reaches_fifteen_dbm_at_ten_meters() {
        let rows = attenuation_curve(&ScenarioParams::default(), 10.0, 11).unwrap();
        let last = rows.iter().rev().find(|r| r.metric == "power_dbm").unwrap();
        assert_eq!(last.swept_value, Some(10.0));
        assert!((last.value - 15.2).abs() < 0.1);
    }
}
