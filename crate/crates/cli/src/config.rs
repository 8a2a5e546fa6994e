// SPDX-License-Identifier: Apache-2.0

//! Compiler configuration: flags over config file over built-in defaults.
//!
//! The config file is `key=value` text. Besides the base keys it accepts
//! the rates-file keys, the rules-file keys and `layer_<name>` overrides
//! inline, which is what makes `config.resolved` reusable as `--config`.
//! Paths inside a config file are relative to that file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use rramc_core::arch::ArrayConfig;
use rramc_core::kv::KvMap;
use rramc_core::layout::{template_with_layers, CellTemplate, LayerMap};
use rramc_core::parasitics::ParasiticRates;
use rramc_core::transient::{Corner, DEFAULT_C_PORT, DEFAULT_N_REF, DEFAULT_TARGET_SETTLING};
use rramc_core::verify::RuleDeck;

use crate::error::CliError;

pub const ENV_OUT: &str = "RRAMC_OUT";
pub const DEFAULT_ROWS: usize = 8;
pub const DEFAULT_COLS: usize = 8;
pub const DEFAULT_WORD_BITS: usize = 4;
pub const DEFAULT_OUT: &str = "rramc_out";
pub const DEFAULT_SIZES: [usize; 5] = [8, 16, 32, 64, 128];

const BASE_KEYS: [&str; 13] = [
    "rows",
    "cols",
    "word_bits",
    "out",
    "rates",
    "rules",
    "corners",
    "sizes",
    "real_timestamps",
    "n_ref",
    "target_settling_s",
    "c_port_f",
    "fault_seed",
];

fn parse_corner(s: &str) -> Result<Corner, String> {
    Corner::parse(s).ok_or_else(|| format!("unknown corner `{s}` (expected SS, TT or FF)"))
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// key=value config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Rows M (power of two)
    #[arg(long)]
    pub rows: Option<usize>,
    /// Columns N (power of two)
    #[arg(long)]
    pub cols: Option<usize>,
    /// Word width b (divides N into a power of two words per row)
    #[arg(long)]
    pub word_bits: Option<usize>,
    /// Output directory; falls back to the config file, then $RRAMC_OUT
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Parasitic rates file
    #[arg(long)]
    pub rates: Option<PathBuf>,
    /// DRC rules file
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Corners to characterize, comma separated (SS,TT,FF)
    #[arg(long, value_delimiter = ',', value_parser = parse_corner)]
    pub corner: Vec<Corner>,
    /// Sweep sizes in cells per line, comma separated
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    /// Stamp GDSII records with the current time instead of the epoch
    #[arg(long)]
    pub real_timestamps: bool,
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone)]
pub struct CompilerConfig {
    pub array: ArrayConfig,
    pub out: PathBuf,
    pub rates: ParasiticRates,
    pub layers: LayerMap,
    pub template: CellTemplate,
    pub deck: RuleDeck,
    pub corners: Vec<Corner>,
    pub sizes: Vec<usize>,
    pub real_timestamps: bool,
    pub n_ref: usize,
    pub target_settling: f64,
    pub c_port: f64,
    pub fault_seed: u64,
}

fn read_kv(path: &Path) -> Result<KvMap, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    KvMap::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn overlay(base: &mut KvMap, top: &KvMap) {
    for k in top.keys() {
        base.insert(k, top.get(k).unwrap_or_default());
    }
}

fn parse_list<T>(key: &str, text: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| item(s).map_err(|e| CliError::Config(format!("{key}: {e}"))))
        .collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Config(format!("{key}: expected true or false, got `{v}`"))),
    }
}

impl CompilerConfig {
    /// Resolves `args` against the config file they name, `env_out` (the
    /// value of `RRAMC_OUT`, if any) and the defaults.
    pub fn resolve(args: &CommonArgs, env_out: Option<PathBuf>) -> Result<Self, CliError> {
        let (file, base_dir) = match &args.config {
            Some(p) => (
                read_kv(p)?,
                p.parent().map(Path::to_path_buf).unwrap_or_default(),
            ),
            None => (KvMap::default(), PathBuf::new()),
        };
        let rate_keys: Vec<String> = ParasiticRates::default().to_kv().keys().map(str::to_string).collect();
        let (mut base, mut inline_rates, mut inline_rules, mut layer_kv) =
            (KvMap::default(), KvMap::default(), KvMap::default(), KvMap::default());
        for k in file.keys() {
            let v = file.get(k).unwrap_or_default();
            if BASE_KEYS.contains(&k) {
                base.insert(k, v);
            } else if rate_keys.iter().any(|r| r == k) {
                inline_rates.insert(k, v);
            } else if k.contains(".min_") {
                inline_rules.insert(k, v);
            } else if k.starts_with("layer_") {
                layer_kv.insert(k, v);
            } else {
                return Err(CliError::Config(format!("unknown config key `{k}`")));
            }
        }
        let file_usize = |k: &str| base.get_usize(k).map_err(CliError::config);
        let file_f64 = |k: &str| base.get_f64(k).map_err(CliError::config);
        let file_path = |k: &str| base.get(k).map(|p| base_dir.join(p));

        let rows = args.rows.or(file_usize("rows")?).unwrap_or(DEFAULT_ROWS);
        let cols = args.cols.or(file_usize("cols")?).unwrap_or(DEFAULT_COLS);
        let word_bits = args.word_bits.or(file_usize("word_bits")?).unwrap_or(DEFAULT_WORD_BITS);
        let array = ArrayConfig::derive_geometry(rows, cols, word_bits).map_err(CliError::config)?;

        let out = args
            .out
            .clone()
            .or_else(|| file_path("out"))
            .or(env_out)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));

        let mut rates_kv = match args.rates.clone().or_else(|| file_path("rates")) {
            Some(p) => read_kv(&p)?,
            None => KvMap::default(),
        };
        overlay(&mut rates_kv, &inline_rates);
        let rates = ParasiticRates::from_kv(&rates_kv).map_err(CliError::config)?;

        let mut layers = LayerMap::default();
        let allowed: Vec<String> = layers.kv_keys();
        if let Some(k) = layer_kv.keys().find(|k| !allowed.iter().any(|a| a == k)) {
            return Err(CliError::Config(format!("unknown layer key `{k}`")));
        }
        layers.apply_kv(&layer_kv).map_err(CliError::config)?;
        let template = template_with_layers(&layers).map_err(CliError::config)?;

        let mut rules_kv = match args.rules.clone().or_else(|| file_path("rules")) {
            Some(p) => read_kv(&p)?,
            None => KvMap::default(),
        };
        overlay(&mut rules_kv, &inline_rules);
        let deck = RuleDeck::from_kv(&rules_kv, &layers).map_err(CliError::config)?;

        let mut corners = if !args.corner.is_empty() {
            args.corner.clone()
        } else if let Some(v) = base.get("corners") {
            parse_list("corners", v, parse_corner)?
        } else {
            Corner::ALL.to_vec()
        };
        corners.sort();
        corners.dedup();
        if corners.is_empty() {
            return Err(CliError::Config("no corners selected".into()));
        }

        let mut sizes = if !args.sizes.is_empty() {
            args.sizes.clone()
        } else if let Some(v) = base.get("sizes") {
            parse_list("sizes", v, |s| s.parse::<usize>().map_err(|e| e.to_string()))?
        } else {
            DEFAULT_SIZES.to_vec()
        };
        sizes.sort_unstable();
        sizes.dedup();
        if sizes.is_empty() || sizes[0] == 0 {
            return Err(CliError::Config("sizes must be positive".into()));
        }

        let real_timestamps = args.real_timestamps
            || base
                .get("real_timestamps")
                .map(|v| parse_bool("real_timestamps", v))
                .transpose()?
                .unwrap_or(false);
        let n_ref = file_usize("n_ref")?.unwrap_or(DEFAULT_N_REF);
        if n_ref == 0 {
            return Err(CliError::Config("n_ref must be positive".into()));
        }
        let target_settling = file_f64("target_settling_s")?.unwrap_or(DEFAULT_TARGET_SETTLING);
        let c_port = file_f64("c_port_f")?.unwrap_or(DEFAULT_C_PORT);
        for (k, v) in [("target_settling_s", target_settling), ("c_port_f", c_port)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Config(format!("{k} must be positive, got {v}")));
            }
        }
        let fault_seed = base
            .get("fault_seed")
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| CliError::Config(format!("fault_seed: bad value `{v}`")))
            })
            .transpose()?
            .unwrap_or(0);

        Ok(CompilerConfig {
            array,
            out,
            rates,
            layers,
            template,
            deck,
            corners,
            sizes,
            real_timestamps,
            n_ref,
            target_settling,
            c_port,
            fault_seed,
        })
    }

    /// Effective configuration as config-file text. The output directory is
    /// left out so that identical configurations produce identical files.
    pub fn resolved_text(&self) -> String {
        let mut kv = KvMap::default();
        kv.insert("rows", self.array.rows().to_string());
        kv.insert("cols", self.array.cols().to_string());
        kv.insert("word_bits", self.array.word_bits().to_string());
        let corners: Vec<&str> = self.corners.iter().map(|c| c.as_str()).collect();
        kv.insert("corners", corners.join(","));
        let sizes: Vec<String> = self.sizes.iter().map(usize::to_string).collect();
        kv.insert("sizes", sizes.join(","));
        kv.insert("real_timestamps", self.real_timestamps.to_string());
        kv.insert("n_ref", self.n_ref.to_string());
        kv.insert("target_settling_s", format!("{:e}", self.target_settling));
        kv.insert("c_port_f", format!("{:e}", self.c_port));
        kv.insert("fault_seed", self.fault_seed.to_string());
        for (name, id) in self.layers.iter() {
            kv.insert(format!("layer_{}", name.to_ascii_lowercase()), id.to_string());
        }
        overlay(&mut kv, &self.rates.to_kv());
        overlay(&mut kv, &self.deck.to_kv());
        format!("# effective rramc configuration\n{}", kv.to_text())
    }
}
