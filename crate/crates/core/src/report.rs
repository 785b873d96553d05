//! Pipeline orchestration: configuration, the `run`, `validate` and `synth`
//! commands, and the text/CSV writers for every emitted table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::calendar::YearMonth;
use crate::cgo::{self, CgoConfig, FIGURE_PROBS};
use crate::double_sort::{self, DoubleSortTable, GridSeries, N_GROUPS, TABLE_COLUMNS};
use crate::error::{Error, Result};
use crate::fama_macbeth::{self, Column, FmSpec, FmTable, N_SPECS};
use crate::newey_west::LagRule;
use crate::panel::{self, IngestConfig, IngestReport, PanelPaths, StockPanel};
use crate::preprocess::{self, UniverseConfig};
use crate::proxies::{self, FactorSource, Proxy, ProxyConfig};
use crate::synth::{self, DgpConfig, SynthMarket};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "run_manifest.txt";
pub const PERCENTILE_FILE: &str = "cgo_percentiles.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

/// Keys with this prefix configure the synthetic generator and are ignored
/// by the pipeline configuration.
const SYNTH_PREFIX: &str = "synth.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmitFormats {
    pub text: bool,
    pub csv: bool,
}

impl Default for EmitFormats {
    fn default() -> Self {
        Self { text: true, csv: true }
    }
}

impl FromStr for EmitFormats {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut f = EmitFormats {
            text: false,
            csv: false,
        };
        for tok in list_items(s) {
            match tok {
                "text" | "txt" => f.text = true,
                "csv" => f.csv = true,
                other => return Err(format!("unknown format `{other}` (expected text, csv)")),
            }
        }
        if !f.text && !f.csv {
            return Err("at least one output format is required".into());
        }
        Ok(f)
    }
}

impl std::fmt::Display for EmitFormats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v: Vec<&str> = [(self.text, "text"), (self.csv, "csv")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        f.write_str(&v.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    pub sample_start: YearMonth,
    pub sample_end: YearMonth,
    pub universe: UniverseConfig,
    pub nw_lag: LagRule,
    pub proxies: Vec<Proxy>,
    pub emit_formats: EmitFormats,
    /// Also write the full 5x5 mean-return grid per proxy.
    pub full_grid: bool,
    /// Also write monthly portfolio returns and cross-sectional slopes.
    pub dump_monthly: bool,
    pub lenient: bool,
    pub fm_winsorize: bool,
    pub fm_min_months: usize,
    pub cgo: CgoConfig,
    pub proxy: ProxyConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            sample_start: YearMonth::new(1995, 1).expect("valid month"),
            sample_end: YearMonth::new(2024, 8).expect("valid month"),
            universe: UniverseConfig::default(),
            nw_lag: LagRule::default(),
            proxies: Proxy::ALL.to_vec(),
            emit_formats: EmitFormats::default(),
            full_grid: false,
            dump_monthly: false,
            lenient: false,
            fm_winsorize: true,
            fm_min_months: 24,
            cgo: CgoConfig::default(),
            proxy: ProxyConfig::default(),
        }
    }
}

fn list_items(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("{key}: cannot parse `{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::InvalidConfig(format!(
            "{key}: expected a boolean, got `{value}`"
        ))),
    }
}

pub fn parse_proxies(value: &str) -> Result<Vec<Proxy>> {
    let mut out: Vec<Proxy> = Vec::new();
    for tok in list_items(value) {
        let p: Proxy = parse_value("proxies", tok)?;
        if !out.contains(&p) {
            out.push(p);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig("proxies: list is empty".into()));
    }
    Ok(out)
}

pub fn parse_lag(value: &str) -> Result<LagRule> {
    if value.eq_ignore_ascii_case("auto") {
        Ok(LagRule::Auto)
    } else {
        parse_value("nw_lag", value).map(LagRule::Fixed)
    }
}

/// One `key = value` entry of a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEntry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Parses the flat config grammar: one `key = value` per line, `#` starts a
/// comment, blank lines are ignored, later keys override earlier ones.
pub fn parse_key_values(text: &str) -> Result<Vec<ConfigEntry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected `key = value`, got `{line}`", i + 1)))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::InvalidConfig(format!("line {}: empty key", i + 1)));
        }
        out.push(ConfigEntry {
            line: i + 1,
            key: key.to_string(),
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn with_line(path: &Path, line: usize, e: Error) -> Error {
    match e {
        Error::InvalidConfig(m) if line == 0 => Error::InvalidConfig(format!("{}: {m}", path.display())),
        Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}:{line}: {m}", path.display())),
        other => other,
    }
}

impl PipelineConfig {
    /// Sets one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let u = &mut self.universe;
        match key {
            "data_dir" => self.data_dir = PathBuf::from(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "sample_start" => self.sample_start = parse_value(key, value)?,
            "sample_end" => self.sample_end = parse_value(key, value)?,
            "proxies" => self.proxies = parse_proxies(value)?,
            "nw_lag" => self.nw_lag = parse_lag(value)?,
            "emit_formats" => self.emit_formats = parse_value(key, value)?,
            "full_grid" => self.full_grid = parse_bool(key, value)?,
            "dump_monthly" => self.dump_monthly = parse_bool(key, value)?,
            "lenient" => self.lenient = parse_bool(key, value)?,
            "fm.winsorize" => self.fm_winsorize = parse_bool(key, value)?,
            "fm.min_months" => self.fm_min_months = parse_value(key, value)?,
            "universe.min_history_years" => u.min_history_years = parse_value(key, value)?,
            "universe.min_price" => u.min_price = parse_value(key, value)?,
            "universe.exclude_blacklisted" => u.exclude_blacklisted = parse_bool(key, value)?,
            "universe.exclude_untradable" => u.exclude_untradable = parse_bool(key, value)?,
            "universe.winsor_lower" => u.winsor_lower = parse_value(key, value)?,
            "universe.winsor_upper" => u.winsor_upper = parse_value(key, value)?,
            "universe.max_ffill_gap" => u.max_ffill_gap = parse_value(key, value)?,
            "universe.normalize_features" => u.normalize_features = parse_bool(key, value)?,
            "cgo.lookback_weeks" => self.cgo.lookback_weeks = parse_value(key, value)?,
            "cgo.min_valid_weeks" => self.cgo.min_valid_weeks = parse_value(key, value)?,
            "cgo.k_floor" => self.cgo.k_floor = parse_value(key, value)?,
            "proxy.window_months" => self.proxy.window_months = parse_value(key, value)?,
            "proxy.min_obs" => self.proxy.min_obs = parse_value(key, value)?,
            "proxy.ivol_min_days" => self.proxy.ivol_min_days = parse_value(key, value)?,
            "proxy.cfvol_years" => self.proxy.cfvol_years = parse_value(key, value)?,
            "proxy.cfvol_min_years" => self.proxy.cfvol_min_years = parse_value(key, value)?,
            "proxy.min_age_years" => self.proxy.min_age_years = parse_value(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies every entry of a config text on top of `self`.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for e in parse_key_values(text).map_err(|e| with_line(origin, 0, e))? {
            if e.key.starts_with(SYNTH_PREFIX) {
                continue;
            }
            self.set(&e.key, &e.value)
                .map_err(|err| with_line(origin, e.line, err))?;
        }
        Ok(())
    }

    /// Defaults overlaid with the file at `path`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&read_text(path)?, path)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_start >= self.sample_end {
            return Err(Error::InvalidConfig(format!(
                "sample_start {} must precede sample_end {}",
                self.sample_start, self.sample_end
            )));
        }
        self.universe.validate()?;
        if self.cgo.lookback_weeks == 0 || self.cgo.min_valid_weeks > self.cgo.lookback_weeks {
            return Err(Error::InvalidConfig(format!(
                "cgo.min_valid_weeks ({}) must lie in 0..=cgo.lookback_weeks ({})",
                self.cgo.min_valid_weeks, self.cgo.lookback_weeks
            )));
        }
        if self.proxy.window_months == 0 || self.proxy.min_obs > self.proxy.window_months {
            return Err(Error::InvalidConfig(format!(
                "proxy.min_obs ({}) must lie in 0..=proxy.window_months ({})",
                self.proxy.min_obs, self.proxy.window_months
            )));
        }
        if self.proxies.is_empty() {
            return Err(Error::InvalidConfig("no proxies selected".into()));
        }
        Ok(())
    }

    /// The Fama-MacBeth specification `n` for `proxy` under this config.
    pub fn fm_spec(&self, n: usize, proxy: Proxy) -> FmSpec {
        let mut s = FmSpec::nested(n, proxy).with_universe(&self.universe);
        s.nw_lag = self.nw_lag;
        s.winsorize = self.fm_winsorize;
        s.min_months = self.fm_min_months;
        s
    }

    /// Every setting as loadable `key = value` text.
    pub fn to_text(&self) -> String {
        let u = &self.universe;
        let names: Vec<&str> = self.proxies.iter().map(|p| p.name()).collect();
        let entries: Vec<(&str, String)> = vec![
            ("data_dir", self.data_dir.display().to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("sample_start", self.sample_start.to_string()),
            ("sample_end", self.sample_end.to_string()),
            ("proxies", names.join(",")),
            ("nw_lag", self.nw_lag.to_string()),
            ("emit_formats", self.emit_formats.to_string()),
            ("full_grid", self.full_grid.to_string()),
            ("dump_monthly", self.dump_monthly.to_string()),
            ("lenient", self.lenient.to_string()),
            ("fm.winsorize", self.fm_winsorize.to_string()),
            ("fm.min_months", self.fm_min_months.to_string()),
            ("universe.min_history_years", u.min_history_years.to_string()),
            ("universe.min_price", u.min_price.to_string()),
            ("universe.exclude_blacklisted", u.exclude_blacklisted.to_string()),
            ("universe.exclude_untradable", u.exclude_untradable.to_string()),
            ("universe.winsor_lower", u.winsor_lower.to_string()),
            ("universe.winsor_upper", u.winsor_upper.to_string()),
            ("universe.max_ffill_gap", u.max_ffill_gap.to_string()),
            ("universe.normalize_features", u.normalize_features.to_string()),
            ("cgo.lookback_weeks", self.cgo.lookback_weeks.to_string()),
            ("cgo.min_valid_weeks", self.cgo.min_valid_weeks.to_string()),
            ("cgo.k_floor", self.cgo.k_floor.to_string()),
            ("proxy.window_months", self.proxy.window_months.to_string()),
            ("proxy.min_obs", self.proxy.min_obs.to_string()),
            ("proxy.ivol_min_days", self.proxy.ivol_min_days.to_string()),
            ("proxy.cfvol_years", self.proxy.cfvol_years.to_string()),
            ("proxy.cfvol_min_years", self.proxy.cfvol_min_years.to_string()),
            ("proxy.min_age_years", self.proxy.min_age_years.to_string()),
        ];
        let mut s = String::new();
        for (k, v) in entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Whether formation month `m` (holding through the next month) lies in
    /// the sample window.
    fn in_window(&self, m: YearMonth) -> bool {
        self.sample_start <= m && m.next() <= self.sample_end
    }
}

/// Sets one generator key (`synth.` prefix already stripped).
pub fn set_dgp_key(cfg: &mut DgpConfig, key: &str, value: &str) -> Result<()> {
    if let Some(col) = key.strip_prefix("beta.") {
        let c = Column::ALL
            .into_iter()
            .find(|c| c.key() == col)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown coefficient `{col}`")))?;
        cfg.planted_betas[c as usize] = parse_value(key, value)?;
        return Ok(());
    }
    match key {
        "n_stocks" => cfg.n_stocks = parse_value(key, value)?,
        "n_months" => cfg.n_months = parse_value(key, value)?,
        "burn_in_months" => cfg.burn_in_months = parse_value(key, value)?,
        "seed" => cfg.seed = parse_value(key, value)?,
        "start_month" => cfg.start_month = parse_value(key, value)?,
        "planted_proxy" => cfg.planted_proxy = parse_value(key, value)?,
        "noise_sd" => cfg.noise_sd = parse_value(key, value)?,
        "alpha" => cfg.alpha = parse_value(key, value)?,
        "risk_free" => cfg.risk_free = parse_value(key, value)?,
        "market_vol" => cfg.market_vol = parse_value(key, value)?,
        "smb_vol" => cfg.smb_vol = parse_value(key, value)?,
        "hml_vol" => cfg.hml_vol = parse_value(key, value)?,
        "turnover_mean" => cfg.turnover_mean = parse_value(key, value)?,
        "turnover_persistence" => cfg.turnover_persistence = parse_value(key, value)?,
        "turnover_dispersion" => cfg.turnover_dispersion = parse_value(key, value)?,
        "listing_stagger" => cfg.listing_stagger = parse_value(key, value)?,
        "flag_prob" => cfg.flag_prob = parse_value(key, value)?,
        "emit_daily" => cfg.emit_daily = parse_bool(key, value)?,
        _ => return Err(Error::InvalidConfig(format!("unknown generator key `synth.{key}`"))),
    }
    Ok(())
}

/// Generator defaults overlaid with the `synth.*` keys of a config file.
pub fn dgp_from_file(path: &Path) -> Result<DgpConfig> {
    let mut cfg = DgpConfig::default();
    for e in parse_key_values(&read_text(path)?).map_err(|e| with_line(path, 0, e))? {
        if let Some(k) = e.key.strip_prefix(SYNTH_PREFIX) {
            set_dgp_key(&mut cfg, k, &e.value).map_err(|err| with_line(path, e.line, err))?;
        }
    }
    Ok(cfg)
}

/// Results for one proxy, restricted to the sample window.
#[derive(Debug, Clone)]
pub struct ProxyOutput {
    pub proxy: Proxy,
    pub series: GridSeries,
    pub table: DoubleSortTable,
    pub fm: FmTable,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub stocks_in: usize,
    pub stocks_after_filter: usize,
    pub months: Vec<YearMonth>,
    pub factor_source: FactorSource,
    pub percentiles: Vec<(YearMonth, [f64; 3])>,
    pub percentile_skipped: Vec<(YearMonth, String)>,
    pub proxies: Vec<ProxyOutput>,
}

/// Runs every estimator on an already loaded panel.
pub fn run_pipeline(panel: &StockPanel, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let stocks_in = panel.n_stocks();
    let filled = preprocess::fill_missing(panel, &cfg.universe);
    let panel = preprocess::apply_longevity_filter(&filled, &cfg.universe).map_err(|e| e.in_stage("preprocess"))?;
    drop(filled);
    let months = panel.months().to_vec();
    tracing::info!(stocks = panel.n_stocks(), months = months.len(), "panel ready");

    let cgo = cgo::monthly_cgo_matrix(&panel, &cfg.cgo);
    let mut percentiles = Vec::new();
    let mut percentile_skipped = Vec::new();
    for (m, &month) in months.iter().enumerate() {
        if month < cfg.sample_start || month > cfg.sample_end {
            continue;
        }
        let xs: Vec<Option<f64>> = cgo.iter().map(|row| row[m]).collect();
        match cgo::cgo_percentiles(&xs, FIGURE_PROBS) {
            Ok(p) => percentiles.push((month, p)),
            Err(e) => percentile_skipped.push((month, e.to_string())),
        }
    }

    let base: Vec<_> = fama_macbeth::base_rows(&panel, &cgo, &cfg.universe)
        .into_iter()
        .filter(|mr| cfg.in_window(mr.month))
        .collect();

    let mut outputs = Vec::with_capacity(cfg.proxies.len());
    for &proxy in &cfg.proxies {
        tracing::info!(%proxy, "estimating");
        let values = proxies::proxy_matrix(&panel, proxy, &cfg.proxy);
        let mut series = double_sort::grid_series(&panel, proxy, &cgo, &values, &cfg.universe);
        series.grids.retain(|g| cfg.in_window(g.month));
        series.skipped.retain(|(m, _)| cfg.in_window(*m));
        let table = double_sort::build_table(&series, &panel, cfg.nw_lag)
            .map_err(|e| e.in_stage(format!("double_sort[{proxy}]")))?;
        let fm = fama_macbeth::run_table(&base, proxy, &values, |n, p| cfg.fm_spec(n, p))
            .map_err(|e| e.in_stage(format!("fama_macbeth[{proxy}]")))?;
        outputs.push(ProxyOutput {
            proxy,
            series,
            table,
            fm,
        });
    }

    Ok(PipelineOutput {
        stocks_in,
        stocks_after_filter: panel.n_stocks(),
        months,
        factor_source: FactorSource::of(&panel),
        percentiles,
        percentile_skipped,
        proxies: outputs,
    })
}

// ---------------------------------------------------------------- formatting

fn csv_num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(csv_num).unwrap_or_default()
}

fn header_comment(out: &mut String, title: &str, units: &str, nw_lag: usize, extra: &[String]) {
    let _ = writeln!(out, "# {title}");
    let _ = writeln!(out, "# units: {units}");
    let _ = writeln!(out, "# Newey-West lag: {nw_lag}");
    for e in extra {
        let _ = writeln!(out, "# {e}");
    }
}

const RETURN_UNITS: &str = "percent per month (value-weighted excess returns); t-statistics in parentheses";
const SLOPE_UNITS: &str = "percent per month per unit of regressor (slopes x 100); t-statistics in parentheses";

fn ds_title(proxy: Proxy) -> String {
    format!(
        "Dependent double sort: CGO quintiles, then {} quintiles within each CGO group",
        proxy.label()
    )
}

fn ds_extra(t: &DoubleSortTable) -> Vec<String> {
    vec![format!("months: {} (skipped {})", t.n_months, t.skipped.len())]
}

pub fn double_sort_text(t: &DoubleSortTable) -> String {
    let mut out = String::new();
    header_comment(&mut out, &ds_title(t.proxy), RETURN_UNITS, t.nw_lag, &ds_extra(t));
    let _ = write!(out, "{:<12}", t.proxy.label());
    for c in TABLE_COLUMNS {
        let _ = write!(out, "{c:>14}");
    }
    out.push('\n');
    for row in t.rows() {
        let _ = write!(out, "{:<12}", row.label);
        for v in row.values {
            let cell = match v {
                None => String::new(),
                Some(x) if row.is_t => format!("({x:.2})"),
                Some(x) => format!("{x:.3}"),
            };
            let _ = write!(out, "{cell:>14}");
        }
        out.push('\n');
    }
    out
}

pub fn double_sort_csv(t: &DoubleSortTable) -> String {
    let mut out = String::new();
    header_comment(&mut out, &ds_title(t.proxy), RETURN_UNITS, t.nw_lag, &ds_extra(t));
    let _ = writeln!(out, "row,{}", TABLE_COLUMNS.join(","));
    for row in t.rows() {
        let cells: Vec<String> = row.values.iter().map(|v| csv_opt(*v)).collect();
        let _ = writeln!(out, "{},{}", row.label, cells.join(","));
    }
    out
}

/// Full 5x5 grid of mean returns and average cell sizes.
pub fn double_sort_grid_csv(t: &DoubleSortTable, series: &GridSeries) -> String {
    let mut out = String::new();
    header_comment(
        &mut out,
        &ds_title(t.proxy),
        "percent per month; count = average stocks per cell",
        t.nw_lag,
        &ds_extra(t),
    );
    let _ = writeln!(out, "cgo_group,proxy_group,mean_return,mean_count");
    let n = series.grids.len().max(1) as f64;
    for g in 0..N_GROUPS {
        for p in 0..N_GROUPS {
            let count = series.grids.iter().map(|gr| gr.counts[g][p] as f64).sum::<f64>() / n;
            let _ = writeln!(
                out,
                "{},{},{},{}",
                g + 1,
                p + 1,
                csv_num(t.mean_returns[g][p]),
                csv_num(count)
            );
        }
    }
    out
}

/// Monthly cell returns, keyed by formation month.
pub fn double_sort_monthly_csv(t: &DoubleSortTable, series: &GridSeries) -> String {
    let mut out = String::new();
    header_comment(
        &mut out,
        &ds_title(t.proxy),
        "percent per month, realised in holding_month",
        t.nw_lag,
        &[],
    );
    let _ = writeln!(out, "formation_month,holding_month,cgo_group,proxy_group,return,count");
    for gr in &series.grids {
        for g in 0..N_GROUPS {
            for p in 0..N_GROUPS {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    gr.month,
                    gr.month.next(),
                    g + 1,
                    p + 1,
                    csv_num(gr.returns[g][p]),
                    gr.counts[g][p]
                );
            }
        }
    }
    out
}

fn fm_title(proxy: Proxy) -> String {
    format!(
        "Fama-MacBeth regressions of next-month returns, proxy {}",
        proxy.label()
    )
}

fn fm_extra(t: &FmTable) -> Vec<String> {
    let months: Vec<String> = t
        .results
        .iter()
        .enumerate()
        .map(|(i, r)| format!("({}) {} months, {} skipped", i + 1, r.months_used, r.skipped.len()))
        .collect();
    vec![format!("months: {}", months.join("; "))]
}

fn fm_lag(t: &FmTable) -> usize {
    t.results.first().map_or(0, |r| r.nw_lag)
}

fn fm_row_label(c: Column, proxy: Proxy) -> String {
    match c {
        Column::Proxy => proxy.label().to_string(),
        Column::ProxyCgo => format!("{} x CGO", proxy.label()),
        Column::ProxyMom12 => format!("{} x MOM(-12,-1)", proxy.label()),
        other => other.label().to_string(),
    }
}

pub fn fm_text(t: &FmTable) -> String {
    let mut out = String::new();
    header_comment(&mut out, &fm_title(t.proxy), SLOPE_UNITS, fm_lag(t), &fm_extra(t));
    let _ = write!(out, "{:<24}", "");
    for n in 1..=N_SPECS {
        let _ = write!(out, "{:>20}", format!("({n})"));
    }
    out.push('\n');
    for c in Column::ALL {
        let _ = write!(out, "{:<24}", fm_row_label(c, t.proxy));
        for n in 0..N_SPECS {
            let cell = match t.cell(c, n) {
                None => String::new(),
                Some((m, Some(ts))) => format!("{m:.4} ({ts:.2})"),
                Some((m, None)) => format!("{m:.4}"),
            };
            let _ = write!(out, "{cell:>20}");
        }
        out.push('\n');
    }
    out
}

pub fn fm_csv(t: &FmTable) -> String {
    let mut out = String::new();
    header_comment(&mut out, &fm_title(t.proxy), SLOPE_UNITS, fm_lag(t), &fm_extra(t));
    let mut head = vec!["variable".to_string()];
    for n in 1..=N_SPECS {
        head.push(format!("coef_{n}"));
        head.push(format!("t_{n}"));
    }
    let _ = writeln!(out, "{}", head.join(","));
    for c in Column::ALL {
        let mut cells = vec![c.key().to_string()];
        for n in 0..N_SPECS {
            let (m, ts) = match t.cell(c, n) {
                Some((m, ts)) => (Some(m), ts),
                None => (None, None),
            };
            cells.push(csv_opt(m));
            cells.push(csv_opt(ts));
        }
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Monthly cross-sectional slopes, keyed by formation month.
pub fn fm_monthly_csv(t: &FmTable) -> String {
    let mut out = String::new();
    header_comment(
        &mut out,
        &fm_title(t.proxy),
        "percent per month (slopes x 100)",
        fm_lag(t),
        &[],
    );
    let _ = writeln!(out, "spec,formation_month,n_obs,variable,slope");
    for (i, r) in t.results.iter().enumerate() {
        for f in &r.monthly {
            let _ = writeln!(
                out,
                "{},{},{},intercept,{}",
                i + 1,
                f.month,
                f.n_obs,
                csv_num(f.intercept * 100.0)
            );
            for (c, b) in r.spec.columns.iter().zip(&f.slopes) {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    i + 1,
                    f.month,
                    f.n_obs,
                    c.key(),
                    csv_num(b * 100.0)
                );
            }
        }
    }
    out
}

pub fn percentiles_csv(rows: &[(YearMonth, [f64; 3])]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Cross-sectional CGO percentiles by month");
    let _ = writeln!(out, "# units: fraction of the prior week's price");
    let _ = writeln!(out, "month,p10,p50,p90");
    for (m, p) in rows {
        let _ = writeln!(out, "{m},{},{},{}", csv_num(p[0]), csv_num(p[1]), csv_num(p[2]));
    }
    out
}

/// Collapses consecutive months that share a reason into ranges.
fn summarize_skips(skips: &[(YearMonth, String)]) -> Vec<String> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < skips.len() {
        let (start, reason) = &skips[i];
        let mut j = i;
        while j + 1 < skips.len() && skips[j + 1].1 == *reason && skips[j + 1].0 == skips[j].0.next() {
            j += 1;
        }
        let range = if i == j {
            start.to_string()
        } else {
            format!("{start}..{}", skips[j].0)
        };
        out.push(format!("{range} ({}): {reason}", j - i + 1));
        i = j + 1;
    }
    out
}

/// Run manifest: the materialized configuration as loadable `key = value`
/// lines, followed by the run summary as comments.
pub fn manifest_text(cfg: &PipelineConfig, ingest: &IngestReport, out: &PipelineOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# cgolab {VERSION} run manifest");
    let _ = writeln!(s, "# Load with --config to reproduce this run.");
    s.push_str(&cfg.to_text());
    let _ = writeln!(s, "#");
    let _ = writeln!(s, "# version: {VERSION}");
    let source = match out.factor_source {
        FactorSource::Daily => "daily factors file",
        FactorSource::FlatMonthly => "monthly factors spread evenly over trading days (no daily factors file)",
    };
    let _ = writeln!(s, "# ivol factor source: {source}");
    for (file, n) in &ingest.rows {
        let _ = writeln!(s, "# rows.{file}: {n}");
    }
    let _ = writeln!(s, "# rejected stocks: {}", ingest.rejected.len());
    for (id, why) in &ingest.rejected {
        let _ = writeln!(s, "#   {id}: {why}");
    }
    let _ = writeln!(s, "# stocks loaded: {}", out.stocks_in);
    let _ = writeln!(s, "# stocks after longevity filter: {}", out.stocks_after_filter);
    if let (Some(a), Some(b)) = (out.months.first(), out.months.last()) {
        let _ = writeln!(s, "# panel months: {a}..{b} ({})", out.months.len());
    }
    let _ = writeln!(s, "# percentile months: {}", out.percentiles.len());
    for line in summarize_skips(&out.percentile_skipped) {
        let _ = writeln!(s, "#   skipped {line}");
    }
    for p in &out.proxies {
        let name = p.proxy.name();
        let _ = writeln!(
            s,
            "# doublesort.{name}: {} months, nw lag {}",
            p.table.n_months, p.table.nw_lag
        );
        for line in summarize_skips(&p.table.skipped) {
            let _ = writeln!(s, "#   skipped {line}");
        }
        for (i, r) in p.fm.results.iter().enumerate() {
            let _ = writeln!(
                s,
                "# fm.{name}.spec{}: {} months, nw lag {}",
                i + 1,
                r.months_used,
                r.nw_lag
            );
            for line in summarize_skips(&r.skipped) {
                let _ = writeln!(s, "#   skipped {line}");
            }
        }
    }
    s
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes every artifact of a run and returns the file paths in write order.
pub fn write_outputs(cfg: &PipelineConfig, ingest: &IngestReport, out: &PipelineOutput) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let mut files = Vec::new();
    let mut emit = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, &body)?;
        files.push(path);
        Ok(())
    };
    emit(PERCENTILE_FILE.into(), percentiles_csv(&out.percentiles))?;
    for p in &out.proxies {
        let name = p.proxy.name();
        if cfg.emit_formats.text {
            emit(format!("doublesort_{name}.txt"), double_sort_text(&p.table))?;
            emit(format!("fm_{name}.txt"), fm_text(&p.fm))?;
        }
        if cfg.emit_formats.csv {
            emit(format!("doublesort_{name}.csv"), double_sort_csv(&p.table))?;
            emit(format!("fm_{name}.csv"), fm_csv(&p.fm))?;
        }
        if cfg.full_grid {
            emit(
                format!("doublesort_{name}_grid.csv"),
                double_sort_grid_csv(&p.table, &p.series),
            )?;
        }
        if cfg.dump_monthly {
            emit(
                format!("doublesort_{name}_monthly.csv"),
                double_sort_monthly_csv(&p.table, &p.series),
            )?;
            emit(format!("fm_{name}_monthly.csv"), fm_monthly_csv(&p.fm))?;
        }
    }
    emit(MANIFEST_FILE.into(), manifest_text(cfg, ingest, out))?;
    Ok(files)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub output: PipelineOutput,
    pub ingest: IngestReport,
}

fn load(cfg: &PipelineConfig) -> Result<panel::LoadedPanel> {
    if !cfg.data_dir.is_dir() {
        return Err(Error::MissingFile(cfg.data_dir.clone()).in_stage("ingest"));
    }
    panel::load_panel(
        &PanelPaths::in_dir(&cfg.data_dir),
        &IngestConfig { lenient: cfg.lenient },
    )
    .map_err(|e| e.in_stage("ingest"))
}

/// Loads the data, runs every estimator and writes all artifacts.
pub fn cmd_run(cfg: &PipelineConfig) -> Result<RunSummary> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let loaded = load(cfg)?;
    let output = run_pipeline(&loaded.panel, cfg)?;
    let files = write_outputs(cfg, &loaded.report, &output).map_err(|e| e.in_stage("report"))?;
    Ok(RunSummary {
        files,
        output,
        ingest: loaded.report,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub ingest: IngestReport,
    pub stocks: usize,
    pub stocks_after_filter: usize,
    pub weeks: Option<(chrono::NaiveDate, chrono::NaiveDate, usize)>,
    pub months: Option<(YearMonth, YearMonth, usize)>,
    pub daily_factors: bool,
    pub missing_factor_months: Vec<YearMonth>,
    /// Eligible stocks per month inside the sample window.
    pub universe_sizes: Vec<(YearMonth, usize)>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn empty_universe_months(&self) -> Vec<YearMonth> {
        self.universe_sizes
            .iter()
            .filter(|(_, n)| *n == 0)
            .map(|(m, _)| *m)
            .collect()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "files:")?;
        for (file, n) in &self.ingest.rows {
            writeln!(f, "  {file}: {n} rows")?;
        }
        writeln!(
            f,
            "  daily factors: {}",
            if self.daily_factors { "present" } else { "absent" }
        )?;
        writeln!(
            f,
            "stocks: {} loaded, {} rejected, {} after longevity filter",
            self.stocks,
            self.ingest.rejected.len(),
            self.stocks_after_filter
        )?;
        for (id, why) in &self.ingest.rejected {
            writeln!(f, "  rejected {id}: {why}")?;
        }
        if let Some((a, b, n)) = self.weeks {
            writeln!(f, "weekly calendar: {a}..{b} ({n} weeks)")?;
        }
        if let Some((a, b, n)) = self.months {
            writeln!(f, "monthly calendar: {a}..{b} ({n} months)")?;
        }
        writeln!(f, "universe size by month:")?;
        for (m, n) in &self.universe_sizes {
            writeln!(f, "  {m} {n}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        if self.warnings.is_empty() {
            writeln!(f, "OK")?;
        } else {
            writeln!(f, "OK with {} warning(s)", self.warnings.len())?;
        }
        Ok(())
    }
}

/// Schema checks, coverage and universe sizes; no estimators are run.
pub fn cmd_validate(cfg: &PipelineConfig) -> Result<ValidationReport> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let loaded = load(cfg)?;
    let panel = &loaded.panel;
    let filled = preprocess::fill_missing(panel, &cfg.universe);
    let filtered = preprocess::apply_longevity_filter(&filled, &cfg.universe);
    let mut warnings = Vec::new();
    let (stocks_after_filter, universe_sizes) = match &filtered {
        Ok(p) => {
            let sizes: Vec<(YearMonth, usize)> = p
                .months()
                .iter()
                .enumerate()
                .filter(|(_, m)| cfg.sample_start <= **m && **m <= cfg.sample_end)
                .map(|(i, m)| (*m, preprocess::universe_at(p, i, &cfg.universe).len()))
                .collect();
            (p.n_stocks(), sizes)
        }
        Err(e) => {
            warnings.push(e.to_string());
            (0, Vec::new())
        }
    };
    let weeks = panel.calendar().weeks();
    let months = panel.months();
    let (first, last) = (
        months
            .first()
            .copied()
            .unwrap_or(cfg.sample_start)
            .max(cfg.sample_start),
        months.last().copied().unwrap_or(cfg.sample_end).min(cfg.sample_end),
    );
    let missing_factor_months = if first <= last {
        panel.factors().missing_months(first, last)
    } else {
        Vec::new()
    };
    if !missing_factor_months.is_empty() {
        warnings.push(format!(
            "factors missing for {} month(s) in the sample window: {}",
            missing_factor_months.len(),
            join_months(&missing_factor_months)
        ));
    }
    let mut report = ValidationReport {
        ingest: loaded.report.clone(),
        stocks: panel.n_stocks(),
        stocks_after_filter,
        weeks: weeks.first().zip(weeks.last()).map(|(a, b)| (*a, *b, weeks.len())),
        months: months.first().zip(months.last()).map(|(a, b)| (*a, *b, months.len())),
        daily_factors: panel.daily_factors().is_some(),
        missing_factor_months,
        universe_sizes,
        warnings,
    };
    let empty = report.empty_universe_months();
    if !empty.is_empty() {
        report.warnings.push(format!(
            "empty universe in {} month(s): {}",
            empty.len(),
            join_months(&empty)
        ));
    }
    if !loaded.report.rejected.is_empty() {
        report.warnings.push(format!(
            "{} stock(s) rejected during ingest",
            loaded.report.rejected.len()
        ));
    }
    Ok(report)
}

fn join_months(ms: &[YearMonth]) -> String {
    let skips: Vec<(YearMonth, String)> = ms.iter().map(|m| (*m, String::new())).collect();
    summarize_skips(&skips)
        .into_iter()
        .map(|s| s.trim_end_matches(": ").to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn ground_truth_csv(market: &SynthMarket) -> String {
    let mut out = String::from("parameter,value\n");
    for (k, v) in market.truth.parameters() {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

/// Generates a synthetic market and writes it in the ingest schema together
/// with `ground_truth.csv`.
pub fn cmd_synth(cfg: &DgpConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let market = synth::generate_panel(cfg)?;
    panel::write_panel(&market.panel, dir).map_err(|e| e.in_stage("synth"))?;
    let gt = dir.join(GROUND_TRUTH_FILE);
    write_file(&gt, &ground_truth_csv(&market))?;
    let paths = PanelPaths::in_dir(dir);
    let mut files: Vec<PathBuf> = paths.required().iter().map(|p| p.to_path_buf()).collect();
    files.extend(paths.daily_factors);
    files.push(gt);
    Ok(files)
}
