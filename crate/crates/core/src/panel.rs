//! Canonical in-memory panel and its CSV ingest.
//!
//! Every stock's weekly and monthly series are indexed by the shared
//! [`Calendar`]: `stock.weekly[i]` is the bar for `calendar.weeks()[i]` and
//! `stock.monthly[m]` the observation for `calendar.months()[m]`. Missing data
//! is `None`, never a magic number. Daily returns stay on each stock's own
//! dates. The panel is read-only once built; preprocessing returns new panels.
//!
//! Inputs are assumed to be adjusted for splits and dividends already.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::ops::Range;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::calendar::{parse_date, YearMonth};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StockMeta {
    pub stock_id: String,
    pub listing_date: NaiveDate,
}

/// One week of trading keyed by its week-ending date. Shares outstanding are
/// carried per week because they change over time.
#[derive(Debug, Clone, PartialEq)]
pub struct WeeklyBar {
    pub week_end: NaiveDate,
    pub close: Option<f64>,
    pub volume: Option<f64>,
    pub shares_outstanding: Option<f64>,
}

impl WeeklyBar {
    pub fn empty(week_end: NaiveDate) -> Self {
        Self {
            week_end,
            close: None,
            volume: None,
            shares_outstanding: None,
        }
    }

    fn is_empty(&self) -> bool {
        self.close.is_none() && self.volume.is_none() && self.shares_outstanding.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyObservation {
    pub month: YearMonth,
    pub ret: Option<f64>,
    pub close: Option<f64>,
    pub market_cap: Option<f64>,
    pub volume: Option<f64>,
    pub blacklisted: Option<bool>,
    pub tradable: Option<bool>,
    pub cash_flow: Option<f64>,
}

impl MonthlyObservation {
    pub fn empty(month: YearMonth) -> Self {
        Self {
            month,
            ret: None,
            close: None,
            market_cap: None,
            volume: None,
            blacklisted: None,
            tradable: None,
            cash_flow: None,
        }
    }

    fn is_empty(&self) -> bool {
        *self == Self::empty(self.month)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyReturn {
    pub date: NaiveDate,
    pub ret: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorObservation {
    pub month: YearMonth,
    pub mkt_excess: f64,
    pub smb: f64,
    pub hml: f64,
    pub risk_free: f64,
}

/// Monthly Fama-French factors and the risk-free rate, sorted by month.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FactorSeries {
    obs: Vec<FactorObservation>,
}

impl FactorSeries {
    pub fn new(mut obs: Vec<FactorObservation>) -> Result<Self> {
        obs.sort_by_key(|o| o.month);
        if let Some(w) = obs.windows(2).find(|w| w[0].month == w[1].month) {
            return Err(Error::InvalidConfig(format!("duplicate factor month {}", w[0].month)));
        }
        Ok(Self { obs })
    }

    pub fn get(&self, month: YearMonth) -> Option<&FactorObservation> {
        self.obs
            .binary_search_by_key(&month, |o| o.month)
            .ok()
            .map(|i| &self.obs[i])
    }

    pub fn observations(&self) -> &[FactorObservation] {
        &self.obs
    }

    /// Months inside `[start, end]` with no factor observation.
    pub fn missing_months(&self, start: YearMonth, end: YearMonth) -> Vec<YearMonth> {
        (0..=start.months_until(end))
            .map(|k| start.add_months(k))
            .filter(|m| self.get(*m).is_none())
            .collect()
    }

    pub(crate) fn push(&mut self, o: FactorObservation) {
        debug_assert!(self.obs.last().is_none_or(|l| l.month < o.month));
        self.obs.push(o);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyFactor {
    pub date: NaiveDate,
    pub mkt_excess: f64,
    pub smb: f64,
    pub hml: f64,
    pub risk_free: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DailyFactorSeries {
    obs: Vec<DailyFactor>,
}

impl DailyFactorSeries {
    pub fn new(mut obs: Vec<DailyFactor>) -> Result<Self> {
        obs.sort_by_key(|o| o.date);
        if let Some(w) = obs.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(Error::InvalidConfig(format!(
                "duplicate daily factor date {}",
                w[0].date
            )));
        }
        Ok(Self { obs })
    }

    pub fn get(&self, date: NaiveDate) -> Option<&DailyFactor> {
        self.obs
            .binary_search_by_key(&date, |o| o.date)
            .ok()
            .map(|i| &self.obs[i])
    }

    pub fn observations(&self) -> &[DailyFactor] {
        &self.obs
    }

    pub(crate) fn extend(&mut self, more: impl IntoIterator<Item = DailyFactor>) {
        self.obs.extend(more);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StockSeries {
    pub meta: StockMeta,
    pub weekly: Vec<WeeklyBar>,
    pub monthly: Vec<MonthlyObservation>,
    pub daily: Vec<DailyReturn>,
}

impl StockSeries {
    pub fn id(&self) -> &str {
        &self.meta.stock_id
    }

    /// Daily returns dated inside `month`.
    pub fn daily_in(&self, month: YearMonth) -> &[DailyReturn] {
        let lo = self.daily.partition_point(|d| d.date < month.first_day());
        let hi = self.daily.partition_point(|d| d.date <= month.last_day());
        &self.daily[lo..hi]
    }
}

/// Shared weekly and monthly calendars. Months form a contiguous range.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Calendar {
    weeks: Vec<NaiveDate>,
    months: Vec<YearMonth>,
    weeks_by_month: Vec<Range<usize>>,
}

impl Calendar {
    fn build(weeks: Vec<NaiveDate>, first: YearMonth, last: YearMonth) -> Self {
        let months: Vec<YearMonth> = (0..=first.months_until(last)).map(|k| first.add_months(k)).collect();
        let weeks_by_month = months
            .iter()
            .map(|m| {
                let lo = weeks.partition_point(|d| *d < m.first_day());
                let hi = weeks.partition_point(|d| *d <= m.last_day());
                lo..hi
            })
            .collect();
        Self {
            weeks,
            months,
            weeks_by_month,
        }
    }

    pub fn weeks(&self) -> &[NaiveDate] {
        &self.weeks
    }

    pub fn months(&self) -> &[YearMonth] {
        &self.months
    }

    /// Week indices whose week-ending date falls inside month `m`.
    pub fn weeks_in_month(&self, m: usize) -> Range<usize> {
        self.weeks_by_month[m].clone()
    }

    pub fn month_index(&self, month: YearMonth) -> Option<usize> {
        let first = *self.months.first()?;
        let k = first.months_until(month);
        (k >= 0 && (k as usize) < self.months.len()).then_some(k as usize)
    }

    pub(crate) fn push_month(&mut self, month: YearMonth, week_ends: &[NaiveDate]) {
        debug_assert!(self.months.last().is_none_or(|l| l.next() == month));
        let lo = self.weeks.len();
        self.weeks.extend_from_slice(week_ends);
        self.months.push(month);
        self.weeks_by_month.push(lo..self.weeks.len());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StockPanel {
    pub(crate) stocks: Vec<StockSeries>,
    pub(crate) calendar: Calendar,
    pub(crate) factors: FactorSeries,
    pub(crate) daily_factors: Option<DailyFactorSeries>,
}

impl StockPanel {
    /// Builds an aligned panel. Stocks are ordered by id.
    pub fn new(
        mut stocks: Vec<StockSeries>,
        factors: FactorSeries,
        daily_factors: Option<DailyFactorSeries>,
    ) -> Result<Self> {
        stocks.sort_by(|a, b| a.meta.stock_id.cmp(&b.meta.stock_id));
        align_calendars(Self {
            stocks,
            calendar: Calendar::default(),
            factors,
            daily_factors,
        })
    }

    pub(crate) fn from_parts(
        stocks: Vec<StockSeries>,
        calendar: Calendar,
        factors: FactorSeries,
        daily_factors: Option<DailyFactorSeries>,
    ) -> Self {
        Self {
            stocks,
            calendar,
            factors,
            daily_factors,
        }
    }

    pub fn stocks(&self) -> &[StockSeries] {
        &self.stocks
    }

    pub fn stock(&self, i: usize) -> &StockSeries {
        &self.stocks[i]
    }

    pub fn n_stocks(&self) -> usize {
        self.stocks.len()
    }

    pub fn calendar(&self) -> &Calendar {
        &self.calendar
    }

    pub fn months(&self) -> &[YearMonth] {
        self.calendar.months()
    }

    pub fn factors(&self) -> &FactorSeries {
        &self.factors
    }

    pub fn daily_factors(&self) -> Option<&DailyFactorSeries> {
        self.daily_factors.as_ref()
    }

    pub fn stock_index(&self, id: &str) -> Option<usize> {
        self.stocks.binary_search_by(|s| s.meta.stock_id.as_str().cmp(id)).ok()
    }

    /// Keeps only the stocks for which `keep` is true.
    pub(crate) fn retain(&self, keep: impl Fn(&StockSeries) -> bool) -> Self {
        Self {
            stocks: self.stocks.iter().filter(|s| keep(s)).cloned().collect(),
            calendar: self.calendar.clone(),
            factors: self.factors.clone(),
            daily_factors: self.daily_factors.clone(),
        }
    }
}

/// Reindexes every stock onto the union weekly calendar and the contiguous
/// monthly span covering all observations. Idempotent.
pub fn align_calendars(panel: StockPanel) -> Result<StockPanel> {
    let StockPanel {
        stocks,
        factors,
        daily_factors,
        ..
    } = panel;

    let weeks: BTreeSet<NaiveDate> = stocks
        .iter()
        .flat_map(|s| s.weekly.iter().map(|b| b.week_end))
        .collect();
    let month_keys = stocks
        .iter()
        .flat_map(|s| s.monthly.iter().map(|o| o.month))
        .chain(weeks.iter().map(|d| YearMonth::of(*d)));
    let (first, last) = match month_keys.fold(None, |acc: Option<(YearMonth, YearMonth)>, m| match acc {
        None => Some((m, m)),
        Some((lo, hi)) => Some((lo.min(m), hi.max(m))),
    }) {
        Some(span) => span,
        None => return Err(Error::EmptyCalendar),
    };
    let calendar = Calendar::build(weeks.into_iter().collect(), first, last);

    let stocks = stocks
        .into_iter()
        .map(|s| {
            let mut by_week: BTreeMap<NaiveDate, WeeklyBar> = s.weekly.into_iter().map(|b| (b.week_end, b)).collect();
            let weekly = calendar
                .weeks
                .iter()
                .map(|d| by_week.remove(d).unwrap_or_else(|| WeeklyBar::empty(*d)))
                .collect();
            let mut by_month: BTreeMap<YearMonth, MonthlyObservation> =
                s.monthly.into_iter().map(|o| (o.month, o)).collect();
            let monthly = calendar
                .months
                .iter()
                .map(|m| by_month.remove(m).unwrap_or_else(|| MonthlyObservation::empty(*m)))
                .collect();
            StockSeries {
                meta: s.meta,
                weekly,
                monthly,
                daily: s.daily,
            }
        })
        .collect();

    Ok(StockPanel {
        stocks,
        calendar,
        factors,
        daily_factors,
    })
}

/// File locations for one dataset.
#[derive(Debug, Clone)]
pub struct PanelPaths {
    pub weekly: PathBuf,
    pub daily: PathBuf,
    pub monthly: PathBuf,
    pub meta: PathBuf,
    pub factors: PathBuf,
    /// Optional; IVOL falls back to flat-distributed monthly factors without it.
    pub daily_factors: Option<PathBuf>,
}

impl PanelPaths {
    pub fn in_dir(dir: &Path) -> Self {
        let daily_factors = dir.join("daily_factors.csv");
        Self {
            weekly: dir.join("weekly.csv"),
            daily: dir.join("daily.csv"),
            monthly: dir.join("monthly.csv"),
            meta: dir.join("meta.csv"),
            factors: dir.join("factors.csv"),
            daily_factors: daily_factors.exists().then_some(daily_factors),
        }
    }

    pub fn required(&self) -> [&Path; 5] {
        [&self.weekly, &self.daily, &self.monthly, &self.meta, &self.factors]
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestConfig {
    /// Reject offending stocks (with diagnostics) instead of failing the load.
    pub lenient: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub rows: BTreeMap<&'static str, usize>,
    pub rejected: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct LoadedPanel {
    pub panel: StockPanel,
    pub report: IngestReport,
}

struct Table {
    path: PathBuf,
    headers: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path, required: &[&str]) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?;
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?
            .iter()
            .map(str::to_string)
            .collect();
        for col in required {
            if !headers.iter().any(|h| h == col) {
                return Err(Error::MalformedRow {
                    file: path.to_path_buf(),
                    line: 1,
                    column: col.to_string(),
                    message: "missing header".into(),
                });
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Self {
            path: path.to_path_buf(),
            headers,
            rows,
        })
    }

    fn row<'a>(&'a self, line: u64, rec: &'a csv::StringRecord) -> Row<'a> {
        Row { table: self, line, rec }
    }
}

struct Row<'a> {
    table: &'a Table,
    line: u64,
    rec: &'a csv::StringRecord,
}

impl Row<'_> {
    fn err(&self, column: &str, message: impl Into<String>) -> Error {
        Error::MalformedRow {
            file: self.table.path.clone(),
            line: self.line,
            column: column.to_string(),
            message: message.into(),
        }
    }

    fn raw(&self, column: &str) -> &str {
        let i = self
            .table
            .headers
            .iter()
            .position(|h| h == column)
            .expect("header checked");
        self.rec.get(i).unwrap_or("")
    }

    fn text(&self, column: &str) -> Result<String> {
        let s = self.raw(column);
        if s.is_empty() {
            Err(self.err(column, "required value is empty"))
        } else {
            Ok(s.to_string())
        }
    }

    fn date(&self, column: &str) -> Result<NaiveDate> {
        parse_date(self.raw(column)).ok_or_else(|| self.err(column, format!("bad date `{}`", self.raw(column))))
    }

    fn month(&self, column: &str) -> Result<YearMonth> {
        self.raw(column)
            .parse()
            .map_err(|e: crate::calendar::ParseYearMonthError| self.err(column, e.to_string()))
    }

    fn opt_f64(&self, column: &str, valid: fn(f64) -> bool, rule: &str) -> Result<Option<f64>> {
        let s = self.raw(column);
        if s.is_empty() {
            return Ok(None);
        }
        let v: f64 = s.parse().map_err(|_| self.err(column, format!("bad number `{s}`")))?;
        if !v.is_finite() || !valid(v) {
            return Err(self.err(column, format!("value {v} violates {rule}")));
        }
        Ok(Some(v))
    }

    fn req_f64(&self, column: &str) -> Result<f64> {
        self.opt_f64(column, |_| true, "finite")?
            .ok_or_else(|| self.err(column, "required value is empty"))
    }

    fn opt_flag(&self, column: &str) -> Result<Option<bool>> {
        match self.raw(column) {
            "" => Ok(None),
            "0" => Ok(Some(false)),
            "1" => Ok(Some(true)),
            other => Err(self.err(column, format!("flag must be 0 or 1, got `{other}`"))),
        }
    }
}

fn any(_: f64) -> bool {
    true
}

/// Tracks per-stock key order while reading one file.
struct KeyOrder<K> {
    last: BTreeMap<String, K>,
    seen: HashSet<(String, K)>,
}

impl<K: Ord + Copy + std::hash::Hash + std::fmt::Display> KeyOrder<K> {
    fn new() -> Self {
        Self {
            last: BTreeMap::new(),
            seen: HashSet::new(),
        }
    }

    fn check(&mut self, path: &Path, line: u64, stock: &str, key: K) -> Result<()> {
        if !self.seen.insert((stock.to_string(), key)) {
            return Err(Error::DuplicateKey {
                file: path.to_path_buf(),
                line,
                stock: stock.to_string(),
                key: key.to_string(),
            });
        }
        if let Some(prev) = self.last.insert(stock.to_string(), key) {
            if key < prev {
                return Err(Error::NonMonotonicDates {
                    file: path.to_path_buf(),
                    line,
                    stock: stock.to_string(),
                    key: key.to_string(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Default)]
struct Collected {
    weekly: BTreeMap<String, Vec<WeeklyBar>>,
    monthly: BTreeMap<String, Vec<MonthlyObservation>>,
    daily: BTreeMap<String, Vec<DailyReturn>>,
    rejected: BTreeMap<String, String>,
}

impl Collected {
    fn handle(&mut self, lenient: bool, stock: &str, r: Result<()>) -> Result<()> {
        match r {
            Ok(()) => Ok(()),
            Err(e) if lenient => {
                self.rejected.entry(stock.to_string()).or_insert_with(|| e.to_string());
                Ok(())
            }
            Err(e) => Err(e),
        }
    }
}

/// Loads, validates and aligns a dataset.
pub fn load_panel(paths: &PanelPaths, config: &IngestConfig) -> Result<LoadedPanel> {
    for p in paths.required() {
        if !p.exists() {
            return Err(Error::MissingFile(p.to_path_buf()));
        }
    }
    let mut report = IngestReport::default();
    let mut c = Collected::default();

    let meta_t = Table::read(&paths.meta, &["stock_id", "listing_date"])?;
    let mut metas: BTreeMap<String, StockMeta> = BTreeMap::new();
    for (line, rec) in &meta_t.rows {
        let row = meta_t.row(*line, rec);
        let stock_id = row.text("stock_id")?;
        let listing_date = row.date("listing_date")?;
        if metas
            .insert(
                stock_id.clone(),
                StockMeta {
                    stock_id: stock_id.clone(),
                    listing_date,
                },
            )
            .is_some()
        {
            return Err(Error::DuplicateKey {
                file: meta_t.path.clone(),
                line: *line,
                stock: stock_id,
                key: "listing_date".into(),
            });
        }
    }
    report.rows.insert("meta", meta_t.rows.len());

    let weekly_t = Table::read(
        &paths.weekly,
        &["stock_id", "week_end", "close", "volume", "shares_outstanding"],
    )?;
    let mut order = KeyOrder::new();
    for (line, rec) in &weekly_t.rows {
        let row = weekly_t.row(*line, rec);
        let stock = row.text("stock_id")?;
        let parsed = (|| {
            let week_end = row.date("week_end")?;
            order.check(&weekly_t.path, *line, &stock, week_end)?;
            let bar = WeeklyBar {
                week_end,
                close: row.opt_f64("close", |v| v > 0.0, "close > 0")?,
                volume: row.opt_f64("volume", |v| v >= 0.0, "volume >= 0")?,
                shares_outstanding: row.opt_f64("shares_outstanding", |v| v > 0.0, "shares_outstanding > 0")?,
            };
            c.weekly.entry(stock.clone()).or_default().push(bar);
            Ok(())
        })();
        c.handle(config.lenient, &stock, parsed)?;
    }
    report.rows.insert("weekly", weekly_t.rows.len());

    let monthly_t = Table::read(
        &paths.monthly,
        &[
            "stock_id",
            "month",
            "return",
            "close",
            "market_cap",
            "volume",
            "blacklisted",
            "tradable",
            "cash_flow",
        ],
    )?;
    let mut order = KeyOrder::new();
    for (line, rec) in &monthly_t.rows {
        let row = monthly_t.row(*line, rec);
        let stock = row.text("stock_id")?;
        let parsed = (|| {
            let month = row.month("month")?;
            order.check(&monthly_t.path, *line, &stock, month)?;
            let obs = MonthlyObservation {
                month,
                ret: row.opt_f64("return", |v| v > -1.0, "return > -1")?,
                close: row.opt_f64("close", |v| v > 0.0, "close > 0")?,
                market_cap: row.opt_f64("market_cap", |v| v > 0.0, "market_cap > 0")?,
                volume: row.opt_f64("volume", |v| v >= 0.0, "volume >= 0")?,
                blacklisted: row.opt_flag("blacklisted")?,
                tradable: row.opt_flag("tradable")?,
                cash_flow: row.opt_f64("cash_flow", any, "finite")?,
            };
            c.monthly.entry(stock.clone()).or_default().push(obs);
            Ok(())
        })();
        c.handle(config.lenient, &stock, parsed)?;
    }
    report.rows.insert("monthly", monthly_t.rows.len());

    let daily_t = Table::read(&paths.daily, &["stock_id", "date", "return"])?;
    let mut order = KeyOrder::new();
    for (line, rec) in &daily_t.rows {
        let row = daily_t.row(*line, rec);
        let stock = row.text("stock_id")?;
        let parsed = (|| {
            let date = row.date("date")?;
            order.check(&daily_t.path, *line, &stock, date)?;
            let ret = row.opt_f64("return", |v| v > -1.0, "return > -1")?;
            c.daily
                .entry(stock.clone())
                .or_default()
                .push(DailyReturn { date, ret });
            Ok(())
        })();
        c.handle(config.lenient, &stock, parsed)?;
    }
    report.rows.insert("daily", daily_t.rows.len());

    let factors_t = Table::read(&paths.factors, &["month", "mkt_excess", "smb", "hml", "risk_free"])?;
    let mut factor_obs = Vec::with_capacity(factors_t.rows.len());
    let mut seen = BTreeSet::new();
    for (line, rec) in &factors_t.rows {
        let row = factors_t.row(*line, rec);
        let month = row.month("month")?;
        if !seen.insert(month) {
            return Err(Error::DuplicateKey {
                file: factors_t.path.clone(),
                line: *line,
                stock: "-".into(),
                key: month.to_string(),
            });
        }
        factor_obs.push(FactorObservation {
            month,
            mkt_excess: row.req_f64("mkt_excess")?,
            smb: row.req_f64("smb")?,
            hml: row.req_f64("hml")?,
            risk_free: row.req_f64("risk_free")?,
        });
    }
    report.rows.insert("factors", factors_t.rows.len());
    let factors = FactorSeries::new(factor_obs)?;

    let daily_factors = match &paths.daily_factors {
        Some(p) => {
            let t = Table::read(p, &["date", "mkt_excess", "smb", "hml", "risk_free"])?;
            let mut obs = Vec::with_capacity(t.rows.len());
            let mut seen = BTreeSet::new();
            for (line, rec) in &t.rows {
                let row = t.row(*line, rec);
                let date = row.date("date")?;
                if !seen.insert(date) {
                    return Err(Error::DuplicateKey {
                        file: t.path.clone(),
                        line: *line,
                        stock: "-".into(),
                        key: date.to_string(),
                    });
                }
                obs.push(DailyFactor {
                    date,
                    mkt_excess: row.req_f64("mkt_excess")?,
                    smb: row.req_f64("smb")?,
                    hml: row.req_f64("hml")?,
                    risk_free: row.req_f64("risk_free")?,
                });
            }
            report.rows.insert("daily_factors", t.rows.len());
            Some(DailyFactorSeries::new(obs)?)
        }
        None => None,
    };

    let ids: BTreeSet<String> = c
        .weekly
        .keys()
        .chain(c.monthly.keys())
        .chain(c.daily.keys())
        .cloned()
        .collect();
    let mut stocks = Vec::with_capacity(ids.len());
    for id in ids {
        let meta = match metas.get(&id) {
            Some(m) => m.clone(),
            None => {
                let e = Error::MalformedRow {
                    file: paths.meta.clone(),
                    line: 0,
                    column: "stock_id".into(),
                    message: format!("stock {id} has data but no listing date"),
                };
                c.handle(config.lenient, &id, Err(e))?;
                continue;
            }
        };
        let stock = StockSeries {
            meta,
            weekly: c.weekly.remove(&id).unwrap_or_default(),
            monthly: c.monthly.remove(&id).unwrap_or_default(),
            daily: c.daily.remove(&id).unwrap_or_default(),
        };
        if let Err(e) = check_listing(&stock, &paths.meta) {
            c.handle(config.lenient, &id, Err(e))?;
            continue;
        }
        if c.rejected.contains_key(&id) {
            continue;
        }
        stocks.push(stock);
    }
    report.rejected = c.rejected;
    for (stock, why) in &report.rejected {
        tracing::warn!(stock, reason = why.as_str(), "stock rejected during ingest");
    }

    let panel = StockPanel::new(stocks, factors, daily_factors)?;
    Ok(LoadedPanel { panel, report })
}

fn check_listing(stock: &StockSeries, meta_path: &Path) -> Result<()> {
    let listing = stock.meta.listing_date;
    let first_week = stock.weekly.iter().find(|b| !b.is_empty()).map(|b| b.week_end);
    let first_month = stock.monthly.iter().find(|o| !o.is_empty()).map(|o| o.month.last_day());
    let first_day = stock.daily.iter().find(|d| d.ret.is_some()).map(|d| d.date);
    let first = [first_week, first_month, first_day].into_iter().flatten().min();
    match first {
        Some(d) if listing >= d => Err(Error::MalformedRow {
            file: meta_path.to_path_buf(),
            line: 0,
            column: "listing_date".into(),
            message: format!(
                "listing date {listing} of {} does not precede its first observation {d}",
                stock.meta.stock_id
            ),
        }),
        _ => Ok(()),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn flag(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "1",
        Some(false) => "0",
        None => "",
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let wrap = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = writer(path)?;
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(r.into_iter().collect::<Vec<_>>()).map_err(wrap)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the panel in the ingest schema. Floats use shortest round-trip
/// formatting, so reloading reproduces every field bit for bit.
pub fn write_panel(panel: &StockPanel, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let paths = PanelPaths::in_dir(dir);
    write_rows(
        &paths.meta,
        &["stock_id", "listing_date"],
        panel
            .stocks
            .iter()
            .map(|s| [s.meta.stock_id.clone(), s.meta.listing_date.to_string()]),
    )?;
    write_rows(
        &paths.weekly,
        &["stock_id", "week_end", "close", "volume", "shares_outstanding"],
        panel.stocks.iter().flat_map(|s| {
            s.weekly.iter().map(move |b| {
                [
                    s.meta.stock_id.clone(),
                    b.week_end.to_string(),
                    opt(b.close),
                    opt(b.volume),
                    opt(b.shares_outstanding),
                ]
            })
        }),
    )?;
    write_rows(
        &paths.monthly,
        &[
            "stock_id",
            "month",
            "return",
            "close",
            "market_cap",
            "volume",
            "blacklisted",
            "tradable",
            "cash_flow",
        ],
        panel.stocks.iter().flat_map(|s| {
            s.monthly.iter().map(move |o| {
                [
                    s.meta.stock_id.clone(),
                    o.month.to_string(),
                    opt(o.ret),
                    opt(o.close),
                    opt(o.market_cap),
                    opt(o.volume),
                    flag(o.blacklisted).to_string(),
                    flag(o.tradable).to_string(),
                    opt(o.cash_flow),
                ]
            })
        }),
    )?;
    write_rows(
        &paths.daily,
        &["stock_id", "date", "return"],
        panel.stocks.iter().flat_map(|s| {
            s.daily
                .iter()
                .map(move |d| [s.meta.stock_id.clone(), d.date.to_string(), opt(d.ret)])
        }),
    )?;
    write_rows(
        &paths.factors,
        &["month", "mkt_excess", "smb", "hml", "risk_free"],
        panel.factors.obs.iter().map(|f| {
            [
                f.month.to_string(),
                f.mkt_excess.to_string(),
                f.smb.to_string(),
                f.hml.to_string(),
                f.risk_free.to_string(),
            ]
        }),
    )?;
    if let Some(df) = &panel.daily_factors {
        write_rows(
            &dir.join("daily_factors.csv"),
            &["date", "mkt_excess", "smb", "hml", "risk_free"],
            df.obs.iter().map(|f| {
                [
                    f.date.to_string(),
                    f.mkt_excess.to_string(),
                    f.smb.to_string(),
                    f.hml.to_string(),
                    f.risk_free.to_string(),
                ]
            }),
        )?;
    }
    Ok(())
}
