//! Synthetic markets with planted effects.
//!
//! Months are generated in order. At each formation month the pipeline's own
//! characteristic and design code is run on the data generated so far, and the
//! following month's returns are drawn as the planted linear surface of that
//! design plus factor and idiosyncratic shocks. Estimators can therefore be
//! checked against exact ground truth.
//!
//! Randomness comes from ChaCha8 with one stream for the factors and one
//! stream per stock, so output depends only on the seed.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::calendar::YearMonth;
use crate::cgo::{monthly_cgo_at, weekly_turnover, CgoConfig};
use crate::error::{Error, Result};
use crate::fama_macbeth::{characteristics_at, regressors, Characteristics, Column, FmSpec};
use crate::panel::{
    Calendar, DailyFactor, DailyFactorSeries, DailyReturn, FactorObservation, FactorSeries, MonthlyObservation,
    StockMeta, StockPanel, StockSeries, WeeklyBar,
};
use crate::par;
use crate::preprocess::{universe_at, UniverseConfig};
use crate::proxies::{proxy_at, Proxy, ProxyConfig};

pub const RNG_NAME: &str = "chacha8";
const MAX_RESAMPLES: usize = 100;
const MIN_GROSS_RETURN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct DgpConfig {
    pub n_stocks: usize,
    /// Months after the burn-in.
    pub n_months: usize,
    /// Leading months that give CGO and the proxies their history.
    pub burn_in_months: usize,
    pub seed: u64,
    pub start_month: YearMonth,
    pub beta_range: (f64, f64),
    /// Monthly idiosyncratic volatility range.
    pub vol_range: (f64, f64),
    pub market_vol: f64,
    pub smb_vol: f64,
    pub hml_vol: f64,
    pub price_range: (f64, f64),
    /// Mean weekly turnover.
    pub turnover_mean: f64,
    /// AR(1) coefficient of log weekly turnover.
    pub turnover_persistence: f64,
    /// Stationary sd of log weekly turnover within a stock.
    pub turnover_dispersion: f64,
    /// Cross-sectional sd of the stock-level log turnover mean.
    pub turnover_stock_dispersion: f64,
    /// Coefficients on CGO, PROXY, PROXY x CGO, PROXY x MOM(-12,-1),
    /// MOM(-1,0), MOM(-12,-1), TURNOVER.
    pub planted_betas: [f64; 7],
    pub planted_proxy: Proxy,
    pub alpha: f64,
    pub risk_free: f64,
    /// Multiplier on every stochastic return component; 0 makes returns an
    /// exact function of the characteristics.
    pub noise_sd: f64,
    /// Listing dates precede the first month by 1 to `listing_stagger` months.
    pub listing_stagger: usize,
    /// Monthly probability that a stock is flagged blacklisted or untradable.
    pub flag_prob: f64,
    pub emit_daily: bool,
    pub universe: UniverseConfig,
    pub cgo: CgoConfig,
    pub proxies: ProxyConfig,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            n_stocks: 200,
            n_months: 120,
            burn_in_months: 60,
            seed: 42,
            start_month: YearMonth::new(1995, 1).expect("valid month"),
            beta_range: (0.5, 1.5),
            vol_range: (0.04, 0.16),
            market_vol: 0.05,
            smb_vol: 0.03,
            hml_vol: 0.03,
            price_range: (8.0, 40.0),
            turnover_mean: 0.05,
            turnover_persistence: 0.8,
            turnover_dispersion: 0.4,
            turnover_stock_dispersion: 0.3,
            planted_betas: [0.0; 7],
            planted_proxy: Proxy::Retvol,
            alpha: 0.008,
            risk_free: 0.002,
            noise_sd: 1.0,
            listing_stagger: 120,
            flag_prob: 0.005,
            emit_daily: true,
            universe: UniverseConfig::default(),
            cgo: CgoConfig::default(),
            proxies: ProxyConfig::default(),
        }
    }
}

impl DgpConfig {
    pub fn total_months(&self) -> usize {
        self.burn_in_months + self.n_months
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        for (name, (lo, hi)) in [
            ("beta_range", self.beta_range),
            ("vol_range", self.vol_range),
            ("price_range", self.price_range),
        ] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return bad(format!("{name} must be a nonempty interval, got ({lo}, {hi})"));
            }
        }
        if self.vol_range.0 < 0.0 || self.price_range.0 <= 0.0 {
            return bad("volatilities must be >= 0 and prices > 0".into());
        }
        if !(self.noise_sd >= 0.0) {
            return bad(format!("noise_sd must be >= 0, got {}", self.noise_sd));
        }
        if !(0.0 < self.turnover_mean && self.turnover_mean < 1.0) {
            return bad(format!("turnover_mean must lie in (0, 1), got {}", self.turnover_mean));
        }
        if !(0.0 <= self.turnover_persistence && self.turnover_persistence < 1.0) {
            return bad(format!(
                "turnover_persistence must lie in [0, 1), got {}",
                self.turnover_persistence
            ));
        }
        if self.n_stocks == 0 || self.total_months() == 0 {
            return bad("need at least one stock and one month".into());
        }
        if !(0.0..=1.0).contains(&self.flag_prob) {
            return bad(format!("flag_prob must lie in [0, 1], got {}", self.flag_prob));
        }
        self.universe.validate()?;
        let spec = self.planted_spec();
        if spec.columns.is_empty() {
            Ok(())
        } else {
            spec.validate()
        }
    }

    /// Columns carrying a nonzero planted coefficient, plus the constituents
    /// of any planted interaction.
    pub fn planted_columns(&self) -> Vec<Column> {
        let mut cols: Vec<Column> = Column::ALL
            .into_iter()
            .zip(self.planted_betas)
            .filter(|(_, b)| *b != 0.0)
            .map(|(c, _)| c)
            .collect();
        let add = |cols: &mut Vec<Column>, c| {
            if !cols.contains(&c) {
                cols.push(c);
            }
        };
        if cols.contains(&Column::ProxyCgo) {
            add(&mut cols, Column::Proxy);
            add(&mut cols, Column::Cgo);
        }
        if cols.contains(&Column::ProxyMom12) {
            add(&mut cols, Column::Proxy);
            add(&mut cols, Column::Mom12);
        }
        cols.sort();
        cols
    }

    /// Design used for the planted surface.
    pub fn planted_spec(&self) -> FmSpec {
        FmSpec {
            columns: self.planted_columns(),
            ..FmSpec::nested(1, self.planted_proxy).with_universe(&self.universe)
        }
    }

    pub fn planted_beta(&self, c: Column) -> f64 {
        self.planted_betas[Column::ALL.iter().position(|x| *x == c).expect("column")]
    }
}

/// Stock-level parameters drawn at the start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StockTruth {
    pub market_beta: f64,
    pub smb_loading: f64,
    pub hml_loading: f64,
    pub idio_vol: f64,
    pub cash_flow_vol: f64,
    pub turnover_log_mean: f64,
}

/// Formation month at which the planted surface applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMonth {
    pub month: YearMonth,
    pub n_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub config: DgpConfig,
    pub stocks: Vec<(String, StockTruth)>,
    pub surface_columns: Vec<Column>,
    pub surface: Vec<SurfaceMonth>,
}

impl GroundTruth {
    /// `(parameter, value)` pairs for export.
    pub fn parameters(&self) -> Vec<(String, String)> {
        let c = &self.config;
        let mut out: Vec<(String, String)> = vec![
            ("rng".into(), RNG_NAME.into()),
            ("seed".into(), c.seed.to_string()),
            ("n_stocks".into(), c.n_stocks.to_string()),
            ("n_months".into(), c.n_months.to_string()),
            ("burn_in_months".into(), c.burn_in_months.to_string()),
            ("start_month".into(), c.start_month.to_string()),
            ("beta_range".into(), format!("{}:{}", c.beta_range.0, c.beta_range.1)),
            ("vol_range".into(), format!("{}:{}", c.vol_range.0, c.vol_range.1)),
            ("market_vol".into(), c.market_vol.to_string()),
            ("smb_vol".into(), c.smb_vol.to_string()),
            ("hml_vol".into(), c.hml_vol.to_string()),
            ("turnover_mean".into(), c.turnover_mean.to_string()),
            ("turnover_persistence".into(), c.turnover_persistence.to_string()),
            ("turnover_dispersion".into(), c.turnover_dispersion.to_string()),
            ("planted_proxy".into(), c.planted_proxy.name().into()),
            ("alpha".into(), c.alpha.to_string()),
            ("risk_free".into(), c.risk_free.to_string()),
            ("noise_sd".into(), c.noise_sd.to_string()),
            ("listing_stagger".into(), c.listing_stagger.to_string()),
        ];
        for col in Column::ALL {
            out.push((format!("beta.{}", col.key()), c.planted_beta(col).to_string()));
        }
        out.push((
            "surface_columns".into(),
            self.surface_columns
                .iter()
                .map(|c| c.key())
                .collect::<Vec<_>>()
                .join(";"),
        ));
        for s in &self.surface {
            out.push((format!("surface_rows.{}", s.month), s.n_rows.to_string()));
        }
        for (id, t) in &self.stocks {
            out.push((format!("stock.{id}.market_beta"), t.market_beta.to_string()));
            out.push((format!("stock.{id}.idio_vol"), t.idio_vol.to_string()));
            out.push((format!("stock.{id}.cash_flow_vol"), t.cash_flow_vol.to_string()));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SynthMarket {
    pub panel: StockPanel,
    pub truth: GroundTruth,
}

struct StockState {
    rng: ChaCha8Rng,
    truth: StockTruth,
    price: f64,
    shares: f64,
    log_turnover: f64,
    closes: Vec<Option<f64>>,
    turnovers: Vec<Option<f64>>,
    pending: Option<MonthData>,
}

struct MonthData {
    weekly: Vec<WeeklyBar>,
    daily: Vec<DailyReturn>,
    monthly: MonthlyObservation,
}

/// Shared draws for one month.
struct MonthFactors {
    month: YearMonth,
    days: Vec<NaiveDate>,
    week_ends: Vec<NaiveDate>,
    /// Monthly factor shocks (already scaled by `noise_sd`).
    mkt: f64,
    smb: f64,
    hml: f64,
    daily: Vec<DailyFactor>,
}

/// Last business day of each calendar week inside `month`.
pub fn week_ends(month: YearMonth) -> Vec<NaiveDate> {
    let days = month.business_days();
    days.iter()
        .enumerate()
        .filter(|(i, d)| d.weekday() == Weekday::Fri || *i + 1 == days.len())
        .map(|(_, d)| *d)
        .collect()
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn draw_factors(rng: &mut ChaCha8Rng, cfg: &DgpConfig, month: YearMonth) -> MonthFactors {
    let days = month.business_days();
    let n = days.len() as f64;
    let mkt = cfg.noise_sd * cfg.market_vol * normal(rng);
    let smb = cfg.noise_sd * cfg.smb_vol * normal(rng);
    let hml = cfg.noise_sd * cfg.hml_vol * normal(rng);
    // Daily paths sum to the monthly shock.
    let mut path = |total: f64, vol: f64| -> Vec<f64> {
        let z: Vec<f64> = days
            .iter()
            .map(|_| cfg.noise_sd * vol / n.sqrt() * normal(rng))
            .collect();
        let zbar = z.iter().sum::<f64>() / n;
        z.iter().map(|v| total / n + v - zbar).collect()
    };
    let (dm, ds, dh) = (
        path(mkt, cfg.market_vol),
        path(smb, cfg.smb_vol),
        path(hml, cfg.hml_vol),
    );
    let daily = days
        .iter()
        .enumerate()
        .map(|(k, &date)| DailyFactor {
            date,
            mkt_excess: dm[k],
            smb: ds[k],
            hml: dh[k],
            risk_free: cfg.risk_free / n,
        })
        .collect();
    MonthFactors {
        month,
        week_ends: week_ends(month),
        days,
        mkt,
        smb,
        hml,
        daily,
    }
}

fn init_stock(cfg: &DgpConfig, i: usize) -> (StockState, StockMeta) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(i as u64 + 1);
    let s2 = cfg.turnover_dispersion.powi(2);
    let d = cfg.turnover_stock_dispersion;
    // E[exp(mu + d z + s2/2)] = turnover_mean
    let turnover_log_mean = cfg.turnover_mean.ln() - s2 / 2.0 - d * d / 2.0 + d * normal(&mut rng);
    let truth = StockTruth {
        market_beta: uniform(&mut rng, cfg.beta_range),
        smb_loading: rng.random_range(-0.5..1.0),
        hml_loading: rng.random_range(-0.5..0.5),
        idio_vol: uniform(&mut rng, cfg.vol_range),
        cash_flow_vol: rng.random_range(0.005..0.05),
        turnover_log_mean,
    };
    let lag = rng.random_range(1..=cfg.listing_stagger.max(1)) as i64;
    let listing_date = cfg.start_month.add_months(-lag).first_day();
    let state = StockState {
        price: uniform(&mut rng, cfg.price_range),
        shares: 10f64.powf(rng.random_range(7.0..9.0)).round(),
        log_turnover: turnover_log_mean + cfg.turnover_dispersion * normal(&mut rng),
        rng,
        truth,
        closes: Vec::new(),
        turnovers: Vec::new(),
        pending: None,
    };
    let meta = StockMeta {
        stock_id: stock_id(i),
        listing_date,
    };
    (state, meta)
}

pub fn stock_id(i: usize) -> String {
    format!("S{i:05}")
}

fn generate_month(st: &mut StockState, cfg: &DgpConfig, f: &MonthFactors, expected: f64) -> Result<()> {
    let t = st.truth;
    let mut ret = f64::NAN;
    for attempt in 0..=MAX_RESAMPLES {
        if attempt == MAX_RESAMPLES {
            return Err(Error::Degenerate(format!(
                "return draw stayed below {} after {MAX_RESAMPLES} resamples",
                MIN_GROSS_RETURN - 1.0
            )));
        }
        let idio = cfg.noise_sd * t.idio_vol * normal(&mut st.rng);
        ret = cfg.risk_free + expected + t.market_beta * f.mkt + t.smb_loading * f.smb + t.hml_loading * f.hml + idio;
        if 1.0 + ret > MIN_GROSS_RETURN {
            break;
        }
    }

    // Daily path: factor exposures plus noise, rescaled to compound to `ret`.
    let n = f.days.len();
    let daily_sd = cfg.noise_sd * t.idio_vol / (n as f64).sqrt();
    let mut gross: Vec<f64> = f
        .daily
        .iter()
        .map(|d| {
            let r = d.risk_free
                + t.market_beta * d.mkt_excess
                + t.smb_loading * d.smb
                + t.hml_loading * d.hml
                + daily_sd * normal(&mut st.rng);
            (1.0 + r).max(0.5)
        })
        .collect();
    let scale = ((1.0 + ret) / gross.iter().product::<f64>()).powf(1.0 / n as f64);
    for g in &mut gross {
        *g *= scale;
    }

    if st.rng.random_bool(0.02) {
        st.shares = (st.shares * rng_issue(&mut st.rng)).round();
    }
    let phi = cfg.turnover_persistence;
    let innov_sd = cfg.turnover_dispersion * (1.0 - phi * phi).sqrt();
    let start = st.price;
    let close = start * (1.0 + ret);
    let mut weekly = Vec::with_capacity(f.week_ends.len());
    let mut cum = 1.0;
    let mut day = 0;
    let mut month_volume = 0.0;
    for (w, &we) in f.week_ends.iter().enumerate() {
        while day < n && f.days[day] <= we {
            cum *= gross[day];
            day += 1;
        }
        let c = if w + 1 == f.week_ends.len() { close } else { start * cum };
        st.log_turnover =
            t.turnover_log_mean + phi * (st.log_turnover - t.turnover_log_mean) + innov_sd * normal(&mut st.rng);
        let v = st.log_turnover.exp().min(0.95);
        let volume = (v * st.shares).round();
        month_volume += volume;
        st.closes.push(Some(c));
        st.turnovers.push(weekly_turnover(volume, st.shares).ok());
        weekly.push(WeeklyBar {
            week_end: we,
            close: Some(c),
            volume: Some(volume),
            shares_outstanding: Some(st.shares),
        });
    }
    st.price = close;
    let market_cap = close * st.shares;
    let cash_flow = (f.month.month() == 12).then(|| market_cap * (0.05 + t.cash_flow_vol * normal(&mut st.rng)));
    let blacklisted = st.rng.random_bool(cfg.flag_prob);
    let untradable = st.rng.random_bool(cfg.flag_prob);
    let daily = if cfg.emit_daily {
        f.days
            .iter()
            .zip(&gross)
            .map(|(&date, g)| DailyReturn {
                date,
                ret: Some(g - 1.0),
            })
            .collect()
    } else {
        Vec::new()
    };
    st.pending = Some(MonthData {
        weekly,
        daily,
        monthly: MonthlyObservation {
            month: f.month,
            ret: Some(ret),
            close: Some(close),
            market_cap: Some(market_cap),
            volume: Some(month_volume),
            blacklisted: Some(blacklisted),
            tradable: Some(!untradable),
            cash_flow,
        },
    });
    Ok(())
}

fn rng_issue(rng: &mut ChaCha8Rng) -> f64 {
    let factor: f64 = Normal::new(1.05, 0.03).expect("valid normal").sample(rng);
    factor.max(0.9)
}

/// Planted expected excess returns for month `m + 1`, indexed by stock, from
/// the design at formation month `m`.
fn planted_surface(
    panel: &StockPanel,
    states: &[StockState],
    m: usize,
    cfg: &DgpConfig,
    spec: &FmSpec,
) -> (Vec<f64>, Option<usize>) {
    let mut expected = vec![cfg.alpha; panel.n_stocks()];
    if spec.columns.is_empty() {
        return (expected, None);
    }
    let needs_proxy = spec
        .columns
        .iter()
        .any(|c| matches!(c, Column::Proxy | Column::ProxyCgo | Column::ProxyMom12));
    let needs_cgo = spec.columns.iter().any(|c| matches!(c, Column::Cgo | Column::ProxyCgo));
    let universe = universe_at(panel, m, &cfg.universe);
    let rows: Vec<(usize, Characteristics)> = par::map(&universe, |&s| {
        let cgo = needs_cgo
            .then(|| monthly_cgo_at(panel, &states[s].closes, &states[s].turnovers, m, &cfg.cgo))
            .flatten();
        let proxy = needs_proxy
            .then(|| proxy_at(panel, s, m, cfg.planted_proxy, &cfg.proxies))
            .flatten();
        (s, characteristics_at(panel, s, m, cgo, proxy))
    });
    match regressors(&rows, spec) {
        Ok(reg) => {
            let betas: Vec<f64> = reg.columns.iter().map(|c| cfg.planted_beta(*c)).collect();
            for (i, &s) in reg.stocks.iter().enumerate() {
                expected[s] += betas.iter().zip(&reg.values).map(|(b, col)| b * col[i]).sum::<f64>();
            }
            (expected, Some(reg.stocks.len()))
        }
        Err(_) => (expected, None),
    }
}

/// Generates a panel and its ground truth.
pub fn generate_panel(cfg: &DgpConfig) -> Result<SynthMarket> {
    cfg.validate()?;
    let n = cfg.n_stocks;
    let mut factor_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    factor_rng.set_stream(0);

    let (mut states, metas): (Vec<StockState>, Vec<StockMeta>) = (0..n).map(|i| init_stock(cfg, i)).unzip();
    let mut panel = StockPanel::from_parts(
        metas
            .into_iter()
            .map(|meta| StockSeries {
                meta,
                weekly: Vec::new(),
                monthly: Vec::new(),
                daily: Vec::new(),
            })
            .collect(),
        Calendar::default(),
        FactorSeries::default(),
        cfg.emit_daily.then(DailyFactorSeries::default),
    );
    let spec = cfg.planted_spec();
    let mut surface = Vec::new();

    for k in 0..cfg.total_months() {
        let month = cfg.start_month.add_months(k as i64);
        let f = draw_factors(&mut factor_rng, cfg, month);
        let expected = if k == 0 {
            vec![cfg.alpha; n]
        } else {
            let (e, rows) = planted_surface(&panel, &states, k - 1, cfg, &spec);
            if let Some(n_rows) = rows {
                surface.push(SurfaceMonth {
                    month: panel.months()[k - 1],
                    n_rows,
                });
            }
            e
        };
        let mut jobs: Vec<(&mut StockState, f64, Option<Error>)> =
            states.iter_mut().zip(expected).map(|(st, e)| (st, e, None)).collect();
        par::for_each_mut(&mut jobs, |_, (st, e, err)| {
            *err = generate_month(st, cfg, &f, *e).err();
        });
        if let Some(e) = jobs.into_iter().find_map(|(_, _, err)| err) {
            return Err(e.in_stage("synth"));
        }

        panel.calendar.push_month(month, &f.week_ends);
        panel.factors.push(FactorObservation {
            month,
            mkt_excess: f.mkt,
            smb: f.smb,
            hml: f.hml,
            risk_free: cfg.risk_free,
        });
        if let Some(df) = panel.daily_factors.as_mut() {
            df.extend(f.daily.iter().copied());
        }
        for (series, st) in panel.stocks.iter_mut().zip(&mut states) {
            let data = st.pending.take().expect("month generated");
            series.weekly.extend(data.weekly);
            series.daily.extend(data.daily);
            series.monthly.push(data.monthly);
        }
    }

    let truth = GroundTruth {
        config: cfg.clone(),
        stocks: panel
            .stocks()
            .iter()
            .zip(&states)
            .map(|(s, st)| (s.id().to_string(), st.truth))
            .collect(),
        surface_columns: spec.columns.clone(),
        surface,
    };
    Ok(SynthMarket { panel, truth })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DgpConfig {
        DgpConfig {
            n_stocks: 12,
            n_months: 6,
            burn_in_months: 0,
            ..DgpConfig::default()
        }
    }

    #[test]
    fn week_ends_cover_month() {
        let m: YearMonth = "2024-05".parse().unwrap();
        let w = week_ends(m);
        assert_eq!(*w.last().unwrap(), NaiveDate::from_ymd_opt(2024, 5, 31).unwrap());
        assert_eq!(w[0], NaiveDate::from_ymd_opt(2024, 5, 3).unwrap());
        assert_eq!(w.len(), 5);
    }

    #[test]
    fn same_seed_same_panel() {
        let a = generate_panel(&small()).unwrap();
        let b = generate_panel(&small()).unwrap();
        assert_eq!(a.panel, b.panel);
        let c = par::run_sequential(|| generate_panel(&small()).unwrap());
        assert_eq!(a.panel, c.panel);
        let other = generate_panel(&DgpConfig { seed: 7, ..small() }).unwrap();
        assert_ne!(a.panel, other.panel);
    }

    #[test]
    fn weekly_prices_compound_to_monthly() {
        let mk = generate_panel(&small()).unwrap();
        let p = &mk.panel;
        for s in p.stocks() {
            for m in 1..p.months().len() {
                let last = p.calendar().weeks_in_month(m).last().unwrap();
                let prev = p.calendar().weeks_in_month(m - 1).last().unwrap();
                let gross = s.weekly[last].close.unwrap() / s.weekly[prev].close.unwrap();
                assert!((gross - (1.0 + s.monthly[m].ret.unwrap())).abs() < 1e-10);
                let daily: f64 = s.daily_in(p.months()[m]).iter().map(|d| 1.0 + d.ret.unwrap()).product();
                assert!((daily - gross).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn noiseless_returns_follow_the_surface() {
        let mut betas = [0.0; 7];
        betas[5] = -0.02;
        let cfg = DgpConfig {
            n_stocks: 40,
            n_months: 20,
            burn_in_months: 0,
            noise_sd: 0.0,
            planted_betas: betas,
            flag_prob: 0.0,
            ..DgpConfig::default()
        };
        assert_eq!(cfg.planted_columns(), vec![Column::Mom12]);
        let mk = generate_panel(&cfg).unwrap();
        assert!(!mk.truth.surface.is_empty());
        let spec = cfg.planted_spec();
        for sm in &mk.truth.surface {
            let m = mk.panel.calendar().month_index(sm.month).unwrap();
            let rows: Vec<(usize, Characteristics)> = universe_at(&mk.panel, m, &cfg.universe)
                .into_iter()
                .map(|s| (s, characteristics_at(&mk.panel, s, m, None, None)))
                .collect();
            let reg = regressors(&rows, &spec).unwrap();
            for (i, &s) in reg.stocks.iter().enumerate() {
                let want = cfg.risk_free + cfg.alpha - 0.02 * reg.values[0][i];
                let got = mk.panel.stock(s).monthly[m + 1].ret.unwrap();
                assert!((got - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        assert!(DgpConfig {
            noise_sd: -1.0,
            ..small()
        }
        .validate()
        .is_err());
        assert!(DgpConfig {
            vol_range: (0.2, 0.1),
            ..small()
        }
        .validate()
        .is_err());
        assert!(DgpConfig {
            turnover_mean: 1.5,
            ..small()
        }
        .validate()
        .is_err());
    }
}
