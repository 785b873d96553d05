//! The five lagged risk proxies: CAPM beta, return volatility, idiosyncratic
//! volatility, inverse firm age and cash-flow volatility.
//!
//! Every value at month `t` uses data dated no later than the end of `t`.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;

use crate::calendar::{years_between, YearMonth};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::panel::{StockPanel, StockSeries};
use crate::par;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Proxy {
    Beta,
    Retvol,
    Ivol,
    InvAge,
    Cfvol,
}

impl Proxy {
    pub const ALL: [Proxy; 5] = [Proxy::Beta, Proxy::Retvol, Proxy::Ivol, Proxy::InvAge, Proxy::Cfvol];

    /// Identifier used in file names and configuration.
    pub fn name(self) -> &'static str {
        match self {
            Proxy::Beta => "beta",
            Proxy::Retvol => "retvol",
            Proxy::Ivol => "ivol",
            Proxy::InvAge => "inv_age",
            Proxy::Cfvol => "cfvol",
        }
    }

    /// Display label for table headers.
    pub fn label(self) -> &'static str {
        match self {
            Proxy::Beta => "Beta",
            Proxy::Retvol => "RETVOL",
            Proxy::Ivol => "IVOL",
            Proxy::InvAge => "1/AGE",
            Proxy::Cfvol => "CFVOL",
        }
    }
}

impl fmt::Display for Proxy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Proxy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Proxy::ALL
            .into_iter()
            .find(|p| p.name() == s || (s == "age" && *p == Proxy::InvAge))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown proxy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyConfig {
    pub window_months: usize,
    pub min_obs: usize,
    pub ivol_min_days: usize,
    pub cfvol_years: usize,
    pub cfvol_min_years: usize,
    pub min_age_years: f64,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        Self {
            window_months: 60,
            min_obs: 36,
            ivol_min_days: 15,
            cfvol_years: 5,
            cfvol_min_years: 3,
            min_age_years: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProxyValues {
    pub beta: Option<f64>,
    pub retvol: Option<f64>,
    pub ivol: Option<f64>,
    pub inv_age: Option<f64>,
    pub cfvol: Option<f64>,
}

impl ProxyValues {
    pub fn get(&self, proxy: Proxy) -> Option<f64> {
        match proxy {
            Proxy::Beta => self.beta,
            Proxy::Retvol => self.retvol,
            Proxy::Ivol => self.ivol,
            Proxy::InvAge => self.inv_age,
            Proxy::Cfvol => self.cfvol,
        }
    }
}

fn need(what: &'static str, needed: usize, available: usize) -> Result<()> {
    if available < needed {
        Err(Error::InsufficientData {
            what,
            needed,
            available,
        })
    } else {
        Ok(())
    }
}

/// OLS slope of stock excess returns on market excess returns.
pub fn beta(stock_excess: &[f64], market_excess: &[f64], min_obs: usize) -> Result<f64> {
    assert_eq!(stock_excess.len(), market_excess.len());
    need("beta", min_obs.max(2), stock_excess.len())?;
    let x = Matrix::with_intercept(&[market_excess.to_vec()], market_excess.len());
    match least_squares(&x, stock_excess) {
        Ok(fit) => Ok(fit.coefficients[1]),
        Err(_) => Err(Error::Degenerate("zero market variance in beta window".into())),
    }
}

/// Sample standard deviation of monthly returns.
pub fn retvol(returns: &[f64], min_obs: usize) -> Result<f64> {
    need("retvol", min_obs.max(2), returns.len())?;
    Ok(stats::sample_sd(returns))
}

/// One trading day for the three-factor regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorDay {
    pub mkt_excess: f64,
    pub smb: f64,
    pub hml: f64,
    pub risk_free: f64,
}

/// Residual standard deviation from regressing daily excess returns on the
/// three factors plus an intercept. Factor columns that are constant over the
/// window carry no information beyond the intercept and are dropped; any other
/// collinearity is an error.
pub fn ivol(returns: &[f64], factors: &[FactorDay], min_days: usize) -> Result<f64> {
    assert_eq!(returns.len(), factors.len());
    need("ivol", min_days.max(5), returns.len())?;
    let n = returns.len();
    let y: Vec<f64> = returns.iter().zip(factors).map(|(r, f)| r - f.risk_free).collect();
    let names = ["mkt_excess", "smb", "hml"];
    let columns: Vec<Vec<f64>> = [
        factors.iter().map(|f| f.mkt_excess).collect::<Vec<_>>(),
        factors.iter().map(|f| f.smb).collect(),
        factors.iter().map(|f| f.hml).collect(),
    ]
    .into_iter()
    .collect();
    let (kept, kept_names): (Vec<Vec<f64>>, Vec<&str>) = columns
        .into_iter()
        .zip(names)
        .filter(|(c, _)| c.iter().any(|v| *v != c[0]))
        .unzip();
    let x = Matrix::with_intercept(&kept, n);
    let fit = least_squares(&x, &y).map_err(|e| Error::RankDeficient {
        column: kept_names
            .get(e.column.wrapping_sub(1))
            .unwrap_or(&"intercept")
            .to_string(),
    })?;
    Ok(stats::sample_sd(&fit.residuals))
}

/// Reciprocal of years since listing, measured at the last day of `month`.
pub fn inv_age(listing_date: NaiveDate, month: YearMonth, min_age_years: f64) -> Result<f64> {
    let age = years_between(listing_date, month.last_day());
    if age < min_age_years {
        return Err(Error::InsufficientData {
            what: "firm age (years)",
            needed: min_age_years.ceil() as usize,
            available: age.max(0.0) as usize,
        });
    }
    Ok(1.0 / age)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CashFlowObs {
    pub cash_flow: f64,
    pub scaler: f64,
}

/// Sample standard deviation of scaled annual cash flows.
pub fn cfvol(flows: &[CashFlowObs], min_obs: usize) -> Result<f64> {
    need("cfvol", min_obs.max(2), flows.len())?;
    let scaled = flows
        .iter()
        .map(|f| {
            if f.scaler > 0.0 {
                Ok(f.cash_flow / f.scaler)
            } else {
                Err(Error::Degenerate(format!(
                    "cash-flow scaler must be positive, got {}",
                    f.scaler
                )))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(stats::sample_sd(&scaled))
}

/// Where IVOL takes its daily factors from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorSource {
    Daily,
    /// Monthly factors spread evenly over the month's trading days.
    FlatMonthly,
}

impl FactorSource {
    pub fn of(panel: &StockPanel) -> Self {
        if panel.daily_factors().is_some() {
            FactorSource::Daily
        } else {
            FactorSource::FlatMonthly
        }
    }
}

fn window(m: usize, len: usize) -> std::ops::RangeInclusive<usize> {
    m.saturating_sub(len - 1)..=m
}

fn beta_at(panel: &StockPanel, s: &StockSeries, m: usize, cfg: &ProxyConfig) -> Result<f64> {
    let (mut y, mut x) = (Vec::new(), Vec::new());
    for k in window(m, cfg.window_months) {
        let o = &s.monthly[k];
        if let (Some(r), Some(f)) = (o.ret, panel.factors().get(o.month)) {
            y.push(r - f.risk_free);
            x.push(f.mkt_excess);
        }
    }
    beta(&y, &x, cfg.min_obs)
}

fn retvol_at(s: &StockSeries, m: usize, cfg: &ProxyConfig) -> Result<f64> {
    let rs: Vec<f64> = window(m, cfg.window_months).filter_map(|k| s.monthly[k].ret).collect();
    retvol(&rs, cfg.min_obs)
}

fn ivol_at(panel: &StockPanel, s: &StockSeries, m: usize, cfg: &ProxyConfig) -> Result<f64> {
    let month = panel.months()[m];
    let days = s.daily_in(month);
    let (mut rs, mut fs) = (Vec::with_capacity(days.len()), Vec::with_capacity(days.len()));
    match panel.daily_factors() {
        Some(df) => {
            for d in days {
                if let (Some(r), Some(f)) = (d.ret, df.get(d.date)) {
                    rs.push(r);
                    fs.push(FactorDay {
                        mkt_excess: f.mkt_excess,
                        smb: f.smb,
                        hml: f.hml,
                        risk_free: f.risk_free,
                    });
                }
            }
        }
        None => {
            let f = panel.factors().get(month).ok_or(Error::InsufficientData {
                what: "monthly factors for ivol",
                needed: 1,
                available: 0,
            })?;
            let present: Vec<f64> = days.iter().filter_map(|d| d.ret).collect();
            let n = present.len().max(1) as f64;
            let flat = FactorDay {
                mkt_excess: f.mkt_excess / n,
                smb: f.smb / n,
                hml: f.hml / n,
                risk_free: f.risk_free / n,
            };
            fs = vec![flat; present.len()];
            rs = present;
        }
    }
    ivol(&rs, &fs, cfg.ivol_min_days)
}

fn cfvol_at(s: &StockSeries, m: usize, cfg: &ProxyConfig) -> Result<f64> {
    let mut by_year: Vec<(i32, CashFlowObs)> = Vec::new();
    for k in window(m, cfg.window_months) {
        let o = &s.monthly[k];
        if let (Some(cf), Some(cap)) = (o.cash_flow, o.market_cap) {
            let obs = CashFlowObs {
                cash_flow: cf,
                scaler: cap,
            };
            match by_year.last_mut() {
                Some((y, last)) if *y == o.month.year() => *last = obs,
                _ => by_year.push((o.month.year(), obs)),
            }
        }
    }
    let skip = by_year.len().saturating_sub(cfg.cfvol_years);
    let flows: Vec<CashFlowObs> = by_year[skip..].iter().map(|(_, o)| *o).collect();
    cfvol(&flows, cfg.cfvol_min_years)
}

/// One proxy for stock `s` at month index `m`.
pub fn proxy_at(panel: &StockPanel, s: usize, m: usize, proxy: Proxy, cfg: &ProxyConfig) -> Option<f64> {
    let stock = panel.stock(s);
    let r = match proxy {
        Proxy::Beta => beta_at(panel, stock, m, cfg),
        Proxy::Retvol => retvol_at(stock, m, cfg),
        Proxy::Ivol => ivol_at(panel, stock, m, cfg),
        Proxy::InvAge => inv_age(stock.meta.listing_date, panel.months()[m], cfg.min_age_years),
        Proxy::Cfvol => cfvol_at(stock, m, cfg),
    };
    r.ok()
}

pub fn proxies_at(panel: &StockPanel, s: usize, m: usize, cfg: &ProxyConfig) -> ProxyValues {
    ProxyValues {
        beta: proxy_at(panel, s, m, Proxy::Beta, cfg),
        retvol: proxy_at(panel, s, m, Proxy::Retvol, cfg),
        ivol: proxy_at(panel, s, m, Proxy::Ivol, cfg),
        inv_age: proxy_at(panel, s, m, Proxy::InvAge, cfg),
        cfvol: proxy_at(panel, s, m, Proxy::Cfvol, cfg),
    }
}

/// Proxies for every stock and month, `values[stock][month]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyPanel {
    pub values: Vec<Vec<ProxyValues>>,
    pub factor_source: FactorSource,
}

impl ProxyPanel {
    pub fn get(&self, s: usize, m: usize, proxy: Proxy) -> Option<f64> {
        self.values[s][m].get(proxy)
    }

    /// Column of one proxy at month `m` across stocks.
    pub fn cross_section(&self, m: usize, proxy: Proxy) -> Vec<Option<f64>> {
        self.values.iter().map(|row| row[m].get(proxy)).collect()
    }
}

/// One proxy for every stock and month, `[stock][month]`.
pub fn proxy_matrix(panel: &StockPanel, proxy: Proxy, cfg: &ProxyConfig) -> Vec<Vec<Option<f64>>> {
    let n_months = panel.months().len();
    par::map_range(panel.n_stocks(), |s| {
        (0..n_months).map(|m| proxy_at(panel, s, m, proxy, cfg)).collect()
    })
}

pub fn proxy_panel(panel: &StockPanel, cfg: &ProxyConfig) -> ProxyPanel {
    let n_months = panel.months().len();
    let values = par::map_range(panel.n_stocks(), |s| {
        (0..n_months).map(|m| proxies_at(panel, s, m, cfg)).collect()
    });
    ProxyPanel {
        values,
        factor_source: FactorSource::of(panel),
    }
}
