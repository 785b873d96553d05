//! Turnover-weighted reference prices and capital gains overhang.
//!
//! The reference price at week `t` averages the prices of weeks `t-1 .. t-T`
//! with weight `V_{t-n} * prod_{tau<n} (1 - V_{t-n+tau})`: the share of the
//! float last traded in week `t-n` and not traded since. The weights are
//! rescaled by their sum `k`. CGO is the gap between last week's price and the
//! reference price, as a fraction of last week's price.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::panel::{StockPanel, StockSeries};
use crate::par;
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct CgoConfig {
    /// Window length `T` in weeks.
    pub lookback_weeks: usize,
    /// Weeks in the window that must carry both price and turnover.
    pub min_valid_weeks: usize,
    /// Smallest admissible weight mass `k`.
    pub k_floor: f64,
}

impl Default for CgoConfig {
    fn default() -> Self {
        Self {
            lookback_weeks: 260,
            min_valid_weeks: 200,
            k_floor: 1e-6,
        }
    }
}

/// Weekly volume over shares outstanding, clamped to `[0, 1]`.
pub fn weekly_turnover(volume: f64, shares_outstanding: f64) -> Result<f64> {
    if !(shares_outstanding > 0.0) {
        return Err(Error::Degenerate(format!(
            "shares outstanding must be positive, got {shares_outstanding}"
        )));
    }
    Ok((volume / shares_outstanding).clamp(0.0, 1.0))
}

/// Unnormalized weights `w_1 .. w_T` for turnovers ordered most recent first.
/// Missing weeks get zero weight and do not decay older weights.
pub fn turnover_weights(turnovers: &[Option<f64>]) -> Vec<f64> {
    let mut survival = 1.0;
    turnovers
        .iter()
        .map(|v| match v {
            Some(v) => {
                let v = v.clamp(0.0, 1.0);
                let w = v * survival;
                survival *= 1.0 - v;
                w
            }
            None => 0.0,
        })
        .collect()
}

/// Reference price and weight mass from aligned windows ordered most recent
/// first (`prices[0]` is `P_{t-1}`). A week counts only if both its price and
/// turnover are present.
pub fn reference_price(prices: &[Option<f64>], turnovers: &[Option<f64>], config: &CgoConfig) -> Result<(f64, f64)> {
    assert_eq!(prices.len(), turnovers.len(), "price and turnover windows must align");
    let usable: Vec<Option<f64>> = prices.iter().zip(turnovers).map(|(p, v)| p.and(*v)).collect();
    let valid = usable.iter().flatten().count();
    if valid < config.min_valid_weeks {
        return Err(Error::InsufficientData {
            what: "reference price",
            needed: config.min_valid_weeks,
            available: valid,
        });
    }
    let weights = turnover_weights(&usable);
    let k: f64 = weights.iter().sum();
    if !(k >= config.k_floor) {
        return Err(Error::Degenerate(format!(
            "reference price undefined: weight mass {k:e} below floor {:e}",
            config.k_floor
        )));
    }
    let weighted: f64 = weights
        .iter()
        .zip(prices)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, p)| w * p.expect("positive weight implies a price"))
        .sum();
    Ok((weighted / k, k))
}

/// `(P_{t-1} - RP_t) / P_{t-1}`.
pub fn cgo_weekly(price_prev: f64, reference_price: f64) -> Result<f64> {
    if !(price_prev > 0.0) {
        return Err(Error::Degenerate(format!(
            "previous price must be positive, got {price_prev}"
        )));
    }
    Ok((price_prev - reference_price) / price_prev)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgoPoint {
    pub week_end: NaiveDate,
    pub turnover: Option<f64>,
    pub reference_price: Option<f64>,
    pub weight_mass: Option<f64>,
    pub cgo: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgoSeries {
    pub stock_id: String,
    pub lookback_weeks: usize,
    pub points: Vec<CgoPoint>,
}

pub fn stock_turnovers(stock: &StockSeries) -> Vec<Option<f64>> {
    stock
        .weekly
        .iter()
        .map(|b| match (b.volume, b.shares_outstanding) {
            (Some(v), Some(s)) => weekly_turnover(v, s).ok(),
            _ => None,
        })
        .collect()
}

fn stock_closes(stock: &StockSeries) -> Vec<Option<f64>> {
    stock.weekly.iter().map(|b| b.close).collect()
}

/// Reference price, weight mass and CGO at week index `t`, using only weeks
/// strictly before `t`.
pub fn cgo_at_week(
    closes: &[Option<f64>],
    turnovers: &[Option<f64>],
    t: usize,
    config: &CgoConfig,
) -> Result<(f64, f64, f64)> {
    if t == 0 {
        return Err(Error::InsufficientData {
            what: "reference price",
            needed: config.min_valid_weeks,
            available: 0,
        });
    }
    let window = |xs: &[Option<f64>]| -> Vec<Option<f64>> {
        (1..=config.lookback_weeks)
            .map(|n| t.checked_sub(n).and_then(|i| xs[i]))
            .collect()
    };
    let prices = window(closes);
    let (rp, k) = reference_price(&prices, &window(turnovers), config)?;
    let prev = prices[0].ok_or_else(|| Error::Degenerate("no price in the previous week".into()))?;
    Ok((rp, k, cgo_weekly(prev, rp)?))
}

pub fn cgo_series(stock: &StockSeries, weeks: &[NaiveDate], config: &CgoConfig) -> CgoSeries {
    let closes = stock_closes(stock);
    let turnovers = stock_turnovers(stock);
    let points = weeks
        .iter()
        .enumerate()
        .map(|(t, &week_end)| {
            let at = cgo_at_week(&closes, &turnovers, t, config).ok();
            CgoPoint {
                week_end,
                turnover: turnovers[t],
                reference_price: at.map(|a| a.0),
                weight_mass: at.map(|a| a.1),
                cgo: at.map(|a| a.2),
            }
        })
        .collect();
    CgoSeries {
        stock_id: stock.meta.stock_id.clone(),
        lookback_weeks: config.lookback_weeks,
        points,
    }
}

/// Weekly CGO series for every stock.
pub fn panel_cgo_series(panel: &StockPanel, config: &CgoConfig) -> Vec<CgoSeries> {
    par::map(panel.stocks(), |s| cgo_series(s, panel.calendar().weeks(), config))
}

/// CGO of the latest week inside `month` that has one.
pub fn cgo_monthly(series: &CgoSeries, month: crate::YearMonth) -> Option<f64> {
    series
        .points
        .iter()
        .rev()
        .filter(|p| month.contains(p.week_end))
        .find_map(|p| p.cgo)
}

/// Same sampling rule as [`cgo_monthly`], evaluated lazily at month index `m`.
pub fn monthly_cgo_at(
    panel: &StockPanel,
    closes: &[Option<f64>],
    turnovers: &[Option<f64>],
    m: usize,
    config: &CgoConfig,
) -> Option<f64> {
    panel
        .calendar()
        .weeks_in_month(m)
        .rev()
        .find_map(|t| cgo_at_week(closes, turnovers, t, config).ok().map(|a| a.2))
}

/// Month-end CGO for every stock and month, `[stock][month]`.
pub fn monthly_cgo_matrix(panel: &StockPanel, config: &CgoConfig) -> Vec<Vec<Option<f64>>> {
    par::map(panel.stocks(), |s| {
        let closes = stock_closes(s);
        let turnovers = stock_turnovers(s);
        (0..panel.months().len())
            .map(|m| monthly_cgo_at(panel, &closes, &turnovers, m, config))
            .collect()
    })
}

pub const FIGURE_PROBS: [f64; 3] = [0.10, 0.50, 0.90];
pub const MIN_PERCENTILE_STOCKS: usize = 10;

/// Cross-sectional CGO quantiles, same interpolation rule as winsorization.
pub fn cgo_percentiles(values: &[Option<f64>], probs: [f64; 3]) -> Result<[f64; 3]> {
    let sorted = stats::sorted_copy(values.iter().flatten().copied());
    if sorted.len() < MIN_PERCENTILE_STOCKS {
        return Err(Error::InsufficientData {
            what: "CGO percentiles",
            needed: MIN_PERCENTILE_STOCKS,
            available: sorted.len(),
        });
    }
    Ok(probs.map(|p| stats::quantile_sorted(&sorted, p)))
}
