//! Dependent 5x5 double sorts on CGO and a risk proxy with one-month
//! value-weighted holding returns.

use crate::calendar::YearMonth;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::newey_west::{newey_west_se, ols_hac_covariance, t_stat, LagRule};
use crate::panel::{FactorObservation, StockPanel};
use crate::par;
use crate::preprocess::{universe_at, UniverseConfig};
use crate::proxies::Proxy;
use crate::stats;

pub const N_GROUPS: usize = 5;
pub const MIN_SPREAD_MONTHS: usize = 24;

/// Quintile of each value: zero-based rank `r` among `n` maps to
/// `floor(5r/n) + 1`. Ties keep input order, so callers pass stocks sorted by id.
pub fn quintile_assign(values: &[f64]) -> Result<Vec<usize>> {
    let n = values.len();
    if n < N_GROUPS {
        return Err(Error::InsufficientData {
            what: "quintile sort",
            needed: N_GROUPS,
            available: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut groups = vec![0; n];
    for (r, &i) in order.iter().enumerate() {
        groups[i] = N_GROUPS * r / n + 1;
    }
    Ok(groups)
}

/// Stock indices per cell, `cells[cgo_group][proxy_group]`, zero-based groups.
pub type Cells = [[Vec<usize>; N_GROUPS]; N_GROUPS];

/// Sorts `stocks` into CGO quintiles, then into proxy quintiles within each
/// CGO quintile. `cgo` and `proxy` are indexed by stock.
pub fn dependent_sort(stocks: &[usize], cgo: &[Option<f64>], proxy: &[Option<f64>]) -> Result<Cells> {
    let members: Vec<usize> = stocks
        .iter()
        .copied()
        .filter(|&s| cgo[s].is_some() && proxy[s].is_some())
        .collect();
    let cgo_vals: Vec<f64> = members.iter().map(|&s| cgo[s].unwrap_or_default()).collect();
    let cgo_groups = quintile_assign(&cgo_vals)?;
    let mut cells: Cells = Default::default();
    for g in 0..N_GROUPS {
        let inside: Vec<usize> = members
            .iter()
            .zip(&cgo_groups)
            .filter(|(_, &cg)| cg == g + 1)
            .map(|(&s, _)| s)
            .collect();
        if inside.len() < N_GROUPS {
            return Err(Error::InsufficientData {
                what: "stocks in a CGO group",
                needed: N_GROUPS,
                available: inside.len(),
            });
        }
        let vals: Vec<f64> = inside.iter().map(|&s| proxy[s].unwrap_or_default()).collect();
        for (&s, pg) in inside.iter().zip(quintile_assign(&vals)?) {
            cells[g][pg - 1].push(s);
        }
    }
    Ok(cells)
}

/// A portfolio member: formation-month market cap and holding-month return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Holding {
    pub market_cap: Option<f64>,
    pub next_return: Option<f64>,
}

/// Value-weighted excess return in percent. Members lacking a cap or a
/// holding return are dropped and the remaining weights renormalised.
pub fn vw_excess_return(members: &[Holding], risk_free: f64) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for h in members {
        if let (Some(c), Some(r)) = (h.market_cap, h.next_return) {
            num += c * (r - risk_free);
            den += c;
        }
    }
    if den > 0.0 {
        Ok(num / den * 100.0)
    } else {
        Err(Error::InsufficientData {
            what: "portfolio members with cap and next-month return",
            needed: 1,
            available: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioGrid {
    /// Formation month; returns are realised in the following month.
    pub month: YearMonth,
    pub proxy: Proxy,
    /// Percent excess returns, `returns[cgo_group][proxy_group]`.
    pub returns: [[f64; N_GROUPS]; N_GROUPS],
    pub counts: [[usize; N_GROUPS]; N_GROUPS],
    pub members: Cells,
}

impl PortfolioGrid {
    /// P5 - P1 within a CGO group.
    pub fn spread(&self, cgo_group: usize) -> f64 {
        self.returns[cgo_group][N_GROUPS - 1] - self.returns[cgo_group][0]
    }

    pub fn diff_in_diff(&self) -> f64 {
        self.spread(N_GROUPS - 1) - self.spread(0)
    }
}

/// Forms the grid at month index `m`, holding through `m + 1`.
pub fn grid_at(
    panel: &StockPanel,
    m: usize,
    proxy: Proxy,
    cgo: &[Option<f64>],
    proxy_values: &[Option<f64>],
    universe: &UniverseConfig,
) -> Result<PortfolioGrid> {
    let months = panel.months();
    let hold = *months.get(m + 1).ok_or(Error::InsufficientData {
        what: "holding month",
        needed: 1,
        available: 0,
    })?;
    let rf = panel
        .factors()
        .get(hold)
        .ok_or(Error::InsufficientData {
            what: "risk-free rate in holding month",
            needed: 1,
            available: 0,
        })?
        .risk_free;
    let members = dependent_sort(&universe_at(panel, m, universe), cgo, proxy_values)?;
    let mut returns = [[0.0; N_GROUPS]; N_GROUPS];
    let mut counts = [[0; N_GROUPS]; N_GROUPS];
    for g in 0..N_GROUPS {
        for p in 0..N_GROUPS {
            let holdings: Vec<Holding> = members[g][p]
                .iter()
                .map(|&s| Holding {
                    market_cap: panel.stock(s).monthly[m].market_cap,
                    next_return: panel.stock(s).monthly[m + 1].ret,
                })
                .collect();
            returns[g][p] = vw_excess_return(&holdings, rf)?;
            counts[g][p] = holdings.len();
        }
    }
    Ok(PortfolioGrid {
        month: months[m],
        proxy,
        returns,
        counts,
        members,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSeries {
    pub proxy: Proxy,
    pub grids: Vec<PortfolioGrid>,
    /// Formation months that could not be sorted, with the reason.
    pub skipped: Vec<(YearMonth, String)>,
}

/// Grids for every formation month with a following month in the panel.
/// `cgo` and `proxy_values` are indexed `[stock][month]`.
pub fn grid_series(
    panel: &StockPanel,
    proxy: Proxy,
    cgo: &[Vec<Option<f64>>],
    proxy_values: &[Vec<Option<f64>>],
    universe: &UniverseConfig,
) -> GridSeries {
    let n_months = panel.months().len();
    let results = par::map_range(n_months.saturating_sub(1), |m| {
        let c: Vec<Option<f64>> = cgo.iter().map(|row| row[m]).collect();
        let p: Vec<Option<f64>> = proxy_values.iter().map(|row| row[m]).collect();
        grid_at(panel, m, proxy, &c, &p, universe)
    });
    let mut grids = Vec::new();
    let mut skipped = Vec::new();
    for (m, r) in results.into_iter().enumerate() {
        match r {
            Ok(g) => grids.push(g),
            Err(e) => {
                tracing::debug!(month = %panel.months()[m], proxy = %proxy, error = %e, "double sort skipped");
                skipped.push((panel.months()[m], e.to_string()));
            }
        }
    }
    GridSeries { proxy, grids, skipped }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadStats {
    pub mean_return: f64,
    pub se: f64,
    pub t_stat: f64,
    pub ff3_alpha: f64,
    pub alpha_se: f64,
    pub alpha_t_stat: f64,
    pub n_months: usize,
}

/// Time-series mean and three-factor alpha of a percent spread series, each
/// with a Newey-West t statistic. `factors[i]` belongs to `spread[i]`.
/// Factor columns with no variation are dropped from the alpha regression.
pub fn spread_stats(spread: &[f64], factors: &[FactorObservation], lag: LagRule) -> Result<SpreadStats> {
    assert_eq!(spread.len(), factors.len());
    let n = spread.len();
    if n < MIN_SPREAD_MONTHS {
        return Err(Error::InsufficientData {
            what: "spread months",
            needed: MIN_SPREAD_MONTHS,
            available: n,
        });
    }
    let l = lag.resolve(n);
    let mean_return = stats::mean(spread);
    let se = newey_west_se(spread, l)?;

    let candidates: [(&str, Vec<f64>); 3] = [
        ("mkt_excess", factors.iter().map(|f| f.mkt_excess).collect()),
        ("smb", factors.iter().map(|f| f.smb).collect()),
        ("hml", factors.iter().map(|f| f.hml).collect()),
    ];
    let (cols, names): (Vec<Vec<f64>>, Vec<&str>) = candidates
        .into_iter()
        .filter(|(_, c)| c.iter().any(|v| *v != c[0]))
        .map(|(name, c)| (c, name))
        .unzip();
    let x = Matrix::with_intercept(&cols, n);
    let fit = least_squares(&x, spread).map_err(|e| Error::RankDeficient {
        column: names.get(e.column.wrapping_sub(1)).unwrap_or(&"intercept").to_string(),
    })?;
    let alpha_se = ols_hac_covariance(&x, &fit, l)[0].max(0.0).sqrt();
    let ff3_alpha = fit.coefficients[0];
    Ok(SpreadStats {
        mean_return,
        se,
        t_stat: t_stat(mean_return, se),
        ff3_alpha,
        alpha_se,
        alpha_t_stat: t_stat(ff3_alpha, alpha_se),
        n_months: n,
    })
}

/// Column labels of the printed table.
pub const TABLE_COLUMNS: [&str; 4] = ["CGO1", "CGO3", "CGO5", "Diff-in-Diff"];
/// CGO groups shown in the printed table.
pub const SHOWN_GROUPS: [usize; 3] = [0, 2, 4];

#[derive(Debug, Clone, PartialEq)]
pub struct DoubleSortTable {
    pub proxy: Proxy,
    pub n_months: usize,
    pub skipped: Vec<(YearMonth, String)>,
    /// Mean percent excess returns, `[cgo_group][proxy_group]`.
    pub mean_returns: [[f64; N_GROUPS]; N_GROUPS],
    /// P5 - P1 statistics per CGO group.
    pub spreads: [SpreadStats; N_GROUPS],
    pub diff_in_diff: SpreadStats,
    pub nw_lag: usize,
}

pub struct TableRow {
    pub label: &'static str,
    pub values: [Option<f64>; 4],
    /// t statistic rows print in parentheses.
    pub is_t: bool,
}

impl DoubleSortTable {
    /// The seven printed rows: P1, P3, P5, P5 - P1, t, FF3 alpha, t.
    pub fn rows(&self) -> Vec<TableRow> {
        let mut rows = Vec::with_capacity(7);
        for (label, p) in [("P1", 0), ("P3", 2), ("P5", 4)] {
            let mut values = [None; 4];
            for (c, &g) in SHOWN_GROUPS.iter().enumerate() {
                values[c] = Some(self.mean_returns[g][p]);
            }
            rows.push(TableRow {
                label,
                values,
                is_t: false,
            });
        }
        let stat = |f: fn(&SpreadStats) -> f64| -> [Option<f64>; 4] {
            [
                Some(f(&self.spreads[0])),
                Some(f(&self.spreads[2])),
                Some(f(&self.spreads[4])),
                Some(f(&self.diff_in_diff)),
            ]
        };
        rows.push(TableRow {
            label: "P5 - P1",
            values: stat(|s| s.mean_return),
            is_t: false,
        });
        rows.push(TableRow {
            label: "t-stat",
            values: stat(|s| s.t_stat),
            is_t: true,
        });
        rows.push(TableRow {
            label: "FF3-alpha",
            values: stat(|s| s.ff3_alpha),
            is_t: false,
        });
        rows.push(TableRow {
            label: "t-stat",
            values: stat(|s| s.alpha_t_stat),
            is_t: true,
        });
        rows
    }
}

/// Aggregates a grid series into the table. Factors are taken from each
/// grid's holding month.
pub fn build_table(series: &GridSeries, panel: &StockPanel, lag: LagRule) -> Result<DoubleSortTable> {
    let n = series.grids.len();
    if n < MIN_SPREAD_MONTHS {
        return Err(Error::InsufficientData {
            what: "double-sort months",
            needed: MIN_SPREAD_MONTHS,
            available: n,
        });
    }
    let factors: Vec<FactorObservation> = series
        .grids
        .iter()
        .map(|g| {
            panel
                .factors()
                .get(g.month.next())
                .cloned()
                .ok_or(Error::InsufficientData {
                    what: "factors in holding month",
                    needed: 1,
                    available: 0,
                })
        })
        .collect::<Result<_>>()?;
    let mut mean_returns = [[0.0; N_GROUPS]; N_GROUPS];
    for (g, row) in mean_returns.iter_mut().enumerate() {
        for (p, v) in row.iter_mut().enumerate() {
            let xs: Vec<f64> = series.grids.iter().map(|gr| gr.returns[g][p]).collect();
            *v = stats::mean(&xs);
        }
    }
    let spread_of = |g: usize| -> Result<SpreadStats> {
        let xs: Vec<f64> = series.grids.iter().map(|gr| gr.spread(g)).collect();
        spread_stats(&xs, &factors, lag)
    };
    let spreads = [
        spread_of(0)?,
        spread_of(1)?,
        spread_of(2)?,
        spread_of(3)?,
        spread_of(4)?,
    ];
    let did: Vec<f64> = series.grids.iter().map(PortfolioGrid::diff_in_diff).collect();
    Ok(DoubleSortTable {
        proxy: series.proxy,
        n_months: n,
        skipped: series.skipped.clone(),
        mean_returns,
        spreads,
        diff_in_diff: spread_stats(&did, &factors, lag)?,
        nw_lag: lag.resolve(n),
    })
}
