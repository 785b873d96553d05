//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls the library's estimators.

#![allow(dead_code)]

use cgolab::panel::{DailyFactorSeries, FactorSeries, StockPanel, StockSeries};
use cgolab::synth::{generate_panel, DgpConfig};

/// Weekly turnover as used by the reference price: volume over shares,
/// clamped to [0, 1]; missing when either input is missing.
pub fn oracle_turnover(volume: Option<f64>, shares: Option<f64>) -> Option<f64> {
    match (volume, shares) {
        (Some(v), Some(s)) if s > 0.0 => Some((v / s).clamp(0.0, 1.0)),
        _ => None,
    }
}

/// Reference price, weight mass and CGO at week `t` by direct expansion of
/// the weight products. A week without both price and turnover counts as
/// zero turnover in every role. Returns `None` when undefined.
pub fn true_cgo_oracle(
    closes: &[Option<f64>],
    turnovers: &[Option<f64>],
    t: usize,
    lookback: usize,
    min_valid: usize,
    k_floor: f64,
) -> Option<(f64, f64, f64)> {
    if t == 0 {
        return None;
    }
    let week = |n: usize| -> (Option<f64>, f64) {
        if n > t {
            return (None, 0.0);
        }
        let i = t - n;
        match (closes[i], turnovers[i]) {
            (Some(p), Some(v)) => (Some(p), v),
            _ => (None, 0.0),
        }
    };
    let valid = (1..=lookback).filter(|&n| week(n).0.is_some()).count();
    if valid < min_valid {
        return None;
    }
    let mut num = 0.0;
    let mut k = 0.0;
    for n in 1..=lookback {
        let (p, v) = week(n);
        let Some(p) = p else { continue };
        let mut w = v;
        for tau in 1..n {
            w *= 1.0 - week(n - tau).1;
        }
        num += w * p;
        k += w;
    }
    if k < k_floor {
        return None;
    }
    let rp = num / k;
    let prev = closes[t - 1]?;
    Some((rp, k, (prev - rp) / prev))
}

/// Two-pass sample standard deviation.
pub fn two_pass_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Quantile with linear interpolation between order statistics.
pub fn oracle_quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = p * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Portfolio-sort outcome for one formation month.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleGrid {
    pub members: Vec<Vec<Vec<usize>>>,
    pub returns: Vec<Vec<f64>>,
}

/// Group (1-based) of every element by rank counting: an element's rank is
/// the number of elements that are smaller, or equal and earlier.
fn oracle_groups(vals: &[f64]) -> Vec<usize> {
    let n = vals.len();
    (0..n)
        .map(|i| {
            let rank = (0..n)
                .filter(|&j| vals[j] < vals[i] || (vals[j] == vals[i] && j < i))
                .count();
            5 * rank / n + 1
        })
        .collect()
}

/// Exhaustive dependent 5x5 sort at month index `m` with value-weighted
/// percent excess returns over month `m + 1`. `None` when the month cannot
/// be formed.
pub fn oracle_double_sort(
    panel: &StockPanel,
    m: usize,
    cgo: &[Option<f64>],
    proxy: &[Option<f64>],
    min_price: f64,
) -> Option<OracleGrid> {
    let hold = *panel.months().get(m + 1)?;
    let rf = panel.factors().get(hold)?.risk_free;
    let mut members: Vec<usize> = Vec::new();
    for s in 0..panel.n_stocks() {
        let o = &panel.stock(s).monthly[m];
        let eligible = o.close.is_some_and(|c| c >= min_price)
            && o.blacklisted == Some(false)
            && o.tradable == Some(true)
            && o.ret.is_some();
        if eligible && cgo[s].is_some() && proxy[s].is_some() {
            members.push(s);
        }
    }
    if members.len() < 5 {
        return None;
    }
    let cg = oracle_groups(&members.iter().map(|&s| cgo[s].unwrap()).collect::<Vec<_>>());
    let mut cells = vec![vec![Vec::new(); 5]; 5];
    for g in 1..=5 {
        let inside: Vec<usize> = members
            .iter()
            .zip(&cg)
            .filter(|(_, &c)| c == g)
            .map(|(&s, _)| s)
            .collect();
        if inside.len() < 5 {
            return None;
        }
        let pg = oracle_groups(&inside.iter().map(|&s| proxy[s].unwrap()).collect::<Vec<_>>());
        for (s, p) in inside.into_iter().zip(pg) {
            cells[g - 1][p - 1].push(s);
        }
    }
    let mut returns = vec![vec![0.0; 5]; 5];
    for g in 0..5 {
        for p in 0..5 {
            let mut num = 0.0;
            let mut den = 0.0;
            for &s in &cells[g][p] {
                let st = panel.stock(s);
                if let (Some(c), Some(r)) = (st.monthly[m].market_cap, st.monthly[m + 1].ret) {
                    num += c * (r - rf);
                    den += c;
                }
            }
            if den <= 0.0 {
                return None;
            }
            returns[g][p] = 100.0 * num / den;
        }
    }
    Some(OracleGrid {
        members: cells,
        returns,
    })
}

/// Small synthetic panel with the given dimensions.
pub fn synth_panel(n_stocks: usize, n_months: usize, burn_in: usize, seed: u64) -> StockPanel {
    let cfg = DgpConfig {
        n_stocks,
        n_months,
        burn_in_months: burn_in,
        seed,
        ..DgpConfig::default()
    };
    generate_panel(&cfg).expect("synthetic panel").panel
}

/// Editable copy of a panel's parts.
pub struct PanelParts {
    pub stocks: Vec<StockSeries>,
    pub factors: Vec<cgolab::panel::FactorObservation>,
    pub daily_factors: Option<Vec<cgolab::panel::DailyFactor>>,
}

impl PanelParts {
    pub fn of(panel: &StockPanel) -> Self {
        Self {
            stocks: panel.stocks().to_vec(),
            factors: panel.factors().observations().to_vec(),
            daily_factors: panel.daily_factors().map(|d| d.observations().to_vec()),
        }
    }

    pub fn build(self) -> StockPanel {
        StockPanel::new(
            self.stocks,
            FactorSeries::new(self.factors).unwrap(),
            self.daily_factors.map(|d| DailyFactorSeries::new(d).unwrap()),
        )
        .unwrap()
    }
}
