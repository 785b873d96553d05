//! Sample construction: longevity filter, monthly eligibility, gap filling,
//! cross-sectional winsorization and standardization.

use crate::calendar::YearMonth;
use crate::error::{Error, Result};
use crate::panel::{StockPanel, StockSeries};
use crate::par;
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct UniverseConfig {
    pub min_history_years: f64,
    pub min_price: f64,
    pub exclude_blacklisted: bool,
    pub exclude_untradable: bool,
    pub winsor_lower: f64,
    pub winsor_upper: f64,
    /// Longest interior gap, in months, that interpolation or forward fill may bridge.
    pub max_ffill_gap: usize,
    pub normalize_features: bool,
}

impl Default for UniverseConfig {
    fn default() -> Self {
        Self {
            min_history_years: 10.0,
            min_price: 5.0,
            exclude_blacklisted: true,
            exclude_untradable: true,
            winsor_lower: 0.01,
            winsor_upper: 0.99,
            max_ffill_gap: 3,
            normalize_features: false,
        }
    }
}

impl UniverseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.winsor_lower && self.winsor_lower < self.winsor_upper && self.winsor_upper <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "winsor quantiles must satisfy 0 <= lower < upper <= 1, got ({}, {})",
                self.winsor_lower, self.winsor_upper
            )));
        }
        if self.min_history_years <= 5.0 {
            return Err(Error::InvalidConfig(format!(
                "min_history_years must exceed 5, got {}",
                self.min_history_years
            )));
        }
        if !(self.min_price >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "min_price must be >= 0, got {}",
                self.min_price
            )));
        }
        Ok(())
    }

    /// Weekly equivalent of `max_ffill_gap`.
    fn max_gap_weeks(&self) -> usize {
        (self.max_ffill_gap * 52).div_ceil(12)
    }
}

/// Years covered by a stock's monthly returns, counting the first and last
/// month with a return inclusively.
pub fn return_history_years(stock: &StockSeries) -> f64 {
    let first = stock.monthly.iter().position(|o| o.ret.is_some());
    let last = stock.monthly.iter().rposition(|o| o.ret.is_some());
    match (first, last) {
        (Some(a), Some(b)) => (b - a + 1) as f64 / 12.0,
        _ => 0.0,
    }
}

/// Drops stocks with less than `min_history_years` of return history (inclusive threshold).
pub fn apply_longevity_filter(panel: &StockPanel, config: &UniverseConfig) -> Result<StockPanel> {
    let out = panel.retain(|s| return_history_years(s) >= config.min_history_years);
    tracing::info!(
        kept = out.n_stocks(),
        dropped = panel.n_stocks() - out.n_stocks(),
        "longevity filter"
    );
    if out.n_stocks() == 0 {
        return Err(Error::EmptyPanel("longevity filter"));
    }
    Ok(out)
}

/// Whether stock `s` is investable at the end of month index `m`.
pub fn is_eligible(stock: &StockSeries, m: usize, config: &UniverseConfig) -> bool {
    let Some(o) = stock.monthly.get(m) else {
        return false;
    };
    let price_ok = o.close.is_some_and(|p| p >= config.min_price);
    let black_ok = !config.exclude_blacklisted || o.blacklisted == Some(false);
    let trade_ok = !config.exclude_untradable || o.tradable == Some(true);
    price_ok && black_ok && trade_ok && o.ret.is_some()
}

/// Stocks eligible at the end of `month` for formation at that date and for
/// the following month's regression cross-section. Sorted stock indices.
pub fn monthly_universe(panel: &StockPanel, month: YearMonth, config: &UniverseConfig) -> Vec<usize> {
    match panel.calendar().month_index(month) {
        Some(m) => universe_at(panel, m, config),
        None => Vec::new(),
    }
}

pub fn universe_at(panel: &StockPanel, m: usize, config: &UniverseConfig) -> Vec<usize> {
    (0..panel.n_stocks())
        .filter(|&i| is_eligible(panel.stock(i), m, config))
        .collect()
}

/// Linear interpolation across interior gaps of at most `max_gap` entries.
pub fn interpolate_gaps(xs: &mut [Option<f64>], max_gap: usize) {
    let mut prev: Option<usize> = None;
    for i in 0..xs.len() {
        if let Some(v) = xs[i] {
            if let Some(p) = prev {
                let gap = i - p - 1;
                if gap > 0 && gap <= max_gap {
                    let a = xs[p].expect("anchor present");
                    let span = (i - p) as f64;
                    for (k, slot) in xs.iter_mut().enumerate().take(i).skip(p + 1) {
                        *slot = Some(a + (v - a) * (k - p) as f64 / span);
                    }
                }
            }
            prev = Some(i);
        }
    }
}

/// Forward fill across interior gaps of at most `max_gap` entries.
pub fn forward_fill_gaps<T: Copy>(xs: &mut [Option<T>], max_gap: usize) {
    let mut prev: Option<usize> = None;
    for i in 0..xs.len() {
        if xs[i].is_some() {
            if let Some(p) = prev {
                let gap = i - p - 1;
                if gap > 0 && gap <= max_gap {
                    let fill = xs[p];
                    for slot in &mut xs[p + 1..i] {
                        *slot = fill;
                    }
                }
            }
            prev = Some(i);
        }
    }
}

fn fill_field<S, T: Copy>(
    items: &mut [S],
    get: impl Fn(&S) -> Option<T>,
    set: impl Fn(&mut S, Option<T>),
    fill: impl Fn(&mut [Option<T>]),
) {
    let mut col: Vec<Option<T>> = items.iter().map(&get).collect();
    fill(&mut col);
    for (s, v) in items.iter_mut().zip(col) {
        set(s, v);
    }
}

/// Interpolates continuous series and forward-fills flags across short
/// interior gaps. Returns are never filled.
pub fn fill_missing(panel: &StockPanel, config: &UniverseConfig) -> StockPanel {
    let months = config.max_ffill_gap;
    let weeks = config.max_gap_weeks();
    let stocks = par::map(panel.stocks(), |s| {
        let mut s = s.clone();
        let interp_w = |c: &mut [Option<f64>]| interpolate_gaps(c, weeks);
        let interp_m = |c: &mut [Option<f64>]| interpolate_gaps(c, months);
        fill_field(&mut s.weekly, |b| b.close, |b, v| b.close = v, interp_w);
        fill_field(&mut s.weekly, |b| b.volume, |b, v| b.volume = v, interp_w);
        fill_field(
            &mut s.weekly,
            |b| b.shares_outstanding,
            |b, v| b.shares_outstanding = v,
            interp_w,
        );
        fill_field(&mut s.monthly, |o| o.close, |o, v| o.close = v, interp_m);
        fill_field(&mut s.monthly, |o| o.market_cap, |o, v| o.market_cap = v, interp_m);
        fill_field(&mut s.monthly, |o| o.volume, |o, v| o.volume = v, interp_m);
        fill_field(&mut s.monthly, |o| o.cash_flow, |o, v| o.cash_flow = v, interp_m);
        let ffill = |c: &mut [Option<bool>]| forward_fill_gaps(c, months);
        fill_field(&mut s.monthly, |o| o.blacklisted, |o, v| o.blacklisted = v, ffill);
        fill_field(&mut s.monthly, |o| o.tradable, |o, v| o.tradable = v, ffill);
        s
    });
    StockPanel::from_parts(
        stocks,
        panel.calendar().clone(),
        panel.factors().clone(),
        panel.daily_factors().cloned(),
    )
}

/// Lower and upper clip bounds: empirical quantiles of the non-missing values.
pub fn winsor_bounds(values: &[Option<f64>], lower: f64, upper: f64) -> Result<(f64, f64)> {
    let sorted = stats::sorted_copy(values.iter().flatten().copied());
    if sorted.len() < 2 {
        return Err(Error::InsufficientData {
            what: "winsorization",
            needed: 2,
            available: sorted.len(),
        });
    }
    Ok((
        stats::quantile_sorted(&sorted, lower),
        stats::quantile_sorted(&sorted, upper),
    ))
}

pub fn clip(values: &[Option<f64>], lo: f64, hi: f64) -> Vec<Option<f64>> {
    values.iter().map(|v| v.map(|x| x.clamp(lo, hi))).collect()
}

/// Clips a cross-section at its `lower` and `upper` empirical quantiles.
/// Missing entries pass through.
pub fn winsorize_cross_section(values: &[Option<f64>], lower: f64, upper: f64) -> Result<Vec<Option<f64>>> {
    let (lo, hi) = winsor_bounds(values, lower, upper)?;
    Ok(clip(values, lo, hi))
}

/// Standardizes to mean 0 and sample standard deviation 1 over non-missing entries.
pub fn zscore_cross_section(values: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.len() < 2 {
        return Err(Error::InsufficientData {
            what: "z-score",
            needed: 2,
            available: present.len(),
        });
    }
    let m = stats::mean(&present);
    let sd = stats::sample_sd(&present);
    if !(sd > 0.0) {
        return Err(Error::Degenerate("zero cross-sectional dispersion".into()));
    }
    Ok(values.iter().map(|v| v.map(|x| (x - m) / sd)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{FactorSeries, MonthlyObservation, StockMeta};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn month_stock(id: &str, n_months: usize) -> StockSeries {
        let base: YearMonth = "1990-01".parse().unwrap();
        StockSeries {
            meta: StockMeta {
                stock_id: id.into(),
                listing_date: NaiveDate::from_ymd_opt(1980, 1, 1).unwrap(),
            },
            weekly: vec![],
            monthly: (0..n_months)
                .map(|k| MonthlyObservation {
                    ret: Some(0.0),
                    close: Some(10.0),
                    blacklisted: Some(false),
                    tradable: Some(true),
                    ..MonthlyObservation::empty(base.add_months(k as i64))
                })
                .collect(),
            daily: vec![],
        }
    }

    fn panel_of(stocks: Vec<StockSeries>) -> StockPanel {
        StockPanel::new(stocks, FactorSeries::default(), None).unwrap()
    }

    #[test]
    fn longevity_threshold_is_inclusive() {
        let cfg = UniverseConfig::default();
        let p = panel_of(vec![month_stock("short", 114), month_stock("exact", 120)]);
        let kept = apply_longevity_filter(&p, &cfg).unwrap();
        assert_eq!(kept.n_stocks(), 1);
        assert_eq!(kept.stock(0).id(), "exact");
    }

    #[test]
    fn longevity_keeps_two_of_three() {
        let p = panel_of(vec![month_stock("a", 96), month_stock("b", 144), month_stock("c", 240)]);
        let kept = apply_longevity_filter(&p, &UniverseConfig::default()).unwrap();
        assert_eq!(kept.n_stocks(), 2);
    }

    #[test]
    fn longevity_can_empty_the_panel() {
        let p = panel_of(vec![month_stock("a", 12)]);
        assert!(matches!(
            apply_longevity_filter(&p, &UniverseConfig::default()),
            Err(Error::EmptyPanel(_))
        ));
    }

    #[test]
    fn price_floor_is_inclusive() {
        let cfg = UniverseConfig::default();
        let mut low = month_stock("low", 1);
        low.monthly[0].close = Some(4.99);
        let mut at = month_stock("at", 1);
        at.monthly[0].close = Some(5.0);
        let p = panel_of(vec![low, at]);
        let m: YearMonth = "1990-01".parse().unwrap();
        let ids: Vec<&str> = monthly_universe(&p, m, &cfg).iter().map(|&i| p.stock(i).id()).collect();
        assert_eq!(ids, vec!["at"]);
    }

    #[test]
    fn universe_set_arithmetic() {
        let mut stocks: Vec<StockSeries> = (0..10).map(|i| month_stock(&format!("s{i}"), 1)).collect();
        for s in &mut stocks[0..3] {
            s.monthly[0].blacklisted = Some(true);
        }
        for s in &mut stocks[3..5] {
            s.monthly[0].close = Some(3.0);
        }
        let p = panel_of(stocks);
        let m: YearMonth = "1990-01".parse().unwrap();
        assert_eq!(monthly_universe(&p, m, &UniverseConfig::default()).len(), 5);
    }

    #[test]
    fn missing_return_or_flag_is_ineligible() {
        let mut a = month_stock("a", 1);
        a.monthly[0].ret = None;
        let mut b = month_stock("b", 1);
        b.monthly[0].tradable = None;
        let p = panel_of(vec![a, b]);
        assert!(universe_at(&p, 0, &UniverseConfig::default()).is_empty());
    }

    #[test]
    fn interpolation_examples() {
        let mut xs = vec![Some(10.0), None, Some(14.0)];
        interpolate_gaps(&mut xs, 3);
        assert_eq!(xs, vec![Some(10.0), Some(12.0), Some(14.0)]);

        let mut lead = vec![None, Some(10.0), Some(11.0)];
        interpolate_gaps(&mut lead, 3);
        assert_eq!(lead[0], None);

        let mut long = vec![Some(1.0), None, None, None, None, Some(6.0)];
        interpolate_gaps(&mut long, 3);
        assert!(long[1..5].iter().all(Option::is_none));
    }

    #[test]
    fn flags_forward_fill() {
        let mut flags = vec![Some(false), None, None, Some(true)];
        forward_fill_gaps(&mut flags, 3);
        assert_eq!(flags, vec![Some(false), Some(false), Some(false), Some(true)]);
        let mut trailing = vec![Some(true), None];
        forward_fill_gaps(&mut trailing, 3);
        assert_eq!(trailing[1], None);
    }

    #[test]
    fn fill_missing_leaves_returns_alone() {
        let mut s = month_stock("a", 5);
        s.monthly[2].ret = None;
        s.monthly[2].close = None;
        s.monthly[2].blacklisted = None;
        let filled = fill_missing(&panel_of(vec![s]), &UniverseConfig::default());
        let o = &filled.stock(0).monthly[2];
        assert_eq!(o.ret, None);
        assert_eq!(o.close, Some(10.0));
        assert_eq!(o.blacklisted, Some(false));
    }

    #[test]
    fn winsorize_one_to_hundred() {
        let xs: Vec<Option<f64>> = (1..=100).map(|i| Some(i as f64)).collect();
        let w = winsorize_cross_section(&xs, 0.01, 0.99).unwrap();
        // Brute-force oracle: position p * (n - 1) on the sorted sample.
        let lo = 1.0 + 0.99 * (2.0 - 1.0);
        let hi = 99.0 + 0.01 * (100.0 - 99.0);
        assert!((w[0].unwrap() - lo).abs() < 1e-12);
        assert!((w[99].unwrap() - hi).abs() < 1e-12);
        assert_eq!(&w[1..99], &xs[1..99]);
    }

    #[test]
    fn winsorize_degenerate_cases() {
        let same = vec![Some(3.0); 7];
        assert_eq!(winsorize_cross_section(&same, 0.01, 0.99).unwrap(), same);
        let xs = vec![Some(5.0), None, Some(-2.0), Some(9.0)];
        assert_eq!(winsorize_cross_section(&xs, 0.0, 1.0).unwrap(), xs);
        assert!(winsorize_cross_section(&[Some(1.0), None], 0.01, 0.99).is_err());
    }

    #[test]
    fn zscore_uses_sample_sd() {
        let z = zscore_cross_section(&[Some(1.0), Some(2.0), Some(3.0), None]).unwrap();
        assert_eq!(z, vec![Some(-1.0), Some(0.0), Some(1.0), None]);
        assert!(matches!(
            zscore_cross_section(&[Some(2.0), Some(2.0)]),
            Err(Error::Degenerate(_))
        ));
    }

    fn cross_section() -> impl Strategy<Value = Vec<Option<f64>>> {
        prop::collection::vec(prop::option::weighted(0.9, -1e3f64..1e3), 3..60)
            .prop_filter("two present values", |v| v.iter().flatten().count() >= 2)
    }

    proptest! {
        #[test]
        fn clipping_with_fixed_bounds_is_idempotent_and_monotone(xs in cross_section()) {
            let (lo, hi) = winsor_bounds(&xs, 0.05, 0.95).unwrap();
            let once = clip(&xs, lo, hi);
            prop_assert_eq!(&clip(&once, lo, hi), &once);
            let pairs: Vec<(f64, f64)> = xs.iter().zip(&once).filter_map(|(a, b)| Some(((*a)?, (*b)?))).collect();
            for (x0, y0) in &pairs {
                for (x1, y1) in &pairs {
                    if x0 < x1 {
                        prop_assert!(y0 <= y1);
                    }
                }
            }
        }

        #[test]
        fn rewinsorizing_never_leaves_first_bounds(xs in cross_section()) {
            let (lo, hi) = winsor_bounds(&xs, 0.05, 0.95).unwrap();
            let once = winsorize_cross_section(&xs, 0.05, 0.95).unwrap();
            let twice = winsorize_cross_section(&once, 0.05, 0.95).unwrap();
            for v in twice.iter().flatten() {
                prop_assert!(*v >= lo && *v <= hi);
            }
        }

        #[test]
        fn fill_missing_keeps_present_values(xs in prop::collection::vec(prop::option::of(0.1f64..100.0), 1..40)) {
            let mut filled = xs.clone();
            interpolate_gaps(&mut filled, 3);
            for (a, b) in xs.iter().zip(&filled) {
                if a.is_some() {
                    prop_assert_eq!(a, b);
                }
            }
        }

        #[test]
        fn zscore_has_zero_mean_unit_sd(xs in prop::collection::vec(-1e3f64..1e3, 3..50)) {
            let v: Vec<Option<f64>> = xs.iter().copied().map(Some).collect();
            prop_assume!(stats::sample_sd(&xs) > 1e-6);
            let z: Vec<f64> = zscore_cross_section(&v).unwrap().into_iter().flatten().collect();
            prop_assert!(stats::mean(&z).abs() < 1e-10);
            prop_assert!((stats::sample_sd(&z) - 1.0).abs() < 1e-10);
            let again: Vec<f64> = zscore_cross_section(&z.iter().copied().map(Some).collect::<Vec<_>>())
                .unwrap().into_iter().flatten().collect();
            for (a, b) in z.iter().zip(&again) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        // Upper quantile 0.99 sits strictly above the runner-up for n <= 100.
        #[test]
        fn argmax_survives_standardize_winsorize_standardize(xs in prop::collection::vec(-1e3f64..1e3, 3..=100)) {
            let max = xs.iter().copied().fold(f64::MIN, f64::max);
            prop_assume!(xs.iter().filter(|x| **x == max).count() == 1);
            prop_assume!(stats::sample_sd(&xs) > 1e-6);
            let argmax = |v: &[Option<f64>]| {
                v.iter().enumerate().max_by(|a, b| a.1.unwrap().total_cmp(&b.1.unwrap())).unwrap().0
            };
            let v: Vec<Option<f64>> = xs.iter().copied().map(Some).collect();
            let z = zscore_cross_section(&v).unwrap();
            let w = winsorize_cross_section(&z, 0.01, 0.99).unwrap();
            prop_assume!(stats::sample_sd(&w.iter().flatten().copied().collect::<Vec<_>>()) > 1e-9);
            let z2 = zscore_cross_section(&w).unwrap();
            prop_assert_eq!(argmax(&v), argmax(&z2));
        }
    }
}
