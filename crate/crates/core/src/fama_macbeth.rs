//! Monthly cross-sectional regressions of next-month returns on CGO, a risk
//! proxy, their interactions and controls, aggregated Fama-MacBeth style.

use std::fmt;

use crate::calendar::YearMonth;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::newey_west::{t_stat, LagRule};
use crate::panel::{StockPanel, StockSeries};
use crate::par;
use crate::preprocess::{universe_at, winsorize_cross_section, zscore_cross_section, UniverseConfig};
use crate::proxies::Proxy;
use crate::stats;

pub use crate::newey_west::newey_west_se;

/// Regressors in printed row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Column {
    Cgo,
    Proxy,
    ProxyCgo,
    ProxyMom12,
    Mom1,
    Mom12,
    Turnover,
}

impl Column {
    pub const ALL: [Column; 7] = [
        Column::Cgo,
        Column::Proxy,
        Column::ProxyCgo,
        Column::ProxyMom12,
        Column::Mom1,
        Column::Mom12,
        Column::Turnover,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Column::Cgo => "CGO",
            Column::Proxy => "PROXY",
            Column::ProxyCgo => "PROXY x CGO",
            Column::ProxyMom12 => "PROXY x MOM(-12,-1)",
            Column::Mom1 => "MOM(-1,0)",
            Column::Mom12 => "MOM(-12,-1)",
            Column::Turnover => "TURNOVER",
        }
    }

    /// Short identifier for CSV output.
    pub fn key(self) -> &'static str {
        match self {
            Column::Cgo => "cgo",
            Column::Proxy => "proxy",
            Column::ProxyCgo => "proxy_x_cgo",
            Column::ProxyMom12 => "proxy_x_mom12",
            Column::Mom1 => "mom1",
            Column::Mom12 => "mom12",
            Column::Turnover => "turnover",
        }
    }

    fn needs(self) -> &'static [Base] {
        match self {
            Column::Cgo => &[Base::Cgo],
            Column::Proxy => &[Base::Proxy],
            Column::ProxyCgo => &[Base::Proxy, Base::Cgo],
            Column::ProxyMom12 => &[Base::Proxy, Base::Mom12],
            Column::Mom1 => &[Base::Mom1],
            Column::Mom12 => &[Base::Mom12],
            Column::Turnover => &[Base::Turnover],
        }
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Base {
    Cgo,
    Proxy,
    Mom1,
    Mom12,
    Turnover,
}

impl Base {
    const ALL: [Base; 5] = [Base::Cgo, Base::Proxy, Base::Mom1, Base::Mom12, Base::Turnover];

    fn of(self, c: &Characteristics) -> Option<f64> {
        match self {
            Base::Cgo => c.cgo,
            Base::Proxy => c.proxy,
            Base::Mom1 => c.mom_1_0,
            Base::Mom12 => c.mom_12_1,
            Base::Turnover => c.turnover,
        }
    }
}

pub const N_SPECS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct FmSpec {
    pub proxy: Proxy,
    pub columns: Vec<Column>,
    pub nw_lag: LagRule,
    pub winsorize: bool,
    pub winsor_lower: f64,
    pub winsor_upper: f64,
    /// z-score constituents after winsorizing, before forming interactions.
    pub normalize: bool,
    pub min_months: usize,
}

impl FmSpec {
    /// Nested specification `n` in 1..=4: controls, then PROXY, PROXY x CGO,
    /// PROXY x MOM(-12,-1).
    pub fn nested(n: usize, proxy: Proxy) -> Self {
        assert!((1..=N_SPECS).contains(&n), "specification must be 1..=4");
        let mut columns = vec![Column::Cgo, Column::Mom1, Column::Mom12, Column::Turnover];
        let extra = [Column::Proxy, Column::ProxyCgo, Column::ProxyMom12];
        columns.extend_from_slice(&extra[..n - 1]);
        columns.sort();
        Self {
            proxy,
            columns,
            nw_lag: LagRule::default(),
            winsorize: true,
            winsor_lower: 0.01,
            winsor_upper: 0.99,
            normalize: false,
            min_months: 24,
        }
    }

    pub fn with_universe(mut self, u: &UniverseConfig) -> Self {
        self.winsor_lower = u.winsor_lower;
        self.winsor_upper = u.winsor_upper;
        self.normalize = u.normalize_features;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let has = |c| self.columns.contains(&c);
        for (inter, parts) in [
            (Column::ProxyCgo, [Column::Proxy, Column::Cgo]),
            (Column::ProxyMom12, [Column::Proxy, Column::Mom12]),
        ] {
            if has(inter) && !parts.iter().all(|p| has(*p)) {
                return Err(Error::InvalidConfig(format!(
                    "interaction {inter} requires {} and {}",
                    parts[0], parts[1]
                )));
            }
        }
        if self.columns.is_empty() {
            return Err(Error::InvalidConfig("specification has no regressors".into()));
        }
        Ok(())
    }

    fn bases(&self) -> Vec<Base> {
        Base::ALL
            .into_iter()
            .filter(|b| self.columns.iter().any(|c| c.needs().contains(b)))
            .collect()
    }

    /// Fewest complete rows a month needs to be estimated.
    pub fn min_rows(&self) -> usize {
        self.columns.len() + 1 + 10
    }
}

/// Month-t characteristics of one stock.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Characteristics {
    pub cgo: Option<f64>,
    pub proxy: Option<f64>,
    pub mom_1_0: Option<f64>,
    pub mom_12_1: Option<f64>,
    pub turnover: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicsRow {
    pub stock: usize,
    pub month: YearMonth,
    pub next_return: Option<f64>,
    pub chars: Characteristics,
}

/// Compounded return over months `m-11 ..= m-1`.
pub fn mom_12_1(stock: &StockSeries, m: usize) -> Option<f64> {
    if m < 12 {
        return None;
    }
    let mut gross = 1.0;
    for k in m - 11..m {
        gross *= 1.0 + stock.monthly[k].ret?;
    }
    Some(gross - 1.0)
}

/// Month volume over the last reported shares outstanding inside the month.
pub fn monthly_turnover(panel: &StockPanel, stock: &StockSeries, m: usize) -> Option<f64> {
    let volume = stock.monthly[m].volume?;
    let shares = panel
        .calendar()
        .weeks_in_month(m)
        .rev()
        .find_map(|w| stock.weekly[w].shares_outstanding)?;
    (shares > 0.0).then(|| volume / shares)
}

/// Characteristics of stock `s` at month `m`, given precomputed CGO and proxy.
pub fn characteristics_at(
    panel: &StockPanel,
    s: usize,
    m: usize,
    cgo: Option<f64>,
    proxy: Option<f64>,
) -> Characteristics {
    let stock = panel.stock(s);
    Characteristics {
        cgo,
        proxy,
        mom_1_0: stock.monthly[m].ret,
        mom_12_1: mom_12_1(stock, m),
        turnover: monthly_turnover(panel, stock, m),
    }
}

/// Regressor columns for one cross-section, in `spec.columns` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressors {
    pub stocks: Vec<usize>,
    /// Position of each kept row in the input slice.
    pub rows: Vec<usize>,
    pub columns: Vec<Column>,
    pub values: Vec<Vec<f64>>,
}

/// Keeps rows with every constituent the spec needs, winsorizes constituents,
/// optionally standardizes them, then forms interactions. `rows` pairs each
/// stock with its characteristics.
pub fn regressors(rows: &[(usize, Characteristics)], spec: &FmSpec) -> Result<Regressors> {
    spec.validate()?;
    let bases = spec.bases();
    let kept: Vec<usize> = (0..rows.len())
        .filter(|&i| bases.iter().all(|b| b.of(&rows[i].1).is_some_and(f64::is_finite)))
        .collect();
    let complete: Vec<&(usize, Characteristics)> = kept.iter().map(|&i| &rows[i]).collect();
    if complete.len() < spec.min_rows() {
        return Err(Error::InsufficientData {
            what: "complete cross-section rows",
            needed: spec.min_rows(),
            available: complete.len(),
        });
    }
    let mut base_cols: Vec<(Base, Vec<f64>)> = Vec::with_capacity(bases.len());
    for b in bases {
        let mut col: Vec<Option<f64>> = complete.iter().map(|(_, c)| b.of(c)).collect();
        if spec.winsorize {
            col = winsorize_cross_section(&col, spec.winsor_lower, spec.winsor_upper)?;
        }
        if spec.normalize {
            col = zscore_cross_section(&col)?;
        }
        base_cols.push((b, col.into_iter().flatten().collect()));
    }
    let get = |b: Base| -> &[f64] { &base_cols.iter().find(|(x, _)| *x == b).expect("constituent").1 };
    let product = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>();
    let values = spec
        .columns
        .iter()
        .map(|c| match c {
            Column::Cgo => get(Base::Cgo).to_vec(),
            Column::Proxy => get(Base::Proxy).to_vec(),
            Column::ProxyCgo => product(get(Base::Proxy), get(Base::Cgo)),
            Column::ProxyMom12 => product(get(Base::Proxy), get(Base::Mom12)),
            Column::Mom1 => get(Base::Mom1).to_vec(),
            Column::Mom12 => get(Base::Mom12).to_vec(),
            Column::Turnover => get(Base::Turnover).to_vec(),
        })
        .collect();
    Ok(Regressors {
        stocks: complete.iter().map(|(s, _)| *s).collect(),
        rows: kept,
        columns: spec.columns.clone(),
        values,
    })
}

/// A month's regressors together with next-month returns.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub month: YearMonth,
    pub regressors: Regressors,
    pub returns: Vec<f64>,
}

/// Design for month `t`: rows lacking a next-month return are excluded before
/// winsorizing.
pub fn build_design(rows: &[CharacteristicsRow], month: YearMonth, spec: &FmSpec) -> Result<Design> {
    let usable: Vec<(&CharacteristicsRow, f64)> = rows
        .iter()
        .filter(|r| r.month == month)
        .filter_map(|r| r.next_return.map(|y| (r, y)))
        .collect();
    let pairs: Vec<(usize, Characteristics)> = usable.iter().map(|(r, _)| (r.stock, r.chars)).collect();
    let regressors = regressors(&pairs, spec)?;
    let returns = regressors.rows.iter().map(|&i| usable[i].1).collect();
    Ok(Design {
        month,
        regressors,
        returns,
    })
}

/// One month's cross-sectional OLS.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthFit {
    pub month: YearMonth,
    pub intercept: f64,
    /// Slopes in `spec.columns` order, fractions.
    pub slopes: Vec<f64>,
    pub n_obs: usize,
}

pub fn cross_section_ols(design: &Design) -> Result<MonthFit> {
    let reg = &design.regressors;
    let n = design.returns.len();
    let x = Matrix::with_intercept(&reg.values, n);
    let fit = least_squares(&x, &design.returns).map_err(|e| Error::RankDeficient {
        column: match e.column {
            0 => "intercept".to_string(),
            j => reg
                .columns
                .get(j - 1)
                .map_or_else(|| format!("column {j}"), |c| c.label().to_string()),
        },
    })?;
    Ok(MonthFit {
        month: design.month,
        intercept: fit.coefficients[0],
        slopes: fit.coefficients[1..].to_vec(),
        n_obs: n,
    })
}

/// Aggregate of one coefficient, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficient {
    pub column: Column,
    pub mean: f64,
    /// `None` when fewer than two months are available.
    pub se: Option<f64>,
    pub t_stat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmResult {
    pub spec: FmSpec,
    pub coefficients: Vec<Coefficient>,
    pub intercept: f64,
    pub months_used: usize,
    pub nw_lag: usize,
    pub monthly: Vec<MonthFit>,
    pub skipped: Vec<(YearMonth, String)>,
}

impl FmResult {
    pub fn get(&self, column: Column) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.column == column)
    }
}

/// Time-series means of monthly slopes with Newey-West standard errors.
pub fn fm_estimate(monthly: &[MonthFit], spec: &FmSpec) -> Result<FmResult> {
    let t = monthly.len();
    if t < spec.min_months.max(1) {
        return Err(Error::InsufficientData {
            what: "Fama-MacBeth months",
            needed: spec.min_months.max(1),
            available: t,
        });
    }
    let lag = spec.nw_lag.resolve(t);
    let coefficients = spec
        .columns
        .iter()
        .enumerate()
        .map(|(j, &column)| {
            let series: Vec<f64> = monthly.iter().map(|f| f.slopes[j] * 100.0).collect();
            let mean = stats::mean(&series);
            let se = if t >= 2 {
                Some(newey_west_se(&series, lag)?)
            } else {
                None
            };
            Ok(Coefficient {
                column,
                mean,
                se,
                t_stat: se.map(|s| t_stat(mean, s)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let intercepts: Vec<f64> = monthly.iter().map(|f| f.intercept * 100.0).collect();
    Ok(FmResult {
        spec: spec.clone(),
        coefficients,
        intercept: stats::mean(&intercepts),
        months_used: t,
        nw_lag: lag,
        monthly: monthly.to_vec(),
        skipped: Vec::new(),
    })
}

/// Proxy-independent regression inputs for one formation month.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthRows {
    pub month_index: usize,
    pub month: YearMonth,
    pub rows: Vec<CharacteristicsRow>,
}

/// Inputs for every formation month with a following month, restricted to
/// the eligible universe. The proxy field is left empty.
pub fn base_rows(panel: &StockPanel, cgo: &[Vec<Option<f64>>], universe: &UniverseConfig) -> Vec<MonthRows> {
    let months = panel.months();
    par::map_range(months.len().saturating_sub(1), |m| MonthRows {
        month_index: m,
        month: months[m],
        rows: universe_at(panel, m, universe)
            .into_iter()
            .map(|s| CharacteristicsRow {
                stock: s,
                month: months[m],
                next_return: panel.stock(s).monthly[m + 1].ret,
                chars: characteristics_at(panel, s, m, cgo[s][m], None),
            })
            .collect(),
    })
}

/// Runs one specification across months. `proxy_values` is `[stock][month]`.
pub fn run_spec(base: &[MonthRows], proxy_values: &[Vec<Option<f64>>], spec: &FmSpec) -> Result<FmResult> {
    let fits = par::map(base, |mr| {
        let rows: Vec<CharacteristicsRow> = mr
            .rows
            .iter()
            .map(|r| {
                let mut r = *r;
                r.chars.proxy = proxy_values[r.stock][mr.month_index];
                r
            })
            .collect();
        build_design(&rows, mr.month, spec).and_then(|d| cross_section_ols(&d))
    });
    let mut monthly = Vec::new();
    let mut skipped = Vec::new();
    for (mr, r) in base.iter().zip(fits) {
        match r {
            Ok(f) => monthly.push(f),
            Err(e) => {
                tracing::debug!(month = %mr.month, proxy = %spec.proxy, error = %e, "cross-section skipped");
                skipped.push((mr.month, e.to_string()));
            }
        }
    }
    let mut res = fm_estimate(&monthly, spec)?;
    res.skipped = skipped;
    Ok(res)
}

/// The four nested specifications for one proxy.
#[derive(Debug, Clone, PartialEq)]
pub struct FmTable {
    pub proxy: Proxy,
    pub results: Vec<FmResult>,
}

impl FmTable {
    /// Mean (percent) and t statistic per printed row and specification.
    pub fn cell(&self, column: Column, spec: usize) -> Option<(f64, Option<f64>)> {
        self.results[spec].get(column).map(|c| (c.mean, c.t_stat))
    }
}

pub fn run_table(
    base: &[MonthRows],
    proxy: Proxy,
    proxy_values: &[Vec<Option<f64>>],
    template: impl Fn(usize, Proxy) -> FmSpec,
) -> Result<FmTable> {
    let results = (1..=N_SPECS)
        .map(|n| run_spec(base, proxy_values, &template(n, proxy)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FmTable { proxy, results })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn month() -> YearMonth {
        "2001-06".parse().unwrap()
    }

    #[test]
    fn nested_specs_have_expected_columns() {
        let p = Proxy::Beta;
        assert_eq!(
            FmSpec::nested(1, p).columns,
            vec![Column::Cgo, Column::Mom1, Column::Mom12, Column::Turnover]
        );
        assert!(!FmSpec::nested(1, p).columns.contains(&Column::Proxy));
        assert_eq!(FmSpec::nested(4, p).columns, Column::ALL.to_vec());
        let mut bad = FmSpec::nested(3, p);
        bad.columns.retain(|c| *c != Column::Proxy);
        assert!(bad.validate().is_err());
    }

    fn random_design(rng: &mut ChaCha8Rng, n: usize, noise: f64, betas: &[f64]) -> Design {
        let spec = FmSpec {
            winsorize: false,
            ..FmSpec::nested(4, Proxy::Beta)
        };
        let rows: Vec<(usize, Characteristics)> = (0..n)
            .map(|s| {
                (
                    s,
                    Characteristics {
                        cgo: Some(rng.random_range(-0.5..0.5)),
                        proxy: Some(rng.random_range(0.0..2.0)),
                        mom_1_0: Some(rng.random_range(-0.2..0.2)),
                        mom_12_1: Some(rng.random_range(-0.5..0.8)),
                        turnover: Some(rng.random_range(0.0..0.6)),
                    },
                )
            })
            .collect();
        let reg = regressors(&rows, &spec).unwrap();
        let returns = (0..reg.stocks.len())
            .map(|i| {
                0.01 + betas.iter().zip(&reg.values).map(|(b, c)| b * c[i]).sum::<f64>()
                    + noise * rng.random_range(-1.0..1.0)
            })
            .collect();
        Design {
            month: month(),
            regressors: reg,
            returns,
        }
    }

    #[test]
    fn noiseless_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let betas = [0.02, -0.01, -0.1, 0.03, 0.005, -0.02, -0.015];
        let d = random_design(&mut rng, 300, 0.0, &betas);
        let fit = cross_section_ols(&d).unwrap();
        assert!((fit.intercept - 0.01).abs() < 1e-10);
        for (a, b) in fit.slopes.iter().zip(betas) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn single_regressor_is_cov_over_var() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v + rng.random_range(-0.5..0.5)).collect();
        let d = Design {
            month: month(),
            regressors: Regressors {
                stocks: (0..50).collect(),
                rows: (0..50).collect(),
                columns: vec![Column::Cgo],
                values: vec![x.clone()],
            },
            returns: y.clone(),
        };
        let (mx, my) = (stats::mean(&x), stats::mean(&y));
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let var: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        assert!((cross_section_ols(&d).unwrap().slopes[0] - cov / var).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_is_named() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let d = Design {
            month: month(),
            regressors: Regressors {
                stocks: (0..30).collect(),
                rows: (0..30).collect(),
                columns: vec![Column::Cgo, Column::Mom1],
                values: vec![x.clone(), x],
            },
            returns: vec![0.0; 30],
        };
        match cross_section_ols(&d) {
            Err(Error::RankDeficient { column }) => assert_eq!(column, "MOM(-1,0)"),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn one_month_estimate_equals_that_month() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = random_design(&mut rng, 200, 0.01, &[0.01; 7]);
        let fit = cross_section_ols(&d).unwrap();
        let spec = FmSpec {
            min_months: 1,
            ..FmSpec::nested(4, Proxy::Beta)
        };
        let res = fm_estimate(std::slice::from_ref(&fit), &spec).unwrap();
        for (c, s) in res.coefficients.iter().zip(&fit.slopes) {
            assert_eq!(c.mean, s * 100.0);
            assert!(c.se.is_none() && c.t_stat.is_none());
        }
        assert!(fm_estimate(&[fit], &FmSpec::nested(4, Proxy::Beta)).is_err());
    }

    #[test]
    fn constant_series_caps_t() {
        let spec = FmSpec::nested(1, Proxy::Beta);
        let fits: Vec<MonthFit> = (0..30)
            .map(|i| MonthFit {
                month: month().add_months(i),
                intercept: 0.0,
                slopes: vec![0.01, 0.0, -0.02, 0.0],
                n_obs: 100,
            })
            .collect();
        let res = fm_estimate(&fits, &spec).unwrap();
        assert_eq!(res.coefficients[0].se, Some(0.0));
        assert_eq!(res.coefficients[0].t_stat, Some(crate::newey_west::T_STAT_CAP));
        assert_eq!(res.coefficients[1].t_stat, Some(0.0));
    }

    #[test]
    fn lag_zero_se_is_population_sd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = FmSpec {
            nw_lag: LagRule::Fixed(0),
            ..FmSpec::nested(1, Proxy::Beta)
        };
        let fits: Vec<MonthFit> = (0..60)
            .map(|i| MonthFit {
                month: month().add_months(i),
                intercept: 0.0,
                slopes: (0..4).map(|_| rng.random_range(-0.05..0.05)).collect(),
                n_obs: 100,
            })
            .collect();
        let res = fm_estimate(&fits, &spec).unwrap();
        let xs: Vec<f64> = fits.iter().map(|f| f.slopes[2] * 100.0).collect();
        let m = stats::mean(&xs);
        let pop = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 60.0).sqrt();
        assert!((res.coefficients[2].se.unwrap() - pop / 60f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let rows: Vec<(usize, Characteristics)> = (0..10)
            .map(|s| {
                (
                    s,
                    Characteristics {
                        cgo: Some(s as f64),
                        proxy: Some(1.0),
                        mom_1_0: Some(0.0),
                        mom_12_1: Some(0.0),
                        turnover: Some(0.1),
                    },
                )
            })
            .collect();
        assert!(matches!(
            regressors(&rows, &FmSpec::nested(1, Proxy::Beta)),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn interactions_use_winsorized_constituents() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<(usize, Characteristics)> = (0..200)
            .map(|s| {
                (
                    s,
                    Characteristics {
                        cgo: Some(rng.random_range(-1.0..1.0) * if s == 7 { 50.0 } else { 1.0 }),
                        proxy: Some(rng.random_range(0.0..1.0)),
                        mom_1_0: Some(rng.random_range(-0.1..0.1)),
                        mom_12_1: Some(rng.random_range(-0.3..0.3)),
                        turnover: Some(rng.random_range(0.0..0.5)),
                    },
                )
            })
            .collect();
        let spec = FmSpec::nested(3, Proxy::Retvol);
        let a = regressors(&rows, &spec).unwrap();
        let b = regressors(&rows, &spec).unwrap();
        assert_eq!(a, b);
        let cgo = &a.values[0];
        let (proxy, inter) = (&a.values[1], &a.values[2]);
        for i in 0..cgo.len() {
            assert_eq!(inter[i], proxy[i] * cgo[i]);
        }
        assert!(cgo[7].abs() <= 1.0);
    }
}
