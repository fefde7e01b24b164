//! Hourly exogenous series: load shape, renewable capacity factors and energy
//! price, either synthesised (seeded) or loaded from CSV.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::CaseError;
use crate::Real;

/// Hourly series over a whole number of days. The engine indexes it modulo
/// its length, so a one-year series drives arbitrarily long simulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousSeries {
    pub wind_cf: Vec<Real>,
    pub pv_cf: Vec<Real>,
    pub load_frac: Vec<Real>,
    /// $/MWh
    pub price: Vec<Real>,
    /// hours
    pub delta_t: Real,
}

impl ExogenousSeries {
    pub fn len(&self) -> usize {
        self.load_frac.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load_frac.is_empty()
    }

    fn at(&self, v: &[Real], t: u64) -> Real {
        v[(t % v.len() as u64) as usize]
    }

    pub fn wind_at(&self, t: u64) -> Real {
        self.at(&self.wind_cf, t)
    }

    pub fn pv_at(&self, t: u64) -> Real {
        self.at(&self.pv_cf, t)
    }

    pub fn load_at(&self, t: u64) -> Real {
        self.at(&self.load_frac, t)
    }

    pub fn price_at(&self, t: u64) -> Real {
        self.at(&self.price, t)
    }

    pub fn mean_price(&self) -> Real {
        self.price.iter().sum::<Real>() / self.price.len() as Real
    }

    fn validate(self) -> Result<Self, CaseError> {
        let n = self.load_frac.len();
        if n == 0 || n % 24 != 0 {
            return Err(CaseError::Series(format!(
                "series length {n} must be a positive multiple of 24"
            )));
        }
        for (name, v) in [
            ("wind_cf", &self.wind_cf),
            ("pv_cf", &self.pv_cf),
            ("load_frac", &self.load_frac),
        ] {
            if v.len() != n {
                return Err(CaseError::Series(format!(
                    "{name} has {} entries, expected {n}",
                    v.len()
                )));
            }
            if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(CaseError::Series(format!("{name} value {x} outside [0,1]")));
            }
        }
        if self.price.len() != n {
            return Err(CaseError::Series(format!(
                "price has {} entries, expected {n}",
                self.price.len()
            )));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub wind_mean: Real,
    pub wind_seasonal: Real,
    pub wind_diurnal: Real,
    pub wind_noise: Real,
    pub pv_summer_peak: Real,
    pub pv_winter_peak: Real,
    pub pv_noise: Real,
    /// $/MWh
    pub price_base: Real,
    pub price_swing: Real,
    pub price_noise: Real,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            wind_mean: 0.35,
            wind_seasonal: 0.15,
            wind_diurnal: 0.10,
            wind_noise: 0.18,
            pv_summer_peak: 0.85,
            pv_winter_peak: 0.45,
            pv_noise: 0.25,
            price_base: 0.040,
            price_swing: 0.018,
            price_noise: 0.004,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SeriesConfig {
    /// IEEE-RTS load profile plus seeded seasonal/diurnal renewables.
    Synthetic {
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        years: Option<u32>,
        #[serde(default)]
        params: Option<SyntheticParams>,
    },
    /// CSV with header `hour,wind_cf,pv_cf,load_frac,price`.
    Csv { path: String },
    /// Constant factors, mainly for analytic test cases.
    Flat {
        load: Real,
        #[serde(default)]
        wind_cf: Real,
        #[serde(default)]
        pv_cf: Real,
        price: Real,
    },
}

/// Builds the hourly series. `horizon_years` and `seed` apply where the
/// config does not pin its own values.
pub fn build_series(cfg: &SeriesConfig, horizon_years: u32, seed: u64) -> Result<ExogenousSeries, CaseError> {
    match cfg {
        SeriesConfig::Synthetic { seed: s, years, params } => Ok(synthetic(
            params.clone().unwrap_or_default(),
            years.unwrap_or(horizon_years).max(1),
            s.unwrap_or(seed),
        )),
        SeriesConfig::Csv { path } => from_csv(path),
        SeriesConfig::Flat { load, wind_cf, pv_cf, price } => ExogenousSeries {
            wind_cf: vec![*wind_cf; 8760],
            pv_cf: vec![*pv_cf; 8760],
            load_frac: vec![*load; 8760],
            price: vec![*price; 8760],
            delta_t: 1.0,
        }
        .validate(),
    }
}

pub fn from_csv(path: impl AsRef<Path>) -> Result<ExogenousSeries, CaseError> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CaseError::Series(format!("{}: {e}", path.display())))?;
    let expected = ["hour", "wind_cf", "pv_cf", "load_frac", "price"];
    let headers = rdr
        .headers()
        .map_err(|e| CaseError::Series(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().ne(expected) {
        return Err(CaseError::Series(format!(
            "{}: header must be `hour,wind_cf,pv_cf,load_frac,price`",
            path.display()
        )));
    }
    let mut s = ExogenousSeries {
        wind_cf: Vec::new(),
        pv_cf: Vec::new(),
        load_frac: Vec::new(),
        price: Vec::new(),
        delta_t: 1.0,
    };
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CaseError::Series(format!("{} row {}: {e}", path.display(), i + 2)))?;
        let field = |k: usize| -> Result<Real, CaseError> {
            rec.get(k)
                .and_then(|v| v.trim().parse::<Real>().ok())
                .ok_or_else(|| CaseError::Series(format!("{} row {}: bad number", path.display(), i + 2)))
        };
        s.wind_cf.push(field(1)?);
        s.pv_cf.push(field(2)?);
        s.load_frac.push(field(3)?);
        s.price.push(field(4)?);
    }
    s.validate()
}

/// IEEE-RTS weekly peak load as a percentage of annual peak, weeks 1..=52.
const RTS_WEEKLY: [Real; 52] = [
    86.2, 90.0, 87.8, 83.4, 88.0, 84.1, 83.2, 80.6, 74.0, 73.7, 71.5, 72.7, 70.4, 75.0, 72.1,
    80.0, 75.4, 83.7, 87.0, 88.0, 85.6, 81.1, 90.0, 88.7, 89.6, 86.1, 75.5, 81.6, 80.1, 88.0,
    72.2, 77.6, 80.0, 72.9, 72.6, 70.5, 78.0, 69.5, 72.4, 72.4, 74.3, 74.4, 80.0, 88.1, 88.5,
    90.9, 94.0, 89.0, 94.2, 97.0, 100.0, 95.2,
];

/// Daily peak load as a percentage of weekly peak, Monday..=Sunday.
const RTS_DAILY: [Real; 7] = [93.0, 100.0, 98.0, 96.0, 94.0, 77.0, 75.0];

/// Hourly peak load as a percentage of daily peak:
/// [season][weekday=0 / weekend=1][hour].
/// Seasons: 0 winter (weeks 1-8 & 44-52), 1 summer (18-30), 2 spring/fall.
const RTS_HOURLY: [[[Real; 24]; 2]; 3] = [
    [
        [
            67.0, 63.0, 60.0, 59.0, 59.0, 60.0, 74.0, 86.0, 95.0, 96.0, 96.0, 95.0, 95.0, 95.0,
            93.0, 94.0, 99.0, 100.0, 100.0, 96.0, 91.0, 83.0, 73.0, 63.0,
        ],
        [
            78.0, 72.0, 68.0, 66.0, 64.0, 65.0, 66.0, 70.0, 80.0, 88.0, 90.0, 91.0, 90.0, 88.0,
            87.0, 87.0, 91.0, 100.0, 99.0, 97.0, 94.0, 92.0, 87.0, 81.0,
        ],
    ],
    [
        [
            64.0, 60.0, 58.0, 56.0, 56.0, 58.0, 64.0, 76.0, 87.0, 95.0, 99.0, 100.0, 99.0, 100.0,
            100.0, 97.0, 96.0, 96.0, 93.0, 92.0, 92.0, 93.0, 87.0, 72.0,
        ],
        [
            74.0, 70.0, 66.0, 65.0, 64.0, 62.0, 62.0, 66.0, 81.0, 86.0, 91.0, 93.0, 93.0, 92.0,
            91.0, 91.0, 92.0, 94.0, 95.0, 95.0, 100.0, 93.0, 88.0, 80.0,
        ],
    ],
    [
        [
            63.0, 62.0, 60.0, 58.0, 59.0, 65.0, 72.0, 85.0, 95.0, 99.0, 100.0, 99.0, 93.0, 92.0,
            90.0, 88.0, 90.0, 92.0, 96.0, 98.0, 96.0, 90.0, 80.0, 70.0,
        ],
        [
            75.0, 73.0, 69.0, 66.0, 65.0, 65.0, 68.0, 74.0, 83.0, 89.0, 92.0, 94.0, 91.0, 90.0,
            90.0, 86.0, 85.0, 88.0, 92.0, 100.0, 97.0, 95.0, 90.0, 85.0,
        ],
    ],
];

fn rts_season(week1: usize) -> usize {
    match week1 {
        1..=8 | 44..=52 => 0,
        18..=30 => 1,
        _ => 2,
    }
}

/// Hourly demand fraction of annual peak reproduced from the published RTS
/// weekly/daily/hourly percentage tables. `day` in 0..365, `hour` in 0..24;
/// day 364 (the 365th) repeats the last RTS day, since the tables define
/// exactly 52 weeks.
pub fn rts_load_fraction(day: usize, hour: usize) -> Real {
    let day = day.min(363);
    let week1 = day / 7 + 1;
    let dow = day % 7;
    let season = rts_season(week1);
    let kind = if dow >= 5 { 1 } else { 0 };
    RTS_WEEKLY[week1 - 1] / 100.0 * RTS_DAILY[dow] / 100.0 * RTS_HOURLY[season][kind][hour] / 100.0
}

fn synthetic(p: SyntheticParams, years: u32, seed: u64) -> ExogenousSeries {
    let n = years as usize * 8760;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e71e5_c0ffee);
    let mut s = ExogenousSeries {
        wind_cf: Vec::with_capacity(n),
        pv_cf: Vec::with_capacity(n),
        load_frac: Vec::with_capacity(n),
        price: Vec::with_capacity(n),
        delta_t: 1.0,
    };
    let tau = std::f64::consts::TAU;
    for h in 0..n {
        let day_of_year = (h / 24) % 365;
        let hod = h % 24;
        // wind: stronger in winter and at night
        let seasonal = (tau * (day_of_year as Real + 10.0) / 365.0).cos();
        let diurnal = (tau * (hod as Real - 3.0) / 24.0).cos();
        let w = p.wind_mean
            + p.wind_seasonal * seasonal
            + p.wind_diurnal * diurnal
            + p.wind_noise * (rng.gen::<Real>() * 2.0 - 1.0);
        s.wind_cf.push(w.clamp(0.0, 1.0));
        // pv: zero outside daylight, sine arch inside, seasonal amplitude
        let (sunrise, sunset) = (6.0, 18.0);
        let hodf = hod as Real;
        let pv = if hodf >= sunrise && hodf < sunset {
            let arch = (std::f64::consts::PI * (hodf - sunrise) / (sunset - sunrise)).sin();
            let amp = p.pv_winter_peak
                + (p.pv_summer_peak - p.pv_winter_peak)
                    * (0.5 - 0.5 * (tau * (day_of_year as Real + 10.0) / 365.0).cos());
            let cloud = 1.0 - p.pv_noise * rng.gen::<Real>();
            amp * arch * cloud
        } else {
            0.0
        };
        s.pv_cf.push(pv.clamp(0.0, 1.0));
        s.load_frac.push(rts_load_fraction((h / 24) % 365, hod));
        let pr = p.price_base
            + p.price_swing * (tau * (hodf - 9.0) / 24.0).sin()
            + p.price_noise * (rng.gen::<Real>() * 2.0 - 1.0);
        s.price.push(pr.max(0.0));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rts_peak_hour_is_exactly_one() {
        let mut max = 0.0;
        let mut arg = (0, 0);
        for day in 0..365 {
            for hour in 0..24 {
                let f = rts_load_fraction(day, hour);
                if f > max {
                    max = f;
                    arg = (day, hour);
                }
            }
        }
        assert!((max - 1.0).abs() < 1e-12, "peak fraction {max} at {arg:?}");
        // peak week 51, Tuesday, winter weekday evening
        assert_eq!(arg.0 / 7 + 1, 51);
        assert_eq!(arg.0 % 7, 1);
        assert!(arg.1 == 17 || arg.1 == 18);
    }

    #[test]
    fn synthetic_pv_is_zero_at_midnight() {
        let s = build_series(
            &SeriesConfig::Synthetic { seed: Some(3), years: Some(1), params: None },
            1,
            0,
        )
        .unwrap();
        for d in 0..365 {
            assert_eq!(s.pv_cf[d * 24], 0.0);
            assert_eq!(s.pv_cf[d * 24 + 23], 0.0);
        }
    }

    #[test]
    fn synthetic_factors_in_unit_interval() {
        let s = build_series(
            &SeriesConfig::Synthetic { seed: Some(11), years: Some(1), params: None },
            1,
            0,
        )
        .unwrap();
        assert_eq!(s.len(), 8760);
        for t in 0..s.len() as u64 {
            assert!((0.0..=1.0).contains(&s.wind_at(t)));
            assert!((0.0..=1.0).contains(&s.pv_at(t)));
            assert!((0.0..=1.0).contains(&s.load_at(t)));
        }
    }

    #[test]
    fn csv_roundtrip_and_length_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        let mut w = String::from("hour,wind_cf,pv_cf,load_frac,price\n");
        for h in 0..48 {
            w.push_str(&format!("{h},0.5,0.25,0.75,40.0\n"));
        }
        std::fs::write(&path, &w).unwrap();
        let s = from_csv(&path).unwrap();
        assert_eq!(s.len(), 48);
        assert_eq!(s.load_at(100), 0.75); // wraps modulo length

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "hour,wind_cf,pv_cf,load_frac,price\n0,0.5,0.2,0.7,40\n").unwrap();
        assert!(matches!(from_csv(&bad), Err(CaseError::Series(_))));

        let oob = dir.path().join("oob.csv");
        let mut w = String::from("hour,wind_cf,pv_cf,load_frac,price\n");
        for h in 0..24 {
            w.push_str(&format!("{h},1.5,0.2,0.7,40\n"));
        }
        std::fs::write(&oob, &w).unwrap();
        assert!(matches!(from_csv(&oob), Err(CaseError::Series(_))));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = SeriesConfig::Synthetic { seed: Some(7), years: Some(1), params: None };
        let a = build_series(&cfg, 1, 0).unwrap();
        let b = build_series(&cfg, 1, 99).unwrap();
        assert_eq!(a, b);
    }
}
