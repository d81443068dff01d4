//! Regenerates the bundled synthetic snapshot in FRED CSV format.
//!
//! ```text
//! cargo run -p aptqr-cli --example make_snapshot -- data/snapshot
//! ```
//!
//! Factor paths are drawn in transformed space and integrated back to
//! levels, so the pipeline's transforms recover them exactly. Crude oil
//! loads on the factors plus heavy-tailed noise, with an idiosyncratic
//! crash in April 2020 and a rebound in May 2020.

use std::path::{Path, PathBuf};

use aptqr_core::ingest::{write_fred_csv, TimeSeries, YearMonth};
use aptqr_core::transform::monthly_riskfree;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};

const SEED: u64 = 20170101;
const FIRST: (i32, u32) = (2016, 1);
const MONTHS: usize = 90;

struct Factor {
    series: &'static str,
    start: f64,
    sd: f64,
    drift: f64,
    /// Loading of the oil excess return on the transformed factor.
    beta: f64,
}

const FACTORS: [Factor; 10] = [
    Factor { series: "INDPRO", start: 102.0, sd: 0.006, drift: 0.001, beta: 1.8 },
    Factor { series: "CCU", start: 1.10, sd: 0.015, drift: 0.0, beta: -0.9 },
    Factor { series: "M1SL", start: 3100.0, sd: 0.005, drift: 0.004, beta: 0.4 },
    Factor { series: "UNRATE", start: 4.9, sd: 0.03, drift: -0.002, beta: -0.15 },
    Factor { series: "WUPI", start: 2.0, sd: 0.25, drift: 0.0, beta: -0.01 },
    Factor { series: "GPE", start: 80.0, sd: 0.15, drift: 0.0, beta: 0.02 },
    Factor { series: "VIXCLS", start: 14.0, sd: 0.18, drift: 0.0, beta: -0.08 },
    Factor { series: "GPR", start: 95.0, sd: 0.12, drift: 0.0, beta: 0.03 },
    Factor { series: "GEPU", start: 190.0, sd: 0.12, drift: 0.0, beta: -0.02 },
    Factor { series: "CPIAUCSL", start: 237.0, sd: 0.0012, drift: 0.0, beta: 3.0 },
];

fn month(i: usize) -> YearMonth {
    let first = YearMonth::new(FIRST.0, FIRST.1).expect("valid month");
    YearMonth::from_ordinal(first.ordinal() + i as i64)
}

fn index_of(year: i32, m: u32) -> usize {
    let first = YearMonth::new(FIRST.0, FIRST.1).expect("valid month");
    (YearMonth::new(year, m).expect("valid month").ordinal() - first.ordinal()) as usize
}

fn three_month_yield(i: usize) -> f64 {
    let t = month(i);
    match (t.year(), t.month()) {
        (2016, m) => 0.3 + 0.02 * m as f64,
        (2017, m) => 0.55 + 0.06 * m as f64,
        (2018, m) => 1.3 + 0.08 * m as f64,
        (2019, m) => 2.4 - 0.07 * m as f64,
        (2020, 1 | 2) => 1.55,
        (2020 | 2021, _) => 0.08,
        (2022, m) => 0.1 + 0.35 * m as f64,
        (_, m) => 4.3 + 0.05 * m as f64,
    }
}

fn write(dir: &Path, name: &str, values: &[f64], missing: &[usize]) -> aptqr_core::Result<()> {
    let obs = values
        .iter()
        .enumerate()
        .map(|(i, v)| (month(i), (!missing.contains(&i)).then_some(*v)))
        .collect();
    write_fred_csv(&TimeSeries::new(name, obs)?, dir.join(format!("{name}.csv")))
}

fn main() -> aptqr_core::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/snapshot".into()));
    std::fs::create_dir_all(&dir).map_err(|e| aptqr_core::Error::Data(format!("{}: {e}", dir.display())))?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let tails = StudentT::new(5.0).expect("t(5)");

    let (covid, crash, rebound) = (index_of(2020, 3), index_of(2020, 4), index_of(2020, 5));

    let rf: Vec<f64> = (0..MONTHS).map(three_month_yield).collect();
    let mut five_year = Vec::with_capacity(MONTHS);
    let mut spread: f64 = 0.9;
    for &r in &rf {
        spread = (spread + 0.08 * unit.sample(&mut rng)).clamp(-0.3, 2.5);
        five_year.push(r + spread);
    }

    let mut sp_excess = vec![0.0; MONTHS];
    let mut sp = vec![2000.0; MONTHS];
    for i in 1..MONTHS {
        sp_excess[i] = 0.006 + 0.04 * tails.sample(&mut rng) / 5f64.sqrt() * 3f64.sqrt();
        if i == covid {
            sp_excess[i] = -0.13;
        }
        sp[i] = sp[i - 1] * (sp_excess[i] + monthly_riskfree(rf[i])).exp();
    }

    let mut oil_excess: Vec<f64> = (0..MONTHS)
        .map(|_| 0.004 + 0.045 * tails.sample(&mut rng) / 5f64.sqrt() * 3f64.sqrt())
        .collect();
    for i in 1..MONTHS {
        oil_excess[i] += 0.9 * sp_excess[i];
    }

    for f in &FACTORS {
        let mut level = vec![f.start; MONTHS];
        let mut rate = 0.002;
        for i in 1..MONTHS {
            let mut d = f.drift + f.sd * unit.sample(&mut rng);
            match f.series {
                "WUPI" if i == covid => d += 1.6,
                "WUPI" if i > covid && i <= covid + 4 => d -= 0.3,
                "VIXCLS" if i == covid => d += 0.9,
                "VIXCLS" if i == crash => d -= 0.35,
                _ => {}
            }
            if f.series == "CPIAUCSL" {
                // inflation is a random walk; the factor is its change
                let next = (rate + d).clamp(-0.004, 0.009);
                d = next - rate;
                rate = next;
                level[i] = level[i - 1] * rate.exp();
            } else {
                level[i] = level[i - 1] * d.exp();
            }
            oil_excess[i] += f.beta * d;
        }
        let missing: &[usize] = if f.series == "GPE" { &[3] } else { &[] };
        write(&dir, f.series, &level, missing)?;
    }

    oil_excess[crash] -= 0.75;
    oil_excess[rebound] += 0.55;
    let mut oil = vec![52.0; MONTHS];
    for i in 1..MONTHS {
        oil[i] = oil[i - 1] * (oil_excess[i] + monthly_riskfree(rf[i])).exp();
    }

    write(&dir, "MCOILWTICO", &oil, &[])?;
    write(&dir, "SP500", &sp, &[])?;
    write(&dir, "DGS3MO", &rf, &[])?;
    write(&dir, "DGS5", &five_year, &[])?;
    println!("wrote {} series to {}", FACTORS.len() + 4, dir.display());
    Ok(())
}
