#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const STEP_MS: i64 = 300_000;
pub const T0_MS: i64 = 1_396_310_400_000; // 2014-04-01 00:00:00

pub fn nab_time(ms: i64) -> String {
    let secs = ms / 1000;
    let days = secs.div_euclid(86_400);
    let rem = secs.rem_euclid(86_400);
    // civil-from-days
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = yoe + era * 400 + i64::from(m <= 2);
    format!("{y:04}-{m:02}-{d:02} {:02}:{:02}:{:02}", rem / 3600, rem % 3600 / 60, rem % 60)
}

/// Sinusoid plus noise with spikes at `spikes`; windows of `half` points
/// on either side of each spike.
pub struct Fixture {
    pub values: Vec<f64>,
    pub spikes: Vec<usize>,
    pub half: usize,
}

impl Fixture {
    pub fn new(n: usize, n_spikes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values: Vec<f64> = (0..n)
            .map(|i| 10.0 * (i as f64 * std::f64::consts::TAU / 48.0).sin() + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let gap = n / (n_spikes + 1);
        let spikes: Vec<usize> = (1..=n_spikes).map(|j| j * gap).collect();
        for &s in &spikes {
            values[s] += 25.0;
        }
        Self {
            values,
            spikes,
            half: (gap / 10).max(1),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self {
            values: vec![c; n],
            spikes: Vec::new(),
            half: 0,
        }
    }

    pub fn timestamp(&self, i: usize) -> i64 {
        T0_MS + i as i64 * STEP_MS
    }

    pub fn windows(&self) -> Vec<(usize, usize)> {
        self.spikes
            .iter()
            .map(|&s| (s.saturating_sub(self.half), (s + self.half).min(self.values.len() - 1)))
            .collect()
    }

    pub fn write_csv(&self, path: &Path) {
        let mut text = String::from("timestamp,value\n");
        for (i, v) in self.values.iter().enumerate() {
            text.push_str(&format!("{},{v}\n", nab_time(self.timestamp(i))));
        }
        fs::write(path, text).unwrap();
    }

    pub fn write_labels(&self, path: &Path, key: &str) {
        let windows: Vec<String> = self
            .windows()
            .iter()
            .map(|&(a, b)| {
                format!(
                    "[\"{}.000000\", \"{}.000000\"]",
                    nab_time(self.timestamp(a)),
                    nab_time(self.timestamp(b))
                )
            })
            .collect();
        fs::write(path, format!("{{\"{key}\": [{}]}}\n", windows.join(", "))).unwrap();
    }
}

pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn store(&self) -> PathBuf {
        self.path("store")
    }

    pub fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_odsearch"))
            .arg("--store")
            .arg(self.store())
            .args(args)
            .env_remove("ODSEARCH_STORE")
            .output()
            .unwrap()
    }

    pub fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    pub fn ingest(&self, name: &str, fx: &Fixture, labeled: bool) {
        let csv = self.path(&format!("{name}.csv"));
        fx.write_csv(&csv);
        let mut args = vec!["ingest", "--name", name, "--csv", csv.to_str().unwrap()];
        let labels = self.path(&format!("{name}_labels.json"));
        if labeled {
            fx.write_labels(&labels, &format!("realKnown/{name}.csv"));
            args.extend(["--labels", labels.to_str().unwrap()]);
        }
        self.ok(&args);
    }
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}
