//! Versioned plain-text model files.
//!
//! ```text
//! ksconf-model 1
//! family ks-conf
//! source validation.csv
//! jitter-eps 1.0000000000000000e-9
//! jitter-seed 7
//! n 3
//! breakpoints
//! 2.0000000000000001e-1
//! 5.0000000000000000e-1
//! 8.0000000000000004e-1
//! end
//! ```
//!
//! Header lines are `key value` pairs, the value running to end of line.
//! Reals are written with 17 significant digits, which round-trips every
//! `f64` exactly. Baseline models use the same envelope with family
//! `mean-test` or `label-frequency`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::baselines::{BootstrapKey, LabelFrequencyModel, MeanTestModel, Thresholds};
use crate::calibration::{CalibrationModel, JitterParams, ModelMeta};
use crate::error::{Error, Result};

pub const MAGIC: &str = "ksconf-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelFile {
    KsConf(CalibrationModel),
    MeanTest(MeanTestModel),
    LabelFrequency(LabelFrequencyModel),
}

impl ModelFile {
    pub fn family(&self) -> &'static str {
        match self {
            ModelFile::KsConf(_) => "ks-conf",
            ModelFile::MeanTest(_) => "mean-test",
            ModelFile::LabelFrequency(_) => "label-frequency",
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\nfamily {}\n", self.family());
        match self {
            ModelFile::KsConf(m) => write_ks(&mut out, m),
            ModelFile::MeanTest(m) => write_mean(&mut out, m),
            ModelFile::LabelFrequency(m) => write_labels(&mut out, m),
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let (no, head) = lines.next_line()?;
        let version = head
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| Error::parse(no, format!("expected {MAGIC:?} header")))?;
        if version != VERSION.to_string() {
            return Err(Error::parse(no, format!("unsupported version {version:?}")));
        }
        let family = lines.field("family")?;
        let model = match family.as_str() {
            "ks-conf" => ModelFile::KsConf(read_ks(&mut lines)?),
            "mean-test" => ModelFile::MeanTest(read_mean(&mut lines)?),
            "label-frequency" => ModelFile::LabelFrequency(read_labels(&mut lines)?),
            other => return Err(Error::parse(lines.line_no, format!("unknown family {other:?}"))),
        };
        let (no, tail) = lines.next_line()?;
        if tail != "end" {
            return Err(Error::parse(no, "expected end"));
        }
        Ok(model)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn into_ks_conf(self) -> Result<CalibrationModel> {
        match self {
            ModelFile::KsConf(m) => Ok(m),
            other => Err(Error::InvalidParameter(format!(
                "expected a ks-conf model, found {}",
                other.family()
            ))),
        }
    }
}

pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

fn write_ks(out: &mut String, m: &CalibrationModel) {
    let meta = m.meta();
    let _ = writeln!(out, "source {}", one_line(&meta.source));
    if let Some(created) = &meta.created {
        let _ = writeln!(out, "created {}", one_line(created));
    }
    let _ = writeln!(out, "jitter-eps {}", format_real(meta.jitter.epsilon));
    let _ = writeln!(out, "jitter-seed {}", meta.jitter.seed);
    let _ = writeln!(out, "n {}", m.n());
    out.push_str("breakpoints\n");
    for &z in m.breakpoints() {
        out.push_str(&format_real(z));
        out.push('\n');
    }
}

fn read_ks(lines: &mut Lines<'_>) -> Result<CalibrationModel> {
    let source = lines.field("source")?;
    let created = lines.optional_field("created")?;
    let epsilon = lines.real_field("jitter-eps")?;
    let seed = lines.parsed_field::<u64>("jitter-seed")?;
    let n = lines.parsed_field::<usize>("n")?;
    lines.expect("breakpoints")?;
    let breakpoints = (0..n).map(|_| lines.real_line()).collect::<Result<Vec<_>>>()?;
    let meta = ModelMeta {
        created,
        source,
        jitter: JitterParams { epsilon, seed },
    };
    CalibrationModel::from_breakpoints(breakpoints, meta)
}

fn write_mean(out: &mut String, m: &MeanTestModel) {
    let _ = writeln!(out, "log-space {}", m.log_space);
    let _ = writeln!(out, "mu {}", format_real(m.mu));
    let _ = writeln!(out, "sigma2 {}", format_real(m.sigma2));
    let _ = writeln!(out, "bootstrap {}", m.bootstrap.len());
    for (key, t) in &m.bootstrap {
        let alpha = format_real(key.alpha());
        match t {
            Thresholds::Lower(x) => {
                let _ = writeln!(out, "{alpha} {} one-sided {}", key.m, format_real(*x));
            }
            Thresholds::Band { lower, upper } => {
                let _ = writeln!(
                    out,
                    "{alpha} {} symmetric {} {}",
                    key.m,
                    format_real(*lower),
                    format_real(*upper)
                );
            }
        }
    }
}

fn read_mean(lines: &mut Lines<'_>) -> Result<MeanTestModel> {
    let log_space = lines.parsed_field::<bool>("log-space")?;
    let mu = lines.real_field("mu")?;
    let sigma2 = lines.real_field("sigma2")?;
    if !(sigma2 >= 0.0) {
        return Err(Error::parse(lines.line_no, "negative variance"));
    }
    let count = lines.parsed_field::<usize>("bootstrap")?;
    let mut bootstrap = BTreeMap::new();
    for _ in 0..count {
        let (no, line) = lines.next_line()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::parse(no, format!("bad bootstrap entry {line:?}"));
        let real = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let (alpha, m) = match parts.as_slice() {
            [a, m, ..] => (real(a)?, m.parse::<usize>().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        let (symmetric, t) = match parts.as_slice() {
            [_, _, "one-sided", x] => (false, Thresholds::Lower(real(x)?)),
            [_, _, "symmetric", lo, hi] => {
                let (lower, upper) = (real(lo)?, real(hi)?);
                if lower > upper {
                    return Err(Error::parse(no, "lower threshold above upper"));
                }
                (true, Thresholds::Band { lower, upper })
            }
            _ => return Err(bad()),
        };
        bootstrap.insert(BootstrapKey::new(alpha, m, symmetric), t);
    }
    Ok(MeanTestModel {
        mu,
        sigma2,
        log_space,
        bootstrap,
    })
}

fn write_labels(out: &mut String, m: &LabelFrequencyModel) {
    let _ = writeln!(out, "labels {}", m.label_count());
    let _ = writeln!(out, "other-frequency {}", format_real(m.other_frequency));
    let merged: Vec<String> = m.merged_other.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "merged {}", if merged.is_empty() { "-".to_string() } else { merged.join(" ") });
    out.push_str("frequencies\n");
    for &f in &m.frequencies {
        out.push_str(&format_real(f));
        out.push('\n');
    }
}

fn read_labels(lines: &mut Lines<'_>) -> Result<LabelFrequencyModel> {
    let k = lines.parsed_field::<usize>("labels")?;
    let other = lines.real_field("other-frequency")?;
    let merged_text = lines.field("merged")?;
    let no = lines.line_no;
    let merged: BTreeSet<usize> = if merged_text == "-" {
        BTreeSet::new()
    } else {
        merged_text
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|_| Error::parse(no, format!("bad label {s:?}"))))
            .collect::<Result<_>>()?
    };
    lines.expect("frequencies")?;
    let freqs = (0..k).map(|_| lines.real_line()).collect::<Result<Vec<_>>>()?;
    LabelFrequencyModel::from_parts(freqs, merged, other)
}

struct Lines<'a> {
    inner: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines(),
            line_no: 0,
        }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.line_no += 1;
        self.inner
            .next()
            .map(|l| (self.line_no, l.trim_end()))
            .ok_or_else(|| Error::parse(self.line_no, "unexpected end of file"))
    }

    fn peek_key(&self) -> Option<&'a str> {
        self.inner.clone().next().map(|l| l.split(' ').next().unwrap_or(""))
    }

    fn field(&mut self, key: &str) -> Result<String> {
        let (no, line) = self.next_line()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            None if line == key => Ok(String::new()),
            _ => Err(Error::parse(no, format!("expected field {key:?}"))),
        }
    }

    fn optional_field(&mut self, key: &str) -> Result<Option<String>> {
        if self.peek_key() == Some(key) {
            self.field(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn parsed_field<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.field(key)?;
        v.trim()
            .parse()
            .map_err(|_| Error::parse(self.line_no, format!("bad value {v:?} for {key}")))
    }

    fn real_field(&mut self, key: &str) -> Result<f64> {
        self.parsed_field(key)
    }

    fn real_line(&mut self) -> Result<f64> {
        let (no, line) = self.next_line()?;
        line.trim()
            .parse()
            .map_err(|_| Error::parse(no, format!("bad number {line:?}")))
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        let (no, line) = self.next_line()?;
        if line == word {
            Ok(())
        } else {
            Err(Error::parse(no, format!("expected {word:?}")))
        }
    }
}
