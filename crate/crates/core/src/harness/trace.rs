use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "episode,cycle,gnb,ue,num_cc,rb_cc1,rb_cc2,rb_total,p_total_w,p_cc1_w,p_cc2_w,p_si_w,rate_bps,state_bit,reward";

/// One UE in one cycle. Episodes and cycles count from 1; `gnb` and `ue`
/// are network indices from 0. Reals are stored at the 9 significant digits
/// written to CSV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub episode: usize,
    pub cycle: usize,
    pub gnb: usize,
    pub ue: usize,
    pub num_cc: usize,
    pub rb_cc1: usize,
    pub rb_cc2: usize,
    pub rb_total: usize,
    pub p_total_w: f64,
    pub p_cc1_w: f64,
    pub p_cc2_w: f64,
    pub p_si_w: f64,
    pub rate_bps: f64,
    pub state_bit: bool,
    /// Reward of the serving gNB.
    pub reward: f64,
}

fn fmt_real(x: f64) -> String {
    format!("{x:.8e}")
}

pub(crate) fn round9(x: f64) -> f64 {
    fmt_real(x).parse().unwrap_or(x)
}

impl TraceRow {
    /// Rounds every real to its CSV representation.
    pub fn rounded(mut self) -> Self {
        for v in [
            &mut self.p_total_w,
            &mut self.p_cc1_w,
            &mut self.p_cc2_w,
            &mut self.p_si_w,
            &mut self.rate_bps,
            &mut self.reward,
        ] {
            *v = round9(*v);
        }
        self
    }

    fn write_csv(&self, out: &mut String) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.episode,
            self.cycle,
            self.gnb,
            self.ue,
            self.num_cc,
            self.rb_cc1,
            self.rb_cc2,
            self.rb_total,
            fmt_real(self.p_total_w),
            fmt_real(self.p_cc1_w),
            fmt_real(self.p_cc2_w),
            fmt_real(self.p_si_w),
            fmt_real(self.rate_bps),
            u8::from(self.state_bit),
            fmt_real(self.reward),
        );
    }

    /// Value of a numeric column by its CSV name.
    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "num_cc" => self.num_cc as f64,
            "rb_cc1" => self.rb_cc1 as f64,
            "rb_cc2" => self.rb_cc2 as f64,
            "rb_total" => self.rb_total as f64,
            "p_total_w" => self.p_total_w,
            "p_cc1_w" => self.p_cc1_w,
            "p_cc2_w" => self.p_cc2_w,
            "p_si_w" => self.p_si_w,
            "rate_bps" => self.rate_bps,
            "state_bit" => f64::from(u8::from(self.state_bit)),
            "reward" => self.reward,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeTrace {
    pub rows: Vec<TraceRow>,
    /// Wall-clock seconds per episode; not part of the CSV.
    pub episode_seconds: Vec<f64>,
}

impl EpisodeTrace {
    pub fn num_episodes(&self) -> usize {
        self.rows.iter().map(|r| r.episode).max().unwrap_or(0)
    }

    /// Per episode: mean over cycles of the rates summed across UEs (bits/s).
    pub fn sum_rate_by_episode(&self) -> Vec<(usize, f64)> {
        let mut per_cycle: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for r in &self.rows {
            *per_cycle.entry((r.episode, r.cycle)).or_default() += r.rate_bps;
        }
        mean_by_episode(per_cycle.into_iter().map(|((e, _), v)| (e, v)))
    }

    /// Per episode: mean over cycles of `metric` for one UE. Episodes in
    /// which the UE is absent are skipped.
    pub fn ue_metric_by_episode(&self, ue: usize, metric: &str) -> Result<Vec<(usize, f64)>> {
        if !super::KNOWN_METRICS.contains(&metric) || metric == "sum_rate" {
            return Err(Error::UnknownMetric(metric.to_string()));
        }
        Ok(mean_by_episode(
            self.rows
                .iter()
                .filter(|r| r.ue == ue)
                .map(|r| (r.episode, r.metric(metric).unwrap())),
        ))
    }

    pub fn ues(&self) -> Vec<usize> {
        let mut ues: Vec<usize> = self.rows.iter().map(|r| r.ue).collect();
        ues.sort_unstable();
        ues.dedup();
        ues
    }

    /// Mean of the per-episode sum rate over the last `n` episodes.
    pub fn final_sum_rate(&self, n: usize) -> f64 {
        let series = self.sum_rate_by_episode();
        let tail = &series[series.len().saturating_sub(n)..];
        tail.iter().map(|(_, v)| v).sum::<f64>() / tail.len().max(1) as f64
    }
}

fn mean_by_episode(values: impl Iterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (e, v) in values {
        let slot = acc.entry(e).or_default();
        slot.0 += v;
        slot.1 += 1;
    }
    acc.into_iter().map(|(e, (s, n))| (e, s / n as f64)).collect()
}

pub fn write_csv<W: Write>(trace: &EpisodeTrace, mut w: W) -> std::io::Result<()> {
    let mut buf = String::with_capacity(64 + trace.rows.len() * 160);
    buf.push_str(CSV_HEADER);
    buf.push('\n');
    for row in &trace.rows {
        row.write_csv(&mut buf);
    }
    w.write_all(buf.as_bytes())
}

pub fn emit_csv(trace: &EpisodeTrace, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(trace, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn parse_csv(text: &str) -> Result<EpisodeTrace> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Trace(format!("unexpected header {other:?}"))),
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 15 {
            return Err(Error::Trace(format!("line {}: expected 15 fields, got {}", n + 2, fields.len())));
        }
        let int = |i: usize| {
            fields[i]
                .parse::<usize>()
                .map_err(|e| Error::Trace(format!("line {}: field {}: {e}", n + 2, i + 1)))
        };
        let real = |i: usize| {
            fields[i]
                .parse::<f64>()
                .map_err(|e| Error::Trace(format!("line {}: field {}: {e}", n + 2, i + 1)))
        };
        rows.push(TraceRow {
            episode: int(0)?,
            cycle: int(1)?,
            gnb: int(2)?,
            ue: int(3)?,
            num_cc: int(4)?,
            rb_cc1: int(5)?,
            rb_cc2: int(6)?,
            rb_total: int(7)?,
            p_total_w: real(8)?,
            p_cc1_w: real(9)?,
            p_cc2_w: real(10)?,
            p_si_w: real(11)?,
            rate_bps: real(12)?,
            state_bit: match fields[13] {
                "0" => false,
                "1" => true,
                other => return Err(Error::Trace(format!("line {}: bad state bit {other:?}", n + 2))),
            },
            reward: real(14)?,
        });
    }
    Ok(EpisodeTrace {
        rows,
        episode_seconds: Vec::new(),
    })
}
