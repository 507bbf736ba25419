//! Checks experiment outputs in a directory against the reproduction targets.
//!
//! "Output PR" of a two-group synthetic run is the mean of PR(G1, C1) and
//! PR(G2, C2), the preference of each group for its favored category.
//! Sweeps are read at `k = 50`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use log::warn;

use super::{ExperimentKind, MOVIELENS_REFERENCE};
use crate::error::{Error, Result};
use crate::table::{parse_opt, CsvTable};

/// Pinned thresholds. Every field can be overridden by name with [`Tolerances::set`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub k: usize,
    pub sym_flat: f64,
    pub sym_jump: f64,
    pub sym_peak: f64,
    pub candidate_gap: f64,
    pub asym_adopt: f64,
    pub size_tol: f64,
    pub size_amplified: f64,
    pub category_amplified: f64,
    pub accepted_mean: f64,
    pub accepted_tol: f64,
    pub iter_flat: f64,
    pub iter_increase: f64,
    pub gulm_flat: f64,
    pub gulm_ratio: f64,
    pub ml_bias_tol: f64,
    pub ml_input_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            k: 50,
            sym_flat: 0.02,
            sym_jump: 0.05,
            sym_peak: 0.95,
            candidate_gap: 0.05,
            asym_adopt: 0.55,
            size_tol: 0.02,
            size_amplified: 0.7,
            category_amplified: 0.7,
            accepted_mean: 7.0,
            accepted_tol: 1.0,
            iter_flat: 0.02,
            iter_increase: 0.03,
            gulm_flat: 0.03,
            gulm_ratio: 0.5,
            ml_bias_tol: 0.10,
            ml_input_tol: 0.05,
        }
    }
}

impl Tolerances {
    /// Overrides one threshold; the change is logged.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("invalid tolerance value `{value}` for `{key}`"));
        if key == "k" {
            self.k = value.parse().map_err(|_| bad())?;
            warn!("tolerance override: k = {value}");
            return Ok(());
        }
        let v: f64 = value.parse().map_err(|_| bad())?;
        let slot = match key {
            "sym_flat" => &mut self.sym_flat,
            "sym_jump" => &mut self.sym_jump,
            "sym_peak" => &mut self.sym_peak,
            "candidate_gap" => &mut self.candidate_gap,
            "asym_adopt" => &mut self.asym_adopt,
            "size_tol" => &mut self.size_tol,
            "size_amplified" => &mut self.size_amplified,
            "category_amplified" => &mut self.category_amplified,
            "accepted_mean" => &mut self.accepted_mean,
            "accepted_tol" => &mut self.accepted_tol,
            "iter_flat" => &mut self.iter_flat,
            "iter_increase" => &mut self.iter_increase,
            "gulm_flat" => &mut self.gulm_flat,
            "gulm_ratio" => &mut self.gulm_ratio,
            "ml_bias_tol" => &mut self.ml_bias_tol,
            "ml_input_tol" => &mut self.ml_input_tol,
            other => return Err(Error::Config(format!("unknown tolerance `{other}`"))),
        };
        warn!("tolerance override: {key} = {v} (default {slot})");
        *slot = v;
        Ok(())
    }

    /// Applies `key=value` overrides.
    pub fn with_overrides<'a>(mut self, overrides: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("tolerance override `{o}` is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{status}] {} {}: {}", self.id, self.name, self.detail)
    }
}

fn result(id: &str, name: &str, checks: Vec<(bool, String)>) -> CriterionResult {
    let passed = checks.iter().all(|(ok, _)| *ok);
    let detail = checks
        .into_iter()
        .map(|(ok, d)| format!("{}{d}", if ok { "" } else { "!! " }))
        .collect::<Vec<_>>()
        .join("; ");
    CriterionResult {
        id: id.into(),
        name: name.into(),
        passed,
        detail,
    }
}

fn key(x: f64) -> i64 {
    (x * 1e6).round() as i64
}

/// One value column of a CSV keyed by (parameter, group, category).
struct Series {
    values: BTreeMap<(i64, usize, usize), f64>,
}

impl Series {
    fn get(&self, param: f64, g: usize, c: usize) -> Result<f64> {
        self.values
            .get(&(key(param), g, c))
            .copied()
            .ok_or_else(|| Error::MissingRun(format!("value at {param} for group {g}, category {c}")))
    }

    /// Mean preference of each group for its own category.
    fn favored(&self, param: f64) -> Result<f64> {
        Ok((self.get(param, 0, 0)? + self.get(param, 1, 1)?) / 2.0)
    }

    fn params(&self) -> Vec<f64> {
        let mut p: Vec<i64> = self.values.keys().map(|k| k.0).collect();
        p.dedup();
        p.into_iter().map(|k| k as f64 / 1e6).collect()
    }
}

fn load_series(dir: &Path, kind: ExperimentKind, param: &str, value: &str, filter: &[(&str, &str)]) -> Result<Series> {
    let t = CsvTable::read(&dir.join(format!("{kind}.csv")))?;
    let (pc, gc, cc, vc) = (t.column(param)?, t.column("group")?, t.column("category")?, t.column(value)?);
    let filters = filter
        .iter()
        .map(|(name, v)| Ok((t.column(name)?, *v)))
        .collect::<Result<Vec<_>>>()?;
    let mut values = BTreeMap::new();
    for row in &t.rows {
        if filters.iter().any(|&(i, v)| row[i] != v) {
            continue;
        }
        let p: f64 = row[pc].parse().map_err(|_| Error::MissingRun(format!("bad {param} `{}`", row[pc])))?;
        let g: usize = row[gc].parse().map_err(|_| Error::MissingRun(format!("bad group `{}`", row[gc])))?;
        let c: usize = row[cc].parse().map_err(|_| Error::MissingRun(format!("bad category `{}`", row[cc])))?;
        if let Some(v) = parse_opt(&row[vc]) {
            values.insert((key(p), g, c), v);
        }
    }
    Ok(Series { values })
}

fn sweep(dir: &Path, kind: ExperimentKind, param: &str, value: &str, tol: &Tolerances) -> Result<Series> {
    let k = tol.k.to_string();
    load_series(dir, kind, param, value, &[("k", &k)])
}

fn c3(dir: &Path, tol: &Tolerances) -> Result<CriterionResult> {
    let inp = sweep(dir, ExperimentKind::SymmetricSweep, "rho", "pr_in", tol)?;
    let out = sweep(dir, ExperimentKind::SymmetricSweep, "rho", "pr_out", tol)?;
    let mut checks = Vec::new();
    for rho in [0.5, 0.55, 0.6] {
        let (i, o) = (inp.favored(rho)?, out.favored(rho)?);
        checks.push((o <= i + tol.sym_flat, format!("rho={rho}: out {o:.4} <= in {i:.4} + {}", tol.sym_flat)));
    }
    let (o7, o8) = (out.favored(0.7)?, out.favored(0.8)?);
    checks.push((o8 >= o7 + tol.sym_jump, format!("out(0.8) {o8:.4} >= out(0.7) {o7:.4} + {}", tol.sym_jump)));
    checks.push((o8 >= tol.sym_peak, format!("out(0.8) {o8:.4} >= {}", tol.sym_peak)));
    Ok(result("3", "symmetric sweep", checks))
}

fn c4(dir: &Path, tol: &Tolerances) -> Result<CriterionResult> {
    let cand = sweep(dir, ExperimentKind::SymmetricSweep, "rho", "candidate_pr", tol)?;
    let out = sweep(dir, ExperimentKind::SymmetricSweep, "rho", "pr_out", tol)?;
    let mut checks = Vec::new();
    for rho in out.params().into_iter().filter(|&r| r >= 0.75 - 1e-9) {
        let (c, o) = (cand.favored(rho)?, out.favored(rho)?);
        checks.push((
            c <= o - tol.candidate_gap,
            format!("rho={rho}: candidate {c:.4} <= output {o:.4} - {}", tol.candidate_gap),
        ));
    }
    Ok(result("4", "candidate set less biased", checks))
}

fn c5(dir: &Path, tol: &Tolerances) -> Result<CriterionResult> {
    let asym = sweep(dir, ExperimentKind::AsymmetricSweep, "rho1", "pr_out", tol)?;
    let sym = sweep(dir, ExperimentKind::SymmetricSweep, "rho", "pr_out", tol)?;
    let mut checks = Vec::new();
    for rho in asym.params().into_iter().filter(|&r| r >= 0.75 - 1e-9) {
        let g2 = asym.get(rho, 1, 0)?;
        checks.push((g2 > tol.asym_adopt, format!("rho1={rho}: PR(G2,C1) {g2:.4} > {}", tol.asym_adopt)));
        let (a, s) = (asym.get(rho, 0, 0)?, sym.get(rho, 0, 0)?);
        checks.push((a > s, format!("rho1={rho}: PR(G1,C1) {a:.4} > symmetric {s:.4}")));
    }
    Ok(result("5", "asymmetric sweep", checks))
}

fn c6(dir: &Path, tol: &Tolerances) -> Result<CriterionResult> {
    let bd = sweep(dir, ExperimentKind::GroupSizeSweep, "phi", "bias_disparity", tol)?;
    let out = sweep(dir, ExperimentKind::GroupSizeSweep, "phi", "pr_out", tol)?;
    let mut checks = Vec::new();
    for phi in out.params() {
        if phi <= 0.30 + 1e-9 {
            let d = bd.get(phi, 0, 0)?;
            checks.push((d < tol.size_tol, format!("phi={phi}: BD(G1,C1) {d:.4} < {}", tol.size_tol)));
        } else if phi <= 0.50 + 1e-9 {
            let (a, b) = (out.get(phi, 0, 0)?, out.get(phi, 1, 1)?);
            let floor = tol.size_amplified - tol.size_tol;
            checks.push((
                a > floor && b > floor,
                format!("phi={phi}: PR(G1,C1) {a:.4}, PR(G2,C2) {b:.4} > {floor:.2}"),
            ));
        }
    }
    Ok(result("6", "group-size sweep", checks))
}

fn c7(dir: &Path, tol: &Tolerances) -> Result<CriterionResult> {
    let out = sweep(dir, ExperimentKind::CategorySizeSweep, "theta", "pr_out", tol)?;
    let mut checks = Vec::new();
    for theta in out.params() {
        let o = out.get(theta, 0, 0)?;
        if theta <= 0.5 + 1e-9 {
            checks.push((
                o > tol.category_amplified,
                format!("theta={theta}: PR(G1,C1) {o:.4} > {}", tol.category_amplified),
            ));
        } else if theta >= 0.8 - 1e-9 {
            checks.push((o < theta, format!("theta={theta}: PR(G1,C1) {o:.4} < {theta}")));
        }
    }
    Ok(result("7", "category-size sweep", checks))
}

/// Per-iteration series of an iterative run.
struct Trajectories {
    pr: Vec<Series>,
    accepted: Vec<Series>,
}

impl Trajectories {
    fn load(dir: &Path, kind: ExperimentKind) -> Result<Self> {
        let t = CsvTable::read(&dir.join(format!("{kind}.csv")))?;
        let it = t.column("iteration")?;
        let iterations = t.rows.iter().filter_map(|r| r[it].parse::<usize>().ok()).max().unwrap_or(0);
        let mut pr = Vec::new();
        let mut accepted = Vec::new();
        for step in 0..=iterations {
            let s = step.to_string();
            pr.push(load_series(dir, kind, "rho", "pr", &[("iteration", &s)])?);
            accepted.push(load_series(dir, kind, "rho", "mean_accepted", &[("iteration", &s)])?);
        }
        Ok(Self { pr, accepted })
    }

    fn path(&self, rho: f64) -> Result<Vec<f64>> {
        self.pr.iter().map(|s| s.favored(rho)).collect()
    }

    fn rhos(&self) -> Vec<f64> {
        self.pr[0].params()
    }
}

fn fmt_path(p: &[f64]) -> String {
    p.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" ")
}

fn c8(dir: &Path, tol: &Tolerances) -> Result<CriterionResult> {
    let tr = Trajectories::load(dir, ExperimentKind::Iterative)?;
    let mut checks = Vec::new();
    let acc: Vec<f64> = tr.accepted[1..]
        .iter()
        .map(|s| s.get(0.7, 0, 0))
        .collect::<Result<_>>()?;
    let mean_acc = acc.iter().sum::<f64>() / acc.len().max(1) as f64;
    checks.push((
        !acc.is_empty() && (mean_acc - tol.accepted_mean).abs() <= tol.accepted_tol,
        format!("rho=0.7: mean accepted {mean_acc:.3} within {} of {}", tol.accepted_tol, tol.accepted_mean),
    ));
    let p6 = tr.path(0.6)?;
    let d6 = p6[p6.len() - 1] - p6[0];
    checks.push((d6.abs() <= tol.iter_flat, format!("rho=0.6: PR path {} change {d6:+.4}", fmt_path(&p6))));
    for rho in tr.rhos().into_iter().filter(|&r| r >= 0.7 - 1e-9) {
        let p = tr.path(rho)?;
        let strictly = p.windows(2).all(|w| w[1] > w[0]);
        let d = p[p.len() - 1] - p[0];
        checks.push((
            strictly && d >= tol.iter_increase,
            format!("rho={rho}: PR path {} increase {d:+.4}", fmt_path(&p)),
        ));
    }
    let p5 = tr.path(0.5)?;
    let d5 = p5[p5.len() - 1] - p5[0];
    checks.push((d5 <= 0.0, format!("rho=0.5: PR path {} change {d5:+.4}", fmt_path(&p5))));
    Ok(result("8", "iterative dynamics", checks))
}

fn c9c(dir: &Path, tol: &Tolerances) -> Result<CriterionResult> {
    let plain = Trajectories::load(dir, ExperimentKind::Iterative)?;
    let gulm = Trajectories::load(dir, ExperimentKind::IterativeGulm)?;
    let mut checks = Vec::new();
    for rho in gulm.rhos() {
        let p = gulm.path(rho)?;
        let d = p[p.len() - 1] - p[0];
        if rho <= 0.65 + 1e-9 {
            checks.push((d.abs() <= tol.gulm_flat, format!("rho={rho}: GULM change {d:+.4}")));
        } else if rho >= 0.8 - 1e-9 {
            let q = plain.path(rho)?;
            let dn = q[q.len() - 1] - q[0];
            checks.push((
                d < tol.gulm_ratio * dn,
                format!("rho={rho}: GULM increase {d:+.4} < {} x plain {dn:+.4}", tol.gulm_ratio),
            ));
        }
    }
    Ok(result("9c", "iterative with GULM", checks))
}

/// Reference cells for the gender/genre table: (group, category, bias_in, bias_out, bias_disparity).
pub const TABLE_UNBALANCED: [(&str, &str, f64, f64, f64); 4] = [
    ("M", "Action", 1.39, 1.67, 0.2),
    ("M", "Romance", 0.58, 0.28, -0.51),
    ("F", "Action", 0.97, 1.14, 0.17),
    ("F", "Romance", 1.03, 0.85, -0.17),
];

pub const TABLE_BALANCED: [(&str, &str, f64, f64, f64); 4] = [
    ("M", "Action", 1.40, 1.66, 0.18),
    ("M", "Romance", 0.57, 0.29, -0.49),
    ("F", "Action", 0.97, 1.08, 0.11),
    ("F", "Romance", 1.03, 0.92, -0.10),
];

fn named_cells(dir: &Path, kind: ExperimentKind) -> Result<BTreeMap<(String, String), [Option<f64>; 3]>> {
    let t = CsvTable::read(&dir.join(format!("{kind}.csv")))?;
    let cols = [
        t.column("group")?,
        t.column("category")?,
        t.column("bias_in")?,
        t.column("bias_out")?,
        t.column("bias_disparity")?,
    ];
    Ok(t.rows
        .iter()
        .map(|r| {
            (
                (r[cols[0]].clone(), r[cols[1]].clone()),
                [parse_opt(&r[cols[2]]), parse_opt(&r[cols[3]]), parse_opt(&r[cols[4]])],
            )
        })
        .collect())
}

fn c10(dir: &Path, tol: &Tolerances) -> Result<CriterionResult> {
    let summary = CsvTable::read(&dir.join(format!("{}_summary.csv", ExperimentKind::MovielensTable)))?;
    let (mc, vc) = (summary.column("metric")?, summary.column("value")?);
    let mut checks = Vec::new();
    for (name, expected) in MOVIELENS_REFERENCE.iter().take(3) {
        let got = summary.rows.iter().find(|r| r[mc] == *name).map(|r| r[vc].clone());
        checks.push((
            got.as_deref() == Some(&expected.to_string()),
            format!("{name} {} (expected {expected})", got.unwrap_or_else(|| "missing".into())),
        ));
    }

    let sign_ok = |bd: Option<f64>, reference: f64| bd.is_some_and(|v| v.signum() == reference.signum() && v != 0.0);
    let cells = named_cells(dir, ExperimentKind::MovielensTable)?;
    for (g, c, bi, bo, bd) in TABLE_UNBALANCED {
        let Some(&[mi, mo, md]) = cells.get(&(g.to_string(), c.to_string())) else {
            checks.push((false, format!("{g}/{c} missing")));
            continue;
        };
        let close = |m: Option<f64>, r: f64, t: f64| m.is_some_and(|v| (v - r).abs() <= t);
        let in_tol = if (g, c) == ("M", "Action") { tol.ml_input_tol } else { tol.ml_bias_tol };
        checks.push((
            close(mi, bi, in_tol) && close(mo, bo, tol.ml_bias_tol) && sign_ok(md, bd),
            format!(
                "{g}/{c}: {}/{} ({}) vs {bi}/{bo} ({bd})",
                show(mi),
                show(mo),
                show(md)
            ),
        ));
    }
    let balanced = named_cells(dir, ExperimentKind::MovielensBalanced)?;
    for (g, c, _, _, bd) in TABLE_BALANCED {
        let md = balanced.get(&(g.to_string(), c.to_string())).and_then(|v| v[2]);
        checks.push((sign_ok(md, bd), format!("balanced {g}/{c}: BD {} vs {bd}", show(md))));
    }
    Ok(result("10", "MovieLens gender/genre table", checks))
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{v:.3}"))
}

type Check = fn(&Path, &Tolerances) -> Result<CriterionResult>;

const CHECKS: [(&str, &str, Check); 8] = [
    ("3", "symmetric sweep", c3),
    ("4", "candidate set less biased", c4),
    ("5", "asymmetric sweep", c5),
    ("6", "group-size sweep", c6),
    ("7", "category-size sweep", c7),
    ("8", "iterative dynamics", c8),
    ("9c", "iterative with GULM", c9c),
    ("10", "MovieLens gender/genre table", c10),
];

/// Ids of the criteria checked from run outputs.
pub fn criterion_ids() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

/// Checks one criterion. A missing run is an error, not a failure.
pub fn check(dir: &Path, id: &str, tol: &Tolerances) -> Result<CriterionResult> {
    let (_, _, f) = CHECKS
        .iter()
        .find(|c| c.0 == id)
        .ok_or_else(|| Error::Config(format!("unknown criterion `{id}`")))?;
    f(dir, tol)
}

/// Checks every criterion whose runs are present; missing runs are reported as failures.
pub fn validate_acceptance(dir: &Path, tol: &Tolerances) -> Vec<CriterionResult> {
    CHECKS
        .iter()
        .map(|(id, name, f)| {
            f(dir, tol).unwrap_or_else(|e| CriterionResult {
                id: id.to_string(),
                name: name.to_string(),
                passed: false,
                detail: format!("!! {e}"),
            })
        })
        .collect()
}
