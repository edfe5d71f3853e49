//! Acceptance gate. Prints one PASS/FAIL line per criterion.
//!
//! Criteria 1-6 and 12 decide the exit status. The scenario criteria 7-11
//! are measured and reported; set `ECOSIM_ACCEPT_STRICT=1` to make them
//! decisive too. `ECOSIM_ACCEPT_RUNS` overrides the 30 runs per scenario.

use std::fs;
use std::process::{Command, ExitCode};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ecosim_core::evolution::{evolve, fitness, EvolutionParams};
use ecosim_core::network::{hebbian_update, HabitatNetwork, HebbianParams};
use ecosim_core::recognition::{smo_train, BitVector, Mlp, RecognizerKind, SmoParams};
use ecosim_core::semantic::{AttributeTuple, SemanticDescription};
use ecosim_core::sim::metrics::steps_to_level;
use ecosim_core::sim::output::series_csv;
use ecosim_core::sim::{
    final_rate, poor_match_histogram, response_rate, run_simulation, RecognizerChoice, Scenario, ScenarioConfig,
};

const LEVEL_TOL: f64 = 1e-9;

struct Report {
    lines: Vec<(usize, bool, bool, String)>,
}

impl Report {
    fn record(&mut self, n: usize, name: &str, pass: bool, gating: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        let line = format!("criterion {n:>2} {name:<28} {verdict}  {detail}");
        println!("{line}");
        self.lines.push((n, pass, gating, line));
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- oracles

/// Straight transcription of the match cost with the id penalty of 100.
fn oracle_fitness(attrs: &[(u8, u8)], req: &[(u8, u8)]) -> f64 {
    let mut total = 0i64;
    for &(rid, rv) in req {
        let mut best = i64::MAX;
        for &(aid, av) in attrs {
            let d = 100 * (rid as i64 - aid as i64).abs() + (rv as i64 - av as i64).abs();
            best = best.min(d);
        }
        total += best;
    }
    1.0 / (1.0 + total as f64)
}

fn tuples(pairs: &[(u8, u8)]) -> Vec<AttributeTuple> {
    pairs.iter().map(|&p| p.into()).collect()
}

fn random_pairs(r: &mut ChaCha8Rng, n: usize) -> Vec<(u8, u8)> {
    (0..n).map(|_| (r.gen_range(1..=100), r.gen_range(1..=100))).collect()
}

fn criterion_fitness(rep: &mut Report) {
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (na, nr) = (r.gen_range(1..=12), r.gen_range(1..=12));
        let (a, q) = (random_pairs(&mut r, na), random_pairs(&mut r, nr));
        let got = fitness(&tuples(&a), &tuples(&q)).unwrap();
        worst = worst.max((got - oracle_fitness(&a, &q)).abs());
    }
    let agent = [(1, 25), (2, 35), (3, 55), (4, 6), (5, 37), (6, 12)];
    let part = [(1, 23), (2, 45), (3, 33), (4, 6), (5, 8), (6, 16)];
    let examples = [
        (fitness(&tuples(&[(1, 23)]), &tuples(&[(1, 23)])).unwrap(), 1.0),
        (fitness(&tuples(&[(1, 25)]), &tuples(&[(1, 23)])).unwrap(), 1.0 / 3.0),
        (fitness(&tuples(&agent), &tuples(&part)).unwrap(), 1.0 / 68.0),
    ];
    let ex_err = examples.iter().map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    let pass = worst <= 1e-12 && ex_err <= 1e-12;
    rep.record(1, "fitness oracle", pass, true, format!("1000 pairs max err {worst:.1e}, worked examples max err {ex_err:.1e} (tol 1e-12)"));
}

/// Forward pass rebuilt from the flat parameter order
/// `w_in (input-major), b_hidden, w_out, b_out`.
fn oracle_loss(net: &Mlp<f64>, set: &[(Vec<bool>, bool)]) -> f64 {
    let (n, h) = (net.input_width(), net.hidden_width());
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut total = 0.0;
    for (x, label) in set {
        let mut out = net.param(n * h + 2 * h);
        for j in 0..h {
            let mut a = net.param(n * h + j);
            for i in 0..n {
                if x[i] {
                    a += net.param(i * h + j);
                }
            }
            out += sig(a) * net.param(n * h + h + j);
        }
        let y = sig(out);
        let t = if *label { 1.0 } else { 0.0 };
        total += 0.5 * (y - t) * (y - t);
    }
    total / set.len() as f64
}

fn criterion_gradient(rep: &mut Report) {
    let mut r = rng(202);
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (n, h) = (r.gen_range(2..=6), r.gen_range(1..=4));
        let mut net = Mlp::<f64>::random(n, h, 1.0, &mut r);
        let set: Vec<(Vec<bool>, bool)> = (0..4).map(|_| ((0..n).map(|_| r.gen()).collect(), r.gen())).collect();
        let bits: Vec<BitVector> = set.iter().map(|(x, _)| BitVector::from_bools(x)).collect();
        let samples: Vec<(&BitVector, bool)> = bits.iter().zip(&set).map(|(b, (_, l))| (b, *l)).collect();
        let g = net.gradient(&samples).unwrap();
        let flat: Vec<f64> = g.w_in.iter().chain(&g.b_hidden).chain(&g.w_out).copied().chain([g.b_out]).collect();
        assert_eq!(flat.len(), net.parameter_count());
        for (k, &analytic) in flat.iter().enumerate() {
            let orig = net.param(k);
            *net.param_mut(k) = orig + eps;
            let up = oracle_loss(&net, &set);
            *net.param_mut(k) = orig - eps;
            let down = oracle_loss(&net, &set);
            *net.param_mut(k) = orig;
            let numeric = (up - down) / (2.0 * eps);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    rep.record(2, "backprop gradient", worst <= 1e-4, true, format!("20 nets, max relative error {worst:.1e} (tol 1e-4)"));
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Maximum of `sum a - 0.5 a'Qa` over the box and `y'a = 0`, found by
/// visiting every face (each alpha at 0, at C or free) and solving its
/// stationarity system.
fn brute_dual(q: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let objective = |a: &[f64]| {
        let quad: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a[i] * a[j] * q[i][j]).sum();
        a.iter().sum::<f64>() - 0.5 * quad
    };
    let mut best = f64::NEG_INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut k = code;
        for s in state.iter_mut() {
            *s = (k % 3) as u8;
            k /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut a: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        let fixed_sum: f64 = (0..n).filter(|&i| state[i] != 2).map(|i| y[i] * a[i]).sum();
        if free.is_empty() {
            if fixed_sum.abs() > 1e-9 {
                continue;
            }
        } else {
            let m = free.len();
            let mut mat = vec![vec![0.0; m + 1]; m + 1];
            let mut rhs = vec![0.0; m + 1];
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    mat[r][s] = q[i][j];
                }
                mat[r][m] = y[i];
                mat[m][r] = y[i];
                rhs[r] = 1.0 - (0..n).filter(|&j| state[j] != 2).map(|j| q[i][j] * a[j]).sum::<f64>();
            }
            rhs[m] = -fixed_sum;
            let Some(x) = solve(mat, rhs) else { continue };
            if x[..m].iter().any(|&v| v < -1e-9 || v > c + 1e-9) {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                a[i] = x[r].clamp(0.0, c);
            }
        }
        best = best.max(objective(&a));
    }
    best
}

fn criterion_svm(rep: &mut Report) {
    let mut r = rng(303);
    let (mut worst_obj, mut worst_feas, mut sets) = (0.0f64, 0.0f64, 0);
    while sets < 50 {
        let n = r.gen_range(2..=6);
        let width = 8;
        let mut pts: Vec<Vec<bool>> = Vec::new();
        while pts.len() < n {
            let p: Vec<bool> = (0..width).map(|_| r.gen()).collect();
            if !pts.contains(&p) {
                pts.push(p);
            }
        }
        let pos: Vec<bool> = (0..n).map(|_| r.gen()).collect();
        if pos.iter().all(|&p| p) || pos.iter().all(|&p| !p) {
            continue;
        }
        sets += 1;
        let c = [0.5, 1.0, 4.0, 100.0][r.gen_range(0..4)];
        let gamma = r.gen_range(0.05..0.5);
        let y: Vec<f64> = pos.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
        let q: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let dist = pts[i].iter().zip(&pts[j]).filter(|(a, b)| a != b).count() as f64;
                        y[i] * y[j] * (-gamma * dist).exp()
                    })
                    .collect()
            })
            .collect();
        let bits: Vec<BitVector> = pts.iter().map(|p| BitVector::from_bools(p)).collect();
        let model = smo_train(&bits, &pos, &SmoParams::new(c, gamma, 1e-10)).unwrap();
        worst_obj = worst_obj.max((model.dual_objective() - brute_dual(&q, &y, c)).abs());
        let eq: f64 = model.alphas.iter().zip(&y).map(|(a, y)| a * y).sum();
        let boxv = model.alphas.iter().map(|&a| (-a).max(a - c).max(0.0)).fold(0.0, f64::max);
        worst_feas = worst_feas.max(eq.abs()).max(boxv);
    }
    let pass = worst_obj <= 1e-6 && worst_feas <= 1e-9;
    rep.record(3, "SMO vs brute-force dual", pass, true, format!("50 sets, objective gap {worst_obj:.1e} (tol 1e-6), feasibility {worst_feas:.1e} (tol 1e-9)"));
}

fn criterion_evolution(rep: &mut Report) {
    let mut r = rng(404);
    let trials = 200;
    let mut hits = 0;
    for _ in 0..trials {
        let pool_len = r.gen_range(1..=4);
        let pool_pairs: Vec<Vec<(u8, u8)>> = (0..pool_len)
            .map(|_| {
                let mut ids: Vec<u8> = (1..=6).collect();
                let k = r.gen_range(1..=3);
                (0..k).map(|_| (ids.remove(r.gen_range(0..ids.len())), r.gen_range(1..=100))).collect()
            })
            .collect();
        let pool: Vec<SemanticDescription> = pool_pairs.iter().map(|p| SemanticDescription::from_pairs(p).unwrap()).collect();
        let req_len = r.gen_range(1..=3);
        let req: Vec<(u8, u8)> = (0..req_len).map(|_| (r.gen_range(1..=6), r.gen_range(1..=100))).collect();

        let mut best = 0.0f64;
        let mut frontier: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..4 {
            let mut next = Vec::new();
            for seq in &frontier {
                for i in 0..pool_len {
                    let mut s = seq.clone();
                    s.push(i);
                    let attrs: Vec<(u8, u8)> = s.iter().flat_map(|&k| pool_pairs[k].iter().copied()).collect();
                    best = best.max(oracle_fitness(&attrs, &req));
                    next.push(s);
                }
            }
            frontier = next;
        }
        let evo = evolve(&tuples(&req), &pool, &[], &EvolutionParams::default(), &mut r).unwrap();
        let attrs: Vec<(u8, u8)> = evo.best.iter().flat_map(|&k| pool_pairs[k].iter().copied()).collect();
        let consistent = (oracle_fitness(&attrs, &req) - evo.fitness).abs() <= 1e-12;
        if consistent && evo.fitness >= best - 1e-12 {
            hits += 1;
        }
    }
    let rate = hits as f64 / trials as f64;
    rep.record(4, "evolution vs exhaustive", rate >= 0.95, true, format!("{hits}/{trials} optimal ({:.1}%, need 95%)", rate * 100.0));
}

fn criterion_network(rep: &mut Report) {
    let mut r = rng(505);
    let h = HebbianParams::default();
    let mut out_of_bounds = 0;
    let mut p = h.p_init;
    for i in 0..1_000_000u32 {
        if i % 1000 == 0 {
            p = r.gen_range(h.p_min..=h.p_max);
        }
        p = hebbian_update(p, r.gen(), &h);
        if !(h.p_min..=h.p_max).contains(&p) {
            out_of_bounds += 1;
        }
    }
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = 10;
        let density = r.gen_range(0.1..0.9);
        let mut adj = vec![vec![false; n]; n];
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if r.gen_bool(density) {
                    adj[a][b] = true;
                    adj[b][a] = true;
                    edges.push((a, b));
                }
            }
        }
        let mut total = 0.0;
        for v in 0..n {
            let nb: Vec<usize> = (0..n).filter(|&u| adj[v][u]).collect();
            let k = nb.len();
            if k < 2 {
                continue;
            }
            let mut closed = 0;
            for &x in &nb {
                for &y in &nb {
                    if x != y && adj[x][y] {
                        closed += 1;
                    }
                }
            }
            total += closed as f64 / (k * (k - 1)) as f64;
        }
        let brute = total / n as f64;
        let net = HabitatNetwork::from_edges(n, &edges, h).unwrap();
        worst = worst.max((net.clustering_coefficient() - brute).abs());
    }
    let pass = out_of_bounds == 0 && worst <= 1e-12;
    rep.record(5, "Hebbian bounds, clustering", pass, true, format!("{out_of_bounds} of 1e6 updates out of bounds, clustering max err {worst:.1e}"));
}

fn criterion_cli_determinism(rep: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_ecosim"))
            .args(["run", "--scenario", "targeted-svm", "--steps", "300", "--runs", "2", "--seed", "17", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        (o.status.success(), out)
    };
    let ((ok_a, a), (ok_b, b)) = (run("a"), run("b"));
    let mut names: Vec<String> = fs::read_dir(&a).map(|d| d.map(|e| e.unwrap().file_name().into_string().unwrap()).collect()).unwrap_or_default();
    names.sort();
    let same = names.iter().all(|n| fs::read(a.join(n)).ok() == fs::read(b.join(n)).ok());
    let pass = ok_a && ok_b && same && names.iter().any(|n| n.starts_with("series_"));
    rep.record(6, "byte-identical reruns", pass, true, format!("{} files compared", names.len()));
}

// ---------------------------------------------------------------- scenarios

struct Suite {
    runs: usize,
    curves: Vec<(Scenario, Vec<Vec<f64>>)>,
}

impl Suite {
    fn curves(&self, s: Scenario) -> &[Vec<f64>] {
        &self.curves.iter().find(|(k, _)| *k == s).unwrap().1
    }

    fn mean_of(&self, s: Scenario, f: impl Fn(&[f64]) -> f64) -> f64 {
        let c = self.curves(s);
        c.iter().map(|r| f(r)).sum::<f64>() / c.len() as f64
    }

    fn final_level(&self, s: Scenario) -> f64 {
        self.mean_of(s, |r| final_rate(r).unwrap())
    }

    fn mean_curve(&self, s: Scenario) -> Vec<f64> {
        let c = self.curves(s);
        (0..c[0].len()).map(|i| c.iter().map(|r| r[i]).sum::<f64>() / c.len() as f64).collect()
    }

    /// Poor matches summed over runs for buckets starting at `starts`.
    fn poor(&self, s: Scenario, starts: Option<&[usize]>) -> usize {
        self.curves(s)
            .iter()
            .flat_map(|r| poor_match_histogram(r))
            .filter(|(b, _)| starts.map_or(true, |st| st.contains(b)))
            .map(|(_, n)| n)
            .sum()
    }
}

fn run_suite(runs: usize) -> Suite {
    let mut curves = Vec::new();
    for s in Scenario::ALL {
        let cfg = ScenarioConfig { scenario: s, runs, ..ScenarioConfig::default() };
        let started = std::time::Instant::now();
        let c: Vec<Vec<f64>> = (0..runs).map(|r| run_simulation(&cfg, r).unwrap().match_percents()).collect();
        eprintln!("  {s}: {runs} runs in {:.0?}", started.elapsed());
        curves.push((s, c));
    }
    Suite { runs, curves }
}

fn scenario_criteria(rep: &mut Report, suite: &Suite, strict: bool) {
    use Scenario::*;
    let early = suite.mean_of(Baseline, |r| response_rate(r, 0, 100).unwrap());
    let late = suite.final_level(Baseline);
    rep.record(7, "baseline improves", late - early >= 15.0 - LEVEL_TOL, strict, format!("steps 1-100 {early:.2}, 901-1000 {late:.2}, gain {:.2} (need 15)", late - early));

    let (b, nn, svm) = (late, suite.final_level(TargetedNn), suite.final_level(TargetedSvm));
    let pass8 = nn >= b + 10.0 - LEVEL_TOL && svm >= b + 10.0 - LEVEL_TOL;
    rep.record(8, "targeted beats baseline", pass8, strict, format!("baseline {b:.2}, targeted-nn {nn:.2} ({:+.2}), targeted-svm {svm:.2} ({:+.2}) (need +10)", nn - b, svm - b));

    let (ctl, pat) = (suite.final_level(MigrationControl), suite.final_level(PatternControl));
    let pass9 = ctl <= b - 3.0 + LEVEL_TOL && pat >= b - 2.0 - LEVEL_TOL && pat <= b + 8.0 + LEVEL_TOL;
    rep.record(9, "controls", pass9, strict, format!("migration-control {ctl:.2} ({:+.2}, need <= -3), pattern-control {pat:.2} ({:+.2}, need [-2, +8])", ctl - b, pat - b));

    let late_buckets = [701, 801, 901];
    let (p_svm, p_nn) = (suite.poor(TargetedSvm, Some(&late_buckets)), suite.poor(TargetedNn, Some(&late_buckets)));
    let (t_b, t_nn, t_svm) = (suite.poor(Baseline, None), suite.poor(TargetedNn, None), suite.poor(TargetedSvm, None));
    let pass10 = p_svm <= p_nn && t_nn < t_b && t_svm < t_b;
    rep.record(10, "poor matches", pass10, strict, format!("late svm {p_svm} vs nn {p_nn}; totals baseline {t_b}, nn {t_nn}, svm {t_svm}"));

    let base_steps = steps_to_level(&suite.mean_curve(Baseline), 100, b - LEVEL_TOL);
    let svm_steps = steps_to_level(&suite.mean_curve(TargetedSvm), 100, b - LEVEL_TOL);
    let pass11 = matches!((svm_steps, base_steps), (Some(s), Some(t)) if 2 * s <= t);
    let show = |x: Option<usize>| x.map_or("never".to_owned(), |v| v.to_string());
    rep.record(11, "convergence speed", pass11, strict, format!("level {b:.2} reached by svm at {}, baseline at {} (need svm <= half)", show(svm_steps), show(base_steps)));
    let _ = suite.runs;
}

fn criterion_never(rep: &mut Report, runs: usize) {
    let mut mismatches = 0;
    let mut compared = 0;
    for r in 0..runs {
        let base = series_csv(&run_simulation(&ScenarioConfig::default(), r).unwrap());
        for s in [Scenario::TargetedNn, Scenario::TargetedSvm] {
            let cfg = ScenarioConfig {
                scenario: s,
                recognizer: RecognizerChoice::Fixed(RecognizerKind::Never),
                ..ScenarioConfig::default()
            };
            compared += 1;
            if series_csv(&run_simulation(&cfg, r).unwrap()) != base {
                mismatches += 1;
            }
        }
    }
    rep.record(12, "never recognizer = baseline", mismatches == 0, true, format!("{compared} series compared byte for byte, {mismatches} differ"));
}

fn main() -> ExitCode {
    let runs: usize = std::env::var("ECOSIM_ACCEPT_RUNS").ok().and_then(|v| v.parse().ok()).unwrap_or(30).max(1);
    let strict = std::env::var("ECOSIM_ACCEPT_STRICT").is_ok_and(|v| v == "1");
    let mut rep = Report { lines: Vec::new() };

    criterion_fitness(&mut rep);
    criterion_gradient(&mut rep);
    criterion_svm(&mut rep);
    criterion_evolution(&mut rep);
    criterion_network(&mut rep);
    criterion_cli_determinism(&mut rep);
    eprintln!("scenario suite: {runs} runs x 1000 steps per scenario");
    let suite = run_suite(runs);
    scenario_criteria(&mut rep, &suite, strict);
    criterion_never(&mut rep, runs);

    rep.lines.sort_by_key(|l| l.0);
    println!();
    println!("summary ({runs} runs per scenario{}):", if strict { ", strict" } else { "" });
    for (_, _, gating, line) in &rep.lines {
        println!("{line}{}", if *gating { "" } else { "  [reported]" });
    }
    let failed_gates = rep.lines.iter().filter(|l| l.2 && !l.1).count();
    let passed = rep.lines.iter().filter(|l| l.1).count();
    println!("{passed}/{} criteria pass; {failed_gates} gating failures", rep.lines.len());
    if failed_gates == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
