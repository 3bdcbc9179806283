//! Built-in self-checks run by `poro verify`: tensor oracles, the isotropic
//! Skempton reduction, the iteration ledger on the canonical elastic case,
//! the decoupled limit, a plastic run and a manufactured-solution refinement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cases::{self, Manufactured, Variant};
use crate::coupling::run_transient;
use crate::material::{skempton_tensor, storage_constant, MaterialModel};
use crate::par::ExecPolicy;
use crate::tensor::{SymTensor2, Tensor4, MANDEL_PAIRS};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

type Suite = fn(&mut Vec<Check>);

pub const SUITES: [(&str, Suite); 6] = [
    ("tensor", tensor_suite),
    ("skempton", skempton_suite),
    ("ledger", ledger_suite),
    ("decoupled", decoupled_suite),
    ("plasticity", plasticity_suite),
    ("refinement", refinement_suite),
];

/// Runs every suite whose name contains `filter` (all when `None`).
pub fn run(filter: Option<&str>) -> Vec<Check> {
    let mut out = Vec::new();
    for (name, suite) in SUITES {
        if filter.is_none_or(|f| name.contains(f)) {
            suite(&mut out);
        }
    }
    out
}

fn push(out: &mut Vec<Check>, suite: &'static str, name: &str, passed: bool, detail: String) {
    out.push(Check { suite, name: name.to_string(), passed, detail });
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

fn random_sym(rng: &mut ChaCha8Rng) -> SymTensor2 {
    SymTensor2::from_components(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    )
}

fn random_spd4(rng: &mut ChaCha8Rng) -> Tensor4 {
    let a = nalgebra::Matrix6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    Tensor4::from_mandel(a * a.transpose() + nalgebra::Matrix6::identity() * 2.0)
}

fn tensor_suite(out: &mut Vec<Check>) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (s, t) = (random_sym(&mut rng), random_sym(&mut rng));
        let p = random_spd4(&mut rng);
        // S:T, P:S and S⊗T against full index loops.
        let mut ddot = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                ddot += s.get(i, j) * t.get(i, j);
            }
        }
        worst = worst.max(rel(s.ddot(&t), ddot));
        let ps = p.apply(&s);
        for &(i, j) in &MANDEL_PAIRS {
            let mut v = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    v += p.get(i, j, k, l) * s.get(k, l);
                }
            }
            worst = worst.max((ps.get(i, j) - v).abs() / (1.0 + v.abs()));
        }
        let d = Tensor4::dyad(&s, &t);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        worst = worst.max((d.get(i, j, k, l) - s.get(i, j) * t.get(k, l)).abs());
                    }
                }
            }
        }
    }
    push(out, "tensor", "index-loop oracles (100 random instances)", worst <= 1e-13, format!("max relative error {worst:.2e}"));
}

fn skempton_suite(out: &mut Vec<Check>) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let e = rng.gen_range(1e8..1e10);
        let nu = rng.gen_range(0.05..0.45);
        let alpha = rng.gen_range(0.1..1.0);
        let m = rng.gen_range(1e8..1e10);
        let model = MaterialModel::isotropic(e, nu, alpha, m, 1e-12);
        let Ok(consts) = model.constants() else {
            push(out, "skempton", "isotropic reduction", false, "constants failed".into());
            return;
        };
        let c = storage_constant(&model).unwrap_or(f64::NAN);
        let b = skempton_tensor(&model, &consts.compliance, c);
        let kb = e / (3.0 * (1.0 - 2.0 * nu));
        let expect = alpha / (kb * c);
        for i in 0..3 {
            for j in 0..3 {
                let v = if i == j { expect } else { 0.0 };
                worst = worst.max((b.get(i, j) - v).abs() / expect);
            }
        }
    }
    push(out, "skempton", "B = α/(K_b C) I for 5 random sets", worst <= 1e-12, format!("max relative error {worst:.2e}"));
}

fn ledger_suite(out: &mut Vec<Check>) {
    for variant in [Variant::Isotropic, Variant::Orthotropic] {
        let mut case = match cases::canonical(variant, 4, 1e-12, 1, ExecPolicy::Parallel) {
            Ok(c) => c,
            Err(e) => return push(out, "ledger", "canonical case", false, e.to_string()),
        };
        let run = run_transient(&mut case.sim, &case.dts);
        if let Some(e) = run.error {
            return push(out, "ledger", case.name, false, e.to_string());
        }
        let closed = run.reports.iter().map(|r| r.ledger_residual).fold(0.0, f64::max);
        let stated = run.reports.iter().map(|r| r.ledger_residual_stated).fold(0.0, f64::max);
        push(out, "ledger", &format!("{}: closed iteration ledger", case.name), closed <= 1e-8, format!("max residual {closed:.2e}; without the algebraic correction terms {stated:.2e}"));
        let contraction = run.reports.iter().all(|r| r.contraction_holds(1e-8));
        let max_ratio = run.reports.iter().map(|r| r.ratio).fold(0.0, f64::max);
        push(out, "ledger", &format!("{}: contraction inequality", case.name), contraction, format!("max ratio {max_ratio:.3}"));
        let young = run.reports.iter().all(|r| r.young_holds(1e-12));
        let slack = run.reports.iter().map(|r| r.young_slack).fold(f64::INFINITY, f64::min);
        push(out, "ledger", &format!("{}: Young bound", case.name), young, format!("min slack {slack:.3e}"));
    }
}

fn decoupled_suite(out: &mut Vec<Check>) {
    let result = cases::decoupled(4, 1e-10, 2, ExecPolicy::Parallel).map(|mut case| run_transient(&mut case.sim, &case.dts));
    match result {
        Ok(run) if run.error.is_none() => {
            let iters: Vec<usize> = run.summaries.iter().map(|s| s.iterations).collect();
            push(out, "decoupled", "α = 0 converges in 2 iterations", iters.iter().all(|&i| i == 2), format!("{iters:?}"));
        }
        Ok(run) => push(out, "decoupled", "α = 0 run", false, format!("{:?}", run.error)),
        Err(e) => push(out, "decoupled", "α = 0 run", false, e.to_string()),
    }
}

fn plasticity_suite(out: &mut Vec<Check>) {
    let result = cases::plastic_canonical(3, 1e-12, 1, ExecPolicy::Parallel).map(|mut case| run_transient(&mut case.sim, &case.dts));
    match result {
        Ok(run) if run.error.is_none() => {
            let plastic = run.reports.iter().map(|r| r.plastic_points).max().unwrap_or(0);
            let closed = run.reports.iter().map(|r| r.ledger_residual).fold(0.0, f64::max);
            push(out, "plasticity", "Drucker–Prager run yields", plastic > 0, format!("{plastic} plastic points"));
            push(out, "plasticity", "closed ledger with plasticity", closed <= 1e-7, format!("max residual {closed:.2e}"));
        }
        Ok(run) => push(out, "plasticity", "Drucker–Prager run", false, format!("{:?}", run.error)),
        Err(e) => push(out, "plasticity", "Drucker–Prager run", false, e.to_string()),
    }
}

fn refinement_suite(out: &mut Vec<Check>) {
    let m = Manufactured::default();
    let mut errors = Vec::new();
    for n in [2, 4] {
        let result = m.case(n, 2, 1.0, 1e-10, ExecPolicy::Parallel).map(|mut case| {
            let run = run_transient(&mut case.sim, &case.dts);
            (run.error.map(|e| e.to_string()), run.states.last().map(|s| m.pressure_error(&case.sim, &s.p, s.time)))
        });
        match result {
            Ok((None, Some(e))) => errors.push(e),
            Ok((err, _)) => return push(out, "refinement", "manufactured run", false, format!("{err:?}")),
            Err(e) => return push(out, "refinement", "manufactured run", false, e.to_string()),
        }
    }
    let order = (errors[0] / errors[1]).log2();
    push(out, "refinement", "pressure error order 2³ → 4³", order >= 0.8, format!("errors {:.3e} / {:.3e}, order {order:.2}", errors[0], errors[1]));
}
