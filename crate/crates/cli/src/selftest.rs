//! Built-in acceptance checks run by `sion selftest`.
//!
//! Each check compares the solvers against an oracle computed here by other
//! means: printed closed forms, 2x2 linear systems, brute-force reference
//! evaluation.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sion_core::equilibrium::{
    slice_fn, solve_best_response, solve_fixed_point, verify_theorem1, verify_theorem2,
};
use sion_core::expr::{parse, Var};
use sion_core::oligopoly::{self, CournotProfits};
use sion_core::opt::saddle_check;
use sion_core::quadratic;
use sion_core::{
    GroupSpec, GroupedGame, Interval, IterationSettings, OligopolyParams, OptSettings, PlayerId,
    QuadraticSaddleParams, Relativized, Slice, StrategyProfile, SymmetricPoint, VerifySettings,
};

pub const DEFAULT_SELFTEST_SEED: u64 = 20240517;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {} ({:.3} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

type Check = fn(&mut Context) -> Result<String, String>;

/// State shared between checks.
struct Context {
    seed: u64,
    verified: Vec<(OligopolyParams, SymmetricPoint)>,
}

const CHECKS: [(u32, &str, Option<f64>, Check); 10] = [
    (1, "closed-form reproduction", Some(1.0), closed_form),
    (2, "saddle coincidence", Some(1.0), saddle_coincidence),
    (3, "maximin strategies form an equilibrium", Some(20.0), theorem1_sweep),
    (4, "fixed point of the maximin map is an equilibrium", Some(20.0), theorem2_sweep),
    (5, "weak duality", None, weak_duality),
    (6, "quadratic saddle oracle", None, quadratic_oracle),
    (7, "zero-sum and symmetry invariants", None, invariants),
    (8, "equilibrium payoff identity", None, payoff_identity),
    (9, "decoupling limit", None, decoupling),
    (10, "expression language", None, expressions),
];

/// Runs every check, writing one line per check to `out` as it completes.
pub fn run_selftest(seed: u64, out: &mut dyn Write) -> io::Result<Vec<Outcome>> {
    let mut ctx = Context {
        seed,
        verified: Vec::new(),
    };
    let mut outcomes = Vec::new();
    for (id, name, budget, check) in CHECKS {
        let t = Instant::now();
        let result = check(&mut ctx);
        let elapsed = t.elapsed();
        let (mut passed, mut detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        if let Some(limit) = budget {
            if elapsed.as_secs_f64() >= limit {
                passed = false;
                detail = format!("{detail}; exceeded the {limit} s budget");
            }
        }
        let outcome = Outcome {
            id,
            name,
            passed,
            detail,
            elapsed,
        };
        writeln!(out, "{}", outcome.line())?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Printed five-firm closed form.
fn printed_closed_form(a: f64, b: f64, c_a: f64, c_c: f64) -> (f64, f64) {
    let d = (1.0 - b) * (1.0 + b);
    ((b * c_c - c_a - a * b + a) / (3.0 * d), (b * c_a - c_c - a * b + a) / (2.0 * d))
}

fn solve_both(game: &GroupedGame) -> Result<[SymmetricPoint; 2], String> {
    let start = SymmetricPoint::midpoint(game);
    let (it, opt) = (IterationSettings::default(), OptSettings::default());
    let fp = solve_fixed_point(game, start, &it, &opt).map_err(err)?;
    let br = solve_best_response(game, start, &it, &opt).map_err(err)?;
    ensure(fp.converged && br.converged, || "a solver did not converge".into())?;
    Ok([fp.last(), br.last()])
}

fn closed_form(_: &mut Context) -> Result<String, String> {
    let (a, b, c_a, c_c) = (10.0, 0.5, 2.0, 1.0);
    let (s1, s2) = printed_closed_form(a, b, c_a, c_c);
    let game = oligopoly::build_game(&OligopolyParams::new(a, b, c_a, c_c), None).map_err(err)?;
    let mut worst = 0.0f64;
    for p in solve_both(&game)? {
        let err1 = (p.s1 - s1).abs().max((p.s2 - s2).abs());
        let price1 = a - 3.0 * p.s1 - 2.0 * b * p.s2;
        let price2 = a - 2.0 * p.s2 - 3.0 * b * p.s1;
        let err2 = (price1 - c_a).abs().max((price2 - c_c).abs());
        ensure(err1 <= 1e-4 && err2 <= 1e-4, || {
            format!("solver limit ({}, {}) vs ({s1}, {s2}), prices ({price1}, {price2})", p.s1, p.s2)
        })?;
        worst = worst.max(err1);
    }
    Ok(format!("s = ({s1:.6}, {s2:.6}), max solver error {worst:.1e}"))
}

fn saddle_coincidence(_: &mut Context) -> Result<String, String> {
    let (s1, s2) = printed_closed_form(10.0, 0.5, 2.0, 1.0);
    let game = oligopoly::build_game(&OligopolyParams::new(10.0, 0.5, 2.0, 1.0), None).map_err(err)?;
    let base = SymmetricPoint::new(s1, s2).profile(game.groups());
    let slices = [
        ("A,B", Slice::G1, s1),
        ("C,D", Slice::G2, s2),
        ("A,E", Slice::new(PlayerId::A, PlayerId::A, PlayerId::E), s1),
    ];
    let mut worst_gap = 0.0f64;
    for (label, slice, want) in slices {
        let space = game.space(slice.x.group);
        let r = saddle_check(slice_fn(&game, slice, &base), space, space, &OptSettings::default(), 1e-4)
            .map_err(err)?;
        ensure(
            r.gap.abs() <= 1e-5
                && (r.maximin_arg - want).abs() <= 1e-4
                && (r.minimax_arg - want).abs() <= 1e-4,
            || format!("({label}): {r:?} vs {want}"),
        )?;
        worst_gap = worst_gap.max(r.gap.abs());
    }
    Ok(format!("3 slices, max gap {worst_gap:.1e}"))
}

/// Seed-fixed parameter draws with strictly positive equilibrium outputs.
fn sweep(seed: u64) -> Vec<OligopolyParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < 20 {
        let a = rng.gen_range(5.0..20.0);
        let b = rng.gen_range(0.0..0.9);
        let p = OligopolyParams::new(a, b, rng.gen_range(0.0..a), rng.gen_range(0.0..a));
        let (s1, s2) = printed_closed_form(p.a, p.b, p.c_a, p.c_c);
        if p.validate().is_ok() && s1 > 0.05 && s2 > 0.05 {
            out.push(p);
        }
    }
    out
}

fn theorem1_sweep(ctx: &mut Context) -> Result<String, String> {
    let settings = VerifySettings::default();
    ctx.verified.clear();
    for p in sweep(ctx.seed) {
        let game = oligopoly::build_game(&p, None).map_err(err)?;
        let br = solve_best_response(
            &game,
            SymmetricPoint::midpoint(&game),
            &IterationSettings::default(),
            &OptSettings::default(),
        )
        .map_err(err)?;
        ensure(br.converged, || format!("{p:?}: best response did not converge"))?;
        let r = verify_theorem1(&game, br.last(), &settings).map_err(|e| format!("{p:?}: {e}"))?;
        ensure(r.verified == Some(true), || format!("{p:?}: {r:?}"))?;
        ctx.verified.push((p, r.point));
    }
    Ok("20 draws verified".into())
}

fn theorem2_sweep(ctx: &mut Context) -> Result<String, String> {
    let settings = VerifySettings::default();
    let mut max_gap = 0.0f64;
    for p in sweep(ctx.seed) {
        let game = oligopoly::build_game(&p, None).map_err(err)?;
        let fp = solve_fixed_point(
            &game,
            SymmetricPoint::midpoint(&game),
            &IterationSettings::default(),
            &OptSettings::default(),
        )
        .map_err(err)?;
        let r = verify_theorem2(&game, &fp, &settings).map_err(|e| format!("{p:?}: {e}"))?;
        ensure(r.is_nash && r.verified == Some(true), || format!("{p:?}: {r:?}"))?;
        max_gap = max_gap.max(r.max_gap);
        ctx.verified.push((p, r.point));
    }
    Ok(format!("20 draws, max deviation gain {max_gap:.1e}"))
}

/// `-alpha x^2 + beta y^2 + gamma x y + dx x + dy y`.
fn quad(c: [f64; 5]) -> impl Fn(f64, f64) -> f64 {
    move |x, y| -c[0] * x * x + c[1] * y * y + c[2] * x * y + c[3] * x + c[4] * y
}

fn weak_duality(ctx: &mut Context) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 5);
    let sq = Interval::new(-1.0, 1.0).map_err(err)?;
    for _ in 0..100 {
        let c: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
        let r = saddle_check(quad(c), sq, sq, &OptSettings::default(), 1e-4).map_err(err)?;
        let scale = r.maximin_value.abs().max(r.minimax_value.abs()).max(1.0);
        ensure(r.maximin_value <= r.minimax_value + 1e-9 * scale, || format!("{c:?}: {r:?}"))?;
    }
    Ok("100 games".into())
}

fn quadratic_oracle(ctx: &mut Context) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 6);
    let sq = Interval::new(-1.0, 1.0).map_err(err)?;
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 50 {
        let (alpha, beta): (f64, f64) = (rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0));
        let gamma: f64 = rng.gen_range(-2.0..2.0);
        let (dx, dy): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        // -2 alpha x + gamma y = -dx, gamma x + 2 beta y = -dy
        let det = -4.0 * alpha * beta - gamma * gamma;
        let xs = (-dx * 2.0 * beta + gamma * dy) / det;
        let ys = (-2.0 * alpha * -dy - gamma * -dx) / det;
        if xs.abs() > 0.9 || ys.abs() > 0.9 {
            continue;
        }
        let r = saddle_check(quad([alpha, beta, gamma, dx, dy]), sq, sq, &OptSettings::default(), 1e-4)
            .map_err(err)?;
        let e = (r.maximin_arg - xs).abs().max((r.minimax_arg - ys).abs());
        ensure(e <= 1e-6, || format!("({xs}, {ys}) vs {r:?}"))?;
        worst = worst.max(e);
        done += 1;
    }
    Ok(format!("50 saddles, max arg error {worst:.1e}"))
}

fn invariants(ctx: &mut Context) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 7);
    let groups = GroupSpec::five_player();
    let space = Interval::new(0.0, 10.0).map_err(err)?;
    let games = [
        (
            "oligopoly",
            GroupedGame::new(
                groups,
                space,
                space,
                Relativized(CournotProfits(OligopolyParams::new(10.0, 0.5, 2.0, 1.0))),
            ),
        ),
        (
            "quadratic_saddle",
            quadratic::build_game(&QuadraticSaddleParams::default(), space, space).map_err(err)?,
        ),
    ];
    let pairs = [
        (PlayerId::A, PlayerId::B),
        (PlayerId::A, PlayerId::E),
        (PlayerId::B, PlayerId::E),
        (PlayerId::C, PlayerId::D),
    ];
    for (name, game) in &games {
        for _ in 0..1000 {
            let p = StrategyProfile::new(
                (0..3).map(|_| rng.gen_range(0.0..=10.0)).collect(),
                (0..2).map(|_| rng.gen_range(0.0..=10.0)).collect(),
            );
            let scale = groups.players().map(|q| game.payoff(q, &p).abs()).fold(1.0, f64::max);
            let z = game.check_group_zero_sum(&p, 1e-9 * scale).map_err(err)?;
            ensure(z.holds, || format!("{name}: {z:?} at {p:?}"))?;
            for (i, j) in pairs {
                let ok = game.check_group_symmetry(&p, i, j, 1e-9).map_err(err)?;
                ensure(ok, || format!("{name}: swap {i} {j} at {p:?}"))?;
            }
        }
    }
    Ok("1000 profiles per family".into())
}

fn payoff_identity(ctx: &mut Context) -> Result<String, String> {
    ensure(!ctx.verified.is_empty(), || "no verified equilibria from checks 3 and 4".into())?;
    let mut worst = 0.0f64;
    for (params, point) in &ctx.verified {
        let game = oligopoly::build_game(params, None).map_err(err)?;
        let profile = point.profile(game.groups());
        for q in game.groups().players() {
            worst = worst.max(game.payoff(q, &profile).abs());
        }
    }
    ensure(worst <= 1e-6, || format!("max |payoff| {worst:e}"))?;
    Ok(format!("{} equilibria, max |payoff| {worst:.1e}", ctx.verified.len()))
}

fn decoupling(_: &mut Context) -> Result<String, String> {
    let (a, c_a, c_c) = (10.0, 2.0, 1.0);
    let game = oligopoly::build_game(&OligopolyParams::new(a, 0.0, c_a, c_c), None).map_err(err)?;
    let want = ((a - c_a) / 3.0, (a - c_c) / 2.0);
    for p in solve_both(&game)? {
        ensure((p.s1 - want.0).abs() <= 1e-4 && (p.s2 - want.1).abs() <= 1e-4, || {
            format!("({}, {}) vs {want:?}", p.s1, p.s2)
        })?;
    }
    Ok(format!("s = ({:.6}, {:.6})", want.0, want.1))
}

/// Documented precedence and associativity vector, evaluated at
/// `x = (2, 2, 2)`, `y = (3, 3)`.
pub const PRECEDENCE_VECTOR: [(&str, f64); 10] = [
    ("1 + 2 * 3", 7.0),
    ("(1 + 2) * 3", 9.0),
    ("8 - 3 - 2", 3.0),
    ("8 / 4 / 2", 1.0),
    ("2^3^2", 512.0),
    ("-2^2", -4.0),
    ("2^-1", 0.5),
    ("-x1 * y1", -6.0),
    ("x1 * y2 - x3 / 4", 5.5),
    ("1.5e1 + .5", 15.5),
];

#[derive(Debug, Clone)]
enum Tree {
    Num(u32),
    X(usize),
    Y(usize),
    Neg(Box<Tree>),
    Bin(char, Box<Tree>, Box<Tree>),
}

impl Tree {
    fn random(rng: &mut ChaCha8Rng, depth: u32) -> Tree {
        let leaf = depth == 0 || rng.gen_bool(0.3);
        if leaf {
            return match rng.gen_range(0..3) {
                0 => Tree::Num(rng.gen_range(0..100)),
                1 => Tree::X(rng.gen_range(0..3)),
                _ => Tree::Y(rng.gen_range(0..2)),
            };
        }
        if rng.gen_bool(0.15) {
            return Tree::Neg(Box::new(Tree::random(rng, depth - 1)));
        }
        let op = ['+', '-', '*', '/', '^'][rng.gen_range(0..5)];
        Tree::Bin(
            op,
            Box::new(Tree::random(rng, depth - 1)),
            Box::new(Tree::random(rng, depth - 1)),
        )
    }

    fn render(&self) -> String {
        match self {
            Tree::Num(v) => v.to_string(),
            Tree::X(i) => format!("x{}", i + 1),
            Tree::Y(i) => format!("y{}", i + 1),
            Tree::Neg(e) => format!("(-{})", e.render()),
            Tree::Bin(op, l, r) => format!("({} {op} {})", l.render(), r.render()),
        }
    }
}

fn expressions(ctx: &mut Context) -> Result<String, String> {
    let groups = GroupSpec::five_player();
    let none = BTreeMap::new();
    let profile = StrategyProfile::symmetric(groups, 2.0, 3.0);
    for (src, want) in PRECEDENCE_VECTOR {
        let got = parse(src, groups, &none).map_err(err)?.evaluate(&profile).map_err(err)?;
        ensure(got.to_bits() == want.to_bits(), || format!("'{src}' gave {got}, want {want}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 10);
    let lookup = |v: Var| match v {
        Var::X(i) => Some(0.5 + i as f64),
        Var::Y(i) => Some(1.25 + i as f64),
    };
    for _ in 0..1000 {
        let src = Tree::random(&mut rng, 6).render();
        let e = parse(&src, groups, &none).map_err(|e| format!("'{src}': {e}"))?;
        let printed = e.to_string();
        let again = parse(&printed, groups, &none).map_err(|e| format!("'{printed}': {e}"))?;
        ensure(again == e, || format!("'{src}' printed as '{printed}' parses differently"))?;
        let (u, v) = (e.evaluate_with(&lookup), again.evaluate_with(&lookup));
        ensure(
            match (&u, &v) {
                (Ok(a), Ok(b)) => a.to_bits() == b.to_bits(),
                (Err(_), Err(_)) => true,
                _ => false,
            },
            || format!("'{src}': {u:?} vs {v:?}"),
        )?;
    }
    Ok(format!("{} vector cases, 1000 round trips", PRECEDENCE_VECTOR.len()))
}
