use std::collections::BTreeMap;
use std::sync::Arc;

use isla_forge::evaluator::{check, evaluate, Assignment};
use isla_forge::formula::{parse_formula, substitute_vars, Formula, Term};
use isla_forge::grammar::{parse_grammar, Grammar};
use isla_forge::predicates::Registry;
use isla_forge::tree::{closed_trees, DerivationTree};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRAMMAR: &str = "<start> ::= <p> | <p> \"+\" <start>\n<p> ::= <v> | \"(\" <v> \")\"\n<v> ::= \"x\" | \"y\"\n";

/// Formulas with a small, separately evaluated semantics.
#[derive(Clone, Debug)]
enum Rf {
    Is(String, &'static str),
    Same(String, String),
    Before(String, String),
    Not(Box<Rf>),
    And(Box<Rf>, Box<Rf>),
    Or(Box<Rf>, Box<Rf>),
    Quant { forall: bool, ty: &'static str, var: String, scope: String, body: Box<Rf> },
}

impl Rf {
    fn text(&self) -> String {
        match self {
            Rf::Is(v, lit) => format!("(= {v} \"{lit}\")"),
            Rf::Same(a, b) => format!("(= {a} {b})"),
            Rf::Before(a, b) => format!("before({a}, {b})"),
            Rf::Not(f) => format!("(not {})", f.text()),
            Rf::And(a, b) => format!("({} and {})", a.text(), b.text()),
            Rf::Or(a, b) => format!("({} or {})", a.text(), b.text()),
            Rf::Quant { forall, ty, var, scope, body } => {
                let q = if *forall { "forall" } else { "exists" };
                format!("({q} {ty} {var} in {scope}: {})", body.text())
            }
        }
    }
}

fn gen(rng: &mut ChaCha8Rng, depth: usize, vars: &mut Vec<(String, &'static str)>, fresh: &mut usize) -> Rf {
    let leafy = depth == 0 || rng.gen_bool(0.25);
    if leafy && vars.len() > 1 {
        let (a, ta) = vars[rng.gen_range(1..vars.len())].clone();
        let b = vars[rng.gen_range(1..vars.len())].0.clone();
        return match rng.gen_range(0..3) {
            0 => Rf::Same(a, b),
            1 => Rf::Before(a, b),
            _ => Rf::Is(a, *[if ta == "<v>" { "x" } else { "(y)" }, "y"].choose(rng).unwrap()),
        };
    }
    match rng.gen_range(0..5) {
        0 if vars.len() > 1 => Rf::Not(Box::new(gen(rng, depth.saturating_sub(1), vars, fresh))),
        1 if vars.len() > 1 => Rf::And(
            Box::new(gen(rng, depth.saturating_sub(1), vars, fresh)),
            Box::new(gen(rng, depth.saturating_sub(1), vars, fresh)),
        ),
        2 if vars.len() > 1 => Rf::Or(
            Box::new(gen(rng, depth.saturating_sub(1), vars, fresh)),
            Box::new(gen(rng, depth.saturating_sub(1), vars, fresh)),
        ),
        _ => {
            *fresh += 1;
            let ty = if rng.gen_bool(0.5) { "<v>" } else { "<p>" };
            let var = format!("q{fresh}");
            let scope = vars.choose(rng).unwrap().0.clone();
            vars.push((var.clone(), ty));
            let body = gen(rng, depth.saturating_sub(1), vars, fresh);
            vars.pop();
            Rf::Quant { forall: rng.gen_bool(0.5), ty, var, scope, body: Box::new(body) }
        }
    }
}

fn paths<'t>(t: &'t DerivationTree, here: Vec<usize>, out: &mut Vec<(Vec<usize>, &'t DerivationTree)>) {
    out.push((here.clone(), t));
    for (i, c) in t.children().unwrap_or(&[]).iter().enumerate() {
        let mut p = here.clone();
        p.push(i);
        paths(c, p, out);
    }
}

fn at<'t>(t: &'t DerivationTree, path: &[usize]) -> &'t DerivationTree {
    path.iter().fold(t, |n, &i| &n.children().unwrap()[i])
}

fn text(t: &DerivationTree) -> String {
    if t.is_terminal() {
        return t.label().to_string();
    }
    t.children().unwrap().iter().map(text).collect()
}

/// Reference semantics over paths from the root.
fn reference(f: &Rf, t: &DerivationTree, env: &BTreeMap<String, Vec<usize>>) -> bool {
    match f {
        Rf::Is(v, lit) => text(at(t, &env[v])) == *lit,
        Rf::Same(a, b) => text(at(t, &env[a])) == text(at(t, &env[b])),
        Rf::Before(a, b) => {
            let (pa, pb) = (&env[a], &env[b]);
            !pa.starts_with(pb) && !pb.starts_with(pa) && pa < pb
        }
        Rf::Not(g) => !reference(g, t, env),
        Rf::And(a, b) => reference(a, t, env) && reference(b, t, env),
        Rf::Or(a, b) => reference(a, t, env) || reference(b, t, env),
        Rf::Quant { forall, ty, var, scope, body } => {
            let base = &env[scope];
            let mut all = Vec::new();
            paths(at(t, base), base.clone(), &mut all);
            let mut hits = all.into_iter().filter(|(_, n)| !n.is_terminal() && n.label() == *ty).map(|(p, _)| {
                let mut e = env.clone();
                e.insert(var.clone(), p);
                reference(body, t, &e)
            });
            if *forall {
                hits.all(|b| b)
            } else {
                hits.any(|b| b)
            }
        }
    }
}

fn setup() -> (Grammar, Registry, Vec<DerivationTree>) {
    let g = parse_grammar(GRAMMAR).unwrap();
    let trees = closed_trees(&g, "<start>", 5);
    assert!(trees.len() >= 10);
    (g, Registry::standard(), trees)
}

fn random_formula(seed: u64, g: &Grammar, reg: &Registry) -> (Rf, Formula) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rf = gen(&mut rng, 4, &mut vec![("start".into(), "<start>")], &mut 0);
    let f = parse_formula(&rf.text(), g, reg).unwrap();
    (rf, f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn agrees_with_reference(seed in any::<u64>()) {
        let (g, reg, trees) = setup();
        let (rf, f) = random_formula(seed, &g, &reg);
        let env = BTreeMap::from([("start".to_string(), Vec::new())]);
        for t in &trees {
            prop_assert_eq!(check(&f, t, &g, &reg), Ok(reference(&rf, t, &env)), "{} on {:?}", rf.text(), t.yield_str());
        }
    }

    #[test]
    fn negation_flips(seed in any::<u64>()) {
        let (g, reg, trees) = setup();
        let (_, f) = random_formula(seed, &g, &reg);
        let neg = Formula::not(f.clone());
        for t in &trees {
            prop_assert_eq!(check(&neg, t, &g, &reg).unwrap(), !check(&f, t, &g, &reg).unwrap());
        }
    }

    #[test]
    fn substitution_commutes_with_evaluation(seed in any::<u64>()) {
        let (g, reg, trees) = setup();
        let (_, f) = random_formula(seed, &g, &reg);
        for t in &trees {
            let map = BTreeMap::from([(Arc::from("start"), Term::Node(t.id()))]);
            let ground = substitute_vars(&f, &map).unwrap();
            let direct = evaluate(&f, t, &Assignment::start(t), &g, &reg).unwrap();
            prop_assert_eq!(evaluate(&ground, t, &Assignment::default(), &g, &reg).unwrap(), direct);
            prop_assert_eq!(evaluate(&f, t, &Assignment::start(t), &g, &reg).unwrap(), direct);
        }
    }
}

#[test]
fn vacuous_and_witnessing_quantifiers() {
    let (g, reg, _) = setup();
    let two = isla_forge::parser::parse_input(&g, "x+y").unwrap();
    let one = isla_forge::parser::parse_input(&g, "x").unwrap();
    let vacuous = parse_formula("forall <p> p in start: forall <start> s in p: false", &g, &reg).unwrap();
    assert_eq!(check(&vacuous, &two, &g, &reg), Ok(true));
    let witness = parse_formula("exists <v> v in start: (= v \"y\")", &g, &reg).unwrap();
    assert_eq!(check(&witness, &two, &g, &reg), Ok(true));
    assert_eq!(check(&witness, &one, &g, &reg), Ok(false));
}
