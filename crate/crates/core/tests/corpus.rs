use isla_forge::corpus::{load_spec, spec_names, Spec};
use isla_forge::evaluator::check;
use isla_forge::parser::parse_input;
use isla_forge::solver::{Solver, SolverConfig};

fn solve(spec: &Spec, n: usize, seed: u64) -> Vec<String> {
    let cfg = SolverConfig { max_outputs: n, seed, ..SolverConfig::default() };
    Solver::new(&spec.grammar, &spec.registry, spec.formula.clone(), cfg)
        .unwrap()
        .map(|s| s.text)
        .collect()
}

fn holds(spec: &Spec, text: &str) -> bool {
    let t = parse_input(&spec.grammar, text).unwrap();
    check(&spec.formula, &t, &spec.grammar, &spec.registry).unwrap()
}

#[test]
fn invalid_samples_parse_and_fail() {
    for name in spec_names() {
        let spec = load_spec(name).unwrap();
        let bad = spec.invalid_sample.as_deref().unwrap_or_else(|| panic!("{name} has no invalid sample"));
        assert!(!holds(&spec, bad), "{name}");
    }
}

#[test]
fn rest_underlines_cover_titles() {
    let spec = load_spec("rest").unwrap();
    for text in solve(&spec, 10, 2) {
        let lines: Vec<&str> = text.split('\n').collect();
        for w in lines.windows(2) {
            if !w[1].is_empty() && w[1].chars().all(|c| c == '=' || c == '-') {
                assert!(w[1].len() >= w[0].len(), "{text:?}");
            }
        }
    }
}

fn ones_complement(bytes: &[u8]) -> u16 {
    let mut sum: u64 = 0;
    for (i, b) in bytes.iter().enumerate() {
        sum += if i % 2 == 0 { (*b as u64) << 8 } else { *b as u64 };
    }
    while sum >> 16 != 0 {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

#[test]
fn icmp_messages_are_echoes_with_valid_checksums() {
    let spec = load_spec("icmp-lite").unwrap();
    let out = solve(&spec, 20, 4);
    assert_eq!(out.len(), 20);
    for text in out {
        assert!(text.starts_with("00 ") || text.starts_with("08 "), "{text}");
        let bytes: Vec<u8> = text.split_whitespace().map(|b| u8::from_str_radix(b, 16).unwrap()).collect();
        assert!(bytes.len() >= 9);
        assert_eq!(ones_complement(&bytes), 0, "{text}");
    }
}

#[test]
fn dot_edges_follow_graph_kind() {
    let spec = load_spec("dot").unwrap();
    let mut edges = 0;
    for text in solve(&spec, 200, 1) {
        assert!(holds(&spec, &text));
        let directed = text.starts_with("digraph");
        edges += text.matches("->").count() + text.matches("--").count();
        assert!(!text.contains(if directed { "--" } else { "->" }), "{text}");
    }
    assert!(edges > 0);
    for (text, ok) in [
        ("digraph { a -> b; }", true),
        ("graph { a -- b; c; }", true),
        ("graph { a -> b; }", false),
        ("digraph { a -> b; b -- c; }", false),
        ("graph { n; }", true),
    ] {
        assert_eq!(holds(&spec, text), ok, "{text}");
    }
}
