//! Worked-example fixtures shared by the integration tests.
#![allow(dead_code)]

use haantjes_core::sampling::Sampler;
use haantjes_core::stackel::StackelSpec;
use haantjes_core::transform::ChartMap;
use haantjes_core::{Chart, Expression, OperatorField};

pub fn parse(s: &str, c: &Chart) -> Expression {
    Expression::parse(s, c).unwrap_or_else(|e| panic!("{s}: {e}"))
}

pub fn parse_all(v: &[&str], c: &Chart) -> Vec<Expression> {
    v.iter().map(|s| parse(s, c)).collect()
}

/// Three degrees of freedom, one block, raw chart.
pub fn raw_chart() -> Chart {
    Chart::canonical(3).unwrap()
}

pub const RAW_H: [&str; 3] = [
    "4*p1^2 + 2*p2^2 + 4*p3^2 + q1*(q1 + 2) + 4*q2^2 + q3*(q3 - 2) + 4*q1*q2 + 2*q1*q3 + 4*q2*q3",
    "p1 - p2 + p3",
    "p1^2 + p3^2 - 2*p1*p3 + q1 - q3",
];

pub fn raw_h() -> Vec<Expression> {
    parse_all(&RAW_H, &raw_chart())
}

/// Defective operator solving `dH₂ = L₂ᵀ dH₁`.
pub fn l2() -> OperatorField {
    let c = raw_chart();
    let s = "(p1 + p3)";
    let t = "(-p1 - p2 - p3)";
    let u = "(q1 + 2*q2 + q3)";
    let mu = "(-q1 - 2*q2 - q3)";
    let s2 = "2*(p1 + p3)";
    #[rustfmt::skip]
    let rows = [
        s, "0", s, "0", "0", "0",
        t, s2, t, "0", "0", "0",
        s, "0", s, "0", "0", "0",
        "0", mu, "0", s, t, s,
        u, "0", u, "0", s2, "0",
        "0", mu, "0", s, t, s,
    ];
    OperatorField::parse(&c, &rows).unwrap().scaled(&parse("1/(8*(p1 + p3)^2)", &c))
}

/// Constant Nijenhuis operator solving `dH₃ = L₃ᵀ dH₁`.
pub fn l3() -> OperatorField {
    let c = raw_chart();
    #[rustfmt::skip]
    let rows = [
        "1", "0", "-1", "0", "0", "0",
        "0", "0", "0", "0", "0", "0",
        "-1", "0", "1", "0", "0", "0",
        "0", "0", "0", "1", "0", "-1",
        "0", "0", "0", "0", "0", "0",
        "0", "0", "0", "-1", "0", "1",
    ];
    OperatorField::parse(&c, &rows).unwrap().scaled(&parse("1/4", &c))
}

/// Samples of the raw chart away from the pole `p1 + p3 = 0`.
pub fn raw_samples(seed: u64, count: usize) -> Vec<Vec<f64>> {
    let c = raw_chart();
    Sampler::new(seed, count).guard_min(parse("p1 + p3", &c), 0.1).sample(&c).unwrap()
}

/// Block-adapted chart `(Q1, Q2 | Q3)`.
pub fn dh_chart() -> Chart {
    Chart::with_names(["Q1", "Q2", "Q3", "P1", "P2", "P3"].map(String::from).to_vec(), &[2, 1]).unwrap()
}

pub fn dh_map() -> ChartMap {
    ChartMap::parse(
        &raw_chart(),
        &dh_chart(),
        &["(q1 + q3)/2", "q2", "(q1 - q3)/2", "p1 + p3", "p2", "p1 - p3"],
        &["Q1 + Q3", "Q2", "Q1 - Q3", "(P1 + P3)/2", "P2", "(P1 - P3)/2"],
    )
    .unwrap()
}

/// The pre-normalization map `x¹ = q1 + q3, x³ = p1 + p3, …`.
pub fn unnormalized_map() -> ChartMap {
    ChartMap::parse(
        &raw_chart(),
        &dh_chart(),
        &["q1 + q3", "q2", "q1 - q3", "p1 + p3", "p2", "p1 - p3"],
        &["(Q1 + Q3)/2", "Q2", "(Q1 - Q3)/2", "(P1 + P3)/2", "P2", "(P1 - P3)/2"],
    )
    .unwrap()
}

pub const DH_H: [&str; 3] = ["2*(P1^2 + P2^2 + P3^2) + 4*(Q1 + Q2)^2 + 4*Q3", "P1 - P2", "P3^2 + 2*Q3"];

pub fn dh_h() -> Vec<Expression> {
    parse_all(&DH_H, &dh_chart())
}

/// Transformed `L₂` in chart order `(Q1, Q2, Q3, P1, P2, P3)`.
pub fn dh_l2() -> OperatorField {
    let c = dh_chart();
    let m = "-(P1 + P2)";
    #[rustfmt::skip]
    let rows = [
        "P1", "0", "0", "0", "0", "0",
        m, "P1", "0", "0", "0", "0",
        "0", "0", "0", "0", "0", "0",
        "0", "-2*(Q1 + Q2)", "0", "P1", m, "0",
        "2*(Q1 + Q2)", "0", "0", "0", "P1", "0",
        "0", "0", "0", "0", "0", "0",
    ];
    OperatorField::parse(&c, &rows).unwrap().scaled(&parse("1/(4*P1^2)", &c))
}

pub fn dh_l3() -> OperatorField {
    let c = dh_chart();
    OperatorField::diagonal(&c, parse_all(&["0", "0", "1/2", "0", "0", "1/2"], &c)).unwrap()
}

pub fn dh_samples(seed: u64, count: usize) -> Vec<Vec<f64>> {
    let c = dh_chart();
    Sampler::new(seed, count).guard_min(parse("P1", &c), 0.1).sample(&c).unwrap()
}

/// Fully separating chart reached from the block-adapted one.
pub fn tilde_chart() -> Chart {
    Chart::with_names(["T1", "T2", "T3", "U1", "U2", "U3"].map(String::from).to_vec(), &[1, 1, 1]).unwrap()
}

pub fn tilde_map() -> ChartMap {
    ChartMap::parse(
        &dh_chart(),
        &tilde_chart(),
        &["(Q1 + Q2)/2", "(Q1 - Q2)/2", "Q3", "P1 + P2", "P1 - P2", "P3"],
        &["T1 + T2", "T1 - T2", "T3", "(U1 + U2)/2", "(U1 - U2)/2", "U3"],
    )
    .unwrap()
}

pub const TILDE_H: [&str; 3] = ["U1^2 + U2^2 + 2*U3^2 + 16*T1^2 + 4*T3", "U2", "U3^2 + 2*T3"];

/// Four degrees of freedom, blocks `(2, 1, 1)`.
pub fn four_chart() -> Chart {
    Chart::new(4, &[2, 1, 1]).unwrap()
}

pub fn four_spec() -> StackelSpec {
    StackelSpec::parse(
        &four_chart(),
        &["q1*q2", "0", "0", "0", "1", "q3", "q4", "0", "1"],
        &["q1*q2*(p1^2 + p2^2 + q1*q2)", "p3^2 + q3", "p4^2 + q4"],
    )
    .unwrap()
}

pub const FOUR_H: [&str; 3] = [
    "p1^2 + p2^2 + q1*q2",
    "q3*q4*(p1^2 + p2^2) + p3^2 - q3*p4^2 + q3*q4*(q1*q2 - 1) + q3",
    "-q4*(p1^2 + p2^2) + p4^2 + q4*(1 - q1*q2)",
];

pub fn four_h() -> Vec<Expression> {
    parse_all(&FOUR_H, &four_chart())
}

pub fn four_k1() -> OperatorField {
    let c = four_chart();
    let d = parse_all(&["1", "1", "0", "0", "1", "1", "0", "0"], &c);
    OperatorField::diagonal(&c, d).unwrap().scaled(&parse("1/(q3*q4)", &c))
}

pub fn four_k3() -> OperatorField {
    let c = four_chart();
    let d = parse_all(&["1", "1", "0", "1", "1", "1", "0", "1"], &c);
    OperatorField::diagonal(&c, d).unwrap().scaled(&parse("-1/q3", &c))
}

pub fn four_samples(seed: u64, count: usize) -> Vec<Vec<f64>> {
    let c = four_chart();
    Sampler::new(seed, count)
        .guard(parse("q1*q2", &c))
        .guard(parse("q3*q4", &c))
        .sample(&c)
        .unwrap()
}

/// Separation relations in the block-adapted chart, with the level values
/// `h = (1, 2, 3)` as constants.
pub const DH_PHI: [&str; 3] = ["2*(P1^2 + P2^2) + 4*(Q1 + Q2)^2 - 1", "P1 - P2 - 2", "P3^2 + 2*Q3 - 3"];

/// Totally separated relations: each depends on one conjugate pair only.
pub const SEPARATED_PHI: [&str; 3] = ["p1^2 + q1^3 - 1", "p2^2*q2 + q2 - 2", "p3 - q3^2"];

/// Relations whose momentum/position Jacobians produce a non-symmetric
/// product.
pub const COUPLED_PHI: [&str; 3] = ["p1 + q2", "p2 + q3^2", "p3"];
