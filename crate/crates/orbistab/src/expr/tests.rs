use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

const RIKITAKE_H: &str = "0.25*(-x^2+y^2)-beta*z";
const RIKITAKE_C: &str = "0.5*(x^2+y^2)+z^2";

fn beta_table() -> ParamTable {
    ParamTable::new().with("beta", 1.0)
}

fn at(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

#[test]
fn parses_variable() {
    let e = parse("x").unwrap();
    assert!(matches!(e, Expr::Var(Axis::X)));
    assert_eq!(e.eval(at(3.5, 0.0, 0.0)), 3.5);
}

#[test]
fn precedence_mul_over_add() {
    let e = parse("1+2*3").unwrap();
    assert_eq!(e.eval(Vec3::ZERO), 7.0);
}

#[test]
fn precedence_pow_over_unary_minus() {
    // -x^2 must read as -(x^2)
    let e = parse("-x^2").unwrap();
    assert_eq!(e.eval(at(3.0, 0.0, 0.0)), -9.0);
}

#[test]
fn left_associativity() {
    assert_eq!(parse("10-4-3").unwrap().eval(Vec3::ZERO), 3.0);
    assert_eq!(parse("16/4/2").unwrap().eval(Vec3::ZERO), 2.0);
}

#[test]
fn negative_and_parenthesized_exponents() {
    let e = parse("x^-2").unwrap();
    assert_eq!(e.eval(at(2.0, 0.0, 0.0)), 0.25);
    let e = parse("x^(-2)").unwrap();
    assert_eq!(e.eval(at(2.0, 0.0, 0.0)), 0.25);
}

#[test]
fn hamiltonian_text_evaluates() {
    let e = parse(RIKITAKE_H).unwrap();
    let bound = e.bind(&beta_table()).unwrap();
    assert_eq!(bound.eval(at(1.0, 1.0, 1.0)), -1.0);
}

#[test]
fn syntax_error_carries_position() {
    match parse("1+*2") {
        Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 2),
        other => panic!("expected syntax error, got {other:?}"),
    }
    match parse("(x+y") {
        Err(Error::Syntax { .. }) => {}
        other => panic!("expected syntax error, got {other:?}"),
    }
}

#[test]
fn unknown_function_rejected() {
    match parse("tanh(x)") {
        Err(Error::UnknownFunction { name, pos }) => {
            assert_eq!(name, "tanh");
            assert_eq!(pos, 0);
        }
        other => panic!("expected unknown function, got {other:?}"),
    }
    // abs is deliberately not in the function set
    assert!(matches!(parse("abs(x)"), Err(Error::UnknownFunction { .. })));
}

#[test]
fn non_integer_exponent_rejected() {
    assert!(matches!(parse("x^2.5"), Err(Error::Syntax { .. })));
    assert!(matches!(parse("x^y"), Err(Error::Syntax { .. })));
}

#[test]
fn unbound_parameter_rejected_at_compile() {
    let e = parse("beta*x").unwrap();
    match compile(&e, &ParamTable::new()) {
        Err(Error::UnboundParameter { name }) => assert_eq!(name, "beta"),
        other => panic!("expected unbound parameter, got {:?}", other.err()),
    }
}

#[test]
fn derivative_of_hamiltonian_wrt_z_is_minus_beta() {
    let e = parse(RIKITAKE_H).unwrap().bind(&beta_table()).unwrap();
    let dz = differentiate(&e, Axis::Z);
    for u in [at(0.0, 0.0, 0.0), at(1.0, -2.0, 3.0)] {
        assert_eq!(dz.eval(u), -1.0);
    }
}

#[test]
fn derivative_of_casimir_wrt_x_is_x() {
    let e = parse(RIKITAKE_C).unwrap();
    let dx = differentiate(&e, Axis::X);
    for v in [-1.5, 0.0, 2.0] {
        assert_eq!(dx.eval(at(v, 9.0, -4.0)), v);
    }
}

#[test]
fn derivative_of_unrelated_variable_is_zero() {
    let dy = differentiate(&parse("x").unwrap(), Axis::Y);
    assert!(matches!(dy, Expr::Const(c) if c == 0.0));
}

#[test]
fn compile_rikitake_values() {
    let h = compile(&parse(RIKITAKE_H).unwrap(), &beta_table()).unwrap();
    let c = compile(&parse(RIKITAKE_C).unwrap(), &ParamTable::new()).unwrap();
    assert_eq!(h.eval(at(1.0, 1.0, 1.0)), -1.0);
    assert_eq!(c.eval(at(1.0, 1.0, 1.0)), 2.0);
    assert!((h.grad(at(1.0, 1.0, 1.0)) - Vec3::new(-0.5, 0.5, -1.0)).norm() < 1e-15);
}

#[test]
fn compile_constant_has_zero_gradient() {
    let one = compile(&parse("1").unwrap(), &ParamTable::new()).unwrap();
    assert_eq!(one.grad(at(0.3, -4.0, 2.0)), Vec3::ZERO);
}

#[test]
fn parameters_are_collected() {
    let e = parse("a*x + beta*sin(a*z)").unwrap();
    assert_eq!(e.parameters(), vec!["a".to_string(), "beta".to_string()]);
    assert!(parse("x+y^2").unwrap().parameters().is_empty());
}

#[test]
fn evaluation_is_deterministic() {
    let e = parse("sin(x*y)+exp(0.3*z)-sqrt(2+x^2)").unwrap();
    let u = at(0.3, -0.7, 0.9);
    assert_eq!(e.eval(u), e.eval(u));
}

// --- randomized structural and numerical properties ---

fn leaf(rng: &mut ChaCha8Rng) -> Expr {
    match rng.gen_range(0..5) {
        0 => Expr::Const((rng.gen_range(-15..=15) as f64) / 10.0),
        1 => Expr::Var(Axis::X),
        2 => Expr::Var(Axis::Y),
        3 => Expr::Var(Axis::Z),
        _ => Expr::Param { name: "a".into(), pos: 0 },
    }
}

/// Subexpression bounded away from zero, safe under ln, sqrt and division.
fn safe_positive(rng: &mut ChaCha8Rng) -> Expr {
    let c = Expr::Const(rng.gen_range(5..=30) as f64 / 10.0);
    let v = Expr::Var([Axis::X, Axis::Y, Axis::Z][rng.gen_range(0..3)]);
    Expr::Bin(BinOp::Add, c.arc(), Expr::Pow(v.arc(), 2).arc())
}

fn gen_expr(rng: &mut ChaCha8Rng, depth: usize) -> Expr {
    if depth == 0 {
        return leaf(rng);
    }
    match rng.gen_range(0..12) {
        0 | 1 => Expr::Bin(
            BinOp::Add,
            gen_expr(rng, depth - 1).arc(),
            gen_expr(rng, depth - 1).arc(),
        ),
        2 | 3 => Expr::Bin(
            BinOp::Sub,
            gen_expr(rng, depth - 1).arc(),
            gen_expr(rng, depth - 1).arc(),
        ),
        4 | 5 => Expr::Bin(
            BinOp::Mul,
            gen_expr(rng, depth - 1).arc(),
            gen_expr(rng, depth - 1).arc(),
        ),
        6 => Expr::Bin(BinOp::Div, gen_expr(rng, depth - 1).arc(), safe_positive(rng).arc()),
        7 => Expr::Pow(gen_expr(rng, depth - 1).arc(), rng.gen_range(0..=3)),
        8 => Expr::Call(Func::Sin, gen_expr(rng, depth - 1).arc()),
        9 => Expr::Call(Func::Cos, gen_expr(rng, depth - 1).arc()),
        10 => Expr::Call(
            Func::Exp,
            Expr::Bin(BinOp::Mul, Expr::Const(0.25).arc(), leaf(rng).arc()).arc(),
        ),
        _ => Expr::Call(
            if rng.gen_bool(0.5) { Func::Ln } else { Func::Sqrt },
            safe_positive(rng).arc(),
        ),
    }
}

#[test]
fn pretty_print_reparses_to_identical_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for _ in 0..300 {
        let e = gen_expr(&mut rng, 3);
        let printed = e.to_string();
        let reparsed = parse(&printed)
            .unwrap_or_else(|err| panic!("failed to reparse `{printed}`: {err}"));
        assert!(
            e.structurally_equal(&reparsed),
            "round trip changed structure: `{printed}` vs `{reparsed}`"
        );
    }
}

#[test]
fn symbolic_derivatives_match_finite_differences() {
    let table = ParamTable::new().with("a", 0.7);
    let mut rng = ChaCha8Rng::seed_from_u64(98765);
    let step = 1e-5;
    for _ in 0..100 {
        let e = gen_expr(&mut rng, 3);
        let bound = e.bind(&table).unwrap();
        for _ in 0..10 {
            let u = at(
                rng.gen_range(-0.8..0.8),
                rng.gen_range(-0.8..0.8),
                rng.gen_range(-0.8..0.8),
            );
            for axis in Axis::ALL {
                let sym = differentiate(&bound, axis).eval(u);
                let mut up = u;
                let mut dn = u;
                match axis {
                    Axis::X => {
                        up.x += step;
                        dn.x -= step;
                    }
                    Axis::Y => {
                        up.y += step;
                        dn.y -= step;
                    }
                    Axis::Z => {
                        up.z += step;
                        dn.z -= step;
                    }
                }
                let fd = (bound.eval(up) - bound.eval(dn)) / (2.0 * step);
                let denom = sym.abs().max(fd.abs()).max(1.0);
                assert!(
                    (sym - fd).abs() / denom <= 1e-6,
                    "derivative mismatch for `{bound}` wrt {axis:?} at {u}: sym {sym}, fd {fd}"
                );
            }
        }
    }
}
