//! Built-in operator families.

use super::{BellmanOperator, EllipticityParams, LinearOperatorSpec, Mode};
use crate::expr::{parse_expr, Expr};

/// The single-member family `{-Laplacian}`.
pub fn laplacian(dim: usize) -> BellmanOperator {
    BellmanOperator::linear(
        LinearOperatorSpec::scaled_laplacian(dim, 1.0),
        EllipticityParams {
            gamma: 1.0,
            big_gamma: 1.0,
            delta1: 0.0,
            delta0: 0.0,
        },
    )
    .expect("laplacian is well formed")
}

/// `min{-Laplacian, -2 Laplacian}`. Its half-eigenvalues are `lambda_1(-Laplacian)`
/// and twice that, with the same eigenfunction.
pub fn min_laplacians(dim: usize) -> BellmanOperator {
    BellmanOperator::new(
        vec![
            LinearOperatorSpec::scaled_laplacian(dim, 1.0),
            LinearOperatorSpec::scaled_laplacian(dim, 2.0),
        ],
        EllipticityParams {
            gamma: 1.0,
            big_gamma: 2.0,
            delta1: 0.0,
            delta0: 0.0,
        },
    )
    .expect("min_laplacians is well formed")
}

/// `min{-Lap u, -Lap u + b . Du} - |u|` on the plane with the tangential field
/// `b = (-x y, x^2)`, which satisfies `x . b = 0` and `div b = -y`.
///
/// `-|u| = min{-u, u}` doubles the family, so the members are
/// `[-Lap - 1, -Lap + 1, -Lap + b.D - 1, -Lap + b.D + 1]`.
pub fn tangential_drift() -> BellmanOperator {
    let b = vec![
        parse_expr("-x*y").expect("drift expression"),
        parse_expr("x^2").expect("drift expression"),
    ];
    let family = [false, true]
        .iter()
        .flat_map(|&with_drift| {
            let b = b.clone();
            [-1.0, 1.0].into_iter().map(move |c| {
                let mut m = LinearOperatorSpec::scaled_laplacian(2, 1.0).with_zeroth(Expr::constant(c));
                if with_drift {
                    m = m.with_drift(b.clone());
                }
                m
            })
        })
        .collect();
    BellmanOperator::new(
        family,
        EllipticityParams {
            gamma: 1.0,
            big_gamma: 1.0,
            delta1: 1.0,
            delta0: 1.0,
        },
    )
    .expect("tangential_drift is well formed")
}

/// Lower Pucci operator on axis-aligned diagonal diffusions
/// `{diag(a_1, .., a_dim) : a_d in {gamma, Gamma}}`.
///
/// Exact in 1D. In 2D it is an upper approximation of the true Pucci
/// operator, exact only for Hessians diagonal in the grid axes.
pub fn pucci_minus(params: EllipticityParams, dim: usize) -> BellmanOperator {
    let choices = [params.gamma, params.big_gamma];
    let family: Vec<_> = match dim {
        1 => choices
            .iter()
            .map(|&a| LinearOperatorSpec::scaled_laplacian(1, a))
            .collect(),
        _ => choices
            .iter()
            .flat_map(|&a1| {
                choices.iter().map(move |&a2| {
                    LinearOperatorSpec::new(
                        vec![Expr::constant(a1), Expr::constant(a2)],
                        vec![Expr::constant(0.0); 2],
                        Expr::constant(0.0),
                    )
                })
            })
            .collect(),
    };
    let params = EllipticityParams {
        delta1: 0.0,
        delta0: 0.0,
        ..params
    };
    BellmanOperator::with_mode(family, params, Mode::Inf).expect("pucci family is well formed")
}

/// Upper Pucci operator, the dual of [`pucci_minus`].
pub fn pucci_plus(params: EllipticityParams, dim: usize) -> BellmanOperator {
    pucci_minus(params, dim).dual()
}
