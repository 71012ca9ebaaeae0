//! Built-in test problems.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};
use crate::mesh::Rect;
use crate::problem::{ControlProblem, MatrixField, ScalarField};
use crate::sym2::Sym2;

/// Grid resolution used to sample variable coefficients for ellipticity
/// bounds; independent of the computational mesh.
const SAMPLE_GRID: usize = 64;

pub struct RegistryEntry {
    pub id: &'static str,
    pub description: &'static str,
    build: fn() -> Result<ControlProblem>,
}

fn sine(x: [f64; 2]) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin()
}

fn sine_source(x: [f64; 2]) -> f64 {
    -2.0 * PI * PI * sine(x)
}

fn oscillating_source(x: [f64; 2]) -> f64 {
    2.0 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()
}

/// `R(beta pi/4) D_alpha R(beta pi/4)^T` with `D_0 = diag(1, 2)`,
/// `D_1 = diag(2, 1)`.
pub fn isaacs_2x2_matrices() -> [Sym2; 4] {
    let d = [Sym2::diag(1.0, 2.0), Sym2::diag(2.0, 1.0)];
    [
        d[0],
        d[0].rotated(FRAC_PI_4),
        d[1],
        d[1].rotated(FRAC_PI_4),
    ]
}

fn constants(mats: &[Sym2]) -> Vec<MatrixField> {
    mats.iter().map(|&m| MatrixField::Constant(m)).collect()
}

fn laplace_sine() -> Result<ControlProblem> {
    Ok(ControlProblem::new(
        "laplace-sine",
        1,
        1,
        constants(&[Sym2::identity()]),
        ScalarField::Registered {
            name: "-2 pi^2 sin(pi x) sin(pi y)",
            eval: sine_source,
        },
        Rect::unit_square(),
    )?
    .with_exact(ScalarField::Registered {
        name: "sin(pi x) sin(pi y)",
        eval: sine,
    }))
}

fn hjb_two() -> Result<ControlProblem> {
    ControlProblem::new(
        "hjb-two",
        2,
        1,
        constants(&[Sym2::diag(1.0, 2.0), Sym2::diag(2.0, 1.0)]),
        ScalarField::Constant(1.0),
        Rect::unit_square(),
    )
}

fn isaacs_2x2() -> Result<ControlProblem> {
    ControlProblem::new(
        "isaacs-2x2",
        2,
        2,
        constants(&isaacs_2x2_matrices()),
        ScalarField::Registered {
            name: "2 sin(2 pi x) cos(2 pi y)",
            eval: oscillating_source,
        },
        Rect::unit_square(),
    )
}

fn constant_f() -> Result<ControlProblem> {
    ControlProblem::new(
        "constant-f",
        1,
        1,
        constants(&[Sym2::identity()]),
        ScalarField::Constant(1.0),
        Rect::unit_square(),
    )
}

fn rotating_sine() -> Result<ControlProblem> {
    ControlProblem::new(
        "rotating-sine",
        1,
        1,
        vec![MatrixField::rotating()],
        ScalarField::Registered {
            name: "-2 pi^2 sin(pi x) sin(pi y)",
            eval: sine_source,
        },
        Rect::unit_square(),
    )
}

pub fn registry() -> &'static [RegistryEntry] {
    const ENTRIES: &[RegistryEntry] = &[
        RegistryEntry {
            id: "laplace-sine",
            description: "A = I, u = sin(pi x) sin(pi y), f = -2 pi^2 u",
            build: laplace_sine,
        },
        RegistryEntry {
            id: "hjb-two",
            description: "inf over diag(1,2), diag(2,1); f = 1",
            build: hjb_two,
        },
        RegistryEntry {
            id: "isaacs-2x2",
            description: "{diag(1,2), diag(2,1)} x rotation by 0 or pi/4; f = 2 sin(2 pi x) cos(2 pi y)",
            build: isaacs_2x2,
        },
        RegistryEntry {
            id: "constant-f",
            description: "A = I, f = 1",
            build: constant_f,
        },
        RegistryEntry {
            id: "rotating-sine",
            description: "diag(1,2) rotated by pi (x + y) / 4, f = -2 pi^2 sin(pi x) sin(pi y)",
            build: rotating_sine,
        },
    ];
    ENTRIES
}

/// Looks up a problem and computes its ellipticity bounds.
pub fn lookup(id: &str) -> Result<ControlProblem> {
    let entry = registry()
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| Error::UnknownProblem(id.to_string()))?;
    let mut problem = (entry.build)()?;
    with_bounds(&mut problem)?;
    Ok(problem)
}

/// Computes ellipticity bounds on a uniform sample grid of the domain.
pub fn with_bounds(problem: &mut ControlProblem) -> Result<()> {
    let d = problem.domain;
    let samples: Vec<[f64; 2]> = if problem.has_constant_coefficients() {
        Vec::new()
    } else {
        (0..=SAMPLE_GRID)
            .flat_map(|j| {
                (0..=SAMPLE_GRID).map(move |i| {
                    let t = (i as f64 / SAMPLE_GRID as f64, j as f64 / SAMPLE_GRID as f64);
                    [d.x0 + t.0 * d.width(), d.y0 + t.1 * d.height()]
                })
            })
            .collect()
    };
    problem.ellipticity_bounds(&samples)?;
    Ok(())
}
