use crate::error::{CoreError, Result};
use crate::sampler::RngStream;
use std::f64::consts::PI;

/// All generators emit points in [RANGE_LO, RANGE_HI]^2 (clamped).
pub const RANGE_LO: f64 = -4.0;
pub const RANGE_HI: f64 = 4.0;

/// The seven toy 2-D densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Synthetic2D {
    TwoSpirals,
    EightGaussians,
    Circles,
    Moons,
    Pinwheel,
    SwissRoll,
    Checkerboard,
}

pub const ALL_GENERATORS: [Synthetic2D; 7] = [
    Synthetic2D::TwoSpirals,
    Synthetic2D::EightGaussians,
    Synthetic2D::Circles,
    Synthetic2D::Moons,
    Synthetic2D::Pinwheel,
    Synthetic2D::SwissRoll,
    Synthetic2D::Checkerboard,
];

impl Synthetic2D {
    pub fn name(&self) -> &'static str {
        match self {
            Synthetic2D::TwoSpirals => "2spirals",
            Synthetic2D::EightGaussians => "8gaussians",
            Synthetic2D::Circles => "circles",
            Synthetic2D::Moons => "moons",
            Synthetic2D::Pinwheel => "pinwheel",
            Synthetic2D::SwissRoll => "swissroll",
            Synthetic2D::Checkerboard => "checkerboard",
        }
    }

    pub fn parse(s: &str) -> Result<Synthetic2D> {
        ALL_GENERATORS
            .iter()
            .find(|g| g.name() == s)
            .copied()
            .ok_or_else(|| CoreError::InvalidArgument(format!("unknown generator '{s}'")))
    }

    /// The fixed constants each generator uses, recorded in dataset
    /// manifests.
    pub fn constants(&self) -> &'static str {
        match self {
            Synthetic2D::TwoSpirals => "t=sqrt(u),r=3t,angle=3*pi*t,two mirrored arms,noise=0.1",
            Synthetic2D::EightGaussians => "centers radius 2 at k*pi/4,sigma=0.2",
            Synthetic2D::Circles => "radii 3.0 and 1.5,noise=0.1",
            Synthetic2D::Moons => "unit half-circles,center (0.5,0.25),scale 2.5,noise=0.1",
            Synthetic2D::Pinwheel => {
                "blades=5,radial_std=0.3,tangential_std=0.05,rate=0.25,scale=1.6"
            }
            Synthetic2D::SwissRoll => "t=1.5pi(1+2u),(t cos t,t sin t)*3.5/(4.5pi),noise=0.1",
            Synthetic2D::Checkerboard => "8x8 unit squares on [-4,4],(i+j) even kept",
        }
    }
}

fn normal(rng: &mut RngStream) -> f64 {
    crate::sampler::standard_normal(rng)
}

fn clamp_point(p: (f64, f64)) -> (f64, f64) {
    (
        p.0.clamp(RANGE_LO, RANGE_HI),
        p.1.clamp(RANGE_LO, RANGE_HI),
    )
}

/// Draw `n` i.i.d. points from the named toy distribution.
pub fn sample_2d(generator: Synthetic2D, n: usize, rng: &mut RngStream) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let p = match generator {
            Synthetic2D::TwoSpirals => {
                let t = rng.uniform().sqrt();
                let angle = 3.0 * PI * t;
                let r = 3.0 * t;
                let arm = if rng.uniform() < 0.5 { 1.0 } else { -1.0 };
                (
                    arm * r * angle.sin() + 0.1 * normal(rng),
                    arm * r * angle.cos() + 0.1 * normal(rng),
                )
            }
            Synthetic2D::EightGaussians => {
                let c = rng.below(8);
                let angle = c as f64 * PI / 4.0;
                (
                    2.0 * angle.cos() + 0.2 * normal(rng),
                    2.0 * angle.sin() + 0.2 * normal(rng),
                )
            }
            Synthetic2D::Circles => {
                let r = if rng.uniform() < 0.5 { 3.0 } else { 1.5 };
                let angle = rng.uniform() * 2.0 * PI;
                (
                    r * angle.cos() + 0.1 * normal(rng),
                    r * angle.sin() + 0.1 * normal(rng),
                )
            }
            Synthetic2D::Moons => {
                let t = rng.uniform() * PI;
                let (rx, ry) = if rng.uniform() < 0.5 {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                };
                (
                    2.5 * (rx - 0.5) + 0.1 * normal(rng),
                    2.5 * (ry - 0.25) + 0.1 * normal(rng),
                )
            }
            Synthetic2D::Pinwheel => {
                let blade = rng.below(5);
                let radial = 1.0 + 0.3 * normal(rng);
                let tangential = 0.05 * normal(rng);
                let angle = blade as f64 * 2.0 * PI / 5.0 + 0.25 * radial.exp();
                let (sin, cos) = angle.sin_cos();
                (
                    1.6 * (radial * cos - tangential * sin),
                    1.6 * (radial * sin + tangential * cos),
                )
            }
            Synthetic2D::SwissRoll => {
                let t = 1.5 * PI * (1.0 + 2.0 * rng.uniform());
                let scale = 3.5 / (4.5 * PI);
                (
                    scale * t * t.cos() + 0.1 * normal(rng),
                    scale * t * t.sin() + 0.1 * normal(rng),
                )
            }
            Synthetic2D::Checkerboard => {
                // 32 allowed unit squares out of the 8x8 grid
                let square = rng.below(32);
                let row = square / 4;
                let col_in_row = square % 4;
                let col = 2 * col_in_row + (row % 2);
                (
                    RANGE_LO + col as f64 + rng.uniform(),
                    RANGE_LO + row as f64 + rng.uniform(),
                )
            }
        };
        out.push(clamp_point(p));
    }
    out
}
