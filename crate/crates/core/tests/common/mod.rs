#![allow(dead_code)]

use locc_gauss::gaussian::{generate_random_state, GenerationParams, GenerationRecipe, StateFamily};
use locc_gauss::TwoModeCovariance;

pub const FAMILIES: [StateFamily; 7] = [
    StateFamily::Product,
    StateFamily::M2Zero,
    StateFamily::OneZero,
    StateFamily::SinZero,
    StateFamily::Generic,
    StateFamily::Tmsv,
    StateFamily::Random,
];

pub struct Sample {
    pub family: StateFamily,
    pub seed: u64,
    pub state: TwoModeCovariance,
    pub recipe: GenerationRecipe,
}

/// `per_family` seeded states of every family at the default bounds.
pub fn corpus(per_family: u64) -> Vec<Sample> {
    corpus_with(per_family, GenerationParams::default())
}

pub fn corpus_with(per_family: u64, base: GenerationParams) -> Vec<Sample> {
    FAMILIES
        .iter()
        .flat_map(|&family| {
            (0..per_family).map(move |seed| {
                let (state, recipe) = generate_random_state(seed, &GenerationParams { family, ..base }).unwrap();
                Sample { family, seed, state, recipe }
            })
        })
        .collect()
}

pub fn max_abs_diff(a: &TwoModeCovariance, b: &TwoModeCovariance) -> f64 {
    a.moments().iter().zip(b.moments().iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest moment modulus, floored at the vacuum scale.
pub fn scale(v: &TwoModeCovariance) -> f64 {
    v.moments().iter().map(|m| m.norm()).fold(0.5, f64::max)
}
