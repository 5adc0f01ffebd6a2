//! Fixed inputs shared by the benchmarks.

use wrenchlab::oracle::{random_force_closure_set, random_sphere_grasp};
use wrenchlab::pong::{PongSetup, Polygon2};
use wrenchlab::{ContactSpec, FrictionModel, LinearProgram, PongConfig, WrenchSet};

pub fn friction() -> FrictionModel {
    FrictionModel { mu: 0.5, n_sides: 4 }
}

pub fn wrench_set(n_w: usize) -> WrenchSet {
    random_force_closure_set(n_w, 7).expect("fixture set")
}

pub fn sphere_grasp() -> Vec<ContactSpec> {
    random_sphere_grasp(3, 0.05, &friction(), (0.001, 0.05), 11).expect("fixture grasp")
}

/// Every vertex LP of the fixture grasp under the default configuration.
pub fn vertex_lps() -> Vec<LinearProgram> {
    PongSetup::new(&sphere_grasp(), &friction()).expect("fixture setup").all_lps(&PongConfig::default())
}

pub fn octagon() -> Polygon2 {
    let pts: Vec<[f64; 2]> = (0..8)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / 8.0;
            [0.8 * a.cos() + 0.1, 0.5 * a.sin()]
        })
        .collect();
    Polygon2::hull(&pts)
}
