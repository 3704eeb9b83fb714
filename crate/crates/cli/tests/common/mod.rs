//! Fixture files shared by the CLI test targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use qcorr_core::io::{self, Document};
use qcorr_core::synthesis::Purification;
use qcorr_core::{tensor, ClassicalDistribution, DensityOperator, PureState, C64};

pub fn state(dims: &[usize], entries: &[(&[usize], f64)]) -> PureState {
    let mut a = vec![C64::new(0.0, 0.0); tensor::total(dims)];
    for (idx, v) in entries {
        a[tensor::ravel(idx, dims)] = C64::new(*v, 0.0);
    }
    PureState::from_unnormalized(dims.to_vec(), a).unwrap()
}

pub fn ghz3() -> PureState {
    state(&[2, 2, 2], &[(&[0, 0, 0], 1.0), (&[1, 1, 1], 1.0)])
}

pub fn w3() -> PureState {
    state(&[2, 2, 2], &[(&[0, 0, 1], 1.0), (&[0, 1, 0], 1.0), (&[1, 0, 0], 1.0)])
}

pub fn epr() -> PureState {
    state(&[2, 2], &[(&[0, 0], 1.0), (&[1, 1], 1.0)])
}

/// ½ GHZ + ½ W.
pub fn rho0() -> DensityOperator {
    let m = (ghz3().density().matrix() + w3().density().matrix()) * C64::new(0.5, 0.0);
    DensityOperator::new(vec![2, 2, 2], m).unwrap()
}

/// (|GHZ⟩|1⟩ + |W⟩|0⟩)/√2, the extra qubit held by the third party.
pub fn psi0() -> Purification {
    let mut a = vec![C64::new(0.0, 0.0); 16];
    for (f, z) in ghz3().amplitudes().iter().enumerate() {
        a[2 * f + 1] += z;
    }
    for (f, z) in w3().amplitudes().iter().enumerate() {
        a[2 * f] += z;
    }
    Purification::new(PureState::from_unnormalized(vec![2, 2, 2, 2], a).unwrap(), vec![0, 1, 2, 2]).unwrap()
}

pub fn correlated_bits() -> ClassicalDistribution {
    ClassicalDistribution::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap()
}

pub fn write(dir: &Path, name: &str, doc: Document) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, io::to_json(&doc)).unwrap();
    path
}

pub fn write_pure(dir: &Path, name: &str, psi: &PureState) -> PathBuf {
    write(dir, name, Document::Pure(io::pure_to_file(psi)))
}

pub fn write_density(dir: &Path, name: &str, rho: &DensityOperator) -> PathBuf {
    write(dir, name, Document::Density(io::density_to_file(rho)))
}

pub fn write_dist(dir: &Path, name: &str, p: &ClassicalDistribution) -> PathBuf {
    write(dir, name, Document::Dist(io::dist_to_file(p)))
}

pub fn write_purification(dir: &Path, name: &str, p: &Purification) -> PathBuf {
    write(dir, name, Document::Pure(io::purification_to_file(p)))
}
