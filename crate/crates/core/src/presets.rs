//! Built-in channel realizations used by the reference experiments.

use nalgebra::DMatrix;

use crate::rates::WiretapChannel;

pub const GROUP1_HB: [f64; 4] = [0.8143, 0.2435, 0.9293, 0.3500];
pub const GROUP1_HE: [f64; 4] = [0.3034, 0.2489, 0.1160, 0.0267];

pub const GROUP2_HB: [[f64; 4]; 2] = [[0.9218, 1.2922, 1.1557, 1.3491], [1.4157, 1.4595, 0.5357, 1.4340]];
pub const GROUP2_HE: [[f64; 4]; 2] = [[0.1787, 0.2431, 0.1555, 0.2060], [0.2577, 0.1078, 0.3288, 0.4682]];

fn rows<const C: usize>(data: &[[f64; C]]) -> DMatrix<f64> {
    DMatrix::from_fn(data.len(), C, |i, j| data[i][j])
}

/// 1x4 MISO channel (Case I).
pub fn group1() -> WiretapChannel {
    WiretapChannel::new(rows(&[GROUP1_HB]), rows(&[GROUP1_HE])).expect("group 1 preset is valid")
}

/// 2x4 MIMO channel (Case I).
pub fn group2() -> WiretapChannel {
    WiretapChannel::new(rows(&GROUP2_HB), rows(&GROUP2_HE)).expect("group 2 preset is valid")
}

/// 4x1 SIMO channel (Case II).
pub fn group1_transposed() -> WiretapChannel {
    group1().transposed().expect("transposed group 1 is valid")
}

/// 4x2 MIMO channel (Case II).
pub fn group2_transposed() -> WiretapChannel {
    group2().transposed().expect("transposed group 2 is valid")
}

/// Looks a preset up by its scenario-file name.
pub fn by_name(name: &str) -> Option<WiretapChannel> {
    match name {
        "group1" => Some(group1()),
        "group2" => Some(group2()),
        "group1-transposed" | "group1T" => Some(group1_transposed()),
        "group2-transposed" | "group2T" => Some(group2_transposed()),
        _ => None,
    }
}

pub const NAMES: [&str; 4] = ["group1", "group2", "group1-transposed", "group2-transposed"];
