//! Fixed workloads shared by the benchmarks.

use rwrs_core::{RwrsModel, SceneryDist, WalkIncrementDist};

pub const HORIZON: u64 = 1 << 12;

pub fn models() -> Vec<(&'static str, RwrsModel)> {
    vec![
        (
            "simple_rademacher",
            RwrsModel::new(WalkIncrementDist::Simple, SceneryDist::Rademacher).expect("valid"),
        ),
        (
            "simple_zipf",
            RwrsModel::new(WalkIncrementDist::Simple, SceneryDist::symmetric_zipf(0.5).expect("valid")).expect("valid"),
        ),
        (
            "heavy_rademacher",
            RwrsModel::new(WalkIncrementDist::heavy_tail(1.5).expect("valid"), SceneryDist::Rademacher).expect("valid"),
        ),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn models_build() {
        assert_eq!(super::models().len(), 3);
    }
}
