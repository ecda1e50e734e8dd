use crate::graph::DagStructure;
use crate::linalg::Matrix;
use crate::model::{GbnParams, InterventionTarget};
use crate::sampler::{Condition, Dataset, DesignSpec};
use crate::scalar::Scalar;

pub fn toy_dag() -> DagStructure {
    DagStructure::from_one_based(3, &[(1, 2), (1, 3), (2, 3)]).unwrap()
}

pub fn toy_params<T: Scalar>() -> GbnParams<T> {
    let v = |xs: &[f64]| xs.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
    GbnParams::new(toy_dag(), v(&[0.5, 1.2, 0.7]), v(&[0.3, 1.1, 0.6]), v(&[-0.8, 0.9, 0.5])).unwrap()
}

pub fn observational_fixture() -> Dataset<f64> {
    Dataset::observational(Matrix::from_rows(&[
        [1.1025540, -0.2652622, 1.957083],
        [0.6721755, 0.4286717, 1.605024],
        [0.3455340, 2.8835932, 1.932982],
        [0.4139627, 1.0847936, 1.250889],
        [0.2844364, 1.0490652, 1.446954],
    ]))
    .unwrap()
}

/// The five-condition design, `reps` rows each.
pub fn five_condition_design(reps: usize) -> DesignSpec<f64> {
    let targets = [
        InterventionTarget::new([(0, -0.5)]),
        InterventionTarget::new([(1, 0.5)]),
        InterventionTarget::new([(2, 0.1)]),
        InterventionTarget::new([(0, -1.5), (1, 2.5)]),
        InterventionTarget::observational(),
    ];
    DesignSpec::new(
        targets
            .into_iter()
            .map(|target| Condition { target, reps })
            .collect(),
    )
    .unwrap()
}
