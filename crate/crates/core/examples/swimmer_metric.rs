//! Reduced drag and mass metrics of the three-link swimmer and the local
//! connection that maps joint rates to body velocity.

use nalgebra::{DVector, SymmetricEigen};
use rsg::geometry::{christoffel, curvature, MetricField};
use rsg::swimmer::ConnectionField;
use rsg::{DragMetric, MassMetric, SwimmerParams};

fn main() {
    let params = SwimmerParams::default();
    let drag = DragMetric::new(params.clone()).unwrap();
    let mass = MassMetric::new(params).unwrap();
    for r in [[0.0, 0.0], [0.8, -0.4], [-1.2, 1.0]] {
        let p = DVector::from_column_slice(&r);
        let d = drag.metric_matrix(&p);
        let m = mass.metric_matrix(&p);
        let eig = SymmetricEigen::new(d.clone()).eigenvalues;
        println!("r = {r:?}");
        println!("  D = [{:.5} {:.5}; {:.5} {:.5}]  eigenvalues {:.5} {:.5}", d[(0, 0)], d[(0, 1)], d[(1, 0)], d[(1, 1)], eig[0], eig[1]);
        println!("  M = [{:.5} {:.5}; {:.5} {:.5}]", m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let a = drag.connection(&p);
        println!("  body velocity for r' = (1, 1): {:?}", a.body_velocity(&[1.0, 1.0]));
        let gamma = christoffel(&drag, &p).unwrap();
        let curv = curvature(&drag, &p).unwrap();
        println!(
            "  Gamma^0_01 = {:.5}  Bianchi defect {:.1e}",
            gamma.get(0, 0, 1),
            curv.bianchi_defect()
        );
    }
}
