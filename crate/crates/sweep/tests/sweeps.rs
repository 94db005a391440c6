use lee2d::renorm::PhysicalParams;
use lee2d::Manifold;
use lee2d_sweep::persist::{csv_string, persist, sidecar_path, Sidecar};
use lee2d_sweep::{run_sweep, Axis, AxisValues, Quantity, Settings, SweepSpec};

fn spec(axis: Axis, values: AxisValues, man: Manifold<f64>, outputs: &[&str]) -> SweepSpec {
    SweepSpec {
        axis,
        values,
        params: PhysicalParams::new(1.0, 0.1, 1.0, 1).unwrap(),
        manifold: man,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        seed: 7,
        settings: Settings::default(),
    }
}

#[test]
fn deficit_ratio_trends_to_one() {
    let s = spec(
        Axis::N,
        AxisValues::List {
            values: vec![1e2, 1e4, 1e6],
        },
        Manifold::sphere(1.0).unwrap(),
        &["compact_deficit_ratio"],
    );
    let r = run_sweep(&s).unwrap();
    let col: Vec<f64> = r
        .column(Quantity::CompactDeficitRatio)
        .unwrap()
        .into_iter()
        .map(Option::unwrap)
        .collect();
    assert_eq!(col.len(), 3);
    let dist: Vec<f64> = col.iter().map(|x| (x - 1.0).abs()).collect();
    assert!(dist[0] > dist[1] && dist[1] > dist[2], "{col:?}");
    assert!(dist[2] < 1e-2);
}

#[test]
fn bare_mass_slope_on_epsilon_axis() {
    for man in [Manifold::plane(), Manifold::sphere(1.0).unwrap()] {
        let s = spec(
            Axis::Epsilon,
            AxisValues::Log {
                from: 1e-6,
                to: 1e-3,
                points: 7,
            },
            man,
            &["mu_bare"],
        );
        let r = run_sweep(&s).unwrap();
        let eps = r.spec.values.expand().unwrap();
        let mu: Vec<f64> = r
            .column(Quantity::MuBare)
            .unwrap()
            .into_iter()
            .map(Option::unwrap)
            .collect();
        let x: Vec<f64> = eps.iter().map(|e| (1.0 / e).ln()).collect();
        let (mx, my) = (x.iter().sum::<f64>() / 7.0, mu.iter().sum::<f64>() / 7.0);
        let num: f64 = x.iter().zip(&mu).map(|(a, b)| (a - mx) * (b - my)).sum();
        let den: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let want = 1.0 / (2.0 * std::f64::consts::PI);
        assert!((num / den - want).abs() < 0.01 * want, "{}", num / den);
    }
}

#[test]
fn identical_specs_give_identical_bytes() {
    let s = spec(
        Axis::Lambda,
        AxisValues::Linear {
            from: 0.0,
            to: 2.0,
            points: 5,
        },
        Manifold::torus(1.0, 2.0).unwrap(),
        &[
            "bound_state_energy",
            "mu_bare",
            "ansatz_energy",
            "lower_bound",
        ],
    );
    let a = csv_string(&run_sweep(&s).unwrap()).unwrap();
    let b = csv_string(&run_sweep(&s).unwrap()).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("axis,value,bound_state_energy,mu_bare,ansatz_energy,lower_bound,"));
}

#[test]
fn persisted_sidecar_describes_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let s = spec(
        Axis::Mu,
        AxisValues::List {
            values: vec![0.5, 2.0],
        },
        Manifold::sphere(1.0).unwrap(),
        &["bound_state_energy"],
    );
    let r = run_sweep(&s).unwrap();
    let side = persist(&r, &path).unwrap();
    assert_eq!(side, sidecar_path(&path));
    let csv = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv, csv_string(&r).unwrap());
    let meta: Sidecar = serde_json::from_str(&std::fs::read_to_string(side).unwrap()).unwrap();
    assert_eq!(meta.rows, 2);
    assert_eq!(meta.config_hash, s.config_hash());
    // mu = 2 exceeds m = 1: recorded, not dropped
    assert_eq!(meta.failed_rows.len(), 1);
    assert_eq!(meta.failed_rows[0].index, 1);
    assert_eq!(csv.lines().count(), 3);
}
