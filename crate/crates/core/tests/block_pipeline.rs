use isoblock::block::{build_block, verify_block, BlockParams, BoundaryLabel, VerifyOptions};
use isoblock::suite::SaddleSetup;
use isoblock::{Error, Exec};

fn small(exec: Exec) -> (isoblock::suite::BlockSetup, BlockParams) {
    let params = BlockParams { exec, ..BlockParams::default() };
    let setup = SaddleSetup { grid_n: 41, ..SaddleSetup::default() }.build(params.clone()).unwrap();
    (setup, params)
}

#[test]
fn coarse_saddle_block_verifies() {
    let (s, p) = small(Exec::Parallel);
    let block = build_block(s.generator.as_ref(), &s.functionals, s.grid.clone(), &p).unwrap();
    assert!(block.delta > 0.0 && block.delta < block.epsilon);
    assert!(block.count(BoundaryLabel::Egress) > 0);
    assert!(block.count(BoundaryLabel::Ingress) > 0);
    let report = verify_block(&block, s.generator.as_ref(), &VerifyOptions { orbits: 20, ..VerifyOptions::default() }).unwrap();
    assert!(report.k_interior && report.exit_set_closed && report.all_labeled, "{report:?}");
}

#[test]
fn sequential_matches_parallel() {
    let run = |exec| {
        let (s, p) = small(exec);
        let b = build_block(s.generator.as_ref(), &s.functionals, s.grid.clone(), &p).unwrap();
        serde_json::to_string(&b).unwrap()
    };
    assert_eq!(run(Exec::Sequential), run(Exec::Parallel));
}

#[test]
fn boundary_values_bracket_delta() {
    let (s, p) = small(Exec::Parallel);
    let b = build_block(s.generator.as_ref(), &s.functionals, s.grid.clone(), &p).unwrap();
    for x in &b.boundary_samples {
        assert!((x.g_plus.max(x.g_minus) - b.delta).abs() <= b.band + 1e-12);
    }
    for x in &b.interior_samples {
        assert!(x.g_plus.max(x.g_minus) - b.delta < -b.band);
    }
}

#[test]
fn delta_outside_range_is_rejected() {
    let (s, mut p) = small(Exec::Parallel);
    p.delta = Some(5.0);
    let err = build_block(s.generator.as_ref(), &s.functionals, s.grid.clone(), &p).unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)), "{err}");
}

#[test]
fn csv_has_one_row_per_sample() {
    let (s, p) = small(Exec::Parallel);
    let b = build_block(s.generator.as_ref(), &s.functionals, s.grid.clone(), &p).unwrap();
    let mut out = Vec::new();
    b.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("x_1,x_2,g_plus,g_minus,label,flagged\n"));
    assert_eq!(text.lines().count(), 1 + b.interior_samples.len() + b.boundary_samples.len());
}
