use pcrtbp::dynamics::{hill_region, lagrange_points, GridSpec, ProblemKind};
use pcrtbp::homology::{path_space_ranks, rfh_ranks};
use pcrtbp::io;
use pcrtbp::moser::{fixed_locus_circles, RegularizedSurface};
use pcrtbp::Primary;

#[test]
fn hill_grid_csv_has_one_row_per_cell() {
    let kind = ProblemKind::pcrtbp(0.1).unwrap();
    let c = lagrange_points(0.1).unwrap().l(1).energy - 0.2;
    let spec = GridSpec { nx: 20, ny: 10, ..GridSpec::default() };
    let grid = hill_region(&kind, c, spec).unwrap();
    let csv = io::hill_grid_csv(&grid);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("q1,q2,U,inside,component"));
    assert_eq!(lines.count(), 200);
    let h = io::hill_grid_header(&grid);
    assert_eq!(h["nx"], 20);
    assert_eq!(h["two_bounded"]["holds"], true);
}

#[test]
fn circles_csv_round_trips_numbers() {
    let kind = ProblemKind::pcrtbp(0.1).unwrap();
    let c = lagrange_points(0.1).unwrap().l(1).energy - 0.2;
    let s = RegularizedSurface::new(kind, Primary::Moon, c).unwrap();
    let (lp, lm) = fixed_locus_circles(&s, 16).unwrap();
    let csv = io::circles_csv(&[&lp, &lm]);
    assert_eq!(csv.lines().count(), 33);
    let row: Vec<f64> = csv.lines().nth(2).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[1], lp.samples[1].theta);
    assert_eq!(row[2], lp.samples[1].f);
    assert_eq!(io::surface_metadata(&s)["primary"], "Moon");
}

#[test]
fn rank_exports() {
    let v = io::ranks_json(&path_space_ranks(), 4);
    assert_eq!(v["1"], 3);
    assert_eq!(v["tail"]["rank"], 4);
    let t = rfh_ranks(&path_space_ranks(), 1, 2, -1..=2).unwrap();
    let v = io::rfh_json(&t);
    assert_eq!(v["0"], "not computed");
    assert_eq!(v["-1"], 4);
}
