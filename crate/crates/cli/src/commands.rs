use std::f64::consts::PI;
use std::fmt::Write;

use pcrtbp::cover::{self, CoverSurface};
use pcrtbp::dynamics::{self, GridSpec, ProblemKind};
use pcrtbp::ellipsoid::{Census, Ellipsoid};
use pcrtbp::homology::{path_space_ranks, rfh_ranks};
use pcrtbp::moser::{self, RegularizedSurface};
use pcrtbp::orbit_index::{index_report, linearize_orbit, mean_indices};
use pcrtbp::orbits::{self, ScanConfig, SymmetricOrbit};
use pcrtbp::{io, verify};
use serde_json::{json, Value};

use crate::config::{Format, RunConfig};

pub enum Output {
    Json(Value),
    Csv(String),
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] pcrtbp::Error),
    #[error("{0}")]
    Failed(String),
}

type Result<T> = std::result::Result<T, RunError>;

fn surface(cfg: &RunConfig) -> Result<RegularizedSurface> {
    Ok(RegularizedSurface::new(cfg.kind, cfg.primary, cfg.c)?)
}

fn scan(cfg: &RunConfig) -> Result<(RegularizedSurface, Vec<SymmetricOrbit>)> {
    let s = surface(cfg)?;
    let mut sc = ScanConfig { samples_per_circle: cfg.samples, crossings: cfg.crossings.clone(), ..Default::default() };
    sc.shooting.integrator = cfg.integrator();
    let rep = orbits::find_symmetric_orbits(&s, &sc)?;
    log::info!("scan: {} evaluations, {} brackets, {} orbits", rep.evaluated, rep.brackets, rep.orbits.len());
    Ok((s, rep.orbits))
}

pub fn lagrange(cfg: &RunConfig) -> Result<Output> {
    let ProblemKind::Pcrtbp(_) = cfg.kind else {
        return Err(pcrtbp::Error::Unsupported("Lagrange points are listed for the pcrtbp only".into()).into());
    };
    let set = dynamics::lagrange_points(cfg.mu)?;
    let ordered = set.ordering_holds(1e-12);
    if !ordered {
        return Err(RunError::Failed(format!("energy ordering of the Lagrange points fails at mu = {}", cfg.mu)));
    }
    match cfg.format_or(Format::Json) {
        Format::Json => Ok(Output::Json(json!({ "mu": cfg.mu, "points": set.points, "ordering_holds": ordered }))),
        Format::Csv => {
            let mut out = String::from("label,q1,q2,energy\n");
            for p in &set.points {
                writeln!(out, "{},{:.17e},{:.17e},{:.17e}", p.label, p.position[0], p.position[1], p.energy).unwrap();
            }
            Ok(Output::Csv(out))
        }
    }
}

pub fn hill_region(cfg: &RunConfig) -> Result<Output> {
    let w = cfg.window;
    let spec = GridSpec { nx: cfg.grid, ny: cfg.grid, q1_range: [-w, w], q2_range: [-w, w] };
    let grid = dynamics::hill_region(&cfg.kind, cfg.c, spec)?;
    Ok(match cfg.format_or(Format::Csv) {
        Format::Csv => Output::Csv(io::hill_grid_csv(&grid)),
        Format::Json => Output::Json(io::hill_grid_header(&grid)),
    })
}

pub fn circles(cfg: &RunConfig) -> Result<Output> {
    let s = surface(cfg)?;
    let (lp, lm) = moser::fixed_locus_circles(&s, cfg.samples)?;
    Ok(match cfg.format_or(Format::Csv) {
        Format::Csv => Output::Csv(io::circles_csv(&[&lp, &lm])),
        Format::Json => Output::Json(json!({ "surface": io::surface_metadata(&s), "circles": [lp, lm] })),
    })
}

fn orbit_rows(orbits: &[SymmetricOrbit]) -> String {
    let mut out = String::from("id,circle_start,circle_end,crossing,theta0,half_period,type,plane_type,residual,nondegeneracy\n");
    for (k, o) in orbits.iter().enumerate() {
        let plane = o.plane_type.map(|t| t.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{k},{},{},{},{:.17e},{:.17e},{},{plane},{:.3e},{:.6e}",
            o.start_circle, o.end_circle, o.crossing, o.theta0, o.half_period_physical, o.orbit_type, o.residual, o.nondegeneracy
        )
        .unwrap();
    }
    out
}

pub fn find_symmetric(cfg: &RunConfig) -> Result<Output> {
    let (s, found) = scan(cfg)?;
    Ok(match cfg.format_or(Format::Json) {
        Format::Json => {
            Output::Json(json!({ "surface": io::surface_metadata(&s), "orbits": found.iter().map(io::orbit_json).collect::<Vec<_>>() }))
        }
        Format::Csv => Output::Csv(orbit_rows(&found)),
    })
}

pub fn classify(cfg: &RunConfig) -> Result<Output> {
    let (_, found) = scan(cfg)?;
    let rows: Vec<Value> = found
        .iter()
        .enumerate()
        .map(|(k, o)| {
            json!({
                "id": k,
                "circle_start": o.start_circle.to_string(),
                "circle_end": o.end_circle.to_string(),
                "type": o.orbit_type.to_string(),
                "plane_type": o.plane_type.map(|t| t.to_string()),
                "criteria_agree": o.criteria_agree(),
            })
        })
        .collect();
    Ok(match cfg.format_or(Format::Json) {
        Format::Json => Output::Json(json!({ "orbits": rows })),
        Format::Csv => Output::Csv(orbit_rows(&found)),
    })
}

pub fn index(cfg: &RunConfig) -> Result<Output> {
    let (s, found) = scan(cfg)?;
    let ic = cfg.integrator();
    let mut reports = vec![];
    for (k, o) in found.iter().enumerate() {
        let lin = linearize_orbit(&s, o, &ic)?;
        let means = mean_indices(&lin, cfg.m_max)?;
        reports.push(index_report(k, &lin, Some(&means))?);
    }
    Ok(match cfg.format_or(Format::Json) {
        Format::Json => Output::Json(json!({ "reports": reports })),
        Format::Csv => {
            let mut out = String::from("orbit_id,mu_rs,mu_rfh,partner_mu_rs,crossings,mean_rs,mean_cz_double,defect\n");
            for r in &reports {
                let mean = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.orbit_id,
                    r.mu_rs,
                    r.mu_rfh,
                    r.partner_mu_rs,
                    r.crossings.len(),
                    mean(r.mean_rs),
                    mean(r.mean_cz_double),
                    mean(r.defect)
                )
                .unwrap();
            }
            Output::Csv(out)
        }
    })
}

pub fn mean_index(cfg: &RunConfig) -> Result<Output> {
    let (s, found) = scan(cfg)?;
    let ic = cfg.integrator();
    let reports: Vec<_> = found.iter().map(|o| Ok(mean_indices(&linearize_orbit(&s, o, &ic)?, cfg.m_max)?)).collect::<Result<_>>()?;
    Ok(match cfg.format_or(Format::Json) {
        Format::Json => Output::Json(json!({ "m_max": cfg.m_max, "reports": reports })),
        Format::Csv => {
            let mut out = String::from("orbit_id,mean_rs,mean_cz_double,defect\n");
            for (k, r) in reports.iter().enumerate() {
                writeln!(out, "{k},{:.6},{:.6},{:.3e}", r.mean_rs, r.mean_cz_double, r.defect).unwrap();
            }
            Output::Csv(out)
        }
    })
}

pub fn convexity(cfg: &RunConfig) -> Result<Output> {
    let cov = CoverSurface::new(cfg.kind, cfg.primary, cfg.c)?;
    let rep = cover::strict_convexity_check(&cov, cfg.points, cfg.seed)?;
    let v = io::convexity_json(&cfg.kind, cfg.c, Some(cfg.primary), &rep);
    Ok(match cfg.format_or(Format::Json) {
        Format::Json => Output::Json(v),
        Format::Csv => Output::Csv(format!(
            "mu,c,primary,samples,min_restricted_eigenvalue,pass\n{},{:.17e},{},{},{:.17e},{}\n",
            cfg.mu, cfg.c, cfg.primary, rep.samples, rep.min_restricted_eigenvalue, rep.pass
        )),
    })
}

fn pi_multiple(x: f64) -> String {
    let r = x / PI;
    if (r - r.round()).abs() < 1e-12 {
        if r.round() == 1.0 {
            "π".into()
        } else {
            format!("{}π", r.round())
        }
    } else {
        format!("{r:.12}π")
    }
}

pub fn ellipsoid(cfg: &RunConfig) -> Result<Output> {
    let e = Ellipsoid::new(cfg.r1, cfg.r2)?;
    let ic = cfg.integrator();
    let v = match e.census() {
        Census::TwoOrbits { short_period, long_period } => {
            let (zs, ts) = e.short_orbit();
            let (zl, tl) = e.long_orbit();
            let cz_s = cover::reeb_orbit_cz(&e, &zs, ts, &ic)?;
            let cz_l = cover::reeb_orbit_cz(&e, &zl, tl, &ic)?;
            json!({
                "r1": e.r1, "r2": e.r2,
                "census": "two closed orbits",
                "summary": format!("two closed orbits, periods {} and {}", pi_multiple(short_period), pi_multiple(long_period)),
                "periods": [short_period, long_period],
                "cz": [cz_s.to_string(), cz_l.to_string()],
            })
        }
        Census::AllPeriodic { p, q, period } => json!({
            "r1": e.r1, "r2": e.r2,
            "census": "all periodic",
            "summary": format!("all periodic, minimal common period {}", pi_multiple(period)),
            "ratio": [p, q],
            "period": period,
        }),
    };
    Ok(match cfg.format_or(Format::Json) {
        Format::Json => Output::Json(v),
        Format::Csv => Output::Csv(format!("r1,r2,summary\n{},{},{}\n", e.r1, e.r2, v["summary"].as_str().unwrap_or(""))),
    })
}

pub fn homology(cfg: &RunConfig, table: bool) -> Result<Output> {
    let p = path_space_ranks();
    let [lo, hi] = cfg.degrees;
    if table {
        let upto = hi.max(0) as usize;
        return Ok(match cfg.format_or(Format::Json) {
            Format::Json => Output::Json(json!({ "space": "paths in S^2 with ends on S^1", "ranks": io::ranks_json(&p, upto) })),
            Format::Csv => {
                let mut out = String::from("degree,rank\n");
                for (k, r) in p.ranks_up_to(upto).into_iter().enumerate() {
                    writeln!(out, "{k},{r}").unwrap();
                }
                Output::Csv(out)
            }
        });
    }
    let t = rfh_ranks(&p, cfg.d, cfg.n, lo..=hi)?;
    Ok(match cfg.format_or(Format::Json) {
        Format::Json => Output::Json(json!({ "d": cfg.d, "n": cfg.n, "ranks": io::rfh_json(&t) })),
        Format::Csv => {
            let mut out = String::from("degree,rank\n");
            for (k, r) in &t {
                match r {
                    pcrtbp::homology::RfhRank::Rank(n) => writeln!(out, "{k},{n}").unwrap(),
                    pcrtbp::homology::RfhRank::NotComputed => writeln!(out, "{k},not computed").unwrap(),
                }
            }
            Output::Csv(out)
        }
    })
}

/// The output is produced even when checks fail; the second value names the failures.
pub fn run_verify(cfg: &RunConfig) -> Result<(Output, Option<String>)> {
    let vc = verify::VerifyConfig { samples: cfg.points, seed: cfg.seed, integrator: cfg.integrator() };
    let json_out = cfg.format_or(Format::Json) == Format::Json;
    let outcomes = verify::run_all(&vc, |o| {
        if json_out {
            log::info!("{o}");
        } else {
            eprintln!("{o}");
        }
    });
    let unexpected: Vec<u32> = outcomes.iter().filter(|o| !o.pass && !verify::KNOWN_FAILURES.contains(&o.id)).map(|o| o.id).collect();
    let out = match cfg.format_or(Format::Json) {
        Format::Json => {
            Output::Json(json!({ "outcomes": outcomes, "known_failures": verify::KNOWN_FAILURES, "unexpected_failures": unexpected }))
        }
        Format::Csv => {
            let mut s = String::from("id,name,pass,seconds,detail\n");
            for o in &outcomes {
                writeln!(s, "{},{},{},{:.3},\"{}\"", o.id, o.name, o.pass, o.seconds, o.detail.replace('"', "'")).unwrap();
            }
            Output::Csv(s)
        }
    };
    let failed = (!unexpected.is_empty()).then(|| format!("criteria {unexpected:?} failed"));
    Ok((out, failed))
}
