//! One runner per representation; each returns the CSV artifacts it produced.

use stochlab::doi::{
    basis_state, build_liouvillian_doi, doi_shift, evolve_state, mean_and_variance, shift_state, DoiError,
};
use stochlab::fpe::{build_fpe_generator, evolve_pdf, CellGrid, PdfGrid};
use stochlab::perturbation::{dyson_moment_series, QuadratureOptions};
use stochlab::rate_loop::{mean_field_solve, one_loop_solve_with, LoopOptions, RateModel};
use stochlab::sde::{simulate_ensemble, InitialState, Scheme};
use stochlab::ssa::{simulate_ssa_ensemble, InitialCount};
use stochlab::stats::MomentSeries;

use crate::config::Config;
use crate::error::CliError;

/// A named CSV file held in memory until the run succeeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Shortest round-trip text, switching to exponent form for tiny and huge
/// magnitudes.
fn num(x: f64) -> String {
    format!("{x:?}")
}

struct Table {
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &'static [&'static str]) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn push_f64(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| num(x)).collect());
    }

    fn into_artifact(self, name: &str) -> Artifact {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        Artifact {
            name: name.to_string(),
            bytes: w.into_inner().expect("in-memory flush"),
        }
    }
}

fn moment_table(series: &MomentSeries) -> Table {
    let mut table = Table::new(&["t", "mean", "stderr", "var", "stderr_var"]);
    for p in &series.points {
        table.push_f64(&[p.t, p.mean.value, p.mean.stderr, p.variance.value, p.variance.stderr]);
    }
    table
}

pub fn run_sde(cfg: &Config, seed: u64) -> Result<Vec<Artifact>, CliError> {
    let spec = cfg.langevin()?;
    let sde = cfg.sde.as_ref().ok_or(CliError::MissingSection("sde"))?;
    let time = cfg.time()?;
    let grid = time.grid()?;
    let scheme = sde
        .scheme
        .map(Scheme::from)
        .unwrap_or_else(|| Scheme::for_interpretation(spec.interpretation));
    let init = if sde.phi0_std > 0.0 {
        InitialState::Gaussian {
            mean: sde.phi0,
            std: sde.phi0_std,
        }
    } else {
        InitialState::Point(sde.phi0)
    };
    let all = simulate_ensemble(&spec, scheme, init, &grid, sde.n_traj, seed).map_err(CliError::model)?;
    let mut points = Vec::new();
    for t in time.output_times()? {
        let i = grid
            .index_of(t)
            .ok_or_else(|| CliError::ModelInvalid(format!("output time {t} is not a grid point")))?;
        points.push(all.points[i]);
    }
    let series = MomentSeries {
        points,
        n_samples: all.n_samples,
    };
    Ok(vec![moment_table(&series).into_artifact("sde.csv")])
}

pub fn run_fpe(cfg: &Config) -> Result<Vec<Artifact>, CliError> {
    let spec = cfg.langevin()?;
    let fpe = cfg.fpe.as_ref().ok_or(CliError::MissingSection("fpe"))?;
    let cells = CellGrid::new(fpe.phi_min, fpe.phi_max, fpe.n_cells).map_err(CliError::model)?;
    let gen = build_fpe_generator(&spec, cells, spec.interpretation).map_err(CliError::model)?;
    let mut p = PdfGrid::delta(cells, fpe.phi0).map_err(CliError::model)?;
    let mut now = 0.0;
    // deterministic moments carry zero standard errors so they compare
    // column-for-column with Monte Carlo output
    let mut table = Table::new(&["t", "mean", "stderr", "var", "stderr_var"]);
    for t in cfg.time()?.output_times()? {
        p = evolve_pdf(&gen, &p, t - now).map_err(CliError::model)?;
        now = t;
        table.push_f64(&[t, p.mean(), 0.0, p.variance(), 0.0]);
    }
    let mut out = vec![table.into_artifact("fpe.csv")];
    if fpe.write_pdf {
        let mut pdf = Table::new(&["phi_center", "density"]);
        for (x, d) in p.rows() {
            pdf.push_f64(&[x, d]);
        }
        out.push(pdf.into_artifact("fpe_pdf.csv"));
    }
    if fpe.dump_generator {
        let mut g = Table::new(&["row", "col", "value"]);
        for (i, j, v) in gen.triplets() {
            g.push(vec![i.to_string(), j.to_string(), num(v)]);
        }
        out.push(g.into_artifact("fpe_generator.csv"));
    }
    Ok(out)
}

pub fn run_doi(cfg: &Config) -> Result<Vec<Artifact>, CliError> {
    let spec = cfg.master()?;
    let doi = cfg.doi.as_ref().ok_or(CliError::MissingSection("doi"))?;
    let n = doi.truncation;
    if doi.n0 > n {
        return Err(CliError::model(DoiError::OutOfRange { n: doi.n0, max: n }));
    }
    let p0 = basis_state(n, doi.n0);
    let times = cfg.time()?.output_times()?;
    let mut table = Table::new(&["t", "mean_n", "var_n", "leak"]);
    let l = build_liouvillian_doi(&spec, n).map_err(CliError::model)?;
    if doi.shifted {
        let s = doi_shift(&spec, n).map_err(CliError::model)?;
        let mut q = shift_state(&p0);
        let mut now = 0.0;
        for t in times {
            q = s.evolve(&q, t - now).map_err(CliError::model)?;
            now = t;
            let mass = s.moment(&q, 0);
            let mean = s.moment(&q, 1) / mass;
            let var = s.moment(&q, 2) / mass - mean * mean;
            table.push_f64(&[t, mean, var, 1.0 - mass]);
        }
    } else {
        let mut p = p0;
        let mut now = 0.0;
        for t in times {
            p = evolve_state(&l, &p, t - now).map_err(CliError::model)?;
            now = t;
            let (mean, var) = mean_and_variance(&p);
            table.push_f64(&[t, mean, var, 1.0 - p.iter().sum::<f64>()]);
        }
    }
    let mut out = vec![table.into_artifact("doi.csv")];
    if doi.dump_matrix {
        let mut m = Table::new(&["row", "col", "value"]);
        for (i, j, v) in l.matrix.triplets() {
            m.push(vec![i.to_string(), j.to_string(), num(v)]);
        }
        out.push(m.into_artifact("doi_matrix.csv"));
    }
    Ok(out)
}

pub fn run_ssa(cfg: &Config, seed: u64) -> Result<Vec<Artifact>, CliError> {
    let spec = cfg.master()?;
    let ssa = cfg.ssa.as_ref().ok_or(CliError::MissingSection("ssa"))?;
    let times = cfg.time()?.output_times()?;
    let ens = simulate_ssa_ensemble(&spec, &times, InitialCount::Fixed(ssa.n0), ssa.n_traj, seed)
        .map_err(CliError::model)?;
    let mut out = vec![moment_table(&ens.moments).into_artifact("ssa.csv")];
    if ssa.histograms {
        let mut h = Table::new(&["t", "n", "count"]);
        for (t, hist) in times.iter().zip(&ens.histograms) {
            for (n, c) in hist.iter().enumerate() {
                h.push(vec![num(*t), n.to_string(), c.to_string()]);
            }
        }
        out.push(h.into_artifact("ssa_histograms.csv"));
    }
    Ok(out)
}

pub fn run_perturb(cfg: &Config) -> Result<Vec<Artifact>, CliError> {
    let spec = cfg.master()?;
    let p = cfg.perturb.as_ref().ok_or(CliError::MissingSection("perturb"))?;
    let opts = QuadratureOptions::default();
    let mut table = Table::new(&["t", "order", "moment_estimate", "exact_reference", "abs_error"]);
    for t in cfg.time()?.output_times()? {
        let s = dyson_moment_series(&spec, p.truncation, p.n0, p.max_order, t, p.representation.into(), &opts)
            .map_err(CliError::model)?;
        for o in &s.orders {
            table.push(vec![
                num(t),
                o.order.to_string(),
                num(o.partial_sum),
                num(s.exact),
                num((o.partial_sum - s.exact).abs()),
            ]);
        }
    }
    Ok(vec![table.into_artifact("perturb.csv")])
}

pub fn run_rateloop(cfg: &Config) -> Result<Vec<Artifact>, CliError> {
    let r = cfg.rateloop.as_ref().ok_or(CliError::MissingSection("rateloop"))?;
    let model = RateModel {
        lambda: r.lambda,
        diffusion: r.diffusion,
        dim: r.dim,
        a0: r.a0,
    }
    .validate()
    .map_err(CliError::model)?;
    let grid = cfg.time()?.grid()?;
    let opts = LoopOptions {
        loop_scale: r.loop_scale,
        ..LoopOptions::default()
    };
    let mf = mean_field_solve(&model, &grid);
    let one_loop = one_loop_solve_with(&model, &grid, &opts).map_err(CliError::model)?;
    let mut table = Table::new(&["t", "a_mean_field", "a_one_loop", "correction"]);
    for ((t, m), a) in grid.points().iter().zip(&mf).zip(&one_loop) {
        table.push_f64(&[*t, *m, *a, a - m]);
    }
    Ok(vec![table.into_artifact("rateloop.csv")])
}
