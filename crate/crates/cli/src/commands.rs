use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gait::divergence::{forward_backward, gait_divergence_empirical, EmpiricalMeasure};
use gait::entropy::{gait_entropy, DiscreteDistribution, EntropyOrder};
use gait::infotheory::{conditional_entropy, joint_entropy, mutual_information, JointDistribution};
use gait::io::{self, fmt12};
use gait::kernels::{build_block_gram, KernelSpec, Points, SimilaritySpace};
use gait::modes::{self, CurvatureRule};
use gait::optimize::{
    approximate_measure, barycenter_solve, maxent_solve, ApproxMode, OptimizerConfig, SparsityPenalty, Target, TraceRow,
};
use gait::verify::{self, Injection, SearchConfig};

use crate::args::*;
use crate::manifest::{beside, Recorder};
use crate::Failure;

/// Weights may be off the simplex by this much before being rejected.
const SUM_SLACK: f64 = 1e-6;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

/// Prefix a library error with the file it came from.
fn in_file(path: &Path) -> impl Fn(gait::GaitError) -> Failure + '_ {
    move |e| match e {
        gait::GaitError::NumericalFailure { .. } => Failure::from(e),
        other => invalid(format!("{}: {other}", path.display())),
    }
}

fn write_out(path: &Path, text: &str) -> Result<(), Failure> {
    io::write_file(path, text).map_err(Failure::from)
}

fn emit<W: Write>(out: &mut W, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(|e| invalid(format!("cannot write output: {e}")))
}

struct Ctx {
    rec: Recorder,
}

impl Ctx {
    fn read(&mut self, path: &Path) -> Result<String, Failure> {
        self.rec.read(path).map_err(invalid)
    }

    fn points(&mut self, path: &Path) -> Result<Points, Failure> {
        let text = self.read(path)?;
        io::parse_points(&text).map_err(in_file(path))
    }

    fn gram(&mut self, path: &Path) -> Result<SimilaritySpace, Failure> {
        let text = self.read(path)?;
        io::parse_gram(&text).map_err(in_file(path))
    }

    /// Weight vector of length `n`, normalized when close to the simplex.
    fn dist(&mut self, path: &Path, n: usize) -> Result<DiscreteDistribution, Failure> {
        let text = self.read(path)?;
        let v = io::parse_vector(&text).map_err(in_file(path))?;
        if v.len() != n {
            return Err(invalid(format!("{}: expected {n} weights, found {}", path.display(), v.len())));
        }
        if v.iter().any(|w| *w < 0.0) {
            return Err(invalid(format!("{}: weights must be nonnegative", path.display())));
        }
        let total: f64 = v.iter().sum();
        if (total - 1.0).abs() > SUM_SLACK {
            return Err(invalid(format!("{}: weights sum to {total}, not 1", path.display())));
        }
        DiscreteDistribution::from_weights(DVector::from_vec(v)).map_err(in_file(path))
    }

    fn dist_or_uniform(&mut self, path: Option<&PathBuf>, n: usize) -> Result<DiscreteDistribution, Failure> {
        match path {
            Some(p) => self.dist(p, n),
            None => Ok(DiscreteDistribution::uniform(n)),
        }
    }
}

fn kernel(k: &KernelArgs) -> Result<KernelSpec, Failure> {
    let spec = match k.kernel {
        Family::RbfSq => KernelSpec::rbf_sq(k.sigma),
        Family::ExpMetric => KernelSpec::ExpMetric { sigma: k.sigma, order: k.order },
        Family::Polynomial => KernelSpec::polynomial(k.exponent),
    };
    spec.validate()?;
    Ok(spec)
}

fn optimizer(o: &OptimArgs, batch: Option<usize>) -> Result<OptimizerConfig, Failure> {
    let cfg = OptimizerConfig {
        step_size: o.lr,
        beta1: o.beta1,
        beta2: o.beta2,
        epsilon: o.epsilon,
        max_correction: o.amsgrad,
        steps: o.steps,
        batch_size: batch,
        seed: o.seed,
        temperature: o.temperature,
        early_stop: None,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write_trace(path: Option<&PathBuf>, rows: &[TraceRow]) -> Result<(), Failure> {
    match path {
        Some(p) => write_out(p, &io::format_trace(rows)),
        None => Ok(()),
    }
}

pub fn run<W: Write>(cli: &Cli, out: &mut W) -> Result<(), Failure> {
    let mut ctx = Ctx { rec: Recorder::new() };
    let (name, seed, out_path) = match &cli.command {
        Command::Entropy(a) => ("entropy", None, entropy(&mut ctx, a, out)?),
        Command::Divergence(a) => ("divergence", None, divergence(&mut ctx, a, out)?),
        Command::Maxent(a) => ("maxent", Some(a.optim.seed), maxent(&mut ctx, a, out)?),
        Command::Barycenter(a) => ("barycenter", Some(a.optim.seed), barycenter(&mut ctx, a, out)?),
        Command::Approx(a) => ("approx", Some(a.optim.seed), approx(&mut ctx, a, out)?),
        Command::Modes(a) => ("modes", None, modes_cmd(&mut ctx, a, out)?),
        Command::Mi(a) => ("mi", None, mi(&mut ctx, a, out)?),
        Command::Verify(a) => ("verify", Some(a.seed), verify_cmd(a, out)?),
    };
    let target = cli.manifest.clone().or_else(|| out_path.as_deref().map(beside));
    if let Some(path) = target {
        let manifest = ctx.rec.finish(name, seed);
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| invalid(e.to_string()))?;
        write_out(&path, &(json + "\n"))?;
    }
    Ok(())
}

type Produced = Option<PathBuf>;

fn entropy<W: Write>(ctx: &mut Ctx, a: &EntropyArgs, out: &mut W) -> Result<Produced, Failure> {
    let order: EntropyOrder = a.alpha.parse()?;
    let space = ctx.gram(&a.gram)?;
    let p = ctx.dist(&a.dist, space.len())?;
    let h = gait_entropy(&space, &p, order)?;
    emit(out, &format!("{}\n{}\n", fmt12(h), fmt12(h.exp())))?;
    Ok(None)
}

fn divergence<W: Write>(ctx: &mut Ctx, a: &DivergenceArgs, out: &mut W) -> Result<Produced, Failure> {
    let spec = kernel(&a.kernel)?;
    let x = ctx.points(&a.x)?;
    let y = ctx.points(&a.y)?;
    let p = ctx.dist_or_uniform(a.px.as_ref(), x.len())?;
    let q = ctx.dist_or_uniform(a.qy.as_ref(), y.len())?;
    let blocks = build_block_gram(&x, &y, &spec)?;
    let r = gait_divergence_empirical(&blocks, &p, &q)?;
    let mut text = format!("{}\n{}\n{}\n", fmt12(r.value), fmt12(r.term_log), fmt12(r.term_ratio));
    if a.both {
        let (_, back) = forward_backward(&blocks, &p, &q)?;
        text += &format!("{}\n", fmt12(back));
    }
    emit(out, &text)?;
    Ok(None)
}

fn maxent<W: Write>(ctx: &mut Ctx, a: &MaxentArgs, out: &mut W) -> Result<Produced, Failure> {
    let space = ctx.gram(&a.gram)?;
    let cfg = optimizer(&a.optim, None)?;
    let r = maxent_solve(&space, &cfg)?;
    write_trace(a.optim.trace.as_ref(), &r.trace)?;
    let vec = io::format_vector(r.distribution.as_slice());
    match &a.out {
        Some(path) => {
            write_out(path, &vec)?;
            emit(out, &format!("{}\n", fmt12(r.entropy)))?;
        }
        None => emit(out, &vec)?,
    }
    Ok(a.out.clone())
}

fn barycenter<W: Write>(ctx: &mut Ctx, a: &BarycenterArgs, out: &mut W) -> Result<Produced, Failure> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(&a.images)
        .map_err(|e| invalid(format!("{}: {e}", a.images.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(invalid(format!("{}: no image files", a.images.display())));
    }
    let mut images = Vec::with_capacity(files.len());
    for f in &files {
        let text = ctx.read(f)?;
        images.push(io::parse_grid(&text).map_err(in_file(f))?);
    }
    let cfg = optimizer(&a.optim, a.batch)?;
    let r = barycenter_solve(&images, a.sigma, &cfg)?;
    write_trace(a.optim.trace.as_ref(), &r.trace)?;
    write_out(&a.out, &io::format_pgm(r.barycenter.mass()))?;
    let last = r.trace.last().map_or(f64::NAN, |t| t.objective);
    emit(out, &format!("{}\n", fmt12(last)))?;
    Ok(Some(a.out.clone()))
}

fn approx<W: Write>(ctx: &mut Ctx, a: &ApproxArgs, out: &mut W) -> Result<Produced, Failure> {
    let spec = kernel(&a.kernel)?;
    let atoms = ctx.points(&a.target)?;
    let w = ctx.dist_or_uniform(a.target_weights.as_ref(), atoms.len())?;
    let target = EmpiricalMeasure::new(atoms, w)?;
    let mode = match a.mode {
        Mode::Locations => ApproxMode::Locations,
        Mode::Weights => ApproxMode::Weights,
        Mode::Both => ApproxMode::Both,
    };
    let init = match &a.init {
        Some(path) => {
            let text = ctx.read(path)?;
            io::parse_weighted_points(&text).map_err(in_file(path))?
        }
        None if mode == ApproxMode::Weights => EmpiricalMeasure::uniform(target.atoms.clone())?,
        None => {
            if a.m == 0 || a.m > target.len() {
                return Err(invalid(format!("--m must lie in 1..={} without --init, got {}", target.len(), a.m)));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(a.optim.seed);
            let mut idx = rand::seq::index::sample(&mut rng, target.len(), a.m).into_vec();
            idx.sort_unstable();
            let rows: Vec<&[f64]> = idx.iter().map(|&i| target.atoms.row(i)).collect();
            EmpiricalMeasure::uniform(Points::from_rows(&rows)?)?
        }
    };
    let penalty = a.sparse.then_some(SparsityPenalty {
        weight: a.penalty_weight,
        exponent: a.penalty_exponent,
        prune_threshold: a.prune,
    });
    let cfg = optimizer(&a.optim, a.batch)?;
    let mut t = Target::Empirical(target);
    let r = approximate_measure(&mut t, &init, &spec, mode, penalty.as_ref(), &cfg)?;
    write_trace(a.optim.trace.as_ref(), &r.trace)?;
    write_out(&a.out, &io::format_weighted_points(&r.measure))?;
    let last = r.trace.last().map_or(f64::NAN, |t| t.objective);
    emit(out, &format!("{}\n", fmt12(last)))?;
    Ok(Some(a.out.clone()))
}

fn modes_cmd<W: Write>(ctx: &mut Ctx, a: &ModesArgs, out: &mut W) -> Result<Produced, Failure> {
    let pts = ctx.points(&a.points)?;
    if !(a.scale_min > 0.0 && a.scale_max > a.scale_min) {
        return Err(invalid("scales need 0 < --scale-min < --scale-max"));
    }
    let mut scales = modes::linspace(a.scale_min, a.scale_max, a.scale_count);
    if a.relative {
        let d = modes::diameter(&pts);
        if d <= 0.0 || d.is_nan() {
            return Err(invalid("--relative needs a sample with positive diameter"));
        }
        scales.iter_mut().for_each(|s| *s *= d);
    }
    let sweep = match a.method {
        Method::Diversity => {
            let w = match &a.weights {
                Some(p) => Some(ctx.dist(p, pts.len())?),
                None => None,
            };
            modes::diversity_sweep(&pts, w.as_ref(), KernelSpec::rbf_sq, &scales)?
        }
        Method::Birthday => {
            if a.weights.is_some() {
                return Err(invalid("--weights only applies to the diversity method"));
            }
            modes::birthday_sweep(&pts, &scales, a.order)?
        }
    };
    let rule = CurvatureRule { window: a.window, degree: a.degree, threshold: a.threshold };
    let sel = modes::curvature_select(&sweep, &rule)?;
    let mut text = io::format_sweep(&sel);
    text += &match sel.selected() {
        Some((s, v)) => format!("selected,{},{}\n", fmt12(s), fmt12(v.exp())),
        None => "selected,none,none\n".to_string(),
    };
    match &a.out {
        Some(p) => write_out(p, &text)?,
        None => emit(out, &text)?,
    }
    Ok(a.out.clone())
}

fn mi<W: Write>(ctx: &mut Ctx, a: &MiArgs, out: &mut W) -> Result<Produced, Failure> {
    let text = ctx.read(&a.joint)?;
    let mut table = io::parse_joint(&text).map_err(in_file(&a.joint))?;
    let total = table.sum();
    if (total - 1.0).abs() > SUM_SLACK {
        return Err(invalid(format!("{}: table sums to {total}, not 1", a.joint.display())));
    }
    table /= total;
    let (n, m) = table.shape();
    let kx = match &a.gramx {
        Some(p) => ctx.gram(p)?,
        None => SimilaritySpace::identity(n),
    };
    let ky = match &a.gramy {
        Some(p) => ctx.gram(p)?,
        None => SimilaritySpace::identity(m),
    };
    let j = JointDistribution::new(table, kx, ky)?;
    let lines = [
        ("H[X]", j.entropy_x()),
        ("H[Y]", j.entropy_y()),
        ("H[X,Y]", joint_entropy(&j)),
        ("H[X|Y]", conditional_entropy(&j)),
        ("I[X;Y]", mutual_information(&j)),
    ];
    let text: String = lines.iter().map(|(k, v)| format!("{k} {}\n", fmt12(*v))).collect();
    emit(out, &text)?;
    Ok(None)
}

fn verify_cmd<W: Write>(a: &VerifyArgs, out: &mut W) -> Result<Produced, Failure> {
    let cfg = SearchConfig {
        trials: a.trials,
        seed: a.seed,
        min_size: a.min_size,
        max_size: a.max_size,
        max_dim: SearchConfig::default().max_dim,
        injection: match a.inject {
            Inject::None => Injection::None,
            Inject::EqualDistributions => Injection::EqualDistributions,
            Inject::IdentityGram => Injection::IdentityGram,
            Inject::AllOnesGram => Injection::AllOnesGram,
        },
        records_out: a.out.clone(),
    };
    let text = match a.check {
        Check::Divergence => {
            let s = verify::random_search_divergence(&cfg)?;
            let mut t = format!(
                "trials {}\nmin_value {}\ncounterexamples {}\nhistogram_negative {}\n",
                s.trials,
                fmt12(s.min_value),
                s.counterexamples.len(),
                s.histogram.negative
            );
            for (i, c) in s.histogram.counts.iter().enumerate() {
                let (lo, hi) = (s.histogram.edges[i], s.histogram.edges[i + 1]);
                t += &format!("histogram [{},{}) {c}\n", fmt12(lo), fmt12(hi));
            }
            t += &format!("histogram_overflow {}\n", s.histogram.overflow);
            t
        }
        Check::Hessian => {
            let s = verify::hessian_spectrum_search(&cfg)?;
            format!(
                "trials {}\nmin_eigenvalue {}\ncounterexamples {}\n",
                s.trials,
                fmt12(s.min_eigenvalue),
                s.counterexamples.len()
            )
        }
        Check::Segment => {
            let s = verify::segment_search(&cfg)?;
            format!("trials {}\nmax_gap {}\ncounterexamples {}\n", s.trials, fmt12(s.max_gap), s.counterexamples.len())
        }
        Check::Lines => {
            let rows = verify::parallel_lines_check(&a.phis, a.lines_n)?;
            let mut t = String::from("phi,numeric,analytic,abs_error\n");
            for r in rows {
                t += &format!("{},{},{},{}\n", fmt12(r.phi), fmt12(r.numeric), fmt12(r.analytic), fmt12(r.abs_error));
            }
            t
        }
    };
    emit(out, &text)?;
    Ok(a.out.clone())
}
