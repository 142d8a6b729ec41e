use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use caasr::baselines::{
    bpr_train, cofactor_train, graphae, graphae_train, BprConfig, BprParams, BprRecommender, CofactorConfig,
    GraphAeConfig, KnnRecommender,
};
use caasr::eval::{compare_reports, evaluate, read_report, write_report, EvalOptions, EvalReport, SessionModel};
use caasr::graph::io::{read_chebyshev_term, read_graph, read_sppmi, write_chebyshev_term, write_graph, write_sppmi};
use caasr::graph::{basis_from_adjacency, build_adjacency, build_sppmi, count_cooccurrence, ChebyshevBasis};
use caasr::ingest::{
    build_sequences, filter_dataset, load_interactions, read_dataset, read_vocab, split_train_test, write_dataset,
    write_interactions, write_vocab, FilterThresholds, SequenceDataset, SplitTag,
};
use caasr::model::{self, graph_embed, CaasrConfig, CaasrParams, GruRecommender, GruWeights};
use caasr::synth::{generate, to_events, SynthConfig};
use caasr::tensor::checkpoint::{read_checkpoint, write_checkpoint};
use caasr::tensor::{DenseTensor, ParamStore};
use caasr::{baselines, Error};

use crate::config::{ModelKind, RunConfig};
use crate::error::{CliError, CliResult};

pub const TRAIN_FILE: &str = "train.tsv";
pub const TEST_FILE: &str = "test.tsv";
pub const USERS_FILE: &str = "users.tsv";
pub const ITEMS_FILE: &str = "items.tsv";
pub const GRAPH_FILE: &str = "graph.txt";
pub const SPPMI_FILE: &str = "sppmi.txt";
pub const SYNTH_FILE: &str = "synth.tsv";

pub fn cheb_file(k: usize) -> String {
    format!("cheb_{k}.txt")
}

pub fn checkpoint_file(model: ModelKind) -> String {
    format!("{}.ckpt", model.name())
}

pub fn loss_file(model: ModelKind) -> String {
    format!("{}.loss.tsv", model.name())
}

pub fn report_file(model: ModelKind) -> String {
    format!("{}.report.tsv", model.name())
}

/// Writes through a temporary sibling and renames it into place, so an
/// interrupted run never leaves a truncated artifact under the final name.
pub fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> caasr::Result<()>) -> CliResult<()> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.partial"));
    match write(&tmp) {
        Ok(()) => {
            fs::rename(&tmp, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e.into())
        }
    }
}

pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn ensure_out(&self) -> CliResult<()> {
        fs::create_dir_all(&self.out)?;
        Ok(())
    }

    fn dump_config(&self, name: &str) -> CliResult<()> {
        let text = self.cfg.dump();
        write_atomic(&self.path(name), |p| Ok(fs::write(p, &text)?))
    }

    fn require(&self, name: &str, hint: &str) -> CliResult<PathBuf> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::Mismatch(format!("{} not found; run {hint} first", p.display())).into())
        }
    }

    fn load_split(&self, split: SplitTag) -> CliResult<SequenceDataset> {
        let file = match split {
            SplitTag::Test => TEST_FILE,
            _ => TRAIN_FILE,
        };
        let users = read_vocab(self.require(USERS_FILE, "prepare")?)?;
        let items = read_vocab(self.require(ITEMS_FILE, "prepare")?)?;
        Ok(read_dataset(self.require(file, "prepare")?, split, users, items)?)
    }

    fn load_basis(&self, order: usize) -> CliResult<ChebyshevBasis<f64>> {
        let mut terms = Vec::with_capacity(order + 1);
        for k in 0..=order {
            let (stored_k, t) = read_chebyshev_term(self.require(&cheb_file(k), "build-graph")?)?;
            if stored_k != k {
                return Err(Error::Mismatch(format!("{} holds term {stored_k}", cheb_file(k))).into());
            }
            terms.push(t);
        }
        Ok(ChebyshevBasis::from_terms(terms)?)
    }

    fn model_config(&self, model: ModelKind, order: usize) -> CaasrConfig {
        let c = &self.cfg;
        CaasrConfig {
            latent_dim: c.latent_dim_for(model),
            cheb_order: order,
            dropout_rate: c.dropout_rate,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate_for(model),
            l2_lambda: c.l2_lambda,
            max_epochs: c.max_epochs,
            seed: c.seed,
            rms_decay: c.rms_decay,
            rms_epsilon: c.rms_epsilon,
            negatives: c.negatives,
        }
    }
}

fn percent(x: f64) -> String {
    format!("{:.3}%", 100.0 * x)
}

pub fn prepare(ctx: &Context) -> CliResult<String> {
    let c = &ctx.cfg;
    if c.input.is_empty() {
        return Err(CliError::Usage("no input set; pass --set input=<interactions.tsv>".into()));
    }
    let input = Path::new(&c.input);
    if !input.is_file() {
        return Err(CliError::Usage(format!("input {} does not exist", input.display())));
    }
    let log = load_interactions(input)?;
    let th = FilterThresholds {
        min_user: c.min_user,
        min_item: c.min_item,
        max_user: c.max_user,
        min_unique_items: c.min_unique,
    };
    let ds = build_sequences(&filter_dataset(&log, th)?)?;
    let (train, test) = split_train_test(&ds, c.split_ratio, c.split_seed())?;

    ctx.ensure_out()?;
    write_atomic(&ctx.path(TRAIN_FILE), |p| write_dataset(p, &train))?;
    write_atomic(&ctx.path(TEST_FILE), |p| write_dataset(p, &test))?;
    write_atomic(&ctx.path(USERS_FILE), |p| write_vocab(p, &train.users))?;
    write_atomic(&ctx.path(ITEMS_FILE), |p| write_vocab(p, &train.items))?;
    ctx.dump_config("prepare.config")?;

    let users = ds.len();
    let items = ds.n_items();
    let interactions: usize = ds
        .sequences
        .iter()
        .map(|s| s.items.iter().collect::<HashSet<_>>().len())
        .sum();
    let mut out = String::new();
    writeln!(out, "#users\t{users}").unwrap();
    writeln!(out, "#items\t{items}").unwrap();
    writeln!(out, "#interactions\t{interactions}").unwrap();
    writeln!(out, "avg.len\t{:.3}", ds.n_events() as f64 / users as f64).unwrap();
    writeln!(out, "data density\t{}", percent(interactions as f64 / (users as f64 * items as f64))).unwrap();
    writeln!(out, "train sequences\t{}", train.len()).unwrap();
    writeln!(out, "test sequences\t{}", test.len()).unwrap();
    writeln!(out, "train items\t{}", train.n_items()).unwrap();
    Ok(out)
}

pub fn build_graph(ctx: &Context) -> CliResult<String> {
    let c = &ctx.cfg;
    let train = ctx.load_split(SplitTag::Train)?;
    let counts = count_cooccurrence(&train)?;
    let adj = build_adjacency::<f64>(&counts, c.graph_threshold)?;
    let order = c.cheb_order.max(c.gae_order());
    let basis = basis_from_adjacency(&adj.matrix, order)?;
    let sppmi = build_sppmi::<f64>(&counts, c.sppmi_shift)?;

    write_atomic(&ctx.path(GRAPH_FILE), |p| write_graph(p, &adj))?;
    for (k, t) in basis.terms().iter().enumerate() {
        write_atomic(&ctx.path(&cheb_file(k)), |p| write_chebyshev_term(p, k, t))?;
    }
    let mut k = order + 1;
    while ctx.path(&cheb_file(k)).is_file() {
        fs::remove_file(ctx.path(&cheb_file(k)))?;
        k += 1;
    }
    write_atomic(&ctx.path(SPPMI_FILE), |p| write_sppmi(p, &sppmi))?;
    ctx.dump_config("build-graph.config")?;

    let mut out = String::new();
    if let Some(w) = adj.warning() {
        writeln!(out, "warning: {w}").unwrap();
    }
    writeln!(out, "items\t{}", adj.dim()).unwrap();
    writeln!(out, "edges\t{}", adj.n_edges).unwrap();
    writeln!(out, "graph density\t{}", percent(adj.density())).unwrap();
    writeln!(out, "chebyshev terms\t{}", basis.terms().len()).unwrap();
    writeln!(out, "sppmi entries\t{}", sppmi.nnz()).unwrap();
    Ok(out)
}

pub fn train(ctx: &Context) -> CliResult<String> {
    let c = &ctx.cfg;
    let model = c.model;
    let train = ctx.load_split(SplitTag::Train)?;
    let (named, losses) = match model {
        ModelKind::Caasr => {
            let basis = ctx.load_basis(c.cheb_order)?;
            let out = model::train(&ctx.model_config(model, c.cheb_order), &train, &basis)?;
            (out.store.named_values(), out.epoch_losses)
        }
        ModelKind::Gru4Rec => {
            let out = model::train_gru4rec::<f64>(&ctx.model_config(model, 0), &train)?;
            (out.store.named_values(), out.epoch_losses)
        }
        ModelKind::Bpr | ModelKind::BprKnn => {
            let cfg = BprConfig {
                latent_dim: c.latent_dim_for(model),
                learning_rate: c.learning_rate_for(model),
                l2_reg: c.bpr_reg,
                max_epochs: c.max_epochs,
                negatives: c.bpr_negatives,
                seed: c.seed,
            };
            let out = bpr_train::<f64>(&train, &cfg)?;
            (out.params.named(), out.epoch_losses)
        }
        ModelKind::PCofactor => {
            let sppmi = read_sppmi::<f64>(ctx.require(SPPMI_FILE, "build-graph")?)?;
            let cfg = CofactorConfig {
                model: ctx.model_config(model, 0),
                factor_weight: c.factor_weight,
            };
            let out = cofactor_train(&train, &sppmi, &cfg)?;
            (out.store.named_values(), out.epoch_losses)
        }
        ModelKind::PGraphAe => {
            let adj = read_graph::<f64>(ctx.require(GRAPH_FILE, "build-graph")?)?;
            let basis = ctx.load_basis(c.gae_order())?;
            let cfg = GraphAeConfig {
                model: ctx.model_config(model, c.gae_order()),
                neg_multiplier: c.neg_multiplier,
                link_weight: c.link_weight,
                tie_weight: c.tie_weight,
            };
            let out = graphae_train(&train, &basis, &adj, &cfg)?;
            (out.store.named_values(), out.epoch_losses)
        }
    };
    write_atomic(&ctx.path(&checkpoint_file(model)), |p| write_checkpoint(p, &named))?;
    let trace = model::format_loss_trace(&losses);
    write_atomic(&ctx.path(&loss_file(model)), |p| Ok(fs::write(p, &trace)?))?;
    ctx.dump_config(&format!("train.{}.config", model.name()))?;

    let mut out = String::new();
    writeln!(out, "model\t{}", model.name()).unwrap();
    writeln!(out, "epochs\t{}", losses.len()).unwrap();
    if let Some(l) = losses.last() {
        writeln!(out, "final loss\t{l:.6}").unwrap();
    }
    writeln!(out, "checkpoint\t{}", ctx.path(&checkpoint_file(model)).display()).unwrap();
    Ok(out)
}

enum Loaded {
    Gru(GruRecommender<f64>),
    Bpr(BprRecommender<f64>),
    Knn(KnnRecommender<f64>),
}

fn mismatch(msg: String) -> CliError {
    Error::Mismatch(msg).into()
}

fn table(store: &ParamStore<f64>, name: &str) -> CliResult<DenseTensor<f64>> {
    Ok(store.value(store.require(name)?).clone())
}

fn load_model(ctx: &Context, ckpt: &Path, n_items: usize) -> CliResult<Loaded> {
    let c = &ctx.cfg;
    let model = c.model;
    let tensors = read_checkpoint::<f64>(ckpt)?;
    let store = ParamStore::from_named_values(tensors.clone());
    let gru = || -> CliResult<GruWeights<f64>> { Ok(GruWeights::from_store(&store)?) };
    let loaded = match model {
        ModelKind::Caasr => {
            let params = CaasrParams::from_store(&store)?;
            if params.order() != c.cheb_order {
                return Err(mismatch(format!(
                    "checkpoint has order {} but cheb_order = {}",
                    params.order(),
                    c.cheb_order
                )));
            }
            let basis = ctx.load_basis(params.order())?;
            if basis.dim() != params.theta[0].rows() {
                return Err(mismatch("graph files and checkpoint cover different items".into()));
            }
            Loaded::Gru(GruRecommender::new(graph_embed(&params.theta, &basis)?, params.gru))
        }
        ModelKind::Gru4Rec => {
            if store.id(&model::theta_name(1)).is_some() {
                return Err(mismatch("checkpoint holds a graph filter bank, not a gru4rec model".into()));
            }
            Loaded::Gru(GruRecommender::new(table(&store, &model::theta_name(0))?, gru()?))
        }
        ModelKind::PCofactor => Loaded::Gru(GruRecommender::new(table(&store, baselines::cofactor::Z_SEQ)?, gru()?)),
        ModelKind::PGraphAe => Loaded::Gru(GruRecommender::new(table(&store, graphae::Z_SEQ)?, gru()?)),
        ModelKind::Bpr => Loaded::Bpr(BprRecommender {
            params: BprParams::from_named(&tensors)?,
        }),
        ModelKind::BprKnn => Loaded::Knn(KnnRecommender {
            params: BprParams::from_named(&tensors)?,
            mode: c.knn_query,
        }),
    };
    let (rows, cols) = match &loaded {
        Loaded::Gru(m) => (m.items.rows(), m.items.cols()),
        Loaded::Bpr(m) => (m.params.item_factors.rows(), m.params.item_factors.cols()),
        Loaded::Knn(m) => (m.params.item_factors.rows(), m.params.item_factors.cols()),
    };
    if rows != n_items {
        return Err(mismatch(format!("checkpoint covers {rows} items, prepared data has {n_items}")));
    }
    if let Some(d) = c.latent_dim {
        if d != cols {
            return Err(mismatch(format!("checkpoint has latent_dim {cols}, config says {d}")));
        }
    }
    Ok(loaded)
}

pub fn evaluate_cmd(ctx: &Context, checkpoint: Option<&Path>) -> CliResult<String> {
    let c = &ctx.cfg;
    let test = ctx.load_split(SplitTag::Test)?;
    let ckpt = match checkpoint {
        Some(p) => p.to_path_buf(),
        None => ctx.require(&checkpoint_file(c.model), "train")?,
    };
    let opts = EvalOptions {
        ks: c.ks.clone(),
        exclude_seen: c.exclude_seen,
    };
    fn run<M: SessionModel>(m: &M, test: &SequenceDataset, opts: &EvalOptions) -> caasr::Result<EvalReport> {
        evaluate(m, test, opts)
    }
    let report = match load_model(ctx, &ckpt, test.n_items())? {
        Loaded::Gru(m) => run(&m, &test, &opts)?,
        Loaded::Bpr(m) => run(&m, &test, &opts)?,
        Loaded::Knn(m) => run(&m, &test, &opts)?,
    };
    let path = ctx.path(&report_file(c.model));
    write_atomic(&path, |p| write_report(p, &report))?;
    ctx.dump_config(&format!("evaluate.{}.config", c.model.name()))?;

    let mut out = String::new();
    writeln!(out, "model\t{}", c.model.name()).unwrap();
    writeln!(out, "events\t{}", report.n_events).unwrap();
    for (k, v) in &report.recall {
        writeln!(out, "Recall@{k}\t{v:.4}").unwrap();
    }
    for (k, v) in &report.mrr {
        writeln!(out, "MRR@{k}\t{v:.4}").unwrap();
    }
    writeln!(out, "report\t{}", path.display()).unwrap();
    Ok(out)
}

/// `reports` alternate baseline and candidate: `a1 b1 [a2 b2 ...]`; several
/// pairs are pooled into one event set.
pub fn compare(reports: &[PathBuf]) -> CliResult<String> {
    if reports.len() < 2 || !reports.len().is_multiple_of(2) {
        return Err(CliError::Usage("compare expects report pairs: A B [A B ...]".into()));
    }
    let load = |p: &PathBuf| read_report(p).map_err(CliError::from);
    let a: Vec<EvalReport> = reports.iter().step_by(2).map(load).collect::<CliResult<_>>()?;
    let b: Vec<EvalReport> = reports.iter().skip(1).step_by(2).map(load).collect::<CliResult<_>>()?;
    let (a, b) = if a.len() == 1 {
        (a.into_iter().next().unwrap(), b.into_iter().next().unwrap())
    } else {
        let ks = a[0].ks();
        (EvalReport::pool(&a, &ks)?, EvalReport::pool(&b, &ks)?)
    };
    let cmp = compare_reports(&a, &b)?;
    Ok(cmp.render())
}

pub fn synth(ctx: &Context) -> CliResult<String> {
    let c = &ctx.cfg;
    let cfg = SynthConfig {
        n_items: c.synth_items,
        n_sequences: c.synth_sequences,
        seq_len_range: c.synth_len_min..=c.synth_len_max,
        n_bundles: c.synth_bundles,
        bundle_size: c.synth_bundle_size,
        markov_weight: c.synth_markov_weight,
        markov_fanout: c.synth_markov_fanout,
        seed: c.seed,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let ds = generate(&cfg)?;
    ctx.ensure_out()?;
    let path = ctx.path(SYNTH_FILE);
    write_atomic(&path, |p| write_interactions(p, &to_events(&ds)))?;
    ctx.dump_config("synth.config")?;
    Ok(format!(
        "sequences\t{}\nevents\t{}\noutput\t{}\n",
        ds.len(),
        ds.n_events(),
        path.display()
    ))
}
