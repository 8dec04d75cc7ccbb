//! Asymmetric tri-training.
//!
//! Two predictors `A1`, `A2` are pre-trained on the observed ratings and label
//! the grid pairs on which they agree within `epsilon`; a third predictor `A3`
//! (naive objective) is then refined on those pseudo-labels. Each iteration
//! trains all three for `n_steps` epochs on the current pseudo-labeled set and
//! relabels from a fresh sample of pairs.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::index;

use crate::domain::{check_shape, Predictor, PseudoLabel, PseudoLabeledSet, RatingDataset};
use crate::error::{Error, Result};
use crate::loss::{ideal_loss, pseudo_loss, LossKind, PointwiseLoss};
use crate::mf::{
    ips_samples, naive_samples, pseudo_samples, train_samples_with, Adam, FactorModel, Objective,
    Sample, TrainConfig,
};
use crate::rng::{derive_seed, seeded};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct TriConfig {
    pub epsilon: f64,
    pub n_iterations: usize,
    /// Epochs over the pseudo-labeled set per iteration.
    pub n_steps: usize,
    pub dprime_fraction: f64,
    pub seed: u64,
    pub a1: TrainConfig,
    pub a2: TrainConfig,
    pub a3: TrainConfig,
    /// Loss used for the recorded bound terms.
    pub trace_loss: LossKind,
}

impl Default for TriConfig {
    fn default() -> Self {
        let base = TrainConfig::default();
        Self {
            epsilon: 0.1,
            n_iterations: 10,
            n_steps: 10,
            dprime_fraction: 1.0,
            seed: 0,
            a1: TrainConfig {
                seed: 1,
                ..base.clone()
            },
            a2: TrainConfig {
                seed: 2,
                ..base.clone()
            },
            a3: TrainConfig { seed: 3, ..base },
            trace_loss: LossKind::Absolute,
        }
    }
}

impl TriConfig {
    /// Same hyperparameters for all three predictors, with distinct seeds derived from `seed`.
    pub fn with_shared(base: &TrainConfig, epsilon: f64, seed: u64) -> Self {
        let mk = |k| TrainConfig {
            seed: derive_seed(seed, k),
            ..base.clone()
        };
        Self {
            epsilon,
            seed,
            a1: mk(1),
            a2: mk(2),
            a3: mk(3),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1e-3..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!(
                "epsilon {} outside [1e-3, 1]",
                self.epsilon
            )));
        }
        if !(self.dprime_fraction > 0.0 && self.dprime_fraction <= 1.0) {
            return Err(Error::invalid("dprime fraction must lie in (0, 1]"));
        }
        self.a1.validate()?;
        self.a2.validate()?;
        self.a3.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationTrace<F> {
    /// 1-based iteration index.
    pub iteration: usize,
    /// Loss of `A3` on the pseudo-labels it was trained on.
    pub term_a: F,
    /// Full-grid loss between `A1` and `A2`.
    pub term_b: F,
    pub pseudo_size: usize,
    pub test_mse: Option<F>,
}

pub const TRACE_HEADER: &str = "iteration,term_a,term_b,pseudo_size,test_mse";

pub fn traces_to_csv<F: Scalar>(traces: &[IterationTrace<F>]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for t in traces {
        let mse = t.test_mse.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            t.iteration, t.term_a, t.term_b, t.pseudo_size, mse
        );
    }
    out
}

pub fn traces_from_csv<F: Scalar + FromStr>(text: &str) -> Result<Vec<IterationTrace<F>>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(TRACE_HEADER) {
        return Err(Error::invalid("trace CSV header mismatch"));
    }
    let num = |s: &str| {
        s.parse::<F>()
            .map_err(|_| Error::invalid(format!("bad number {s:?} in trace CSV")))
    };
    let int = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::invalid(format!("bad integer {s:?} in trace CSV")))
    };
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(Error::invalid(format!("trace row {line:?} needs 5 fields")));
            }
            Ok(IterationTrace {
                iteration: int(f[0])?,
                term_a: num(f[1])?,
                term_b: num(f[2])?,
                pseudo_size: int(f[3])?,
                test_mse: if f[4].is_empty() {
                    None
                } else {
                    Some(num(f[4])?)
                },
            })
        })
        .collect()
}

/// Pairs of `pairs` on which `|A1 - A2| <= epsilon`, labeled with `A1`'s prediction.
pub fn make_pseudo_labels<F: Scalar>(
    a1: &(impl Predictor<F> + ?Sized),
    a2: &(impl Predictor<F> + ?Sized),
    pairs: impl IntoIterator<Item = (usize, usize)>,
    epsilon: F,
    iteration: usize,
) -> Result<PseudoLabeledSet<F>> {
    if !(epsilon > F::zero()) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let (m, n) = (a1.n_users(), a1.n_items());
    check_shape(a2, m, n)?;
    let mut entries = Vec::new();
    for (u, i) in pairs {
        if u >= m || i >= n {
            return Err(Error::invalid(format!(
                "pair ({u}, {i}) outside {m}x{n} grid"
            )));
        }
        let r1 = a1.rating(u, i);
        let r2 = a2.rating(u, i);
        if (r1 - r2).abs() <= epsilon {
            entries.push(PseudoLabel {
                user: u,
                item: i,
                label: r1,
            });
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyPseudoSet { iteration });
    }
    Ok(PseudoLabeledSet {
        entries,
        epsilon,
        source_iteration: iteration,
    })
}

/// `floor(fraction * m * n)` distinct grid pairs, in row-major order.
pub fn sample_dprime(
    n_users: usize,
    n_items: usize,
    fraction: f64,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid("dprime fraction must lie in (0, 1]"));
    }
    let grid = n_users * n_items;
    let to_pair = |k: usize| (k / n_items, k % n_items);
    if fraction == 1.0 {
        return Ok((0..grid).map(to_pair).collect());
    }
    let amount = (fraction * grid as f64).floor() as usize;
    let mut picked = index::sample(&mut seeded(seed), grid, amount).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(to_pair).collect())
}

pub type RelabelHook<'h, F> =
    dyn FnMut(&PseudoLabeledSet<F>, &FactorModel<F>, &FactorModel<F>) + 'h;
pub type EvalHook<'h, F> = dyn FnMut(&FactorModel<F>) -> Result<F> + 'h;

/// Callbacks into [`tri_train`].
pub struct TriHooks<'h, F> {
    /// Called right after each relabeling with the set and the labeling `A1`, `A2`.
    pub on_relabel: Option<&'h mut RelabelHook<'h, F>>,
    /// Test MSE of `A3` at the end of an iteration.
    pub evaluate: Option<&'h mut EvalHook<'h, F>>,
}

impl<F> Default for TriHooks<'_, F> {
    fn default() -> Self {
        Self {
            on_relabel: None,
            evaluate: None,
        }
    }
}

/// The three predictors with their optimizer state.
pub struct TriModels<F> {
    pub a1: FactorModel<F>,
    pub a2: FactorModel<F>,
    pub a3: FactorModel<F>,
    adam: [Adam<F>; 3],
}

impl<F: Scalar> TriModels<F> {
    /// Freshly initialized predictors for the grid of `observed`.
    pub fn init(observed: &RatingDataset, cfg: &TriConfig) -> Result<Self> {
        let (m, n) = (observed.n_users(), observed.n_items());
        Self::from_models(
            FactorModel::init(m, n, &cfg.a1)?,
            FactorModel::init(m, n, &cfg.a2)?,
            FactorModel::init(m, n, &cfg.a3)?,
        )
    }

    pub fn from_models(a1: FactorModel<F>, a2: FactorModel<F>, a3: FactorModel<F>) -> Result<Self> {
        let shape = |m: &FactorModel<F>| (m.n_users(), m.n_items());
        if shape(&a1) != shape(&a2) || shape(&a1) != shape(&a3) {
            return Err(Error::invalid("tri-training predictors must share a grid"));
        }
        let adam = [
            Adam::for_model(&a1),
            Adam::for_model(&a2),
            Adam::for_model(&a3),
        ];
        Ok(Self { a1, a2, a3, adam })
    }
}

fn run_three<F: Scalar>(
    models: &mut TriModels<F>,
    samples: [&[Sample<F>]; 3],
    cfgs: [&TrainConfig; 3],
    validation: Option<&RatingDataset>,
) -> Result<()> {
    let TriModels { a1, a2, a3, adam } = models;
    let [ad1, ad2, ad3] = adam;
    let ((r1, r2), r3) = rayon::join(
        || {
            rayon::join(
                || train_samples_with(a1, ad1, samples[0], cfgs[0], validation),
                || train_samples_with(a2, ad2, samples[1], cfgs[1], validation),
            )
        },
        || train_samples_with(a3, ad3, samples[2], cfgs[2], validation),
    );
    r1?;
    r2?;
    r3?;
    Ok(())
}

/// Pre-trains `A1`, `A2` under `objective` and `A3` under the naive objective.
pub fn pretrain<F: Scalar>(
    models: &mut TriModels<F>,
    observed: &RatingDataset,
    objective: Objective<'_, F>,
    cfg: &TriConfig,
    validation: Option<&RatingDataset>,
) -> Result<()> {
    cfg.validate()?;
    observed.ensure_nonempty("observed ratings")?;
    let naive = naive_samples(observed);
    let base = match objective {
        Objective::Naive => None,
        Objective::Ips(p) => Some(ips_samples(observed, p)?),
    };
    let base = base.as_deref().unwrap_or(&naive);
    run_three(
        models,
        [base, base, &naive],
        [&cfg.a1, &cfg.a2, &cfg.a3],
        validation,
    )
}

/// Pseudo-labeling iterations on already pre-trained predictors.
pub fn tri_iterate<F: Scalar>(
    models: &mut TriModels<F>,
    cfg: &TriConfig,
    mut hooks: TriHooks<'_, F>,
) -> Result<Vec<IterationTrace<F>>> {
    cfg.validate()?;
    let mut traces = Vec::with_capacity(cfg.n_iterations);
    if cfg.n_iterations == 0 {
        return Ok(traces);
    }
    let (m, n) = (models.a1.n_users(), models.a1.n_items());
    let full = cfg.dprime_fraction == 1.0;
    let grid = if full {
        sample_dprime(m, n, 1.0, 0)?
    } else {
        Vec::new()
    };
    let loss = PointwiseLoss::<F>::new(cfg.trace_loss);
    let eps = F::lit(cfg.epsilon);
    let relabel = |models: &TriModels<F>, iteration: usize| -> Result<PseudoLabeledSet<F>> {
        if full {
            make_pseudo_labels(&models.a1, &models.a2, grid.iter().copied(), eps, iteration)
        } else {
            let seed = derive_seed(cfg.seed, iteration as u64);
            let pairs = sample_dprime(m, n, cfg.dprime_fraction, seed)?;
            make_pseudo_labels(&models.a1, &models.a2, pairs, eps, iteration)
        }
    };
    let step_cfg = |c: &TrainConfig, it: usize| TrainConfig {
        epochs: cfg.n_steps,
        patience: None,
        seed: derive_seed(c.seed, 1 + it as u64),
        ..c.clone()
    };

    let mut pseudo = relabel(models, 0)?;
    for it in 1..=cfg.n_iterations {
        if let Some(cb) = hooks.on_relabel.as_mut() {
            cb(&pseudo, &models.a1, &models.a2);
        }
        let samples = pseudo_samples(&pseudo);
        let cfgs = [
            step_cfg(&cfg.a1, it),
            step_cfg(&cfg.a2, it),
            step_cfg(&cfg.a3, it),
        ];
        if cfg.n_steps > 0 {
            run_three(
                models,
                [&samples, &samples, &samples],
                [&cfgs[0], &cfgs[1], &cfgs[2]],
                None,
            )?;
        }
        let term_a = pseudo_loss(&models.a3, &pseudo, &loss)?;
        let term_b = ideal_loss(&models.a1, &models.a2, &loss)?;
        let test_mse = match hooks.evaluate.as_mut() {
            Some(f) => Some(f(&models.a3)?),
            None => None,
        };
        traces.push(IterationTrace {
            iteration: it,
            term_a,
            term_b,
            pseudo_size: pseudo.len(),
            test_mse,
        });
        if it < cfg.n_iterations {
            pseudo = relabel(models, it)?;
        }
    }
    Ok(traces)
}

/// Full procedure: pre-training followed by `n_iterations` pseudo-labeling rounds.
pub fn tri_train<F: Scalar>(
    models: &mut TriModels<F>,
    observed: &RatingDataset,
    objective: Objective<'_, F>,
    cfg: &TriConfig,
    validation: Option<&RatingDataset>,
    hooks: TriHooks<'_, F>,
) -> Result<Vec<IterationTrace<F>>> {
    pretrain(models, observed, objective, cfg, validation)?;
    tri_iterate(models, cfg, hooks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::InteractionRecord;
    use crate::propensity::UniformScore;

    fn biased(m: usize, n: usize, dim: usize, value: f64) -> FactorModel<f64> {
        let mut model = FactorModel::zeros(m, n, dim);
        model.set_global_bias(value);
        model
    }

    fn observed() -> RatingDataset {
        let recs = (0..4)
            .flat_map(|u| {
                (0..4)
                    .filter(move |i| (u + i) % 2 == 0)
                    .map(move |i| (u, i))
            })
            .map(|(u, i)| InteractionRecord::new(u, i, 1 + ((u * 3 + i) % 5) as u8))
            .collect();
        RatingDataset::new(4, 4, recs).unwrap()
    }

    fn small_cfg() -> TriConfig {
        let base = TrainConfig {
            dim: 2,
            epochs: 20,
            batch_size: 4,
            patience: None,
            ..Default::default()
        };
        TriConfig {
            epsilon: 0.5,
            n_iterations: 3,
            n_steps: 2,
            ..TriConfig::with_shared(&base, 0.5, 9)
        }
    }

    #[test]
    fn threshold_and_boundary() {
        let a1 = biased(1, 3, 1, 3.2);
        let mut a2 = biased(1, 3, 1, 3.2);
        a2.item_bias_mut().copy_from_slice(&[0.3, 0.8, 0.1]);
        let set = make_pseudo_labels(&a1, &a2, [(0, 0), (0, 1), (0, 2)], 0.5, 0).unwrap();
        let kept: Vec<_> = set.entries.iter().map(|e| (e.item, e.label)).collect();
        assert_eq!(kept, vec![(0, 3.2), (2, 3.2)]);

        // differences 0.25, 0.5, 0.75 are exact in binary; 0.5 sits on the boundary
        a2.item_bias_mut().copy_from_slice(&[0.25, 0.5, 0.75]);
        let set = make_pseudo_labels(&a1, &a2, [(0, 0), (0, 1), (0, 2)], 0.5, 0).unwrap();
        assert_eq!(set.len(), 2);
    }

    #[test]
    fn identical_predictors_keep_everything() {
        let a = biased(3, 3, 2, 2.5);
        let pairs = sample_dprime(3, 3, 1.0, 0).unwrap();
        let set = make_pseudo_labels(&a, &a, pairs.clone(), 1e-3, 0).unwrap();
        assert_eq!(set.len(), pairs.len());
    }

    #[test]
    fn empty_pseudo_set_reports_iteration() {
        let a1 = biased(2, 2, 1, 1.0);
        let a2 = biased(2, 2, 1, 4.0);
        let err = make_pseudo_labels(&a1, &a2, [(0, 0), (1, 1)], 0.5, 7).unwrap_err();
        assert!(matches!(err, Error::EmptyPseudoSet { iteration: 7 }));
        assert!(make_pseudo_labels(&a1, &a2, [(0, 0)], 0.0, 0).is_err());
    }

    #[test]
    fn dprime_sizes() {
        assert_eq!(sample_dprime(2, 2, 1.0, 0).unwrap().len(), 4);
        assert_eq!(sample_dprime(2, 2, 0.5, 3).unwrap().len(), 2);
        assert_eq!(sample_dprime(10, 10, 0.37, 3).unwrap().len(), 37);
        assert_eq!(
            sample_dprime(10, 10, 0.3, 5).unwrap(),
            sample_dprime(10, 10, 0.3, 5).unwrap()
        );
        let s = sample_dprime(10, 10, 0.5, 5).unwrap();
        let uniq: std::collections::HashSet<_> = s.iter().collect();
        assert_eq!(uniq.len(), s.len());
        assert!(sample_dprime(2, 2, 0.0, 0).is_err());
    }

    #[test]
    fn zero_iterations_keep_pretrained_a3() {
        let obs = observed();
        let cfg = TriConfig {
            n_iterations: 0,
            ..small_cfg()
        };
        let mut models = TriModels::<f64>::init(&obs, &cfg).unwrap();
        pretrain(&mut models, &obs, Objective::Naive, &cfg, None).unwrap();
        let before = models.a3.clone();
        let traces = tri_iterate(&mut models, &cfg, TriHooks::default()).unwrap();
        assert!(traces.is_empty());
        assert_eq!(models.a3, before);
    }

    #[test]
    fn constant_labelers_give_zero_terms() {
        let cfg = TriConfig {
            n_iterations: 3,
            n_steps: 200,
            a1: TrainConfig {
                learning_rate: 1e-12,
                ..small_cfg().a1
            },
            ..small_cfg()
        };
        let cfg = TriConfig {
            a2: cfg.a1.clone(),
            a3: TrainConfig {
                l2: 1e-8,
                ..cfg.a3.clone()
            },
            ..cfg
        };
        let a = biased(4, 4, 2, 3.0);
        let mut models =
            TriModels::from_models(a.clone(), a, FactorModel::init(4, 4, &cfg.a3).unwrap())
                .unwrap();
        let traces = tri_iterate(&mut models, &cfg, TriHooks::default()).unwrap();
        let last = traces.last().unwrap();
        assert!(last.term_b < 1e-9);
        assert!(last.term_a < 0.02, "term_a = {}", last.term_a);
    }

    #[test]
    fn traces_and_membership() {
        let obs = observed();
        let cfg = TriConfig {
            epsilon: 1.0,
            ..small_cfg()
        };
        let mut models = TriModels::<f64>::init(&obs, &cfg).unwrap();
        let uniform = UniformScore(0.5);
        let mut checked = 0;
        let mut check =
            |set: &PseudoLabeledSet<f64>, a1: &FactorModel<f64>, a2: &FactorModel<f64>| {
                for e in &set.entries {
                    let (r1, r2) = (
                        a1.predict(e.user, e.item).unwrap(),
                        a2.predict(e.user, e.item).unwrap(),
                    );
                    assert!((r1 - r2).abs() <= set.epsilon);
                    assert_eq!(e.label, r1);
                }
                checked += 1;
            };
        let mut eval = |_: &FactorModel<f64>| Ok(1.0);
        let hooks = TriHooks {
            on_relabel: Some(&mut check),
            evaluate: Some(&mut eval),
        };
        let traces = tri_train(
            &mut models,
            &obs,
            Objective::Ips(&uniform),
            &cfg,
            None,
            hooks,
        )
        .unwrap();
        assert_eq!(traces.len(), cfg.n_iterations);
        assert_eq!(checked, cfg.n_iterations);
        for t in &traces {
            assert!(t.term_a >= 0.0 && t.term_b >= 0.0);
            assert!(t.pseudo_size <= 16);
            assert_eq!(t.test_mse, Some(1.0));
        }
        let csv = traces_to_csv(&traces);
        assert!(csv.starts_with("iteration,term_a,term_b,pseudo_size,test_mse\n"));
        assert_eq!(traces_from_csv::<f64>(&csv).unwrap(), traces);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let obs = observed();
        let cfg = TriConfig {
            epsilon: 1.0,
            ..small_cfg()
        };
        let run = || {
            let mut models = TriModels::<f64>::init(&obs, &cfg).unwrap();
            let t = tri_train(
                &mut models,
                &obs,
                Objective::Naive,
                &cfg,
                None,
                TriHooks::default(),
            )
            .unwrap();
            (t, models.a3)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn csv_blank_mse() {
        let t = IterationTrace {
            iteration: 1,
            term_a: 0.5,
            term_b: 0.25,
            pseudo_size: 3,
            test_mse: None,
        };
        assert_eq!(
            traces_to_csv(&[t]),
            "iteration,term_a,term_b,pseudo_size,test_mse\n1,0.5,0.25,3,\n"
        );
    }
}
