use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{symbol_ids, tag_source, Corpus, Direction, Vocab};
use crate::error::{Error, Result};
use crate::lsl::RoutingContext;

/// A single-direction batch: tagged sources and untagged targets as
/// vocabulary ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub ctx: RoutingContext,
    pub src: Vec<Vec<usize>>,
    pub tgt: Vec<Vec<usize>>,
}

impl Batch {
    /// Target tokens scored by the loss, end tokens included.
    pub fn n_target_tokens(&self) -> usize {
        self.tgt.iter().map(|t| t.len() + 1).sum()
    }
}

/// Training examples grouped by direction, already tagged.
#[derive(Clone, Debug)]
pub struct TrainData {
    groups: Vec<(Direction, Vec<(Vec<usize>, Vec<usize>)>)>,
    total: usize,
}

impl TrainData {
    /// Each source carries its own quality tag.
    pub fn new(corpus: &Corpus, vocab: &Vocab) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Data("training corpus is empty".into()));
        }
        let mut groups = Vec::new();
        for (dir, pairs) in corpus.by_direction() {
            let mut items = Vec::with_capacity(pairs.len());
            for p in pairs {
                let src = tag_source(vocab, &symbol_ids(vocab, &p.src), p.ctx.quality, &p.ctx.src, &p.ctx.tgt)?;
                items.push((src, symbol_ids(vocab, &p.tgt)));
            }
            groups.push((dir, items));
        }
        Ok(Self { groups, total: corpus.len() })
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn directions(&self) -> impl Iterator<Item = &Direction> {
        self.groups.iter().map(|(d, _)| d)
    }

    /// Batch for `step`, a pure function of `(data, seed, step)`. The direction
    /// is drawn proportionally to its size; sentences are drawn uniformly with
    /// replacement inside it.
    pub fn batch_at(&self, seed: u64, step: u64, batch_size: usize) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(step);
        let mut pick = rng.gen_range(0..self.total);
        let (dir, items) = self
            .groups
            .iter()
            .find(|(_, items)| {
                if pick < items.len() {
                    true
                } else {
                    pick -= items.len();
                    false
                }
            })
            .expect("pick is below the total size");
        let mut batch = Batch { ctx: RoutingContext::new(dir.0.clone(), dir.1.clone()), src: Vec::new(), tgt: Vec::new() };
        for _ in 0..batch_size {
            let (s, t) = &items[rng.gen_range(0..items.len())];
            batch.src.push(s.clone());
            batch.tgt.push(t.clone());
        }
        batch
    }

    /// Every example exactly once, in order, as batches of at most
    /// `batch_size` sentences.
    pub fn sequential_batches(&self, batch_size: usize) -> Vec<Batch> {
        let mut out = Vec::new();
        for (dir, items) in &self.groups {
            for chunk in items.chunks(batch_size.max(1)) {
                out.push(Batch {
                    ctx: RoutingContext::new(dir.0.clone(), dir.1.clone()),
                    src: chunk.iter().map(|(s, _)| s.clone()).collect(),
                    tgt: chunk.iter().map(|(_, t)| t.clone()).collect(),
                });
            }
        }
        out
    }
}
