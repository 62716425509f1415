use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{CommunityGraph, ReviewIdx};

/// Rating access for model training, with a blind article set whose rating
/// reads (article ratings and ratings of reviews on those articles) are
/// counted. Training code reads ground truth only through this view.
#[derive(Debug)]
pub struct RatingView<'g> {
    graph: &'g CommunityGraph,
    blind: BTreeSet<String>,
    blind_reads: AtomicUsize,
}

impl<'g> RatingView<'g> {
    pub fn new(graph: &'g CommunityGraph, blind: BTreeSet<String>) -> Self {
        RatingView {
            graph,
            blind,
            blind_reads: AtomicUsize::new(0),
        }
    }

    /// A view with nothing held out.
    pub fn open(graph: &'g CommunityGraph) -> Self {
        Self::new(graph, BTreeSet::new())
    }

    pub fn graph(&self) -> &'g CommunityGraph {
        self.graph
    }

    fn touch(&self, article_id: &str) {
        if self.blind.contains(article_id) {
            self.blind_reads.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn article_rating(&self, article_id: &str) -> Option<f64> {
        self.touch(article_id);
        self.graph.article(article_id).and_then(|a| a.ground_rating)
    }

    pub fn review_rating(&self, idx: ReviewIdx) -> f64 {
        let r = self.graph.review(idx);
        self.touch(&r.article_id);
        r.rating
    }

    pub fn source_rating(&self, source_id: &str) -> Option<f64> {
        self.graph.source(source_id).and_then(|s| s.ground_rating)
    }

    /// Reads of held-out ratings so far.
    pub fn blind_reads(&self) -> usize {
        self.blind_reads.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::figure_instance;

    #[test]
    fn counts_only_blind_reads() {
        let g = figure_instance();
        let view = RatingView::new(&g, ["d2".to_string()].into());
        assert_eq!(view.article_rating("d1"), Some(4.0));
        assert_eq!(view.review_rating(0), 4.0);
        assert_eq!(view.blind_reads(), 0);
        assert_eq!(view.article_rating("d2"), Some(3.0));
        assert_eq!(view.review_rating(2), 3.0);
        assert_eq!(view.blind_reads(), 2);
    }
}
