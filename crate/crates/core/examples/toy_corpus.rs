//! Regenerate the bundled category-tagged corpus.
//!
//!     cargo run --release --example toy_corpus > crates/core/data/toy_corpus.tsv
//!
//! Documents are sentences from a small template grammar. Each group has
//! its own content vocabulary and word-frequency profile, so the group
//! label is informative about what comes next.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Group {
    label: &'static str,
    nouns: &'static [&'static str],
    verbs: &'static [&'static str],
    adjectives: &'static [&'static str],
}

const GROUPS: &[Group] = &[
    Group {
        label: "astronomy",
        nouns: &[
            "star", "planet", "comet", "telescope", "orbit", "galaxy", "moon", "nebula", "meteor",
            "observatory", "eclipse", "asteroid", "horizon", "spectrum", "cluster", "satellite",
            "crater", "quasar", "sky", "lens",
        ],
        verbs: &["observes", "tracks", "orbits", "measures", "photographs", "maps", "circles", "eclipses", "spots", "charts"],
        adjectives: &["distant", "bright", "faint", "red", "icy", "massive", "dark", "spiral", "lunar", "cosmic"],
    },
    Group {
        label: "cooking",
        nouns: &[
            "soup", "oven", "onion", "sauce", "bread", "pan", "garlic", "recipe", "knife", "butter",
            "kitchen", "pepper", "dough", "broth", "salad", "spoon", "chef", "flour", "herb", "stew",
        ],
        verbs: &["stirs", "bakes", "chops", "roasts", "tastes", "seasons", "simmers", "grills", "slices", "mixes"],
        adjectives: &["fresh", "spicy", "warm", "crisp", "salty", "sweet", "golden", "tender", "sour", "rich"],
    },
    Group {
        label: "sailing",
        nouns: &[
            "boat", "sail", "harbor", "wind", "mast", "anchor", "crew", "deck", "tide", "rope",
            "captain", "wave", "island", "compass", "hull", "port", "storm", "keel", "current", "buoy",
        ],
        verbs: &["steers", "anchors", "hoists", "navigates", "moors", "rows", "drifts", "tacks", "sights", "reefs"],
        adjectives: &["calm", "rough", "salty", "strong", "coastal", "northern", "swift", "wooden", "open", "sheltered"],
    },
    Group {
        label: "trading",
        nouns: &[
            "market", "stock", "price", "bond", "trader", "share", "fund", "profit", "index", "bank",
            "currency", "loss", "broker", "dividend", "portfolio", "rate", "exchange", "asset", "future", "ledger",
        ],
        verbs: &["buys", "sells", "hedges", "trades", "prices", "invests", "shorts", "values", "lends", "reports"],
        adjectives: &["volatile", "stable", "high", "low", "quarterly", "global", "risky", "liquid", "bullish", "bearish"],
    },
];

const SHARED_NOUNS: &[&str] = &["day", "night", "team", "year", "city", "report", "morning", "plan", "house", "friend"];
const SHARED_VERBS: &[&str] = &["sees", "finds", "likes", "needs", "watches"];
const SHARED_ADJECTIVES: &[&str] = &["new", "old", "small", "large", "long"];

/// Zipf-like weights, shuffled per group so frequency profiles differ.
fn profile(n: usize, rng: &mut ChaCha8Rng) -> WeightedIndex<f64> {
    let mut w: Vec<f64> = (1..=n).map(|r| 1.0 / r as f64).collect();
    w.shuffle(rng);
    WeightedIndex::new(w).expect("positive weights")
}

struct Sampler<'a> {
    group: &'a Group,
    nouns: WeightedIndex<f64>,
    verbs: WeightedIndex<f64>,
    adjectives: WeightedIndex<f64>,
}

impl Sampler<'_> {
    fn noun(&self, rng: &mut ChaCha8Rng) -> &'static str {
        if rng.gen_bool(0.2) {
            SHARED_NOUNS.choose(rng).expect("non-empty")
        } else {
            self.group.nouns[self.nouns.sample(rng)]
        }
    }

    fn verb(&self, rng: &mut ChaCha8Rng) -> &'static str {
        if rng.gen_bool(0.2) {
            SHARED_VERBS.choose(rng).expect("non-empty")
        } else {
            self.group.verbs[self.verbs.sample(rng)]
        }
    }

    fn adjective(&self, rng: &mut ChaCha8Rng) -> &'static str {
        if rng.gen_bool(0.2) {
            SHARED_ADJECTIVES.choose(rng).expect("non-empty")
        } else {
            self.group.adjectives[self.adjectives.sample(rng)]
        }
    }

    fn noun_phrase(&self, rng: &mut ChaCha8Rng, out: &mut Vec<&'static str>) {
        out.push(if rng.gen_bool(0.6) { "the" } else { "a" });
        if rng.gen_bool(0.5) {
            out.push(self.adjective(rng));
        }
        out.push(self.noun(rng));
        if rng.gen_bool(0.2) {
            out.push("of");
            out.push("the");
            out.push(self.noun(rng));
        }
    }

    fn sentence(&self, rng: &mut ChaCha8Rng, out: &mut Vec<&'static str>) {
        match rng.gen_range(0..4) {
            0 => {
                self.noun_phrase(rng, out);
                out.push(self.verb(rng));
                self.noun_phrase(rng, out);
            }
            1 => {
                self.noun_phrase(rng, out);
                out.push("is");
                out.push(self.adjective(rng));
            }
            2 => {
                out.push(["after", "before", "during"][rng.gen_range(0..3)]);
                self.noun_phrase(rng, out);
                out.push(",");
                self.noun_phrase(rng, out);
                out.push(self.verb(rng));
                self.noun_phrase(rng, out);
            }
            _ => {
                self.noun_phrase(rng, out);
                out.push("and");
                self.noun_phrase(rng, out);
                out.push(self.verb(rng));
                self.noun_phrase(rng, out);
            }
        }
        out.push(".");
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_250_601);
    let samplers: Vec<Sampler> = GROUPS
        .iter()
        .map(|group| Sampler {
            group,
            nouns: profile(group.nouns.len(), &mut rng),
            verbs: profile(group.verbs.len(), &mut rng),
            adjectives: profile(group.adjectives.len(), &mut rng),
        })
        .collect();
    let docs: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(800);
    for _ in 0..docs {
        let s = &samplers[rng.gen_range(0..samplers.len())];
        let mut words = Vec::new();
        for _ in 0..rng.gen_range(2..=4) {
            s.sentence(&mut rng, &mut words);
        }
        println!("{}\t{}", s.group.label, words.join(" "));
    }
}
