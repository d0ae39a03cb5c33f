use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReidDecision {
    Known(String),
    New,
}

/// Stored descriptors per identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gallery {
    identities: BTreeMap<String, Vec<Vec<f64>>>,
    /// A sample farther than this from every stored descriptor votes "new".
    pub match_radius: f64,
    /// Oldest descriptors are dropped beyond this many per identity.
    pub capacity: usize,
    next_id: u64,
}

impl Default for Gallery {
    fn default() -> Self {
        Gallery { identities: BTreeMap::new(), match_radius: 0.5, capacity: 32, next_id: 1 }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Vote-based re-identification.
///
/// Each sample votes for the identity owning its nearest stored descriptor,
/// or for "new" when nothing lies within `gallery.match_radius`. The
/// plurality identity wins if it holds at least half the votes; otherwise,
/// or when "new" wins, the decision is [`ReidDecision::New`]. Vote ties go to
/// the smaller identity.
pub fn reidentify(samples: &[Vec<f64>], gallery: &Gallery) -> ReidDecision {
    let r2 = gallery.match_radius * gallery.match_radius;
    let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
    let mut new_votes = 0usize;
    for s in samples {
        let mut best: Option<(f64, &str)> = None;
        for (id, descs) in &gallery.identities {
            for d in descs {
                let e = dist2(s, d);
                if best.is_none_or(|(b, _)| e < b) {
                    best = Some((e, id));
                }
            }
        }
        match best {
            Some((e, id)) if e <= r2 => *votes.entry(id).or_default() += 1,
            _ => new_votes += 1,
        }
    }
    let Some((id, n)) = votes.iter().fold(None::<(&str, usize)>, |acc, (id, n)| match acc {
        Some((_, m)) if m >= *n => acc,
        _ => Some((id, *n)),
    }) else {
        return ReidDecision::New;
    };
    if n <= new_votes || 2 * n < samples.len() {
        return ReidDecision::New;
    }
    ReidDecision::Known(id.to_string())
}

impl Gallery {
    pub fn new(match_radius: f64) -> Self {
        Gallery { match_radius, ..Self::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.identities.is_empty()
    }

    pub fn identities(&self) -> impl Iterator<Item = &str> {
        self.identities.keys().map(String::as_str)
    }

    pub fn insert(&mut self, identity: &str, descriptor: Vec<f64>) {
        let list = self.identities.entry(identity.to_string()).or_default();
        list.push(descriptor);
        if list.len() > self.capacity {
            list.remove(0);
        }
    }

    /// Identity for `samples`, minting `h{n}` when the vote says new. The
    /// samples are stored under the returned identity.
    pub fn identify(&mut self, samples: &[Vec<f64>]) -> String {
        let id = match reidentify(samples, self) {
            ReidDecision::Known(id) => id,
            ReidDecision::New => {
                let id = format!("h{}", self.next_id);
                self.next_id += 1;
                id
            }
        };
        for s in samples {
            self.insert(&id, s.clone());
        }
        id
    }
}

/// Maps tracklets to persistent identities. A tracklet is identified from
/// its first sample; later samples only enrich the gallery.
#[derive(Debug, Clone, Default)]
pub struct Reidentifier {
    pub gallery: Gallery,
    tracklets: BTreeMap<u64, String>,
}

impl Reidentifier {
    pub fn new(gallery: Gallery) -> Self {
        Reidentifier { gallery, tracklets: BTreeMap::new() }
    }

    /// Returns the identity and whether this call started a new tracklet.
    pub fn observe(&mut self, track_id: u64, descriptor: &[f64]) -> (String, bool) {
        if let Some(id) = self.tracklets.get(&track_id) {
            let id = id.clone();
            self.gallery.insert(&id, descriptor.to_vec());
            return (id, false);
        }
        let id = self.gallery.identify(&[descriptor.to_vec()]);
        self.tracklets.insert(track_id, id.clone());
        (id, true)
    }
}
