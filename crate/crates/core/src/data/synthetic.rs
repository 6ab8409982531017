//! Small MovieLens-format datasets with planted category preferences, for
//! tests and smoke runs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

pub const SYNTHETIC_CATEGORIES: [&str; 6] = ["Action", "Comedy", "Drama", "Horror", "Romance", "SciFi"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub users: usize,
    pub items: usize,
    pub ratings_per_user: usize,
    /// Share of a user's ratings drawn from their two favourite categories.
    pub focus: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            users: 60,
            items: 180,
            ratings_per_user: 40,
            focus: 0.7,
            seed: 7,
        }
    }
}

fn tag_pool(category: usize) -> [String; 3] {
    let c = SYNTHETIC_CATEGORIES[category].to_lowercase();
    [format!("{c} classic"), format!("{c} twist"), format!("very {c}")]
}

/// Writes `ratings.csv`, `movies.csv` and `tags.csv` into `dir`.
///
/// Item `i` belongs to category `i mod 6` (every fifth item also to the next
/// one). User `u` favours categories `u mod 6` and `(u + 2) mod 6`, rating
/// those 4 or higher and the rest below 4, with a little noise.
pub fn write_synthetic_movielens(dir: &Path, spec: &SyntheticSpec) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = seed::rng(spec.seed);
    let k = SYNTHETIC_CATEGORIES.len();
    let cats_of = |i: usize| -> Vec<usize> {
        let mut c = vec![i % k];
        if i % 5 == 0 {
            c.push((i + 1) % k);
        }
        c
    };

    let mut movies = String::from("movieId,title,genres\n");
    let mut tags = String::from("userId,movieId,tag,timestamp\n");
    for i in 0..spec.items {
        let genres: Vec<&str> = cats_of(i).iter().map(|&c| SYNTHETIC_CATEGORIES[c]).collect();
        let _ = writeln!(movies, "{},Film {} ({}),{}", i + 1, i + 1, 1980 + i % 40, genres.join("|"));
        let pool = tag_pool(i % k);
        for a in 0..3 {
            let tag = &pool[rng.gen_range(0..pool.len())];
            let _ = writeln!(tags, "{},{},{},{}", 1 + a, i + 1, tag, 1_000_000 + i);
        }
    }

    let mut ratings = String::from("userId,movieId,rating,timestamp\n");
    for u in 0..spec.users {
        let liked = [u % k, (u + 2) % k];
        let (mut fav, mut other): (Vec<usize>, Vec<usize>) =
            (0..spec.items).partition(|&i| cats_of(i).iter().any(|c| liked.contains(c)));
        fav.shuffle(&mut rng);
        other.shuffle(&mut rng);
        let n = spec.ratings_per_user.min(spec.items);
        let n_fav = ((n as f64 * spec.focus).round() as usize).min(fav.len());
        let mut picks: Vec<(usize, bool)> = fav[..n_fav].iter().map(|&i| (i, true)).collect();
        picks.extend(other.iter().take(n - n_fav).map(|&i| (i, false)));
        picks.shuffle(&mut rng);
        let start = 1_200_000_000i64 + u as i64 * 1_000;
        for (step, (i, is_fav)) in picks.into_iter().enumerate() {
            let noisy = rng.gen_bool(0.1);
            let rating = match (is_fav, noisy) {
                (true, false) | (false, true) => [4.0, 4.5, 5.0][rng.gen_range(0..3)],
                _ => [1.0, 2.0, 3.0, 3.5][rng.gen_range(0..4)],
            };
            let _ = writeln!(ratings, "{},{},{rating:.1},{}", u + 1, i + 1, start + step as i64 * 86_400);
        }
    }

    for (name, body) in [("movies.csv", movies), ("tags.csv", tags), ("ratings.csv", ratings)] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
