//! MovieLens-1M ingestion.
//!
//! Reads the three `::`-delimited files (`ratings.dat`, `movies.dat`,
//! `users.dat`, ISO-8859-1 encoded) and builds a two-category dataset:
//!
//! - items: movies tagged with exactly one of the two genres (movies tagged
//!   with both are dropped so the categories partition the items), in
//!   ascending movie id order;
//! - selections: any rating at or above `min_rating` counts as a selection;
//! - users: those with at least `min_ratings` selections on the item set,
//!   in ascending user id order, grouped by gender (`M` = 0, `F` = 1).

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{InteractionMatrix, Labeling};
use crate::table;

pub const DOWNLOAD_URL: &str = "https://files.grouplens.org/datasets/movielens/ml-1m.zip";
pub const RATINGS_FILE: &str = "ratings.dat";
pub const MOVIES_FILE: &str = "movies.dat";
pub const USERS_FILE: &str = "users.dat";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawRating {
    pub user_id: u32,
    pub movie_id: u32,
    pub rating: u8,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MovieRecord {
    pub movie_id: u32,
    pub title: String,
    pub genres: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn group_id(self) -> u32 {
        match self {
            Gender::Male => 0,
            Gender::Female => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserRecord {
    pub user_id: u32,
    pub gender: Gender,
}

/// ISO-8859-1 maps each byte to the code point of the same value.
fn latin1(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| b as char).collect()
}

/// Decoded, `\r`-stripped lines with 1-based numbers. A trailing empty line is skipped.
fn for_each_line<R: BufRead>(
    mut reader: R,
    source_name: &str,
    mut f: impl FnMut(usize, &str) -> Result<()>,
) -> Result<()> {
    let mut buf = Vec::new();
    let mut lineno = 0;
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io(source_name, e))?;
        if n == 0 {
            return Ok(());
        }
        lineno += 1;
        while matches!(buf.last(), Some(b'\n' | b'\r')) {
            buf.pop();
        }
        if buf.is_empty() {
            continue;
        }
        f(lineno, &latin1(&buf))?;
    }
}

fn malformed(source_name: &str, line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedLine {
        source_name: source_name.to_string(),
        line,
        reason: reason.into(),
    }
}

fn positive_id(s: &str, source_name: &str, line: usize, what: &str) -> Result<u32> {
    match s.parse::<u32>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(malformed(source_name, line, format!("bad {what} `{s}`"))),
    }
}

/// `UserID::MovieID::Rating::Timestamp`
pub fn parse_ratings<R: BufRead>(reader: R) -> Result<Vec<RawRating>> {
    const SRC: &str = RATINGS_FILE;
    let mut out = Vec::new();
    for_each_line(reader, SRC, |line, text| {
        let f: Vec<&str> = text.split("::").collect();
        let [user, movie, rating, ts] = f[..] else {
            return Err(malformed(SRC, line, "expected 4 `::`-separated fields"));
        };
        let rating = match rating.parse::<u8>() {
            Ok(v @ 1..=5) => v,
            _ => return Err(malformed(SRC, line, format!("bad rating `{rating}`"))),
        };
        out.push(RawRating {
            user_id: positive_id(user, SRC, line, "user id")?,
            movie_id: positive_id(movie, SRC, line, "movie id")?,
            rating,
            timestamp: ts
                .parse()
                .map_err(|_| malformed(SRC, line, format!("bad timestamp `{ts}`")))?,
        });
        Ok(())
    })?;
    Ok(out)
}

/// `MovieID::Title::Genre|Genre|...`
pub fn parse_movies<R: BufRead>(reader: R) -> Result<Vec<MovieRecord>> {
    const SRC: &str = MOVIES_FILE;
    let mut out = Vec::new();
    for_each_line(reader, SRC, |line, text| {
        let Some((id, rest)) = text.split_once("::") else {
            return Err(malformed(SRC, line, "expected `id::title::genres`"));
        };
        let Some((title, genres)) = rest.rsplit_once("::") else {
            return Err(malformed(SRC, line, "expected `id::title::genres`"));
        };
        let genres: Vec<String> = genres.split('|').filter(|g| !g.is_empty()).map(str::to_string).collect();
        if genres.is_empty() {
            return Err(malformed(SRC, line, "movie has no genre"));
        }
        out.push(MovieRecord {
            movie_id: positive_id(id, SRC, line, "movie id")?,
            title: title.to_string(),
            genres,
        });
        Ok(())
    })?;
    Ok(out)
}

/// `UserID::Gender::Age::Occupation::Zip`
pub fn parse_users<R: BufRead>(reader: R) -> Result<Vec<UserRecord>> {
    const SRC: &str = USERS_FILE;
    let mut out = Vec::new();
    for_each_line(reader, SRC, |line, text| {
        let f: Vec<&str> = text.split("::").collect();
        let [user, gender, _age, _occupation, _zip] = f[..] else {
            return Err(malformed(SRC, line, "expected 5 `::`-separated fields"));
        };
        let gender = match gender {
            "M" => Gender::Male,
            "F" => Gender::Female,
            other => return Err(malformed(SRC, line, format!("unknown gender `{other}`"))),
        };
        out.push(UserRecord {
            user_id: positive_id(user, SRC, line, "user id")?,
            gender,
        });
        Ok(())
    })?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    pub genres: (String, String),
    /// Minimum selections on the two-genre item set for a user to be kept.
    pub min_ratings: usize,
    /// Smallest rating value that counts as a selection.
    pub min_rating: u8,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            genres: ("Action".into(), "Romance".into()),
            min_ratings: 90,
            min_rating: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovieLensDataset {
    pub matrix: InteractionMatrix,
    pub labeling: Labeling,
    /// External user id of each internal user index.
    pub user_ids: Vec<u32>,
    /// External movie id of each internal item index.
    pub item_ids: Vec<u32>,
    pub group_names: Vec<String>,
    pub category_names: Vec<String>,
    /// Movies carrying both genres, left out of the item set.
    pub dual_genre_movies: usize,
}

impl MovieLensDataset {
    pub fn group_count(&self, group: usize) -> u64 {
        self.labeling.group_size(group)
    }

    pub fn id_map_rows(&self) -> Vec<Vec<String>> {
        let users = self
            .user_ids
            .iter()
            .enumerate()
            .map(|(i, e)| vec![i.to_string(), e.to_string(), "user".to_string()]);
        let items = self
            .item_ids
            .iter()
            .enumerate()
            .map(|(i, e)| vec![i.to_string(), e.to_string(), "item".to_string()]);
        users.chain(items).collect()
    }

    pub fn write_id_map(&self, path: &Path) -> Result<()> {
        table::emit_csv(path, &["internal_id", "external_id", "kind"], &self.id_map_rows())
    }
}

pub fn build_dataset(
    ratings: &[RawRating],
    movies: &[MovieRecord],
    users: &[UserRecord],
    opts: &BuildOptions,
) -> Result<MovieLensDataset> {
    let (first, second) = (&opts.genres.0, &opts.genres.1);
    let mut sorted_movies: Vec<&MovieRecord> = movies.iter().collect();
    sorted_movies.sort_by_key(|m| m.movie_id);

    let mut item_ids = Vec::new();
    let mut item_category = Vec::new();
    let mut dual_genre_movies = 0;
    for m in sorted_movies {
        let has = |g: &String| m.genres.iter().any(|x| x == g);
        match (has(first), has(second)) {
            (true, true) => dual_genre_movies += 1,
            (true, false) => {
                item_ids.push(m.movie_id);
                item_category.push(0);
            }
            (false, true) => {
                item_ids.push(m.movie_id);
                item_category.push(1);
            }
            (false, false) => {}
        }
    }
    let item_index: std::collections::HashMap<u32, u32> =
        item_ids.iter().enumerate().map(|(i, &id)| (id, i as u32)).collect();

    let mut sorted_users: Vec<&UserRecord> = users.iter().collect();
    sorted_users.sort_by_key(|u| u.user_id);
    let user_pos: std::collections::HashMap<u32, usize> =
        sorted_users.iter().enumerate().map(|(i, u)| (u.user_id, i)).collect();

    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); sorted_users.len()];
    for r in ratings {
        if r.rating < opts.min_rating {
            continue;
        }
        if let (Some(&u), Some(&i)) = (user_pos.get(&r.user_id), item_index.get(&r.movie_id)) {
            rows[u].push(i);
        }
    }

    let mut kept_rows = Vec::new();
    let mut user_ids = Vec::new();
    let mut user_group = Vec::new();
    for (u, mut row) in rows.into_iter().enumerate() {
        row.sort_unstable();
        row.dedup();
        if !row.is_empty() && row.len() >= opts.min_ratings {
            user_ids.push(sorted_users[u].user_id);
            user_group.push(sorted_users[u].gender.group_id());
            kept_rows.push(row);
        }
    }

    Ok(MovieLensDataset {
        matrix: InteractionMatrix::from_rows(item_ids.len(), kept_rows)?,
        labeling: Labeling::new(user_group, item_category)?,
        user_ids,
        item_ids,
        group_names: vec!["M".into(), "F".into()],
        category_names: vec![first.clone(), second.clone()],
        dual_genre_movies,
    })
}

/// Subsamples `group` to `target` users uniformly without replacement,
/// keeping every other user. Deterministic given `seed`.
pub fn balance_group(ds: &MovieLensDataset, group: usize, target: usize, seed: u64) -> Result<MovieLensDataset> {
    let members: Vec<usize> = ds.labeling.group_members(group).collect();
    if members.len() < target {
        return Err(Error::InsufficientGroup {
            group,
            available: members.len(),
            requested: target,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; ds.matrix.n_users()];
    for &u in &members {
        keep[u] = false;
    }
    for j in index::sample(&mut rng, members.len(), target) {
        keep[members[j]] = true;
    }

    let mut rows = Vec::new();
    let mut user_ids = Vec::new();
    let mut groups = Vec::new();
    for u in (0..ds.matrix.n_users()).filter(|&u| keep[u]) {
        rows.push(ds.matrix.row(u).to_vec());
        user_ids.push(ds.user_ids[u]);
        groups.push(ds.labeling.group_of(u) as u32);
    }
    Ok(MovieLensDataset {
        matrix: InteractionMatrix::from_rows(ds.matrix.n_items(), rows)?,
        labeling: Labeling::new(groups, ds.labeling.item_categories().to_vec())?,
        user_ids,
        ..ds.clone()
    })
}

/// Samples males down to the number of females.
pub fn balance_groups(ds: &MovieLensDataset, seed: u64) -> Result<MovieLensDataset> {
    let females = ds.group_count(Gender::Female.group_id() as usize) as usize;
    balance_group(ds, Gender::Male.group_id() as usize, females, seed)
}

/// Paths of the three MovieLens-1M files inside `dir`.
pub fn file_paths(dir: &Path) -> [PathBuf; 3] {
    [dir.join(RATINGS_FILE), dir.join(MOVIES_FILE), dir.join(USERS_FILE)]
}

/// Fails with the download location when any file is missing.
pub fn check_files(dir: &Path) -> Result<()> {
    let missing: Vec<String> = file_paths(dir)
        .iter()
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingRun(format!(
            "MovieLens-1M files not found: {} (download and unpack {DOWNLOAD_URL})",
            missing.join(", ")
        )))
    }
}

pub fn sha256_hex(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Checks `file=hex` SHA-256 expectations for files in `dir`.
pub fn verify_checksums(dir: &Path, expected: &[(String, String)]) -> Result<()> {
    for (file, hex) in expected {
        let got = sha256_hex(&dir.join(file))?;
        if !got.eq_ignore_ascii_case(hex) {
            return Err(Error::Config(format!("{file}: sha256 {got} does not match expected {hex}")));
        }
    }
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

/// Parses the three files in `dir` and builds the dataset.
pub fn load(dir: &Path, opts: &BuildOptions) -> Result<MovieLensDataset> {
    check_files(dir)?;
    let [ratings, movies, users] = file_paths(dir);
    let ratings = parse_ratings(open(&ratings)?)?;
    let movies = parse_movies(open(&movies)?)?;
    let users = parse_users(open(&users)?)?;
    build_dataset(&ratings, &movies, &users, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_published_lines() {
        let r = parse_ratings("1::1193::5::978300760\n".as_bytes()).unwrap();
        assert_eq!(
            r,
            vec![RawRating {
                user_id: 1,
                movie_id: 1193,
                rating: 5,
                timestamp: 978300760
            }]
        );
        let m = parse_movies("1::Toy Story (1995)::Animation|Children's|Comedy\n".as_bytes()).unwrap();
        assert_eq!(m[0].title, "Toy Story (1995)");
        assert_eq!(m[0].genres.len(), 3);
        let u = parse_users("1::F::1::10::48067\n".as_bytes()).unwrap();
        assert_eq!(u, vec![UserRecord { user_id: 1, gender: Gender::Female }]);
    }

    #[test]
    fn empty_and_malformed_streams() {
        assert!(parse_ratings("".as_bytes()).unwrap().is_empty());
        let err = parse_ratings("1::x::5::0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MalformedLine { line: 1, .. }), "{err}");
        let err = parse_ratings("1::2::5::0\n1::2::9::0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MalformedLine { line: 2, .. }));
        assert!(parse_users("1::X::1::10::48067\n".as_bytes()).is_err());
        assert!(parse_movies("1::Untitled::\n".as_bytes()).is_err());
    }

    #[test]
    fn latin1_titles_become_utf8() {
        let bytes = b"3::Am\xe9lie (2001)::Comedy|Romance\r\n";
        let m = parse_movies(&bytes[..]).unwrap();
        assert_eq!(m[0].title, "Amélie (2001)");
        assert_eq!(m[0].genres, vec!["Comedy", "Romance"]);
    }

    fn tiny() -> (Vec<RawRating>, Vec<MovieRecord>, Vec<UserRecord>) {
        let movie = |id, g: &str| MovieRecord {
            movie_id: id,
            title: format!("m{id}"),
            genres: g.split('|').map(str::to_string).collect(),
        };
        let movies = vec![
            movie(10, "Action"),
            movie(11, "Romance|Drama"),
            movie(12, "Action|Romance"),
            movie(13, "Comedy"),
            movie(14, "Action|Thriller"),
        ];
        let users = vec![
            UserRecord { user_id: 1, gender: Gender::Male },
            UserRecord { user_id: 2, gender: Gender::Female },
            UserRecord { user_id: 3, gender: Gender::Male },
            UserRecord { user_id: 4, gender: Gender::Female },
        ];
        let rate = |u, m| RawRating { user_id: u, movie_id: m, rating: 3, timestamp: 0 };
        let ratings = vec![
            rate(1, 10),
            rate(1, 11),
            rate(1, 14),
            rate(2, 11),
            rate(2, 12),
            rate(2, 13),
            rate(3, 13),
            rate(4, 10),
            rate(4, 14),
        ];
        (ratings, movies, users)
    }

    #[test]
    fn build_filters_items_and_users() {
        let (r, m, u) = tiny();
        let opts = BuildOptions { min_ratings: 2, ..Default::default() };
        let ds = build_dataset(&r, &m, &u, &opts).unwrap();
        assert_eq!(ds.item_ids, vec![10, 11, 14]);
        assert_eq!(ds.labeling.item_categories(), &[0, 1, 0]);
        assert_eq!(ds.dual_genre_movies, 1);
        // user 2 has one selection on the item set, user 3 none
        assert_eq!(ds.user_ids, vec![1, 4]);
        assert_eq!(ds.labeling.user_groups(), &[0, 1]);
        assert_eq!(ds.matrix.row(0), &[0, 1, 2]);
        assert_eq!(ds.matrix.row(1), &[0, 2]);
        for u in 0..ds.matrix.n_users() {
            assert!(ds.matrix.row(u).len() >= 2);
        }
    }

    #[test]
    fn zero_threshold_keeps_every_active_user() {
        let (r, m, u) = tiny();
        let opts = BuildOptions { min_ratings: 0, ..Default::default() };
        let ds = build_dataset(&r, &m, &u, &opts).unwrap();
        assert_eq!(ds.user_ids, vec![1, 2, 4]);
    }

    #[test]
    fn id_map_inverts_reindexing() {
        let (r, m, u) = tiny();
        let ds = build_dataset(&r, &m, &u, &BuildOptions { min_ratings: 0, ..Default::default() }).unwrap();
        let rows = ds.id_map_rows();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[1], vec!["1", "2", "user"]);
        assert_eq!(rows[5], vec!["2", "14", "item"]);
    }

    #[test]
    fn balancing() {
        let (r, m, mut u) = tiny();
        u.push(UserRecord { user_id: 5, gender: Gender::Male });
        let mut r = r;
        r.push(RawRating { user_id: 5, movie_id: 10, rating: 1, timestamp: 0 });
        r.push(RawRating { user_id: 3, movie_id: 10, rating: 1, timestamp: 0 });
        let ds = build_dataset(&r, &m, &u, &BuildOptions { min_ratings: 1, ..Default::default() }).unwrap();
        // males 1,3,5; females 2,4
        assert_eq!(ds.group_count(0), 3);
        let b = balance_groups(&ds, 1).unwrap();
        assert_eq!(b.group_count(0), 2);
        assert_eq!(b.group_count(1), 2);
        let mut subsets = std::collections::HashSet::new();
        for seed in 0..20 {
            let b = balance_groups(&ds, seed).unwrap();
            subsets.insert(b.user_ids.clone());
            assert_eq!(b.matrix.n_users(), 4);
        }
        assert!(subsets.len() > 1);
        // already balanced: identity
        let same = balance_group(&ds, 1, 2, 9).unwrap();
        assert_eq!(same, ds);
        assert!(matches!(
            balance_group(&ds, 1, 3, 0),
            Err(Error::InsufficientGroup { .. })
        ));
    }
}
