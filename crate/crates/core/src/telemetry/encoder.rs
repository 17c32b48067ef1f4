//! Character n-gram TF-IDF followed by a rank-128 randomized truncated SVD.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use super::{Embedding128, LogRecord};
use crate::error::{CoreError, Result};
use crate::rng::{stream, ENCODER};

pub const EMBED_DIM: usize = 128;
pub const MAX_VOCAB: usize = 20_000;
const OVERSAMPLE: usize = 10;
const POWER_ITERS: usize = 4;
const MAGIC: &[u8; 4] = b"NFEM";
const VERSION: u32 = 1;
const CACHE_LIMIT: usize = 16_384;

/// Word-boundary character n-grams (n = 3..=5) of one lowercased word.
///
/// The word is padded with a space on each side. A padded word no longer
/// than `n` is emitted whole, once, and ends the expansion.
pub fn char_wb_ngrams(word: &str, mut emit: impl FnMut(&str)) {
    let padded = format!(" {word} ");
    let mut bounds: Vec<usize> = padded.char_indices().map(|(i, _)| i).collect();
    bounds.push(padded.len());
    let chars = bounds.len() - 1;
    for n in 3..=5 {
        if chars <= n {
            emit(&padded);
            break;
        }
        for s in 0..=chars - n {
            emit(&padded[bounds[s]..bounds[s + n]]);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Encoded {
    pub embedding: Embedding128,
    /// Every n-gram was out of vocabulary; the embedding is the zero vector.
    pub oov: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderModel {
    pub fit_seed: u64,
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    idf: Vec<f32>,
    /// vocab × 128, row-major.
    projection: Vec<f32>,
}

impl EncoderModel {
    pub fn fit(corpus: &[LogRecord], fit_seed: u64) -> Result<Self> {
        let docs: Vec<&str> = corpus.iter().map(|r| r.xml_text.as_str()).collect();
        Self::fit_texts(&docs, fit_seed)
    }

    pub fn fit_texts(docs: &[&str], fit_seed: u64) -> Result<Self> {
        let unique: BTreeSet<&str> = docs.iter().copied().collect();
        if unique.len() < EMBED_DIM {
            return Err(CoreError::Encoder(format!(
                "corpus has {} unique documents but a rank-{EMBED_DIM} projection needs at least {EMBED_DIM}; generate a larger corpus",
                unique.len()
            )));
        }

        let mut term_ids: HashMap<String, u32> = HashMap::new();
        let mut terms: Vec<String> = Vec::new();
        let mut doc_counts: Vec<Vec<(u32, u32)>> = Vec::with_capacity(docs.len());
        for doc in docs {
            let mut counts: HashMap<u32, u32> = HashMap::new();
            for word in doc.split_whitespace() {
                char_wb_ngrams(&word.to_lowercase(), |g| {
                    let id = match term_ids.get(g) {
                        Some(&id) => id,
                        None => {
                            let id = terms.len() as u32;
                            terms.push(g.to_string());
                            term_ids.insert(g.to_string(), id);
                            id
                        }
                    };
                    *counts.entry(id).or_default() += 1;
                });
            }
            let mut row: Vec<(u32, u32)> = counts.into_iter().collect();
            row.sort_unstable();
            doc_counts.push(row);
        }

        let mut df = vec![0u32; terms.len()];
        for row in &doc_counts {
            for &(id, _) in row {
                df[id as usize] += 1;
            }
        }
        let mut ranked: Vec<u32> = (0..terms.len() as u32).collect();
        ranked.sort_by(|&a, &b| df[b as usize].cmp(&df[a as usize]).then_with(|| terms[a as usize].cmp(&terms[b as usize])));
        ranked.truncate(MAX_VOCAB);
        ranked.sort_by(|&a, &b| terms[a as usize].cmp(&terms[b as usize]));
        if ranked.len() < EMBED_DIM {
            return Err(CoreError::Encoder(format!(
                "vocabulary has {} n-grams, fewer than the {EMBED_DIM} output dimensions",
                ranked.len()
            )));
        }
        let mut column = vec![u32::MAX; terms.len()];
        for (col, &id) in ranked.iter().enumerate() {
            column[id as usize] = col as u32;
        }
        let n_docs = docs.len() as f64;
        let idf: Vec<f64> = ranked
            .iter()
            .map(|&id| ((1.0 + n_docs) / (1.0 + df[id as usize] as f64)).ln() + 1.0)
            .collect();

        let rows: Vec<Vec<(u32, f64)>> = doc_counts
            .iter()
            .map(|row| {
                let mut r: Vec<(u32, f64)> = row
                    .iter()
                    .filter_map(|&(id, c)| {
                        let col = column[id as usize];
                        (col != u32::MAX).then(|| (col, c as f64 * idf[col as usize]))
                    })
                    .collect();
                let norm = r.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for (_, v) in &mut r {
                        *v /= norm;
                    }
                }
                r.sort_unstable_by_key(|(c, _)| *c);
                r
            })
            .collect();

        let vocab_len = ranked.len();
        let components = randomized_svd(&rows, vocab_len, fit_seed)?;

        let mut projection = vec![0f32; vocab_len * EMBED_DIM];
        for (k, comp) in components.iter().enumerate() {
            for (j, v) in comp.iter().enumerate() {
                projection[j * EMBED_DIM + k] = *v as f32;
            }
        }
        let vocab: Vec<String> = ranked.iter().map(|&id| terms[id as usize].clone()).collect();
        Ok(Self::assemble(
            fit_seed,
            vocab,
            idf.iter().map(|&v| v as f32).collect(),
            projection,
        ))
    }

    fn assemble(fit_seed: u64, vocab: Vec<String>, idf: Vec<f32>, projection: Vec<f32>) -> Self {
        let index = vocab.iter().enumerate().map(|(i, g)| (g.clone(), i as u32)).collect();
        EncoderModel {
            fit_seed,
            vocab,
            index,
            idf,
            projection,
        }
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    pub fn dim(&self) -> usize {
        EMBED_DIM
    }

    /// Unnormalized contribution of one raw word and whether any n-gram hit.
    pub fn word_vector(&self, word: &str) -> ([f64; EMBED_DIM], bool) {
        let mut acc = [0.0; EMBED_DIM];
        let mut hit = false;
        char_wb_ngrams(&word.to_lowercase(), |g| {
            if let Some(&col) = self.index.get(g) {
                hit = true;
                let w = self.idf[col as usize] as f64;
                let row = &self.projection[col as usize * EMBED_DIM..(col as usize + 1) * EMBED_DIM];
                for (a, p) in acc.iter_mut().zip(row) {
                    *a += w * *p as f64;
                }
            }
        });
        (acc, hit)
    }

    pub fn encode_text(&self, text: &str) -> Encoded {
        finish(text.split_whitespace().map(|w| self.word_vector(w)))
    }

    pub fn encode_log(&self, record: &LogRecord) -> Encoded {
        self.encode_text(&record.xml_text)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.fit_seed.to_le_bytes())?;
        w.write_all(&(self.vocab.len() as u32).to_le_bytes())?;
        w.write_all(&(EMBED_DIM as u32).to_le_bytes())?;
        for g in &self.vocab {
            w.write_all(&(g.len() as u32).to_le_bytes())?;
            w.write_all(g.as_bytes())?;
        }
        for v in &self.idf {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.projection {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let bad = |m: &str| CoreError::Encoder(m.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("not an encoder model file"));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(CoreError::Encoder(format!("unsupported model version {version}")));
        }
        let mut seed = [0u8; 8];
        r.read_exact(&mut seed)?;
        let fit_seed = u64::from_le_bytes(seed);
        let vocab_len = read_u32(r)? as usize;
        let dim = read_u32(r)? as usize;
        if dim != EMBED_DIM || vocab_len > MAX_VOCAB {
            return Err(bad("model dimensions out of range"));
        }
        let mut vocab = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            let len = read_u32(r)? as usize;
            if len > 64 {
                return Err(bad("n-gram entry too long"));
            }
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            vocab.push(String::from_utf8(buf).map_err(|_| bad("n-gram is not utf-8"))?);
        }
        let idf = read_f32s(r, vocab_len)?;
        let projection = read_f32s(r, vocab_len * EMBED_DIM)?;
        Ok(Self::assemble(fit_seed, vocab, idf, projection))
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        Self::read_from(&mut bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

fn finish(words: impl Iterator<Item = ([f64; EMBED_DIM], bool)>) -> Encoded {
    let mut acc = [0.0; EMBED_DIM];
    let mut any = false;
    for (v, hit) in words {
        any |= hit;
        for (a, x) in acc.iter_mut().zip(v.iter()) {
            *a += x;
        }
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !any || norm == 0.0 {
        return Encoded {
            embedding: Embedding128::default(),
            oov: true,
        };
    }
    for a in &mut acc {
        *a /= norm;
    }
    Encoded {
        embedding: Embedding128(acc),
        oov: false,
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f32>> {
    let mut buf = vec![0u8; count * 4];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Encoder front end that memoizes per-word vectors. Results are
/// bit-identical to [`EncoderModel::encode_text`].
#[derive(Clone, Debug)]
pub struct WordCache {
    model: Arc<EncoderModel>,
    cache: HashMap<String, (Box<[f64; EMBED_DIM]>, bool)>,
}

impl WordCache {
    pub fn new(model: Arc<EncoderModel>) -> Self {
        WordCache {
            model,
            cache: HashMap::new(),
        }
    }

    pub fn model(&self) -> &Arc<EncoderModel> {
        &self.model
    }

    pub fn encode(&mut self, text: &str) -> Encoded {
        let mut acc = [0.0; EMBED_DIM];
        let mut any = false;
        for word in text.split_whitespace() {
            if !self.cache.contains_key(word) {
                if self.cache.len() >= CACHE_LIMIT {
                    self.cache.clear();
                }
                let (v, hit) = self.model.word_vector(word);
                self.cache.insert(word.to_string(), (Box::new(v), hit));
            }
            let (v, hit) = &self.cache[word];
            any |= *hit;
            for (a, x) in acc.iter_mut().zip(v.iter()) {
                *a += x;
            }
        }
        finish(std::iter::once((acc, any)))
    }
}

/// Top right singular vectors (each of length `cols`) of the sparse
/// row matrix, by Gaussian range finding with power iterations.
fn randomized_svd(rows: &[Vec<(u32, f64)>], cols: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = rows.len();
    let l = (EMBED_DIM + OVERSAMPLE).min(n).min(cols);
    let mut rng = stream(seed, ENCODER);
    let omega: Vec<f64> = (0..cols * l).map(|_| StandardNormal.sample(&mut rng)).collect();

    let mut q = orthonormalize(n, l, sparse_times(rows, &omega, l, n));
    for _ in 0..POWER_ITERS {
        let z = orthonormalize(cols, l, sparse_t_times(rows, &q, l, cols));
        q = orthonormalize(n, l, sparse_times(rows, &z, l, n));
    }
    // Bᵀ = Xᵀ Q, so B Bᵀ = Zᵀ Z with Z = Xᵀ Q
    let z = sparse_t_times(rows, &q, l, cols);
    let mut gram = DMatrix::<f64>::zeros(l, l);
    for r in 0..cols {
        let zr = &z[r * l..(r + 1) * l];
        for a in 0..l {
            if zr[a] == 0.0 {
                continue;
            }
            for b in a..l {
                gram[(a, b)] += zr[a] * zr[b];
            }
        }
    }
    for a in 0..l {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let kth = eig.eigenvalues[order[EMBED_DIM - 1]].max(0.0);
    if top <= 0.0 || kth <= 1e-12 * top {
        return Err(CoreError::Encoder(format!(
            "corpus spans fewer than {EMBED_DIM} independent directions; generate a larger or more varied corpus"
        )));
    }

    let mut components = Vec::with_capacity(EMBED_DIM);
    for &idx in order.iter().take(EMBED_DIM) {
        let sigma = eig.eigenvalues[idx].sqrt();
        let u = eig.eigenvectors.column(idx);
        let mut v: Vec<f64> = (0..cols)
            .map(|r| z[r * l..(r + 1) * l].iter().zip(u.iter()).map(|(a, b)| a * b).sum::<f64>() / sigma)
            .collect();
        let mut pivot = 0;
        for (j, x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = j;
            }
        }
        if v[pivot] < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
        components.push(v);
    }
    Ok(components)
}

/// X · M for sparse X (n × cols) and row-major M (cols × l).
fn sparse_times(rows: &[Vec<(u32, f64)>], m: &[f64], l: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * l];
    for (r, row) in rows.iter().enumerate() {
        let o = &mut out[r * l..(r + 1) * l];
        for &(c, v) in row {
            let mr = &m[c as usize * l..(c as usize + 1) * l];
            for (a, b) in o.iter_mut().zip(mr) {
                *a += v * b;
            }
        }
    }
    out
}

/// Xᵀ · Q for sparse X (n × cols) and row-major Q (n × l).
fn sparse_t_times(rows: &[Vec<(u32, f64)>], q: &[f64], l: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols * l];
    for (r, row) in rows.iter().enumerate() {
        let qr = &q[r * l..(r + 1) * l];
        for &(c, v) in row {
            let o = &mut out[c as usize * l..(c as usize + 1) * l];
            for (a, b) in o.iter_mut().zip(qr) {
                *a += v * b;
            }
        }
    }
    out
}

/// Thin-QR orthonormal basis of a row-major `rows × cols` matrix.
fn orthonormalize(rows: usize, cols: usize, data: Vec<f64>) -> Vec<f64> {
    let m = DMatrix::from_row_slice(rows, cols, &data);
    let q = m.qr().q();
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = q[(r, c)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grams(word: &str) -> Vec<String> {
        let mut v = Vec::new();
        char_wb_ngrams(word, |g| v.push(g.to_string()));
        v
    }

    #[test]
    fn ngrams_follow_word_boundary_padding() {
        assert_eq!(grams("a"), vec![" a "]);
        assert_eq!(grams("ab"), vec![" ab", "ab ", " ab "]);
        let abc = grams("abc");
        assert_eq!(&abc[..3], &[" ab", "abc", "bc "]);
        assert_eq!(&abc[3..], &[" abc", "abc ", " abc "]);
        assert_eq!(grams("héllo").len(), 5 + 4 + 3);
    }

    #[test]
    fn too_few_documents_is_a_rank_error() {
        let docs: Vec<String> = (0..64).map(|i| format!("log line number {i} on host-{i}")).collect();
        let refs: Vec<&str> = docs.iter().map(String::as_str).collect();
        let err = EncoderModel::fit_texts(&refs, 1).unwrap_err();
        assert!(err.to_string().contains("at least 128"));
    }

    fn synthetic_docs() -> Vec<String> {
        let words = [
            "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet", "kilo",
            "lima", "mike", "november", "oscar", "papa", "quebec", "romeo", "sierra", "tango", "uniform",
        ];
        (0..400)
            .map(|i: usize| {
                let a = words[i % words.len()];
                let b = words[(i * 7 + 3) % words.len()];
                let c = words[(i * 13 + 5) % words.len()];
                format!("{a} {b}-{i} {c}{} x{}", i % 17, i * 31 % 97)
            })
            .collect()
    }

    #[test]
    fn fit_is_deterministic_and_roundtrips() {
        let docs = synthetic_docs();
        let refs: Vec<&str> = docs.iter().map(String::as_str).collect();
        let a = EncoderModel::fit_texts(&refs, 9).unwrap();
        let b = EncoderModel::fit_texts(&refs, 9).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let back = EncoderModel::from_bytes(&a.to_bytes()).unwrap();
        assert_eq!(back, a);
        let e = a.encode_text(&docs[5]);
        assert!(!e.oov);
        assert!((e.embedding.norm() - 1.0).abs() < 1e-6);
        assert!(a.encode_text("ZZZZ QQQQ").oov);
        let mut cache = WordCache::new(Arc::new(a.clone()));
        assert_eq!(cache.encode(&docs[5]), e);
        assert_eq!(cache.encode(&docs[5]), e);
    }

    #[test]
    fn components_are_orthonormal() {
        let docs = synthetic_docs();
        let refs: Vec<&str> = docs.iter().map(String::as_str).collect();
        let m = EncoderModel::fit_texts(&refs, 3).unwrap();
        let v = m.vocab_len();
        for a in [0, 5, 127] {
            for b in [0, 5, 127] {
                let dot: f64 = (0..v)
                    .map(|j| m.projection[j * EMBED_DIM + a] as f64 * m.projection[j * EMBED_DIM + b] as f64)
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-4, "{a},{b}: {dot}");
            }
        }
    }
}
