//! Uniform samplers, the hit-and-run fallback and seeded stream derivation.
//!
//! All Monte Carlo in the crate draws from [`StreamSpec`]s. A stream is cut
//! into fixed-size blocks; block `b` is ChaCha8 keyed by a hash of
//! `(master_seed, chunk_index)` and positioned on ChaCha stream `b`. Blocks are
//! processed in parallel and reduced in block order, so results are identical
//! for any worker count.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::bodies::{simplex_from_barycentric, Body, BodyKind};
use crate::error::{check_dim, usage, Error, Result};

/// Points drawn per RNG block.
pub const BLOCK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSpec {
    pub master_seed: u64,
    pub chunk_index: u64,
}

impl StreamSpec {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            chunk_index: 0,
        }
    }

    fn key(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"isogeo/stream/v1");
        h.update(self.master_seed.to_le_bytes());
        h.update(self.chunk_index.to_le_bytes());
        h.finalize().into()
    }

    /// Generator for block `block` of this stream.
    pub fn rng(&self, block: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key());
        rng.set_stream(block);
        rng
    }

    /// An independent stream derived from this one; used to give each trial,
    /// direction or grid row its own randomness.
    pub fn child(&self, index: u64) -> StreamSpec {
        let key = self.key();
        let mut seed = [0u8; 8];
        seed.copy_from_slice(&key[..8]);
        StreamSpec {
            master_seed: u64::from_le_bytes(seed),
            chunk_index: index,
        }
    }
}

/// Row-major point matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(usage(format!(
                "point data of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(dim * rows.len());
        for r in rows {
            check_dim(dim, r.len(), "row")?;
            data.extend_from_slice(r);
        }
        Self::new(dim.max(1), data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Apply `f` to each row in place.
    pub fn map_rows(&mut self, mut f: impl FnMut(&mut [f64])) {
        for r in self.data.chunks_exact_mut(self.dim) {
            f(r);
        }
    }

    /// Fixed-size row blocks, processed in parallel, results in block order.
    pub fn par_blocks<R, F>(&self, rows_per_block: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(&[f64]) -> R + Sync,
    {
        self.data
            .par_chunks(rows_per_block * self.dim)
            .map(&f)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Direct,
    HitAndRun,
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Direct => "direct",
            SamplerKind::HitAndRun => "hit_and_run",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub body: Body,
    pub points: Points,
    pub seed: u64,
    pub sampler: SamplerKind,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Per-block scratch for the direct samplers.
struct DirectSampler<'a> {
    body: &'a Body,
    gamma: Option<Gamma<f64>>,
    scratch: Vec<f64>,
    bary: Vec<f64>,
}

impl<'a> DirectSampler<'a> {
    fn new(body: &'a Body) -> Self {
        let gamma = match body.kind {
            BodyKind::LpBall { p } if p != 1.0 => {
                Some(Gamma::new(1.0 / p, 1.0).expect("p >= 1 gives a valid shape"))
            }
            _ => None,
        };
        Self {
            body,
            gamma,
            scratch: vec![0.0; body.dim],
            bary: vec![0.0; body.dim + 1],
        }
    }

    fn draw<R: Rng>(&mut self, rng: &mut R, out: &mut [f64]) {
        let body = self.body;
        let n = body.dim;
        match body.kind {
            BodyKind::Cube => {
                for v in out.iter_mut() {
                    *v = rng.random::<f64>() - 0.5;
                }
            }
            BodyKind::Ball => {
                gaussian_direction(rng, out);
                let radius = body.scale * rng.random::<f64>().powf(1.0 / n as f64);
                for v in out.iter_mut() {
                    *v *= radius;
                }
            }
            BodyKind::CrossPolytope | BodyKind::LpBall { .. } => {
                // x = G / (sum |G_i|^p + E)^{1/p} with G_i ~ exp(-|t|^p) and
                // E ~ Exp(1) is uniform on B_p^n.
                let p = body.kind.exponent().expect("lp family");
                let mut total = 0.0;
                for v in out.iter_mut() {
                    let g: f64 = match &self.gamma {
                        Some(gamma) => gamma.sample(rng),
                        None => Exp1.sample(rng),
                    };
                    total += g;
                    let mag = if p == 1.0 { g } else { g.powf(1.0 / p) };
                    *v = if rng.random::<bool>() { mag } else { -mag };
                }
                let e: f64 = Exp1.sample(rng);
                total += e;
                let factor = body.scale / total.powf(1.0 / p);
                for v in out.iter_mut() {
                    *v *= factor;
                }
            }
            BodyKind::Simplex => {
                // uniform spacings of n sorted uniforms are Dirichlet(1,…,1)
                let u = &mut self.scratch;
                for v in u.iter_mut() {
                    *v = rng.random::<f64>();
                }
                u.sort_unstable_by(f64::total_cmp);
                let y = &mut self.bary;
                let mut prev = 0.0;
                for i in 0..n {
                    y[i] = u[i] - prev;
                    prev = u[i];
                }
                y[n] = 1.0 - prev;
                simplex_from_barycentric(y, body.scale, out);
            }
        }
    }
}

fn gaussian_direction<R: Rng>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for v in out.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *v = g;
            norm2 += g * g;
        }
        if norm2 > 1e-300 {
            let inv = 1.0 / norm2.sqrt();
            for v in out.iter_mut() {
                *v *= inv;
            }
            return;
        }
    }
}

fn block_count(count: usize) -> usize {
    count.div_ceil(BLOCK)
}

fn block_len(count: usize, b: usize) -> usize {
    BLOCK.min(count - b * BLOCK)
}

/// Draw `count` uniform points block by block, hand each block to `f`, and
/// return the per-block results in block order. Nothing beyond one block per
/// worker is held in memory.
pub fn map_uniform_blocks<R, F>(body: &Body, count: usize, stream: &StreamSpec, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(&[f64]) -> R + Sync,
{
    (0..block_count(count))
        .into_par_iter()
        .map(|b| {
            let len = block_len(count, b);
            let mut rng = stream.rng(b as u64);
            let mut sampler = DirectSampler::new(body);
            let mut data = vec![0.0; len * body.dim];
            for row in data.chunks_exact_mut(body.dim) {
                sampler.draw(&mut rng, row);
            }
            f(&data)
        })
        .collect()
}

/// `count` independent uniform points in `body`.
pub fn sample_uniform(body: &Body, count: usize, stream: &StreamSpec) -> Result<SampleBatch> {
    if count == 0 {
        return Err(usage("sample count must be >= 1"));
    }
    let blocks = map_uniform_blocks(body, count, stream, <[f64]>::to_vec);
    Ok(SampleBatch {
        body: *body,
        points: Points::new(body.dim, blocks.concat())?,
        seed: stream.master_seed,
        sampler: SamplerKind::Direct,
    })
}

/// Same as [`map_uniform_blocks`] for uniform directions on `S^{n-1}`.
pub fn map_sphere_blocks<R, F>(n: usize, count: usize, stream: &StreamSpec, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(&[f64]) -> R + Sync,
{
    (0..block_count(count))
        .into_par_iter()
        .map(|b| {
            let len = block_len(count, b);
            let mut rng = stream.rng(b as u64);
            let mut data = vec![0.0; len * n];
            for row in data.chunks_exact_mut(n) {
                gaussian_direction(&mut rng, row);
            }
            f(&data)
        })
        .collect()
}

/// `count` uniform unit vectors in `R^n` (normalized Gaussians).
pub fn sample_sphere(n: usize, count: usize, stream: &StreamSpec) -> Result<Points> {
    if n < 2 {
        return Err(usage(format!("sphere dimension must be >= 2, got {n}")));
    }
    let blocks = map_sphere_blocks(n, count, stream, <[f64]>::to_vec);
    Points::new(n, blocks.concat())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HitAndRunParams {
    pub burn_in: usize,
    pub thin: usize,
}

impl HitAndRunParams {
    /// `burn_in = 50 n`, `thin = n`.
    pub fn default_for(dim: usize) -> Self {
        Self {
            burn_in: 50 * dim,
            thin: dim,
        }
    }
}

/// Chord bisection stops once the bracket is below this fraction of R(K).
const CHORD_TOL: f64 = 1e-10;

/// Largest `t >= 0` (to bisection accuracy) with `x + t d` in the body.
fn chord_extent(body: &Body, x: &[f64], d: &[f64], sign: f64, buf: &mut [f64]) -> f64 {
    let r = body.circumradius;
    let mut lo = 0.0;
    // |x| <= R, so x + t d is outside once t > 2R
    let mut hi = 2.0 * r * (1.0 + 1e-9) + f64::MIN_POSITIVE;
    let tol = CHORD_TOL * r;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        for ((b, xi), di) in buf.iter_mut().zip(x).zip(d) {
            *b = xi + sign * mid * di;
        }
        if body.contains(buf) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Hit-and-run chain with uniform stationary law. Records `count` states,
/// one every `thin` steps after `burn_in` steps.
pub fn hit_and_run(
    body: &Body,
    start: &[f64],
    params: HitAndRunParams,
    count: usize,
    stream: &StreamSpec,
) -> Result<SampleBatch> {
    check_dim(body.dim, start.len(), "start point")?;
    if !body.contains(start) {
        return Err(usage("hit-and-run start point lies outside the body"));
    }
    if params.burn_in < 1 || params.thin < 1 || count < 1 {
        return Err(usage("hit-and-run needs burn_in, thin and count >= 1"));
    }
    let n = body.dim;
    let mut rng = stream.rng(0);
    let mut x = start.to_vec();
    let mut d = vec![0.0; n];
    let mut buf = vec![0.0; n];
    let mut data = Vec::with_capacity(count * n);
    let steps = params.burn_in + params.thin * count;
    for step in 1..=steps {
        gaussian_direction(&mut rng, &mut d);
        let forward = chord_extent(body, &x, &d, 1.0, &mut buf);
        let backward = chord_extent(body, &x, &d, -1.0, &mut buf);
        let t = -backward + (forward + backward) * rng.random::<f64>();
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += t * di;
        }
        if step > params.burn_in && (step - params.burn_in).is_multiple_of(params.thin) {
            data.extend_from_slice(&x);
        }
    }
    Ok(SampleBatch {
        body: *body,
        points: Points::new(n, data)?,
        seed: stream.master_seed,
        sampler: SamplerKind::HitAndRun,
    })
}

const DUMP_MAGIC: &[u8; 8] = b"ISOGEOSB";

/// Binary dump: 32-byte header (magic, n, count, seed as little-endian u64)
/// followed by little-endian f64 coordinates, row-major.
pub fn write_batch<W: Write>(batch: &SampleBatch, mut w: W) -> Result<()> {
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&(batch.points.dim() as u64).to_le_bytes())?;
    w.write_all(&(batch.len() as u64).to_le_bytes())?;
    w.write_all(&batch.seed.to_le_bytes())?;
    let mut buf = Vec::with_capacity(batch.points.as_slice().len() * 8);
    for v in batch.points.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Contents of a dump: `(points, seed)`.
pub fn read_batch<R: Read>(mut r: R) -> Result<(Points, u64)> {
    let mut header = [0u8; 32];
    r.read_exact(&mut header)?;
    if &header[..8] != DUMP_MAGIC {
        return Err(usage("not a sample dump (bad magic)"));
    }
    let word = |i: usize| u64::from_le_bytes(header[i..i + 8].try_into().expect("8 bytes"));
    let (n, count, seed) = (word(8) as usize, word(16) as usize, word(24));
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * count * 8 {
        return Err(Error::Usage(format!(
            "sample dump body has {} bytes, header promises {}",
            bytes.len(),
            n * count * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((Points::new(n, data)?, seed))
}
