//! Dense `C += A * B` kernel.
//!
//! Every output element accumulates its products in ascending `k` order starting from
//! the value already in `C`, whatever the blocking, so a zero-initialised `C` matches
//! the textbook triple loop bit for bit. On CPUs with FMA each step is a fused
//! multiply-add; [`madd`] performs the identical step for reference loops. Register tiling only changes which elements
//! are in flight at once. The same holds for the row-parallel path: rows are split
//! between workers, never the reduction.

use super::Float;
use std::sync::atomic::{AtomicUsize, Ordering};

const KC: usize = 128;
const NC: usize = 512;

static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Sets the number of worker threads used by large matrix products.
pub fn set_threads(n: usize) {
    THREADS.store(n.max(1), Ordering::Relaxed);
}

pub fn threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}

/// `c[m x n] += a[m x k] * b[k x n]`, all row-major.
pub(crate) fn gemm_acc(m: usize, k: usize, n: usize, a: &[Float], b: &[Float], c: &mut [Float]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    if m > DIRECT_B_M {
        gemm_acc_packed(m, a, &PackedB::new(k, n, b), c);
        return;
    }
    #[cfg(feature = "parallel")]
    {
        let workers = threads();
        if workers > 1 && m >= 16 {
            use rayon::prelude::*;
            let rows_per = m.div_ceil(workers).next_multiple_of(8);
            c.par_chunks_mut(rows_per * n)
                .zip(a.par_chunks(rows_per * k))
                .for_each(|(cc, aa)| dispatch(cc.len() / n, k, n, aa, Source::Raw(b), cc));
            return;
        }
    }
    dispatch(m, k, n, a, Source::Raw(b), c);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(not(target_arch = "x86_64"), allow(dead_code))]
enum Path {
    Avx512,
    Avx2,
    Portable,
}

fn path() -> Path {
    #[cfg(target_arch = "x86_64")]
    {
        if fused() && std::arch::is_x86_feature_detected!("avx512f") {
            return Path::Avx512;
        }
        if fused() && std::arch::is_x86_feature_detected!("avx2") {
            return Path::Avx2;
        }
    }
    Path::Portable
}

/// Columns per packed panel on a given path.
fn panel_width(p: Path) -> usize {
    match p {
        #[cfg(target_arch = "x86_64")]
        Path::Avx512 => simd::NR512,
        #[cfg(target_arch = "x86_64")]
        Path::Avx2 => 3 * simd::W256,
        _ => 8,
    }
}

fn dispatch(m: usize, k: usize, n: usize, a: &[Float], b: Source<'_>, c: &mut [Float]) {
    match path() {
        #[cfg(target_arch = "x86_64")]
        // SAFETY: the feature was detected at runtime.
        Path::Avx512 => unsafe { gemm_avx512(m, k, n, a, b, c) },
        #[cfg(target_arch = "x86_64")]
        // SAFETY: the feature was detected at runtime.
        Path::Avx2 => unsafe { gemm_avx2(m, k, n, a, b, c) },
        _ => gemm_blocked::<4, 8, false>(m, k, n, a, b, c, kernel::<4, 8>),
    }
}

/// Right-hand operand packed once into kernel panels, for reuse across many
/// products with the same matrix.
#[derive(Clone, Debug)]
pub struct PackedB<'a> {
    raw: &'a [Float],
    k: usize,
    n: usize,
    nr: usize,
    /// Blocks ordered `[jc][pc]`, each laid out as [`pack_b`] writes it.
    data: Vec<Float>,
    offsets: Vec<usize>,
}

impl<'a> PackedB<'a> {
    pub(crate) fn new(k: usize, n: usize, b: &'a [Float]) -> Self {
        debug_assert_eq!(b.len(), k * n);
        let nr = panel_width(path());
        let mut data = PACKED_POOL.with_borrow_mut(|pool| pool.pop()).unwrap_or_default();
        data.clear();
        data.resize(n.next_multiple_of(nr) * k, 0.0);
        let mut offsets = Vec::new();
        let mut at = 0;
        for jc in (0..n).step_by(NC) {
            let nc = NC.min(n - jc);
            for pc in (0..k).step_by(KC) {
                let kc = KC.min(k - pc);
                let out = &mut data[at..at + nc.next_multiple_of(nr) * kc];
                match nr {
                    #[cfg(target_arch = "x86_64")]
                    16 => pack_b_into::<16>(b, n, pc, kc, jc, nc, out),
                    #[cfg(target_arch = "x86_64")]
                    12 => pack_b_into::<12>(b, n, pc, kc, jc, nc, out),
                    _ => pack_b_into::<8>(b, n, pc, kc, jc, nc, out),
                }
                offsets.push(at);
                at += out.len();
            }
        }
        PackedB { raw: b, k, n, nr, data, offsets }
    }

    pub fn rows(&self) -> usize {
        self.k
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    fn block(&self, jc: usize, pc: usize) -> &[Float] {
        let i = (jc / NC) * self.k.div_ceil(KC) + pc / KC;
        let end = self.offsets.get(i + 1).copied().unwrap_or(self.data.len());
        &self.data[self.offsets[i]..end]
    }
}

impl Drop for PackedB<'_> {
    fn drop(&mut self) {
        let data = std::mem::take(&mut self.data);
        PACKED_POOL.with_borrow_mut(|pool| {
            if pool.len() < 4 {
                pool.push(data);
            }
        });
    }
}

#[derive(Clone, Copy)]
enum Source<'a> {
    Raw(&'a [Float]),
    Packed(&'a PackedB<'a>),
}

impl Source<'_> {
    fn raw(&self) -> &[Float] {
        match self {
            Source::Raw(b) => b,
            Source::Packed(p) => p.raw,
        }
    }
}

/// `c[m x n] += a[m x k] * packed`, identical to [`gemm_acc`] on the unpacked matrix.
pub(crate) fn gemm_acc_packed(m: usize, a: &[Float], b: &PackedB<'_>, c: &mut [Float]) {
    let (k, n) = (b.k, b.n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    if b.nr != panel_width(path()) {
        dispatch(m, k, n, a, Source::Raw(b.raw), c);
        return;
    }
    #[cfg(feature = "parallel")]
    {
        let workers = threads();
        if workers > 1 && m >= 16 {
            use rayon::prelude::*;
            let rows_per = m.div_ceil(workers).next_multiple_of(8);
            c.par_chunks_mut(rows_per * n)
                .zip(a.par_chunks(rows_per * k))
                .for_each(|(cc, aa)| dispatch(cc.len() / n, k, n, aa, Source::Packed(b), cc));
            return;
        }
    }
    dispatch(m, k, n, a, Source::Packed(b), c);
}

/// Whether products are accumulated with a fused multiply-add (one rounding per step).
/// Decided once per process from the CPU; the summation order is the same either way.
pub fn fused() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        static FUSED: std::sync::OnceLock<bool> = std::sync::OnceLock::new();
        *FUSED.get_or_init(|| {
            std::arch::is_x86_feature_detected!("fma")
                && (std::arch::is_x86_feature_detected!("avx2") || std::arch::is_x86_feature_detected!("avx512f"))
        })
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

/// One accumulation step exactly as the kernel performs it.
#[inline]
pub fn madd(acc: Float, a: Float, b: Float) -> Float {
    if fused() {
        a.mul_add(b, acc)
    } else {
        acc + a * b
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f,fma")]
unsafe fn gemm_avx512(m: usize, k: usize, n: usize, a: &[Float], b: Source<'_>, c: &mut [Float]) {
    gemm_blocked::<8, { simd::NR512 }, true>(m, k, n, a, b, c, simd::kernel512)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn gemm_avx2(m: usize, k: usize, n: usize, a: &[Float], b: Source<'_>, c: &mut [Float]) {
    gemm_blocked::<4, { 3 * simd::W256 }, true>(m, k, n, a, b, c, simd::kernel256)
}

thread_local! {
    /// Released packing buffers, reused to avoid fresh page faults.
    static PACKED_POOL: std::cell::RefCell<Vec<Vec<Float>>> = const { std::cell::RefCell::new(Vec::new()) };
    static PACK: std::cell::RefCell<(Vec<Float>, Vec<Float>)> = const { std::cell::RefCell::new((Vec::new(), Vec::new())) };
}

/// Rows below this use a streaming axpy per row instead of packed tiles.
const SMALL_M: usize = 4;

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn gemm_blocked<const MR: usize, const NR: usize, const FUSED: bool>(
    m: usize,
    k: usize,
    n: usize,
    a: &[Float],
    src: Source<'_>,
    c: &mut [Float],
    kern: Kernel,
) {
    let b = src.raw();
    if m < SMALL_M {
        for jc in (0..n).step_by(NC) {
            let nc = NC.min(n - jc);
            for pc in (0..k).step_by(KC) {
                let kc = KC.min(k - pc);
                for r in 0..m {
                    axpy_row::<FUSED>(r, jc, nc, pc, kc, k, n, a, b, c);
                }
            }
        }
        return;
    }
    PACK.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (pa, pb) = &mut *guard;
        if let Source::Packed(p) = src {
            // Row blocks outermost keep each block of C cache resident across k.
            for ic in (0..m).step_by(MC) {
                let mc = MC.min(m - ic);
                for jc in (0..n).step_by(NC) {
                    let nc = NC.min(n - jc);
                    for pc in (0..k).step_by(KC) {
                        let kc = KC.min(k - pc);
                        let blk = p.block(jc, pc);
                        pack_a::<MR>(a, k, ic, mc, pc, kc, pa);
                        block_tiles::<MR, NR>(kern, kc, pa, (ic, mc), (jc, nc), n, c, |jp, _| {
                            (&blk[jp * NR * kc..(jp + 1) * NR * kc], NR)
                        });
                    }
                }
            }
            return;
        }
        for jc in (0..n).step_by(NC) {
            let nc = NC.min(n - jc);
            let panels_b = nc.div_ceil(NR);
            for pc in (0..k).step_by(KC) {
                let kc = KC.min(k - pc);
                // Few rows reuse each B panel too rarely to repay packing it; full
                // panels are then read in place and only the ragged edge is copied.
                let direct = m <= DIRECT_B_M;
                match direct {
                    true if !nc.is_multiple_of(NR) => pack_b::<NR>(b, n, pc, kc, jc + (panels_b - 1) * NR, nc % NR, pb),
                    true => {}
                    false => pack_b::<NR>(b, n, pc, kc, jc, nc, pb),
                }
                for ic in (0..m).step_by(MC) {
                    let mc = MC.min(m - ic);
                    pack_a::<MR>(a, k, ic, mc, pc, kc, pa);
                    block_tiles::<MR, NR>(kern, kc, pa, (ic, mc), (jc, nc), n, c, |jp, cols| {
                        if !direct {
                            (&pb[jp * NR * kc..(jp + 1) * NR * kc], NR)
                        } else if cols == NR {
                            let start = pc * n + jc + jp * NR;
                            (&b[start..start + (kc - 1) * n + NR], n)
                        } else {
                            (&pb[..NR * kc], NR)
                        }
                    });
                }
            }
        }
    });
}

/// Runs every micro tile of one `mc x nc` block; `panel(jp, cols)` yields B panel `jp`
/// and its row stride.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn block_tiles<'b, const MR: usize, const NR: usize>(
    kern: Kernel,
    kc: usize,
    pa: &[Float],
    (ic, mc): (usize, usize),
    (jc, nc): (usize, usize),
    n: usize,
    c: &mut [Float],
    panel: impl Fn(usize, usize) -> (&'b [Float], usize),
) {
    for jp in 0..nc.div_ceil(NR) {
        let cols = NR.min(nc - jp * NR);
        let (bpanel, ldb) = panel(jp, cols);
        for ip in 0..mc.div_ceil(MR) {
            let rows = MR.min(mc - ip * MR);
            let apanel = &pa[ip * MR * kc..(ip + 1) * MR * kc];
            micro_tile::<MR, NR>(kern, kc, apanel, bpanel, ldb, c, (ic + ip * MR) * n + jc + jp * NR, n, rows, cols);
        }
    }
}

const MC: usize = 64;

/// Largest row count that reads B without packing.
const DIRECT_B_M: usize = 64;

/// Packs `a[ic.., pc..]` as panels of `MR` rows laid out `[p][r]`, zero-filled.
#[inline(always)]
fn pack_a<const MR: usize>(a: &[Float], k: usize, ic: usize, mc: usize, pc: usize, kc: usize, out: &mut Vec<Float>) {
    let panels = mc.div_ceil(MR);
    out.clear();
    out.resize(panels * MR * kc, 0.0);
    for ip in 0..panels {
        let dst = &mut out[ip * MR * kc..(ip + 1) * MR * kc];
        for r in 0..MR.min(mc - ip * MR) {
            let src = &a[(ic + ip * MR + r) * k + pc..(ic + ip * MR + r) * k + pc + kc];
            for (p, &v) in src.iter().enumerate() {
                dst[p * MR + r] = v;
            }
        }
    }
}

/// Packs `b[pc.., jc..]` as panels of `NR` columns laid out `[p][q]`, zero-filled.
#[inline(always)]
fn pack_b<const NR: usize>(b: &[Float], n: usize, pc: usize, kc: usize, jc: usize, nc: usize, out: &mut Vec<Float>) {
    out.clear();
    out.resize(nc.div_ceil(NR) * NR * kc, 0.0);
    pack_b_into::<NR>(b, n, pc, kc, jc, nc, out);
}

/// [`pack_b`] into a zeroed slice of exactly the packed size.
#[inline(always)]
fn pack_b_into<const NR: usize>(b: &[Float], n: usize, pc: usize, kc: usize, jc: usize, nc: usize, out: &mut [Float]) {
    for jp in 0..nc.div_ceil(NR) {
        let cols = NR.min(nc - jp * NR);
        let dst = &mut out[jp * NR * kc..(jp + 1) * NR * kc];
        for p in 0..kc {
            let src = &b[(pc + p) * n + jc + jp * NR..(pc + p) * n + jc + jp * NR + cols];
            dst[p * NR..p * NR + cols].copy_from_slice(src);
        }
    }
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn micro_tile<const MR: usize, const NR: usize>(
    kern: Kernel,
    kc: usize,
    apanel: &[Float],
    bpanel: &[Float],
    ldb: usize,
    c: &mut [Float],
    offset: usize,
    n: usize,
    rows: usize,
    cols: usize,
) {
    if rows == MR && cols == NR {
        kern(kc, apanel, bpanel, ldb, &mut c[offset..offset + (MR - 1) * n + NR], n);
        return;
    }
    let mut tile = [[0.0 as Float; NR]; MR];
    for r in 0..rows {
        tile[r][..cols].copy_from_slice(&c[offset + r * n..offset + r * n + cols]);
    }
    kern(kc, apanel, bpanel, ldb, tile.as_flattened_mut(), NR);
    for r in 0..rows {
        c[offset + r * n..offset + r * n + cols].copy_from_slice(&tile[r][..cols]);
    }
}

/// `(kc, a panel, b, row stride of b, c tile, row stride of c)`; accumulates an
/// `MR x NR` tile in place.
type Kernel = fn(usize, &[Float], &[Float], usize, &mut [Float], usize);

#[inline(always)]
fn kernel<const MR: usize, const NR: usize>(
    kc: usize,
    apanel: &[Float],
    bpanel: &[Float],
    ldb: usize,
    c: &mut [Float],
    ldc: usize,
) {
    let apanel = &apanel[..kc * MR];
    let mut acc = [[0.0 as Float; NR]; MR];
    for r in 0..MR {
        acc[r].copy_from_slice(&c[r * ldc..r * ldc + NR]);
    }
    for p in 0..kc {
        let av: [Float; MR] = apanel[p * MR..p * MR + MR].try_into().unwrap();
        let bv: [Float; NR] = bpanel[p * ldb..p * ldb + NR].try_into().unwrap();
        for r in 0..MR {
            for q in 0..NR {
                acc[r][q] += av[r] * bv[q];
            }
        }
    }
    for r in 0..MR {
        c[r * ldc..r * ldc + NR].copy_from_slice(&acc[r]);
    }
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn axpy_row<const FUSED: bool>(
    r: usize,
    jc: usize,
    nc: usize,
    pc: usize,
    kc: usize,
    k: usize,
    n: usize,
    a: &[Float],
    b: &[Float],
    c: &mut [Float],
) {
    let crow = &mut c[r * n + jc..r * n + jc + nc];
    for p in pc..pc + kc {
        let av = a[r * k + p];
        let brow = &b[p * n + jc..p * n + jc + nc];
        if FUSED {
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv = av.mul_add(*bv, *cv);
            }
        } else {
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += av * *bv;
            }
        }
    }
}


#[cfg(target_arch = "x86_64")]
mod simd {
    //! Register-tiled fused multiply-add kernels.
    use super::Float;

    mod v {
        use std::arch::x86_64::*;
        pub type V512 = __m512d;
        pub type V256 = __m256d;
        pub const W512: usize = 8;
        pub const W256: usize = 4;
        #[inline(always)]
        pub unsafe fn load512(p: *const f64) -> V512 { _mm512_loadu_pd(p) }
        #[inline(always)]
        pub unsafe fn store512(p: *mut f64, v: V512) { _mm512_storeu_pd(p, v) }
        #[inline(always)]
        pub unsafe fn splat512(x: f64) -> V512 { _mm512_set1_pd(x) }
        #[inline(always)]
        pub unsafe fn muladd512(acc: V512, a: V512, b: V512) -> V512 { _mm512_fmadd_pd(a, b, acc) }
        #[inline(always)]
        pub unsafe fn load256(p: *const f64) -> V256 { _mm256_loadu_pd(p) }
        #[inline(always)]
        pub unsafe fn store256(p: *mut f64, v: V256) { _mm256_storeu_pd(p, v) }
        #[inline(always)]
        pub unsafe fn splat256(x: f64) -> V256 { _mm256_set1_pd(x) }
        #[inline(always)]
        pub unsafe fn muladd256(acc: V256, a: V256, b: V256) -> V256 { _mm256_fmadd_pd(a, b, acc) }
    }

    pub use v::{W256, W512};
    use v::*;

    const VECS512: usize = 2;
    pub const NR512: usize = VECS512 * W512;
    const NR256: usize = 3 * W256;

    pub fn kernel512(kc: usize, ap: &[Float], bp: &[Float], ldb: usize, c: &mut [Float], ldc: usize) {
        assert!(kc > 0 && ap.len() >= kc * 8 && bp.len() >= (kc - 1) * ldb + NR512 && c.len() >= 7 * ldc + NR512);
        // SAFETY: only reached through the avx512f+fma dispatch; bounds asserted above.
        unsafe { kernel512_inner(kc, ap.as_ptr(), bp.as_ptr(), ldb, c.as_mut_ptr(), ldc) }
    }

    #[target_feature(enable = "avx512f,fma")]
    unsafe fn kernel512_inner(kc: usize, ap: *const Float, bp: *const Float, ldb: usize, c: *mut Float, ldc: usize) {
        let mut acc: [[V512; VECS512]; 8] = [[splat512(0.0); VECS512]; 8];
        for r in 0..8 {
            for j in 0..VECS512 {
                acc[r][j] = load512(c.add(r * ldc + j * W512));
            }
        }
        for p in 0..kc {
            let mut b = [splat512(0.0); VECS512];
            for j in 0..VECS512 {
                b[j] = load512(bp.add(p * ldb + j * W512));
            }
            for r in 0..8 {
                let a = splat512(*ap.add(p * 8 + r));
                for j in 0..VECS512 {
                    acc[r][j] = muladd512(acc[r][j], a, b[j]);
                }
            }
        }
        for r in 0..8 {
            for j in 0..VECS512 {
                store512(c.add(r * ldc + j * W512), acc[r][j]);
            }
        }
    }

    pub fn kernel256(kc: usize, ap: &[Float], bp: &[Float], ldb: usize, c: &mut [Float], ldc: usize) {
        assert!(kc > 0 && ap.len() >= kc * 4 && bp.len() >= (kc - 1) * ldb + NR256 && c.len() >= 3 * ldc + NR256);
        // SAFETY: only reached through the avx2+fma dispatch; bounds asserted above.
        unsafe { kernel256_inner(kc, ap.as_ptr(), bp.as_ptr(), ldb, c.as_mut_ptr(), ldc) }
    }

    #[target_feature(enable = "avx2,fma")]
    unsafe fn kernel256_inner(kc: usize, ap: *const Float, bp: *const Float, ldb: usize, c: *mut Float, ldc: usize) {
        let mut acc: [[V256; 3]; 4] = [[splat256(0.0); 3]; 4];
        for r in 0..4 {
            for j in 0..3 {
                acc[r][j] = load256(c.add(r * ldc + j * W256));
            }
        }
        for p in 0..kc {
            let b = [load256(bp.add(p * ldb)), load256(bp.add(p * ldb + W256)), load256(bp.add(p * ldb + 2 * W256))];
            for r in 0..4 {
                let a = splat256(*ap.add(p * 4 + r));
                for j in 0..3 {
                    acc[r][j] = muladd256(acc[r][j], a, b[j]);
                }
            }
        }
        for r in 0..4 {
            for j in 0..3 {
                store256(c.add(r * ldc + j * W256), acc[r][j]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[Float], b: &[Float]) -> Vec<Float> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    s = madd(s, a[i * k + p], b[p * n + j]);
                }
                c[i * n + j] = s;
            }
        }
        c
    }

    #[test]
    fn packed_operand_matches_plain_product() {
        let mut rng = crate::tensor::RngState::new(5);
        for &(m, k, n) in &[(1, 3, 5), (3, 200, 37), (9, 130, 530), (70, 129, 17)] {
            let a: Vec<Float> = (0..m * k).map(|_| rng.uniform(-1.0, 1.0) as Float).collect();
            let b: Vec<Float> = (0..k * n).map(|_| rng.uniform(-1.0, 1.0) as Float).collect();
            let mut plain = vec![0.0; m * n];
            gemm_acc(m, k, n, &a, &b, &mut plain);
            let mut packed = vec![0.0; m * n];
            gemm_acc_packed(m, &a, &PackedB::new(k, n, &b), &mut packed);
            assert_eq!(plain, packed, "{m}x{k}x{n}");
            assert_eq!(plain, naive(m, k, n, &a, &b));
        }
    }

    #[test]
    fn bit_identical_to_triple_loop_across_tile_edges() {
        let mut seed = 12345u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5) as Float
        };
        for &(m, k, n) in &[(1, 1, 1), (5, 7, 3), (4, 300, 17), (9, 513, 35), (33, 20, 1030), (2, 600, 1500)] {
            let a: Vec<Float> = (0..m * k).map(|_| next()).collect();
            let b: Vec<Float> = (0..k * n).map(|_| next()).collect();
            let mut c = vec![0.0; m * n];
            gemm_acc(m, k, n, &a, &b, &mut c);
            let want = naive(m, k, n, &a, &b);
            assert!(c.iter().zip(&want).all(|(x, y)| x.to_bits() == y.to_bits()), "{m}x{k}x{n}");
        }
    }
}
