//! Matrix products over GF(p) on packed words.
//!
//! Four ways of placing the packing:
//!
//! * common: rows of `A` reversed and columns of `B` forward, both grouped
//!   along `k`; each output entry is the degree-`d` digit of a sum of word
//!   products, reduced once at the end;
//! * right: `B` packed along `n`; plain residues of `A` scale whole words and
//!   a REDQ pass reduces every digit of the result;
//! * left: the mirror image, `A` packed along `m`;
//! * full: `A` along `m` in base `Q` and `B` along `n` in base
//!   `Theta = Q^(dq+1)`, so one word product yields a `(dq+1) x (dtheta+1)`
//!   tile of the result.
//!
//! Every phase is exposed separately (packing, word products, extraction or
//! REDQ) so conversions can be timed apart from arithmetic.

use crate::error::{shape, Error, Result};
use crate::field::{addmul, PrimeModulus, Residue};
use crate::matrix::{CompressedMatrix, ResidueMatrix};
use crate::pack::{horner, pack_forward_groups, redq_raw, Axis, Direction, PackedWord};
use crate::plan::{CompressionPlan, FullPlan};
use crate::word::Word;

/// Rows of the packed common dimension processed per cache block.
const K_BLOCK: usize = 128;
/// Output columns processed per cache block.
const N_BLOCK: usize = 512;

fn mismatch(left: (usize, usize), right: (usize, usize)) -> Error {
    Error::DimensionMismatch {
        left: shape(left.0, left.1),
        right: shape(right.0, right.1),
    }
}

fn check_backend<W: Word>(beta: u32) -> Result<()> {
    if beta > W::MAX_BETA {
        return Err(Error::PlanMismatch(format!(
            "beta={beta} exceeds the {} bits the {} backend holds exactly",
            W::MAX_BETA,
            W::NAME
        )));
    }
    Ok(())
}

fn check_k(k: usize, plan: &CompressionPlan) -> Result<()> {
    if k as u64 > plan.kmax() {
        return Err(Error::PlanMismatch(format!(
            "common dimension {k} exceeds kmax={} for Q=2^{} (use panel blocking)",
            plan.kmax(),
            plan.t()
        )));
    }
    Ok(())
}

/// Classical triple loop with a reduction after every product.
pub fn naive_gemm(a: &ResidueMatrix, b: &ResidueMatrix, m: PrimeModulus) -> Result<ResidueMatrix> {
    if a.cols() != b.rows() {
        return Err(mismatch(a.shape(), b.shape()));
    }
    let n = b.cols();
    let mut c = vec![Residue::default(); a.rows() * n];
    for i in 0..a.rows() {
        let out = &mut c[i * n..(i + 1) * n];
        for (l, &x) in a.row(i).iter().enumerate() {
            let x = Residue::new(x, m)?;
            for (cj, &y) in out.iter_mut().zip(b.row(l)) {
                *cj = addmul(*cj, x, Residue::new(y, m)?, m);
            }
        }
    }
    Ok(ResidueMatrix::from_raw(
        a.rows(),
        n,
        c.into_iter().map(Residue::value).collect(),
    ))
}

/// `CA`: each row of `A` split into groups of `e` along `k`, each group
/// packed reversed. The last group is zero-padded.
pub fn compress_rows_reversed<W: Word>(a: &ResidueMatrix, plan: &CompressionPlan) -> Result<CompressedMatrix<W>> {
    check_backend::<W>(plan.beta())?;
    check_k(a.cols(), plan)?;
    Ok(CompressedMatrix::pack(a, plan, Axis::Row, Direction::Reversed))
}

/// `CB`: each column of `B` split into groups of `e` down the rows, each
/// group packed forward. Also the left operand layout of
/// [`mul_left_compressed`].
pub fn compress_cols_forward<W: Word>(b: &ResidueMatrix, plan: &CompressionPlan) -> Result<CompressedMatrix<W>> {
    check_backend::<W>(plan.beta())?;
    Ok(CompressedMatrix::pack(b, plan, Axis::Column, Direction::Forward))
}

/// Each row of `B` packed forward along `n`: the right operand of
/// [`mul_right_compressed`].
pub fn compress_rows_forward<W: Word>(b: &ResidueMatrix, plan: &CompressionPlan) -> Result<CompressedMatrix<W>> {
    check_backend::<W>(plan.beta())?;
    Ok(CompressedMatrix::pack(b, plan, Axis::Row, Direction::Forward))
}

fn require_orientation<W: Word>(c: &CompressedMatrix<W>, axis: Axis, direction: Direction, what: &str) -> Result<()> {
    let o = c.orientation();
    if o.axis != axis || o.direction != direction {
        return Err(Error::PlanMismatch(format!(
            "{what} must be packed {direction:?} along {axis:?}, got {:?} along {:?}",
            o.direction, o.axis
        )));
    }
    Ok(())
}

fn same_packing(a: &CompressionPlan, b: &CompressionPlan) -> Result<()> {
    if a.t() != b.t() || a.e() != b.e() || a.p() != b.p() {
        return Err(Error::PlanMismatch(format!("operands packed under different plans: {a} vs {b}")));
    }
    Ok(())
}

/// Unreduced sums of word products, one per output entry.
#[derive(Debug, Clone)]
pub struct AccMatrix<W: Word> {
    rows: usize,
    cols: usize,
    data: Vec<W::Acc>,
}

impl<W: Word> AccMatrix<W> {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[W::Acc] {
        &self.data
    }
}

/// `CA x CB` with delayed reduction: no modular step inside the loop.
pub fn common_products<W: Word>(ca: &CompressedMatrix<W>, cb: &CompressedMatrix<W>) -> Result<AccMatrix<W>> {
    require_orientation(ca, Axis::Row, Direction::Reversed, "left operand")?;
    require_orientation(cb, Axis::Column, Direction::Forward, "right operand")?;
    same_packing(ca.plan(), cb.plan())?;
    if ca.logical_shape().1 != cb.logical_shape().0 {
        return Err(mismatch(ca.logical_shape(), cb.logical_shape()));
    }
    check_k(ca.logical_shape().1, ca.plan())?;

    let (m, g) = ca.stored_shape();
    let n = cb.stored_shape().1;
    let mut acc = vec![W::Acc::default(); m * n];
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("fma") && std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the required features were detected at run time.
        unsafe { product_kernel_fma(ca.data(), cb.data(), (m, g, n), &mut acc) };
        return Ok(AccMatrix { rows: m, cols: n, data: acc });
    }
    product_kernel(ca.data(), cb.data(), (m, g, n), &mut acc);
    Ok(AccMatrix { rows: m, cols: n, data: acc })
}

/// Without a hardware fma, `f64::mul_add` is a library call; this copy of
/// the kernel lets it lower to a single instruction.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "fma,avx2")]
unsafe fn product_kernel_fma<W: Word>(
    a: &[PackedWord<W>],
    b: &[PackedWord<W>],
    dims: (usize, usize, usize),
    acc: &mut [W::Acc],
) {
    product_kernel(a, b, dims, acc)
}

#[inline(always)]
fn product_kernel<W: Word>(a: &[PackedWord<W>], b: &[PackedWord<W>], (m, g, n): (usize, usize, usize), acc: &mut [W::Acc]) {
    for l0 in (0..g).step_by(K_BLOCK) {
        let l1 = (l0 + K_BLOCK).min(g);
        for j0 in (0..n).step_by(N_BLOCK) {
            let j1 = (j0 + N_BLOCK).min(n);
            for i in 0..m {
                let out = &mut acc[i * n + j0..i * n + j1];
                for l in l0..l1 {
                    let x = a[i * g + l].value();
                    for (cj, y) in out.iter_mut().zip(&b[l * n + j0..l * n + j1]) {
                        W::acc_add_product(cj, x, y.value());
                    }
                }
            }
        }
    }
}

/// One degree-`d` extraction and one scalar reduction per entry.
pub fn extract_common<W: Word>(acc: &AccMatrix<W>, plan: &CompressionPlan) -> ResidueMatrix {
    let p = plan.p() as u64;
    let data = acc
        .data
        .iter()
        .map(|x| (W::acc_digit(x, plan) % p) as u32)
        .collect();
    ResidueMatrix::from_raw(acc.rows, acc.cols, data)
}

/// `C = A x B` through `CA = CompressRows(A)` and `CB = CompressColumns(B)`.
pub fn mul_common_compressed<W: Word>(a: &ResidueMatrix, b: &ResidueMatrix, plan: &CompressionPlan) -> Result<ResidueMatrix> {
    if a.cols() != b.rows() {
        return Err(mismatch(a.shape(), b.shape()));
    }
    let ca = compress_rows_reversed::<W>(a, plan)?;
    let cb = compress_cols_forward::<W>(b, plan)?;
    mul_common_precompressed(&ca, &cb)
}

/// Product of operands the caller already packed.
pub fn mul_common_precompressed<W: Word>(ca: &CompressedMatrix<W>, cb: &CompressedMatrix<W>) -> Result<ResidueMatrix> {
    let acc = common_products(ca, cb)?;
    Ok(extract_common(&acc, ca.plan()))
}

/// `CC = ReduceAndCompress(CA x CB)`: the result comes back packed forward
/// along its rows.
pub fn mul_common_compressed_repacked<W: Word>(
    a: &ResidueMatrix,
    b: &ResidueMatrix,
    plan: &CompressionPlan,
) -> Result<CompressedMatrix<W>> {
    let c = mul_common_compressed::<W>(a, b, plan)?;
    let mut data = Vec::with_capacity(c.rows() * c.cols().div_ceil(plan.e() as usize));
    for i in 0..c.rows() {
        data.extend(pack_forward_groups::<W>(c.row(i), plan));
    }
    Ok(CompressedMatrix {
        logical_rows: c.rows(),
        logical_cols: c.cols(),
        stored_rows: c.rows(),
        stored_cols: c.cols().div_ceil(plan.e() as usize),
        orientation: crate::pack::PackOrientation {
            direction: Direction::Forward,
            axis: Axis::Row,
            slots: plan.e() as usize,
        },
        plan: *plan,
        data,
    })
}

/// Applies REDQ to every word in place.
pub fn redq_matrix<W: Word>(c: &mut CompressedMatrix<W>) {
    let t = c.plan.t();
    let p = c.plan.p();
    let e = c.orientation.slots;
    for w in &mut c.data {
        *w = PackedWord::from_u64(redq_raw(w.to_u64(), t, e, p));
    }
}

/// `A x CB` with `CB` packed forward along `n`, before REDQ.
pub fn right_products<W: Word>(a: &ResidueMatrix, cb: &CompressedMatrix<W>) -> Result<CompressedMatrix<W>> {
    require_orientation(cb, Axis::Row, Direction::Forward, "right operand")?;
    check_backend::<W>(cb.plan().beta())?;
    if a.cols() != cb.logical_shape().0 {
        return Err(mismatch(a.shape(), cb.logical_shape()));
    }
    check_k(a.cols(), cb.plan())?;
    let (k, hn) = cb.stored_shape();
    let m = a.rows();
    let mut out = vec![W::default(); m * hn];
    let b = cb.data();
    for i in 0..m {
        let row = &mut out[i * hn..(i + 1) * hn];
        for (l, &x) in a.row(i).iter().enumerate() {
            if x == 0 {
                continue;
            }
            let x = W::from_u64(x as u64);
            for (cj, y) in row.iter_mut().zip(&b[l * hn..(l + 1) * hn]) {
                *cj = cj.mul_add(x, y.value());
            }
        }
    }
    debug_assert_eq!(k, a.cols());
    Ok(CompressedMatrix {
        logical_rows: m,
        logical_cols: cb.logical_shape().1,
        stored_rows: m,
        stored_cols: hn,
        orientation: cb.orientation(),
        plan: *cb.plan(),
        data: out.into_iter().map(PackedWord::new).collect(),
    })
}

/// `CC = A x CB; REDQ(CC)`. Digit `j` of entry `(i, h)` is `C[i][h e + j]`.
pub fn mul_right_compressed<W: Word>(a: &ResidueMatrix, cb: &CompressedMatrix<W>) -> Result<CompressedMatrix<W>> {
    let mut c = right_products(a, cb)?;
    redq_matrix(&mut c);
    Ok(c)
}

/// `A = Uncompress(CA); CC = A x CB; REDQ(CC)`.
pub fn mul_right_from_compressed<W: Word>(
    ca: &CompressedMatrix<W>,
    cb: &CompressedMatrix<W>,
) -> Result<CompressedMatrix<W>> {
    let a = ca.unpack()?;
    mul_right_compressed(&a, cb)
}

/// `CA x B` with `CA` packed forward along `m`, before REDQ.
pub fn left_products<W: Word>(ca: &CompressedMatrix<W>, b: &ResidueMatrix) -> Result<CompressedMatrix<W>> {
    require_orientation(ca, Axis::Column, Direction::Forward, "left operand")?;
    check_backend::<W>(ca.plan().beta())?;
    if ca.logical_shape().1 != b.rows() {
        return Err(mismatch(ca.logical_shape(), b.shape()));
    }
    check_k(b.rows(), ca.plan())?;
    let (gm, k) = ca.stored_shape();
    let n = b.cols();
    let mut out = vec![W::default(); gm * n];
    let a = ca.data();
    for g in 0..gm {
        let row = &mut out[g * n..(g + 1) * n];
        for l in 0..k {
            let x = a[g * k + l].value();
            for (cj, &y) in row.iter_mut().zip(b.row(l)) {
                *cj = cj.mul_add(x, W::from_u64(y as u64));
            }
        }
    }
    Ok(CompressedMatrix {
        logical_rows: ca.logical_shape().0,
        logical_cols: n,
        stored_rows: gm,
        stored_cols: n,
        orientation: ca.orientation(),
        plan: *ca.plan(),
        data: out.into_iter().map(PackedWord::new).collect(),
    })
}

/// `CC = CA x B; REDQ(CC)`. Digit `i` of entry `(g, j)` is `C[g e + i][j]`.
pub fn mul_left_compressed<W: Word>(ca: &CompressedMatrix<W>, b: &ResidueMatrix) -> Result<CompressedMatrix<W>> {
    let mut c = left_products(ca, b)?;
    redq_matrix(&mut c);
    Ok(c)
}

/// Operands packed for two-variable compression.
#[derive(Debug, Clone)]
pub struct FullOperands<W: Word> {
    plan: FullPlan,
    m: usize,
    k: usize,
    n: usize,
    /// `ceil(m/(dq+1)) x k`, base `Q`.
    a: Vec<W>,
    /// `k x ceil(n/(dtheta+1))`, base `Theta`.
    b: Vec<W>,
}

/// Unreduced product words of the full algorithm.
#[derive(Debug, Clone)]
pub struct FullWords<W: Word> {
    pub plan: FullPlan,
    pub m: usize,
    pub n: usize,
    /// `ceil(m/(dq+1)) x ceil(n/(dtheta+1))`, row-major.
    pub rows: usize,
    pub cols: usize,
    pub words: Vec<PackedWord<W>>,
}

impl<W: Word> FullOperands<W> {
    pub fn pack(a: &ResidueMatrix, b: &ResidueMatrix, plan: &FullPlan) -> Result<Self> {
        check_backend::<W>(plan.beta())?;
        if a.cols() != b.rows() {
            return Err(mismatch(a.shape(), b.shape()));
        }
        let (m, k, n) = (a.rows(), a.cols(), b.cols());
        if k as u64 > plan.kmax() {
            return Err(Error::PlanMismatch(format!(
                "common dimension {k} exceeds kmax={} for Q=2^{}",
                plan.kmax(),
                plan.t()
            )));
        }
        let qs = plan.q_slots() as usize;
        let ts = plan.theta_slots() as usize;
        let gm = m.div_ceil(qs);
        let hn = n.div_ceil(ts);
        let mut pa = Vec::with_capacity(gm * k);
        for g in 0..gm {
            let rows = g * qs..((g + 1) * qs).min(m);
            for l in 0..k {
                pa.push(horner(rows.clone().map(|r| a.get(r, l)), plan.t()));
            }
        }
        let mut pb = Vec::with_capacity(k * hn);
        for l in 0..k {
            let row = b.row(l);
            for h in 0..hn {
                let cols = &row[h * ts..((h + 1) * ts).min(n)];
                pb.push(horner(cols.iter().copied(), plan.theta_exponent()));
            }
        }
        Ok(Self { plan: *plan, m, k, n, a: pa, b: pb })
    }

    /// Word products; every value stays below `Q^((dq+1)(dtheta+1))`.
    pub fn multiply(&self) -> FullWords<W> {
        let gm = self.m.div_ceil(self.plan.q_slots() as usize);
        let hn = self.n.div_ceil(self.plan.theta_slots() as usize);
        let k = self.k;
        let mut out = vec![W::default(); gm * hn];
        for g in 0..gm {
            let row = &mut out[g * hn..(g + 1) * hn];
            for l in 0..k {
                let x = self.a[g * k + l];
                for (cj, &y) in row.iter_mut().zip(&self.b[l * hn..(l + 1) * hn]) {
                    *cj = cj.mul_add(x, y);
                }
            }
        }
        FullWords {
            plan: self.plan,
            m: self.m,
            n: self.n,
            rows: gm,
            cols: hn,
            words: out.into_iter().map(PackedWord::new).collect(),
        }
    }
}

impl<W: Word> FullWords<W> {
    /// REDQ over all `(dq+1)(dtheta+1)` digits, then scatter digit
    /// `(i, j)` of word `(g, h)` to `C[g(dq+1)+i][h(dtheta+1)+j]`.
    pub fn reduce_unpack(&self) -> ResidueMatrix {
        let plan = &self.plan;
        let t = plan.t();
        let qs = plan.q_slots() as usize;
        let ts = plan.theta_slots() as usize;
        let digits = plan.digits() as usize;
        let mask = (1u64 << t) - 1;
        let mut c = ResidueMatrix::zeros(self.m, self.n);
        for g in 0..self.rows {
            for h in 0..self.cols {
                let x = redq_raw(self.words[g * self.cols + h].to_u64(), t, digits, plan.p());
                for j in 0..ts {
                    let col = h * ts + j;
                    if col >= self.n {
                        break;
                    }
                    for i in 0..qs {
                        let row = g * qs + i;
                        if row >= self.m {
                            break;
                        }
                        let shift = t as usize * (i + j * qs);
                        c.set(row, col, ((x >> shift) & mask) as u32);
                    }
                }
            }
        }
        c
    }
}

/// Full compression end to end; returns the uncompressed `m x n` result.
pub fn mul_full_compressed<W: Word>(a: &ResidueMatrix, b: &ResidueMatrix, plan: &FullPlan) -> Result<ResidueMatrix> {
    let ops = FullOperands::<W>::pack(a, b, plan)?;
    Ok(ops.multiply().reduce_unpack())
}

fn column_slice(a: &ResidueMatrix, lo: usize, hi: usize) -> ResidueMatrix {
    let w = hi - lo;
    let mut data = Vec::with_capacity(a.rows() * w);
    for r in 0..a.rows() {
        data.extend_from_slice(&a.row(r)[lo..hi]);
    }
    ResidueMatrix::from_raw(a.rows(), w, data)
}

fn row_slice(b: &ResidueMatrix, lo: usize, hi: usize) -> ResidueMatrix {
    let n = b.cols();
    ResidueMatrix::from_raw(hi - lo, n, b.data()[lo * n..hi * n].to_vec())
}

/// Splits `k` into panels of at most `kpanel`, multiplies each with the
/// common algorithm and adds the reduced panel results mod `p`.
pub fn blocked_accumulate<W: Word>(
    a: &ResidueMatrix,
    b: &ResidueMatrix,
    plan: &CompressionPlan,
    kpanel: usize,
) -> Result<ResidueMatrix> {
    if a.cols() != b.rows() {
        return Err(mismatch(a.shape(), b.shape()));
    }
    if kpanel == 0 {
        return Err(Error::InvalidArgument("panel length must be at least 1".into()));
    }
    check_k(kpanel, plan)?;
    let k = a.cols();
    if k <= kpanel {
        return mul_common_compressed::<W>(a, b, plan);
    }
    let p = plan.p();
    let mut c = ResidueMatrix::zeros(a.rows(), b.cols());
    for lo in (0..k).step_by(kpanel) {
        let hi = (lo + kpanel).min(k);
        let part = mul_common_compressed::<W>(&column_slice(a, lo, hi), &row_slice(b, lo, hi), plan)?;
        for i in 0..c.rows() {
            for j in 0..c.cols() {
                let s = c.get(i, j) + part.get(i, j);
                c.set(i, j, if s >= p { s - p } else { s });
            }
        }
    }
    Ok(c)
}
