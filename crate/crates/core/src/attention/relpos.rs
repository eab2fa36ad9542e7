use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelAxis {
    Height,
    Width,
}

/// Learned per-head offset embeddings, one table per spatial axis.
///
/// Each table is `[heads, 2R - 1, d]`; row `R - 1` is offset zero. With
/// `R = reduced_size` every offset between a (mapped) query coordinate and a
/// key coordinate on the `R`-clamped grid has its own row.
#[derive(Clone, Debug)]
pub struct RelativePositionTable {
    pub r_h: Tensor,
    pub r_w: Tensor,
}

impl RelativePositionTable {
    pub fn zeros(heads: usize, reduced_size: usize, head_dim: usize) -> Result<Self> {
        let shape = [heads, 2 * reduced_size - 1, head_dim];
        let n = shape.iter().product();
        Ok(RelativePositionTable {
            r_h: Tensor::param(vec![0.0; n], &shape)?,
            r_w: Tensor::param(vec![0.0; n], &shape)?,
        })
    }

    pub fn random(heads: usize, reduced_size: usize, head_dim: usize, std: f64, rng: &mut SplitMix64) -> Result<Self> {
        let shape = [heads, 2 * reduced_size - 1, head_dim];
        let n: usize = shape.iter().product();
        let mut draw = || (0..n).map(|_| std * rng.normal()).collect::<Vec<_>>();
        Ok(RelativePositionTable { r_h: Tensor::param(draw(), &shape)?, r_w: Tensor::param(draw(), &shape)? })
    }
}

/// Key-grid coordinate a query coordinate maps to along one axis:
/// `floor(i * key_extent / query_extent)`.
pub fn query_to_key_coord(i: usize, query_extent: usize, key_extent: usize) -> usize {
    i * key_extent / query_extent
}

/// Compact relative-position scores along one axis.
///
/// `q: [G, d, n]` with `n = qh * qw` and `G` a multiple of the table's head
/// count (group `g` uses head `g % heads`). Returns `[G, n, e]`, `e` the key
/// grid extent along `axis`, with entry `(i, a) = q_i . r[a - c'_i + R - 1]`
/// where `c'_i` is query `i`'s coordinate mapped onto the key grid. Every
/// key in row/column `a` of the key grid shares this score.
pub fn relative_axis_scores(
    q: &Tensor,
    table: &Tensor,
    q_grid: (usize, usize),
    k_grid: (usize, usize),
    axis: RelAxis,
) -> Result<Tensor> {
    const OP: &str = "relative_logits";
    let (g, d, n) = match q.shape() {
        &[g, d, n] => (g, d, n),
        s => return Err(Error::dim(OP, format!("queries must be [G, d, n], got {s:?}"))),
    };
    let (heads, len) = match table.shape() {
        &[h, l, td] if td == d && l % 2 == 1 && h > 0 => (h, l),
        s => return Err(Error::dim(OP, format!("table {s:?} incompatible with head dim {d}"))),
    };
    if g % heads != 0 {
        return Err(Error::dim(OP, format!("{g} groups not a multiple of {heads} heads")));
    }
    let (qh, qw) = q_grid;
    if qh * qw != n {
        return Err(Error::dim(OP, format!("query grid {qh}x{qw} does not hold {n} positions")));
    }
    let r = len.div_ceil(2);
    let (q_ext, k_ext) = match axis {
        RelAxis::Height => (qh, k_grid.0),
        RelAxis::Width => (qw, k_grid.1),
    };
    if k_ext > r || k_ext > q_ext || k_ext == 0 {
        return Err(Error::index(OP, format!("key extent {k_ext} outside table range {r} or query extent {q_ext}")));
    }
    // first table row used by query i
    let base = move |i: usize| {
        let c = match axis {
            RelAxis::Height => i / qw,
            RelAxis::Width => i % qw,
        };
        r - 1 - query_to_key_coord(c, q_ext, k_ext)
    };

    let qd = q.data();
    let td = table.data();
    let mut out = vec![0.0; g * n * k_ext];
    let mut qi = vec![0.0; d];
    for gi in 0..g {
        let head = gi % heads;
        let qg = &qd[gi * d * n..(gi + 1) * d * n];
        for i in 0..n {
            qi.iter_mut().enumerate().for_each(|(c, v)| *v = qg[c * n + i]);
            let rows = &td[(head * len + base(i)) * d..][..k_ext * d];
            for (o, row) in out[(gi * n + i) * k_ext..][..k_ext].iter_mut().zip(rows.chunks(d)) {
                *o = row.iter().zip(&qi).map(|(a, b)| a * b).sum();
            }
        }
    }

    Tensor::from_op(OP, out, vec![g, n, k_ext], &[q, table], move |ctx| {
        let qd = ctx.inputs[0].data();
        let td = ctx.inputs[1].data();
        let mut dq = vec![0.0; g * d * n];
        let mut dtab = vec![0.0; heads * len * d];
        for gi in 0..g {
            let head = gi % heads;
            for i in 0..n {
                let b = base(i);
                for (a, &gv) in ctx.grad[(gi * n + i) * k_ext..][..k_ext].iter().enumerate() {
                    let o = (head * len + b + a) * d;
                    for c in 0..d {
                        dq[(gi * d + c) * n + i] += gv * td[o + c];
                        dtab[o + c] += gv * qd[(gi * d + c) * n + i];
                    }
                }
            }
        }
        vec![Some(dq), Some(dtab)]
    })
}

/// Broadcasts compact scores `[G, n, e]` over the `kh x kw` key grid to a
/// dense `[G, n, kh * kw]` logit matrix.
pub fn expand_axis_scores(t: &Tensor, k_grid: (usize, usize), axis: RelAxis) -> Result<Tensor> {
    let (kh, kw) = k_grid;
    let e = match axis {
        RelAxis::Height => kh,
        RelAxis::Width => kw,
    };
    let (g, n) = match t.shape() {
        &[g, n, te] if te == e => (g, n),
        s => return Err(Error::dim("expand_axis_scores", format!("{s:?} vs key grid {kh}x{kw}"))),
    };
    let m = kh * kw;
    let coord = move |j: usize| match axis {
        RelAxis::Height => j / kw,
        RelAxis::Width => j % kw,
    };
    let td = t.data();
    let mut out = vec![0.0; g * n * m];
    for (row, o) in out.chunks_mut(m).enumerate() {
        let src = &td[row * e..(row + 1) * e];
        for (j, v) in o.iter_mut().enumerate() {
            *v = src[coord(j)];
        }
    }
    Tensor::from_op("expand_axis_scores", out, vec![g, n, m], &[t], move |ctx| {
        let mut dt = vec![0.0; g * n * e];
        for (row, gr) in ctx.grad.chunks(m).enumerate() {
            for (j, &gv) in gr.iter().enumerate() {
                dt[row * e + coord(j)] += gv;
            }
        }
        vec![Some(dt)]
    })
}

/// Dense relative-position logits along one axis: `[G, n, kh * kw]` with
/// entry `(i, j) = q_i . r[c_j - c'_i + R - 1]`, `c_j` being key `j`'s
/// coordinate along `axis`.
pub fn relative_logits_axis(
    q: &Tensor,
    table: &Tensor,
    q_grid: (usize, usize),
    k_grid: (usize, usize),
    axis: RelAxis,
) -> Result<Tensor> {
    expand_axis_scores(&relative_axis_scores(q, table, q_grid, k_grid, axis)?, k_grid, axis)
}

/// Dense `(S_H, S_W)`, each `[G, n, kh * kw]`.
pub fn relative_logits(
    q: &Tensor,
    table: &RelativePositionTable,
    q_grid: (usize, usize),
    k_grid: (usize, usize),
) -> Result<(Tensor, Tensor)> {
    Ok((
        relative_logits_axis(q, &table.r_h, q_grid, k_grid, RelAxis::Height)?,
        relative_logits_axis(q, &table.r_w, q_grid, k_grid, RelAxis::Width)?,
    ))
}
