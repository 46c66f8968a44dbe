use super::{AdapterError, AdapterLayer, IncidenceIndex};
use crate::numerics::ops::{self, dot};
use crate::numerics::segment::{
    pair_dot, pair_dot_backward, segment_softmax, segment_softmax_backward, segment_weighted_sum,
    segment_weighted_sum_backward,
};
use crate::numerics::{shape_err, Matrix};

/// Intermediates of one forward pass, kept for [`adapter_backward`].
#[derive(Clone, Debug)]
pub struct ActivationTape {
    pub index: IncidenceIndex,
    pub h: Matrix,
    /// Down-projection `h·W_downᵀ + b_down`.
    pub d: Matrix,
    /// Pre-activation `d + o_prev` (or `d` without a carry).
    pub z: Matrix,
    pub x: Matrix,
    /// Token→hyperedge attention, one weight per incidence pair.
    pub alpha_ne: Vec<f64>,
    pub p: Matrix,
    pub p_prime: Matrix,
    /// Hyperedge→token attention, one weight per incidence pair.
    pub alpha_en: Vec<f64>,
    pub o: Matrix,
    pub h_out: Matrix,
    pub had_carry: bool,
}

#[derive(Clone, Debug)]
pub struct AdapterOutput {
    pub h: Matrix,
    /// Aggregated hyperedge messages per token, carried to the next layer.
    pub o: Matrix,
    pub tape: Option<ActivationTape>,
}

#[derive(Clone, Debug)]
pub struct AdapterGradients {
    pub h: Matrix,
    /// Gradient for the previous layer's `o`; `None` when there was no carry.
    pub o_prev: Option<Matrix>,
    pub params: AdapterLayer,
}

fn check_shapes(
    h: &Matrix,
    o_prev: Option<&Matrix>,
    index: &IncidenceIndex,
    params: &AdapterLayer,
) -> Result<(), AdapterError> {
    let (c, cd) = (params.hidden(), params.bottleneck());
    if h.cols() != c {
        return Err(shape_err("adapter_forward", format!("h has {} columns, hidden is {c}", h.cols())).into());
    }
    if h.rows() != index.token_count() {
        return Err(shape_err(
            "adapter_forward",
            format!("{} hidden rows for {} tokens", h.rows(), index.token_count()),
        )
        .into());
    }
    if let Some(o) = o_prev {
        if o.rows() != h.rows() {
            return Err(AdapterError::CarryMismatch {
                expected: h.rows(),
                found: o.rows(),
            });
        }
        if o.cols() != cd {
            return Err(shape_err(
                "adapter_forward",
                format!("carry has {} columns, bottleneck is {cd}", o.cols()),
            )
            .into());
        }
    }
    Ok(())
}

pub fn adapter_forward(
    h: &Matrix,
    o_prev: Option<&Matrix>,
    index: &IncidenceIndex,
    params: &AdapterLayer,
    training: bool,
) -> Result<AdapterOutput, AdapterError> {
    check_shapes(h, o_prev, index, params)?;
    let cd = params.bottleneck();
    let scale = 1.0 / (cd as f64).sqrt();

    let d = ops::linear(h, &params.w_down, params.b_down.as_slice())?;
    let z = match o_prev {
        Some(o) => ops::add(&d, o)?,
        None => d.clone(),
    };
    let x = ops::relu(&z);

    // Tokens attend into their hyperedges with a per-type query.
    let scores: Vec<f64> = (0..index.pair_count())
        .map(|k| {
            scale
                * dot(
                    params.q[index.pair_type(k).index()].as_slice(),
                    x.row(index.tokens()[k]),
                )
        })
        .collect();
    let alpha_ne = segment_softmax(&scores, index.by_edge())?;
    let p = segment_weighted_sum(&x, &alpha_ne, index.by_edge())?;

    let mut p_prime = Matrix::zeros(p.rows(), cd);
    for (e, ty) in index.edge_types().iter().enumerate() {
        let (w, b) = (&params.w_type[ty.index()], params.b_type[ty.index()].as_slice());
        for i in 0..cd {
            p_prime[(e, i)] = dot(w.row(i), p.row(e)) + b[i];
        }
    }

    // Hyperedges flow back to their tokens.
    let scores = pair_dot(&x, index.tokens(), &p_prime, index.edges(), scale)?;
    let alpha_en = segment_softmax(&scores, index.by_token())?;
    let o = segment_weighted_sum(&p_prime, &alpha_en, index.by_token())?;

    let up = ops::linear(&x, &params.w_up, params.b_up.as_slice())?;
    let mut h_out = h.clone();
    for (out, &u) in h_out.as_mut_slice().iter_mut().zip(up.as_slice()) {
        // Skipping exact zeros keeps −0.0 entries of h intact.
        if u != 0.0 {
            *out += u;
        }
    }

    let tape = training.then(|| ActivationTape {
        index: index.clone(),
        h: h.clone(),
        d,
        z,
        x,
        alpha_ne,
        p,
        p_prime,
        alpha_en,
        o: o.clone(),
        h_out: h_out.clone(),
        had_carry: o_prev.is_some(),
    });
    Ok(AdapterOutput { h: h_out, o, tape })
}

pub fn adapter_backward(
    tape: Option<&ActivationTape>,
    params: &AdapterLayer,
    grad_h_out: &Matrix,
    grad_o: &Matrix,
) -> Result<AdapterGradients, AdapterError> {
    let tape = tape.ok_or(AdapterError::MissingTape)?;
    if grad_h_out.shape() != tape.h.shape() || grad_o.shape() != tape.o.shape() {
        return Err(shape_err(
            "adapter_backward",
            format!(
                "gradients {:?}/{:?} for outputs {:?}/{:?}",
                grad_h_out.shape(),
                grad_o.shape(),
                tape.h.shape(),
                tape.o.shape()
            ),
        )
        .into());
    }
    let index = &tape.index;
    let cd = params.bottleneck();
    let scale = 1.0 / (cd as f64).sqrt();
    let mut grads = AdapterLayer::zeros(params.hidden(), cd);

    // Up-projection and residual.
    let (mut grad_x, gw_up, gb_up) = ops::linear_backward(&tape.x, &params.w_up, grad_h_out)?;
    grads.w_up = gw_up;
    grads.b_up = Matrix::row_vector(&gb_up);

    // o = Σ_e α_en · p′_e
    let (mut grad_pp, grad_alpha_en) =
        segment_weighted_sum_backward(&tape.p_prime, &tape.alpha_en, index.by_token(), grad_o);
    let grad_scores = segment_softmax_backward(&tape.alpha_en, &grad_alpha_en, index.by_token());
    let (gx, gpp) = pair_dot_backward(
        &tape.x,
        index.tokens(),
        &tape.p_prime,
        index.edges(),
        scale,
        &grad_scores,
    );
    grad_x.add_assign(&gx);
    grad_pp.add_assign(&gpp);

    // p′_e = W_ρ p_e + b_ρ
    let mut grad_p = Matrix::zeros(tape.p.rows(), cd);
    for (e, ty) in index.edge_types().iter().enumerate() {
        let t = ty.index();
        let w = &params.w_type[t];
        for i in 0..cd {
            let g = grad_pp[(e, i)];
            grads.b_type[t][(0, i)] += g;
            for j in 0..cd {
                grads.w_type[t][(i, j)] += g * tape.p[(e, j)];
                grad_p[(e, j)] += w[(i, j)] * g;
            }
        }
    }

    // p_e = Σ_n α_ne · x_n
    let (gx, grad_alpha_ne) = segment_weighted_sum_backward(&tape.x, &tape.alpha_ne, index.by_edge(), &grad_p);
    grad_x.add_assign(&gx);
    let grad_scores = segment_softmax_backward(&tape.alpha_ne, &grad_alpha_ne, index.by_edge());
    for (k, &gs) in grad_scores.iter().enumerate() {
        let (n, t) = (index.tokens()[k], index.pair_type(k).index());
        let g = gs * scale;
        for c in 0..cd {
            grads.q[t][(0, c)] += g * tape.x[(n, c)];
            grad_x[(n, c)] += g * params.q[t][(0, c)];
        }
    }

    let grad_z = ops::relu_backward(&tape.z, &grad_x);
    let (gh, gw_down, gb_down) = ops::linear_backward(&tape.h, &params.w_down, &grad_z)?;
    grads.w_down = gw_down;
    grads.b_down = Matrix::row_vector(&gb_down);
    let mut grad_h = grad_h_out.clone();
    grad_h.add_assign(&gh);

    Ok(AdapterGradients {
        h: grad_h,
        o_prev: tape.had_carry.then_some(grad_z),
        params: grads,
    })
}
