#pragma once

#include <span>
#include <vector>

#include "amad/model.hpp"
#include "amad/tensor.hpp"

namespace amad {

/// Additive attention pooling: scores u' * tanh(S*W + b) per row of S,
/// softmax over rows, weighted sum of the value rows.
inline Var attention_pool(Var score_input, Var values_mat, Var w, Var b, Var u) {
    Var pre = tanh(add_rowvec(matmul(score_input, w), b));  // [k x att]
    Var scores = matmul(pre, u);                            // [k x 1]
    Var weights = softmax(scores, 0);
    return matmul(transpose(weights), values_mat);          // [1 x d]
}

/// Attribute vector from its feature ids. An empty attribute carries no
/// information and maps to the zero vector.
inline Var attend_attribute(Tape& tape, const BoundModel& m, const std::vector<int>& feature_ids,
                            int embed_dim) {
    if (feature_ids.empty())
        return tape.leaf(Tensor::zeros({1, static_cast<std::size_t>(embed_dim)}), false);
    Var embedded = gather_rows(m[ParamId::embedding], feature_ids);  // [k x e]
    return attention_pool(embedded, embedded, m[ParamId::att_f_w], m[ParamId::att_f_b],
                          m[ParamId::att_f_u]);
}

/// Self channel: pool the attribute vectors against themselves.
inline Var attend_instance_self(const BoundModel& m, std::span<const Var> attr_vectors) {
    Var stacked = concat_rows(attr_vectors);  // [N^I x e]
    return attention_pool(stacked, stacked, m[ParamId::att_a_w], m[ParamId::att_a_b],
                          m[ParamId::att_a_u]);
}

/// Relative channel: scores compare each (leaky-relu transformed) attribute
/// with the previous block's memory vector; the pooled values stay the raw
/// attribute vectors.
inline Var attend_instance_relative(const BoundModel& m, std::span<const Var> attr_vectors,
                                    Var memory, double leaky_slope) {
    std::vector<Var> score_rows;
    score_rows.reserve(attr_vectors.size());
    for (Var a : attr_vectors)
        score_rows.push_back(concat_cols({leaky_relu(a, leaky_slope), memory}));
    Var score_input = concat_rows(score_rows);   // [N^I x (e+h)]
    Var values = concat_rows(attr_vectors);      // [N^I x e]
    return attention_pool(score_input, values, m[ParamId::att_r_w], m[ParamId::att_r_b],
                          m[ParamId::att_r_u]);
}

/// Final instance vectors for a whole block: concatenate the channels per
/// instance, then batch-normalize with the block as the batch.
inline std::vector<Var> assemble_instance_vectors(std::span<const Var> pre_vectors,
                                                  double bn_epsilon) {
    Var stacked = concat_rows(pre_vectors);      // [N^B x d]
    Var normed = batch_norm(stacked, bn_epsilon);
    std::vector<Var> out;
    out.reserve(pre_vectors.size());
    for (std::size_t i = 0; i < pre_vectors.size(); ++i) out.push_back(row(normed, i));
    return out;
}

/// Plain tanh RNN over already-transformed inputs; returns every hidden state.
/// The last one is the block vector.
inline std::vector<Var> rnn_chain(std::span<const Var> inputs, Var initial_state, Var w_in,
                                  Var w_rec, Var b) {
    std::vector<Var> states;
    states.reserve(inputs.size());
    Var h = initial_state;
    for (Var x : inputs) {
        h = tanh(add(add(matmul(x, w_in), matmul(h, w_rec)), b));
        states.push_back(h);
    }
    return states;
}

}  // namespace amad
