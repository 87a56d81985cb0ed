#pragma once

#include <optional>
#include <span>
#include <vector>

#include "amad/model.hpp"
#include "amad/representation.hpp"
#include "amad/tensor.hpp"

namespace amad {

/// Noisy autoencoder: the same noise sample is added before the encoder and
/// subtracted after the decoder. Pass no delta for the deterministic path
/// (inference, or the no-noise ablation). `transform` is the nonlinearity f;
/// identity is a test hook for the exact noise-cancellation setup.
inline Var autoencode(const BoundModel& m, Var instance_vec, std::optional<Var> delta,
                      double leaky_slope, Activation transform = Activation::leaky_relu) {
    Var x = activation(transform, instance_vec, leaky_slope);
    if (delta) x = add(x, *delta);
    Var enc = add(matmul(x, m[ParamId::ae_w_enc]), m[ParamId::ae_b_enc]);
    Var dec = add(matmul(activation(transform, enc, leaky_slope), m[ParamId::ae_w_dec]),
                  m[ParamId::ae_b_dec]);
    Var out = activation(transform, dec, leaky_slope);
    if (delta) out = sub(out, *delta);
    return out;
}

/// One-layer sigmoid classifiers, one per resolution.
inline Var discriminate_instance(const BoundModel& m, Var x) {
    return sigmoid(add(matmul(x, m[ParamId::disc_i_w]), m[ParamId::disc_i_b]));
}

inline Var discriminate_block(const BoundModel& m, Var x) {
    return sigmoid(add(matmul(x, m[ParamId::disc_b_w]), m[ParamId::disc_b_b]));
}

/// Resembled block chain: the representation RNN re-run over the resembled
/// instance vectors with frozen parameter copies, so gradients reach the
/// autoencoder but never the RNN weights.
inline std::vector<Var> generate_block_chain(const BoundModel& m,
                                             std::span<const Var> transformed_fakes,
                                             Var initial_state) {
    return rnn_chain(transformed_fakes, initial_state, m.rnn_w_in_frozen, m.rnn_w_rec_frozen,
                     m.rnn_b_frozen);
}

}  // namespace amad
