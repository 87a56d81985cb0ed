#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "amad/config.hpp"
#include "amad/random.hpp"
#include "amad/tensor.hpp"

namespace amad {

// ---------------------------------------------------------------------------
// All trainable weights, indexed by a fixed slot order that also fixes the
// initialization draw order and the checkpoint layout. Weight matrices are
// stored [in x out] and applied to row vectors as x*W.
// ---------------------------------------------------------------------------

enum class ParamId : std::size_t {
    embedding,
    att_f_w, att_f_b, att_f_u,
    att_a_w, att_a_b, att_a_u,
    att_r_w, att_r_b, att_r_u,
    rnn_w_in, rnn_w_rec, rnn_b,
    ae_w_enc, ae_b_enc, ae_w_dec, ae_b_dec,
    disc_i_w, disc_i_b,
    disc_b_w, disc_b_b,
    count
};

constexpr std::size_t kParamCount = static_cast<std::size_t>(ParamId::count);

inline const char* param_name(ParamId id) {
    static constexpr const char* names[kParamCount] = {
        "embedding",
        "att_f_w", "att_f_b", "att_f_u",
        "att_a_w", "att_a_b", "att_a_u",
        "att_r_w", "att_r_b", "att_r_u",
        "rnn_w_in", "rnn_w_rec", "rnn_b",
        "ae_w_enc", "ae_b_enc", "ae_w_dec", "ae_b_dec",
        "disc_i_w", "disc_i_b",
        "disc_b_w", "disc_b_b",
    };
    return names[static_cast<std::size_t>(id)];
}

/// Discriminator heads are the only non-generator parameters.
inline bool param_is_generator(ParamId id) {
    switch (id) {
        case ParamId::disc_i_w:
        case ParamId::disc_i_b:
        case ParamId::disc_b_w:
        case ParamId::disc_b_b: return false;
        default: return true;
    }
}

inline bool param_is_bias(ParamId id) {
    switch (id) {
        case ParamId::att_f_b:
        case ParamId::att_a_b:
        case ParamId::att_r_b:
        case ParamId::rnn_b:
        case ParamId::ae_b_enc:
        case ParamId::ae_b_dec:
        case ParamId::disc_i_b:
        case ParamId::disc_b_b: return true;
        default: return false;
    }
}

struct Model {
    int dimension = 0;     // vocabulary size
    int embed_dim = 0;
    int hidden = 0;
    int instance_dim = 0;  // 2*embed_dim, or embed_dim without the relative channel
    int encoder_dim = 0;
    bool no_relrep = false;

    std::array<Tensor, kParamCount> values;
    std::array<Tensor, kParamCount> acc;  // RMSProp accumulators, same shapes

    Tensor& value(ParamId id) { return values[static_cast<std::size_t>(id)]; }
    const Tensor& value(ParamId id) const { return values[static_cast<std::size_t>(id)]; }
    Tensor& accumulator(ParamId id) { return acc[static_cast<std::size_t>(id)]; }

    bool has(ParamId id) const { return value(id).numel() > 0; }

    /// Weights ~ uniform(-init_scale, init_scale), biases zero. The relative
    /// attention slots stay empty when the channel is disabled.
    static Model init(int dimension, const TrainConfig& cfg, RngStream rng) {
        if (dimension < 1) throw ConfigError("model: dimension must be >= 1");
        Model m;
        m.dimension = dimension;
        m.embed_dim = cfg.embed_dim;
        m.hidden = cfg.hidden;
        m.instance_dim = cfg.instance_dim();
        m.encoder_dim = cfg.encoder_dim();
        m.no_relrep = cfg.no_relrep;

        const std::size_t dim = static_cast<std::size_t>(dimension);
        const std::size_t e = static_cast<std::size_t>(m.embed_dim);
        const std::size_t h = static_cast<std::size_t>(m.hidden);
        const std::size_t d = static_cast<std::size_t>(m.instance_dim);
        const std::size_t dh = static_cast<std::size_t>(m.encoder_dim);

        auto shape_of = [&](ParamId id) -> std::vector<std::size_t> {
            switch (id) {
                case ParamId::embedding: return {dim, e};
                case ParamId::att_f_w: return {e, e};
                case ParamId::att_f_b: return {1, e};
                case ParamId::att_f_u: return {e, 1};
                case ParamId::att_a_w: return {e, e};
                case ParamId::att_a_b: return {1, e};
                case ParamId::att_a_u: return {e, 1};
                case ParamId::att_r_w: return m.no_relrep ? std::vector<std::size_t>{}
                                                          : std::vector<std::size_t>{e + h, e};
                case ParamId::att_r_b: return m.no_relrep ? std::vector<std::size_t>{}
                                                          : std::vector<std::size_t>{1, e};
                case ParamId::att_r_u: return m.no_relrep ? std::vector<std::size_t>{}
                                                          : std::vector<std::size_t>{e, 1};
                case ParamId::rnn_w_in: return {d, h};
                case ParamId::rnn_w_rec: return {h, h};
                case ParamId::rnn_b: return {1, h};
                case ParamId::ae_w_enc: return {d, dh};
                case ParamId::ae_b_enc: return {1, dh};
                case ParamId::ae_w_dec: return {dh, d};
                case ParamId::ae_b_dec: return {1, d};
                case ParamId::disc_i_w: return {d, 1};
                case ParamId::disc_i_b: return {1, 1};
                case ParamId::disc_b_w: return {h, 1};
                case ParamId::disc_b_b: return {1, 1};
                case ParamId::count: break;
            }
            return {};
        };

        for (std::size_t i = 0; i < kParamCount; ++i) {
            const ParamId id = static_cast<ParamId>(i);
            auto shape = shape_of(id);
            if (shape.empty()) continue;
            Tensor t = Tensor::zeros(shape);
            if (!param_is_bias(id)) {
                double scale = cfg.init_scale;
                if (cfg.init_scheme == "glorot" && id != ParamId::embedding)
                    scale = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
                t.fill_uniform(rng, -scale, scale);
            }
            if (id == ParamId::rnn_w_rec && cfg.rnn_rec_gain != 0.0)
                for (std::size_t j = 0; j < h; ++j) t.at(j, j) += cfg.rnn_rec_gain;
            t.requires_grad = true;
            m.values[i] = std::move(t);
            m.acc[i] = Tensor::zeros(shape);
        }
        return m;
    }
};

// ---------------------------------------------------------------------------
// A model bound onto a tape for one forward/backward pass. The frozen RNN
// slots are value copies with gradients stopped, used by the block generator.
// ---------------------------------------------------------------------------

struct BoundModel {
    std::array<Var, kParamCount> p{};
    Var rnn_w_in_frozen, rnn_w_rec_frozen, rnn_b_frozen;

    Var operator[](ParamId id) const { return p[static_cast<std::size_t>(id)]; }
};

inline BoundModel bind(Tape& tape, const Model& m, bool trainable) {
    BoundModel b;
    for (std::size_t i = 0; i < kParamCount; ++i) {
        if (m.values[i].numel() == 0) continue;
        b.p[i] = tape.leaf(m.values[i], trainable);
    }
    b.rnn_w_in_frozen = tape.leaf(m.value(ParamId::rnn_w_in), false);
    b.rnn_w_rec_frozen = tape.leaf(m.value(ParamId::rnn_w_rec), false);
    b.rnn_b_frozen = tape.leaf(m.value(ParamId::rnn_b), false);
    return b;
}

}  // namespace amad
