#pragma once

#include <optional>
#include <vector>

#include "amad/adversarial.hpp"
#include "amad/config.hpp"
#include "amad/data.hpp"
#include "amad/model.hpp"
#include "amad/representation.hpp"
#include "amad/tensor.hpp"

namespace amad {

struct BlockForwardOptions {
    bool noise = false;                            // draw a fresh delta per instance
    RngStream* noise_rng = nullptr;                // required when noise is set
    const std::vector<Tensor>* fixed_deltas = nullptr;  // overrides the rng (tests)
    bool real_only = false;                        // skip the resembled chain and heads
    bool adversarial_outputs = false;              // extra non-detached fake scores
};

struct BlockForward {
    std::vector<Var> inst_real;   // v^I per instance, [1 x d]
    std::vector<Var> inst_fake;   // v^I* per instance
    Var block_real;               // v^B, [1 x h]
    Var block_fake;               // v^B*
    // discriminator outputs on detached inputs
    std::vector<Var> yhat_inst_real, yhat_inst_fake;
    Var yhat_block_real, yhat_block_fake;
    // optional non-detached fake scores for the adversarial generator term
    std::vector<Var> adv_yhat_inst_fake;
    Var adv_yhat_block_fake;
    bool has_fake = false;
    bool has_adversarial = false;
};

/// Full two-chain forward pass over one block. `prev_memory` is the previous
/// block's final state (zeros for the first block); it seeds both the relative
/// attention and the initial hidden state of both chains.
inline BlockForward forward_block(Tape& tape, const BoundModel& m, const Model& model,
                                  const Block& block, const Tensor& prev_memory,
                                  const TrainConfig& cfg, const BlockForwardOptions& opt = {}) {
    if (block.instances.empty()) throw ConfigError("forward_block: empty block");
    if (opt.noise && !opt.noise_rng && !opt.fixed_deltas)
        throw ConfigError("forward_block: noise requested without a random stream");

    const std::size_t n = block.instances.size();
    Var memory = tape.leaf(prev_memory, false);

    // representation: attributes -> channels -> block-normalized instance vectors
    std::vector<Var> pre_vectors;
    pre_vectors.reserve(n);
    for (const Instance& inst : block.instances) {
        std::vector<Var> attr_vecs;
        attr_vecs.reserve(inst.attributes.size());
        for (const auto& ids : inst.attributes)
            attr_vecs.push_back(attend_attribute(tape, m, ids, model.embed_dim));
        Var v_self = attend_instance_self(m, attr_vecs);
        if (model.no_relrep) {
            pre_vectors.push_back(v_self);
        } else {
            Var v_rel = attend_instance_relative(m, attr_vecs, memory, cfg.leaky_slope);
            pre_vectors.push_back(concat_cols({v_self, v_rel}));
        }
    }

    BlockForward out;
    out.inst_real = assemble_instance_vectors(pre_vectors, cfg.bn_epsilon);

    // real block chain
    std::vector<Var> real_inputs;
    real_inputs.reserve(n);
    for (Var v : out.inst_real) real_inputs.push_back(leaky_relu(v, cfg.leaky_slope));
    auto real_states = rnn_chain(real_inputs, memory, m[ParamId::rnn_w_in],
                                 m[ParamId::rnn_w_rec], m[ParamId::rnn_b]);
    out.block_real = real_states.back();

    if (opt.real_only) return out;
    out.has_fake = true;

    // resembled chain
    out.inst_fake.reserve(n);
    std::vector<Var> fake_inputs;
    fake_inputs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::optional<Var> delta;
        if (opt.fixed_deltas) {
            delta = tape.leaf((*opt.fixed_deltas)[i], false);
        } else if (opt.noise) {
            delta = tape.leaf(
                gaussian_sample({1, static_cast<std::size_t>(model.instance_dim)}, *opt.noise_rng),
                false);
        }
        Var fake = autoencode(m, out.inst_real[i], delta, cfg.leaky_slope);
        out.inst_fake.push_back(fake);
        fake_inputs.push_back(leaky_relu(fake, cfg.leaky_slope));
    }
    auto fake_states = generate_block_chain(m, fake_inputs, memory);
    out.block_fake = fake_states.back();

    // discriminators see detached representations: their loss trains the heads
    // only, and the generator never chases them through this path
    out.yhat_inst_real.reserve(n);
    out.yhat_inst_fake.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.yhat_inst_real.push_back(discriminate_instance(m, detach(out.inst_real[i])));
        out.yhat_inst_fake.push_back(discriminate_instance(m, detach(out.inst_fake[i])));
    }
    out.yhat_block_real = discriminate_block(m, detach(out.block_real));
    out.yhat_block_fake = discriminate_block(m, detach(out.block_fake));

    if (opt.adversarial_outputs) {
        out.has_adversarial = true;
        out.adv_yhat_inst_fake.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            out.adv_yhat_inst_fake.push_back(discriminate_instance(m, out.inst_fake[i]));
        out.adv_yhat_block_fake = discriminate_block(m, out.block_fake);
    }
    return out;
}

}  // namespace amad
