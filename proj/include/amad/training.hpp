#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "amad/config.hpp"
#include "amad/data.hpp"
#include "amad/forward.hpp"
#include "amad/model.hpp"
#include "amad/optimizer.hpp"
#include "amad/tensor.hpp"

namespace amad {

// ---------------------------------------------------------------------------
// Losses. Cross-entropies carry the conventional negative sign, so every loss
// is non-negative and minimized when the prediction matches its target.
// ---------------------------------------------------------------------------

constexpr double kProbEpsilon = 1e-7;

inline Var clamp_probability(Var p) { return clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

/// Sigmoid cross entropy between two raw vectors:
/// -[sigma(t)' log sigma(p) + (1-sigma(t))' log(1-sigma(p))].
/// By default the target side is treated as a label (gradients stopped), so
/// the generator matches the representation instead of reshaping it to be
/// easy to reconstruct.
inline Var soft_cross_entropy(Var target, Var pred, bool detach_target = true) {
    Var st = sigmoid(detach_target ? detach(target) : target);
    Var sp = clamp_probability(sigmoid(pred));
    Var term = add(mul(st, log(sp)), mul(one_minus(st), log(one_minus(sp))));
    return scale(sum(term), -1.0);
}

/// -[y log yhat + (1-y) log(1-yhat)] for a hard label.
inline Var binary_cross_entropy(Var yhat, int label) {
    Var c = clamp_probability(yhat);
    return scale(label == 1 ? log(c) : log(one_minus(c)), -1.0);
}

struct BlockLosses {
    std::vector<Var> gen_instance;        // per-instance generator losses
    Var gen_block;                        // block generator loss
    std::vector<Var> disc_instance;      // averaged real/resembled terms
    Var disc_block;
    std::vector<Var> disc_instance_real;  // raw components, for score variants
    std::vector<Var> disc_instance_fake;
    Var disc_block_real, disc_block_fake;
    Var gen_total;   // mean instance + block
    Var disc_total;
};

namespace detail {

inline Var fold_mean(Tape& tape, const std::vector<Var>& xs) {
    Var acc = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
    (void)tape;
    return scale(acc, 1.0 / static_cast<double>(xs.size()));
}

}  // namespace detail

/// Assemble every loss of one forward pass. The discriminator sides of the
/// forward are already detached, so backward(gen_total) touches only
/// generator parameters and backward(disc_total) only the heads.
inline BlockLosses block_losses(Tape& tape, const BlockForward& fwd, const TrainConfig& cfg) {
    if (!fwd.has_fake) throw ConfigError("block_losses: forward pass skipped the resembled chain");
    const std::size_t n = fwd.inst_real.size();
    BlockLosses out;
    out.gen_instance.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.gen_instance.push_back(soft_cross_entropy(fwd.inst_real[i], fwd.inst_fake[i]));
    out.gen_block = soft_cross_entropy(fwd.block_real, fwd.block_fake);

    out.disc_instance.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Var real = binary_cross_entropy(fwd.yhat_inst_real[i], 1);
        Var fake = binary_cross_entropy(fwd.yhat_inst_fake[i], 0);
        out.disc_instance_real.push_back(real);
        out.disc_instance_fake.push_back(fake);
        out.disc_instance.push_back(scale(add(real, fake), 0.5));
    }
    out.disc_block_real = binary_cross_entropy(fwd.yhat_block_real, 1);
    out.disc_block_fake = binary_cross_entropy(fwd.yhat_block_fake, 0);
    out.disc_block = scale(add(out.disc_block_real, out.disc_block_fake), 0.5);

    out.gen_total = add(detail::fold_mean(tape, out.gen_instance), out.gen_block);
    if (fwd.has_adversarial && cfg.adversarial_term) {
        std::vector<Var> fool;
        fool.reserve(n);
        for (Var y : fwd.adv_yhat_inst_fake) fool.push_back(binary_cross_entropy(y, 1));
        out.gen_total = add(out.gen_total,
                            add(detail::fold_mean(tape, fool),
                                binary_cross_entropy(fwd.adv_yhat_block_fake, 1)));
    }
    out.disc_total = add(detail::fold_mean(tape, out.disc_instance), out.disc_block);
    return out;
}

// ---------------------------------------------------------------------------
// Streaming trainer: alternating generator/discriminator steps per block,
// memory vector handed from block to block, reset at each epoch.
// ---------------------------------------------------------------------------

struct TrainLogRow {
    std::size_t block_index = 0;  // running counter across epochs
    double gen_instance_mean = 0;
    double gen_block = 0;
    double disc_instance_mean = 0;
    double disc_block = 0;
};

inline void write_train_log(std::ostream& out, const std::vector<TrainLogRow>& rows,
                            bool header = true) {
    if (header) out << "block_index,gen_instance_mean,gen_block,disc_instance_mean,disc_block\n";
    for (const auto& r : rows)
        out << r.block_index << ',' << format_double(r.gen_instance_mean) << ','
            << format_double(r.gen_block) << ',' << format_double(r.disc_instance_mean) << ','
            << format_double(r.disc_block) << '\n';
}

class Trainer {
public:
    Trainer(Model model, TrainConfig cfg)
        : model_(std::move(model)),
          cfg_(cfg),
          noise_rng_(RngStream(cfg.seed).fork("train-noise")),
          memory_(Tensor::zeros({1, static_cast<std::size_t>(model_.hidden)})) {
        cfg_.validate();
    }

    /// Process blocks in stream order from the current position, at most
    /// `max_blocks` of them now. Returns the number actually processed.
    std::size_t run(const std::vector<Block>& blocks,
                    std::size_t max_blocks = std::numeric_limits<std::size_t>::max()) {
        if (blocks.empty()) throw ConfigError("train: no data blocks");
        std::size_t done = 0;
        while (epoch_ < cfg_.epochs && done < max_blocks) {
            if (next_block_ == 0)
                memory_ = Tensor::zeros({1, static_cast<std::size_t>(model_.hidden)});
            while (next_block_ < blocks.size() && done < max_blocks) {
                train_block(blocks[next_block_]);
                ++next_block_;
                ++blocks_processed_;
                ++done;
            }
            if (next_block_ == blocks.size()) {
                next_block_ = 0;
                ++epoch_;
            }
        }
        return done;
    }

    bool finished() const { return epoch_ >= cfg_.epochs; }

    Model& model() { return model_; }
    const Model& model() const { return model_; }
    const TrainConfig& config() const { return cfg_; }
    const std::vector<TrainLogRow>& log() const { return log_; }
    std::vector<TrainLogRow> take_log() { return std::move(log_); }

    int epoch() const { return epoch_; }
    std::size_t next_block() const { return next_block_; }
    std::size_t blocks_processed() const { return blocks_processed_; }
    const Tensor& memory() const { return memory_; }
    const RngStream& noise_rng() const { return noise_rng_; }

    /// Checkpoint restore path.
    void restore_state(int epoch, std::size_t next_block, std::size_t blocks_processed,
                       Tensor memory, RngStream noise_rng) {
        epoch_ = epoch;
        next_block_ = next_block;
        blocks_processed_ = blocks_processed;
        memory_ = std::move(memory);
        noise_rng_ = std::move(noise_rng);
    }

private:
    Model model_;
    TrainConfig cfg_;
    RngStream noise_rng_;
    Tensor memory_;
    int epoch_ = 0;
    std::size_t next_block_ = 0;
    std::size_t blocks_processed_ = 0;
    std::vector<TrainLogRow> log_;

    void train_block(const Block& block) {
        const RmsProp opt{cfg_.learning_rate, cfg_.rms_decay, cfg_.rms_epsilon};
        bool logged = false;

        BlockForwardOptions opts;
        opts.noise = !cfg_.no_noise;
        opts.noise_rng = &noise_rng_;
        opts.adversarial_outputs = cfg_.adversarial_term;

        for (int s = 0; s < cfg_.gen_steps_per_block; ++s) {
            Tape tape;
            BoundModel bm = bind(tape, model_, true);
            auto fwd = forward_block(tape, bm, model_, block, memory_, cfg_, opts);
            auto losses = block_losses(tape, fwd, cfg_);
            if (!logged) {
                log_row(tape, losses);
                logged = true;
            }
            tape.backward(losses.gen_total);
            apply_updates(tape, bm, opt, true);
        }
        for (int s = 0; s < cfg_.disc_steps_per_block; ++s) {
            Tape tape;
            BoundModel bm = bind(tape, model_, true);
            auto fwd = forward_block(tape, bm, model_, block, memory_, cfg_, opts);
            auto losses = block_losses(tape, fwd, cfg_);
            if (!logged) {
                log_row(tape, losses);
                logged = true;
            }
            tape.backward(losses.disc_total);
            apply_updates(tape, bm, opt, false);
        }
        if (!logged) {
            Tape tape;
            BoundModel bm = bind(tape, model_, false);
            auto fwd = forward_block(tape, bm, model_, block, memory_, cfg_, opts);
            auto losses = block_losses(tape, fwd, cfg_);
            log_row(tape, losses);
        }

        // memory handoff: the block vector under the parameters as trained
        {
            Tape tape;
            BoundModel bm = bind(tape, model_, false);
            BlockForwardOptions real_opts;
            real_opts.real_only = true;
            auto fwd = forward_block(tape, bm, model_, block, memory_, cfg_, real_opts);
            memory_ = tape.value_tensor(fwd.block_real);
        }
    }

    void apply_updates(Tape& tape, const BoundModel& bm, const RmsProp& opt, bool generator) {
        std::vector<std::pair<ParamId, Tensor>> grads;
        double sq_norm = 0.0;
        for (std::size_t i = 0; i < kParamCount; ++i) {
            const ParamId id = static_cast<ParamId>(i);
            if (!model_.has(id) || param_is_generator(id) != generator) continue;
            Tensor g = tape.grad(bm[id]);
            for (double v : g.values) sq_norm += v * v;
            grads.emplace_back(id, std::move(g));
        }
        if (cfg_.grad_clip > 0.0 && sq_norm > cfg_.grad_clip * cfg_.grad_clip) {
            const double scale = cfg_.grad_clip / std::sqrt(sq_norm);
            for (auto& [id, g] : grads)
                for (double& v : g.values) v *= scale;
        }
        for (auto& [id, g] : grads)
            opt.step(model_.value(id), model_.accumulator(id), g.values);
    }

    void log_row(const Tape& tape, const BlockLosses& losses) {
        TrainLogRow row;
        row.block_index = blocks_processed_;
        double gi = 0, di = 0;
        for (Var v : losses.gen_instance) gi += tape.scalar_value(v);
        for (Var v : losses.disc_instance) di += tape.scalar_value(v);
        row.gen_instance_mean = gi / static_cast<double>(losses.gen_instance.size());
        row.disc_instance_mean = di / static_cast<double>(losses.disc_instance.size());
        row.gen_block = tape.scalar_value(losses.gen_block);
        row.disc_block = tape.scalar_value(losses.disc_block);
        log_.push_back(row);
    }
};

// ---------------------------------------------------------------------------
// Checkpoint: versioned text, exact hex floats, canonical field order. A
// reload continues the interrupted stream bit-exactly.
// ---------------------------------------------------------------------------

constexpr const char* kCheckpointHeader = "amad-checkpoint v1";

namespace detail {

inline void write_value_line(std::ostream& out, const char* tag, const Tensor& t) {
    out << tag;
    for (double v : t.values) out << ' ' << format_double_hex(v);
    out << '\n';
}

inline std::vector<double> parse_hex_values(const std::string& line, std::size_t skip_tag) {
    std::istringstream is(line.substr(skip_tag));
    std::vector<double> out;
    std::string tok;
    while (is >> tok) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0')
            throw DataError("checkpoint: bad value '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

}  // namespace detail

inline void save_checkpoint(std::ostream& out, const Trainer& trainer) {
    const Model& m = trainer.model();
    out << kCheckpointHeader << '\n';
    out << "[config]\n";
    trainer.config().write(out);
    out << "[model]\n";
    out << "dimension=" << m.dimension << '\n';
    out << "[state]\n";
    out << "epoch=" << trainer.epoch() << '\n';
    out << "next_block=" << trainer.next_block() << '\n';
    out << "blocks_processed=" << trainer.blocks_processed() << '\n';
    out << "noise_rng=" << trainer.noise_rng().state_text() << '\n';
    detail::write_value_line(out, "memory", trainer.memory());
    out << "[params]\n";
    for (std::size_t i = 0; i < kParamCount; ++i) {
        const ParamId id = static_cast<ParamId>(i);
        if (!m.has(id)) continue;
        const Tensor& t = m.value(id);
        out << "name=" << param_name(id) << " rows=" << t.rows() << " cols=" << t.cols() << '\n';
        detail::write_value_line(out, "v", t);
        detail::write_value_line(out, "a", m.acc[i]);
    }
    out << "[end]\n";
}

inline void save_checkpoint_file(const std::filesystem::path& path, const Trainer& trainer) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write checkpoint " + path.string());
    save_checkpoint(f, trainer);
}

inline Trainer load_checkpoint(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointHeader)
        throw DataError("checkpoint: bad or missing version header");

    auto expect = [&](const char* section) {
        if (!std::getline(in, line) || line != section)
            throw DataError(std::string("checkpoint: expected ") + section);
    };

    expect("[config]");
    TrainConfig cfg;
    // config keys run until the [model] marker
    std::ostringstream cfg_text;
    while (std::getline(in, line)) {
        if (line == "[model]") break;
        cfg_text << line << '\n';
    }
    {
        std::istringstream cfg_in(cfg_text.str());
        try {
            cfg.load(cfg_in);
        } catch (const ConfigError& e) {
            throw DataError(std::string("checkpoint: ") + e.what());
        }
    }

    int dimension = 0;
    if (!std::getline(in, line) || line.rfind("dimension=", 0) != 0)
        throw DataError("checkpoint: missing dimension");
    dimension = static_cast<int>(parse_int(line.substr(10)));

    expect("[state]");
    int epoch = 0;
    std::size_t next_block = 0, blocks_processed = 0;
    std::string rng_state;
    Tensor memory;
    for (int k = 0; k < 5; ++k) {
        if (!std::getline(in, line)) throw DataError("checkpoint: truncated state");
        if (line.rfind("epoch=", 0) == 0) epoch = static_cast<int>(parse_int(line.substr(6)));
        else if (line.rfind("next_block=", 0) == 0)
            next_block = static_cast<std::size_t>(parse_int(line.substr(11)));
        else if (line.rfind("blocks_processed=", 0) == 0)
            blocks_processed = static_cast<std::size_t>(parse_int(line.substr(17)));
        else if (line.rfind("noise_rng=", 0) == 0) rng_state = line.substr(10);
        else if (line.rfind("memory", 0) == 0) {
            auto vals = detail::parse_hex_values(line, 6);
            const std::size_t n = vals.size();
            memory = Tensor({1, n}, std::move(vals));
        } else {
            throw DataError("checkpoint: unexpected state line '" + line + "'");
        }
    }

    // rebuild the model skeleton, then overwrite every tensor from the file
    Model model = Model::init(dimension, cfg, RngStream(cfg.seed).fork("init"));
    expect("[params]");
    while (std::getline(in, line)) {
        if (line == "[end]") break;
        if (line.rfind("name=", 0) != 0) throw DataError("checkpoint: expected a param header");
        std::istringstream hs(line);
        std::string name_kv, rows_kv, cols_kv;
        hs >> name_kv >> rows_kv >> cols_kv;
        const std::string name = name_kv.substr(5);
        const std::size_t rows = static_cast<std::size_t>(parse_int(rows_kv.substr(5)));
        const std::size_t cols = static_cast<std::size_t>(parse_int(cols_kv.substr(5)));

        ParamId id = ParamId::count;
        for (std::size_t i = 0; i < kParamCount; ++i)
            if (name == param_name(static_cast<ParamId>(i))) id = static_cast<ParamId>(i);
        if (id == ParamId::count) throw DataError("checkpoint: unknown parameter '" + name + "'");
        if (!model.has(id)) throw DataError("checkpoint: parameter '" + name + "' not in config");
        Tensor& dst = model.value(id);
        if (dst.rows() != rows || dst.cols() != cols)
            throw DataError("checkpoint: shape mismatch for '" + name + "': file " +
                            std::to_string(rows) + "x" + std::to_string(cols) + ", config " +
                            std::to_string(dst.rows()) + "x" + std::to_string(dst.cols()));

        if (!std::getline(in, line) || line.rfind("v ", 0) != 0)
            throw DataError("checkpoint: missing values for '" + name + "'");
        auto vals = detail::parse_hex_values(line, 1);
        if (vals.size() != dst.numel())
            throw DataError("checkpoint: value count mismatch for '" + name + "'");
        dst.values = std::move(vals);

        if (!std::getline(in, line) || line.rfind("a ", 0) != 0)
            throw DataError("checkpoint: missing accumulator for '" + name + "'");
        auto accs = detail::parse_hex_values(line, 1);
        if (accs.size() != dst.numel())
            throw DataError("checkpoint: accumulator count mismatch for '" + name + "'");
        model.accumulator(id).values = std::move(accs);
    }

    if (memory.numel() != static_cast<std::size_t>(model.hidden))
        throw DataError("checkpoint: memory vector size mismatch");

    Trainer trainer(std::move(model), cfg);
    trainer.restore_state(epoch, next_block, blocks_processed, std::move(memory),
                          RngStream::from_state_text(rng_state));
    return trainer;
}

inline Trainer load_checkpoint_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read checkpoint " + path.string());
    return load_checkpoint(f);
}

}  // namespace amad
