#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "amad/config.hpp"
#include "amad/data.hpp"
#include "amad/forward.hpp"
#include "amad/metrics.hpp"
#include "amad/model.hpp"
#include "amad/training.hpp"

namespace amad {

// ---------------------------------------------------------------------------
// Streaming anomaly scoring. Inference runs the same pathway as training with
// zero noise, so a given checkpoint always reproduces its scores.
// ---------------------------------------------------------------------------

enum class ScoreLevel { instance, block };

struct ScoreRecord {
    ScoreLevel level = ScoreLevel::instance;
    std::size_t index = 0;  // timestamp for instances, ordinal for blocks
    double z = 0.0;
    double loss_gen = 0.0;
    double loss_disc = 0.0;
    double mean_instance = 0.0;  // blocks only
    bool has_mean_instance = false;
    Label label = Label::unknown;
};

class StreamScorer {
public:
    /// `initial_memory`: the memory vector seeding the first block. Zeros for
    /// a standalone stream; the checkpoint's vector when the test stream
    /// continues the training stream.
    StreamScorer(const Model& model, TrainConfig cfg, Tensor initial_memory = {})
        : model_(model),
          cfg_(std::move(cfg)),
          initial_memory_(initial_memory.numel()
                              ? std::move(initial_memory)
                              : Tensor::zeros({1, static_cast<std::size_t>(model.hidden)})),
          memory_(initial_memory_),
          noise_rng_(RngStream(cfg_.seed).fork("score-noise")) {
        if (memory_.numel() != static_cast<std::size_t>(model.hidden))
            throw ConfigError("StreamScorer: initial memory size mismatch");
    }

    void reset() {
        memory_ = initial_memory_;
        next_ordinal_ = 0;
        noise_rng_ = RngStream(cfg_.seed).fork("score-noise");
    }

    /// Score one block and hand the memory vector to the next call. Emits one
    /// record per instance plus the block record.
    std::vector<ScoreRecord> score_block(const Block& block) {
        const std::size_t n = block.instances.size();
        std::vector<double> lg(n, 0.0), ld(n, 0.0);
        double lg_b = 0.0, ld_b = 0.0;
        Tensor next_memory;

        const int runs = cfg_.noise_samples > 0 ? cfg_.noise_samples : 1;
        for (int r = 0; r < runs; ++r) {
            Tape tape;
            BoundModel bm = bind(tape, model_, false);
            BlockForwardOptions opts;
            if (cfg_.noise_samples > 0) {
                opts.noise = true;
                opts.noise_rng = &noise_rng_;
            }
            auto fwd = forward_block(tape, bm, model_, block, memory_, cfg_, opts);
            auto losses = block_losses(tape, fwd, cfg_);
            for (std::size_t i = 0; i < n; ++i) {
                lg[i] += tape.scalar_value(losses.gen_instance[i]);
                ld[i] += instance_disc_loss(tape, losses, i);
            }
            lg_b += tape.scalar_value(losses.gen_block);
            ld_b += block_disc_loss(tape, losses);
            if (r == 0) next_memory = tape.value_tensor(fwd.block_real);
        }
        for (std::size_t i = 0; i < n; ++i) {
            lg[i] /= runs;
            ld[i] /= runs;
        }
        lg_b /= runs;
        ld_b /= runs;
        memory_ = std::move(next_memory);

        std::vector<ScoreRecord> out;
        out.reserve(n + 1);
        double z_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ScoreRecord rec;
            rec.level = ScoreLevel::instance;
            rec.index = block.instances[i].timestamp_index;
            rec.loss_gen = lg[i];
            rec.loss_disc = ld[i];
            rec.z = lg[i] + cfg_.beta * ld[i];
            rec.label = block.instances[i].label;
            z_sum += rec.z;
            out.push_back(rec);
        }

        ScoreRecord brec;
        brec.level = ScoreLevel::block;
        brec.index = next_ordinal_++;
        brec.loss_gen = lg_b;
        brec.loss_disc = ld_b;
        brec.mean_instance = z_sum / static_cast<double>(n);
        brec.has_mean_instance = true;
        brec.z = cfg_.no_blockloss ? brec.mean_instance
                                   : lg_b + cfg_.beta * ld_b + cfg_.gamma * brec.mean_instance;
        std::vector<Block> one = {block};
        label_blocks(one);
        brec.label = one[0].label;
        out.push_back(brec);
        return out;
    }

    const Tensor& memory() const { return memory_; }

private:
    const Model& model_;
    TrainConfig cfg_;
    Tensor initial_memory_;
    Tensor memory_;
    RngStream noise_rng_;
    std::size_t next_ordinal_ = 0;

    double instance_disc_loss(const Tape& tape, const BlockLosses& losses, std::size_t i) const {
        if (cfg_.ld_real_only) return tape.scalar_value(losses.disc_instance_real[i]);
        return tape.scalar_value(losses.disc_instance[i]);
    }
    double block_disc_loss(const Tape& tape, const BlockLosses& losses) const {
        if (cfg_.ld_real_only) return tape.scalar_value(losses.disc_block_real);
        return tape.scalar_value(losses.disc_block);
    }
};

/// Blockify and score a whole stream in timestamp order.
inline std::vector<ScoreRecord> score_stream(const Model& model, const TrainConfig& cfg,
                                             const std::vector<Instance>& instances,
                                             int block_size, Tensor initial_memory = {}) {
    StreamScorer scorer(model, cfg, std::move(initial_memory));
    std::vector<ScoreRecord> out;
    for (const Block& b : blockify(instances, block_size)) {
        auto recs = scorer.score_block(b);
        out.insert(out.end(), recs.begin(), recs.end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Score CSV: level,index,z,loss_g,loss_d,mean_instance,label
// ---------------------------------------------------------------------------

inline void write_scores(std::ostream& out, const std::vector<ScoreRecord>& records) {
    out << "level,index,z,loss_g,loss_d,mean_instance,label\n";
    for (const auto& r : records) {
        out << (r.level == ScoreLevel::instance ? "instance" : "block") << ',' << r.index << ','
            << format_double(r.z) << ',' << format_double(r.loss_gen) << ','
            << format_double(r.loss_disc) << ',';
        if (r.has_mean_instance) out << format_double(r.mean_instance);
        out << ',' << label_char(r.label) << '\n';
    }
}

inline void write_scores_file(const std::filesystem::path& path,
                              const std::vector<ScoreRecord>& records) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    write_scores(f, records);
}

inline std::vector<ScoreRecord> read_scores(std::istream& in) {
    std::vector<ScoreRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("level,", 0) == 0) continue;
        const auto cells = split_line(line, ',');
        if (cells.size() != 7)
            throw DataError("scores line " + std::to_string(lineno) + ": expected 7 columns");
        ScoreRecord r;
        if (cells[0] == "instance") r.level = ScoreLevel::instance;
        else if (cells[0] == "block") r.level = ScoreLevel::block;
        else throw DataError("scores line " + std::to_string(lineno) + ": bad level");
        r.index = static_cast<std::size_t>(parse_int(cells[1]));
        r.z = parse_double(cells[2]);
        r.loss_gen = parse_double(cells[3]);
        r.loss_disc = parse_double(cells[4]);
        if (!cells[5].empty()) {
            r.mean_instance = parse_double(cells[5]);
            r.has_mean_instance = true;
        }
        r.label = label_from(cells[6], lineno);
        out.push_back(r);
    }
    return out;
}

inline std::vector<ScoreRecord> read_scores_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read " + path.string());
    return read_scores(f);
}

/// Labeled scores of one level, ready for the metric stack.
inline std::vector<ScoredItem> scored_items(const std::vector<ScoreRecord>& records,
                                            ScoreLevel level) {
    std::vector<ScoredItem> items;
    for (const auto& r : records) {
        if (r.level != level || r.label == Label::unknown) continue;
        items.push_back({r.z, r.label == Label::anomalous});
    }
    return items;
}

}  // namespace amad
