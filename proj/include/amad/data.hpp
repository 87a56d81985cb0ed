#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "amad/config.hpp"
#include "amad/errors.hpp"
#include "amad/random.hpp"

namespace amad {

// ---------------------------------------------------------------------------
// Hierarchical data model: feature id -> attribute -> instance -> block.
// ---------------------------------------------------------------------------

enum class Label { normal, anomalous, unknown };

struct Instance {
    std::vector<std::vector<int>> attributes;  // categorical ids per attribute, may be empty
    Label label = Label::unknown;
    std::size_t timestamp_index = 0;

    bool operator==(const Instance&) const = default;
};

struct Block {
    std::vector<Instance> instances;
    Label label = Label::unknown;
};

struct DatasetManifest {
    std::string recipe = "generic";
    std::uint64_t seed = 0;
    int dimension = 0;        // total distinct feature ids
    int attribute_count = 0;  // attributes per instance
    std::size_t normal_count = 0;
    std::size_t anomaly_count = 0;
    std::size_t train_count = 0;
    std::size_t test_count = 0;
    int periods = 0;
    int period = 0;
    double noise_frac = 0.0;

    void write(std::ostream& out) const {
        out << "recipe=" << recipe << '\n'
            << "seed=" << seed << '\n'
            << "dimension=" << dimension << '\n'
            << "attribute_count=" << attribute_count << '\n'
            << "normal_count=" << normal_count << '\n'
            << "anomaly_count=" << anomaly_count << '\n'
            << "train_count=" << train_count << '\n'
            << "test_count=" << test_count << '\n'
            << "periods=" << periods << '\n'
            << "period=" << period << '\n'
            << "noise_frac=" << format_double(noise_frac) << '\n';
    }

    static DatasetManifest read(std::istream& in) {
        DatasetManifest m;
        for (const auto& [k, v] : parse_kv_lines(in)) {
            if (k == "recipe") m.recipe = v;
            else if (k == "seed") m.seed = static_cast<std::uint64_t>(parse_int(v));
            else if (k == "dimension") m.dimension = static_cast<int>(parse_int(v));
            else if (k == "attribute_count") m.attribute_count = static_cast<int>(parse_int(v));
            else if (k == "normal_count") m.normal_count = static_cast<std::size_t>(parse_int(v));
            else if (k == "anomaly_count") m.anomaly_count = static_cast<std::size_t>(parse_int(v));
            else if (k == "train_count") m.train_count = static_cast<std::size_t>(parse_int(v));
            else if (k == "test_count") m.test_count = static_cast<std::size_t>(parse_int(v));
            else if (k == "periods") m.periods = static_cast<int>(parse_int(v));
            else if (k == "period") m.period = static_cast<int>(parse_int(v));
            else if (k == "noise_frac") m.noise_frac = parse_double(v);
            else throw DataError("manifest: unknown key '" + k + "'");
        }
        return m;
    }
};

// ---------------------------------------------------------------------------
// Synthetic stream: three single-id attributes starting at (0,10,20), each id
// incremented per step and wrapped mod 30, then a fraction of all id slots
// perturbed by +-1 (also wrapped).
// ---------------------------------------------------------------------------

struct SyntheticParams {
    int n_periods = 220;
    int period = 50;
    double noise_frac = 0.10;
    static constexpr int dimension = 30;
    static constexpr int attribute_count = 3;
};

inline int wrap_id(int v, int dimension) {
    const int m = v % dimension;
    return m < 0 ? m + dimension : m;
}

inline std::vector<Instance> generate_synthetic(const SyntheticParams& p, std::uint64_t seed) {
    if (p.n_periods < 1 || p.period < 1)
        throw ConfigError("generate_synthetic: periods and period must be >= 1");
    if (p.noise_frac < 0.0 || p.noise_frac > 1.0)
        throw ConfigError("generate_synthetic: noise_frac must be in [0,1]");
    const std::size_t n = static_cast<std::size_t>(p.n_periods) * p.period;
    std::vector<Instance> out(n);
    int ids[3] = {0, 10, 20};
    for (std::size_t i = 0; i < n; ++i) {
        Instance& inst = out[i];
        inst.timestamp_index = i;
        inst.label = Label::normal;
        inst.attributes = {{ids[0]}, {ids[1]}, {ids[2]}};
        for (int& v : ids) v = wrap_id(v + 1, SyntheticParams::dimension);
    }

    RngStream rng = RngStream(seed).fork("synthetic-noise");
    const std::size_t total_slots = n * SyntheticParams::attribute_count;
    const std::size_t k =
        static_cast<std::size_t>(std::llround(p.noise_frac * static_cast<double>(total_slots)));
    std::vector<std::size_t> slots(total_slots);
    for (std::size_t i = 0; i < total_slots; ++i) slots[i] = i;
    for (std::size_t i = 0; i < k; ++i)
        std::swap(slots[i], slots[i + rng.below(total_slots - i)]);
    slots.resize(k);
    std::sort(slots.begin(), slots.end());
    for (std::size_t s : slots) {
        const int delta = rng.coin() ? 1 : -1;
        int& v = out[s / 3].attributes[s % 3][0];
        v = wrap_id(v + delta, SyntheticParams::dimension);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Anomaly injection.
// ---------------------------------------------------------------------------

enum class AnomalyMode { random_ids, copy_train, delete_attribute, replace_attribute };

inline AnomalyMode parse_anomaly_mode(const std::string& s) {
    if (s == "random_ids") return AnomalyMode::random_ids;
    if (s == "copy_train") return AnomalyMode::copy_train;
    if (s == "delete_attribute") return AnomalyMode::delete_attribute;
    if (s == "replace_attribute") return AnomalyMode::replace_attribute;
    throw ConfigError("unknown anomaly mode '" + s + "'");
}

inline std::string anomaly_mode_name(AnomalyMode m) {
    switch (m) {
        case AnomalyMode::random_ids: return "random_ids";
        case AnomalyMode::copy_train: return "copy_train";
        case AnomalyMode::delete_attribute: return "delete_attribute";
        case AnomalyMode::replace_attribute: return "replace_attribute";
    }
    return "?";
}

/// Replace `count` uniformly chosen test positions with anomalies. Each hit
/// position draws its mode uniformly from `modes` (a single-element list gives
/// the plain one-mode behavior). Replaced instances keep their timestamp.
inline std::vector<Instance> inject_anomalies(const std::vector<Instance>& test,
                                              const std::vector<Instance>& train_pool,
                                              const std::vector<AnomalyMode>& modes,
                                              std::size_t count, int dimension,
                                              std::uint64_t seed) {
    if (modes.empty()) throw ConfigError("inject_anomalies: no modes given");
    if (count > test.size()) throw ConfigError("inject_anomalies: count exceeds test size");
    const bool wants_copy =
        std::find(modes.begin(), modes.end(), AnomalyMode::copy_train) != modes.end();
    if (wants_copy && train_pool.empty())
        throw ConfigError("inject_anomalies: copy_train requires a non-empty train pool");

    std::vector<Instance> out = test;
    RngStream rng = RngStream(seed).fork("inject");
    std::vector<std::size_t> pos(test.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
    for (std::size_t i = 0; i < count; ++i)
        std::swap(pos[i], pos[i + rng.below(pos.size() - i)]);
    pos.resize(count);
    std::sort(pos.begin(), pos.end());

    for (std::size_t p : pos) {
        Instance& inst = out[p];
        const AnomalyMode mode = modes.size() == 1
                                     ? modes[0]
                                     : modes[rng.below(modes.size())];
        switch (mode) {
            case AnomalyMode::random_ids:
                for (auto& attr : inst.attributes)
                    for (int& id : attr) id = static_cast<int>(rng.below(dimension));
                break;
            case AnomalyMode::copy_train: {
                const Instance& src = train_pool[rng.below(train_pool.size())];
                inst.attributes = src.attributes;
                break;
            }
            case AnomalyMode::delete_attribute:
                inst.attributes[rng.below(inst.attributes.size())].clear();
                break;
            case AnomalyMode::replace_attribute: {
                auto& attr = inst.attributes[rng.below(inst.attributes.size())];
                for (int& id : attr) id = static_cast<int>(rng.below(dimension));
                break;
            }
        }
        inst.label = Label::anomalous;
    }
    return out;
}

inline std::vector<Instance> inject_anomalies(const std::vector<Instance>& test,
                                              const std::vector<Instance>& train_pool,
                                              AnomalyMode mode, std::size_t count, int dimension,
                                              std::uint64_t seed) {
    return inject_anomalies(test, train_pool, std::vector<AnomalyMode>{mode}, count, dimension,
                            seed);
}

// ---------------------------------------------------------------------------
// Serialization. One instance per line:
//   timestamp,label,cell_1,...,cell_N
// ids inside a cell are ';'-separated; an empty cell is an empty attribute;
// label is 0 (normal), 1 (anomalous) or ? (unknown).
// ---------------------------------------------------------------------------

inline char label_char(Label l) {
    switch (l) {
        case Label::normal: return '0';
        case Label::anomalous: return '1';
        case Label::unknown: return '?';
    }
    return '?';
}

inline Label label_from(const std::string& s, int lineno) {
    if (s == "0") return Label::normal;
    if (s == "1") return Label::anomalous;
    if (s == "?") return Label::unknown;
    throw DataError("line " + std::to_string(lineno) + ": bad label '" + s + "'");
}

inline void write_dataset(std::ostream& out, const std::vector<Instance>& instances) {
    for (const Instance& inst : instances) {
        out << inst.timestamp_index << ',' << label_char(inst.label);
        for (const auto& attr : inst.attributes) {
            out << ',';
            for (std::size_t i = 0; i < attr.size(); ++i) {
                if (i) out << ';';
                out << attr[i];
            }
        }
        out << '\n';
    }
}

inline void write_dataset_file(const std::filesystem::path& path,
                               const std::vector<Instance>& instances) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    write_dataset(f, instances);
}

/// Column layout for loading categorical CSV files. Negative index: column
/// absent. With `attribute_columns` empty, every unclaimed column is an
/// attribute, left to right.
struct CsvSchema {
    int timestamp_column = -1;
    int label_column = -1;
    std::vector<int> attribute_columns;
    char cell_delimiter = ',';
    char list_delimiter = ';';

    /// Layout written by write_dataset().
    static CsvSchema dataset() {
        CsvSchema s;
        s.timestamp_column = 0;
        s.label_column = 1;
        return s;
    }
};

struct LoadResult {
    std::vector<Instance> instances;
    int dimension = 0;  // declared, or 1 + max observed id
    int attribute_count = 0;
};

inline std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

inline LoadResult load_categorical_csv(std::istream& in, const CsvSchema& schema,
                                       int declared_dimension = 0) {
    LoadResult res;
    std::string line;
    int lineno = 0;
    int max_id = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_line(line, schema.cell_delimiter);
        Instance inst;
        inst.timestamp_index = static_cast<std::size_t>(lineno - 1);
        inst.label = Label::unknown;
        if (schema.timestamp_column >= 0) {
            if (schema.timestamp_column >= static_cast<int>(cells.size()))
                throw DataError("line " + std::to_string(lineno) + ": missing timestamp column");
            try {
                inst.timestamp_index =
                    static_cast<std::size_t>(parse_int(trim(cells[schema.timestamp_column])));
            } catch (const ConfigError& e) {
                throw DataError("line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        if (schema.label_column >= 0) {
            if (schema.label_column >= static_cast<int>(cells.size()))
                throw DataError("line " + std::to_string(lineno) + ": missing label column");
            inst.label = label_from(trim(cells[schema.label_column]), lineno);
        }
        std::vector<int> attr_cols = schema.attribute_columns;
        if (attr_cols.empty()) {
            for (int c = 0; c < static_cast<int>(cells.size()); ++c)
                if (c != schema.timestamp_column && c != schema.label_column)
                    attr_cols.push_back(c);
        }
        for (int c : attr_cols) {
            if (c < 0 || c >= static_cast<int>(cells.size()))
                throw DataError("line " + std::to_string(lineno) + ": missing attribute column " +
                                std::to_string(c));
            std::vector<int> ids;
            const std::string cell = trim(cells[c]);
            if (!cell.empty()) {
                for (const std::string& tok : split_line(cell, schema.list_delimiter)) {
                    int id;
                    try {
                        id = static_cast<int>(parse_int(trim(tok)));
                    } catch (const ConfigError&) {
                        throw DataError("line " + std::to_string(lineno) + ": bad id '" + tok +
                                        "'");
                    }
                    if (id < 0)
                        throw DataError("line " + std::to_string(lineno) + ": negative id");
                    if (declared_dimension > 0 && id >= declared_dimension)
                        throw DataError("line " + std::to_string(lineno) + ": id " +
                                        std::to_string(id) + " >= declared dimension " +
                                        std::to_string(declared_dimension));
                    max_id = std::max(max_id, id);
                    ids.push_back(id);
                }
            }
            inst.attributes.push_back(std::move(ids));
        }
        if (res.instances.empty()) {
            res.attribute_count = static_cast<int>(inst.attributes.size());
        } else if (static_cast<int>(inst.attributes.size()) != res.attribute_count) {
            throw DataError("line " + std::to_string(lineno) + ": expected " +
                            std::to_string(res.attribute_count) + " attributes, got " +
                            std::to_string(inst.attributes.size()));
        }
        res.instances.push_back(std::move(inst));
    }
    res.dimension = declared_dimension > 0 ? declared_dimension : max_id + 1;
    return res;
}

inline LoadResult load_categorical_csv_file(const std::filesystem::path& path,
                                            const CsvSchema& schema,
                                            int declared_dimension = 0) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read " + path.string());
    return load_categorical_csv(f, schema, declared_dimension);
}

// ---------------------------------------------------------------------------
// Splitting and blocking.
// ---------------------------------------------------------------------------

inline std::pair<std::vector<Instance>, std::vector<Instance>> split_sequential(
    const std::vector<Instance>& instances, std::size_t train_count) {
    if (train_count == 0 || train_count >= instances.size())
        throw ConfigError("split_sequential: train_count must be in (0, n)");
    return {std::vector<Instance>(instances.begin(), instances.begin() + train_count),
            std::vector<Instance>(instances.begin() + train_count, instances.end())};
}

inline std::pair<std::vector<Instance>, std::vector<Instance>> split_random(
    const std::vector<Instance>& instances, std::size_t train_count, std::uint64_t seed) {
    if (train_count == 0 || train_count >= instances.size())
        throw ConfigError("split_random: train_count must be in (0, n)");
    std::vector<Instance> shuffled = instances;
    RngStream rng = RngStream(seed).fork("split");
    for (std::size_t i = shuffled.size(); i > 1; --i)
        std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
    return {std::vector<Instance>(shuffled.begin(), shuffled.begin() + train_count),
            std::vector<Instance>(shuffled.begin() + train_count, shuffled.end())};
}

/// Consecutive non-overlapping runs in order; a final partial block keeps its
/// true length.
inline std::vector<Block> blockify(const std::vector<Instance>& instances, int block_size) {
    if (block_size < 1) throw ConfigError("blockify: block_size must be >= 1");
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < instances.size(); i += block_size) {
        Block b;
        const std::size_t end = std::min(instances.size(), i + block_size);
        b.instances.assign(instances.begin() + i, instances.begin() + end);
        blocks.push_back(std::move(b));
    }
    return blocks;
}

/// Strict-majority rule: anomalous iff more than half the instances are.
/// Unknown instance labels leave the block unknown unless the outcome is
/// already forced either way.
inline void label_blocks(std::vector<Block>& blocks) {
    for (Block& b : blocks) {
        std::size_t anom = 0, unknown = 0;
        for (const Instance& inst : b.instances) {
            if (inst.label == Label::anomalous) ++anom;
            else if (inst.label == Label::unknown) ++unknown;
        }
        const std::size_t n = b.instances.size();
        if (2 * anom > n) b.label = Label::anomalous;
        else if (2 * (anom + unknown) > n) b.label = Label::unknown;
        else b.label = Label::normal;
    }
}

}  // namespace amad
