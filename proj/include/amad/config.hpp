#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "amad/errors.hpp"

namespace amad {

// ---------------------------------------------------------------------------
// Number formatting. Shortest decimal form that round-trips the exact double,
// so emitted files are both readable and reproducible.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Hex float: exact, compact, for checkpoint payloads.
inline std::string format_double_hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("not a number: '" + s + "'");
    return v;
}

inline long long parse_int(const std::string& s) {
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("not an integer: '" + s + "'");
    return v;
}

inline bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("not a boolean: '" + s + "'");
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// Parse "key=value" lines; '#' starts a comment, blank lines are skipped.
inline std::vector<std::pair<std::string, std::string>> parse_kv_lines(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got '" +
                              line + "'");
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training configuration. Any field can be set from a config file or a CLI
// override; unknown keys are rejected.
// ---------------------------------------------------------------------------

struct TrainConfig {
    int block_size = 100;
    double learning_rate = 0.01;
    double beta = 0.3;
    double gamma = 0.05;
    int gen_steps_per_block = 3;
    int disc_steps_per_block = 1;
    int epochs = 1;
    int embed_dim = 16;
    int hidden = 32;
    std::uint64_t seed = 1;
    bool no_noise = false;
    bool no_relrep = false;
    bool no_blockloss = false;

    // defaults the method leaves open
    double rms_decay = 0.9;
    double rms_epsilon = 1e-8;
    double leaky_slope = 0.01;
    double bn_epsilon = 1e-5;
    std::string init_scheme = "glorot";  // glorot: fan-scaled uniform matrices; uniform: +-init_scale
    double init_scale = 0.05;      // embedding rows (and, under "uniform", every weight)
    double rnn_rec_gain = 0.0;     // added to the recurrent weight diagonal at init
    double grad_clip = 0.0;        // global-norm clip per partition step; 0 disables
    int encoder_hidden = 0;        // 0 -> half the instance-vector dimension
    bool adversarial_term = false; // extra generator objective: fool the discriminator
    bool ld_real_only = false;     // score-time discriminator loss from the real vector only
    int noise_samples = 0;         // >0: average scores over that many noise draws

    int instance_dim() const { return no_relrep ? embed_dim : 2 * embed_dim; }
    int encoder_dim() const {
        if (encoder_hidden > 0) return encoder_hidden;
        return std::max(1, instance_dim() / 2);
    }

    void set(const std::string& key, const std::string& value) {
        if (key == "block_size") block_size = static_cast<int>(parse_int(value));
        else if (key == "learning_rate") learning_rate = parse_double(value);
        else if (key == "beta") beta = parse_double(value);
        else if (key == "gamma") gamma = parse_double(value);
        else if (key == "gen_steps_per_block") gen_steps_per_block = static_cast<int>(parse_int(value));
        else if (key == "disc_steps_per_block") disc_steps_per_block = static_cast<int>(parse_int(value));
        else if (key == "epochs") epochs = static_cast<int>(parse_int(value));
        else if (key == "embed_dim") embed_dim = static_cast<int>(parse_int(value));
        else if (key == "hidden") hidden = static_cast<int>(parse_int(value));
        else if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(value));
        else if (key == "no_noise") no_noise = parse_bool(value);
        else if (key == "no_relrep") no_relrep = parse_bool(value);
        else if (key == "no_blockloss") no_blockloss = parse_bool(value);
        else if (key == "rms_decay") rms_decay = parse_double(value);
        else if (key == "rms_epsilon") rms_epsilon = parse_double(value);
        else if (key == "leaky_slope") leaky_slope = parse_double(value);
        else if (key == "bn_epsilon") bn_epsilon = parse_double(value);
        else if (key == "init_scheme") {
            if (value != "glorot" && value != "uniform")
                throw ConfigError("init_scheme must be glorot or uniform");
            init_scheme = value;
        }
        else if (key == "init_scale") init_scale = parse_double(value);
        else if (key == "rnn_rec_gain") rnn_rec_gain = parse_double(value);
        else if (key == "grad_clip") grad_clip = parse_double(value);
        else if (key == "encoder_hidden") encoder_hidden = static_cast<int>(parse_int(value));
        else if (key == "adversarial_term") adversarial_term = parse_bool(value);
        else if (key == "ld_real_only") ld_real_only = parse_bool(value);
        else if (key == "noise_samples") noise_samples = static_cast<int>(parse_int(value));
        else throw ConfigError("unknown config key '" + key + "'");
    }

    void load(std::istream& in) {
        for (const auto& [k, v] : parse_kv_lines(in)) set(k, v);
    }

    void write(std::ostream& out) const {
        out << "block_size=" << block_size << '\n'
            << "learning_rate=" << format_double(learning_rate) << '\n'
            << "beta=" << format_double(beta) << '\n'
            << "gamma=" << format_double(gamma) << '\n'
            << "gen_steps_per_block=" << gen_steps_per_block << '\n'
            << "disc_steps_per_block=" << disc_steps_per_block << '\n'
            << "epochs=" << epochs << '\n'
            << "embed_dim=" << embed_dim << '\n'
            << "hidden=" << hidden << '\n'
            << "seed=" << seed << '\n'
            << "no_noise=" << (no_noise ? "true" : "false") << '\n'
            << "no_relrep=" << (no_relrep ? "true" : "false") << '\n'
            << "no_blockloss=" << (no_blockloss ? "true" : "false") << '\n'
            << "rms_decay=" << format_double(rms_decay) << '\n'
            << "rms_epsilon=" << format_double(rms_epsilon) << '\n'
            << "leaky_slope=" << format_double(leaky_slope) << '\n'
            << "bn_epsilon=" << format_double(bn_epsilon) << '\n'
            << "init_scheme=" << init_scheme << '\n'
            << "init_scale=" << format_double(init_scale) << '\n'
            << "rnn_rec_gain=" << format_double(rnn_rec_gain) << '\n'
            << "grad_clip=" << format_double(grad_clip) << '\n'
            << "encoder_hidden=" << encoder_hidden << '\n'
            << "adversarial_term=" << (adversarial_term ? "true" : "false") << '\n'
            << "ld_real_only=" << (ld_real_only ? "true" : "false") << '\n'
            << "noise_samples=" << noise_samples << '\n';
    }

    std::string to_text() const {
        std::ostringstream os;
        write(os);
        return os.str();
    }

    void validate() const {
        if (block_size < 1) throw ConfigError("block_size must be >= 1");
        if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
        if (beta < 0 || gamma < 0) throw ConfigError("beta and gamma must be >= 0");
        if (gen_steps_per_block < 0 || disc_steps_per_block < 0)
            throw ConfigError("step counts must be >= 0");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (embed_dim < 1 || hidden < 1) throw ConfigError("embed_dim and hidden must be >= 1");
        if (!(rms_decay > 0 && rms_decay < 1)) throw ConfigError("rms_decay must be in (0,1)");
        if (rms_epsilon <= 0 || bn_epsilon <= 0) throw ConfigError("epsilons must be positive");
        if (noise_samples < 0) throw ConfigError("noise_samples must be >= 0");
    }
};

}  // namespace amad
