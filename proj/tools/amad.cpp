// amad: streaming two-resolution anomaly detection on categorical sequences.
// Subcommands: gen-data, train, score, eval, sweep. Every command echoes its
// effective configuration into the output directory so a run can be
// reproduced from its artifacts alone.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "amad/config.hpp"
#include "amad/data.hpp"
#include "amad/metrics.hpp"
#include "amad/model.hpp"
#include "amad/scoring.hpp"
#include "amad/training.hpp"

namespace fs = std::filesystem;
using namespace amad;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitEval = 4;

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string());
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    f << text;
}

/// Resolve --data to a concrete csv plus (when present) its manifest.
struct ResolvedData {
    fs::path csv;
    std::optional<DatasetManifest> manifest;
};

ResolvedData resolve_data(const fs::path& path, const std::string& default_name) {
    ResolvedData r;
    if (fs::is_directory(path)) {
        r.csv = path / default_name;
    } else {
        r.csv = path;
    }
    if (!fs::exists(r.csv)) throw DataError("data file not found: " + r.csv.string());
    const fs::path manifest = r.csv.parent_path() / "manifest.txt";
    if (fs::exists(manifest)) {
        std::ifstream f(manifest);
        if (!f) throw DataError("cannot read " + manifest.string());
        r.manifest = DatasetManifest::read(f);
    }
    return r;
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenDataArgs {
    std::string recipe = "synthetic";
    std::string out;
    std::uint64_t seed = 1;
    int periods = 220;
    int period = 50;
    double noise_frac = 0.10;
    int train_count = 9000;
    int anomaly_count = 1000;
    std::string anomaly_modes = "random_ids,copy_train";
};

int cmd_gen_data(const GenDataArgs& a) {
    if (a.recipe != "synthetic") throw ConfigError("unknown recipe '" + a.recipe + "'");
    SyntheticParams params;
    params.n_periods = a.periods;
    params.period = a.period;
    params.noise_frac = a.noise_frac;

    std::vector<AnomalyMode> modes;
    for (const std::string& tok : split_line(a.anomaly_modes, ','))
        if (!trim(tok).empty()) modes.push_back(parse_anomaly_mode(trim(tok)));
    if (modes.empty()) throw ConfigError("no anomaly modes given");

    auto data = generate_synthetic(params, a.seed);
    auto [train, test] = split_sequential(data, a.train_count);
    auto injected = inject_anomalies(test, train, modes, a.anomaly_count,
                                     SyntheticParams::dimension, a.seed);

    DatasetManifest m;
    m.recipe = a.recipe;
    m.seed = a.seed;
    m.dimension = SyntheticParams::dimension;
    m.attribute_count = SyntheticParams::attribute_count;
    m.normal_count = data.size() - a.anomaly_count;
    m.anomaly_count = a.anomaly_count;
    m.train_count = train.size();
    m.test_count = injected.size();
    m.periods = a.periods;
    m.period = a.period;
    m.noise_frac = a.noise_frac;

    const fs::path out(a.out);
    ensure_dir(out);
    write_dataset_file(out / "train.csv", train);
    write_dataset_file(out / "test.csv", injected);
    {
        std::ofstream f(out / "manifest.txt");
        if (!f) throw DataError("cannot write manifest");
        m.write(f);
    }
    std::ostringstream echo;
    echo << "command=gen-data\n"
         << "recipe=" << a.recipe << '\n'
         << "seed=" << a.seed << '\n'
         << "periods=" << a.periods << '\n'
         << "period=" << a.period << '\n'
         << "noise_frac=" << format_double(a.noise_frac) << '\n'
         << "train_count=" << a.train_count << '\n'
         << "anomaly_count=" << a.anomaly_count << '\n'
         << "anomaly_modes=" << a.anomaly_modes << '\n';
    write_text_file(out / "config.txt", echo.str());

    std::cout << "generated " << data.size() << " instances (dimension "
              << SyntheticParams::dimension << ", " << SyntheticParams::attribute_count
              << " attributes)\n"
              << "train " << train.size() << " | test " << injected.size() << " ("
              << a.anomaly_count << " anomalous)\n"
              << "wrote " << (out / "train.csv").string() << ", "
              << (out / "test.csv").string() << ", " << (out / "manifest.txt").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string out;
    std::string config_file;
    std::string resume;
    std::size_t max_blocks = 0;  // 0: no cap
    std::vector<std::pair<std::string, std::string>> overrides;
    bool any_config_flag = false;
};

int cmd_train(const TrainArgs& a) {
    const fs::path out(a.out);
    ensure_dir(out);

    Trainer trainer = [&] {
        if (!a.resume.empty()) {
            if (a.any_config_flag || !a.config_file.empty())
                throw ConfigError("--resume uses the checkpoint's config; drop the overrides");
            return load_checkpoint_file(a.resume);
        }
        TrainConfig cfg;
        if (!a.config_file.empty()) {
            std::ifstream f(a.config_file);
            if (!f) throw ConfigError("cannot read config file " + a.config_file);
            cfg.load(f);
        }
        for (const auto& [k, v] : a.overrides) cfg.set(k, v);
        cfg.validate();

        auto resolved = resolve_data(a.data, "train.csv");
        const int declared = resolved.manifest ? resolved.manifest->dimension : 0;
        auto loaded = load_categorical_csv_file(resolved.csv, CsvSchema::dataset(), declared);
        if (loaded.instances.empty()) throw DataError("training data is empty");

        Model model = Model::init(loaded.dimension, cfg, RngStream(cfg.seed).fork("init"));
        return Trainer(std::move(model), cfg);
    }();

    auto resolved = resolve_data(a.data, "train.csv");
    auto loaded = load_categorical_csv_file(resolved.csv, CsvSchema::dataset(),
                                            trainer.model().dimension);
    auto blocks = blockify(loaded.instances, trainer.config().block_size);

    const std::size_t cap = a.max_blocks > 0 ? a.max_blocks
                                             : std::numeric_limits<std::size_t>::max();
    const std::size_t done = trainer.run(blocks, cap);

    save_checkpoint_file(out / "checkpoint.txt", trainer);
    {
        const fs::path log_path = out / "train_log.csv";
        const bool append = !a.resume.empty() && fs::exists(log_path);
        std::ofstream f(log_path, append ? std::ios::app : std::ios::out);
        if (!f) throw DataError("cannot write train log");
        write_train_log(f, trainer.log(), !append);
    }
    {
        std::ostringstream echo;
        echo << "command=train\n"
             << "data=" << a.data << '\n'
             << "dimension=" << trainer.model().dimension << '\n';
        if (!a.resume.empty()) echo << "resume=" << a.resume << '\n';
        if (a.max_blocks > 0) echo << "max_blocks=" << a.max_blocks << '\n';
        echo << trainer.config().to_text();
        write_text_file(out / "config.txt", echo.str());
    }

    std::cout << "trained " << done << " block(s); epoch " << trainer.epoch() << "/"
              << trainer.config().epochs
              << (trainer.finished() ? " (finished)" : " (stopped early)") << '\n'
              << "checkpoint: " << (out / "checkpoint.txt").string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreArgs {
    std::string checkpoint;
    std::string data;
    std::string out;
    int block_size = 0;  // 0: use the checkpoint's
    std::optional<double> beta, gamma;
    bool no_blockloss = false;
    bool ld_real_only = false;
    int noise_samples = -1;  // <0: use the checkpoint's
    bool zero_memory = false;
};

int cmd_score(const ScoreArgs& a) {
    Trainer trainer = load_checkpoint_file(a.checkpoint);
    TrainConfig cfg = trainer.config();
    if (a.block_size > 0) cfg.block_size = a.block_size;
    if (a.beta) cfg.beta = *a.beta;
    if (a.gamma) cfg.gamma = *a.gamma;
    if (a.no_blockloss) cfg.no_blockloss = true;
    if (a.ld_real_only) cfg.ld_real_only = true;
    if (a.noise_samples >= 0) cfg.noise_samples = a.noise_samples;
    cfg.validate();

    auto resolved = resolve_data(a.data, "test.csv");
    if (resolved.manifest && resolved.manifest->dimension != trainer.model().dimension)
        throw DataError("checkpoint dimension " + std::to_string(trainer.model().dimension) +
                        " does not match dataset dimension " +
                        std::to_string(resolved.manifest->dimension));
    auto loaded = load_categorical_csv_file(resolved.csv, CsvSchema::dataset(),
                                            trainer.model().dimension);
    if (loaded.instances.empty()) throw DataError("test data is empty");

    const Tensor initial_memory = a.zero_memory
                                      ? Tensor::zeros({1, (std::size_t)trainer.model().hidden})
                                      : trainer.memory();
    auto records =
        score_stream(trainer.model(), cfg, loaded.instances, cfg.block_size, initial_memory);

    const fs::path out(a.out);
    ensure_dir(out);
    write_scores_file(out / "scores.csv", records);
    {
        std::ostringstream echo;
        echo << "command=score\n"
             << "checkpoint=" << a.checkpoint << '\n'
             << "data=" << a.data << '\n'
             << cfg.to_text();
        write_text_file(out / "config.txt", echo.str());
    }
    std::size_t blocks = 0;
    for (const auto& r : records)
        if (r.level == ScoreLevel::block) ++blocks;
    std::cout << "scored " << loaded.instances.size() << " instances in " << blocks
              << " block(s) of size " << cfg.block_size << '\n'
              << "scores: " << (out / "scores.csv").string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string scores;
    std::string out;
    std::string level = "both";
};

int cmd_eval(const EvalArgs& a) {
    auto records = read_scores_file(a.scores);
    std::ostringstream report;
    bool any = false;
    for (const auto& [name, level] :
         {std::pair{std::string("instance"), ScoreLevel::instance},
          std::pair{std::string("block"), ScoreLevel::block}}) {
        if (a.level != "both" && a.level != name) continue;
        auto items = scored_items(records, level);
        if (items.empty()) {
            if (a.level == name) throw EvalError("no labeled " + name + " scores");
            continue;
        }
        auto r = evaluate(items);
        r.write(report, name + ".");
        any = true;
    }
    if (!any) throw EvalError("no labeled scores to evaluate");

    const fs::path out(a.out);
    ensure_dir(out);
    write_text_file(out / "report.txt", report.str());
    {
        std::ostringstream echo;
        echo << "command=eval\nscores=" << a.scores << "\nlevel=" << a.level << '\n';
        write_text_file(out / "config.txt", echo.str());
    }
    std::cout << report.str();
    return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepArgs {
    std::string checkpoint;
    std::string data;
    std::string out;
    std::string sizes = "1,10,50,100,200";
};

int cmd_sweep(const SweepArgs& a) {
    Trainer trainer = load_checkpoint_file(a.checkpoint);
    auto resolved = resolve_data(a.data, "test.csv");
    if (resolved.manifest && resolved.manifest->dimension != trainer.model().dimension)
        throw DataError("checkpoint dimension does not match dataset dimension");
    auto loaded = load_categorical_csv_file(resolved.csv, CsvSchema::dataset(),
                                            trainer.model().dimension);

    std::vector<int> sizes;
    for (const std::string& tok : split_line(a.sizes, ','))
        if (!trim(tok).empty()) sizes.push_back(static_cast<int>(parse_int(trim(tok))));
    if (sizes.empty()) throw ConfigError("no block sizes given");

    std::ostringstream csv;
    csv << "block_size,auroc\n";
    for (int size : sizes) {
        TrainConfig cfg = trainer.config();
        cfg.block_size = size;
        auto records =
            score_stream(trainer.model(), cfg, loaded.instances, size, trainer.memory());
        auto items = scored_items(records, ScoreLevel::block);
        csv << size << ',' << format_double(auroc(items)) << '\n';
    }

    const fs::path out(a.out);
    ensure_dir(out);
    write_text_file(out / "sweep.csv", csv.str());
    {
        std::ostringstream echo;
        echo << "command=sweep\ncheckpoint=" << a.checkpoint << "\ndata=" << a.data
             << "\nsizes=" << a.sizes << '\n';
        write_text_file(out / "config.txt", echo.str());
    }
    std::cout << csv.str();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial multiscale anomaly detection on categorical streams"};
    app.require_subcommand(1);

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "generate a dataset (train/test/manifest)");
    gen_cmd->add_option("recipe", gen.recipe, "dataset recipe")->default_val("synthetic");
    gen_cmd->add_option("--out", gen.out, "output directory")->required();
    gen_cmd->add_option("--seed", gen.seed);
    gen_cmd->add_option("--periods", gen.periods);
    gen_cmd->add_option("--period", gen.period);
    gen_cmd->add_option("--noise-frac", gen.noise_frac);
    gen_cmd->add_option("--train-count", gen.train_count);
    gen_cmd->add_option("--anomaly-count", gen.anomaly_count);
    gen_cmd->add_option("--anomaly-modes", gen.anomaly_modes,
                        "comma list: random_ids,copy_train,delete_attribute,replace_attribute");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "train on a stream of normal data");
    train_cmd->add_option("--data", tr.data, "train.csv or its directory")->required();
    train_cmd->add_option("--out", tr.out, "output directory")->required();
    train_cmd->add_option("--config", tr.config_file, "key=value config file");
    train_cmd->add_option("--resume", tr.resume, "checkpoint to continue from");
    train_cmd->add_option("--max-blocks", tr.max_blocks, "stop after this many blocks");

    // config overrides; recorded in declaration order
    struct FlagSpec {
        const char* cli;
        const char* key;
        bool is_flag;
    };
    const std::vector<FlagSpec> specs = {
        {"--block-size", "block_size", false},
        {"--lr", "learning_rate", false},
        {"--beta", "beta", false},
        {"--gamma", "gamma", false},
        {"--gen-steps", "gen_steps_per_block", false},
        {"--disc-steps", "disc_steps_per_block", false},
        {"--epochs", "epochs", false},
        {"--embed-dim", "embed_dim", false},
        {"--hidden", "hidden", false},
        {"--seed", "seed", false},
        {"--rms-decay", "rms_decay", false},
        {"--leaky-slope", "leaky_slope", false},
        {"--init-scale", "init_scale", false},
        {"--rnn-rec-gain", "rnn_rec_gain", false},
        {"--grad-clip", "grad_clip", false},
        {"--encoder-hidden", "encoder_hidden", false},
        {"--no-noise", "no_noise", true},
        {"--no-relrep", "no_relrep", true},
        {"--no-blockloss", "no_blockloss", true},
        {"--adversarial-term", "adversarial_term", true},
    };
    auto values = std::make_shared<std::vector<std::string>>(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        if (s.is_flag) {
            train_cmd->add_flag_callback(
                s.cli,
                [&tr, key = s.key] {
                    tr.overrides.emplace_back(key, "true");
                    tr.any_config_flag = true;
                });
        } else {
            train_cmd
                ->add_option_function<std::string>(
                    s.cli,
                    [&tr, key = s.key](const std::string& v) {
                        tr.overrides.emplace_back(key, v);
                        tr.any_config_flag = true;
                    })
                ->expected(1);
        }
    }

    ScoreArgs sc;
    auto* score_cmd = app.add_subcommand("score", "score a test stream with a checkpoint");
    score_cmd->add_option("--checkpoint", sc.checkpoint)->required();
    score_cmd->add_option("--data", sc.data, "test.csv or its directory")->required();
    score_cmd->add_option("--out", sc.out, "output directory")->required();
    score_cmd->add_option("--block-size", sc.block_size);
    double beta_val = 0, gamma_val = 0;
    score_cmd->add_option("--beta", beta_val)->each([&sc](const std::string& v) {
        sc.beta = parse_double(v);
    });
    score_cmd->add_option("--gamma", gamma_val)->each([&sc](const std::string& v) {
        sc.gamma = parse_double(v);
    });
    score_cmd->add_flag("--no-blockloss", sc.no_blockloss);
    score_cmd->add_flag("--ld-real-only", sc.ld_real_only);
    score_cmd->add_flag("--zero-memory", sc.zero_memory,
                        "start from a zero memory vector instead of the checkpoint's");
    score_cmd->add_option("--noise-samples", sc.noise_samples);

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "metrics from a score file");
    eval_cmd->add_option("--scores", ev.scores)->required();
    eval_cmd->add_option("--out", ev.out)->required();
    eval_cmd->add_option("--level", ev.level)->check(CLI::IsMember({"instance", "block", "both"}));

    SweepArgs sw;
    auto* sweep_cmd = app.add_subcommand("sweep", "block-level AUROC across block sizes");
    sweep_cmd->add_option("--checkpoint", sw.checkpoint)->required();
    sweep_cmd->add_option("--data", sw.data)->required();
    sweep_cmd->add_option("--out", sw.out)->required();
    sweep_cmd->add_option("--sizes", sw.sizes, "comma list of block sizes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (gen_cmd->parsed()) return cmd_gen_data(gen);
        if (train_cmd->parsed()) return cmd_train(tr);
        if (score_cmd->parsed()) return cmd_score(sc);
        if (eval_cmd->parsed()) return cmd_eval(ev);
        if (sweep_cmd->parsed()) return cmd_sweep(sw);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const EvalError& e) {
        std::cerr << "evaluation error: " << e.what() << '\n';
        return kExitEval;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitConfig;
}
