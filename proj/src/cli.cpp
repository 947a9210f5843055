#include "good/cli.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <optional>

#include "CLI11.hpp"

#include "good/composites.hpp"
#include "good/errors.hpp"
#include "good/evalbench.hpp"
#include "good/runconfig.hpp"

namespace good {

namespace {

namespace fs = std::filesystem;

struct Options {
    std::string config;
    std::string out;
    std::string data;
    std::string checkpoint;
    std::string coefficients;
    std::string jsonl;
    std::string runs;
    std::string csv;
    std::string fault;
    std::optional<std::uint64_t> seed;
};

RunConfig load_config(const Options& o) {
    RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
    if (o.seed) {
        cfg.synth.seed = *o.seed;
        cfg.train.seed = *o.seed;
    }
    return cfg;
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
}

std::ofstream open_truncated(const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    return out;
}

std::vector<double> read_coefficients(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read coefficients " + path.string());
    }
    try {
        const auto j = nlohmann::json::parse(in);
        std::vector<double> q = j.at("coefficients").get<std::vector<double>>();
        check_simplex(q);
        return q;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("malformed coefficients file " + path.string() + ": " + e.what());
    } catch (const ArgumentError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_coefficients(const fs::path& path, const std::vector<double>& q) {
    open_truncated(path) << nlohmann::json{{"coefficients", q}}.dump() << '\n';
}

void print_metrics(std::ostream& out, const MetricsReport& r) {
    out << r.member << " seed " << r.seed << ": accuracy " << std::fixed << std::setprecision(4) << r.accuracy
        << " roc_auc " << r.roc_auc << std::defaultfloat << '\n';
}

std::optional<std::vector<double>> companion_for(const RunConfig& cfg) {
    if (cfg.train.variant != Variant::GoodLcPlus) {
        return std::nullopt;
    }
    if (cfg.coefficients.empty()) {
        throw ConfigError("variant GOOD_LC_PLUS needs 'coefficients' pointing at a GOOD_LC run's coefficients.json");
    }
    return read_coefficients(cfg.coefficients);
}

int cmd_generate(const Options& o, std::ostream& out) {
    const RunConfig cfg = load_config(o);
    cfg.synth.validate();
    const SyntheticDataset data = generate(cfg.synth);
    make_dir(o.out);
    write_dataset(data, o.out);
    save_run_config(cfg, fs::path(o.out) / "config.txt");
    out << (fs::path(o.out) / "manifest.json").string() << '\n';
    return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
    const RunConfig cfg = load_config(o);
    cfg.train.validate();
    const auto companion = companion_for(cfg);
    const LoadedDataset data = load_dataset(o.data);
    const fs::path dir = o.out;
    make_dir(dir);
    save_run_config(cfg, dir / "config.txt");

    const auto start = std::chrono::steady_clock::now();
    Trainer trainer(data.graph, cfg.train);
    trainer.run();
    ModelCheckpoint best = trainer.best();
    save_checkpoint(best, dir / "model.ckpt");
    {
        std::ofstream epochs = open_truncated(dir / "epochs.jsonl");
        for (const EpochRecord& e : trainer.history()) {
            epochs << to_json(e).dump() << '\n';
        }
    }
    if (cfg.train.variant == Variant::GoodLc && !cfg.train.uniform_coefficients) {
        write_coefficients(dir / "coefficients.json", best.model.learned_coefficients());
    }

    MetricsReport r = evaluate_checkpoint(best, data.graph, cfg.train.variant, companion);
    r.dataset = fs::path(o.data).filename().string();
    r.epochs_ran = trainer.epochs_ran();
    r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const EpochRecord& e : trainer.history()) {
        r.train_loss.push_back(e.train_loss);
        r.validation_loss.push_back(e.validation_loss);
        r.validation_auc.push_back(e.validation_auc);
    }
    open_truncated(dir / "metrics.jsonl") << to_json(r).dump() << '\n';
    out << "trained " << trainer.epochs_ran() << " epochs, best epoch " << trainer.best_epoch()
        << " (validation roc_auc " << std::fixed << std::setprecision(4) << trainer.best_validation_auc()
        << std::defaultfloat << ")\n";
    print_metrics(out, r);
    out << "checkpoint " << (dir / "model.ckpt").string() << '\n';
    return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
    ModelCheckpoint ckpt = load_checkpoint(o.checkpoint);
    std::optional<std::vector<double>> companion;
    Variant variant = ckpt.config.variant;
    if (!o.coefficients.empty()) {
        companion = read_coefficients(o.coefficients);
        variant = Variant::GoodLcPlus;
    } else if (variant == Variant::GoodLcPlus) {
        throw ConfigError("GOOD_LC_PLUS checkpoint needs --coefficients from a GOOD_LC run");
    }
    const LoadedDataset data = load_dataset(o.data);
    MetricsReport r = evaluate_checkpoint(ckpt, data.graph, variant, companion);
    r.dataset = fs::path(o.data).filename().string();
    print_metrics(out, r);
    if (!o.jsonl.empty()) {
        append_jsonl(o.jsonl, r);
    }
    return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
    const auto reports = check_composites(o.fault);
    std::vector<std::string> failed;
    for (const CompositeReport& r : reports) {
        const bool ok = r.result.max_rel_error < kGradCheckTolerance;
        out << std::left << std::setw(18) << r.name << std::right << std::scientific << std::setprecision(3)
            << r.result.max_rel_error << std::defaultfloat << "  " << std::setw(6) << r.result.coordinates
            << " coords  " << (ok ? "ok" : "FAILED") << '\n';
        if (!ok) {
            failed.push_back(r.name);
        }
    }
    if (!failed.empty()) {
        out << "gradient check failed:";
        for (const std::string& name : failed) {
            out << ' ' << name;
        }
        out << '\n';
        return kExitVerifyFailed;
    }
    out << "all " << reports.size() << " composites within " << kGradCheckTolerance << '\n';
    return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream& err) {
    const fs::path root = o.runs;
    if (!fs::is_directory(root)) {
        throw IoError(root.string() + " is not a directory");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && entry.path().filename() == "metrics.jsonl") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<MetricsReport> reports;
    std::vector<std::string> warnings;
    for (const fs::path& f : files) {
        auto rows = read_jsonl(f, warnings);
        reports.insert(reports.end(), rows.begin(), rows.end());
    }
    for (const std::string& w : warnings) {
        err << "warning: " << w << '\n';
    }
    if (reports.empty()) {
        throw IoError("no metrics rows under " + root.string());
    }
    for (const MetricsReport& r : reports) {
        if (!report_consistent(r)) {
            err << "warning: " << r.member << " seed " << r.seed << " metrics disagree with its stored scores\n";
        }
    }
    const auto rows = summarize(reports);
    out << format_summary(rows);
    if (!o.csv.empty()) {
        open_truncated(o.csv) << summary_csv(rows);
    }
    return kExitOk;
}

int cmd_experiment(const Options& o, std::ostream& out, std::ostream& err) {
    RunConfig cfg = load_config(o);
    cfg.validate_experiment();
    const LoadedDataset data = load_dataset(o.data);
    const fs::path dir = o.out;
    make_dir(dir);
    save_run_config(cfg, dir / "config.txt");
    const fs::path jsonl = dir / "metrics.jsonl";
    open_truncated(jsonl);
    const auto result = run_experiment(data.graph, fs::path(o.data).filename().string(), cfg.suite, cfg.seeds,
                                       cfg.train, jsonl);
    for (const MetricsReport& r : result.reports) {
        if (!r.ok()) {
            err << "warning: " << r.member << " seed " << r.seed << " failed: " << r.error << '\n';
        }
    }
    const auto rows = summarize(result.reports);
    const std::string table = format_summary(rows);
    open_truncated(dir / "summary.txt") << table;
    out << table;
    return kExitOk;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const StrategyError*>(&e) ||
        dynamic_cast<const GenerationError*>(&e) || dynamic_cast<const ArgumentError*>(&e)) {
        return kExitConfig;
    }
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
        dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const LookupError*>(&e)) {
        return kExitIo;
    }
    if (dynamic_cast<const DivergenceError*>(&e)) {
        return kExitDivergence;
    }
    if (dynamic_cast<const IncompatibleError*>(&e)) {
        return kExitIncompatible;
    }
    return kExitVerifyFailed;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Out-of-domain multi-relational link prediction", "good"};
    app.require_subcommand(1);

    auto* generate = app.add_subcommand("generate", "Generate a synthetic dataset");
    generate->add_option("--config", o.config, "Config file")->check(CLI::ExistingFile);
    generate->add_option("--out", o.out, "Output dataset directory")->required();
    generate->add_option("--seed", o.seed, "Override the config seed");

    auto* train = app.add_subcommand("train", "Train a model");
    train->add_option("--config", o.config, "Config file")->check(CLI::ExistingFile);
    train->add_option("--data", o.data, "Dataset directory")->required();
    train->add_option("--out", o.out, "Run output directory")->required();
    train->add_option("--seed", o.seed, "Override the config seed");

    auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on the test window");
    evaluate->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
    evaluate->add_option("--data", o.data, "Dataset directory")->required();
    evaluate->add_option("--coefficients", o.coefficients, "GOOD_LC coefficients (runs GOOD_LC_PLUS)");
    evaluate->add_option("--jsonl", o.jsonl, "Append the metrics row to this file");

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every model composite");
    gradcheck->add_option("--inject-fault", o.fault)->group("");

    auto* report = app.add_subcommand("report", "Summarize metrics.jsonl files");
    report->add_option("--runs", o.runs, "Directory searched for metrics.jsonl")->required();
    report->add_option("--csv", o.csv, "Also write the summary as CSV");

    auto* experiment = app.add_subcommand("experiment", "Train and evaluate a suite over seeds");
    experiment->add_option("--config", o.config, "Config file")->check(CLI::ExistingFile);
    experiment->add_option("--data", o.data, "Dataset directory")->required();
    experiment->add_option("--out", o.out, "Output directory")->required();
    experiment->add_option("--seed", o.seed, "Override the config seed");

    std::vector<std::string> argv_storage{"good"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const std::string& a : argv_storage) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        if (code == 0) {
            return kExitOk;
        }
        const bool missing_file = e.what() && std::string(e.what()).find("File does not exist") != std::string::npos;
        return missing_file ? kExitIo : kExitConfig;
    }

    try {
        if (generate->parsed()) {
            return cmd_generate(o, out);
        }
        if (train->parsed()) {
            return cmd_train(o, out);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(o, out);
        }
        if (gradcheck->parsed()) {
            return cmd_gradcheck(o, out);
        }
        if (report->parsed()) {
            return cmd_report(o, out, err);
        }
        if (experiment->parsed()) {
            return cmd_experiment(o, out, err);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kExitConfig;
}

} // namespace good
