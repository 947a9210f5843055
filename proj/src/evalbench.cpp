#include "good/evalbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "good/errors.hpp"
#include "good/synth.hpp"

namespace good {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
    return s;
}

MetricsReport blank_report(Member m, const TrainConfig& cfg) {
    MetricsReport r;
    r.member = to_string(m);
    r.seed = cfg.seed;
    r.config_hash = config_hash(cfg);
    return r;
}

void copy_history(MetricsReport& r, std::span<const EpochRecord> history) {
    for (const EpochRecord& e : history) {
        r.train_loss.push_back(e.train_loss);
        r.validation_loss.push_back(e.validation_loss);
        r.validation_auc.push_back(e.validation_auc);
    }
}

// A trained member and its report; the checkpoint is kept for GOOD_LC_PLUS.
struct TrainedMember {
    MetricsReport report;
    std::optional<ModelCheckpoint> checkpoint;
};

TrainedMember train_member(const MultiRelGraph& graph, Member m, TrainConfig cfg) {
    switch (m) {
    case Member::Good:
        cfg.variant = Variant::Good;
        break;
    case Member::GoodLc:
        cfg.variant = Variant::GoodLc;
        break;
    case Member::Ablated:
        cfg.variant = Variant::Good;
        cfg.uniform_coefficients = true;
        break;
    case Member::Siso:
        cfg.variant = Variant::Good;
        cfg.in_domain = true;
        break;
    case Member::GoodLcPlus:
        throw ArgumentError("GOOD_LC_PLUS is assembled from GOOD and GOOD_LC runs");
    }
    MetricsReport r = blank_report(m, cfg);
    const auto start = Clock::now();
    Trainer trainer(graph, cfg);
    trainer.run();
    ModelCheckpoint best = trainer.best();
    const auto scored = infer(best, graph, cfg.variant);
    r.wall_clock_s = seconds_since(start);
    r.coefficients = inference_mixture(best, cfg.variant, std::nullopt);
    r.epochs_ran = trainer.epochs_ran();
    r.best_epoch = trainer.best_epoch();
    copy_history(r, trainer.history());
    score_report(r, scored);
    return {std::move(r), std::move(best)};
}

} // namespace

std::string to_string(Member m) {
    switch (m) {
    case Member::Good:
        return "GOOD";
    case Member::GoodLc:
        return "GOOD_LC";
    case Member::GoodLcPlus:
        return "GOOD_LC_PLUS";
    case Member::Ablated:
        return "ABLATED";
    case Member::Siso:
        return "SISO";
    }
    return "?";
}

Member parse_member(const std::string& s) {
    const std::string u = upper(s);
    for (Member m : {Member::Good, Member::GoodLc, Member::GoodLcPlus, Member::Ablated, Member::Siso}) {
        if (u == to_string(m)) {
            return m;
        }
    }
    if (u == "GOOD_LC+") {
        return Member::GoodLcPlus;
    }
    throw ConfigError("unknown suite member '" + s + "' (expected GOOD, GOOD_LC, GOOD_LC_PLUS, ABLATED or SISO)");
}

std::vector<Member> default_suite() {
    return {Member::Good, Member::GoodLc, Member::GoodLcPlus, Member::Ablated, Member::Siso};
}

nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json j{
        {"dataset", r.dataset},
        {"member", r.member},
        {"seed", r.seed},
        {"accuracy", r.accuracy},
        {"roc_auc", r.roc_auc},
        {"test_loss", r.test_loss},
        {"epochs_ran", r.epochs_ran},
        {"best_epoch", r.best_epoch},
        {"wall_clock_s", r.wall_clock_s},
        {"config_hash", r.config_hash},
        {"coefficients", r.coefficients},
        {"train_loss", r.train_loss},
        {"validation_loss", r.validation_loss},
        {"validation_auc", r.validation_auc},
        {"scores", r.scores},
        {"labels", r.labels},
    };
    if (!r.ok()) {
        j["error"] = r.error;
    }
    return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
    try {
        MetricsReport r;
        r.dataset = j.value("dataset", std::string());
        r.member = j.at("member").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.accuracy = j.at("accuracy").get<double>();
        r.roc_auc = j.at("roc_auc").get<double>();
        r.epochs_ran = j.at("epochs_ran").get<std::size_t>();
        r.wall_clock_s = j.at("wall_clock_s").get<double>();
        r.config_hash = j.at("config_hash").get<std::string>();
        r.test_loss = j.value("test_loss", 0.0);
        r.best_epoch = j.value("best_epoch", std::size_t{0});
        r.coefficients = j.value("coefficients", std::vector<double>{});
        r.train_loss = j.value("train_loss", std::vector<double>{});
        r.validation_loss = j.value("validation_loss", std::vector<double>{});
        r.validation_auc = j.value("validation_auc", std::vector<double>{});
        r.scores = j.value("scores", std::vector<double>{});
        r.labels = j.value("labels", std::vector<double>{});
        r.error = j.value("error", std::string());
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed metrics row: ") + e.what());
    }
}

std::string config_hash(const TrainConfig& cfg) {
    // FNV-1a over the canonical JSON text
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_json(cfg).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void score_report(MetricsReport& r, std::span<const ScoredPairs> scored) {
    r.scores.clear();
    r.labels.clear();
    std::vector<std::vector<double>> per_scores;
    std::vector<std::vector<double>> per_labels;
    for (const ScoredPairs& s : scored) {
        r.scores.insert(r.scores.end(), s.scores.begin(), s.scores.end());
        r.labels.insert(r.labels.end(), s.labels.begin(), s.labels.end());
        per_scores.push_back(s.scores);
        per_labels.push_back(s.labels);
    }
    r.accuracy = accuracy(r.scores, r.labels);
    r.roc_auc = roc_auc(r.scores, r.labels);
    r.test_loss = link_loss(per_scores, per_labels);
}

bool report_consistent(const MetricsReport& r) {
    if (!r.ok()) {
        return true;
    }
    try {
        return accuracy(r.scores, r.labels) == r.accuracy && roc_auc(r.scores, r.labels) == r.roc_auc;
    } catch (const ArgumentError&) {
        return false;
    }
}

MetricsReport evaluate_checkpoint(ModelCheckpoint& ckpt, const MultiRelGraph& graph, Variant variant,
                                  const std::optional<std::vector<double>>& companion) {
    MetricsReport r;
    r.member = to_string(variant);
    if (ckpt.config.uniform_coefficients) {
        r.member = to_string(Member::Ablated);
    } else if (ckpt.config.in_domain) {
        r.member = to_string(Member::Siso);
    }
    r.seed = ckpt.config.seed;
    r.config_hash = config_hash(ckpt.config);
    r.best_epoch = ckpt.epoch;
    const auto start = Clock::now();
    const auto scored = infer(ckpt, graph, variant, companion);
    r.wall_clock_s = seconds_since(start);
    r.coefficients = inference_mixture(ckpt, variant, companion);
    score_report(r, scored);
    return r;
}

MetricsReport run_siso_baseline(const MultiRelGraph& graph, ContextId target, TrainConfig cfg) {
    const auto targets = graph.meta().target_contexts();
    if (std::find(targets.begin(), targets.end(), target) == targets.end()) {
        throw ConfigError(context_token(target) + " is not a target context");
    }
    if (!graph.meta().is_time_dependent(target)) {
        throw ConfigError("in-domain baseline needs history; " + context_token(target) + " is static");
    }
    TrainConfig siso = cfg;
    siso.in_domain = true;
    siso.variant = Variant::Good;
    siso.uniform_coefficients = false;
    MetricsReport r = blank_report(Member::Siso, siso);
    const auto start = Clock::now();
    Trainer trainer(graph, siso);
    trainer.run();
    ModelCheckpoint best = trainer.best();
    auto scored = infer(best, graph, Variant::Good);
    std::erase_if(scored, [&](const ScoredPairs& s) { return s.context != target; });
    r.wall_clock_s = seconds_since(start);
    r.coefficients = inference_mixture(best, Variant::Good, std::nullopt);
    r.epochs_ran = trainer.epochs_ran();
    r.best_epoch = trainer.best_epoch();
    copy_history(r, trainer.history());
    score_report(r, scored);
    return r;
}

MetricsReport run_ablation(const MultiRelGraph& graph, TrainConfig cfg) {
    return train_member(graph, Member::Ablated, std::move(cfg)).report;
}

ExperimentResult run_experiment(const MultiRelGraph& graph, const std::string& dataset, std::span<const Member> suite,
                                std::span<const std::uint64_t> seeds, const TrainConfig& base,
                                const std::optional<std::filesystem::path>& jsonl) {
    if (suite.empty()) {
        throw ConfigError("experiment suite is empty");
    }
    if (seeds.empty()) {
        throw ConfigError("experiment needs at least one seed");
    }
    base.validate();
    const auto wants = [&](Member m) { return std::find(suite.begin(), suite.end(), m) != suite.end(); };
    const bool need_good = wants(Member::Good) || wants(Member::GoodLcPlus);
    const bool need_lc = wants(Member::GoodLc) || wants(Member::GoodLcPlus);
    const auto targets = graph.meta().target_contexts();

    ExperimentResult out;
    const auto emit = [&](MetricsReport r) {
        r.dataset = dataset;
        if (jsonl) {
            append_jsonl(*jsonl, r);
        }
        out.reports.push_back(std::move(r));
    };
    const auto attempt = [&](Member m, TrainConfig cfg) -> TrainedMember {
        cfg.variant = m == Member::GoodLc ? Variant::GoodLc : Variant::Good;
        cfg.uniform_coefficients = m == Member::Ablated;
        cfg.in_domain = m == Member::Siso;
        try {
            if (m == Member::Siso) {
                return {run_siso_baseline(graph, targets.front(), cfg), std::nullopt};
            }
            return train_member(graph, m, cfg);
        } catch (const Error& e) {
            MetricsReport r = blank_report(m, cfg);
            r.error = e.what();
            return {std::move(r), std::nullopt};
        }
    };

    for (std::uint64_t seed : seeds) {
        TrainConfig cfg = base;
        cfg.seed = seed;
        std::optional<TrainedMember> good;
        std::optional<TrainedMember> lc;
        if (need_good) {
            good = attempt(Member::Good, cfg);
        }
        if (need_lc) {
            lc = attempt(Member::GoodLc, cfg);
        }
        for (Member m : suite) {
            switch (m) {
            case Member::Good:
                emit(good->report);
                break;
            case Member::GoodLc:
                emit(lc->report);
                break;
            case Member::GoodLcPlus: {
                TrainConfig plus_cfg = cfg;
                MetricsReport r = blank_report(Member::GoodLcPlus, plus_cfg);
                if (!good->checkpoint || !lc->checkpoint) {
                    r.error = "GOOD_LC_PLUS needs successful GOOD and GOOD_LC runs for this seed";
                } else {
                    try {
                        ModelCheckpoint weights = *good->checkpoint;
                        const std::vector<double> learned = lc->checkpoint->model.learned_coefficients();
                        r = evaluate_checkpoint(weights, graph, Variant::GoodLcPlus, learned);
                        r.member = to_string(Member::GoodLcPlus);
                        r.config_hash = config_hash(plus_cfg);
                        r.epochs_ran = good->report.epochs_ran;
                        r.best_epoch = good->report.best_epoch;
                        r.train_loss = good->report.train_loss;
                        r.validation_loss = good->report.validation_loss;
                        r.validation_auc = good->report.validation_auc;
                    } catch (const Error& e) {
                        r.error = e.what();
                    }
                }
                emit(std::move(r));
                break;
            }
            case Member::Ablated:
            case Member::Siso:
                emit(attempt(m, cfg).report);
                break;
            }
        }
    }
    return out;
}

ExperimentResult run_experiment(const std::filesystem::path& dataset_dir, std::span<const Member> suite,
                                std::span<const std::uint64_t> seeds, const TrainConfig& base,
                                const std::optional<std::filesystem::path>& jsonl) {
    const LoadedDataset data = load_dataset(dataset_dir);
    return run_experiment(data.graph, dataset_dir.filename().string(), suite, seeds, base, jsonl);
}

void append_jsonl(const std::filesystem::path& path, const MetricsReport& r) {
    std::ofstream out(path, std::ios::app);
    if (!out) {
        throw IoError("cannot append to " + path.string());
    }
    out << to_json(r).dump() << '\n';
    if (!out) {
        throw IoError("write to " + path.string() + " failed");
    }
}

std::vector<MetricsReport> read_jsonl(const std::filesystem::path& path, std::vector<std::string>& warnings) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    std::vector<MetricsReport> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            out.push_back(report_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            warnings.push_back(path.string() + ":" + std::to_string(number) + ": skipped malformed row (" +
                               e.what() + ")");
        }
    }
    return out;
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) {
        throw ArgumentError("quantile of an empty sample");
    }
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<SummaryRow> summarize(std::span<const MetricsReport> reports) {
    std::vector<std::string> order;
    for (const MetricsReport& r : reports) {
        if (std::find(order.begin(), order.end(), r.member) == order.end()) {
            order.push_back(r.member);
        }
    }
    std::vector<SummaryRow> rows;
    for (const std::string& member : order) {
        SummaryRow row;
        row.member = member;
        std::vector<double> acc;
        std::vector<double> auc;
        for (const MetricsReport& r : reports) {
            if (r.member != member) {
                continue;
            }
            ++row.runs;
            if (!r.ok()) {
                ++row.failures;
                continue;
            }
            acc.push_back(r.accuracy);
            auc.push_back(r.roc_auc);
        }
        if (!acc.empty()) {
            row.accuracy_median = quantile(acc, 0.5);
            row.accuracy_iqr = quantile(acc, 0.75) - quantile(acc, 0.25);
            row.roc_auc_median = quantile(auc, 0.5);
            row.roc_auc_iqr = quantile(auc, 0.75) - quantile(auc, 0.25);
        } else {
            row.accuracy_median = row.accuracy_iqr = row.roc_auc_median = row.roc_auc_iqr = std::nan("");
        }
        rows.push_back(row);
    }
    return rows;
}

std::string format_summary(std::span<const SummaryRow> rows) {
    std::size_t width = 6;
    for (const SummaryRow& r : rows) {
        width = std::max(width, r.member.size());
    }
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(width)) << "Member" << std::right << std::setw(6) << "Runs"
       << std::setw(8) << "Failed" << std::setw(18) << "Accuracy % (IQR)" << std::setw(20) << "ROC-AUC (IQR)" << '\n';
    os << std::string(width + 52, '-') << '\n';
    for (const SummaryRow& r : rows) {
        std::ostringstream acc;
        std::ostringstream auc;
        acc << std::fixed << std::setprecision(2) << 100.0 * r.accuracy_median << " (" << 100.0 * r.accuracy_iqr
            << ")";
        auc << std::fixed << std::setprecision(4) << r.roc_auc_median << " (" << r.roc_auc_iqr << ")";
        os << std::left << std::setw(static_cast<int>(width)) << r.member << std::right << std::setw(6) << r.runs
           << std::setw(8) << r.failures << std::setw(18) << acc.str() << std::setw(20) << auc.str() << '\n';
    }
    return os.str();
}

std::string summary_csv(std::span<const SummaryRow> rows) {
    std::ostringstream os;
    os << "member,runs,failures,accuracy_median,accuracy_iqr,roc_auc_median,roc_auc_iqr\n";
    os << std::setprecision(17);
    for (const SummaryRow& r : rows) {
        os << r.member << ',' << r.runs << ',' << r.failures << ',' << r.accuracy_median << ',' << r.accuracy_iqr
           << ',' << r.roc_auc_median << ',' << r.roc_auc_iqr << '\n';
    }
    return os.str();
}

} // namespace good
