#include "good/trainer.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "good/errors.hpp"
#include "good/metrics.hpp"

namespace good {

using nlohmann::json;

// ---- optimizer ----------------------------------------------------------------

void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamConfig& cfg) {
    if (state.first_moment.empty()) {
        for (Parameter* p : params) {
            state.first_moment.emplace_back(p->value.rows(), p->value.cols());
            state.second_moment.emplace_back(p->value.rows(), p->value.cols());
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw DimensionError("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                             " parameters, got " + std::to_string(params.size()));
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        Matrix& m = state.first_moment[i];
        Matrix& v = state.second_moment[i];
        if (!p.grad.same_shape(p.value) || !m.same_shape(p.value)) {
            throw DimensionError("adam_step: shape mismatch for " + p.name + " " + p.value.shape_string());
        }
        auto w = p.value.data();
        auto g = p.grad.data();
        auto md = m.data();
        auto vd = v.data();
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double grad = g[k] + cfg.weight_decay * w[k];
            md[k] = cfg.beta1 * md[k] + (1.0 - cfg.beta1) * grad;
            vd[k] = cfg.beta2 * vd[k] + (1.0 - cfg.beta2) * grad * grad;
            const double m_hat = md[k] / c1;
            const double v_hat = vd[k] / c2;
            w[k] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

// ---- configuration --------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) {
        throw ConfigError("learning_rate must be positive");
    }
    if (!(weight_decay >= 0.0)) {
        throw ConfigError("weight_decay must be nonnegative");
    }
    if (epochs < 1) {
        throw ConfigError("epochs must be at least 1");
    }
    if (batch_size < 2) {
        throw ConfigError("batch_size must be at least 2");
    }
    if (!(dropout_rate >= 0.0) || dropout_rate >= 1.0) {
        throw ConfigError("dropout_rate must lie in [0, 1)");
    }
    if (hidden_dim == 0 || head_hidden == 0) {
        throw ConfigError("hidden_dim and head_hidden must be positive");
    }
    architecture().validate();
    if (!negatives.empty()) {
        (void)NegStrategy::parse(negatives);
    }
}

Architecture TrainConfig::architecture() const {
    Architecture a;
    a.blocks_per_step = schedule;
    std::size_t total = 0;
    for (std::size_t b : schedule) {
        total += b;
    }
    a.widths = widths.empty() ? Architecture::default_widths(hidden_dim, total) : widths;
    return a;
}

json to_json(const TrainConfig& c) {
    return json{
        {"variant", to_string(c.variant)},
        {"uniform_coefficients", c.uniform_coefficients},
        {"in_domain", c.in_domain},
        {"aggregator", to_string(c.aggregator)},
        {"learning_rate", c.learning_rate},
        {"weight_decay", c.weight_decay},
        {"epochs", c.epochs},
        {"patience", c.patience},
        {"batch_size", c.batch_size},
        {"dropout_rate", c.dropout_rate},
        {"schedule", Architecture::format_schedule(c.schedule)},
        {"widths", c.widths},
        {"hidden_dim", c.hidden_dim},
        {"head_hidden", c.head_hidden},
        {"negatives", c.negatives},
        {"seed", c.seed},
    };
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    try {
        c.variant = parse_variant(j.at("variant").get<std::string>());
        c.uniform_coefficients = j.at("uniform_coefficients").get<bool>();
        c.in_domain = j.at("in_domain").get<bool>();
        c.aggregator = parse_aggregator(j.at("aggregator").get<std::string>());
        c.learning_rate = j.at("learning_rate").get<double>();
        c.weight_decay = j.at("weight_decay").get<double>();
        c.epochs = j.at("epochs").get<std::size_t>();
        c.patience = j.at("patience").get<std::size_t>();
        c.batch_size = j.at("batch_size").get<std::size_t>();
        c.dropout_rate = j.at("dropout_rate").get<double>();
        c.schedule = Architecture::parse_schedule(j.at("schedule").get<std::string>());
        c.widths = j.at("widths").get<std::vector<std::size_t>>();
        c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
        c.head_hidden = j.at("head_hidden").get<std::size_t>();
        c.negatives = j.at("negatives").get<std::string>();
        c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed training configuration: ") + e.what());
    }
    return c;
}

NegStrategy resolve_strategy(const TrainConfig& cfg, const MultiRelGraph& graph) {
    if (!cfg.negatives.empty()) {
        return NegStrategy::parse(cfg.negatives);
    }
    // ground-truth negatives must exist in every snapshot that is sampled
    bool all_have = true;
    for (ContextId c : graph.meta().target_contexts()) {
        for (std::size_t t = 0; t < graph.meta().num_steps; ++t) {
            all_have = all_have && graph.edges_at(c, t).count(EdgeLabel::Negative) > 0;
        }
    }
    return NegStrategy::default_for(all_have);
}

// ---- evaluation pairs -------------------------------------------------------------

std::vector<PairSet> frozen_pairs(const MultiRelGraph& graph, std::span<const ContextId> targets, std::size_t step,
                                  const NegStrategy& strategy, std::uint64_t seed, std::uint64_t stream) {
    Rng rng(derive_seed(seed, stream));
    std::vector<PairSet> out;
    for (ContextId c : targets) {
        PairSet set;
        set.context = c;
        set.pairs = positive_edges(graph, c, TimeStep(step));
        if (set.pairs.empty()) {
            throw ConfigError("target context " + context_token(c) + " has no positive edges at " +
                              time_token(TimeStep(step)));
        }
        set.labels.assign(set.pairs.size(), 1.0);
        const auto negs = sample_negatives(graph, c, TimeStep(step), set.pairs.size(), strategy, rng);
        set.pairs.insert(set.pairs.end(), negs.begin(), negs.end());
        set.labels.resize(set.pairs.size(), 0.0);
        out.push_back(std::move(set));
    }
    return out;
}

// ---- binary container ---------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'G', 'O', 'O', 'D', 'C', 'K', 'P', 'T'};

struct Blocks {
    json index = json::array();
    std::vector<Matrix> mats;

    void add(const std::string& name, const Matrix& m) {
        index.push_back(json{{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
        mats.push_back(m);
    }
};

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) {
        bytes[i] = static_cast<unsigned char>(v >> (8 * i));
    }
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    }
    return v;
}

void write_container(const std::filesystem::path& path, json header, const Blocks& blocks) {
    header["blocks"] = blocks.index;
    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write checkpoint " + path.string());
    }
    out.write(kMagic, sizeof kMagic);
    write_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const Matrix& m : blocks.mats) {
        for (double v : m.data()) {
            write_u64(out, std::bit_cast<std::uint64_t>(v));
        }
    }
    if (!out) {
        throw IoError("failed writing checkpoint " + path.string());
    }
}

std::pair<json, std::vector<Matrix>> read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint " + path.string());
    }
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw ParseError(path.string() + " is not a checkpoint file");
    }
    const std::uint64_t len = read_u64(in);
    if (!in || len > (1ull << 32)) {
        throw ParseError("checkpoint " + path.string() + " has a corrupt header");
    }
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) {
        throw ParseError("checkpoint " + path.string() + " is truncated");
    }
    json header;
    try {
        header = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError("checkpoint " + path.string() + " has a corrupt header: " + e.what());
    }
    const int version = header.value("format_version", -1);
    if (version != kCheckpointFormatVersion) {
        throw IncompatibleError("checkpoint " + path.string() + " has format version " + std::to_string(version) +
                                ", expected " + std::to_string(kCheckpointFormatVersion));
    }
    std::vector<Matrix> mats;
    try {
        for (const json& b : header.at("blocks")) {
            Matrix m(b.at("rows").get<std::size_t>(), b.at("cols").get<std::size_t>());
            for (double& v : m.data()) {
                v = std::bit_cast<double>(read_u64(in));
            }
            if (!in) {
                throw ParseError("checkpoint " + path.string() + " is truncated");
            }
            mats.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        throw ParseError("checkpoint " + path.string() + " has a corrupt block index: " + e.what());
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw ParseError("checkpoint " + path.string() + " has trailing bytes");
    }
    return {std::move(header), std::move(mats)};
}

void add_model_blocks(Blocks& blocks, GoodModel& model, const std::string& prefix) {
    for (Parameter* p : model.parameters()) {
        blocks.add(prefix + p->name, p->value);
    }
    std::size_t i = 0;
    for (BatchNorm* bn : model.batch_norms()) {
        blocks.add(prefix + "bn" + std::to_string(i) + ".running_mean", bn->running_mean);
        blocks.add(prefix + "bn" + std::to_string(i) + ".running_var", bn->running_var);
        ++i;
    }
}

// Consumes blocks starting at `pos`, checking names and shapes.
void restore_model_blocks(GoodModel& model, const json& index, std::vector<Matrix>& mats, std::size_t& pos,
                          const std::string& prefix) {
    auto take = [&](const std::string& name, Matrix& dst) {
        if (pos >= mats.size()) {
            throw ParseError("checkpoint is missing block " + name);
        }
        const std::string stored = index.at(pos).at("name").get<std::string>();
        if (stored != name || !mats[pos].same_shape(dst)) {
            throw ParseError("checkpoint block " + std::to_string(pos) + " is " + stored + " " +
                             mats[pos].shape_string() + ", expected " + name + " " + dst.shape_string());
        }
        dst = std::move(mats[pos++]);
    };
    for (Parameter* p : model.parameters()) {
        take(prefix + p->name, p->value);
        p->grad = Matrix(p->value.rows(), p->value.cols());
    }
    std::size_t i = 0;
    for (BatchNorm* bn : model.batch_norms()) {
        take(prefix + "bn" + std::to_string(i) + ".running_mean", bn->running_mean);
        take(prefix + "bn" + std::to_string(i) + ".running_var", bn->running_var);
        ++i;
    }
}

json model_header(const ModelCheckpoint& ckpt) {
    return json{
        {"format_version", kCheckpointFormatVersion},
        {"kind", "model"},
        {"train_config", to_json(ckpt.config)},
        {"model", to_json(ckpt.model.spec())},
        {"epoch", ckpt.epoch},
        {"last_coefficients", ckpt.last_coefficients},
    };
}

} // namespace

json to_json(const EpochRecord& r) {
    return json{
        {"epoch", r.epoch},
        {"train_link_loss", r.train_link_loss},
        {"train_disentangle_loss", r.train_disentangle_loss},
        {"train_loss", r.train_loss},
        {"validation_loss", r.validation_loss},
        {"validation_auc", r.validation_auc},
        {"coefficients", r.coefficients},
    };
}

namespace {

EpochRecord epoch_record_from_json(const json& j) {
    EpochRecord r;
    r.epoch = j.at("epoch").get<std::size_t>();
    r.train_link_loss = j.at("train_link_loss").get<double>();
    r.train_disentangle_loss = j.at("train_disentangle_loss").get<double>();
    r.train_loss = j.at("train_loss").get<double>();
    r.validation_loss = j.at("validation_loss").get<double>();
    r.validation_auc = j.at("validation_auc").get<double>();
    r.coefficients = j.at("coefficients").get<std::vector<double>>();
    return r;
}

} // namespace

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
    Blocks blocks;
    add_model_blocks(blocks, const_cast<GoodModel&>(ckpt.model), "");
    write_container(path, model_header(ckpt), blocks);
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
    auto [header, mats] = read_container(path);
    try {
        if (header.at("kind").get<std::string>() != "model") {
            throw IncompatibleError(path.string() + " holds a training state, not a model checkpoint");
        }
        ModelCheckpoint ckpt;
        ckpt.config = train_config_from_json(header.at("train_config"));
        Rng dummy(0);
        ckpt.model = GoodModel(model_spec_from_json(header.at("model")), dummy);
        ckpt.epoch = header.at("epoch").get<std::size_t>();
        ckpt.last_coefficients = header.at("last_coefficients").get<std::vector<double>>();
        std::size_t pos = 0;
        restore_model_blocks(ckpt.model, header.at("blocks"), mats, pos, "");
        if (pos != mats.size()) {
            throw ParseError("checkpoint " + path.string() + " has unexpected extra blocks");
        }
        return ckpt;
    } catch (const json::exception& e) {
        throw ParseError("checkpoint " + path.string() + " has a corrupt header: " + e.what());
    }
}

// ---- training -------------------------------------------------------------------

ModelSpec make_model_spec(const TrainConfig& cfg, const MultiRelGraph& graph) {
    const GraphMeta& meta = graph.meta();
    ModelSpec s;
    s.num_nodes = meta.num_nodes;
    const FeatureMatrix& f = graph.features();
    s.learnable_features = f.source == FeatureSource::Learnable;
    s.feature_dim = f.source == FeatureSource::Learnable ? f.dim : f.values.cols();
    s.target_contexts = meta.target_contexts();
    if (s.target_contexts.empty()) {
        throw ConfigError("dataset has no target context");
    }
    if (cfg.in_domain) {
        for (ContextId c : s.target_contexts) {
            if (!meta.is_time_dependent(c)) {
                throw ConfigError("in-domain baseline needs a time-dependent target; " + context_token(c) +
                                  " has no history");
            }
        }
        s.input_contexts = s.target_contexts;
    } else {
        s.input_contexts = meta.known_contexts();
    }
    for (ContextId c : s.input_contexts) {
        s.input_time_dependent.push_back(meta.is_time_dependent(c));
    }
    s.arch = cfg.architecture();
    s.dropout_rate = cfg.dropout_rate;
    s.aggregator = cfg.aggregator;
    s.head_hidden = cfg.head_hidden;
    s.validate();
    return s;
}

SplitSpec make_splits(const TrainConfig& cfg, const MultiRelGraph& graph) {
    try {
        return rolling_splits(graph.meta().num_steps, cfg.schedule.size());
    } catch (const ArgumentError& e) {
        throw ConfigError(std::string("schedule does not fit the dataset: ") + e.what());
    }
}

namespace {

constexpr std::uint64_t kInitStream = 0x696e;
constexpr std::uint64_t kTrainStream = 0x7472;

bool learns_coefficients(const TrainConfig& cfg, std::size_t inputs) {
    return cfg.variant == Variant::GoodLc && !cfg.uniform_coefficients && inputs > 1;
}

bool uses_disentangler(const TrainConfig& cfg, std::size_t inputs) {
    return cfg.variant != Variant::GoodLc && !cfg.uniform_coefficients && inputs > 1;
}

// Parameters that receive updates; a fixed subset for a given configuration.
std::vector<Parameter*> active_parameters(GoodModel& model, const TrainConfig& cfg) {
    const std::size_t inputs = model.spec().num_inputs();
    std::vector<Parameter*> out;
    const std::vector<Parameter*> disent = model.disentangler_parameters();
    for (Parameter* p : model.parameters()) {
        if (p == &model.coefficient_logits() && !learns_coefficients(cfg, inputs)) {
            continue;
        }
        if (!uses_disentangler(cfg, inputs) && std::find(disent.begin(), disent.end(), p) != disent.end()) {
            continue;
        }
        out.push_back(p);
    }
    return out;
}

Matrix row_of(std::span<const double> v) {
    return Matrix(1, v.size(), std::vector<double>(v.begin(), v.end()));
}

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[uniform_index(rng, i)]);
    }
}

} // namespace

Trainer::Trainer(const MultiRelGraph& graph, TrainConfig cfg) : Trainer(graph, cfg, [&] {
    cfg.validate();
    Rng init(derive_seed(cfg.seed, kInitStream));
    return GoodModel(make_model_spec(cfg, graph), init);
}()) {}

Trainer::Trainer(const MultiRelGraph& graph, TrainConfig cfg, GoodModel model)
    : graph_(&graph),
      cfg_(std::move(cfg)),
      splits_(make_splits(cfg_, graph)),
      strategy_(resolve_strategy(cfg_, graph)),
      rng_(derive_seed(cfg_.seed, kTrainStream)),
      model_(std::move(model)),
      best_model_(model_) {
    check_compatible(model_.spec(), graph);
    validation_pairs_ = frozen_pairs(graph, model_.spec().target_contexts, splits_.validation.target, strategy_,
                                     cfg_.seed, kValidationStream);
    for (Parameter* p : model_.parameters()) {
        p->zero_grad();
    }
}

bool Trainer::finished() const noexcept {
    return epoch_ >= cfg_.epochs || since_best_ >= cfg_.patience;
}

double Trainer::validate_epoch() {
    const std::vector<double> q =
        learns_coefficients(cfg_, model_.spec().num_inputs())
            ? model_.learned_coefficients()
            : inference_coefficients(model_.spec().num_inputs());
    const auto scored = score_pairs(model_, *graph_, splits_.validation, q, validation_pairs_);
    std::vector<double> scores;
    std::vector<double> labels;
    std::vector<std::vector<double>> per_scores;
    std::vector<std::vector<double>> per_labels;
    for (const ScoredPairs& s : scored) {
        scores.insert(scores.end(), s.scores.begin(), s.scores.end());
        labels.insert(labels.end(), s.labels.begin(), s.labels.end());
        per_scores.push_back(s.scores);
        per_labels.push_back(s.labels);
    }
    history_.back().validation_loss = link_loss(per_scores, per_labels);
    return roc_auc(scores, labels);
}

bool Trainer::step_epoch() {
    if (finished()) {
        return false;
    }
    ++epoch_;
    const ModelSpec& spec = model_.spec();
    const std::size_t inputs = spec.num_inputs();
    const bool learn_q = learns_coefficients(cfg_, inputs);
    const bool disent = uses_disentangler(cfg_, inputs);

    std::vector<double> q;
    if (cfg_.uniform_coefficients || cfg_.variant == Variant::GoodLc) {
        q = inference_coefficients(inputs);
    } else {
        // one draw per epoch, shared by every mini-batch
        q = sample_coefficients(inputs, rng_);
    }

    const std::size_t num_targets = spec.target_contexts.size();
    std::vector<std::vector<NodePair>> pos(num_targets);
    std::vector<std::vector<NodePair>> neg(num_targets);
    std::size_t num_batches = 1;
    const std::size_t half = std::max<std::size_t>(1, cfg_.batch_size / 2);
    for (std::size_t j = 0; j < num_targets; ++j) {
        const ContextId c = spec.target_contexts[j];
        pos[j] = positive_edges(*graph_, c, TimeStep(splits_.train.target));
        if (pos[j].empty()) {
            throw ConfigError("target context " + context_token(c) + " has no training edges at " +
                              time_token(TimeStep(splits_.train.target)));
        }
        neg[j] = sample_negatives(*graph_, c, TimeStep(splits_.train.target), pos[j].size(), strategy_, rng_);
        shuffle(pos[j], rng_);
        shuffle(neg[j], rng_);
        num_batches = std::max(num_batches, (pos[j].size() + half - 1) / half);
    }

    const std::vector<Parameter*> active = active_parameters(model_, cfg_);
    const AdamConfig adam_cfg{cfg_.learning_rate, cfg_.weight_decay};
    EpochRecord record;
    record.epoch = epoch_;
    for (std::size_t b = 0; b < num_batches; ++b) {
        for (Parameter* p : model_.parameters()) {
            p->zero_grad();
        }
        Tape tape;
        Var x = model_.features(tape, *graph_);
        Var qv = learn_q ? model_.learned_coefficients(tape) : tape.constant(row_of(q));
        Var h = model_.embed(x, *graph_, splits_.train.inputs, qv, Mode::Train, rng_);
        std::vector<Var> scores;
        std::vector<std::vector<double>> labels;
        for (std::size_t j = 0; j < num_targets; ++j) {
            std::vector<NodePair> pairs;
            std::vector<double> y;
            for (const auto* side : {&pos[j], &neg[j]}) {
                const std::size_t lo = b * side->size() / num_batches;
                const std::size_t hi = (b + 1) * side->size() / num_batches;
                pairs.insert(pairs.end(), side->begin() + lo, side->begin() + hi);
                y.resize(pairs.size(), side == &pos[j] ? 1.0 : 0.0);
            }
            scores.push_back(predict_links(h, pairs, model_.link_head(j), Mode::Train, rng_));
            labels.push_back(std::move(y));
        }
        Var link = link_loss(scores, labels);
        Var d;
        if (disent) {
            d = disentangle_loss(q, disentangle(h, model_.disentangler(), Mode::Train, rng_));
        }
        Var total = total_loss(cfg_.variant, link, d);
        const double total_value = total.value()(0, 0);
        if (!std::isfinite(total_value)) {
            throw DivergenceError("training diverged at epoch " + std::to_string(epoch_) + ", batch " +
                                  std::to_string(b + 1) + " (loss " + std::to_string(total_value) + ")");
        }
        tape.backward(total);
        adam_step(active, adam_, adam_cfg);
        record.train_link_loss += link.value()(0, 0);
        record.train_disentangle_loss += d.valid() ? d.value()(0, 0) : 0.0;
        record.train_loss += total_value;
    }
    const double nb = static_cast<double>(num_batches);
    record.train_link_loss /= nb;
    record.train_disentangle_loss /= nb;
    record.train_loss /= nb;
    last_q_ = learn_q ? model_.learned_coefficients() : q;
    record.coefficients = last_q_;
    history_.push_back(record);

    const double auc = validate_epoch();
    history_.back().validation_auc = auc;
    if (auc > best_auc_) {
        best_auc_ = auc;
        best_epoch_ = epoch_;
        best_model_ = model_;
        best_q_ = last_q_;
        since_best_ = 0;
    } else {
        ++since_best_;
    }
    return !finished();
}

void Trainer::run() {
    while (step_epoch()) {
    }
}

ModelCheckpoint Trainer::best() const {
    return ModelCheckpoint{cfg_, best_model_, best_epoch_, best_q_};
}

ModelCheckpoint Trainer::current() const {
    return ModelCheckpoint{cfg_, model_, epoch_, last_q_};
}

void Trainer::save_state(const std::filesystem::path& path) const {
    json history = json::array();
    for (const EpochRecord& r : history_) {
        history.push_back(to_json(r));
    }
    json header{
        {"format_version", kCheckpointFormatVersion},
        {"kind", "train_state"},
        {"train_config", to_json(cfg_)},
        {"model", to_json(model_.spec())},
        {"epoch", epoch_},
        {"best_epoch", best_epoch_},
        {"best_auc", best_auc_},
        {"since_best", since_best_},
        {"last_coefficients", last_q_},
        {"best_coefficients", best_q_},
        {"adam_step", adam_.step},
        {"rng", save_rng_state(rng_)},
        {"history", history},
    };
    Blocks blocks;
    add_model_blocks(blocks, const_cast<GoodModel&>(model_), "");
    add_model_blocks(blocks, const_cast<GoodModel&>(best_model_), "best.");
    for (std::size_t i = 0; i < adam_.first_moment.size(); ++i) {
        blocks.add("adam.m" + std::to_string(i), adam_.first_moment[i]);
        blocks.add("adam.v" + std::to_string(i), adam_.second_moment[i]);
    }
    write_container(path, header, blocks);
}

Trainer Trainer::resume(const std::filesystem::path& path, const MultiRelGraph& graph) {
    auto [header, mats] = read_container(path);
    try {
        if (header.at("kind").get<std::string>() != "train_state") {
            throw IncompatibleError(path.string() + " is a model checkpoint, not a training state");
        }
        const TrainConfig cfg = train_config_from_json(header.at("train_config"));
        Trainer t(graph, cfg);
        if (to_json(t.model_.spec()) != header.at("model")) {
            throw IncompatibleError("training state " + path.string() + " was made for a different dataset layout");
        }
        const json& index = header.at("blocks");
        std::size_t pos = 0;
        restore_model_blocks(t.model_, index, mats, pos, "");
        restore_model_blocks(t.best_model_, index, mats, pos, "best.");
        t.adam_ = AdamState{};
        t.adam_.step = header.at("adam_step").get<std::size_t>();
        while (pos < mats.size()) {
            if (pos + 1 >= mats.size()) {
                throw ParseError("training state " + path.string() + " has an incomplete optimizer block");
            }
            t.adam_.first_moment.push_back(std::move(mats[pos++]));
            t.adam_.second_moment.push_back(std::move(mats[pos++]));
        }
        const std::size_t expected = t.adam_.step == 0 ? 0 : active_parameters(t.model_, cfg).size();
        if (t.adam_.first_moment.size() != expected) {
            throw ParseError("training state " + path.string() + " has " +
                             std::to_string(t.adam_.first_moment.size()) + " optimizer blocks, expected " +
                             std::to_string(expected));
        }
        t.epoch_ = header.at("epoch").get<std::size_t>();
        t.best_epoch_ = header.at("best_epoch").get<std::size_t>();
        t.best_auc_ = header.at("best_auc").get<double>();
        t.since_best_ = header.at("since_best").get<std::size_t>();
        t.last_q_ = header.at("last_coefficients").get<std::vector<double>>();
        t.best_q_ = header.at("best_coefficients").get<std::vector<double>>();
        t.rng_ = load_rng_state(header.at("rng").get<std::string>());
        t.history_.clear();
        for (const json& r : header.at("history")) {
            t.history_.push_back(epoch_record_from_json(r));
        }
        return t;
    } catch (const json::exception& e) {
        throw ParseError("training state " + path.string() + " has a corrupt header: " + e.what());
    }
}

TrainResult train(const MultiRelGraph& graph, const TrainConfig& cfg) {
    Trainer t(graph, cfg);
    t.run();
    return TrainResult{t.best(), t.history(), t.epochs_ran()};
}

// ---- inference --------------------------------------------------------------------

std::vector<double> inference_mixture(ModelCheckpoint& ckpt, Variant variant,
                                      const std::optional<std::vector<double>>& companion) {
    const std::size_t inputs = ckpt.model.spec().num_inputs();
    if (variant == Variant::GoodLcPlus) {
        if (!companion) {
            throw ConfigError("GOOD_LC_PLUS inference needs coefficients learned by a GOOD_LC run");
        }
        if (ckpt.config.variant == Variant::GoodLc) {
            throw IncompatibleError("GOOD_LC_PLUS needs weights trained with random coefficients (GOOD), not GOOD_LC");
        }
        if (companion->size() != inputs) {
            throw ConfigError("companion coefficients have " + std::to_string(companion->size()) +
                              " entries, the model has " + std::to_string(inputs) + " input contexts");
        }
        check_simplex(*companion);
        return *companion;
    }
    if (variant == Variant::GoodLc && !ckpt.config.uniform_coefficients) {
        return ckpt.model.learned_coefficients();
    }
    return inference_coefficients(inputs);
}

std::vector<ScoredPairs> score_pairs(GoodModel& model, const MultiRelGraph& graph, const Window& window,
                                     std::span<const double> q, std::span<const PairSet> pairs) {
    Tape tape;
    Rng unused(0);
    Var x = model.features(tape, graph);
    Var h = model.embed(x, graph, window.inputs, tape.constant(row_of(q)), Mode::Eval, unused);
    const auto& targets = model.spec().target_contexts;
    std::vector<ScoredPairs> out;
    for (const PairSet& set : pairs) {
        const auto it = std::find(targets.begin(), targets.end(), set.context);
        if (it == targets.end()) {
            throw IncompatibleError("model has no link head for context " + context_token(set.context));
        }
        Var s = predict_links(h, set.pairs, model.link_head(static_cast<std::size_t>(it - targets.begin())),
                              Mode::Eval, unused);
        ScoredPairs sp{set.context, set.pairs, set.labels, {}};
        sp.scores.assign(s.value().data().begin(), s.value().data().end());
        out.push_back(std::move(sp));
    }
    return out;
}

std::vector<ScoredPairs> infer(ModelCheckpoint& ckpt, const MultiRelGraph& graph, Variant variant,
                               const std::optional<std::vector<double>>& companion) {
    check_compatible(ckpt.model.spec(), graph);
    const std::vector<double> q = inference_mixture(ckpt, variant, companion);
    const SplitSpec splits = make_splits(ckpt.config, graph);
    const NegStrategy strategy = resolve_strategy(ckpt.config, graph);
    const auto pairs = frozen_pairs(graph, ckpt.model.spec().target_contexts, splits.test.target, strategy,
                                    ckpt.config.seed, kTestStream);
    return score_pairs(ckpt.model, graph, splits.test, q, pairs);
}

} // namespace good
