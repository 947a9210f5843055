#include "doctest.h"

#include <cmath>
#include <fstream>
#include <iterator>

#include "good/errors.hpp"
#include "good/trainer.hpp"
#include "helpers.hpp"

using namespace good;

namespace {

const MultiRelGraph& toy_graph() {
    static const MultiRelGraph g = testutil::random_graph(30, 2, 6, 4, 11, 0.2);
    return g;
}

TrainConfig small_config(std::size_t epochs = 5) {
    TrainConfig cfg;
    cfg.learning_rate = 3e-3;
    cfg.epochs = epochs;
    cfg.patience = 100;
    cfg.batch_size = 32;
    cfg.hidden_dim = 8;
    cfg.head_hidden = 8;
    cfg.dropout_rate = 0.2;
    cfg.seed = 5;
    return cfg;
}

std::vector<Matrix> values_of(GoodModel& model) {
    std::vector<Matrix> out;
    for (Parameter* p : model.parameters()) {
        out.push_back(p->value);
    }
    return out;
}

std::vector<Matrix> values_of(std::span<Parameter* const> params) {
    std::vector<Matrix> out;
    for (Parameter* p : params) {
        out.push_back(p->value);
    }
    return out;
}

std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

} // namespace

TEST_CASE("adam examples") {
    SUBCASE("zero gradient is a fixed point") {
        Parameter p("p", Matrix::from_rows({{1.5, -2.0, 0.25}}));
        AdamState state;
        AdamConfig cfg;
        cfg.weight_decay = 0.0;
        cfg.learning_rate = 0.1;
        for (int i = 0; i < 10; ++i) {
            p.zero_grad();
            Parameter* ps[] = {&p};
            adam_step(ps, state, cfg);
        }
        CHECK(p.value == Matrix::from_rows({{1.5, -2.0, 0.25}}));
        CHECK(state.step == 10);
    }
    SUBCASE("minimizes a parabola") {
        Parameter x("x", Matrix(1, 1, 1.0));
        AdamState state;
        AdamConfig cfg;
        cfg.weight_decay = 0.0;
        cfg.learning_rate = 0.1;
        for (int i = 0; i < 50; ++i) {
            x.grad = Matrix(1, 1, 2.0 * x.value(0, 0));
            Parameter* ps[] = {&x};
            adam_step(ps, state, cfg);
            if (i == 0) {
                // bias correction makes the first step lr * g / (|g| + eps)
                CHECK(std::abs((1.0 - x.value(0, 0)) - 0.1) < 1e-8);
            }
        }
        CHECK(std::abs(x.value(0, 0)) < 0.5);
    }
    SUBCASE("weight decay shrinks a parameter with zero loss gradient") {
        Parameter w("w", Matrix(1, 1, 2.0));
        AdamState state;
        AdamConfig cfg;
        cfg.weight_decay = 0.5;
        cfg.learning_rate = 0.01;
        for (int i = 0; i < 20; ++i) {
            w.zero_grad();
            Parameter* ps[] = {&w};
            adam_step(ps, state, cfg);
        }
        CHECK(w.value(0, 0) < 2.0);
        CHECK(w.value(0, 0) > 1.5);
    }
}

TEST_CASE("train config validation and round trip") {
    TrainConfig cfg = small_config();
    cfg.variant = Variant::GoodLc;
    cfg.aggregator = Aggregator::DStack;
    cfg.negatives = "non_edge";
    cfg.widths = {8, 6, 4};
    const TrainConfig back = train_config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));

    TrainConfig bad = small_config();
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_config();
    bad.dropout_rate = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_config();
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_config();
    bad.negatives = "sometimes";
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    const MultiRelGraph short_graph = testutil::random_graph(12, 1, 5, 2, 3);
    CHECK_THROWS_AS(make_splits(small_config(), short_graph), ConfigError);
}

TEST_CASE("frozen evaluation pairs are balanced and reproducible") {
    const MultiRelGraph& g = toy_graph();
    const std::vector<ContextId> targets{2};
    const NegStrategy s = NegStrategy::default_for(true);
    const auto a = frozen_pairs(g, targets, 5, s, 9, kTestStream);
    const auto b = frozen_pairs(g, targets, 5, s, 9, kTestStream);
    const auto other = frozen_pairs(g, targets, 5, s, 9, kValidationStream);
    REQUIRE(a.size() == 1);
    CHECK(a[0].pairs == b[0].pairs);
    CHECK(a[0].pairs != other[0].pairs);
    const auto positives = std::count(a[0].labels.begin(), a[0].labels.end(), 1.0);
    CHECK(static_cast<std::size_t>(positives) * 2 == a[0].labels.size());
    CHECK(static_cast<std::size_t>(positives) == g.edges(2, TimeStep(5)).count(EdgeLabel::Positive));
}

TEST_CASE("training smoke run and determinism") {
    const TrainConfig cfg = small_config(6);
    Trainer a(toy_graph(), cfg);
    a.run();
    Trainer b(toy_graph(), cfg);
    b.run();
    CHECK(a.finished());
    CHECK(a.epochs_ran() == 6);
    REQUIRE(a.history().size() == 6);
    CHECK(a.best_epoch() >= 1);
    CHECK(a.best_epoch() <= a.epochs_ran());
    CHECK(a.best_validation_auc() >= 0.0);
    CHECK(a.best_validation_auc() <= 1.0);
    for (std::size_t i = 0; i < a.history().size(); ++i) {
        CHECK(a.history()[i].train_loss == b.history()[i].train_loss);
        CHECK(a.history()[i].validation_auc == b.history()[i].validation_auc);
        CHECK(a.history()[i].coefficients == b.history()[i].coefficients);
        CHECK(std::isfinite(a.history()[i].train_loss));
    }
    CHECK(values_of(a.model()) == values_of(b.model()));

    TrainConfig other = cfg;
    other.seed = 6;
    Trainer c(toy_graph(), other);
    c.step_epoch();
    CHECK(c.history()[0].train_loss != a.history()[0].train_loss);
}

TEST_CASE("training reduces the loss") {
    TrainConfig cfg = small_config(30);
    cfg.learning_rate = 1e-2;
    cfg.dropout_rate = 0.0;
    Trainer t(toy_graph(), cfg);
    t.run();
    const auto& h = t.history();
    double head = 0.0;
    double tail = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        head += h[i].train_link_loss;
        tail += h[h.size() - 1 - i].train_link_loss;
    }
    CHECK(tail < head);
}

TEST_CASE("early stopping respects patience") {
    TrainConfig cfg = small_config(40);
    cfg.patience = 2;
    Trainer t(toy_graph(), cfg);
    t.run();
    const bool stopped_early = t.epochs_ran() < cfg.epochs;
    if (stopped_early) {
        CHECK(t.epochs_ran() - t.best_epoch() == cfg.patience);
    }
    CHECK(t.best().epoch == t.best_epoch());
    double best = -1.0;
    for (const EpochRecord& r : t.history()) {
        best = std::max(best, r.validation_auc);
    }
    CHECK(best == t.best_validation_auc());
    CHECK_FALSE(t.step_epoch());
}

TEST_CASE("variant specific training behaviour") {
    SUBCASE("GOOD draws a fresh mixture each epoch and infers with equal weights") {
        Trainer t(toy_graph(), small_config(3));
        t.run();
        CHECK(t.history()[0].coefficients != t.history()[1].coefficients);
        ModelCheckpoint ckpt = t.best();
        CHECK(inference_mixture(ckpt, Variant::Good, std::nullopt) == std::vector<double>{0.5, 0.5});
        CHECK_THROWS_AS(inference_mixture(ckpt, Variant::GoodLcPlus, std::nullopt), ConfigError);
    }
    SUBCASE("GOOD_LC never moves the disentangler") {
        TrainConfig cfg = small_config(3);
        cfg.variant = Variant::GoodLc;
        Trainer t(toy_graph(), cfg);
        const auto before = values_of(t.model().disentangler_parameters());
        const auto logits_before = t.model().coefficient_logits().value;
        t.run();
        CHECK(values_of(t.model().disentangler_parameters()) == before);
        CHECK(t.model().coefficient_logits().value != logits_before);
        for (const EpochRecord& r : t.history()) {
            CHECK(r.train_disentangle_loss == 0.0);
            CHECK(r.train_loss == r.train_link_loss);
        }
        ModelCheckpoint ckpt = t.best();
        const auto q = inference_mixture(ckpt, Variant::GoodLc, std::nullopt);
        CHECK_NOTHROW(check_simplex(q));
        CHECK_THROWS_AS(inference_mixture(ckpt, Variant::GoodLcPlus, q), IncompatibleError);
    }
    SUBCASE("equal coefficients keep q uniform and the disentangler fixed") {
        TrainConfig cfg = small_config(3);
        cfg.uniform_coefficients = true;
        Trainer t(toy_graph(), cfg);
        const auto before = values_of(t.model().disentangler_parameters());
        t.run();
        CHECK(values_of(t.model().disentangler_parameters()) == before);
        for (const EpochRecord& r : t.history()) {
            CHECK(r.coefficients == std::vector<double>{0.5, 0.5});
        }
    }
    SUBCASE("GOOD_LC_PLUS with equal companion weights reproduces GOOD") {
        Trainer t(toy_graph(), small_config(3));
        t.run();
        ModelCheckpoint ckpt = t.best();
        const auto good = infer(ckpt, toy_graph(), Variant::Good);
        const auto plus = infer(ckpt, toy_graph(), Variant::GoodLcPlus, std::vector<double>{0.5, 0.5});
        REQUIRE(good.size() == plus.size());
        CHECK(good[0].scores == plus[0].scores);
        CHECK(good[0].pairs == plus[0].pairs);
        const auto skewed = infer(ckpt, toy_graph(), Variant::GoodLcPlus, std::vector<double>{0.9, 0.1});
        CHECK(skewed[0].scores != good[0].scores);
        CHECK_THROWS_AS(infer(ckpt, toy_graph(), Variant::GoodLcPlus, std::vector<double>{1.0}), ConfigError);
    }
    SUBCASE("in-domain runs encode only the target") {
        TrainConfig cfg = small_config(2);
        cfg.in_domain = true;
        Trainer t(toy_graph(), cfg);
        t.run();
        CHECK(t.model().spec().input_contexts == std::vector<ContextId>{2});
        CHECK(t.history()[0].coefficients == std::vector<double>{1.0});
    }
}

TEST_CASE("model checkpoints") {
    const auto dir = testutil::temp_dir("trainer_ckpt");
    Trainer t(toy_graph(), small_config(2));
    t.run();
    const ModelCheckpoint ckpt = t.best();
    save_checkpoint(ckpt, dir / "a.ckpt");
    ModelCheckpoint loaded = load_checkpoint(dir / "a.ckpt");
    save_checkpoint(loaded, dir / "b.ckpt");
    CHECK(read_bytes(dir / "a.ckpt") == read_bytes(dir / "b.ckpt"));
    CHECK(loaded.epoch == ckpt.epoch);
    CHECK(loaded.last_coefficients == ckpt.last_coefficients);

    ModelCheckpoint original = ckpt;
    const auto s1 = infer(original, toy_graph(), Variant::Good);
    const auto s2 = infer(loaded, toy_graph(), Variant::Good);
    CHECK(s1[0].scores == s2[0].scores);

    SUBCASE("truncation") {
        const std::string bytes = read_bytes(dir / "a.ckpt");
        for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
            write_bytes(dir / "cut.ckpt", bytes.substr(0, cut));
            CHECK_THROWS_AS(load_checkpoint(dir / "cut.ckpt"), ParseError);
        }
    }
    SUBCASE("format version mismatch") {
        std::string bytes = read_bytes(dir / "a.ckpt");
        const std::string key = "\"format_version\":" + std::to_string(kCheckpointFormatVersion);
        const auto at = bytes.find(key);
        REQUIRE(at != std::string::npos);
        bytes[at + key.size() - 1] = '9';
        write_bytes(dir / "v.ckpt", bytes);
        CHECK_THROWS_AS(load_checkpoint(dir / "v.ckpt"), IncompatibleError);
    }
    SUBCASE("kinds are not interchangeable") {
        t.save_state(dir / "state.bin");
        CHECK_THROWS_AS(load_checkpoint(dir / "state.bin"), IncompatibleError);
        CHECK_THROWS_AS(Trainer::resume(dir / "a.ckpt", toy_graph()), IncompatibleError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), IoError);
    }
    SUBCASE("incompatible dataset") {
        const MultiRelGraph bigger = testutil::random_graph(31, 2, 6, 4, 11);
        CHECK_THROWS_AS(infer(loaded, bigger, Variant::Good), IncompatibleError);
    }
}

TEST_CASE("resuming matches an uninterrupted run") {
    const auto dir = testutil::temp_dir("trainer_resume");
    const TrainConfig cfg = small_config(6);
    Trainer whole(toy_graph(), cfg);
    whole.run();

    Trainer first(toy_graph(), cfg);
    for (int i = 0; i < 3; ++i) {
        first.step_epoch();
    }
    first.save_state(dir / "state.bin");
    Trainer resumed = Trainer::resume(dir / "state.bin", toy_graph());
    CHECK(resumed.epochs_ran() == 3);
    resumed.run();

    CHECK(resumed.epochs_ran() == whole.epochs_ran());
    CHECK(resumed.best_epoch() == whole.best_epoch());
    CHECK(resumed.best_validation_auc() == whole.best_validation_auc());
    REQUIRE(resumed.history().size() == whole.history().size());
    for (std::size_t i = 0; i < whole.history().size(); ++i) {
        CHECK(resumed.history()[i].train_loss == whole.history()[i].train_loss);
        CHECK(resumed.history()[i].coefficients == whole.history()[i].coefficients);
    }
    CHECK(values_of(resumed.model()) == values_of(whole.model()));
    CHECK(resumed.optimizer().step == whole.optimizer().step);
}
