#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "slr/gradcheck.hpp"
#include "slr/trainer.hpp"

using namespace slr;

namespace {

Tensor2 random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    Tensor2 t(r, c);
    for (double& v : t.data) v = rng.normal(0, scale);
    return t;
}

WordEmbeddingTable tiny_table(std::size_t dim, Rng& rng) {
    WordEmbeddingTable t;
    std::vector<std::string> words = {"red",  "green", "blue",  "gold",
                                      "gray", "pink",  "<unk>"};
    t.vectors = random_tensor(words.size(), dim, rng);
    for (std::size_t i = 0; i < words.size(); ++i) t.vocab[words[i]] = i;
    t.unk_index = 6;
    return t;
}

// independent brute-force evaluation of the hinge double sum
double loss_oracle(const Tensor2& sim, double margin) {
    double total = 0;
    for (std::size_t i = 0; i < sim.rows; ++i)
        for (std::size_t j = 0; j < sim.cols; ++j) {
            if (i == j) continue;
            total += std::max(0.0, sim.at(i, j) - sim.at(i, i) + margin);
            total += std::max(0.0, sim.at(j, i) - sim.at(i, i) + margin);
        }
    return total / static_cast<double>(sim.rows);
}

PairedCorpus separable_corpus(std::size_t n, std::size_t dim, Rng& rng) {
    PairedCorpus c;
    std::vector<std::string> words = {"red", "green", "blue", "gold", "gray", "pink"};
    for (std::size_t i = 0; i < n; ++i) {
        Tensor2 feats(3, dim);
        for (std::size_t t = 0; t < 3; ++t) {
            feats.at(t, (i % dim)) = 2.0;
            for (std::size_t j = 0; j < dim; ++j) feats.at(t, j) += rng.normal(0, 0.05);
        }
        c.videos.push_back({"v" + std::to_string(i), feats});
        c.texts.push_back({"t" + std::to_string(i), {words[i % words.size()]}});
    }
    return c;
}

}  // namespace

TEST_CASE("ranking loss on the worked 2x2 example is 0.25") {
    Tensor2 sim{{0.5, 0.6}, {0.4, 0.7}};
    RankingLossResult r = margin_ranking_loss(sim, 0.2);
    CHECK(r.loss == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("ranking loss is zero when positives dominate by the margin") {
    Tensor2 sim{{1.0, 0.1, 0.0}, {0.2, 1.0, 0.1}, {0.0, 0.2, 1.0}};
    RankingLossResult r = margin_ranking_loss(sim, 0.2);
    CHECK(r.loss == 0.0);
    for (double g : r.dsim.data) CHECK(g == 0.0);
}

TEST_CASE("ranking loss matches brute-force oracle on random matrices") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t b = 2 + rng.index(5);
        Tensor2 sim = random_tensor(b, b, rng);
        RankingLossResult r = margin_ranking_loss(sim, 0.2);
        CHECK(r.loss == doctest::Approx(loss_oracle(sim, 0.2)).epsilon(1e-12));
    }
}

TEST_CASE("ranking loss is invariant to a constant score shift") {
    Rng rng(32);
    Tensor2 sim = random_tensor(4, 4, rng);
    double base = margin_ranking_loss(sim, 0.2).loss;
    Tensor2 shifted = sim;
    for (double& v : shifted.data) v += 3.7;
    CHECK(margin_ranking_loss(shifted, 0.2).loss == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("ranking loss gradient passes finite differences") {
    Rng rng(33);
    for (int trial = 0; trial < 10; ++trial) {
        ParamGrad s("sim", random_tensor(4, 4, rng));
        auto f = [&]() { return margin_ranking_loss(s.value, 0.2).loss; };
        s.zero_grad();
        s.grad = margin_ranking_loss(s.value, 0.2).dsim;
        CHECK(finite_diff_check(f, {&s}, 1e-6) < 1e-4);
    }
}

TEST_CASE("unordered_single mode matches its i<j brute force") {
    Rng rng(34);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor2 sim = random_tensor(3, 3, rng);
        double want = 0;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = i + 1; j < 3; ++j) {
                want += std::max(0.0, sim.at(i, j) - sim.at(i, i) + 0.2);
                want += std::max(0.0, sim.at(j, i) - sim.at(i, i) + 0.2);
            }
        want /= 3.0;
        double got = margin_ranking_loss(sim, 0.2, LossPairMode::unordered_single).loss;
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("ranking loss rejects non-square input") {
    CHECK_THROWS_AS(margin_ranking_loss(Tensor2(2, 3), 0.2), std::invalid_argument);
}

TEST_CASE("train_epoch with lr=0 leaves parameters frozen") {
    Rng rng(35);
    WordEmbeddingTable table = tiny_table(6, rng);
    PairedCorpus corpus = separable_corpus(8, 8, rng);
    JointEmbeddingModel model =
        JointEmbeddingModel::init(8, 6, 10, 2, PoolingMode::average, rng, &table);
    std::vector<Tensor2> before;
    for (ParamGrad* p : model.params()) before.push_back(p->value);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.optimizer.learning_rate = 0;
    cfg.optimizer.weight_decay = 0;
    Optimizer opt(cfg.optimizer);
    Rng trng(1);
    train_epoch(corpus, table, model, cfg, opt, trng);
    auto params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i)
        for (std::size_t j = 0; j < before[i].data.size(); ++j)
            CHECK(params[i]->value.data[j] == before[i].data[j]);
}

TEST_CASE("train_epoch rejects a corpus smaller than the batch") {
    Rng rng(36);
    WordEmbeddingTable table = tiny_table(6, rng);
    PairedCorpus corpus = separable_corpus(3, 8, rng);
    JointEmbeddingModel model =
        JointEmbeddingModel::init(8, 6, 10, 2, PoolingMode::average, rng, &table);
    TrainConfig cfg;
    cfg.batch_size = 8;
    Optimizer opt(cfg.optimizer);
    Rng trng(1);
    CHECK_THROWS_WITH_AS(train_epoch(corpus, table, model, cfg, opt, trng),
                         doctest::Contains("batch size"), std::invalid_argument);
}

TEST_CASE("training drives the loss down and overfits a small corpus") {
    Rng rng(37);
    WordEmbeddingTable table = tiny_table(6, rng);
    PairedCorpus corpus = separable_corpus(6, 8, rng);
    corpus.split = Split::train;
    JointEmbeddingModel model =
        JointEmbeddingModel::init(8, 6, 10, 2, PoolingMode::average, rng, &table);
    TrainConfig cfg;
    cfg.batch_size = 6;
    cfg.epochs = 60;
    cfg.optimizer.learning_rate = 0.01;
    cfg.optimizer.weight_decay = 0;
    cfg.seed = 5;
    std::ostringstream log;
    auto history = train(corpus, corpus, table, model, cfg, &log);
    REQUIRE(history.size() == 60);
    CHECK(history.back().train_loss < history.front().train_loss * 0.5);
    std::size_t best = select_model(history);
    CHECK(history[best].val_metrics.r_at.at(1) == doctest::Approx(100.0));
    CHECK(history[best].val_metrics.med_r == doctest::Approx(1.0));
    // log has one line per epoch
    std::size_t lines = 0;
    std::string line;
    std::istringstream in(log.str());
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 60);
}

TEST_CASE("training is deterministic for a fixed seed") {
    auto run = [&]() {
        Rng rng(40);
        WordEmbeddingTable table = tiny_table(6, rng);
        PairedCorpus corpus = separable_corpus(8, 8, rng);
        JointEmbeddingModel model =
            JointEmbeddingModel::init(8, 6, 10, 2, PoolingMode::average, rng, &table);
        TrainConfig cfg;
        cfg.batch_size = 4;
        cfg.epochs = 3;
        cfg.seed = 9;
        auto history = train(corpus, corpus, table, model, cfg);
        return history.back().snapshot;
    };
    auto a = run(), b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].data.size(); ++j)
            CHECK(a[i].data[j] == b[i].data[j]);
}

TEST_CASE("geometric mean of (10, 20, 40) is 20") {
    Metrics m;
    m.r_at[1] = 10;
    m.r_at[5] = 20;
    m.r_at[10] = 40;
    CHECK(m.geometric_mean() == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("select_model picks the best epoch, earliest on ties") {
    std::vector<EpochRecord> h(4);
    h[0].geometric_mean = 10;
    h[1].geometric_mean = 30;
    h[2].geometric_mean = 30;
    h[3].geometric_mean = 20;
    CHECK(select_model(h) == 1);
    CHECK_THROWS_AS(select_model({}), std::invalid_argument);
}

TEST_CASE("restore_snapshot round-trips parameter values") {
    Rng rng(41);
    WordEmbeddingTable table = tiny_table(6, rng);
    JointEmbeddingModel model =
        JointEmbeddingModel::init(8, 6, 10, 2, PoolingMode::average, rng, &table);
    std::vector<Tensor2> snap;
    for (ParamGrad* p : model.params()) snap.push_back(p->value);
    for (ParamGrad* p : model.params())
        for (double& v : p->value.data) v += 1.0;
    restore_snapshot(model, snap);
    auto params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i)
        for (std::size_t j = 0; j < snap[i].data.size(); ++j)
            CHECK(params[i]->value.data[j] == snap[i].data[j]);
}

TEST_CASE("cm checkpoint round-trips through its binary format") {
    Rng rng(42);
    WordEmbeddingTable table = tiny_table(6, rng);
    JointEmbeddingModel model =
        JointEmbeddingModel::init(8, 6, 10, 2, PoolingMode::max, rng, &table);
    std::string path = (std::filesystem::temp_directory_path() / "slr_cm.bin").string();
    save_cm_checkpoint(path, model, 123);
    JointEmbeddingModel loaded = load_cm_checkpoint(path);
    CHECK(loaded.pooling_mode == PoolingMode::max);
    CHECK(loaded.feature_dim == model.feature_dim);
    CHECK(loaded.embed_dim == model.embed_dim);
    auto pa = model.params(), pb = loaded.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i]->value.same_shape(pb[i]->value));
        for (std::size_t j = 0; j < pa[i]->value.data.size(); ++j)
            CHECK(pb[i]->value.data[j] ==
                  doctest::Approx(pa[i]->value.data[j]).epsilon(1e-6));
    }
    // loaded model produces the same embeddings up to f32 storage precision
    FeatureSequence seq{"v", random_tensor(4, 8, rng)};
    Tensor2 ea = encode_video(seq, model), eb = encode_video(seq, loaded);
    for (std::size_t j = 0; j < ea.data.size(); ++j)
        CHECK(eb.data[j] == doctest::Approx(ea.data[j]).epsilon(1e-5));
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects a truncated file") {
    Rng rng(43);
    WordEmbeddingTable table = tiny_table(6, rng);
    JointEmbeddingModel model =
        JointEmbeddingModel::init(8, 6, 10, 2, PoolingMode::average, rng, &table);
    std::string path = (std::filesystem::temp_directory_path() / "slr_cm_trunc.bin").string();
    save_cm_checkpoint(path, model, 1);
    auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 64);
    CHECK_THROWS(load_cm_checkpoint(path));
    std::filesystem::remove(path);
}
