#include "slr/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "slr/blobfile.hpp"

namespace slr {

namespace {
constexpr const char* kCkptMagic = "SLRCKPT1";
}

RankingLossResult margin_ranking_loss(const Tensor2& sim, double margin, LossPairMode mode) {
    if (sim.rows != sim.cols)
        throw std::invalid_argument("margin_ranking_loss: non-square matrix " + sim.shape_str());
    const std::size_t b = sim.rows;
    if (b < 2)
        throw std::invalid_argument("margin_ranking_loss: need at least 2 pairs");
    RankingLossResult res;
    res.dsim = Tensor2(b, b);
    const double inv_b = 1.0 / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            if (i == j) continue;
            if (mode == LossPairMode::unordered_single && j < i) continue;
            double pos = sim.at(i, i);
            double h1 = sim.at(i, j) - pos + margin;  // text negative
            if (h1 > 0) {
                res.loss += h1 * inv_b;
                res.dsim.at(i, j) += inv_b;
                res.dsim.at(i, i) -= inv_b;
            }
            double h2 = sim.at(j, i) - pos + margin;  // video negative
            if (h2 > 0) {
                res.loss += h2 * inv_b;
                res.dsim.at(j, i) += inv_b;
                res.dsim.at(i, i) -= inv_b;
            }
        }
    }
    return res;
}

double train_epoch(const PairedCorpus& corpus, const WordEmbeddingTable& table,
                   JointEmbeddingModel& model, const TrainConfig& cfg,
                   Optimizer& opt, Rng& rng) {
    const std::size_t b = cfg.batch_size;
    if (corpus.size() < b)
        throw std::invalid_argument("train_epoch: corpus has " + std::to_string(corpus.size()) +
                                    " pairs, fewer than batch size " + std::to_string(b) +
                                    "; reduce the batch size");
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (cfg.shuffle) rng.shuffle(order);

    auto params = model.params();
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + b <= corpus.size(); start += b) {
        std::vector<Tensor2> vembs(b), tembs(b);
        std::vector<VideoEncodeCache> vcaches(b);
        std::vector<TextEncodeCache> tcaches(b);
        for (std::size_t n = 0; n < b; ++n) {
            std::size_t idx = order[start + n];
            vembs[n] = encode_video(corpus.videos[idx], model, &vcaches[n]);
            tembs[n] = encode_text(corpus.texts[idx], table, model, &tcaches[n]);
        }
        Tensor2 sim(b, b);
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < b; ++j)
                sim.at(i, j) = dot(vembs[i], tembs[j]);

        RankingLossResult lr = margin_ranking_loss(sim, cfg.margin, cfg.loss_pair_mode);
        loss_sum += lr.loss;
        ++batches;

        zero_grads(params);
        for (std::size_t n = 0; n < b; ++n) {
            Tensor2 dv(1, model.embed_dim), dt(1, model.embed_dim);
            for (std::size_t j = 0; j < b; ++j)
                dv.add_scaled(tembs[j], lr.dsim.at(n, j));
            for (std::size_t i = 0; i < b; ++i)
                dt.add_scaled(vembs[i], lr.dsim.at(i, n));
            std::size_t idx = order[start + n];
            encode_video_backward(corpus.videos[idx], model, vcaches[n], dv);
            encode_text_backward(model, tcaches[n], dt);
        }
        opt.step(params);
    }
    return batches ? loss_sum / static_cast<double>(batches) : 0.0;
}

Metrics evaluate_model(const PairedCorpus& corpus, const WordEmbeddingTable& table,
                       const JointEmbeddingModel& model, const std::vector<int>& ks) {
    std::vector<Tensor2> vembs(corpus.size()), tembs(corpus.size());
    std::vector<std::string> vids(corpus.size()), tids(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        vembs[i] = encode_video(corpus.videos[i], model);
        tembs[i] = encode_text(corpus.texts[i], table, model);
        vids[i] = corpus.videos[i].video_id;
        tids[i] = corpus.texts[i].text_id;
    }
    SimilarityMatrix sim = similarity_matrix(vembs, tembs, std::move(vids), std::move(tids));
    return evaluate(sim, ks, Direction::t2v);
}

std::vector<EpochRecord> train(const PairedCorpus& train_set, const PairedCorpus& val_set,
                               const WordEmbeddingTable& table, JointEmbeddingModel& model,
                               const TrainConfig& cfg, std::ostream* log) {
    Optimizer opt(cfg.optimizer);
    Rng rng(cfg.seed);
    auto params = model.params();
    std::vector<EpochRecord> history;
    for (std::size_t e = 1; e <= cfg.epochs; ++e) {
        EpochRecord rec;
        rec.epoch = e;
        rec.train_loss = train_epoch(train_set, table, model, cfg, opt, rng);
        rec.val_metrics = evaluate_model(val_set, table, model, cfg.eval_ks);
        rec.geometric_mean = rec.val_metrics.geometric_mean();
        rec.snapshot.reserve(params.size());
        for (ParamGrad* p : params) rec.snapshot.push_back(p->value);
        if (log) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%zu %.6f %.4f %.4f %.4f %.2f %.4f",
                          e, rec.train_loss,
                          rec.val_metrics.r_at.at(1), rec.val_metrics.r_at.at(5),
                          rec.val_metrics.r_at.at(10), rec.val_metrics.med_r,
                          rec.geometric_mean);
            (*log) << buf << "\n";
        }
        history.push_back(std::move(rec));
    }
    return history;
}

std::size_t select_model(const std::vector<EpochRecord>& history) {
    if (history.empty())
        throw std::invalid_argument("select_model: empty history");
    std::size_t best = 0;
    for (std::size_t i = 1; i < history.size(); ++i)
        if (history[i].geometric_mean > history[best].geometric_mean) best = i;
    return best;
}

void restore_snapshot(JointEmbeddingModel& model, const std::vector<Tensor2>& snapshot) {
    auto params = model.params();
    if (snapshot.size() != params.size())
        throw std::invalid_argument("restore_snapshot: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->value.same_shape(snapshot[i]))
            throw std::invalid_argument("restore_snapshot: shape mismatch for " + params[i]->name);
        params[i]->value = snapshot[i];
    }
}

void save_cm_checkpoint(const std::string& path, JointEmbeddingModel& model,
                        std::uint64_t seed) {
    BlobFile f;
    f.manifest.push_back("kind cm");
    f.manifest.push_back("pooling " + pooling_name(model.pooling_mode));
    f.manifest.push_back("feature_dim " + std::to_string(model.feature_dim));
    f.manifest.push_back("word_dim " + std::to_string(model.word_dim));
    f.manifest.push_back("embed_dim " + std::to_string(model.embed_dim));
    f.manifest.push_back("clusters " + std::to_string(model.text_netvlad.clusters()));
    f.manifest.push_back("seed " + std::to_string(seed));
    for (ParamGrad* p : model.params()) {
        f.manifest.push_back("param " + p->name + " " + std::to_string(p->value.rows) + " " +
                             std::to_string(p->value.cols));
        f.append(p->value);
    }
    f.save(path, kCkptMagic);
}

JointEmbeddingModel load_cm_checkpoint(const std::string& path) {
    BlobFile f = BlobFile::load(path, kCkptMagic);
    std::size_t fd = 0, wd = 0, ed = 0, k = 0;
    PoolingMode mode = PoolingMode::average;
    std::vector<std::string> param_lines;
    for (const auto& line : f.manifest) {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "kind") {
            std::string kind;
            ss >> kind;
            if (kind != "cm") throw std::runtime_error(path + ": not a cm checkpoint");
        } else if (key == "pooling") {
            std::string m;
            ss >> m;
            mode = parse_pooling(m);
        } else if (key == "feature_dim") ss >> fd;
        else if (key == "word_dim") ss >> wd;
        else if (key == "embed_dim") ss >> ed;
        else if (key == "clusters") ss >> k;
        else if (key == "seed") { /* informational */ }
        else if (key == "param") param_lines.push_back(line);
        else throw std::runtime_error(path + ": unknown manifest key `" + key + "`");
    }
    Rng dummy(0);
    JointEmbeddingModel model = JointEmbeddingModel::init(fd, wd, ed, k, mode, dummy);
    auto params = model.params();
    if (param_lines.size() != params.size())
        throw std::runtime_error(path + ": expected " + std::to_string(params.size()) +
                                 " params, found " + std::to_string(param_lines.size()));
    std::size_t off = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::istringstream ss(param_lines[i]);
        std::string key, name;
        std::size_t r = 0, c = 0;
        ss >> key >> name >> r >> c;
        if (name != params[i]->name)
            throw std::runtime_error(path + ": parameter order mismatch at `" + name + "`");
        if (r != params[i]->value.rows || c != params[i]->value.cols)
            throw std::runtime_error(path + ": shape mismatch for `" + name + "`");
        params[i]->value = f.take(&off, r, c, path);
    }
    if (off != f.blob.size())
        throw std::runtime_error(path + ": trailing blob data");
    return model;
}

}  // namespace slr
